#include "bitplan/netlab/descriptor.hpp"

#include <set>

#include "bitplan/common/error.hpp"

namespace bitplan::netlab {

std::string to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv: return "conv";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::activation: return "activation";
  }
  return "?";
}

LayerKind layer_kind_from_string(const std::string& s) {
  if (s == "dense") return LayerKind::dense;
  if (s == "conv") return LayerKind::conv;
  if (s == "batchnorm") return LayerKind::batchnorm;
  if (s == "activation") return LayerKind::activation;
  throw InputError("E_DESCRIPTOR", "unknown layer kind '" + s + "'");
}

void ModelDescriptor::validate() const {
  std::set<std::string> names;
  for (const auto& l : layers) {
    if (l.name.empty()) throw InputError("E_DESCRIPTOR", "layer with empty name");
    if (!names.insert(l.name).second)
      throw InputError("E_DESCRIPTOR", "duplicate layer name '" + l.name + "'");
    if (l.param_count < 0 || l.mac_count < 0)
      throw InputError("E_DESCRIPTOR", "negative count on layer '" + l.name + "'");
    if (l.quantizable &&
        (l.kind == LayerKind::batchnorm || l.kind == LayerKind::activation))
      throw InputError("E_DESCRIPTOR",
                       "layer '" + l.name + "' of kind " + to_string(l.kind) +
                           " cannot be quantizable");
  }
}

std::vector<const LayerSpec*> ModelDescriptor::quantizable_layers() const {
  std::vector<const LayerSpec*> out;
  for (const auto& l : layers)
    if (l.quantizable) out.push_back(&l);
  return out;
}

const LayerSpec* ModelDescriptor::find(const std::string& name) const {
  for (const auto& l : layers)
    if (l.name == name) return &l;
  return nullptr;
}

std::int64_t ModelDescriptor::total_params(bool quantizable_only) const {
  std::int64_t n = 0;
  for (const auto& l : layers)
    if (!quantizable_only || l.quantizable) n += l.param_count;
  return n;
}

std::int64_t ModelDescriptor::total_macs(bool quantizable_only) const {
  std::int64_t n = 0;
  for (const auto& l : layers)
    if (!quantizable_only || l.quantizable) n += l.mac_count;
  return n;
}

Json ModelDescriptor::to_json() const {
  Json arr = Json::array();
  for (const auto& l : layers) {
    Json o;
    o["name"] = l.name;
    o["kind"] = to_string(l.kind);
    o["param_count"] = l.param_count;
    o["mac_count"] = l.mac_count;
    o["quantizable"] = l.quantizable;
    if (l.geometry) {
      const Geometry& g = *l.geometry;
      switch (l.kind) {
        case LayerKind::dense:
          o["in"] = g.in;
          o["out"] = g.out;
          break;
        case LayerKind::conv:
          o["in_channels"] = g.in_channels;
          o["out_channels"] = g.out_channels;
          o["kernel"] = g.kernel;
          o["in_h"] = g.in_h;
          o["in_w"] = g.in_w;
          break;
        case LayerKind::batchnorm:
          o["channels"] = g.channels;
          o["spatial"] = g.spatial;
          break;
        case LayerKind::activation:
          o["fn"] = g.fn == ActivationFn::tanh ? "tanh" : "relu";
          o["width"] = g.width;
          break;
      }
    }
    arr.push_back(std::move(o));
  }
  Json j;
  j["layers"] = std::move(arr);
  return j;
}

ModelDescriptor ModelDescriptor::from_json(const Json& j) {
  ModelDescriptor d;
  try {
    for (const auto& o : j.at("layers")) {
      LayerSpec l;
      l.name = o.at("name").get<std::string>();
      l.kind = layer_kind_from_string(o.at("kind").get<std::string>());
      l.param_count = o.at("param_count").get<std::int64_t>();
      l.mac_count = o.at("mac_count").get<std::int64_t>();
      l.quantizable = o.at("quantizable").get<bool>();
      Geometry g;
      bool has = false;
      switch (l.kind) {
        case LayerKind::dense:
          if (o.contains("in")) {
            g.in = o.at("in").get<std::size_t>();
            g.out = o.at("out").get<std::size_t>();
            has = true;
          }
          break;
        case LayerKind::conv:
          if (o.contains("in_channels")) {
            g.in_channels = o.at("in_channels").get<std::size_t>();
            g.out_channels = o.at("out_channels").get<std::size_t>();
            g.kernel = o.at("kernel").get<std::size_t>();
            g.in_h = o.at("in_h").get<std::size_t>();
            g.in_w = o.at("in_w").get<std::size_t>();
            has = true;
          }
          break;
        case LayerKind::batchnorm:
          if (o.contains("channels")) {
            g.channels = o.at("channels").get<std::size_t>();
            g.spatial = o.at("spatial").get<std::size_t>();
            has = true;
          }
          break;
        case LayerKind::activation:
          if (o.contains("fn")) {
            const auto fn = o.at("fn").get<std::string>();
            if (fn == "tanh") g.fn = ActivationFn::tanh;
            else if (fn == "relu") g.fn = ActivationFn::relu;
            else throw InputError("E_DESCRIPTOR", "unknown activation '" + fn + "'");
            g.width = o.value("width", std::size_t{0});
            has = true;
          }
          break;
      }
      if (has) l.geometry = g;
      d.layers.push_back(std::move(l));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("E_DESCRIPTOR", std::string("malformed descriptor: ") + e.what());
  }
  d.validate();
  return d;
}

ModelDescriptor ModelDescriptor::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw InputError("E_DESCRIPTOR_NOT_FOUND", "model descriptor not found: " + path.string());
  return from_json(read_json_file(path));
}

namespace {

class ResNetBuilder {
 public:
  void conv(const std::string& name, std::int64_t cin, std::int64_t cout, std::int64_t k,
            std::int64_t out_hw) {
    const std::int64_t params = k * k * cin * cout;
    d_.layers.push_back({name, LayerKind::conv, params, params * out_hw * out_hw, true, {}});
  }
  void bn(const std::string& name, std::int64_t c) {
    d_.layers.push_back({name, LayerKind::batchnorm, 2 * c, 0, false, {}});
  }
  void fc(std::int64_t in, std::int64_t out) {
    d_.layers.push_back({"fc", LayerKind::dense, in * out + out, in * out, true, {}});
  }
  ModelDescriptor done() { return std::move(d_); }

 private:
  ModelDescriptor d_;
};

}  // namespace

ModelDescriptor resnet18_descriptor() {
  ResNetBuilder b;
  b.conv("conv1", 3, 64, 7, 112);
  b.bn("bn1", 64);
  const std::int64_t widths[] = {64, 128, 256, 512};
  const std::int64_t sizes[] = {56, 28, 14, 7};
  std::int64_t cin = 64;
  for (int s = 0; s < 4; ++s) {
    for (int blk = 0; blk < 2; ++blk) {
      const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(blk) + ".";
      const std::int64_t w = widths[s], hw = sizes[s];
      b.conv(p + "conv1", cin, w, 3, hw);
      b.bn(p + "bn1", w);
      b.conv(p + "conv2", w, w, 3, hw);
      b.bn(p + "bn2", w);
      if (blk == 0 && cin != w) {
        b.conv(p + "downsample.0", cin, w, 1, hw);
        b.bn(p + "downsample.1", w);
      }
      cin = w;
    }
  }
  b.fc(512, 1000);
  return b.done();
}

ModelDescriptor resnet50_descriptor() {
  ResNetBuilder b;
  b.conv("conv1", 3, 64, 7, 112);
  b.bn("bn1", 64);
  const std::int64_t widths[] = {64, 128, 256, 512};
  const std::int64_t sizes[] = {56, 28, 14, 7};
  const int blocks[] = {3, 4, 6, 3};
  std::int64_t cin = 64;
  for (int s = 0; s < 4; ++s) {
    const std::int64_t w = widths[s], hw = sizes[s], cout = 4 * widths[s];
    for (int blk = 0; blk < blocks[s]; ++blk) {
      const std::string p = "layer" + std::to_string(s + 1) + "." + std::to_string(blk) + ".";
      // Stride sits on the 3x3 conv, so conv1 of a downsampling block still
      // runs at the previous stage's resolution.
      const std::int64_t hw_in = (blk == 0 && s > 0) ? sizes[s - 1] : hw;
      b.conv(p + "conv1", cin, w, 1, hw_in);
      b.bn(p + "bn1", w);
      b.conv(p + "conv2", w, w, 3, hw);
      b.bn(p + "bn2", w);
      b.conv(p + "conv3", w, cout, 1, hw);
      b.bn(p + "bn3", cout);
      if (blk == 0) {
        b.conv(p + "downsample.0", cin, cout, 1, hw);
        b.bn(p + "downsample.1", cout);
      }
      cin = cout;
    }
  }
  b.fc(2048, 1000);
  return b.done();
}

}  // namespace bitplan::netlab
