#include "bitplan/netlab/params.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <functional>
#include <numeric>

#include "bitplan/common/error.hpp"

namespace bitplan::netlab {

std::size_t Segment::weight_count() const {
  return std::accumulate(weight_shape.begin(), weight_shape.end(), std::size_t{1},
                         std::multiplies<>());
}

ParamLayout::ParamLayout(std::vector<Segment> segments) : segments_(std::move(segments)) {
  std::size_t next = 0;
  for (const auto& s : segments_) {
    if (s.offset != next)
      throw InputError("E_LAYOUT", "segment '" + s.name + "' is not contiguous");
    if (!s.weight_shape.empty() && s.weight_count() > s.length)
      throw InputError("E_LAYOUT", "segment '" + s.name + "' weight shape exceeds its length");
    next += s.length;
  }
  total_ = next;
}

const Segment* ParamLayout::find(const std::string& name) const {
  for (const auto& s : segments_)
    if (s.name == name) return &s;
  return nullptr;
}

const Segment& ParamLayout::at(const std::string& name) const {
  if (const Segment* s = find(name)) return *s;
  throw InputError("E_UNKNOWN_LAYER", "unknown layer '" + name + "'");
}

std::vector<std::string> ParamLayout::quantizable_names() const {
  std::vector<std::string> out;
  for (const auto& s : segments_)
    if (s.quantizable) out.push_back(s.name);
  return out;
}

bool ParamLayout::operator==(const ParamLayout& o) const {
  if (segments_.size() != o.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto &a = segments_[i], &b = o.segments_[i];
    if (a.name != b.name || a.offset != b.offset || a.length != b.length ||
        a.weight_shape != b.weight_shape || a.quantizable != b.quantizable)
      return false;
  }
  return true;
}

Json ParamLayout::to_json() const {
  Json arr = Json::array();
  for (const auto& s : segments_) {
    Json o;
    o["name"] = s.name;
    o["offset"] = s.offset;
    o["length"] = s.length;
    o["weight_shape"] = s.weight_shape;
    o["quantizable"] = s.quantizable;
    arr.push_back(std::move(o));
  }
  return arr;
}

ParamLayout ParamLayout::from_json(const Json& j) {
  std::vector<Segment> segs;
  for (const auto& o : j) {
    Segment s;
    s.name = o.at("name").get<std::string>();
    s.offset = o.at("offset").get<std::size_t>();
    s.length = o.at("length").get<std::size_t>();
    s.weight_shape = o.at("weight_shape").get<std::vector<std::size_t>>();
    s.quantizable = o.at("quantizable").get<bool>();
    segs.push_back(std::move(s));
  }
  return ParamLayout(std::move(segs));
}

std::span<double> ParamVector::segment(const std::string& name) {
  const Segment& s = layout.at(name);
  return {values.data() + s.offset, s.length};
}

std::span<const double> ParamVector::segment(const std::string& name) const {
  const Segment& s = layout.at(name);
  return {values.data() + s.offset, s.length};
}

std::span<double> ParamVector::weights(const std::string& name) {
  const Segment& s = layout.at(name);
  return {values.data() + s.offset, s.weight_shape.empty() ? s.length : s.weight_count()};
}

std::span<const double> ParamVector::weights(const std::string& name) const {
  const Segment& s = layout.at(name);
  return {values.data() + s.offset, s.weight_shape.empty() ? s.length : s.weight_count()};
}

namespace {

void fnv_bytes(std::uint64_t& h, const void* p, std::size_t n) {
  const auto* b = static_cast<const unsigned char*>(p);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= b[i];
    h *= 0x100000001b3ULL;
  }
}

static_assert(std::endian::native == std::endian::little,
              "checkpoint IO assumes a little-endian host");

}  // namespace

std::uint64_t ParamVector::checksum() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  fnv_bytes(h, values.data(), values.size() * sizeof(double));
  for (const auto& [k, v] : buffers) {
    fnv_bytes(h, k.data(), k.size());
    fnv_bytes(h, v.data(), v.size() * sizeof(double));
  }
  return h;
}

void save_checkpoint(const std::filesystem::path& path, const ParamVector& p) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("E_WRITE", "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(p.values.data()),
            static_cast<std::streamsize>(p.values.size() * sizeof(double)));
  Json side;
  side["format"] = "f64le";
  side["count"] = p.values.size();
  side["layout"] = p.layout.to_json();
  Json buf = Json::object();
  for (const auto& [k, v] : p.buffers) buf[k] = v;
  side["buffers"] = std::move(buf);
  write_json_file(path.string() + ".json", side);
}

ParamVector load_checkpoint(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw InputError("E_CHECKPOINT_NOT_FOUND", "checkpoint not found: " + path.string());
  const Json side = read_json_file(path.string() + ".json");
  ParamVector p(ParamLayout::from_json(side.at("layout")));
  const auto count = side.at("count").get<std::size_t>();
  if (count != p.values.size())
    throw InputError("E_CHECKPOINT", "checkpoint count does not match its layout");
  std::ifstream in(path, std::ios::binary);
  in.read(reinterpret_cast<char*>(p.values.data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    throw InputError("E_CHECKPOINT", "checkpoint truncated: " + path.string());
  for (const auto& [k, v] : side.at("buffers").items())
    p.buffers[k] = v.get<std::vector<double>>();
  return p;
}

}  // namespace bitplan::netlab
