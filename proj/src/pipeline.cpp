#include "bitplan/pipeline.hpp"

#include <algorithm>

#include "bitplan/common/error.hpp"
#include "bitplan/common/rng.hpp"
#include "bitplan/sensitivity.hpp"

namespace bitplan::pipeline {

BitMap bit_map(const BitPlan& plan) {
  BitMap m;
  for (const auto& [layer, bits] : plan.assignment) m[layer] = bits;
  return m;
}

BitMap uniform_bits(const netlab::ParamLayout& layout, int bits) {
  BitMap m;
  for (const std::string& name : layout.quantizable_names()) m[name] = bits;
  return m;
}

netlab::ParamVector quantize_weights(const netlab::ParamVector& params, const BitMap& bits,
                                     const quant::QuantSpec& spec) {
  netlab::ParamVector out = params;
  for (const auto& [layer, b] : bits) {
    quant::QuantSpec s = spec;
    s.bits = b;
    const quant::Tensor q = quant::fake_quant(sensitivity::layer_weights(params, layer), s);
    const auto w = out.weights(layer);
    std::copy(q.data.begin(), q.data.end(), w.begin());
  }
  return out;
}

std::function<netlab::ParamVector(const netlab::ParamVector&)> fake_quant_transform(BitMap bits,
                                                                                   quant::QuantSpec spec) {
  return [bits = std::move(bits), spec](const netlab::ParamVector& p) { return quantize_weights(p, bits, spec); };
}

Folded fold_batchnorm(const netlab::Network& net, const netlab::ParamVector& params) {
  const auto& ops = net.ops();
  netlab::ModelDescriptor desc;
  std::vector<std::pair<std::string, std::string>> merged;  // conv, bn
  const auto& layers = net.descriptor().layers;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const bool fold = layers[i].kind == netlab::LayerKind::conv && i + 1 < layers.size() &&
                      layers[i + 1].kind == netlab::LayerKind::batchnorm &&
                      ops[i + 1].geometry.channels == ops[i].geometry.out_channels;
    desc.layers.push_back(layers[i]);
    if (fold) {
      merged.emplace_back(layers[i].name, layers[i + 1].name);
      ++i;
    }
  }
  Folded out{netlab::Network::from_descriptor(desc), {}};
  out.params = netlab::ParamVector(out.net.layout());
  for (const netlab::Segment& seg : out.net.layout().segments()) {
    const auto src = params.segment(seg.name);
    std::copy(src.begin(), src.end(), out.params.segment(seg.name).begin());
  }
  for (const auto& [k, v] : params.buffers)
    if (out.net.layout().find(k.substr(0, k.rfind('.'))) != nullptr) out.params.buffers[k] = v;

  for (const auto& [conv, bn] : merged) {
    const netlab::Segment& cs = params.layout.at(conv);
    const netlab::Segment& bs = params.layout.at(bn);
    const std::size_t c = bs.length / 2;
    quant::BnFoldInput in;
    in.weight = sensitivity::layer_weights(params, conv);
    const auto seg = params.segment(conv);
    in.bias.assign(seg.begin() + static_cast<std::ptrdiff_t>(cs.weight_count()), seg.end());
    const auto bnp = params.segment(bn);
    in.gamma.assign(bnp.begin(), bnp.begin() + static_cast<std::ptrdiff_t>(c));
    in.beta.assign(bnp.begin() + static_cast<std::ptrdiff_t>(c), bnp.end());
    const auto mean = params.buffers.find(bn + ".mean"), var = params.buffers.find(bn + ".var");
    in.mean = mean != params.buffers.end() ? mean->second : std::vector<double>(c, 0.0);
    in.var = var != params.buffers.end() ? var->second : std::vector<double>(c, 1.0);
    const quant::FoldedConv f = quant::fold_bn(in);
    auto dst = out.params.segment(conv);
    std::copy(f.weight.data.begin(), f.weight.data.end(), dst.begin());
    std::copy(f.bias.begin(), f.bias.end(), dst.begin() + static_cast<std::ptrdiff_t>(cs.weight_count()));
  }
  return out;
}

Json QuantRecipe::to_json() const {
  Json j;
  j["granularity"] = quant::to_string(spec.granularity);
  j["scheme"] = quant::to_string(spec.scheme);
  j["clip"] = quant::to_string(spec.clip);
  j["bn_fold"] = bn_fold;
  j["distill"] = distill;
  if (distill) j["kd"] = kd.to_json();
  Json b = Json::object();
  for (const auto& [layer, bits] : this->bits) b[layer] = bits;
  j["bits"] = b;
  return j;
}

double evaluate_recipe(const netlab::Network& net, const netlab::ParamVector& trained, const netlab::Dataset& data,
                       const QuantRecipe& recipe, int epochs, const netlab::TrainSchedule& finetune) {
  if (epochs < 0) throw InputError("E_CONFIG", "fine-tune epochs must be >= 0");
  netlab::Network student = net;
  netlab::ParamVector params = trained;
  if (recipe.bn_fold) {
    Folded f = fold_batchnorm(net, trained);
    student = std::move(f.net);
    params = std::move(f.params);
  }
  for (const auto& [layer, b] : recipe.bits) {
    const netlab::Segment* s = student.layout().find(layer);
    if (!s || !s->quantizable) throw InputError("E_UNKNOWN_LAYER", "recipe names unknown layer '" + layer + "'");
  }
  if (epochs > 0) {
    netlab::TrainSchedule schedule = finetune;
    schedule.epochs = epochs;
    netlab::TrainOptions options;
    options.transform = fake_quant_transform(recipe.bits, recipe.spec);
    params = recipe.distill
                 ? distill::distill_train(student, params, net, trained, data, schedule, recipe.kd, options).params
                 : netlab::train(student, params, data, schedule, options).params;
  }
  netlab::ParamVector q = quantize_weights(params, recipe.bits, recipe.spec);
  if (epochs == 0) student.calibrate_batchnorm(q, data.train.inputs);
  return netlab::evaluate(student, q, data.val.size() > 0 ? data.val : data.train);
}

netlab::TrainSchedule default_schedule(std::uint64_t seed) {
  netlab::TrainSchedule s;
  s.learning_rate = 0.05;
  s.momentum = 0.9;
  s.batch_size = 32;
  s.weight_decay = 1e-4;
  s.seed = seed;
  return s;
}

netlab::TrainSchedule finetune_schedule(std::uint64_t seed) {
  netlab::TrainSchedule s = default_schedule(seed);
  s.learning_rate = 0.003;
  return s;
}

ToyTask make_toy_task(const ToyTaskConfig& c) {
  ToyTask t{netlab::Network::from_descriptor(netlab::convnet_descriptor(c.side, c.classes, c.channels)),
            netlab::make_patterns(c.per_class, c.classes, c.side, c.noise, 0.25, derive_seed(c.seed, "data")),
            {},
            0.0,
            finetune_schedule(derive_seed(c.seed, "finetune"))};
  netlab::TrainSchedule s = default_schedule(derive_seed(c.seed, "train"));
  s.epochs = c.epochs;
  t.trained = netlab::train(t.net, t.net.init_params(derive_seed(c.seed, "init")), t.data, s).params;
  t.accuracy = netlab::evaluate(t.net, t.trained, t.data.val);
  return t;
}

QuantRecipe recipe_from_config(const nas::HparamSpace& space, const nas::HparamConfig& config,
                               const std::vector<std::string>& layers, const quant::QuantSpec& base) {
  QuantRecipe r;
  r.spec = base;
  int all_bits = base.bits;
  for (const nas::Dimension& d : space.dimensions)
    if (d.name == "bits") all_bits = nas::get_int(space, config, d.name);
  for (const std::string& l : layers) r.bits[l] = all_bits;
  for (const nas::Dimension& d : space.dimensions) {
    if (d.name == "per_channel")
      r.spec.granularity = nas::get_bool(space, config, d.name) ? quant::Granularity::per_channel
                                                                 : quant::Granularity::per_tensor;
    else if (d.name == "bn_fold")
      r.bn_fold = nas::get_bool(space, config, d.name);
    else if (d.name == "distill")
      r.distill = nas::get_bool(space, config, d.name);
    else if (d.name == "clip")
      r.spec.clip = quant::clip_method_from_string(nas::get_string(space, config, d.name));
    else if (d.name == "scheme") {
      const std::string s = nas::get_string(space, config, d.name);
      if (s != "symmetric" && s != "asymmetric") throw InputError("E_SPACE", "unknown scheme '" + s + "'");
      r.spec.scheme = s == "symmetric" ? quant::Scheme::symmetric : quant::Scheme::asymmetric;
    } else if (d.name.starts_with("bits.")) {
      const std::string layer = d.name.substr(5);
      if (std::find(layers.begin(), layers.end(), layer) == layers.end())
        throw InputError("E_SPACE", "dimension '" + d.name + "' names an unknown layer");
      r.bits[layer] = nas::get_int(space, config, d.name);
    }
  }
  return r;
}

nas::Evaluator recipe_evaluator(const ToyTask& task, const nas::HparamSpace& space) {
  const std::vector<std::string> layers = task.net.layout().quantizable_names();
  auto run = [&task, space, layers](const nas::HparamConfig& c, int epochs) {
    return evaluate_recipe(task.net, task.trained, task.data, recipe_from_config(space, c, layers), epochs,
                           task.finetune);
  };
  return {run, run};
}

}  // namespace bitplan::pipeline
