#include "bitplan/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <random>
#include <set>

#include "bitplan/common/error.hpp"
#include "bitplan/common/parallel.hpp"
#include "bitplan/common/rng.hpp"

namespace bitplan::sensitivity {

std::string to_string(ProbeDistribution d) {
  return d == ProbeDistribution::rademacher ? "rademacher" : "gaussian";
}

ProbeDistribution probe_distribution_from_string(const std::string& s) {
  if (s == "rademacher") return ProbeDistribution::rademacher;
  if (s == "gaussian") return ProbeDistribution::gaussian;
  throw InputError("E_CONFIG", "unknown probe distribution '" + s + "'");
}

TraceEstimate hutchinson_trace(const HvpOracle& hvp, std::size_t dim, int samples,
                               ProbeDistribution distribution, std::uint64_t seed, int threads) {
  if (samples < 1) throw InputError("E_CONFIG", "hutchinson_trace needs samples >= 1");
  std::vector<double> quad(static_cast<std::size_t>(samples));
  parallel_for(quad.size(), threads, [&](std::size_t j) {
    Rng rng(derive_seed(seed, j));
    std::vector<double> z(dim), hz(dim, 0.0);
    if (distribution == ProbeDistribution::rademacher) {
      for (double& x : z) x = (rng() >> 63) != 0 ? 1.0 : -1.0;
    } else {
      std::normal_distribution<double> normal(0.0, 1.0);
      for (double& x : z) x = normal(rng);
    }
    hvp(z, hz);
    double q = 0.0;
    for (std::size_t i = 0; i < dim; ++i) q += z[i] * hz[i];
    if (!std::isfinite(q))
      throw Error("E_NONFINITE_PROBE", "Hessian-vector product is non-finite at probe " + std::to_string(j));
    quad[j] = q;
  });
  TraceEstimate est;
  est.samples = samples;
  est.distribution = distribution;
  double sum = 0.0;
  for (double q : quad) sum += q;
  est.mean = sum / samples;
  if (samples > 1) {
    double ss = 0.0;
    for (double q : quad) ss += (q - est.mean) * (q - est.mean);
    est.std_error = std::sqrt(ss / (samples - 1)) / std::sqrt(static_cast<double>(samples));
  }
  return est;
}

TraceEstimate layer_trace(const netlab::DifferentiableModel& model, const netlab::ParamVector& params,
                          const netlab::Batch& batch, const std::string& layer, int samples,
                          ProbeDistribution distribution, std::uint64_t seed, int threads) {
  const netlab::Segment& seg = model.layout().at(layer);
  if (!seg.quantizable)
    throw InputError("E_UNKNOWN_LAYER", "layer '" + layer + "' is not quantizable");
  const std::size_t total = model.layout().size();
  const HvpOracle block = [&](std::span<const double> v, std::span<double> out) {
    std::vector<double> full(total, 0.0);
    std::copy(v.begin(), v.end(), full.begin() + static_cast<std::ptrdiff_t>(seg.offset));
    const std::vector<double> hv = model.hvp(params, batch, full);
    std::copy_n(hv.begin() + static_cast<std::ptrdiff_t>(seg.offset), seg.length, out.begin());
  };
  return hutchinson_trace(block, seg.length, samples, distribution, seed, threads);
}

double sensitivity_from_trace(double trace, std::size_t param_count, double perturbation,
                              const std::string& layer) {
  if (trace < 0.0) {
    std::cerr << "warning: negative Hessian trace estimate " << trace
              << (layer.empty() ? std::string() : " for layer '" + layer + "'")
              << " clamped to 0 (non-convex point)\n";
    trace = 0.0;
  }
  if (param_count == 0) return 0.0;
  return trace / static_cast<double>(param_count) * perturbation;
}

quant::Tensor layer_weights(const netlab::ParamVector& params, const std::string& layer) {
  const netlab::Segment& seg = params.layout.at(layer);
  const auto w = params.weights(layer);
  std::vector<std::size_t> shape = seg.weight_shape;
  if (shape.empty()) shape = {w.size()};
  return {shape, std::vector<double>(w.begin(), w.end())};
}

double layer_sensitivity(const netlab::DifferentiableModel& model, const netlab::ParamVector& params,
                         const netlab::Batch& batch, const std::string& layer, int bits,
                         const ProfileConfig& config) {
  const std::size_t index = [&] {
    const auto names = model.layout().quantizable_names();
    const auto it = std::find(names.begin(), names.end(), layer);
    if (it == names.end()) throw InputError("E_UNKNOWN_LAYER", "unknown quantizable layer '" + layer + "'");
    return static_cast<std::size_t>(it - names.begin());
  }();
  const TraceEstimate t = layer_trace(model, params, batch, layer, config.samples, config.distribution,
                                      derive_seed(config.seed, index), config.threads);
  quant::QuantSpec spec = config.quant;
  spec.bits = bits;
  return sensitivity_from_trace(t.mean, model.layout().at(layer).length,
                                quant::perturbation_norm(layer_weights(params, layer), spec), layer);
}

SensitivityProfile profile(const netlab::DifferentiableModel& model, const netlab::ParamVector& params,
                           const netlab::Batch& batch, std::vector<int> bit_options,
                           const ProfileConfig& config) {
  if (bit_options.empty()) throw InputError("E_CONFIG", "bit option set is empty");
  std::sort(bit_options.begin(), bit_options.end());
  if (std::adjacent_find(bit_options.begin(), bit_options.end()) != bit_options.end())
    throw InputError("E_CONFIG", "bit options must be distinct");
  const auto names = model.layout().quantizable_names();
  if (names.empty()) throw InputError("E_CONFIG", "model has no quantizable layers");

  SensitivityProfile p;
  p.layer_names = names;
  p.bit_options = bit_options;
  for (std::size_t i = 0; i < names.size(); ++i) {
    const netlab::Segment& seg = model.layout().at(names[i]);
    const TraceEstimate t = layer_trace(model, params, batch, names[i], config.samples,
                                        config.distribution, derive_seed(config.seed, i),
                                        config.threads);
    double trace = t.mean;
    if (trace < 0.0) {
      std::cerr << "warning: negative Hessian trace estimate " << trace << " for layer '"
                << names[i] << "' clamped to 0 (non-convex point)\n";
      trace = 0.0;
    }
    p.trace_per_param.push_back(trace / static_cast<double>(seg.length));
    p.param_counts.push_back(static_cast<std::int64_t>(seg.length));
    const quant::Tensor w = layer_weights(params, names[i]);
    std::vector<double> row;
    for (int b : bit_options) {
      quant::QuantSpec spec = config.quant;
      spec.bits = b;
      row.push_back(sensitivity_from_trace(trace, seg.length, quant::perturbation_norm(w, spec)));
    }
    p.delta.push_back(std::move(row));
  }
  return p;
}

void SensitivityProfile::validate() const {
  const std::size_t l = layer_names.size(), m = bit_options.size();
  if (l == 0 || m == 0) throw InputError("E_PROFILE", "profile needs at least one layer and one bit option");
  if (delta.size() != l || trace_per_param.size() != l || param_counts.size() != l)
    throw InputError("E_PROFILE", "profile arrays disagree with the layer count");
  for (const auto& row : delta) {
    if (row.size() != m) throw InputError("E_PROFILE", "delta row length differs from the bit option count");
    for (double d : row)
      if (!(d >= 0.0) || !std::isfinite(d)) throw InputError("E_PROFILE", "delta entries must be finite and >= 0");
  }
  std::set<std::string> seen(layer_names.begin(), layer_names.end());
  if (seen.size() != l) throw InputError("E_PROFILE", "duplicate layer names in profile");
  std::set<int> bits(bit_options.begin(), bit_options.end());
  if (bits.size() != m) throw InputError("E_PROFILE", "duplicate bit options in profile");
}

Json SensitivityProfile::to_json() const {
  Json j;
  j["layers"] = layer_names;
  j["bit_options"] = bit_options;
  j["trace_per_param"] = trace_per_param;
  j["param_counts"] = param_counts;
  j["delta"] = delta;
  return j;
}

SensitivityProfile SensitivityProfile::from_json(const Json& j) {
  SensitivityProfile p;
  try {
    p.layer_names = j.at("layers").get<std::vector<std::string>>();
    p.bit_options = j.at("bit_options").get<std::vector<int>>();
    p.trace_per_param = j.at("trace_per_param").get<std::vector<double>>();
    p.param_counts = j.at("param_counts").get<std::vector<std::int64_t>>();
    p.delta = j.at("delta").get<std::vector<std::vector<double>>>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("E_PROFILE", std::string("malformed profile: ") + e.what());
  }
  p.validate();
  return p;
}

SensitivityProfile SensitivityProfile::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw InputError("E_PROFILE_NOT_FOUND", "profile not found: " + path.string());
  return from_json(read_json_file(path));
}

}  // namespace bitplan::sensitivity
