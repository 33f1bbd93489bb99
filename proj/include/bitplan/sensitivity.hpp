#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bitplan/common/json.hpp"
#include "bitplan/netlab/network.hpp"
#include "bitplan/quantizer.hpp"

namespace bitplan::sensitivity {

enum class ProbeDistribution { rademacher, gaussian };

std::string to_string(ProbeDistribution d);
ProbeDistribution probe_distribution_from_string(const std::string& s);

struct TraceEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  int samples = 0;
  ProbeDistribution distribution = ProbeDistribution::rademacher;
};

// Computes out = H v for a dim-dimensional symmetric operator H.
using HvpOracle = std::function<void(std::span<const double> v, std::span<double> out)>;

// Hutchinson estimate of Tr(H) = E[z^T H z] over `samples` probes. Probe j
// draws from its own stream derived from (seed, j), so the result does not
// depend on `threads`. Throws Error("E_NONFINITE_PROBE") naming the probe when
// the oracle returns a non-finite value.
TraceEstimate hutchinson_trace(const HvpOracle& hvp, std::size_t dim, int samples,
                               ProbeDistribution distribution, std::uint64_t seed,
                               int threads = 1);

// Trace of the diagonal block of the loss Hessian belonging to one layer.
TraceEstimate layer_trace(const netlab::DifferentiableModel& model,
                          const netlab::ParamVector& params, const netlab::Batch& batch,
                          const std::string& layer, int samples, ProbeDistribution distribution,
                          std::uint64_t seed, int threads = 1);

// delta = max(trace, 0) / n * perturbation. Negative traces are clamped to
// zero with a warning on stderr.
double sensitivity_from_trace(double trace, std::size_t param_count, double perturbation,
                              const std::string& layer = {});

struct ProfileConfig {
  int samples = 512;
  ProbeDistribution distribution = ProbeDistribution::rademacher;
  std::uint64_t seed = 0;
  // Granularity / scheme / clip used for the perturbation norm; bits are
  // taken from the bit options.
  quant::QuantSpec quant;
  int threads = 1;
};

double layer_sensitivity(const netlab::DifferentiableModel& model, const netlab::ParamVector& params,
                         const netlab::Batch& batch, const std::string& layer, int bits,
                         const ProfileConfig& config);

struct SensitivityProfile {
  std::vector<std::string> layer_names;
  std::vector<int> bit_options;
  std::vector<std::vector<double>> delta;  // [layer][bit option]
  std::vector<double> trace_per_param;
  std::vector<std::int64_t> param_counts;

  std::size_t num_layers() const { return layer_names.size(); }
  std::size_t num_options() const { return bit_options.size(); }

  void validate() const;
  bool operator==(const SensitivityProfile&) const = default;

  Json to_json() const;
  static SensitivityProfile from_json(const Json& j);
  static SensitivityProfile load(const std::filesystem::path& path);
};

// One trace estimate per quantizable layer (bit independent) and one
// perturbation norm per (layer, bit option).
SensitivityProfile profile(const netlab::DifferentiableModel& model, const netlab::ParamVector& params,
                           const netlab::Batch& batch, std::vector<int> bit_options,
                           const ProfileConfig& config);

// The weight tensor of a layer, shaped by its segment.
quant::Tensor layer_weights(const netlab::ParamVector& params, const std::string& layer);

}  // namespace bitplan::sensitivity
