#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bitplan/common/json.hpp"

namespace bitplan::quant {

enum class Granularity { per_tensor, per_channel };
enum class Scheme { symmetric, asymmetric };

struct ClipMethod {
  enum class Kind { minmax, percentile, mse };
  Kind kind = Kind::minmax;
  // Used by Kind::percentile only; must lie in (50, 100).
  double percentile = 99.9;

  static ClipMethod minmax() { return {}; }
  static ClipMethod at_percentile(double p) { return {Kind::percentile, p}; }
  static ClipMethod mse() { return {Kind::mse, 99.9}; }
  bool operator==(const ClipMethod&) const = default;
};

struct QuantSpec {
  int bits = 8;
  Granularity granularity = Granularity::per_tensor;
  Scheme scheme = Scheme::symmetric;
  ClipMethod clip;

  void validate() const;
  bool operator==(const QuantSpec&) const = default;

  Json to_json() const;
  static QuantSpec from_json(const Json& j);
};

std::string to_string(Granularity g);
std::string to_string(Scheme s);
std::string to_string(const ClipMethod& c);
ClipMethod clip_method_from_string(const std::string& s);

// Dense tensor; axis 0 is the channel axis for per-channel quantization.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {}
  static Tensor vector(std::vector<double> d) {
    const std::size_t n = d.size();
    return Tensor({n}, std::move(d));
  }

  std::size_t channels() const { return shape.empty() ? 1 : shape[0]; }
  std::size_t channel_stride() const { return channels() == 0 ? 0 : data.size() / channels(); }
};

struct QuantizedTensor {
  std::vector<std::size_t> shape;
  std::vector<std::int32_t> codes;
  std::vector<double> scale;            // length 1 or #channels
  std::vector<std::int32_t> zero_point; // same length as scale
  std::vector<double> clip_lo, clip_hi; // clip range chosen per group
  QuantSpec spec;
};

// Smallest and largest representable codes for a spec.
std::int32_t code_min(const QuantSpec& spec);
std::int32_t code_max(const QuantSpec& spec);

// Uniform affine quantization with round-half-to-even. The scale is chosen so
// that re-quantizing an already fake-quantized tensor with minmax clipping
// reproduces it exactly.
QuantizedTensor quantize(const Tensor& w, const QuantSpec& spec);
Tensor dequantize(const QuantizedTensor& q);
Tensor fake_quant(const Tensor& w, const QuantSpec& spec);
// ||fake_quant(w) - w||_2^2
double perturbation_norm(const Tensor& w, const QuantSpec& spec);

// Clip value the mse strategy picks for a symmetric group: the candidate in
// 100 evenly spaced points over [0.1, 1] * max|w| minimising squared error.
double mse_clip(std::span<const double> w, int bits);

struct BnFoldInput {
  Tensor weight;                // [out_channels, ...]
  std::vector<double> bias;     // [out_channels]
  std::vector<double> mean, var, gamma, beta;
  double eps = 1e-5;
};

struct FoldedConv {
  Tensor weight;
  std::vector<double> bias;
};

// W' = W * gamma / sqrt(var + eps) per output channel,
// b' = (b - mean) * gamma / sqrt(var + eps) + beta.
FoldedConv fold_bn(const BnFoldInput& x);

}  // namespace bitplan::quant
