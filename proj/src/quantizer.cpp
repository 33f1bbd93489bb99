#include "bitplan/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bitplan/common/error.hpp"

namespace bitplan::quant {

std::string to_string(Granularity g) {
  return g == Granularity::per_tensor ? "per_tensor" : "per_channel";
}

std::string to_string(Scheme s) { return s == Scheme::symmetric ? "symmetric" : "asymmetric"; }

std::string to_string(const ClipMethod& c) {
  switch (c.kind) {
    case ClipMethod::Kind::minmax: return "minmax";
    case ClipMethod::Kind::mse: return "mse";
    case ClipMethod::Kind::percentile: {
      Json j = c.percentile;  // shortest round-trip formatting
      return "percentile:" + j.dump();
    }
  }
  return "?";
}

ClipMethod clip_method_from_string(const std::string& s) {
  if (s == "minmax") return ClipMethod::minmax();
  if (s == "mse") return ClipMethod::mse();
  const std::string prefix = "percentile";
  if (s.rfind(prefix, 0) == 0) {
    if (s.size() == prefix.size()) return ClipMethod::at_percentile(99.9);
    if (s[prefix.size()] == ':') {
      try {
        return ClipMethod::at_percentile(std::stod(s.substr(prefix.size() + 1)));
      } catch (const std::exception&) {
      }
    }
  }
  throw InputError("E_QUANT_SPEC", "unknown clip method '" + s + "'");
}

void QuantSpec::validate() const {
  if (bits < 2 || bits > 16)
    throw InputError("E_QUANT_SPEC", "bits must be in [2, 16], got " + std::to_string(bits));
  if (clip.kind == ClipMethod::Kind::percentile && !(clip.percentile > 50.0 && clip.percentile < 100.0))
    throw InputError("E_QUANT_SPEC", "percentile must lie in (50, 100)");
}

Json QuantSpec::to_json() const {
  Json j;
  j["bits"] = bits;
  j["granularity"] = to_string(granularity);
  j["scheme"] = to_string(scheme);
  j["clip"] = to_string(clip);
  return j;
}

QuantSpec QuantSpec::from_json(const Json& j) {
  QuantSpec s;
  try {
    s.bits = j.value("bits", 8);
    const auto g = j.value("granularity", std::string("per_tensor"));
    if (g == "per_tensor") s.granularity = Granularity::per_tensor;
    else if (g == "per_channel") s.granularity = Granularity::per_channel;
    else throw InputError("E_QUANT_SPEC", "unknown granularity '" + g + "'");
    const auto sc = j.value("scheme", std::string("symmetric"));
    if (sc == "symmetric") s.scheme = Scheme::symmetric;
    else if (sc == "asymmetric") s.scheme = Scheme::asymmetric;
    else throw InputError("E_QUANT_SPEC", "unknown scheme '" + sc + "'");
    s.clip = clip_method_from_string(j.value("clip", std::string("minmax")));
  } catch (const nlohmann::json::exception& e) {
    throw InputError("E_QUANT_SPEC", e.what());
  }
  s.validate();
  return s;
}

std::int32_t code_min(const QuantSpec& spec) {
  return spec.scheme == Scheme::symmetric ? -(std::int32_t{1} << (spec.bits - 1)) : 0;
}

std::int32_t code_max(const QuantSpec& spec) {
  return spec.scheme == Scheme::symmetric ? (std::int32_t{1} << (spec.bits - 1)) - 1
                                          : (std::int32_t{1} << spec.bits) - 1;
}

namespace {

struct GroupParams {
  double scale = 1.0;
  std::int32_t zero_point = 0;
  double lo = 0.0, hi = 0.0;
};

// Largest positive code used by the symmetric grid (the grid is kept
// symmetric, so the extra negative code is never produced from clipped input).
double sym_levels(int bits) { return static_cast<double>((1 << (bits - 1)) - 1); }
double asym_levels(int bits) { return static_cast<double>((1 << bits) - 1); }

std::int32_t zero_point_for(double lo, double scale, int bits) {
  const double z = std::nearbyint(-lo / scale);
  return static_cast<std::int32_t>(std::clamp(z, 0.0, asym_levels(bits)));
}

// Rounds to `bits` significant bits. Products of such a scale with codes of
// at most 16 bits are exact in double precision.
double round_mantissa(double x, int bits) {
  int e = 0;
  const double m = std::frexp(x, &e);
  return std::ldexp(std::nearbyint(std::ldexp(m, bits)), e - bits);
}

// Picks a scale near s0 that survives a quantize -> dequantize -> re-derive
// round trip unchanged. Tries s0 and its neighbouring doubles first, then
// falls back to a shortened mantissa, which is always stable.
template <class Pred>
double canonical_scale(double s0, Pred stable) {
  if (stable(s0)) return s0;
  double up = s0, down = s0;
  for (int k = 0; k < 4; ++k) {
    up = std::nextafter(up, std::numeric_limits<double>::infinity());
    if (stable(up)) return up;
    down = std::nextafter(down, 0.0);
    if (down > 0.0 && stable(down)) return down;
  }
  return round_mantissa(s0, 36);
}

double symmetric_scale(double clip, int bits) {
  if (clip == 0.0) return 1.0;
  const double q = sym_levels(bits);
  return canonical_scale(clip / q, [q](double s) { return (q * s) / q == s; });
}

GroupParams asymmetric_params(double lo, double hi, int bits) {
  GroupParams p;
  p.lo = std::min(lo, 0.0);
  p.hi = std::max(hi, 0.0);
  if (p.hi == p.lo) return p;
  const double q = asym_levels(bits);
  const auto stable = [&](double s) {
    const std::int32_t zp = zero_point_for(p.lo, s, bits);
    const double lo2 = std::min(static_cast<double>(0 - zp) * s, 0.0);
    const double hi2 = std::max(static_cast<double>(static_cast<std::int32_t>(q) - zp) * s, 0.0);
    const double s2 = (hi2 - lo2) / q;
    return s2 == s && zero_point_for(lo2, s2, bits) == zp;
  };
  p.scale = canonical_scale((p.hi - p.lo) / q, stable);
  p.zero_point = zero_point_for(p.lo, p.scale, bits);
  return p;
}

double percentile_of(std::vector<double> v, double p) {
  std::sort(v.begin(), v.end());
  const double rank = p / 100.0 * static_cast<double>(v.size() - 1);
  const auto i = static_cast<std::size_t>(std::floor(rank));
  const double frac = rank - static_cast<double>(i);
  if (i + 1 >= v.size()) return v.back();
  return v[i] + frac * (v[i + 1] - v[i]);
}

double clip_candidate(double max_abs, int k) { return max_abs * (0.1 + 0.9 * k / 99.0); }

double sym_sq_error(std::span<const double> w, double clip, int bits) {
  const double q = sym_levels(bits);
  const double s = clip / q;
  double err = 0.0;
  for (double x : w) {
    const double c = std::clamp(std::nearbyint(std::clamp(x, -clip, clip) / s), -q, q);
    const double d = c * s - x;
    err += d * d;
  }
  return err;
}

double asym_sq_error(std::span<const double> w, double lo, double hi, int bits) {
  const double q = asym_levels(bits);
  const double s = (hi - lo) / q;
  const double zp = static_cast<double>(zero_point_for(lo, s, bits));
  double err = 0.0;
  for (double x : w) {
    const double c = std::clamp(std::nearbyint(std::clamp(x, lo, hi) / s) + zp, 0.0, q);
    const double d = (c - zp) * s - x;
    err += d * d;
  }
  return err;
}

GroupParams choose_params(std::span<const double> w, const QuantSpec& spec) {
  GroupParams p;
  if (spec.scheme == Scheme::symmetric) {
    double max_abs = 0.0;
    for (double x : w) max_abs = std::max(max_abs, std::abs(x));
    double clip = max_abs;
    if (spec.clip.kind == ClipMethod::Kind::percentile && max_abs > 0.0) {
      std::vector<double> mags(w.size());
      std::transform(w.begin(), w.end(), mags.begin(), [](double x) { return std::abs(x); });
      clip = percentile_of(std::move(mags), spec.clip.percentile);
    } else if (spec.clip.kind == ClipMethod::Kind::mse) {
      clip = mse_clip(w, spec.bits);
    }
    p.lo = -clip;
    p.hi = clip;
    p.scale = symmetric_scale(clip, spec.bits);
    return p;
  }
  const auto [mn, mx] = std::minmax_element(w.begin(), w.end());
  double lo = std::min(*mn, 0.0), hi = std::max(*mx, 0.0);
  if (spec.clip.kind == ClipMethod::Kind::percentile) {
    std::vector<double> v(w.begin(), w.end());
    lo = std::min(percentile_of(v, 100.0 - spec.clip.percentile), 0.0);
    hi = std::max(percentile_of(std::move(v), spec.clip.percentile), 0.0);
  } else if (spec.clip.kind == ClipMethod::Kind::mse && hi > lo) {
    double best = std::numeric_limits<double>::infinity();
    double best_a = 1.0;
    for (int k = 0; k < 100; ++k) {
      const double a = clip_candidate(1.0, k);
      const double e = asym_sq_error(w, a * lo, a * hi, spec.bits);
      if (e < best) {
        best = e;
        best_a = a;
      }
    }
    lo *= best_a;
    hi *= best_a;
  }
  return asymmetric_params(lo, hi, spec.bits);
}

}  // namespace

double mse_clip(std::span<const double> w, int bits) {
  double max_abs = 0.0;
  for (double x : w) max_abs = std::max(max_abs, std::abs(x));
  if (max_abs == 0.0) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  double best_clip = max_abs;
  for (int k = 0; k < 100; ++k) {
    const double c = clip_candidate(max_abs, k);
    const double e = sym_sq_error(w, c, bits);
    if (e < best) {
      best = e;
      best_clip = c;
    }
  }
  return best_clip;
}

QuantizedTensor quantize(const Tensor& w, const QuantSpec& spec) {
  spec.validate();
  if (w.data.empty()) throw InputError("E_SHAPE", "cannot quantize an empty tensor");
  std::size_t groups = 1, stride = w.data.size();
  if (spec.granularity == Granularity::per_channel) {
    groups = w.channels();
    if (groups == 0 || w.data.size() % groups != 0)
      throw InputError("E_SHAPE", "tensor size is not divisible by its channel count");
    stride = w.data.size() / groups;
  }
  QuantizedTensor q;
  q.shape = w.shape.empty() ? std::vector<std::size_t>{w.data.size()} : w.shape;
  q.spec = spec;
  q.codes.resize(w.data.size());
  const double cmin = code_min(spec), cmax = code_max(spec);
  for (std::size_t gi = 0; gi < groups; ++gi) {
    const std::span<const double> g(w.data.data() + gi * stride, stride);
    const GroupParams p = choose_params(g, spec);
    q.scale.push_back(p.scale);
    q.zero_point.push_back(p.zero_point);
    q.clip_lo.push_back(p.lo);
    q.clip_hi.push_back(p.hi);
    for (std::size_t i = 0; i < stride; ++i) {
      const double x = std::clamp(g[i], p.lo, p.hi);
      const double c = std::nearbyint(x / p.scale) + p.zero_point;
      q.codes[gi * stride + i] = static_cast<std::int32_t>(std::clamp(c, cmin, cmax));
    }
  }
  return q;
}

Tensor dequantize(const QuantizedTensor& q) {
  Tensor t;
  t.shape = q.shape;
  t.data.resize(q.codes.size());
  const std::size_t groups = q.scale.size();
  const std::size_t stride = groups == 0 ? 0 : q.codes.size() / groups;
  for (std::size_t gi = 0; gi < groups; ++gi)
    for (std::size_t i = 0; i < stride; ++i) {
      const std::size_t idx = gi * stride + i;
      t.data[idx] = static_cast<double>(q.codes[idx] - q.zero_point[gi]) * q.scale[gi];
    }
  return t;
}

Tensor fake_quant(const Tensor& w, const QuantSpec& spec) { return dequantize(quantize(w, spec)); }

double perturbation_norm(const Tensor& w, const QuantSpec& spec) {
  const Tensor fq = fake_quant(w, spec);
  double s = 0.0;
  for (std::size_t i = 0; i < w.data.size(); ++i) {
    const double d = fq.data[i] - w.data[i];
    s += d * d;
  }
  return s;
}

FoldedConv fold_bn(const BnFoldInput& x) {
  const std::size_t c = x.weight.channels();
  if (x.bias.size() != c || x.mean.size() != c || x.var.size() != c || x.gamma.size() != c ||
      x.beta.size() != c)
    throw InputError("E_SHAPE", "batchnorm statistics must have one entry per output channel");
  if (c == 0 || x.weight.data.size() % c != 0)
    throw InputError("E_SHAPE", "weight size is not divisible by its channel count");
  const std::size_t stride = x.weight.data.size() / c;
  FoldedConv f{x.weight, std::vector<double>(c)};
  for (std::size_t o = 0; o < c; ++o) {
    const double denom = x.var[o] + x.eps;
    if (!(denom > 0.0))
      throw InputError("E_BN_VARIANCE", "var + eps must be positive (channel " + std::to_string(o) + ")");
    const double k = x.gamma[o] / std::sqrt(denom);
    for (std::size_t i = 0; i < stride; ++i) f.weight.data[o * stride + i] *= k;
    f.bias[o] = (x.bias[o] - x.mean[o]) * k + x.beta[o];
  }
  return f;
}

}  // namespace bitplan::quant
