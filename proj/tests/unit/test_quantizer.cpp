#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bitplan/common/error.hpp"
#include "bitplan/quantizer.hpp"

using namespace bitplan;
using namespace bitplan::quant;

namespace {

Tensor random_tensor(std::mt19937_64& rng, std::size_t channels, std::size_t per_channel) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> scale(0.05, 3.0);
  Tensor t({channels, per_channel}, std::vector<double>(channels * per_channel));
  for (std::size_t c = 0; c < channels; ++c) {
    const double s = scale(rng);
    for (std::size_t i = 0; i < per_channel; ++i) t.data[c * per_channel + i] = s * normal(rng);
  }
  return t;
}

double sq_error(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
  return s;
}

std::vector<QuantSpec> minmax_specs(int bits) {
  std::vector<QuantSpec> out;
  for (Granularity g : {Granularity::per_tensor, Granularity::per_channel})
    for (Scheme s : {Scheme::symmetric, Scheme::asymmetric}) out.push_back({bits, g, s, ClipMethod::minmax()});
  return out;
}

}  // namespace

TEST(Quantize, UnitRangeMapsToFullCodes) {
  const QuantizedTensor q = quantize(Tensor::vector({-1.0, 0.0, 1.0}), {});
  EXPECT_DOUBLE_EQ(q.scale[0], 1.0 / 127.0);
  EXPECT_EQ(q.codes, (std::vector<std::int32_t>{-127, 0, 127}));
  EXPECT_EQ(dequantize(q).data, (std::vector<double>{-1.0, 0.0, 1.0}));
}

TEST(Quantize, AllZeros) {
  for (const QuantSpec& s : minmax_specs(4)) {
    const QuantizedTensor q = quantize(Tensor({3, 1}, {0.0, 0.0, 0.0}), s);
    EXPECT_EQ(dequantize(q).data, (std::vector<double>{0.0, 0.0, 0.0}));
  }
  const QuantizedTensor q = quantize(Tensor::vector({0.0, 0.0, 0.0}), {});
  EXPECT_EQ(q.codes, (std::vector<std::int32_t>{0, 0, 0}));
}

TEST(Dequantize, KnownCodes) {
  QuantizedTensor q;
  q.shape = {3};
  q.codes = {-127, 0, 127};
  q.scale = {1.0 / 127.0};
  q.zero_point = {0};
  const Tensor t = dequantize(q);
  EXPECT_DOUBLE_EQ(t.data[0], -1.0);
  EXPECT_DOUBLE_EQ(t.data[1], 0.0);
  EXPECT_DOUBLE_EQ(t.data[2], 1.0);
}

TEST(Quantize, MseClipMatchesGridScan) {
  std::mt19937_64 rng(42);
  for (int trial = 0; trial < 20; ++trial) {
    const Tensor w = random_tensor(rng, 1, 64);
    double max_abs = 0.0;
    for (double x : w.data) max_abs = std::max(max_abs, std::abs(x));
    const double levels = 7.0;  // 4-bit symmetric
    double best = INFINITY, best_clip = 0.0;
    for (int k = 0; k < 100; ++k) {
      const double clip = max_abs * (0.1 + 0.9 * k / 99.0);
      double e = 0.0;
      for (double x : w.data) {
        const double r = std::round(std::min(std::max(x, -clip), clip) / (clip / levels));
        e += std::pow(r * (clip / levels) - x, 2);
      }
      if (e < best) best = e, best_clip = clip;
    }
    EXPECT_NEAR(mse_clip(w.data, 4), best_clip, 1e-12 * max_abs);
    const QuantizedTensor q = quantize(w, {4, Granularity::per_tensor, Scheme::symmetric, ClipMethod::mse()});
    EXPECT_NEAR(q.clip_hi[0], best_clip, 1e-12 * max_abs);
  }
}

TEST(Quantize, RejectsBadInput) {
  EXPECT_THROW(quantize(Tensor::vector({1.0}), {1}), InputError);
  EXPECT_THROW(quantize(Tensor::vector({1.0}), {17}), InputError);
  EXPECT_THROW(quantize(Tensor(), {}), InputError);
  EXPECT_THROW(clip_method_from_string("median"), InputError);
  EXPECT_THROW(quantize(Tensor::vector({1.0}), {8, Granularity::per_tensor, Scheme::symmetric,
                                                 ClipMethod::at_percentile(40.0)}),
               InputError);
}

TEST(Quantize, SpecJsonRoundTrip) {
  const QuantSpec s{4, Granularity::per_channel, Scheme::asymmetric, ClipMethod::at_percentile(99.5)};
  EXPECT_EQ(QuantSpec::from_json(s.to_json()), s);
  EXPECT_EQ(clip_method_from_string(to_string(ClipMethod::mse())), ClipMethod::mse());
}

TEST(QuantizeProperty, IdempotentOnItsOwnGrid) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 300; ++trial) {
    const Tensor w = random_tensor(rng, 1 + rng() % 6, 1 + rng() % 40);
    for (int bits : {2, 3, 4, 8, 16})
      for (const QuantSpec& s : minmax_specs(bits)) {
        const Tensor once = fake_quant(w, s);
        ASSERT_EQ(fake_quant(once, s).data, once.data) << "bits " << bits << " trial " << trial;
      }
  }
}

TEST(QuantizeProperty, RoundingErrorWithinHalfStep) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const Tensor w = random_tensor(rng, 1 + rng() % 6, 1 + rng() % 40);
    for (int bits : {2, 4, 8})
      for (QuantSpec s : minmax_specs(bits))
        for (ClipMethod clip : {ClipMethod::minmax(), ClipMethod::at_percentile(90.0), ClipMethod::mse()}) {
          s.clip = clip;
          const QuantizedTensor q = quantize(w, s);
          const Tensor d = dequantize(q);
          const std::size_t groups = q.scale.size(), stride = w.data.size() / groups;
          for (std::size_t i = 0; i < w.data.size(); ++i) {
            const std::size_t g = i / stride;
            const double x = std::clamp(w.data[i], q.clip_lo[g], q.clip_hi[g]);
            ASSERT_LE(std::abs(d.data[i] - x), q.scale[g] / 2 * (1 + 1e-9));
          }
        }
  }
}

TEST(QuantizeProperty, OnGridValuesReproduced) {
  const Tensor w = Tensor::vector({-1.0, -0.5, 0.0, 0.25, 1.0});
  EXPECT_EQ(fake_quant(w, {3}).data, (std::vector<double>{-1.0, -2.0 / 3.0, 0.0, 1.0 / 3.0, 1.0}));
  const Tensor grid = fake_quant(w, {3});
  EXPECT_EQ(fake_quant(grid, {3}).data, grid.data);
  EXPECT_EQ(perturbation_norm(grid, {3}), 0.0);
  EXPECT_EQ(perturbation_norm(Tensor::vector({-1.0, 0.0, 1.0}), {8}), 0.0);
}

TEST(QuantizeProperty, PerChannelMatchesPerTensorOnWidestChannel) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const Tensor w = random_tensor(rng, 2 + rng() % 6, 8 + rng() % 32);
    const std::size_t stride = w.channel_stride();
    std::size_t widest = 0;
    double max_abs = 0.0;
    for (std::size_t i = 0; i < w.data.size(); ++i)
      if (std::abs(w.data[i]) > max_abs) max_abs = std::abs(w.data[i]), widest = i / stride;
    for (int bits : {2, 4, 8}) {
      const Tensor pc = fake_quant(w, {bits, Granularity::per_channel});
      const Tensor pt = fake_quant(w, {bits, Granularity::per_tensor});
      for (std::size_t i = widest * stride; i < (widest + 1) * stride; ++i) ASSERT_EQ(pc.data[i], pt.data[i]);
    }
  }
}

TEST(QuantizeProperty, PerChannelLowerErrorInAggregate) {
  std::mt19937_64 rng(3);
  for (int bits : {2, 4, 8})
    for (Scheme scheme : {Scheme::symmetric, Scheme::asymmetric}) {
      double pc = 0.0, pt = 0.0;
      for (int trial = 0; trial < 200; ++trial) {
        const Tensor w = random_tensor(rng, 2 + rng() % 6, 16 + rng() % 48);
        pc += sq_error(fake_quant(w, {bits, Granularity::per_channel, scheme}), w);
        pt += sq_error(fake_quant(w, {bits, Granularity::per_tensor, scheme}), w);
      }
      EXPECT_LT(pc, pt) << "bits " << bits;
    }
}

// A narrower per-channel step need not be better for every tensor: here the
// per-tensor grid (step 0.2) hits 0.6 exactly, the per-channel one (step 1/7)
// does not.
TEST(QuantizeProperty, PerChannelCanLoseOnASingleTensor) {
  const Tensor w({2, 2}, {1.4, 0.0, 0.6, 1.0});
  const QuantSpec pc{4, Granularity::per_channel}, pt{4, Granularity::per_tensor};
  EXPECT_GT(perturbation_norm(w, pc), perturbation_norm(w, pt) + 1e-4);
}

TEST(QuantizeProperty, PerturbationMatchesRecomputationAndFallsWithBits) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 300; ++trial) {
    const Tensor w = random_tensor(rng, 1 + rng() % 4, 16 + rng() % 48);
    for (const QuantSpec& base : minmax_specs(8)) {
      double prev = INFINITY;
      for (int bits = 2; bits <= 8; ++bits) {
        QuantSpec s = base;
        s.bits = bits;
        const double p = perturbation_norm(w, s);
        EXPECT_DOUBLE_EQ(p, sq_error(fake_quant(w, s), w));
        ASSERT_LE(p, prev) << "trial " << trial << " bits " << bits;
        prev = p;
      }
    }
  }
}

TEST(FoldBn, IdentityAndScale) {
  BnFoldInput in;
  in.weight = Tensor({2, 3}, {1, 2, 3, 4, 5, 6});
  in.bias = {0.5, -0.5};
  in.mean = {0, 0};
  in.var = {1, 1};
  in.gamma = {1, 1};
  in.beta = {0, 0};
  in.eps = 0.0;
  FoldedConv f = fold_bn(in);
  EXPECT_EQ(f.weight.data, in.weight.data);
  EXPECT_EQ(f.bias, in.bias);
  in.gamma = {2, 2};
  f = fold_bn(in);
  for (std::size_t i = 0; i < 6; ++i) EXPECT_DOUBLE_EQ(f.weight.data[i], 2 * in.weight.data[i]);
}

TEST(FoldBn, MatchesBatchnormOnChannelOutputs) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0), pos(0.2, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    BnFoldInput in;
    in.weight = random_tensor(rng, 3, 5);
    for (int c = 0; c < 3; ++c) {
      in.bias.push_back(u(rng));
      in.mean.push_back(u(rng));
      in.var.push_back(pos(rng));
      in.gamma.push_back(u(rng));
      in.beta.push_back(u(rng));
    }
    const FoldedConv f = fold_bn(in);
    for (int s = 0; s < 16; ++s) {
      std::vector<double> x(5);
      for (double& v : x) v = u(rng);
      for (std::size_t c = 0; c < 3; ++c) {
        double conv = in.bias[c], folded = f.bias[c];
        for (std::size_t i = 0; i < 5; ++i) {
          conv += in.weight.data[c * 5 + i] * x[i];
          folded += f.weight.data[c * 5 + i] * x[i];
        }
        const double bn = in.gamma[c] * (conv - in.mean[c]) / std::sqrt(in.var[c] + in.eps) + in.beta[c];
        ASSERT_NEAR(folded, bn, 1e-12);
      }
    }
  }
}

TEST(FoldBn, RejectsBadStatistics) {
  BnFoldInput in;
  in.weight = Tensor({1, 2}, {1, 2});
  in.bias = {0};
  in.mean = {0};
  in.var = {-1};
  in.gamma = {1};
  in.beta = {0};
  EXPECT_THROW(fold_bn(in), InputError);
  in.var = {1, 1};
  EXPECT_THROW(fold_bn(in), InputError);
}
