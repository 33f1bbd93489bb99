#include <gtest/gtest.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>

#include "bitplan/common/error.hpp"
#include "bitplan/sensitivity.hpp"

using namespace bitplan;
using namespace bitplan::sensitivity;

namespace {

HvpOracle dense_oracle(const std::vector<double>& a, std::size_t d) {
  return [a, d](std::span<const double> v, std::span<double> out) {
    for (std::size_t i = 0; i < d; ++i) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += a[i * d + j] * v[j];
      out[i] = s;
    }
  };
}

std::vector<double> random_symmetric(std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> a(d * d);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) a[i * d + j] = a[j * d + i] = normal(rng) + (i == j ? 3.0 : 0.0);
  return a;
}

// Quadratic model over two layers of n weights each; A is block diagonal
// with the given blocks.
netlab::QuadraticModel block_model(const std::vector<double>& b1, const std::vector<double>& b2, std::size_t n) {
  std::vector<double> a(4 * n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      a[i * 2 * n + j] = b1[i * n + j];
      a[(n + i) * 2 * n + n + j] = b2[i * n + j];
    }
  return netlab::QuadraticModel(
      netlab::ParamLayout({{"l1", 0, n, {n}, true}, {"l2", n, n, {n}, true}}), a);
}

class CountingModel : public netlab::DifferentiableModel {
 public:
  explicit CountingModel(const netlab::DifferentiableModel& inner) : inner_(inner) {}
  const netlab::ParamLayout& layout() const override { return inner_.layout(); }
  netlab::ForwardResult forward(const netlab::ParamVector& p, const netlab::Batch& b) const override {
    return inner_.forward(p, b);
  }
  netlab::ParamVector grad(const netlab::ParamVector& p, const netlab::Batch& b) const override {
    return inner_.grad(p, b);
  }
  std::vector<double> hvp(const netlab::ParamVector& p, const netlab::Batch& b,
                          std::span<const double> v) const override {
    ++calls;
    return inner_.hvp(p, b, v);
  }
  mutable std::atomic<int> calls{0};

 private:
  const netlab::DifferentiableModel& inner_;
};

}  // namespace

TEST(Hutchinson, IdentityIsExactWithRademacher) {
  std::vector<double> eye(100, 0.0);
  for (std::size_t i = 0; i < 10; ++i) eye[i * 10 + i] = 1.0;
  for (int samples : {1, 7, 64}) {
    const TraceEstimate t = hutchinson_trace(dense_oracle(eye, 10), 10, samples, ProbeDistribution::rademacher, 5);
    EXPECT_EQ(t.mean, 10.0);
    EXPECT_EQ(t.std_error, 0.0);
  }
}

TEST(Hutchinson, GaussianDiagonalWithinThreeStandardErrors) {
  const std::vector<double> a = {1, 0, 0, 0, 2, 0, 0, 0, 3};
  const TraceEstimate t = hutchinson_trace(dense_oracle(a, 3), 3, 10000, ProbeDistribution::gaussian, 11);
  EXPECT_GT(t.std_error, 0.0);
  EXPECT_LT(std::abs(t.mean - 6.0), 3 * t.std_error);
}

TEST(Hutchinson, RandomSymmetricRelativeError) {
  const std::size_t d = 50;
  const std::vector<double> a = random_symmetric(d, 77);
  double exact = 0.0;
  for (std::size_t i = 0; i < d; ++i) exact += a[i * d + i];
  int good = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const TraceEstimate t = hutchinson_trace(dense_oracle(a, d), d, 4096, ProbeDistribution::rademacher, seed, 4);
    good += std::abs(t.mean - exact) / std::abs(exact) < 0.10;
  }
  EXPECT_GE(good, 95);
}

TEST(Hutchinson, ThreadCountDoesNotChangeResult) {
  const std::vector<double> a = random_symmetric(8, 3);
  const auto one = hutchinson_trace(dense_oracle(a, 8), 8, 200, ProbeDistribution::gaussian, 9, 1);
  const auto many = hutchinson_trace(dense_oracle(a, 8), 8, 200, ProbeDistribution::gaussian, 9, 4);
  EXPECT_EQ(one.mean, many.mean);
  EXPECT_EQ(one.std_error, many.std_error);
}

TEST(Hutchinson, SingleProbeReproducible) {
  const std::vector<double> a = random_symmetric(6, 4);
  const auto x = hutchinson_trace(dense_oracle(a, 6), 6, 1, ProbeDistribution::rademacher, 123);
  const auto y = hutchinson_trace(dense_oracle(a, 6), 6, 1, ProbeDistribution::rademacher, 123);
  EXPECT_EQ(x.mean, y.mean);
}

TEST(Hutchinson, NonFiniteProbeNamed) {
  const HvpOracle bad = [](std::span<const double>, std::span<double> out) {
    for (double& x : out) x = std::nan("");
  };
  try {
    hutchinson_trace(bad, 3, 2, ProbeDistribution::rademacher, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "E_NONFINITE_PROBE");
  }
  EXPECT_THROW(hutchinson_trace(bad, 3, 0, ProbeDistribution::rademacher, 0), InputError);
}

TEST(LayerTrace, BlockTraceOfQuadraticModel) {
  const std::size_t n = 5;
  const auto b1 = random_symmetric(n, 1), b2 = random_symmetric(n, 2);
  const auto model = block_model(b1, b2, n);
  netlab::ParamVector p(model.layout());
  double t1 = 0.0, t2 = 0.0;
  for (std::size_t i = 0; i < n; ++i) t1 += b1[i * n + i], t2 += b2[i * n + i];
  const auto e1 = layer_trace(model, p, {}, "l1", 2000, ProbeDistribution::rademacher, 1);
  const auto e2 = layer_trace(model, p, {}, "l2", 2000, ProbeDistribution::rademacher, 2);
  EXPECT_LT(std::abs(e1.mean - t1), 3 * e1.std_error + 1e-12);
  EXPECT_LT(std::abs(e2.mean - t2), 3 * e2.std_error + 1e-12);
}

TEST(LayerTrace, DuplicatedLayersAgree) {
  const std::size_t n = 6;
  const auto b = random_symmetric(n, 8);
  const auto model = block_model(b, b, n);
  netlab::ParamVector p(model.layout());
  const auto e1 = layer_trace(model, p, {}, "l1", 3000, ProbeDistribution::rademacher, 1);
  const auto e2 = layer_trace(model, p, {}, "l2", 3000, ProbeDistribution::rademacher, 2);
  EXPECT_LT(std::abs(e1.mean - e2.mean), 3 * std::hypot(e1.std_error, e2.std_error));
}

TEST(Sensitivity, FromTrace) {
  EXPECT_EQ(sensitivity_from_trace(4.0, 2, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(sensitivity_from_trace(8.0, 4, 0.5), 2 * sensitivity_from_trace(4.0, 4, 0.5));
  EXPECT_EQ(sensitivity_from_trace(-3.0, 4, 0.5, "conv1"), 0.0);
}

TEST(Sensitivity, OnGridWeightsHaveZeroDelta) {
  const auto model = block_model(random_symmetric(3, 1), random_symmetric(3, 2), 3);
  netlab::ParamVector p(model.layout());
  const quant::Tensor grid = quant::fake_quant(quant::Tensor::vector({0.5, -0.3, 1.0}), {4});
  p.values = {-1.0, 0.0, 1.0, grid.data[0], grid.data[1], grid.data[2]};
  ProfileConfig c;
  c.samples = 8;
  EXPECT_EQ(layer_sensitivity(model, p, {}, "l1", 8, c), 0.0);
  EXPECT_EQ(layer_sensitivity(model, p, {}, "l2", 4, c), 0.0);
  EXPECT_THROW(layer_sensitivity(model, p, {}, "nope", 8, c), InputError);
}

TEST(Profile, ShapeAndOracleCallCount) {
  const std::size_t n = 4;
  std::vector<double> a(9 * n * n, 0.0);
  for (std::size_t i = 0; i < 3 * n; ++i) a[i * 3 * n + i] = 1.0 + static_cast<double>(i);
  const netlab::QuadraticModel q(
      netlab::ParamLayout({{"a", 0, n, {n}, true}, {"b", n, n, {n}, true}, {"c", 2 * n, n, {n}, true}}), a);
  const CountingModel model(q);
  netlab::ParamVector p(q.layout());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : p.values) x = normal(rng);
  ProfileConfig c;
  c.samples = 16;
  const SensitivityProfile prof = profile(model, p, {}, {8, 4}, c);
  EXPECT_EQ(prof.bit_options, (std::vector<int>{4, 8}));
  ASSERT_EQ(prof.delta.size(), 3u);
  for (const auto& row : prof.delta) EXPECT_EQ(row.size(), 2u);
  EXPECT_EQ(model.calls.load(), 3 * 16);
}

TEST(Profile, RecombinesStoredTracesAndNorms) {
  const auto model = block_model(random_symmetric(6, 1), random_symmetric(6, 2), 6);
  netlab::ParamVector p(model.layout());
  std::mt19937_64 rng(2);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (double& x : p.values) x = normal(rng);
  ProfileConfig c;
  c.samples = 64;
  c.quant.granularity = quant::Granularity::per_tensor;
  const SensitivityProfile prof = profile(model, p, {}, {2, 4, 8}, c);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto w = p.segment(prof.layer_names[i]);
    const quant::Tensor t = quant::Tensor::vector({w.begin(), w.end()});
    for (std::size_t k = 0; k < 3; ++k) {
      quant::QuantSpec s = c.quant;
      s.bits = prof.bit_options[k];
      EXPECT_DOUBLE_EQ(prof.delta[i][k], prof.trace_per_param[i] * quant::perturbation_norm(t, s));
    }
    EXPECT_GE(prof.delta[i][0], prof.delta[i][1]);
    EXPECT_GE(prof.delta[i][1], prof.delta[i][2]);
  }
}

TEST(Profile, LargerWeightsRankMoreSensitive) {
  const std::size_t n = 8;
  std::vector<double> eye(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) eye[i * n + i] = 1.0;
  const auto model = block_model(eye, eye, n);
  netlab::ParamVector p(model.layout());
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    p.values[i] = normal(rng);
    p.values[n + i] = 10 * p.values[i];
  }
  ProfileConfig c;
  c.samples = 32;
  const SensitivityProfile prof = profile(model, p, {}, {4}, c);
  EXPECT_GT(prof.delta[1][0], prof.delta[0][0]);
}

TEST(Profile, JsonRoundTripAndValidation) {
  const auto model = block_model(random_symmetric(3, 1), random_symmetric(3, 2), 3);
  netlab::ParamVector p(model.layout());
  p.values = {0.3, -0.7, 0.1, 0.9, 0.2, -0.4};
  ProfileConfig c;
  c.samples = 16;
  const SensitivityProfile prof = profile(model, p, {}, {2, 4, 8}, c);
  EXPECT_EQ(SensitivityProfile::from_json(prof.to_json()), prof);
  const auto path = std::filesystem::temp_directory_path() / "bitplan_profile_test.json";
  write_json_file(path, prof.to_json());
  EXPECT_EQ(SensitivityProfile::load(path), prof);
  try {
    SensitivityProfile::load("/nonexistent/profile.json");
    FAIL();
  } catch (const InputError& e) {
    EXPECT_EQ(e.code(), "E_PROFILE_NOT_FOUND");
  }
  Json bad = prof.to_json();
  bad["delta"][0][0] = -1.0;
  EXPECT_THROW(SensitivityProfile::from_json(bad), InputError);
  EXPECT_THROW(profile(model, p, {}, {4, 4}, c), InputError);
  EXPECT_THROW(profile(model, p, {}, {}, c), InputError);
}
