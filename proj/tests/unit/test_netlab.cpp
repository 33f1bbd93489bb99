#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "bitplan/common/error.hpp"
#include "bitplan/netlab/network.hpp"
#include "bitplan/netlab/trainer.hpp"

using namespace bitplan;
using namespace bitplan::netlab;

namespace {

Batch random_batch(std::size_t n, std::size_t dim, std::size_t classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Batch b;
  b.inputs = Matrix(n, dim);
  for (double& x : b.inputs.data) x = normal(rng);
  for (std::size_t i = 0; i < n; ++i) b.labels.push_back(static_cast<int>(rng() % classes));
  return b;
}

std::vector<double> random_direction(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

double rel_err(const std::vector<double>& a, const std::vector<double>& b) {
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - b[i]) * (a[i] - b[i]);
    den += b[i] * b[i];
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-12);
}

struct ZooEntry {
  const char* name;
  ModelDescriptor desc;
  std::size_t input_dim;
  std::size_t classes;
};

std::vector<ZooEntry> zoo() {
  return {{"mlp_tanh", mlp_descriptor(5, {6, 4}, 3), 5, 3},
          {"mlp_relu", mlp_descriptor(5, {7}, 3, ActivationFn::relu), 5, 3},
          {"convnet_bn", convnet_descriptor(6, 3, {2, 3}), 36, 3},
          {"convnet_plain", convnet_descriptor(6, 3, {2, 3}, false), 36, 3}};
}

// Forward pass of a dense-tanh-dense network written out by hand.
double manual_mlp_loss(const ParamVector& p, const Batch& b, std::size_t in, std::size_t hidden, std::size_t out) {
  const auto w1 = p.segment("fc1"), w2 = p.segment("fc2");
  double total = 0.0;
  for (std::size_t s = 0; s < b.size(); ++s) {
    std::vector<double> h(hidden);
    for (std::size_t j = 0; j < hidden; ++j) {
      double a = w1[hidden * in + j];
      for (std::size_t i = 0; i < in; ++i) a += w1[j * in + i] * b.inputs(s, i);
      h[j] = std::tanh(a);
    }
    std::vector<double> z(out);
    for (std::size_t k = 0; k < out; ++k) {
      z[k] = w2[out * hidden + k];
      for (std::size_t j = 0; j < hidden; ++j) z[k] += w2[k * hidden + j] * h[j];
    }
    double mx = z[0];
    for (double v : z) mx = std::max(mx, v);
    double se = 0.0;
    for (double v : z) se += std::exp(v - mx);
    total += -(z[static_cast<std::size_t>(b.labels[s])] - mx - std::log(se));
  }
  return total / static_cast<double>(b.size());
}

}  // namespace

TEST(Forward, ZeroWeightsGiveLogK) {
  for (std::size_t k : {2u, 3u, 7u}) {
    const Network net = Network::from_descriptor(mlp_descriptor(4, {}, k));
    ParamVector p(net.layout());
    EXPECT_NEAR(net.forward(p, random_batch(5, 4, k, k)).loss, std::log(static_cast<double>(k)), 1e-12);
  }
}

TEST(Forward, IdentityWeightsOneHot) {
  const std::size_t k = 4;
  const Network net = Network::from_descriptor(mlp_descriptor(k, {}, k));
  ParamVector p(net.layout());
  auto w = p.weights("fc1");
  for (std::size_t i = 0; i < k; ++i) w[i * k + i] = 1.0;
  Batch b;
  b.inputs = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    b.inputs(i, i) = 1.0;
    b.labels.push_back(static_cast<int>(i));
  }
  const double expected = -std::log(std::exp(1.0) / (std::exp(1.0) + (k - 1.0)));
  EXPECT_NEAR(net.forward(p, b).loss, expected, 1e-12);
}

TEST(Forward, MatchesHandRolledMlp) {
  const Network net = Network::from_descriptor(mlp_descriptor(5, {6}, 3));
  const ParamVector p = net.init_params(3);
  const Batch b = random_batch(8, 5, 3, 11);
  EXPECT_NEAR(net.forward(p, b).loss, manual_mlp_loss(p, b, 5, 6, 3), 1e-12);
}

TEST(Gradient, SymmetricBatchAverages) {
  const Network net = Network::from_descriptor(mlp_descriptor(3, {}, 2));
  ParamVector p(net.layout());
  Batch both = random_batch(1, 3, 2, 5);
  Batch a = both, b = both;
  for (double& x : b.inputs.data) x = -x;
  both.inputs = Matrix(2, 3);
  for (std::size_t i = 0; i < 3; ++i) {
    both.inputs(0, i) = a.inputs(0, i);
    both.inputs(1, i) = b.inputs(0, i);
  }
  both.labels = {a.labels[0], a.labels[0]};
  const auto ga = net.grad(p, a).values, gb = net.grad(p, b).values, g = net.grad(p, both).values;
  for (std::size_t i = 0; i < g.size(); ++i) EXPECT_NEAR(g[i], 0.5 * (ga[i] + gb[i]), 1e-14);
}

TEST(Gradient, MatchesCentralDifferences) {
  for (const ZooEntry& z : zoo()) {
    const Network net = Network::from_descriptor(z.desc);
    ParamVector p = net.init_params(7);
    const Batch b = random_batch(8, z.input_dim, z.classes, 13);
    net.calibrate_batchnorm(p, b.inputs);
    const auto g = net.grad(p, b).values;
    std::vector<double> fd(g.size());
    for (std::size_t j = 0; j < g.size(); ++j) {
      ParamVector plus = p, minus = p;
      plus.values[j] += 1e-4;
      minus.values[j] -= 1e-4;
      fd[j] = (net.forward(plus, b).loss - net.forward(minus, b).loss) / 2e-4;
    }
    EXPECT_LT(rel_err(g, fd), 1e-4) << z.name;
  }
}

TEST(Gradient, VanishesAtQuadraticMinimum) {
  const QuadraticModel m(ParamLayout({{"w", 0, 1, {1}, true}}), {2.0});
  ParamVector p(m.layout());
  EXPECT_NEAR(m.grad(p, {}).values[0], 0.0, 1e-8);
}

TEST(Hvp, QuadraticIsExactlyA) {
  const std::size_t d = 6;
  std::vector<double> a(d * d);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j <= i; ++j) a[i * d + j] = a[j * d + i] = u(rng);
  const QuadraticModel m(ParamLayout({{"a", 0, 2, {2}, true}, {"b", 2, 4, {4}, true}}), a);
  const ParamVector p = [&] {
    ParamVector q(m.layout());
    q.values = random_direction(d, 1);
    return q;
  }();
  const auto v = random_direction(d, 2);
  const auto hv = m.hvp(p, {}, v);
  for (std::size_t i = 0; i < d; ++i) {
    double e = 0.0;
    for (std::size_t j = 0; j < d; ++j) e += a[i * d + j] * v[j];
    EXPECT_NEAR(hv[i], e, 1e-12);
  }
}

TEST(Hvp, SymmetricAndMatchesGradientDifferences) {
  for (const ZooEntry& z : zoo()) {
    const Network net = Network::from_descriptor(z.desc);
    ParamVector p = net.init_params(5);
    const Batch b = random_batch(8, z.input_dim, z.classes, 17);
    net.calibrate_batchnorm(p, b.inputs);
    const std::size_t n = p.values.size();
    const auto v1 = random_direction(n, 1), v2 = random_direction(n, 2);
    const auto h1 = net.hvp(p, b, v1), h2 = net.hvp(p, b, v2);
    double a = 0.0, c = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      a += v2[i] * h1[i];
      c += v1[i] * h2[i];
    }
    EXPECT_LT(std::abs(a - c) / std::max(std::abs(a), 1e-12), 1e-6) << z.name;

    ParamVector plus = p, minus = p;
    for (std::size_t i = 0; i < n; ++i) {
      plus.values[i] += 1e-4 * v1[i];
      minus.values[i] -= 1e-4 * v1[i];
    }
    const auto gp = net.grad(plus, b).values, gm = net.grad(minus, b).values;
    std::vector<double> fd(n);
    for (std::size_t i = 0; i < n; ++i) fd[i] = (gp[i] - gm[i]) / 2e-4;
    EXPECT_LT(rel_err(h1, fd), 1e-3) << z.name;
  }
}

TEST(Train, SeparableReachesFullAccuracy) {
  const Dataset d = make_blobs(40, 2, 4, 0.2, 0.25, 9);
  const Network net = Network::from_descriptor(mlp_descriptor(4, {}, 2));
  TrainSchedule s;
  s.epochs = 50;
  s.learning_rate = 0.1;
  s.batch_size = 16;
  const TrainResult r = train(net, net.init_params(1), d, s);
  EXPECT_DOUBLE_EQ(evaluate(net, r.params, d.val), 1.0);
}

TEST(Train, ZeroEpochsIsIdentity) {
  const Dataset d = make_blobs(10, 2, 3, 0.5, 0.2, 1);
  const Network net = Network::from_descriptor(mlp_descriptor(3, {4}, 2));
  const ParamVector p = net.init_params(2);
  TrainSchedule s;
  s.epochs = 0;
  const TrainResult r = train(net, p, d, s);
  EXPECT_EQ(r.params.values, p.values);
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, PatienceOneStopsAfterTwoFlatEpochs) {
  const Dataset d = make_blobs(10, 2, 3, 0.5, 0.2, 1);
  const Network net = Network::from_descriptor(mlp_descriptor(3, {4}, 2));
  TrainSchedule s;
  s.epochs = 10;
  s.learning_rate = 1e-12;
  s.weight_decay = 0.0;
  s.early_stop_patience = 1;
  EXPECT_EQ(train(net, net.init_params(2), d, s).history.size(), 2u);
}

TEST(Train, NonFiniteLossNamesEpochAndBatch) {
  const Dataset d = make_blobs(10, 2, 3, 0.5, 0.2, 1);
  const Network net = Network::from_descriptor(mlp_descriptor(3, {}, 2));
  ParamVector p = net.init_params(2);
  p.values[0] = std::nan("");
  TrainSchedule s;
  try {
    train(net, p, d, s);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "E_NAN_LOSS");
    EXPECT_NE(std::string(e.what()).find("epoch 1"), std::string::npos);
  }
}

TEST(Evaluate, ConstantPredictorAndCounting) {
  const Dataset d = make_blobs(5, 4, 3, 0.5, 0.0, 1);
  const Network net = Network::from_descriptor(mlp_descriptor(3, {}, 4));
  ParamVector p(net.layout());
  p.segment("fc1")[net.layout().at("fc1").weight_count() + 2] = 1.0;  // bias on class 2
  EXPECT_DOUBLE_EQ(evaluate(net, p, d.train), 0.25);

  const Batch b = random_batch(10, 3, 4, 21);
  const ParamVector q = net.init_params(4);
  const Matrix z = net.logits(q, b.inputs);
  int correct = 0;
  for (std::size_t s = 0; s < 10; ++s) {
    int best = 0;
    for (int k = 1; k < 4; ++k)
      if (z(s, static_cast<std::size_t>(k)) > z(s, static_cast<std::size_t>(best))) best = k;
    correct += best == b.labels[s];
  }
  EXPECT_DOUBLE_EQ(evaluate(net, q, b), correct / 10.0);
  EXPECT_THROW(evaluate(net, q, Batch{}), InputError);
}

TEST(Checkpoint, RoundTrip) {
  const Network net = Network::from_descriptor(convnet_descriptor(6, 3, {2, 3}));
  ParamVector p = net.init_params(8);
  net.calibrate_batchnorm(p, random_batch(4, 36, 3, 1).inputs);
  const auto path = std::filesystem::temp_directory_path() / "bitplan_ckpt_test.bin";
  save_checkpoint(path, p);
  const ParamVector q = load_checkpoint(path);
  EXPECT_EQ(q.values, p.values);
  EXPECT_EQ(q.buffers, p.buffers);
  EXPECT_EQ(q.checksum(), p.checksum());
}

TEST(Descriptor, ResNetCountsAndJson) {
  const ModelDescriptor r18 = resnet18_descriptor();
  EXPECT_NEAR(r18.total_macs(true) / 1e9, 1.82, 0.05);
  EXPECT_EQ(ModelDescriptor::from_json(r18.to_json()).to_json(), r18.to_json());
  EXPECT_THROW(ModelDescriptor::load("/nonexistent/model.json"), InputError);
}
