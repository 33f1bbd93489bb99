#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "bitplan/common/error.hpp"
#include "bitplan/costmodel.hpp"

using namespace bitplan;
using namespace bitplan::cost;

namespace {

double rel(double got, double want) { return std::abs(got - want) / want; }

BitPlan uniform_plan(const CostTable& t, int bits) {
  BitPlan p;
  for (const auto& n : t.layer_names) p.assignment.emplace_back(n, bits);
  return p;
}

netlab::ModelDescriptor two_layer() {
  netlab::ModelDescriptor d;
  d.layers.push_back({"a", netlab::LayerKind::dense, 1000, 5000, true, {}});
  d.layers.push_back({"bn", netlab::LayerKind::batchnorm, 20, 0, false, {}});
  d.layers.push_back({"b", netlab::LayerKind::dense, 3000, 2000, true, {}});
  return d;
}

}  // namespace

// Published figures: ResNet18 11.2 / 5.6 MB and 114 / 28 GBOPs, ResNet50
// 24.5 / 13.1 MB and 247 / 67 GBOPs for INT8 / INT4.
TEST(CostModel, ResNetSizesAndBopsNearPublished) {
  const auto r18_8 = build_cost_table(netlab::resnet18_descriptor(), {4, 8}, 8);
  const auto r18_4 = build_cost_table(netlab::resnet18_descriptor(), {4, 8}, 4);
  const auto r50_8 = build_cost_table(netlab::resnet50_descriptor(), {4, 8}, 8);
  const auto r50_4 = build_cost_table(netlab::resnet50_descriptor(), {4, 8}, 4);
  EXPECT_LT(rel(uniform_cost(r18_8, 8).size_mb, 11.2), 0.05);
  EXPECT_LT(rel(uniform_cost(r18_8, 4).size_mb, 5.6), 0.05);
  EXPECT_LT(rel(uniform_cost(r50_8, 8).size_mb, 24.5), 0.05);
  EXPECT_LT(rel(uniform_cost(r50_8, 4).size_mb, 13.1), 0.05);
  EXPECT_LT(rel(uniform_cost(r18_8, 8).bops, 114), 0.10);
  EXPECT_LT(rel(uniform_cost(r18_4, 4).bops, 28), 0.10);
  EXPECT_LT(rel(uniform_cost(r50_8, 8).bops, 247), 0.10);
  EXPECT_LT(rel(uniform_cost(r50_4, 4).bops, 67), 0.10);
}

TEST(CostModel, RandomResNet50PlanMatchesRecomputation) {
  const netlab::ModelDescriptor d = netlab::resnet50_descriptor();
  const CostTable t = build_cost_table(d, {2, 4, 8}, 8);
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    BitPlan p;
    double size = 0.0, bops = 0.0;
    for (const auto& layer : d.layers) {
      if (!layer.quantizable) continue;
      const int b = std::vector<int>{2, 4, 8}[rng() % 3];
      p.assignment.emplace_back(layer.name, b);
      size += static_cast<double>(layer.param_count) * b / 8.0 / 1e6;
      bops += static_cast<double>(layer.mac_count) * b * 8 / 1e9;
    }
    const PlanCost c = plan_cost(p, t);
    EXPECT_NEAR(c.size_mb, size, 1e-9 * size);
    EXPECT_NEAR(c.bops, bops, 1e-9 * bops);
  }
}

TEST(CostModel, UniformPlanIsColumnSumAndBatchnormIsFixed) {
  const CostTable t = build_cost_table(two_layer(), {8, 4, 4}, 8);
  EXPECT_EQ(t.bit_options, (std::vector<int>{4, 8}));
  EXPECT_EQ(t.layer_names, (std::vector<std::string>{"a", "b"}));
  EXPECT_DOUBLE_EQ(t.fixed_size_mb, 20 * 4 / 1e6);
  const PlanCost c = uniform_cost(t, 8);
  EXPECT_DOUBLE_EQ(c.size_mb, t.size_mb[0][1] + t.size_mb[1][1]);
  EXPECT_DOUBLE_EQ(c.bops, t.bops[0][1] + t.bops[1][1]);
  EXPECT_DOUBLE_EQ(t.size_mb[0][1], 0.001);
  EXPECT_FALSE(c.latency.has_value());
}

TEST(CostModel, SingleLayerEqualsEntry) {
  netlab::ModelDescriptor d;
  d.layers.push_back({"only", netlab::LayerKind::dense, 640, 64, true, {}});
  const CostTable t = build_cost_table(d, {2, 4}, 8);
  BitPlan p{{{"only", 2}}, 0.0};
  EXPECT_EQ(plan_cost(p, t).size_mb, t.size_mb[0][0]);
  EXPECT_EQ(plan_cost(p, t).bops, t.bops[0][0]);
}

TEST(CostModel, LatencyCsv) {
  const LatencyTable lat = parse_latency_csv("layer,bits,latency\na,4,1.5\na,8,2.5\nb,4,0.5\nb,8,1\n");
  EXPECT_EQ(parse_latency_csv(format_latency_csv(lat)), lat);
  const CostTable t = build_cost_table(two_layer(), {4, 8}, 8, lat);
  ASSERT_TRUE(t.latency);
  BitPlan p{{{"a", 4}, {"b", 8}}, 0.0};
  EXPECT_DOUBLE_EQ(*plan_cost(p, t).latency, 2.5);
  try {
    build_cost_table(two_layer(), {2, 4, 8}, 8, lat);
    FAIL();
  } catch (const InputError& e) {
    EXPECT_EQ(e.code(), "E_LATENCY_MISSING");
    EXPECT_NE(std::string(e.what()).find("a@2"), std::string::npos);
  }
  EXPECT_THROW(parse_latency_csv("layer,bits\n"), InputError);
  EXPECT_THROW(parse_latency_csv("layer,bits,latency\na,x,1\n"), InputError);
  EXPECT_THROW(parse_latency_csv("layer,bits,latency\na,4,1\na,4,2\n"), InputError);
  EXPECT_THROW(load_latency_csv("/nonexistent/lat.csv"), InputError);
}

TEST(CostModel, PlanMismatchRejected) {
  const CostTable t = build_cost_table(two_layer(), {4, 8}, 8);
  EXPECT_THROW(plan_cost(BitPlan{{{"a", 4}}, 0.0}, t), InputError);
  EXPECT_THROW(plan_cost(BitPlan{{{"b", 4}, {"a", 4}}, 0.0}, t), InputError);
  EXPECT_THROW(plan_cost(BitPlan{{{"a", 3}, {"b", 4}}, 0.0}, t), InputError);
}

TEST(Budget, UniformBudgetHasZeroSlack) {
  const CostTable t = build_cost_table(netlab::resnet18_descriptor(), {2, 4, 8}, 8);
  const PlanCost c = uniform_cost(t, 8);
  CostBudget b;
  b.size_limit_mb = c.size_mb;
  b.bops_limit = c.bops;
  const FeasibilityReport r = check_budget(uniform_plan(t, 8), t, b);
  EXPECT_TRUE(r.feasible);
  for (const auto& k : r.constraints) EXPECT_EQ(k.slack, 0.0);
}

TEST(Budget, BelowMinimumIsInfeasibleForEveryPlan) {
  const CostTable t = build_cost_table(two_layer(), {4, 8}, 8);
  CostBudget b;
  b.size_limit_mb = 0.9 * uniform_cost(t, 4).size_mb;
  for (int x : {4, 8})
    for (int y : {4, 8}) EXPECT_FALSE(check_budget(BitPlan{{{"a", x}, {"b", y}}, 0.0}, t, b).feasible);
}

TEST(Budget, ThreeConstraintSlack) {
  const LatencyTable lat = parse_latency_csv("layer,bits,latency\na,4,1.5\na,8,2.5\nb,4,0.5\nb,8,1\n");
  const CostTable t = build_cost_table(two_layer(), {4, 8}, 8, lat);
  CostBudget b;
  b.size_limit_mb = 0.003;
  b.bops_limit = 0.0002;
  b.latency_limit = 2.0;
  const FeasibilityReport r = check_budget(BitPlan{{{"a", 8}, {"b", 4}}, 0.0}, t, b);
  ASSERT_EQ(r.constraints.size(), 3u);
  const double size = 1000 * 8 / 8e6 + 3000 * 4 / 8e6;
  const double bops = (5000.0 * 8 * 8 + 2000.0 * 4 * 8) / 1e9;
  EXPECT_NEAR(r.constraints[0].slack, 0.003 - size, 1e-15);
  EXPECT_NEAR(r.constraints[1].slack, 0.0002 - bops, 1e-15);
  EXPECT_NEAR(r.constraints[2].slack, 2.0 - 3.0, 1e-15);
  EXPECT_FALSE(r.feasible);
  EXPECT_TRUE(r.constraints[0].satisfied);
}

TEST(Budget, LevelsFractionsAndJson) {
  const CostTable t = build_cost_table(two_layer(), {4, 8}, 8);
  const BudgetLevels levels;
  EXPECT_EQ(levels.fraction("medium"), 0.7);
  EXPECT_THROW(levels.fraction("extreme"), InputError);
  const CostBudget b = fractional_budget(t, {Resource::size, Resource::bops}, levels.fraction("high"));
  EXPECT_DOUBLE_EQ(*b.size_limit_mb, 0.9 * uniform_cost(t, 8).size_mb);
  EXPECT_FALSE(b.latency_limit);
  EXPECT_THROW(fractional_budget(t, {Resource::latency}, 0.5), InputError);
  const CostBudget r = CostBudget::from_json(b.to_json());
  EXPECT_EQ(r.size_limit_mb, b.size_limit_mb);
  EXPECT_EQ(r.bops_limit, b.bops_limit);
  EXPECT_EQ(CostTable::from_json(t.to_json()).to_json(), t.to_json());
  EXPECT_THROW(CostBudget{}.validate(), InputError);
  CostBudget neg;
  neg.size_limit_mb = -1.0;
  EXPECT_THROW(neg.validate(), InputError);
  EXPECT_EQ(resource_from_string(to_string(Resource::bops)), Resource::bops);
}
