#include <gtest/gtest.h>

#include <random>

#include "bitplan/pareto.hpp"

using namespace bitplan;
using cost::Resource;

namespace {

planner::IlpInstance make_instance(std::mt19937_64& rng, std::size_t layers, std::vector<int> bits) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  planner::IlpInstance inst;
  inst.profile.bit_options = inst.table.bit_options = bits;
  inst.table.latency.emplace();
  for (std::size_t i = 0; i < layers; ++i) {
    const std::string name = "l" + std::to_string(i);
    inst.profile.layer_names.push_back(name);
    inst.table.layer_names.push_back(name);
    inst.profile.trace_per_param.push_back(1.0);
    inst.profile.param_counts.push_back(1);
    const double params = 1.0 + 9.0 * u(rng);
    std::vector<double> d, s, b, l;
    for (int bb : bits) {
      d.push_back(u(rng) * params * std::pow(2.0, -bb));
      s.push_back(params * bb / 8.0);
      b.push_back(u(rng) * bb);
      l.push_back(0.2 + u(rng));
    }
    inst.profile.delta.push_back(d);
    inst.table.size_mb.push_back(s);
    inst.table.bops.push_back(b);
    inst.table.latency->push_back(l);
  }
  return inst;
}

std::vector<pareto::FrontierPoint> all_plans(const planner::IlpInstance& inst) {
  const std::size_t l = inst.profile.layer_names.size(), m = inst.profile.bit_options.size();
  std::vector<pareto::FrontierPoint> out;
  std::vector<std::size_t> idx(l, 0);
  while (true) {
    BitPlan p;
    for (std::size_t i = 0; i < l; ++i) {
      p.assignment.emplace_back(inst.profile.layer_names[i], inst.profile.bit_options[idx[i]]);
      p.objective += inst.profile.delta[i][idx[i]];
    }
    out.push_back(pareto::evaluate(p, inst));
    std::size_t pos = 0;
    while (pos < l && ++idx[pos] == m) idx[pos++] = 0;
    if (pos == l) break;
  }
  return out;
}

// Quadratic scan: keep points no other point dominates; among exact ties
// keep the lexicographically highest bits.
std::set<std::vector<int>> oracle_front(const std::vector<pareto::FrontierPoint>& pts,
                                        const std::vector<Resource>& obj) {
  std::set<std::vector<int>> out;
  for (const auto& p : pts) {
    bool keep = true;
    for (const auto& q : pts) {
      if (&p == &q) continue;
      if (pareto::dominates(q, p, obj)) keep = false;
      bool tie = q.perturbation == p.perturbation;
      for (Resource r : obj) tie = tie && q.cost.get(r) == p.cost.get(r);
      if (tie && q.plan.bits() > p.plan.bits()) keep = false;
    }
    if (keep) out.insert(p.plan.bits());
  }
  return out;
}

std::set<std::vector<int>> bit_set(const std::vector<pareto::FrontierPoint>& pts) {
  std::set<std::vector<int>> out;
  for (const auto& p : pts) out.insert(p.plan.bits());
  return out;
}

}  // namespace

TEST(Frontier, SingleLayerBothPlans) {
  planner::IlpInstance inst;
  inst.profile.layer_names = inst.table.layer_names = {"fc"};
  inst.profile.bit_options = inst.table.bit_options = {4, 8};
  inst.profile.delta = {{1.0, 0.1}};
  inst.profile.trace_per_param = {1.0};
  inst.profile.param_counts = {1};
  inst.table.size_mb = {{0.5, 1.0}};
  inst.table.bops = {{1.0, 2.0}};
  const auto res = pareto::frontier(inst, {});
  ASSERT_EQ(res.points.size(), 2u);
  EXPECT_EQ(res.points[0].plan.bits(), std::vector<int>{8});
  EXPECT_EQ(res.points[1].plan.bits(), std::vector<int>{4});
}

TEST(Frontier, TotalDominanceGivesSinglePoint) {
  planner::IlpInstance inst;
  inst.profile.layer_names = inst.table.layer_names = {"a", "b"};
  inst.profile.bit_options = inst.table.bit_options = {4, 8};
  inst.profile.delta = {{0.1, 0.5}, {0.2, 0.3}};
  inst.profile.trace_per_param = {1.0, 1.0};
  inst.profile.param_counts = {1, 1};
  inst.table.size_mb = {{0.5, 1.0}, {0.5, 1.0}};
  inst.table.bops = {{1.0, 2.0}, {1.0, 2.0}};
  const auto res = pareto::frontier(inst, {});
  ASSERT_EQ(res.points.size(), 1u);
  EXPECT_EQ(res.points[0].plan.bits(), (std::vector<int>{4, 4}));
}

TEST(Frontier, SizeObjectiveMatchesBruteForce) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 20; ++t) {
    const auto inst = make_instance(rng, 5, {2, 4, 8});
    pareto::FrontierOptions opt;
    opt.local_moves = 0;
    opt.exhaustive_limit = 0;
    const auto res = pareto::frontier(inst, opt);
    EXPECT_EQ(bit_set(res.points), oracle_front(all_plans(inst), {Resource::size})) << "trial " << t;
  }
}

TEST(Frontier, PairwiseNonDominatedAndSorted) {
  std::mt19937_64 rng(6);
  const std::vector<Resource> obj = {Resource::size, Resource::bops, Resource::latency};
  for (int t = 0; t < 10; ++t) {
    const auto inst = make_instance(rng, 6, {2, 4, 6, 8});
    pareto::FrontierOptions opt;
    opt.objectives = obj;
    opt.exhaustive_limit = 0;
    const auto res = pareto::frontier(inst, opt);
    ASSERT_FALSE(res.points.empty());
    for (std::size_t a = 0; a < res.points.size(); ++a) {
      if (a > 0) EXPECT_LE(res.points[a - 1].perturbation, res.points[a].perturbation);
      for (std::size_t b = 0; b < res.points.size(); ++b)
        if (a != b) EXPECT_FALSE(pareto::dominates(res.points[a], res.points[b], obj));
    }
  }
}

TEST(Frontier, GlobalEndpointsPresent) {
  std::mt19937_64 rng(7);
  const std::vector<Resource> obj = {Resource::size, Resource::bops};
  for (int t = 0; t < 10; ++t) {
    const auto inst = make_instance(rng, 7, {2, 4, 8});  // 3^7 plans
    pareto::FrontierOptions opt;
    opt.objectives = obj;
    opt.exhaustive_limit = 0;
    const auto res = pareto::frontier(inst, opt);
    const auto got = bit_set(res.points);
    const auto all = all_plans(inst);
    auto endpoint = [&](auto key) {
      const auto it = std::min_element(all.begin(), all.end(), [&](const auto& a, const auto& b) {
        return key(a) < key(b);
      });
      return it->plan.bits();
    };
    EXPECT_TRUE(got.count(endpoint([](const auto& p) {
      return std::make_tuple(p.perturbation, p.cost.size_mb, p.cost.bops);
    })));
    EXPECT_TRUE(got.count(endpoint([](const auto& p) {
      return std::make_tuple(p.cost.size_mb, p.cost.bops, p.perturbation);
    })));
    EXPECT_TRUE(got.count(endpoint([](const auto& p) {
      return std::make_tuple(p.cost.bops, p.cost.size_mb, p.perturbation);
    })));
  }
}

TEST(Frontier, SmallSpaceEnumeratedExactly) {
  std::mt19937_64 rng(13);
  const std::vector<Resource> obj = {Resource::size, Resource::bops, Resource::latency};
  for (int t = 0; t < 5; ++t) {
    const auto inst = make_instance(rng, 5, {2, 4, 8});
    pareto::FrontierOptions opt;
    opt.objectives = obj;
    const auto res = pareto::frontier(inst, opt);
    EXPECT_EQ(res.pool_size, 243u);
    EXPECT_EQ(bit_set(res.points), oracle_front(all_plans(inst), obj)) << "trial " << t;
  }
}

TEST(Frontier, PoolFilterIsExact) {
  std::mt19937_64 rng(8);
  const std::vector<Resource> obj = {Resource::size, Resource::latency};
  const auto inst = make_instance(rng, 6, {4, 8});
  const auto all = all_plans(inst);
  EXPECT_EQ(bit_set(pareto::non_dominated(all, obj)), oracle_front(all, obj));
}

TEST(Frontier, AllSweepsInfeasibleGivesEmptyWithDiagnostics) {
  std::mt19937_64 rng(9);
  const auto inst = make_instance(rng, 4, {4, 8});
  pareto::FrontierOptions opt;
  opt.sweep_fractions = {0.01, 0.02};
  opt.exhaustive_limit = 0;
  const auto res = pareto::frontier(inst, opt);
  EXPECT_TRUE(res.points.empty());
  EXPECT_EQ(res.diagnostics.size(), 2u);
}

TEST(Frontier, CsvHeaderAndRows) {
  std::mt19937_64 rng(10);
  const auto inst = make_instance(rng, 3, {4, 8});
  const auto res = pareto::frontier(inst, {});
  const std::string csv = pareto::frontier_csv(res.points);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "perturbation,size_mb,bops,latency,bits_csv");
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), res.points.size() + 1);
}

namespace {

pareto::FrontierPoint point(std::vector<int> bits, double pert, double size) {
  pareto::FrontierPoint p;
  for (std::size_t i = 0; i < bits.size(); ++i) p.plan.assignment.emplace_back("l" + std::to_string(i), bits[i]);
  p.plan.objective = pert;
  p.perturbation = pert;
  p.cost.size_mb = size;
  return p;
}

cost::CostTable two_layer_table() {
  cost::CostTable t;
  t.layer_names = {"l0", "l1"};
  t.bit_options = {4, 8};
  t.size_mb = {{0.5, 1.0}, {0.5, 1.0}};
  t.bops = {{1.0, 2.0}, {1.0, 2.0}};
  return t;
}

}  // namespace

TEST(Select, PrefersUniformEightWhenFeasible) {
  const std::vector<pareto::FrontierPoint> f = {point({8, 8}, 0.1, 2.0), point({4, 4}, 1.0, 1.0)};
  cost::CostBudget b;
  b.size_limit_mb = 2.0;
  EXPECT_EQ(pareto::select(f, two_layer_table(), b).bits(), (std::vector<int>{8, 8}));
  b.size_limit_mb = 1.5;
  EXPECT_EQ(pareto::select(f, two_layer_table(), b).bits(), (std::vector<int>{4, 4}));
  b.size_limit_mb = 0.5;
  EXPECT_THROW(pareto::select(f, two_layer_table(), b), planner::InfeasibleError);
}

TEST(Select, MatchesScanOracle) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    const auto inst = make_instance(rng, 5, {2, 4, 8});
    pareto::FrontierOptions opt;
    opt.objectives = {Resource::size, Resource::bops};
    const auto pts = pareto::frontier(inst, opt).points;
    cost::CostBudget b;
    b.size_limit_mb = cost::uniform_cost(inst.table, 8).size_mb * (0.3 + 0.7 * u(rng));
    const pareto::FrontierPoint* best = nullptr;
    for (const auto& p : pts) {
      if (p.cost.size_mb > *b.size_limit_mb) continue;
      auto key = [](const pareto::FrontierPoint& x) {
        return std::make_tuple(-x.plan.bit_sum(), x.perturbation);
      };
      if (!best || key(p) < key(*best) || (key(p) == key(*best) && p.plan.bits() > best->plan.bits())) best = &p;
    }
    if (!best) {
      EXPECT_THROW(pareto::select(pts, inst.table, b), planner::InfeasibleError);
      continue;
    }
    const BitPlan s = pareto::select(pts, inst.table, b);
    EXPECT_EQ(s.bits(), best->plan.bits());
    EXPECT_TRUE(cost::check_budget(s, inst.table, b).feasible);
  }
}

TEST(SpaceCount, BitSpace) {
  EXPECT_EQ(pareto::bit_space_size(3, 4), 81);
  EXPECT_EQ(pareto::bit_space_size(1, 37), 1);
  pareto::BigInt oracle = 1;
  for (int i = 0; i < 50; ++i) oracle *= 4;
  EXPECT_EQ(pareto::bit_space_size(4, 50), oracle);
  EXPECT_EQ(pareto::bit_space_size(4, 50).str(), "1267650600228229401496703205376");
}

namespace {

// Ordered set partitions of {0..n-1} are the surjections onto {0..k-1}.
long long count_ordered_partitions(int n) {
  long long total = 0;
  std::vector<int> f(static_cast<std::size_t>(n), 0);
  while (true) {
    std::vector<bool> hit(static_cast<std::size_t>(n), false);
    int top = 0;
    for (int v : f) hit[static_cast<std::size_t>(v)] = true, top = std::max(top, v);
    bool onto = true;
    for (int v = 0; v <= top; ++v) onto = onto && hit[static_cast<std::size_t>(v)];
    if (onto) ++total;
    int pos = 0;
    while (pos < n && ++f[static_cast<std::size_t>(pos)] == n) f[static_cast<std::size_t>(pos++)] = 0;
    if (pos == n) break;
  }
  return total;
}

}  // namespace

TEST(SpaceCount, ScheduleSpaceSmall) {
  EXPECT_EQ(pareto::schedule_space_size(1), 1);
  EXPECT_EQ(pareto::schedule_space_size(2), 3);
  EXPECT_EQ(pareto::schedule_space_size(3), 13);
  EXPECT_EQ(pareto::schedule_space_size(4), 75);
  for (int n = 1; n <= 8; ++n) EXPECT_EQ(pareto::schedule_space_size(n), count_ordered_partitions(n)) << n;
}

TEST(SpaceCount, ScheduleSpaceAtLeastFactorial) {
  for (int n : {10, 20, 54}) {
    pareto::BigInt fact = 1;
    for (int i = 2; i <= n; ++i) fact *= i;
    EXPECT_GE(pareto::schedule_space_size(n), fact);
  }
}

TEST(SpaceCount, JsonUsesDecimalStrings) {
  const Json j = pareto::space_count(4, 3).to_json();
  EXPECT_EQ(j["bit_space"], "64");
  EXPECT_EQ(j["schedule_space"], "13");
}
