#pragma once

#include <span>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "bitplan/costmodel.hpp"
#include "bitplan/planner.hpp"

namespace bitplan::pareto {

using BigInt = boost::multiprecision::cpp_int;

struct FrontierPoint {
  BitPlan plan;
  double perturbation = 0.0;
  cost::PlanCost cost;
};

struct FrontierOptions {
  std::vector<cost::Resource> objectives = {cost::Resource::size};
  std::vector<double> sweep_fractions = {0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  int local_moves = 2;
  // With a single objective, walk the exact bi-objective frontier by
  // repeated solves with a strictly tighter limit, up to this many solves.
  int exact_walk_limit = 10000;
  // Bit spaces with at most this many plans are enumerated outright.
  double exhaustive_limit = 1e5;
  int threads = 1;
};

struct FrontierResult {
  std::vector<FrontierPoint> points;  // sorted by perturbation ascending
  std::vector<std::string> diagnostics;
  std::size_t pool_size = 0;
};

// a dominates b: <= in perturbation and every objective, < in at least one.
bool dominates(const FrontierPoint& a, const FrontierPoint& b, std::span<const cost::Resource> objectives);

// Non-dominated subset. Points equal in every tracked value keep only the
// lexicographically highest bit vector. Sorted by perturbation, then bits
// descending.
std::vector<FrontierPoint> non_dominated(std::vector<FrontierPoint> pool,
                                         std::span<const cost::Resource> objectives);

FrontierPoint evaluate(const BitPlan& plan, const planner::IlpInstance& instance);

// Small spaces (see exhaustive_limit) pool every plan. Otherwise
// pool = ILP sweep solutions, per-objective anchor plans, the exact walk for
// one objective, and everything within local_moves single-layer bit changes
// of those seeds. Returns its non-dominated subset.
FrontierResult frontier(const planner::IlpInstance& instance, const FrontierOptions& options);

// Budget-feasible point with the largest bit sum; ties by lower perturbation,
// then higher bits lexicographically. Throws InfeasibleError when no point fits.
BitPlan select(std::span<const FrontierPoint> frontier, const cost::CostTable& table,
               const cost::CostBudget& budget);

// m^L.
BigInt bit_space_size(int m, int layers);
// Ordered Bell number sum_i i! S(L, i).
BigInt schedule_space_size(int layers);

struct SpaceCount {
  BigInt bit_space;
  BigInt schedule_space;

  Json to_json() const;
};

SpaceCount space_count(int m, int layers);

// `perturbation,size_mb,bops,latency,bits_csv`; bits are quoted and comma separated.
std::string frontier_csv(std::span<const FrontierPoint> points);
Json frontier_json(std::span<const FrontierPoint> points);

}  // namespace bitplan::pareto
