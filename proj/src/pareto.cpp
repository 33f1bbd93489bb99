#include "bitplan/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace bitplan::pareto {

namespace {

using Bits = std::vector<int>;

bool lex_higher(const Bits& a, const Bits& b) {
  return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

BitPlan plan_from_bits(const planner::IlpInstance& inst, const Bits& bits) {
  BitPlan p;
  double obj = 0.0;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    p.assignment.emplace_back(inst.profile.layer_names[i], bits[i]);
    obj += inst.profile.delta[i][static_cast<std::size_t>(inst.table.option_index(bits[i]))];
  }
  p.objective = obj;
  return p;
}

// Per-layer lexicographic minimum over (keys...) gives the plan minimising
// the same lexicographic order of the layer sums.
Bits lexicographic_anchor(const planner::IlpInstance& inst, const std::vector<cost::Resource>& keys,
                          bool delta_first) {
  Bits bits;
  const std::size_t m = inst.profile.bit_options.size();
  for (std::size_t i = 0; i < inst.profile.layer_names.size(); ++i) {
    auto key = [&](std::size_t j) {
      std::vector<double> v;
      if (delta_first) v.push_back(inst.profile.delta[i][j]);
      for (cost::Resource r : keys) v.push_back(inst.table.entries(r)[i][j]);
      if (!delta_first) v.push_back(inst.profile.delta[i][j]);
      return v;
    };
    std::size_t best = m - 1;
    for (std::size_t j = m - 1; j-- > 0;)
      if (key(j) < key(best)) best = j;
    bits.push_back(inst.profile.bit_options[best]);
  }
  return bits;
}

}  // namespace

bool dominates(const FrontierPoint& a, const FrontierPoint& b, std::span<const cost::Resource> objectives) {
  if (a.perturbation > b.perturbation) return false;
  bool strict = a.perturbation < b.perturbation;
  for (cost::Resource r : objectives) {
    const double x = a.cost.get(r), y = b.cost.get(r);
    if (x > y) return false;
    strict = strict || x < y;
  }
  return strict;
}

std::vector<FrontierPoint> non_dominated(std::vector<FrontierPoint> pool,
                                         std::span<const cost::Resource> objectives) {
  std::sort(pool.begin(), pool.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    if (a.perturbation != b.perturbation) return a.perturbation < b.perturbation;
    return lex_higher(a.plan.bits(), b.plan.bits());
  });
  auto same_values = [&](const FrontierPoint& a, const FrontierPoint& b) {
    if (a.perturbation != b.perturbation) return false;
    for (cost::Resource r : objectives)
      if (a.cost.get(r) != b.cost.get(r)) return false;
    return true;
  };
  // A point can only be dominated by one with perturbation <= its own, all
  // of which precede it in this order.
  std::vector<FrontierPoint> out;
  for (FrontierPoint& p : pool) {
    bool keep = true;
    for (const FrontierPoint& q : out)
      if (dominates(q, p, objectives) || same_values(q, p)) {
        keep = false;
        break;
      }
    if (!keep) continue;
    // Equal perturbation with smaller costs can appear later in the order.
    std::erase_if(out, [&](const FrontierPoint& q) { return dominates(p, q, objectives); });
    out.push_back(std::move(p));
  }
  return out;
}

FrontierPoint evaluate(const BitPlan& plan, const planner::IlpInstance& instance) {
  FrontierPoint pt;
  pt.plan = plan;
  pt.perturbation = plan.objective;
  pt.cost = cost::plan_cost(plan, instance.table);
  return pt;
}

FrontierResult frontier(const planner::IlpInstance& instance, const FrontierOptions& options) {
  if (options.objectives.empty()) throw InputError("E_CONFIG", "frontier needs at least one objective");
  if (options.local_moves < 0) throw InputError("E_CONFIG", "local_moves must be >= 0");
  instance.validate();
  for (cost::Resource r : options.objectives)
    if (!instance.table.has(r))
      throw InputError("E_NO_LATENCY", "objective " + cost::to_string(r) + " has no cost column");

  FrontierResult result;
  const std::size_t l = instance.profile.layer_names.size(), m = instance.profile.bit_options.size();
  if (std::pow(static_cast<double>(m), static_cast<double>(l)) <= options.exhaustive_limit) {
    std::vector<FrontierPoint> points;
    Bits bits(l, instance.profile.bit_options.front());
    std::vector<std::size_t> idx(l, 0);
    while (true) {
      for (std::size_t i = 0; i < l; ++i) bits[i] = instance.profile.bit_options[idx[i]];
      points.push_back(evaluate(plan_from_bits(instance, bits), instance));
      std::size_t pos = 0;
      while (pos < l && ++idx[pos] == m) idx[pos++] = 0;
      if (pos == l) break;
    }
    result.pool_size = points.size();
    result.points = non_dominated(std::move(points), options.objectives);
    return result;
  }

  std::set<Bits> seeds;

  planner::IlpInstance base = instance;
  base.budget = cost::CostBudget{};
  for (cost::Resource r : options.objectives) base.budget.set(r, std::numeric_limits<double>::max());
  const auto sweep = planner::budget_sweep(base, options.sweep_fractions, options.threads);
  for (const auto& e : sweep) {
    if (e.plan) seeds.insert(e.plan->bits());
    else result.diagnostics.push_back("fraction " + Json(e.fraction).dump() + ": " + e.error);
  }
  if (seeds.empty()) return result;

  seeds.insert(lexicographic_anchor(instance, options.objectives, true));
  for (cost::Resource r : options.objectives) {
    std::vector<cost::Resource> keys = {r};
    for (cost::Resource o : options.objectives)
      if (o != r) keys.push_back(o);
    seeds.insert(lexicographic_anchor(instance, keys, false));
  }

  if (options.objectives.size() == 1) {
    const cost::Resource r = options.objectives.front();
    planner::IlpInstance walk = instance;
    walk.budget = cost::CostBudget{};
    int solves = 0;
    double limit = std::numeric_limits<double>::max();
    while (solves < options.exact_walk_limit) {
      walk.budget.set(r, limit);
      ++solves;
      BitPlan p;
      try {
        p = planner::solve(walk);
      } catch (const planner::InfeasibleError&) {
        break;
      }
      seeds.insert(p.bits());
      const double used = cost::plan_cost(p, instance.table).get(r);
      limit = std::nextafter(used, -std::numeric_limits<double>::infinity());
      if (!(limit > 0.0)) break;
    }
    if (solves >= options.exact_walk_limit)
      result.diagnostics.push_back("exact frontier walk stopped after " + std::to_string(solves) + " solves");
  }

  std::set<Bits> pool = seeds;
  std::vector<Bits> layer(seeds.begin(), seeds.end());
  for (int depth = 0; depth < options.local_moves; ++depth) {
    std::vector<Bits> next;
    for (const Bits& b : layer)
      for (std::size_t i = 0; i < b.size(); ++i)
        for (int o : instance.profile.bit_options) {
          if (o == b[i]) continue;
          Bits c = b;
          c[i] = o;
          if (pool.insert(c).second) next.push_back(std::move(c));
        }
    layer = std::move(next);
  }

  std::vector<FrontierPoint> points;
  points.reserve(pool.size());
  for (const Bits& b : pool) points.push_back(evaluate(plan_from_bits(instance, b), instance));
  result.pool_size = points.size();
  result.points = non_dominated(std::move(points), options.objectives);
  return result;
}

BitPlan select(std::span<const FrontierPoint> frontier, const cost::CostTable& table,
               const cost::CostBudget& budget) {
  if (frontier.empty()) throw InputError("E_EMPTY_FRONTIER", "frontier is empty");
  const FrontierPoint* best = nullptr;
  for (const FrontierPoint& p : frontier) {
    if (!cost::check_budget(p.plan, table, budget).feasible) continue;
    if (!best) {
      best = &p;
      continue;
    }
    const int a = p.plan.bit_sum(), b = best->plan.bit_sum();
    if (a != b) {
      if (a > b) best = &p;
    } else if (p.perturbation != best->perturbation) {
      if (p.perturbation < best->perturbation) best = &p;
    } else if (lex_higher(p.plan.bits(), best->plan.bits())) {
      best = &p;
    }
  }
  if (!best) {
    std::vector<cost::Resource> binding;
    for (cost::Resource r : budget.active()) {
      double cheapest = std::numeric_limits<double>::infinity();
      for (const FrontierPoint& p : frontier) cheapest = std::min(cheapest, p.cost.get(r));
      if (cheapest > *budget.limit(r)) binding.push_back(r);
    }
    throw planner::InfeasibleError(binding, "no frontier point satisfies the budget");
  }
  return best->plan;
}

BigInt bit_space_size(int m, int layers) {
  if (m < 1 || layers < 1) throw InputError("E_CONFIG", "bit_space_size needs m >= 1 and L >= 1");
  return boost::multiprecision::pow(BigInt(m), static_cast<unsigned>(layers));
}

BigInt schedule_space_size(int layers) {
  if (layers < 1) throw InputError("E_CONFIG", "schedule_space_size needs L >= 1");
  const std::size_t n = static_cast<std::size_t>(layers);
  // s[k] = S(row, k), updated in place from high k down.
  std::vector<BigInt> s(n + 1, 0);
  s[0] = 1;
  for (std::size_t row = 1; row <= n; ++row) {
    for (std::size_t k = row; k >= 1; --k) s[k] = BigInt(k) * s[k] + s[k - 1];
    s[0] = 0;
  }
  BigInt total = 0, fact = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    fact *= i;
    total += fact * s[i];
  }
  return total;
}

SpaceCount space_count(int m, int layers) { return {bit_space_size(m, layers), schedule_space_size(layers)}; }

Json SpaceCount::to_json() const {
  const std::string z = bit_space.str(), c = schedule_space.str();
  return {{"bit_space", z},
          {"bit_space_digits", z.size()},
          {"schedule_space", c},
          {"schedule_space_digits", c.size()}};
}

std::string frontier_csv(std::span<const FrontierPoint> points) {
  std::string out = "perturbation,size_mb,bops,latency,bits_csv\n";
  for (const FrontierPoint& p : points) {
    out += Json(p.perturbation).dump() + "," + Json(p.cost.size_mb).dump() + "," + Json(p.cost.bops).dump() + ",";
    if (p.cost.latency) out += Json(*p.cost.latency).dump();
    out += ",\"";
    const Bits b = p.plan.bits();
    for (std::size_t i = 0; i < b.size(); ++i) out += (i ? "," : "") + std::to_string(b[i]);
    out += "\"\n";
  }
  return out;
}

Json frontier_json(std::span<const FrontierPoint> points) {
  Json arr = Json::array();
  for (const FrontierPoint& p : points)
    arr.push_back({{"perturbation", p.perturbation}, {"bits", p.plan.bits()}, {"cost", p.cost.to_json()}});
  return arr;
}

}  // namespace bitplan::pareto
