#include "bitplan/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bitplan/common/parallel.hpp"

namespace bitplan::planner {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Dense view of an instance restricted to its active constraints.
struct Problem {
  std::size_t layers = 0, options = 0;
  std::vector<int> bits;                 // per option, as in the profile
  std::vector<double> delta;             // [layer * options + option]
  std::vector<std::vector<double>> cost; // [constraint][layer * options + option]
  std::vector<double> limit;
  std::vector<cost::Resource> resources;

  double d(std::size_t i, std::size_t j) const { return delta[i * options + j]; }
  double c(std::size_t k, std::size_t i, std::size_t j) const { return cost[k][i * options + j]; }
};

Problem make_problem(const IlpInstance& inst) {
  inst.validate();
  Problem p;
  p.layers = inst.profile.layer_names.size();
  p.options = inst.profile.bit_options.size();
  p.bits = inst.profile.bit_options;
  for (const auto& row : inst.profile.delta) p.delta.insert(p.delta.end(), row.begin(), row.end());
  for (cost::Resource r : inst.budget.active()) {
    std::vector<double> flat;
    for (const auto& row : inst.table.entries(r)) flat.insert(flat.end(), row.begin(), row.end());
    p.cost.push_back(std::move(flat));
    p.limit.push_back(*inst.budget.limit(r));
    p.resources.push_back(r);
  }
  return p;
}

BitPlan to_plan(const IlpInstance& inst, const Problem& p, const std::vector<std::size_t>& choice) {
  BitPlan plan;
  double obj = 0.0;
  for (std::size_t i = 0; i < p.layers; ++i) {
    plan.assignment.emplace_back(inst.profile.layer_names[i], p.bits[choice[i]]);
    obj += p.d(i, choice[i]);
  }
  plan.objective = obj;
  return plan;
}

// True when a is lexicographically higher than b in bits.
bool higher_bits(const Problem& p, const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (p.bits[a[i]] != p.bits[b[i]]) return p.bits[a[i]] > p.bits[b[i]];
  }
  return false;
}

[[noreturn]] void throw_infeasible(const Problem& p) {
  std::vector<cost::Resource> binding;
  std::string detail;
  for (std::size_t k = 0; k < p.cost.size(); ++k) {
    double cheapest = 0.0;
    for (std::size_t i = 0; i < p.layers; ++i) {
      double m = kInf;
      for (std::size_t j = 0; j < p.options; ++j) m = std::min(m, p.c(k, i, j));
      cheapest += m;
    }
    if (cheapest > p.limit[k]) {
      binding.push_back(p.resources[k]);
      if (!detail.empty()) detail += "; ";
      detail += cost::to_string(p.resources[k]) + " needs at least " + std::to_string(cheapest) +
                " but the limit is " + std::to_string(p.limit[k]);
    }
  }
  if (detail.empty()) detail = "each limit is reachable alone but not all of them together";
  throw InfeasibleError(binding, "no bit plan satisfies the budget: " + detail);
}

class BranchAndBound {
 public:
  // Branching follows `perm`; leaves are evaluated in the original layer
  // order so sums match plan_cost bit for bit.
  BranchAndBound(const Problem& original, const std::vector<std::size_t>& perm)
      : orig_(original), perm_(perm), p_(permute(original, perm)), k_(original.cost.size()) {
    prepare_candidates();
    prepare_bounds();
    prepare_order();
  }

  bool run(std::vector<std::size_t>& best, long long& nodes) {
    choice_.assign(p_.layers, 0);
    leaf_.assign(p_.layers, 0);
    cost_stack_.assign(p_.layers + 1, std::vector<double>(k_, 0.0));
    seed_incumbent();
    dfs(0, 0.0);
    nodes = nodes_;
    if (!found_) return false;
    best = best_;
    return true;
  }

 private:
  static Problem permute(const Problem& p, const std::vector<std::size_t>& perm) {
    Problem q = p;
    for (std::size_t i = 0; i < p.layers; ++i)
      for (std::size_t j = 0; j < p.options; ++j) {
        q.delta[i * p.options + j] = p.d(perm[i], j);
        for (std::size_t k = 0; k < p.cost.size(); ++k) q.cost[k][i * p.options + j] = p.c(k, perm[i], j);
      }
    return q;
  }

  // Exact check of a permuted-order choice; updates the incumbent.
  void offer(const std::vector<std::size_t>& choice) {
    for (std::size_t i = 0; i < p_.layers; ++i) leaf_[perm_[i]] = choice[i];
    for (std::size_t k = 0; k < k_; ++k) {
      double used = 0.0;
      for (std::size_t i = 0; i < orig_.layers; ++i) used += orig_.c(k, i, leaf_[i]);
      if (used > orig_.limit[k]) return;
    }
    double obj = 0.0;
    for (std::size_t i = 0; i < orig_.layers; ++i) obj += orig_.d(i, leaf_[i]);
    if (!found_ || obj < best_value_ || (obj == best_value_ && higher_bits(orig_, leaf_, best_))) {
      found_ = true;
      best_value_ = obj;
      best_ = leaf_;
    }
  }

  void prepare_candidates() {
    // Per-layer minimum cost of each constraint, used to drop options that
    // cannot appear in any feasible plan.
    std::vector<double> total_min(k_, 0.0);
    min_cost_.assign(k_, std::vector<double>(p_.layers, kInf));
    for (std::size_t k = 0; k < k_; ++k)
      for (std::size_t i = 0; i < p_.layers; ++i) {
        for (std::size_t j = 0; j < p_.options; ++j) min_cost_[k][i] = std::min(min_cost_[k][i], p_.c(k, i, j));
        total_min[k] += min_cost_[k][i];
      }

    candidates_.assign(p_.layers, {});
    std::vector<std::size_t> order(p_.options);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p_.bits[a] > p_.bits[b]; });
    for (std::size_t i = 0; i < p_.layers; ++i) {
      for (std::size_t j : order) {
        bool keep = true;
        for (std::size_t k = 0; k < k_ && keep; ++k) {
          const double rest = total_min[k] - min_cost_[k][i];
          if (p_.c(k, i, j) + rest > p_.limit[k] + tolerance(p_.limit[k])) keep = false;
        }
        for (std::size_t j2 = 0; j2 < p_.options && keep; ++j2)
          if (j2 != j && dominates(i, j2, j)) keep = false;
        if (keep) candidates_[i].push_back(j);
      }
    }
  }

  // Children in ascending Lagrangian cost so good plans are reached early.
  void prepare_order() {
    order_ = candidates_;
    for (std::size_t i = 0; i < p_.layers; ++i)
      std::stable_sort(order_[i].begin(), order_[i].end(),
                       [&](std::size_t a, std::size_t b) { return lagrange_value(i, a) < lagrange_value(i, b); });
  }

  double lagrange_value(std::size_t i, std::size_t j) const {
    double v = p_.d(i, j);
    for (std::size_t k = 0; k < k_; ++k) v += lambda_[k] * p_.c(k, i, j);
    return v;
  }

  bool plan_feasible(const std::vector<std::size_t>& plan) const {
    for (std::size_t k = 0; k < k_; ++k) {
      double used = 0.0;
      for (std::size_t i = 0; i < p_.layers; ++i) used += p_.c(k, i, plan[i]);
      if (used > p_.limit[k]) return false;
    }
    return true;
  }

  double violation(const std::vector<std::size_t>& plan) const {
    double v = 0.0;
    for (std::size_t k = 0; k < k_; ++k) {
      double used = 0.0;
      for (std::size_t i = 0; i < p_.layers; ++i) used += p_.c(k, i, plan[i]);
      if (used > p_.limit[k]) v += (used - p_.limit[k]) / p_.limit[k];
    }
    return v;
  }

  // Greedy repair from the Lagrangian plan, then single-layer improvements.
  void seed_incumbent() {
    for (const auto& c : candidates_)
      if (c.empty()) return;
    std::vector<std::size_t> plan(p_.layers);
    for (std::size_t i = 0; i < p_.layers; ++i) plan[i] = order_[i].front();
    double viol = violation(plan);
    while (viol > 0.0) {
      double best_ratio = kInf, best_viol = viol;
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < p_.layers; ++i) {
        const std::size_t cur = plan[i];
        for (std::size_t j : candidates_[i]) {
          if (j == cur) continue;
          plan[i] = j;
          const double v = violation(plan);
          plan[i] = cur;
          if (v >= viol) continue;
          const double ratio = (p_.d(i, j) - p_.d(i, cur)) / (viol - v);
          if (ratio < best_ratio) best_ratio = ratio, best_viol = v, bi = i, bj = j;
        }
      }
      if (!std::isfinite(best_ratio)) return;
      plan[bi] = bj;
      viol = best_viol;
    }
    if (!plan_feasible(plan)) return;
    for (bool improved = true; improved;) {
      improved = false;
      double best_gain = 0.0;
      std::size_t bi = 0, bj = 0;
      for (std::size_t i = 0; i < p_.layers; ++i) {
        const std::size_t cur = plan[i];
        for (std::size_t j : candidates_[i]) {
          const double gain = p_.d(i, cur) - p_.d(i, j);
          if (gain <= best_gain) continue;
          plan[i] = j;
          if (plan_feasible(plan)) best_gain = gain, bi = i, bj = j;
          plan[i] = cur;
        }
      }
      if (best_gain > 0.0) plan[bi] = bj, improved = true;
    }
    offer(plan);
  }

  // Option a makes option b redundant in layer i.
  bool dominates(std::size_t i, std::size_t a, std::size_t b) const {
    if (p_.d(i, a) > p_.d(i, b)) return false;
    for (std::size_t k = 0; k < k_; ++k)
      if (p_.c(k, i, a) > p_.c(k, i, b)) return false;
    return p_.d(i, a) < p_.d(i, b) || p_.bits[a] > p_.bits[b];
  }

  static double tolerance(double magnitude) { return 1e-9 * std::max(std::abs(magnitude), 1e-300); }

  void prepare_bounds() {
    const std::size_t l = p_.layers;
    suffix_min_delta_.assign(l + 1, 0.0);
    suffix_min_cost_.assign(k_, std::vector<double>(l + 1, 0.0));
    for (std::size_t i = l; i-- > 0;) {
      double md = kInf;
      for (std::size_t j : candidates_[i]) md = std::min(md, p_.d(i, j));
      suffix_min_delta_[i] = suffix_min_delta_[i + 1] + (candidates_[i].empty() ? kInf : md);
      for (std::size_t k = 0; k < k_; ++k) {
        double mc = kInf;
        for (std::size_t j : candidates_[i]) mc = std::min(mc, p_.c(k, i, j));
        suffix_min_cost_[k][i] = suffix_min_cost_[k][i + 1] + mc;
      }
    }
    lambda_.assign(k_, 0.0);
    if (k_ == 0 || l == 0 || !std::isfinite(suffix_min_delta_[0])) return;
    optimise_multipliers();
    for (std::size_t k = 0; k < k_; ++k) {
      std::vector<double> mu(k_, 0.0);
      mu[k] = 1.0 / p_.limit[k];
      surrogates_.push_back(make_surrogate(mu));
    }
    if (k_ > 1 && std::any_of(lambda_.begin(), lambda_.end(), [](double x) { return x > 0.0; }))
      surrogates_.push_back(make_surrogate(lambda_));
  }

  // Single-constraint relaxation sum_k mu_k c_k <= sum_k mu_k limit_k. Its LP
  // optimum over layers d.. is the min-delta plan walked down the per-layer
  // lower convex hulls in ascending slope order.
  struct Surrogate {
    std::vector<double> mu;
    std::vector<double> base_delta, base_weight;
    std::vector<std::vector<double>> slope, cum_weight, cum_delta;
  };

  Surrogate make_surrogate(const std::vector<double>& mu) const {
    const std::size_t l = p_.layers;
    Surrogate s;
    s.mu = mu;
    struct Step {
      double slope, dw, dd;
    };
    std::vector<std::vector<Step>> steps(l);
    std::vector<double> head_delta(l), head_weight(l);
    for (std::size_t i = 0; i < l; ++i) {
      std::vector<std::pair<double, double>> pts;  // (weight, delta)
      for (std::size_t j : candidates_[i]) {
        double w = 0.0;
        for (std::size_t k = 0; k < k_; ++k) w += mu[k] * p_.c(k, i, j);
        pts.emplace_back(w, p_.d(i, j));
      }
      auto cur = *std::min_element(pts.begin(), pts.end(), [](const auto& a, const auto& b) {
        return a.second < b.second || (a.second == b.second && a.first < b.first);
      });
      head_weight[i] = cur.first;
      head_delta[i] = cur.second;
      while (true) {
        double best = kInf;
        std::pair<double, double> next{};
        for (const auto& q : pts) {
          if (q.first >= cur.first) continue;
          const double sl = (q.second - cur.second) / (cur.first - q.first);
          if (sl < best || (sl == best && q.first < next.first)) best = sl, next = q;
        }
        if (!std::isfinite(best)) break;
        steps[i].push_back({best, cur.first - next.first, next.second - cur.second});
        cur = next;
      }
    }
    s.base_delta.assign(l + 1, 0.0);
    s.base_weight.assign(l + 1, 0.0);
    s.slope.assign(l + 1, {});
    s.cum_weight.assign(l + 1, {});
    s.cum_delta.assign(l + 1, {});
    for (std::size_t d = l; d-- > 0;) {
      s.base_delta[d] = s.base_delta[d + 1] + head_delta[d];
      s.base_weight[d] = s.base_weight[d + 1] + head_weight[d];
      std::vector<Step> all;
      for (std::size_t t = d; t < l; ++t) all.insert(all.end(), steps[t].begin(), steps[t].end());
      std::sort(all.begin(), all.end(), [](const Step& a, const Step& b) { return a.slope < b.slope; });
      double cw = 0.0, cd = 0.0;
      for (const Step& st : all) {
        cw += st.dw;
        cd += st.dd;
        s.slope[d].push_back(st.slope);
        s.cum_weight[d].push_back(cw);
        s.cum_delta[d].push_back(cd);
      }
    }
    return s;
  }

  // LP bound on the delta of layers d.. given the remaining capacity; +inf
  // when even the lightest hull points do not fit.
  static double surrogate_bound(const Surrogate& s, std::size_t d, double capacity) {
    const double need = s.base_weight[d] - capacity;
    if (need <= 0.0) return s.base_delta[d];
    const auto& cw = s.cum_weight[d];
    const auto it = std::lower_bound(cw.begin(), cw.end(), need);
    if (it == cw.end()) {
      if (!cw.empty() && need <= cw.back() * (1.0 + 1e-9)) return s.base_delta[d] + s.cum_delta[d].back();
      return kInf;
    }
    const std::size_t idx = static_cast<std::size_t>(it - cw.begin());
    const double prev_w = idx == 0 ? 0.0 : cw[idx - 1];
    const double prev_d = idx == 0 ? 0.0 : s.cum_delta[d][idx - 1];
    return s.base_delta[d] + prev_d + (need - prev_w) * s.slope[d][idx];
  }

  // Projected subgradient ascent on the Lagrangian dual at the root.
  void optimise_multipliers() {
    double delta_scale = 0.0;
    for (std::size_t i = 0; i < p_.layers; ++i)
      for (std::size_t j : candidates_[i]) delta_scale = std::max(delta_scale, std::abs(p_.d(i, j)));
    std::vector<double> cost_scale(k_, 0.0);
    for (std::size_t k = 0; k < k_; ++k)
      for (std::size_t i = 0; i < p_.layers; ++i)
        for (std::size_t j : candidates_[i]) cost_scale[k] = std::max(cost_scale[k], std::abs(p_.c(k, i, j)));
    if (delta_scale == 0.0) return;

    std::vector<double> lam(k_, 0.0), best_lam(k_, 0.0), used(k_);
    double best_value = -kInf;
    for (int it = 0; it < 300; ++it) {
      double value = 0.0;
      std::fill(used.begin(), used.end(), 0.0);
      for (std::size_t i = 0; i < p_.layers; ++i) {
        double bv = kInf;
        std::size_t bj = candidates_[i].front();
        for (std::size_t j : candidates_[i]) {
          double v = p_.d(i, j);
          for (std::size_t k = 0; k < k_; ++k) v += lam[k] * p_.c(k, i, j);
          if (v < bv) bv = v, bj = j;
        }
        value += bv;
        for (std::size_t k = 0; k < k_; ++k) used[k] += p_.c(k, i, bj);
      }
      for (std::size_t k = 0; k < k_; ++k) value -= lam[k] * p_.limit[k];
      if (value > best_value) best_value = value, best_lam = lam;
      const double step = 2.0 / (1.0 + it);
      for (std::size_t k = 0; k < k_; ++k) {
        if (cost_scale[k] == 0.0) continue;
        const double g = (used[k] - p_.limit[k]) / (cost_scale[k] * static_cast<double>(p_.layers));
        lam[k] = std::max(0.0, lam[k] + step * g * delta_scale / cost_scale[k]);
      }
    }
    lambda_ = best_lam;
  }

  void dfs(std::size_t i, double partial_delta) {
    ++nodes_;
    const std::vector<double>& cost_here = cost_stack_[i];
    if (i == p_.layers) {
      offer(choice_);
      return;
    }
    std::vector<double>& next = cost_stack_[i + 1];
    for (std::size_t j : order_[i]) {
      const double nd = partial_delta + p_.d(i, j);
      if (found_ && nd + suffix_min_delta_[i + 1] > best_value_ + tolerance(best_value_)) continue;
      bool feasible = true;
      for (std::size_t k = 0; k < k_ && feasible; ++k) {
        next[k] = cost_here[k] + p_.c(k, i, j);
        const double need = next[k] + suffix_min_cost_[k][i + 1];
        if (need > p_.limit[k] + tolerance(p_.limit[k]) + tolerance(need)) feasible = false;
      }
      if (!feasible) continue;
      if (found_) {
        for (const Surrogate& s : surrogates_) {
          double capacity = 0.0;
          for (std::size_t k = 0; k < k_; ++k) capacity += s.mu[k] * (p_.limit[k] - next[k]);
          const double lb = nd + surrogate_bound(s, i + 1, capacity);
          if (lb > best_value_ + 1e-9 * (std::abs(lb) + std::abs(best_value_))) {
            feasible = false;
            break;
          }
        }
      }
      if (!feasible) continue;
      choice_[i] = j;
      dfs(i + 1, nd);
    }
  }

  const Problem& orig_;
  std::vector<std::size_t> perm_;
  Problem p_;
  std::size_t k_;
  std::vector<std::vector<std::size_t>> candidates_, order_;
  std::vector<std::vector<double>> min_cost_;
  std::vector<double> suffix_min_delta_;
  std::vector<std::vector<double>> suffix_min_cost_;
  std::vector<double> lambda_;
  std::vector<Surrogate> surrogates_;

  std::vector<std::size_t> choice_, best_, leaf_;
  std::vector<std::vector<double>> cost_stack_;
  double best_value_ = kInf;
  bool found_ = false;
  long long nodes_ = 0;
};

}  // namespace

void IlpInstance::validate() const {
  profile.validate();
  if (profile.layer_names != table.layer_names)
    throw InputError("E_PLAN_MISMATCH", "profile and cost table list different layers");
  if (profile.bit_options != table.bit_options)
    throw InputError("E_PLAN_MISMATCH", "profile and cost table list different bit options");
  for (cost::Resource r : budget.active()) {
    const double v = *budget.limit(r);
    if (!std::isfinite(v) || v <= 0.0)
      throw InputError("E_BUDGET", cost::to_string(r) + " limit must be finite and > 0");
    if (!table.has(r))
      throw InputError("E_BUDGET", "budget limits " + cost::to_string(r) + " but the cost table has no such column");
    const auto& rows = table.entries(r);
    if (rows.size() != table.num_layers())
      throw InputError("E_PLAN_MISMATCH", "cost table column " + cost::to_string(r) + " has the wrong row count");
    for (const auto& row : rows)
      if (row.size() != table.num_options())
        throw InputError("E_PLAN_MISMATCH", "cost table row length differs from the bit option count");
  }
}

BitPlan solve(const IlpInstance& instance, SolveStats* stats) {
  const Problem p = make_problem(instance);
  // Layers with the widest perturbation spread are decided first.
  std::vector<std::size_t> perm(p.layers);
  std::iota(perm.begin(), perm.end(), 0);
  std::vector<double> spread(p.layers, 0.0);
  for (std::size_t i = 0; i < p.layers; ++i) {
    const auto row = std::span<const double>(p.delta).subspan(i * p.options, p.options);
    spread[i] = *std::max_element(row.begin(), row.end()) - *std::min_element(row.begin(), row.end());
  }
  std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return spread[a] > spread[b]; });
  BranchAndBound bb(p, perm);
  std::vector<std::size_t> best;
  long long nodes = 0;
  const bool ok = bb.run(best, nodes);
  if (stats) stats->nodes = nodes;
  if (!ok) throw_infeasible(p);
  return to_plan(instance, p, best);
}

BitPlan brute_force(const IlpInstance& instance) {
  const Problem p = make_problem(instance);
  double count = std::pow(static_cast<double>(p.options), static_cast<double>(p.layers));
  if (count > 1e7)
    throw InputError("E_GUARD", "brute force refuses " + std::to_string(static_cast<long double>(count)) +
                                    " plans (limit 1e7)");
  std::vector<std::size_t> order(p.options);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p.bits[a] > p.bits[b]; });

  std::vector<std::size_t> digit(p.layers, 0), choice(p.layers), best;
  double best_value = kInf;
  bool found = false;
  while (true) {
    for (std::size_t i = 0; i < p.layers; ++i) choice[i] = order[digit[i]];
    bool feasible = true;
    for (std::size_t k = 0; k < p.cost.size() && feasible; ++k) {
      double used = 0.0;
      for (std::size_t i = 0; i < p.layers; ++i) used += p.c(k, i, choice[i]);
      feasible = used <= p.limit[k];
    }
    if (feasible) {
      double obj = 0.0;
      for (std::size_t i = 0; i < p.layers; ++i) obj += p.d(i, choice[i]);
      if (!found || obj < best_value || (obj == best_value && higher_bits(p, choice, best))) {
        found = true;
        best_value = obj;
        best = choice;
      }
    }
    bool carry = true;
    for (std::size_t pos = p.layers; carry && pos-- > 0;) {
      if (++digit[pos] < p.options) carry = false;
      else digit[pos] = 0;
    }
    if (carry) break;
  }
  if (!found) throw_infeasible(p);
  return to_plan(instance, p, best);
}

std::vector<SweepEntry> budget_sweep(const IlpInstance& base, std::span<const double> fractions, int threads) {
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    if (!(fractions[i] > 0.0 && fractions[i] <= 1.0))
      throw InputError("E_CONFIG", "sweep fractions must lie in (0, 1]");
    if (i > 0 && fractions[i] < fractions[i - 1])
      throw InputError("E_CONFIG", "sweep fractions must be ascending");
  }
  std::vector<cost::Resource> resources = base.budget.active();
  if (resources.empty()) resources = {cost::Resource::size};

  std::vector<SweepEntry> out(fractions.size());
  parallel_for(out.size(), threads, [&](std::size_t n) {
    SweepEntry& e = out[n];
    e.fraction = fractions[n];
    IlpInstance inst = base;
    inst.budget = cost::fractional_budget(base.table, resources, fractions[n]);
    e.budget = inst.budget;
    try {
      e.plan = solve(inst);
    } catch (const Error& err) {
      e.error = err.what();
    }
  });
  return out;
}

Json plan_to_json(const BitPlan& plan, const cost::CostTable& table, const cost::CostBudget& budget) {
  Json j;
  Json assignment = Json::array();
  for (const auto& [layer, bits] : plan.assignment) assignment.push_back({{"layer", layer}, {"bits", bits}});
  j["assignment"] = std::move(assignment);
  j["objective"] = plan.objective;
  j["cost"] = cost::plan_cost(plan, table).to_json();
  j["budget"] = budget.to_json();
  return j;
}

BitPlan plan_from_json(const Json& j) {
  BitPlan plan;
  try {
    for (const auto& a : j.at("assignment"))
      plan.assignment.emplace_back(a.at("layer").get<std::string>(), a.at("bits").get<int>());
    plan.objective = j.at("objective").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw InputError("E_PLAN", std::string("malformed plan: ") + e.what());
  }
  if (plan.assignment.empty()) throw InputError("E_PLAN", "plan has no layers");
  return plan;
}

}  // namespace bitplan::planner
