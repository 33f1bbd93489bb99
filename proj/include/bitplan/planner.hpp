#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bitplan/common/error.hpp"
#include "bitplan/costmodel.hpp"
#include "bitplan/plan.hpp"
#include "bitplan/sensitivity.hpp"

namespace bitplan::planner {

// Minimise sum_i delta[i][b_i] subject to the budget's active limits.
struct IlpInstance {
  sensitivity::SensitivityProfile profile;
  cost::CostTable table;
  cost::CostBudget budget;

  // Profile and table must list the same layers and bit options in the same
  // order; present limits must be finite and positive.
  void validate() const;
};

// No plan meets the budget. `binding` lists the constraints that even the
// componentwise-cheapest plan violates (empty when only their combination
// is infeasible).
class InfeasibleError : public Error {
 public:
  InfeasibleError(std::vector<cost::Resource> binding, const std::string& message)
      : Error("E_INFEASIBLE", message), binding_(std::move(binding)) {}
  const std::vector<cost::Resource>& binding() const { return binding_; }

 private:
  std::vector<cost::Resource> binding_;
};

struct SolveStats {
  long long nodes = 0;
};

// Exact depth-first branch and bound. Among equal-objective optima the
// lexicographically highest bit vector (layer 0 first) wins.
BitPlan solve(const IlpInstance& instance, SolveStats* stats = nullptr);

// Exhaustive enumeration with the same tie-break. Throws InputError
// ("E_GUARD") when m^L exceeds 1e7.
BitPlan brute_force(const IlpInstance& instance);

struct SweepEntry {
  double fraction = 0.0;
  cost::CostBudget budget;
  std::optional<BitPlan> plan;
  std::string error;  // set when the solve failed
};

// One solve per fraction with every active resource of the base budget
// (size when none is active) limited to fraction * uniform max-bit cost.
// Fractions must be ascending and in (0, 1].
std::vector<SweepEntry> budget_sweep(const IlpInstance& base, std::span<const double> fractions,
                                     int threads = 1);

Json plan_to_json(const BitPlan& plan, const cost::CostTable& table, const cost::CostBudget& budget);
BitPlan plan_from_json(const Json& j);

}  // namespace bitplan::planner
