#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bitplan/common/json.hpp"
#include "bitplan/netlab/descriptor.hpp"
#include "bitplan/plan.hpp"

namespace bitplan::cost {

enum class Resource { size, bops, latency };

std::string to_string(Resource r);
Resource resource_from_string(const std::string& s);

// Measured relative latency per (layer, bits).
using LatencyTable = std::map<std::pair<std::string, int>, double>;

// CSV with header `layer,bits,latency`, one row per pair.
LatencyTable parse_latency_csv(const std::string& text);
LatencyTable load_latency_csv(const std::filesystem::path& path);
std::string format_latency_csv(const LatencyTable& table);

struct CostTable {
  std::vector<std::string> layer_names;
  std::vector<int> bit_options;
  std::vector<std::vector<double>> size_mb;                // [layer][option]
  std::vector<std::vector<double>> bops;                   // giga bit-operations
  std::optional<std::vector<std::vector<double>>> latency; // relative units
  int activation_bits = 8;
  // Non-quantizable parameters (batchnorm etc.) at 32-bit, reported only.
  double fixed_size_mb = 0.0;

  std::size_t num_layers() const { return layer_names.size(); }
  std::size_t num_options() const { return bit_options.size(); }
  // Entry for one resource; throws for latency when the table has none.
  const std::vector<std::vector<double>>& entries(Resource r) const;
  bool has(Resource r) const { return r != Resource::latency || latency.has_value(); }
  int option_index(int bits) const;

  Json to_json() const;
  static CostTable from_json(const Json& j);
};

struct CostBudget {
  std::optional<double> size_limit_mb;
  std::optional<double> bops_limit;
  std::optional<double> latency_limit;

  std::optional<double> limit(Resource r) const;
  void set(Resource r, std::optional<double> v);
  std::vector<Resource> active() const;
  // At least one limit present and all present limits > 0.
  void validate() const;

  Json to_json() const;
  static CostBudget from_json(const Json& j);
};

// size_mb = params * bits / 8e6, bops = macs * bits * activation_bits / 1e9.
// Throws InputError listing absent pairs when the latency table is partial.
CostTable build_cost_table(const netlab::ModelDescriptor& descriptor, std::vector<int> bit_options,
                           int activation_bits, const std::optional<LatencyTable>& latency = {});

struct PlanCost {
  double size_mb = 0.0;
  double bops = 0.0;
  std::optional<double> latency;

  double get(Resource r) const;
  Json to_json() const;
};

// Per-layer costs summed in layer order. Throws InputError when the plan's
// layers or bit choices do not match the table.
PlanCost plan_cost(const BitPlan& plan, const CostTable& table);
PlanCost uniform_cost(const CostTable& table, int bits);

struct ConstraintCheck {
  Resource resource;
  double limit = 0.0;
  double used = 0.0;
  double slack = 0.0;  // limit - used
  bool satisfied = false;
};

struct FeasibilityReport {
  std::vector<ConstraintCheck> constraints;
  bool feasible = true;
};

FeasibilityReport check_budget(const BitPlan& plan, const CostTable& table, const CostBudget& budget);

// Named budget levels as fractions of the uniform max-bit cost.
struct BudgetLevels {
  double high = 0.9;
  double medium = 0.7;
  double low = 0.55;

  double fraction(const std::string& level) const;
};

// Budget with each listed resource limited to fraction * uniform max-bit cost.
CostBudget fractional_budget(const CostTable& table, const std::vector<Resource>& resources,
                             double fraction);

}  // namespace bitplan::cost
