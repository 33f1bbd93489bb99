#include "bitplan/costmodel.hpp"

#include <algorithm>
#include <sstream>

#include "bitplan/common/error.hpp"

namespace bitplan::cost {

std::string to_string(Resource r) {
  switch (r) {
    case Resource::size: return "size";
    case Resource::bops: return "bops";
    case Resource::latency: return "latency";
  }
  return "?";
}

Resource resource_from_string(const std::string& s) {
  if (s == "size") return Resource::size;
  if (s == "bops") return Resource::bops;
  if (s == "latency") return Resource::latency;
  throw InputError("E_CONFIG", "unknown resource '" + s + "' (expected size, bops or latency)");
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(trim(cell));
  return out;
}

}  // namespace

LatencyTable parse_latency_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != std::vector<std::string>{"layer", "bits", "latency"})
    throw InputError("E_LATENCY", "latency CSV must start with header 'layer,bits,latency'");
  LatencyTable t;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != 3)
      throw InputError("E_LATENCY", "latency CSV line " + std::to_string(lineno) + ": expected 3 fields");
    try {
      std::size_t used = 0;
      const int bits = std::stoi(cells[1], &used);
      if (used != cells[1].size()) throw std::invalid_argument("bits");
      const double lat = std::stod(cells[2], &used);
      if (used != cells[2].size() || !(lat >= 0.0)) throw std::invalid_argument("latency");
      if (!t.emplace(std::make_pair(cells[0], bits), lat).second)
        throw InputError("E_LATENCY", "latency CSV line " + std::to_string(lineno) + ": duplicate pair");
    } catch (const std::logic_error&) {
      throw InputError("E_LATENCY", "latency CSV line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return t;
}

LatencyTable load_latency_csv(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw InputError("E_LATENCY_NOT_FOUND", "latency table not found: " + path.string());
  return parse_latency_csv(read_text_file(path));
}

std::string format_latency_csv(const LatencyTable& table) {
  std::string out = "layer,bits,latency\n";
  for (const auto& [key, v] : table)
    out += key.first + "," + std::to_string(key.second) + "," + Json(v).dump() + "\n";
  return out;
}

const std::vector<std::vector<double>>& CostTable::entries(Resource r) const {
  switch (r) {
    case Resource::size: return size_mb;
    case Resource::bops: return bops;
    case Resource::latency:
      if (!latency) throw InputError("E_NO_LATENCY", "latency constraint needs a measured latency table");
      return *latency;
  }
  return size_mb;
}

int CostTable::option_index(int bits) const {
  const auto it = std::find(bit_options.begin(), bit_options.end(), bits);
  return it == bit_options.end() ? -1 : static_cast<int>(it - bit_options.begin());
}

Json CostTable::to_json() const {
  Json j;
  j["layer_names"] = layer_names;
  j["bit_options"] = bit_options;
  j["size_mb"] = size_mb;
  j["bops"] = bops;
  j["latency"] = latency ? Json(*latency) : Json(nullptr);
  j["activation_bits"] = activation_bits;
  j["fixed_size_mb"] = fixed_size_mb;
  return j;
}

CostTable CostTable::from_json(const Json& j) {
  CostTable t;
  try {
    t.layer_names = j.at("layer_names").get<std::vector<std::string>>();
    t.bit_options = j.at("bit_options").get<std::vector<int>>();
    t.size_mb = j.at("size_mb").get<std::vector<std::vector<double>>>();
    t.bops = j.at("bops").get<std::vector<std::vector<double>>>();
    if (!j.at("latency").is_null()) t.latency = j.at("latency").get<std::vector<std::vector<double>>>();
    t.activation_bits = j.at("activation_bits").get<int>();
    t.fixed_size_mb = j.value("fixed_size_mb", 0.0);
  } catch (const nlohmann::json::exception& e) {
    throw InputError("E_COST_TABLE", std::string("malformed cost table: ") + e.what());
  }
  return t;
}

std::optional<double> CostBudget::limit(Resource r) const {
  switch (r) {
    case Resource::size: return size_limit_mb;
    case Resource::bops: return bops_limit;
    case Resource::latency: return latency_limit;
  }
  return std::nullopt;
}

void CostBudget::set(Resource r, std::optional<double> v) {
  switch (r) {
    case Resource::size: size_limit_mb = v; break;
    case Resource::bops: bops_limit = v; break;
    case Resource::latency: latency_limit = v; break;
  }
}

std::vector<Resource> CostBudget::active() const {
  std::vector<Resource> out;
  for (Resource r : {Resource::size, Resource::bops, Resource::latency})
    if (limit(r)) out.push_back(r);
  return out;
}

void CostBudget::validate() const {
  if (active().empty()) throw InputError("E_BUDGET", "budget needs at least one limit");
  for (Resource r : active())
    if (!(*limit(r) > 0.0)) throw InputError("E_BUDGET", to_string(r) + " limit must be > 0");
}

Json CostBudget::to_json() const {
  Json j;
  j["size_mb"] = size_limit_mb ? Json(*size_limit_mb) : Json(nullptr);
  j["bops"] = bops_limit ? Json(*bops_limit) : Json(nullptr);
  j["latency"] = latency_limit ? Json(*latency_limit) : Json(nullptr);
  return j;
}

CostBudget CostBudget::from_json(const Json& j) {
  CostBudget b;
  const auto get = [&](const char* k) -> std::optional<double> {
    if (!j.contains(k) || j.at(k).is_null()) return std::nullopt;
    return j.at(k).get<double>();
  };
  b.size_limit_mb = get("size_mb");
  b.bops_limit = get("bops");
  b.latency_limit = get("latency");
  return b;
}

CostTable build_cost_table(const netlab::ModelDescriptor& descriptor, std::vector<int> bit_options,
                           int activation_bits, const std::optional<LatencyTable>& latency) {
  descriptor.validate();
  if (bit_options.empty()) throw InputError("E_CONFIG", "bit option set is empty");
  if (activation_bits < 1) throw InputError("E_CONFIG", "activation bits must be >= 1");
  std::sort(bit_options.begin(), bit_options.end());
  bit_options.erase(std::unique(bit_options.begin(), bit_options.end()), bit_options.end());
  CostTable t;
  t.bit_options = bit_options;
  t.activation_bits = activation_bits;
  std::vector<std::string> missing;
  std::vector<std::vector<double>> lat;
  for (const auto& layer : descriptor.layers) {
    if (!layer.quantizable) {
      t.fixed_size_mb += static_cast<double>(layer.param_count) * 32.0 / 8e6;
      continue;
    }
    t.layer_names.push_back(layer.name);
    std::vector<double> s, p, l;
    for (int b : bit_options) {
      s.push_back(static_cast<double>(layer.param_count) * b / 8e6);
      p.push_back(static_cast<double>(layer.mac_count) * b * activation_bits / 1e9);
      if (latency) {
        const auto it = latency->find({layer.name, b});
        if (it == latency->end()) missing.push_back(layer.name + "@" + std::to_string(b));
        else l.push_back(it->second);
      }
    }
    t.size_mb.push_back(std::move(s));
    t.bops.push_back(std::move(p));
    if (latency) lat.push_back(std::move(l));
  }
  if (!missing.empty()) {
    std::string msg = "latency table lacks entries for:";
    for (const auto& m : missing) msg += " " + m;
    throw InputError("E_LATENCY_MISSING", msg);
  }
  if (latency) t.latency = std::move(lat);
  return t;
}

double PlanCost::get(Resource r) const {
  switch (r) {
    case Resource::size: return size_mb;
    case Resource::bops: return bops;
    case Resource::latency:
      if (!latency) throw InputError("E_NO_LATENCY", "plan cost has no latency component");
      return *latency;
  }
  return 0.0;
}

Json PlanCost::to_json() const {
  Json j;
  j["size_mb"] = size_mb;
  j["bops"] = bops;
  j["latency"] = latency ? Json(*latency) : Json(nullptr);
  return j;
}

PlanCost plan_cost(const BitPlan& plan, const CostTable& table) {
  if (plan.assignment.size() != table.num_layers())
    throw InputError("E_PLAN_MISMATCH", "plan has " + std::to_string(plan.assignment.size()) +
                                            " layers, cost table has " + std::to_string(table.num_layers()));
  PlanCost c;
  if (table.latency) c.latency = 0.0;
  for (std::size_t i = 0; i < table.num_layers(); ++i) {
    const auto& [name, bits] = plan.assignment[i];
    if (name != table.layer_names[i])
      throw InputError("E_PLAN_MISMATCH", "plan layer '" + name + "' does not match table layer '" +
                                              table.layer_names[i] + "'");
    const int j = table.option_index(bits);
    if (j < 0)
      throw InputError("E_PLAN_MISMATCH", "layer '" + name + "' uses " + std::to_string(bits) +
                                              " bits, which is not a table option");
    c.size_mb += table.size_mb[i][static_cast<std::size_t>(j)];
    c.bops += table.bops[i][static_cast<std::size_t>(j)];
    if (table.latency) *c.latency += (*table.latency)[i][static_cast<std::size_t>(j)];
  }
  return c;
}

PlanCost uniform_cost(const CostTable& table, int bits) {
  BitPlan p;
  for (const auto& n : table.layer_names) p.assignment.emplace_back(n, bits);
  return plan_cost(p, table);
}

FeasibilityReport check_budget(const BitPlan& plan, const CostTable& table, const CostBudget& budget) {
  const PlanCost c = plan_cost(plan, table);
  FeasibilityReport r;
  for (Resource res : budget.active()) {
    if (!table.has(res)) throw InputError("E_NO_LATENCY", "latency constraint needs a measured latency table");
    ConstraintCheck k;
    k.resource = res;
    k.limit = *budget.limit(res);
    k.used = c.get(res);
    k.slack = k.limit - k.used;
    k.satisfied = k.used <= k.limit;
    r.feasible = r.feasible && k.satisfied;
    r.constraints.push_back(k);
  }
  return r;
}

double BudgetLevels::fraction(const std::string& level) const {
  if (level == "high") return high;
  if (level == "medium") return medium;
  if (level == "low") return low;
  throw InputError("E_BUDGET", "unknown budget level '" + level + "' (expected high, medium or low)");
}

CostBudget fractional_budget(const CostTable& table, const std::vector<Resource>& resources,
                             double fraction) {
  if (!(fraction > 0.0)) throw InputError("E_BUDGET", "budget fraction must be > 0");
  const PlanCost full = uniform_cost(table, table.bit_options.back());
  CostBudget b;
  for (Resource r : resources) {
    if (!table.has(r)) throw InputError("E_NO_LATENCY", "latency budget needs a measured latency table");
    b.set(r, fraction * full.get(r));
  }
  return b;
}

}  // namespace bitplan::cost
