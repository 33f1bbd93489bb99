#include "bitplan/proxy_nas.hpp"

#include <algorithm>
#include <chrono>
#include <iostream>
#include <set>
#include <sstream>

#include <toml.hpp>

#include "bitplan/common/error.hpp"
#include "bitplan/common/parallel.hpp"
#include "bitplan/common/rng.hpp"
#include "bitplan/netlab/trainer.hpp"

namespace bitplan::nas {

namespace {

std::string kind_name(DimensionKind k) {
  switch (k) {
    case DimensionKind::categorical: return "categorical";
    case DimensionKind::boolean: return "boolean";
    case DimensionKind::bit_choice: return "bit_choice";
  }
  return "";
}

DimensionKind kind_from_name(const std::string& s) {
  if (s == "categorical") return DimensionKind::categorical;
  if (s == "boolean") return DimensionKind::boolean;
  if (s == "bit_choice") return DimensionKind::bit_choice;
  throw InputError("E_SPACE", "unknown dimension kind '" + s + "'");
}

const Dimension& dim_at(const HparamSpace& space, const HparamConfig& config, std::size_t d) {
  const Dimension& dim = space.dimensions[d];
  if (config.choice.size() != space.dimensions.size())
    throw InputError("E_CONFIG", "config has " + std::to_string(config.choice.size()) + " values, space has " +
                                     std::to_string(space.dimensions.size()) + " dimensions");
  if (config.choice[d] >= dim.cardinality())
    throw InputError("E_CONFIG", "value index out of domain for dimension '" + dim.name + "'");
  return dim;
}

}  // namespace

std::size_t Dimension::cardinality() const {
  switch (kind) {
    case DimensionKind::categorical: return values.size();
    case DimensionKind::boolean: return 2;
    case DimensionKind::bit_choice: return options.size();
  }
  return 0;
}

std::size_t Dimension::encoded_width() const { return kind == DimensionKind::bit_choice ? 1 : cardinality(); }

void HparamSpace::validate() const {
  if (dimensions.empty()) throw InputError("E_SPACE", "search space has no dimensions");
  std::set<std::string> names;
  for (const Dimension& d : dimensions) {
    if (d.name.empty()) throw InputError("E_SPACE", "dimension without a name");
    if (!names.insert(d.name).second) throw InputError("E_SPACE", "duplicate dimension '" + d.name + "'");
    if (d.cardinality() == 0) throw InputError("E_SPACE", "dimension '" + d.name + "' is empty");
    if (d.kind == DimensionKind::categorical &&
        std::set<std::string>(d.values.begin(), d.values.end()).size() != d.values.size())
      throw InputError("E_SPACE", "dimension '" + d.name + "' repeats a value");
    if (d.kind == DimensionKind::bit_choice) {
      if (std::set<int>(d.options.begin(), d.options.end()).size() != d.options.size())
        throw InputError("E_SPACE", "dimension '" + d.name + "' repeats an option");
      for (int b : d.options)
        if (b < 1) throw InputError("E_SPACE", "dimension '" + d.name + "' has a non-positive bit option");
    }
  }
}

std::uint64_t HparamSpace::size() const {
  std::uint64_t n = 1;
  for (const Dimension& d : dimensions) {
    if (n > (std::uint64_t{1} << 62) / d.cardinality()) throw InputError("E_SPACE", "search space too large");
    n *= d.cardinality();
  }
  return n;
}

std::size_t HparamSpace::encoded_width() const {
  std::size_t w = 0;
  for (const Dimension& d : dimensions) w += d.encoded_width();
  return w;
}

std::size_t HparamSpace::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < dimensions.size(); ++i)
    if (dimensions[i].name == name) return i;
  throw InputError("E_SPACE", "no dimension named '" + name + "'");
}

HparamSpace HparamSpace::from_toml(const std::string& text) {
  HparamSpace space;
  try {
    const toml::table tbl = toml::parse(text);
    const toml::array* dims = tbl["dimension"].as_array();
    if (!dims) throw InputError("E_SPACE", "space file needs [[dimension]] tables");
    for (const toml::node& node : *dims) {
      const toml::table* t = node.as_table();
      if (!t) throw InputError("E_SPACE", "dimension entries must be tables");
      Dimension d;
      d.name = (*t)["name"].value_or(std::string());
      d.kind = kind_from_name((*t)["kind"].value_or(std::string()));
      if (d.kind == DimensionKind::categorical) {
        const toml::array* vals = (*t)["values"].as_array();
        if (!vals) throw InputError("E_SPACE", "categorical '" + d.name + "' needs values");
        for (const toml::node& v : *vals) {
          const auto s = v.value<std::string>();
          if (!s) throw InputError("E_SPACE", "categorical '" + d.name + "' values must be strings");
          d.values.push_back(*s);
        }
      } else if (d.kind == DimensionKind::bit_choice) {
        const toml::array* opts = (*t)["options"].as_array();
        if (!opts) throw InputError("E_SPACE", "bit_choice '" + d.name + "' needs options");
        for (const toml::node& v : *opts) {
          const auto b = v.value<std::int64_t>();
          if (!b) throw InputError("E_SPACE", "bit_choice '" + d.name + "' options must be integers");
          d.options.push_back(static_cast<int>(*b));
        }
      }
      space.dimensions.push_back(std::move(d));
    }
  } catch (const toml::parse_error& e) {
    std::ostringstream msg;
    msg << "malformed TOML: " << e.description() << " at " << e.source().begin;
    throw InputError("E_SPACE", msg.str());
  }
  space.validate();
  return space;
}

HparamSpace HparamSpace::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw InputError("E_SPACE_NOT_FOUND", "space file not found: " + path.string());
  return from_toml(read_text_file(path));
}

std::string HparamSpace::to_toml() const {
  std::string out;
  for (const Dimension& d : dimensions) {
    out += "[[dimension]]\nname = " + Json(d.name).dump() + "\nkind = \"" + kind_name(d.kind) + "\"\n";
    if (d.kind == DimensionKind::categorical) out += "values = " + Json(d.values).dump() + "\n";
    if (d.kind == DimensionKind::bit_choice) out += "options = " + Json(d.options).dump() + "\n";
    out += "\n";
  }
  return out;
}

HparamConfig config_from_index(const HparamSpace& space, std::uint64_t index) {
  HparamConfig c;
  c.choice.resize(space.dimensions.size());
  for (std::size_t d = space.dimensions.size(); d-- > 0;) {
    const std::uint64_t card = space.dimensions[d].cardinality();
    c.choice[d] = static_cast<std::size_t>(index % card);
    index /= card;
  }
  if (index != 0) throw InputError("E_CONFIG", "config index outside the space");
  return c;
}

std::uint64_t config_index(const HparamSpace& space, const HparamConfig& config) {
  std::uint64_t idx = 0;
  for (std::size_t d = 0; d < space.dimensions.size(); ++d) {
    const Dimension& dim = dim_at(space, config, d);
    idx = idx * dim.cardinality() + config.choice[d];
  }
  return idx;
}

Value value(const HparamSpace& space, const HparamConfig& config, const std::string& name) {
  const std::size_t d = space.index_of(name);
  const Dimension& dim = dim_at(space, config, d);
  switch (dim.kind) {
    case DimensionKind::categorical: return dim.values[config.choice[d]];
    case DimensionKind::boolean: return config.choice[d] == 1;
    case DimensionKind::bit_choice: return dim.options[config.choice[d]];
  }
  return false;
}

bool get_bool(const HparamSpace& space, const HparamConfig& config, const std::string& name) {
  const Value v = value(space, config, name);
  if (!std::holds_alternative<bool>(v)) throw InputError("E_SPACE", "dimension '" + name + "' is not boolean");
  return std::get<bool>(v);
}

std::string get_string(const HparamSpace& space, const HparamConfig& config, const std::string& name) {
  const Value v = value(space, config, name);
  if (!std::holds_alternative<std::string>(v))
    throw InputError("E_SPACE", "dimension '" + name + "' is not categorical");
  return std::get<std::string>(v);
}

int get_int(const HparamSpace& space, const HparamConfig& config, const std::string& name) {
  const Value v = value(space, config, name);
  if (!std::holds_alternative<int>(v)) throw InputError("E_SPACE", "dimension '" + name + "' is not a bit choice");
  return std::get<int>(v);
}

Json config_to_json(const HparamSpace& space, const HparamConfig& config) {
  Json j = Json::object();
  for (std::size_t d = 0; d < space.dimensions.size(); ++d) {
    const Dimension& dim = dim_at(space, config, d);
    switch (dim.kind) {
      case DimensionKind::categorical: j[dim.name] = dim.values[config.choice[d]]; break;
      case DimensionKind::boolean: j[dim.name] = config.choice[d] == 1; break;
      case DimensionKind::bit_choice: j[dim.name] = dim.options[config.choice[d]]; break;
    }
  }
  return j;
}

HparamConfig config_from_json(const HparamSpace& space, const Json& j) {
  HparamConfig c;
  for (const Dimension& dim : space.dimensions) {
    if (!j.contains(dim.name)) throw InputError("E_CONFIG", "config lacks dimension '" + dim.name + "'");
    const Json& v = j.at(dim.name);
    std::size_t idx = dim.cardinality();
    if (dim.kind == DimensionKind::boolean && v.is_boolean()) {
      idx = v.get<bool>() ? 1 : 0;
    } else if (dim.kind == DimensionKind::categorical && v.is_string()) {
      const auto it = std::find(dim.values.begin(), dim.values.end(), v.get<std::string>());
      idx = static_cast<std::size_t>(it - dim.values.begin());
    } else if (dim.kind == DimensionKind::bit_choice && v.is_number_integer()) {
      const auto it = std::find(dim.options.begin(), dim.options.end(), v.get<int>());
      idx = static_cast<std::size_t>(it - dim.options.begin());
    }
    if (idx >= dim.cardinality())
      throw InputError("E_CONFIG", "value " + v.dump() + " is outside dimension '" + dim.name + "'");
    c.choice.push_back(idx);
  }
  return c;
}

std::uint64_t config_hash(const HparamSpace& space, const HparamConfig& config) {
  return hash_name(config_to_json(space, config).dump());
}

std::vector<double> encode(const HparamSpace& space, const HparamConfig& config) {
  std::vector<double> out;
  out.reserve(space.encoded_width());
  for (std::size_t d = 0; d < space.dimensions.size(); ++d) {
    const Dimension& dim = dim_at(space, config, d);
    const std::size_t c = config.choice[d];
    switch (dim.kind) {
      case DimensionKind::categorical:
        for (std::size_t k = 0; k < dim.values.size(); ++k) out.push_back(k == c ? 1.0 : 0.0);
        break;
      case DimensionKind::boolean:
        out.push_back(c == 1 ? 1.0 : 0.0);
        out.push_back(c == 1 ? 0.0 : 1.0);
        break;
      case DimensionKind::bit_choice: out.push_back(dim.options[c] / 8.0); break;
    }
  }
  return out;
}

std::string to_string(Fidelity f) { return f == Fidelity::short_run ? "short" : "full"; }

double Proxy::predict(const std::vector<double>& encoding) const { return predict(std::vector<std::vector<double>>{encoding}).front(); }

std::vector<double> Proxy::predict(const std::vector<std::vector<double>>& encodings) const {
  const std::size_t n = encodings.size(), w = net_.input_dim();
  netlab::Matrix x(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    if (encodings[i].size() != w) throw InputError("E_CONFIG", "encoding width differs from the proxy input");
    std::copy(encodings[i].begin(), encodings[i].end(), x.data.begin() + static_cast<std::ptrdiff_t>(i * w));
  }
  *calls_ += n;
  const netlab::Matrix z = net_.logits(params_, x);
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = z(i, 0);
  return out;
}

Proxy fit_proxy(const std::vector<ProxyRecord>& records, const ProxyTraining& training) {
  if (records.size() < 2) throw InputError("E_PROXY", "the proxy needs at least 2 records");
  const std::size_t w = records.front().encoding.size();
  netlab::Batch batch;
  batch.inputs = netlab::Matrix(records.size(), w);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].encoding.size() != w) throw InputError("E_PROXY", "records disagree on encoding width");
    std::copy(records[i].encoding.begin(), records[i].encoding.end(),
              batch.inputs.data.begin() + static_cast<std::ptrdiff_t>(i * w));
    batch.targets.push_back(records[i].score);
  }
  netlab::Network net = netlab::Network::from_descriptor(netlab::mlp_descriptor(w, {training.hidden}, 1));
  netlab::ParamVector params = net.init_params(training.seed);
  netlab::minimize(net, params, batch, netlab::squared_error_loss(), training.steps, training.learning_rate,
                   training.momentum);
  return Proxy(std::move(net), std::move(params));
}

std::vector<HparamConfig> RandomStrategy::sample(const std::vector<HparamConfig>& candidates, std::size_t count,
                                                 std::uint64_t seed) const {
  std::vector<HparamConfig> pool = candidates;
  Rng rng(seed);
  const std::size_t take = std::min(count, pool.size());
  for (std::size_t i = 0; i < take; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(take);
  return pool;
}

namespace {

Proposal score(const HparamSpace& space, const Proxy& proxy, const SearchStrategy& strategy,
               const std::vector<HparamConfig>& candidates, std::size_t count, std::uint64_t seed) {
  Proposal p;
  std::vector<HparamConfig> chosen = strategy.sample(candidates, count, seed);
  p.exhausted = chosen.size() < count;
  for (HparamConfig& c : chosen) {
    const double pred = proxy.predict(encode(space, c));
    p.scored.emplace_back(std::move(c), pred);
  }
  return p;
}

}  // namespace

Proposal propose(const HparamSpace& space, const Proxy& proxy, const SearchStrategy& strategy, std::size_t count,
                 std::uint64_t seed, const std::vector<HparamConfig>& exclude) {
  if (count < 1) throw InputError("E_CONFIG", "propose needs count >= 1");
  const std::uint64_t n = space.size();
  if (n > 10'000'000) throw InputError("E_SPACE", "space too large to enumerate for proposals");
  const std::set<HparamConfig> skip(exclude.begin(), exclude.end());
  std::vector<HparamConfig> candidates;
  for (std::uint64_t i = 0; i < n; ++i) {
    HparamConfig c = config_from_index(space, i);
    if (!skip.count(c)) candidates.push_back(std::move(c));
  }
  return score(space, proxy, strategy, candidates, count, seed);
}

void SearchBudget::validate() const {
  if (K < 1) throw InputError("E_BUDGET", "K must be >= 1");
  if (K >= N) throw InputError("E_BUDGET", "K must be smaller than N");
  if (N * 4 > M) throw InputError("E_BUDGET", "N must be at most M/4");
  if (short_epochs < 1 || short_epochs >= full_epochs)
    throw InputError("E_BUDGET", "need 1 <= short_epochs < full_epochs");
  if (rounds < 0) throw InputError("E_BUDGET", "rounds must be >= 0");
  if (N * 10 > M) std::cerr << "warning: N = " << N << " is not much smaller than M = " << M << "\n";
}

namespace {

std::vector<HparamConfig> sample_pool(const HparamSpace& space, std::size_t m, std::uint64_t seed) {
  const std::uint64_t n = space.size();
  if (m > n) throw InputError("E_BUDGET", "M exceeds the size of the search space");
  std::vector<std::uint64_t> idx;
  if (m == n) {
    for (std::uint64_t i = 0; i < n; ++i) idx.push_back(i);
  } else {
    // Floyd's algorithm: m distinct indices without materialising the space.
    Rng rng(seed);
    std::set<std::uint64_t> chosen;
    for (std::uint64_t j = n - m; j < n; ++j) {
      std::uniform_int_distribution<std::uint64_t> pick(0, j);
      const std::uint64_t t = pick(rng);
      chosen.insert(chosen.count(t) ? j : t);
    }
    idx.assign(chosen.begin(), chosen.end());
  }
  std::vector<HparamConfig> pool;
  for (std::uint64_t i : idx) pool.push_back(config_from_index(space, i));
  return pool;
}

class Runner {
 public:
  Runner(const HparamSpace& space, const Evaluator& evaluator, const SearchOptions& options, SearchResult& result)
      : space_(space), evaluator_(evaluator), options_(options), result_(result) {}

  // Evaluates configs in order and appends their history entries.
  void evaluate(const std::vector<HparamConfig>& configs, const std::vector<std::optional<double>>& predicted,
                Fidelity fidelity, int epochs, int round) {
    const std::size_t start = result_.history.size();
    std::vector<HistoryEntry> entries(configs.size());
    std::vector<bool> replay(configs.size(), false);
    for (std::size_t i = 0; i < configs.size(); ++i) {
      HistoryEntry& e = entries[i];
      e.round = round;
      e.config = configs[i];
      e.encoding = encode(space_, configs[i]);
      e.predicted = predicted[i];
      e.fidelity = fidelity;
      const std::size_t pos = start + i;
      if (pos < options_.resume.size()) {
        const HistoryEntry& old = options_.resume[pos];
        if (old.config != e.config || old.fidelity != e.fidelity || old.round != e.round)
          throw InputError("E_RESUME", "history entry " + std::to_string(pos) +
                                           " does not match this search (different seed, space or budget?)");
        e.realized = old.realized;
        e.seconds = old.seconds;
        e.error = old.error;
        replay[i] = true;
      }
    }
    const auto& fn = fidelity == Fidelity::short_run ? evaluator_.short_eval : evaluator_.full_eval;
    parallel_for(configs.size(), options_.threads, [&](std::size_t i) {
      if (replay[i]) return;
      HistoryEntry& e = entries[i];
      const auto t0 = std::chrono::steady_clock::now();
      try {
        e.realized = fn(e.config, epochs);
      } catch (const std::exception& ex) {
        e.realized = 0.0;
        e.error = ex.what();
      }
      if (options_.record_seconds)
        e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });
    for (std::size_t i = 0; i < configs.size(); ++i) {
      if (replay[i]) ++result_.counters.replayed;
      else if (fidelity == Fidelity::short_run) ++result_.counters.short_evals;
      else ++result_.counters.full_evals;
      result_.history.push_back(std::move(entries[i]));
    }
  }

 private:
  const HparamSpace& space_;
  const Evaluator& evaluator_;
  const SearchOptions& options_;
  SearchResult& result_;
};

void pick_best(SearchResult& r, Fidelity fidelity) {
  bool found = false;
  for (const HistoryEntry& e : r.history) {
    if (e.fidelity != fidelity) continue;
    if (!found || e.realized > r.best_score) {
      found = true;
      r.best = e.config;
      r.best_score = e.realized;
    }
  }
}

std::vector<ProxyRecord> records_of(const std::vector<HistoryEntry>& history) {
  std::vector<ProxyRecord> out;
  for (const HistoryEntry& e : history) out.push_back({e.config, e.encoding, e.realized, e.fidelity});
  return out;
}

}  // namespace

SearchResult search(const HparamSpace& space, const Evaluator& evaluator, const SearchBudget& budget,
                    const SearchOptions& options) {
  space.validate();
  budget.validate();
  if (!evaluator.short_eval || !evaluator.full_eval) throw InputError("E_CONFIG", "evaluator callbacks missing");
  const RandomStrategy fallback;
  const SearchStrategy& strategy =
      options.strategy ? *options.strategy : static_cast<const SearchStrategy&>(fallback);

  SearchResult result;
  Runner runner(space, evaluator, options, result);
  const std::vector<HparamConfig> pool = sample_pool(space, budget.M, derive_seed(budget.seed, "pool"));

  const std::vector<HparamConfig> initial = fallback.sample(pool, budget.N, derive_seed(budget.seed, "initial"));
  runner.evaluate(initial, std::vector<std::optional<double>>(initial.size()), Fidelity::short_run,
                  budget.short_epochs, 0);

  std::set<HparamConfig> fully;
  for (int round = 1; round <= budget.rounds; ++round) {
    ProxyTraining training = options.proxy;
    training.seed = derive_seed(budget.seed, static_cast<std::uint64_t>(round));
    const Proxy proxy = fit_proxy(records_of(result.history), training);

    std::vector<HparamConfig> candidates;
    for (const HparamConfig& c : pool)
      if (!fully.count(c)) candidates.push_back(c);
    if (candidates.empty()) break;
    const std::size_t count =
        budget.candidates_per_round == 0 ? candidates.size() : budget.candidates_per_round;
    Proposal prop = score(space, proxy, strategy, candidates, count,
                          derive_seed(budget.seed, "round" + std::to_string(round)));
    result.counters.proposed += prop.scored.size();
    result.counters.proxy_forwards += proxy.forward_calls();

    std::stable_sort(prop.scored.begin(), prop.scored.end(), [&](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return config_hash(space, a.first) < config_hash(space, b.first);
    });
    std::vector<HparamConfig> top;
    std::vector<std::optional<double>> predicted;
    for (std::size_t i = 0; i < prop.scored.size() && top.size() < budget.K; ++i) {
      top.push_back(prop.scored[i].first);
      predicted.push_back(prop.scored[i].second);
      fully.insert(prop.scored[i].first);
    }
    runner.evaluate(top, predicted, Fidelity::full_run, budget.full_epochs, round);
  }

  const bool any_full = std::any_of(result.history.begin(), result.history.end(),
                                   [](const HistoryEntry& e) { return e.fidelity == Fidelity::full_run; });
  pick_best(result, any_full ? Fidelity::full_run : Fidelity::short_run);
  return result;
}

SearchResult random_search(const HparamSpace& space, const Evaluator& evaluator, const SearchBudget& budget) {
  space.validate();
  budget.validate();
  SearchResult result;
  SearchOptions options;
  Runner runner(space, evaluator, options, result);
  const std::vector<HparamConfig> pool = sample_pool(space, budget.M, derive_seed(budget.seed, "pool"));
  const RandomStrategy strategy;
  const std::vector<HparamConfig> picks =
      strategy.sample(pool, budget.K * static_cast<std::size_t>(budget.rounds), derive_seed(budget.seed, "random"));
  runner.evaluate(picks, std::vector<std::optional<double>>(picks.size()), Fidelity::full_run, budget.full_epochs, 1);
  pick_best(result, Fidelity::full_run);
  return result;
}

Json history_entry_to_json(const HparamSpace& space, const HistoryEntry& e) {
  Json j;
  j["round"] = e.round;
  j["config"] = config_to_json(space, e.config);
  j["encoding"] = e.encoding;
  j["predicted"] = e.predicted ? Json(*e.predicted) : Json(nullptr);
  j["realized"] = e.realized;
  j["fidelity"] = to_string(e.fidelity);
  j["seconds"] = e.seconds;
  if (!e.error.empty()) j["error"] = e.error;
  return j;
}

HistoryEntry history_entry_from_json(const HparamSpace& space, const Json& j) {
  HistoryEntry e;
  try {
    e.round = j.at("round").get<int>();
    e.config = config_from_json(space, j.at("config"));
    e.encoding = j.at("encoding").get<std::vector<double>>();
    if (!j.at("predicted").is_null()) e.predicted = j.at("predicted").get<double>();
    e.realized = j.at("realized").get<double>();
    const std::string f = j.at("fidelity").get<std::string>();
    if (f != "short" && f != "full") throw InputError("E_HISTORY", "unknown fidelity '" + f + "'");
    e.fidelity = f == "short" ? Fidelity::short_run : Fidelity::full_run;
    e.seconds = j.at("seconds").get<double>();
    if (j.contains("error")) e.error = j.at("error").get<std::string>();
  } catch (const nlohmann::json::exception& ex) {
    throw InputError("E_HISTORY", std::string("malformed history record: ") + ex.what());
  }
  return e;
}

std::string history_jsonl(const HparamSpace& space, const std::vector<HistoryEntry>& history) {
  std::string out;
  for (const HistoryEntry& e : history) out += history_entry_to_json(space, e).dump() + "\n";
  return out;
}

std::vector<HistoryEntry> parse_history_jsonl(const HparamSpace& space, const std::string& text) {
  std::vector<HistoryEntry> out;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const nlohmann::json::exception& ex) {
      throw InputError("E_HISTORY", "history line " + std::to_string(lineno) + ": " + ex.what());
    }
    out.push_back(history_entry_from_json(space, j));
  }
  return out;
}

}  // namespace bitplan::nas
