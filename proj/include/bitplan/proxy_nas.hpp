#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "bitplan/common/json.hpp"
#include "bitplan/netlab/network.hpp"

namespace bitplan::nas {

enum class DimensionKind { categorical, boolean, bit_choice };

struct Dimension {
  std::string name;
  DimensionKind kind = DimensionKind::boolean;
  std::vector<std::string> values;  // categorical
  std::vector<int> options;         // bit_choice

  std::size_t cardinality() const;
  std::size_t encoded_width() const;
};

struct HparamSpace {
  std::vector<Dimension> dimensions;

  void validate() const;
  // Number of configs; throws when it exceeds 2^62.
  std::uint64_t size() const;
  std::size_t encoded_width() const;
  std::size_t index_of(const std::string& name) const;

  // Array of [[dimension]] tables with name, kind and values/options.
  static HparamSpace from_toml(const std::string& text);
  static HparamSpace load(const std::filesystem::path& path);
  std::string to_toml() const;
};

using Value = std::variant<bool, std::string, int>;

// One value per dimension, stored as indices into each domain.
struct HparamConfig {
  std::vector<std::size_t> choice;

  bool operator==(const HparamConfig&) const = default;
  auto operator<=>(const HparamConfig&) const = default;
};

HparamConfig config_from_index(const HparamSpace& space, std::uint64_t index);
std::uint64_t config_index(const HparamSpace& space, const HparamConfig& config);
Value value(const HparamSpace& space, const HparamConfig& config, const std::string& name);
bool get_bool(const HparamSpace& space, const HparamConfig& config, const std::string& name);
std::string get_string(const HparamSpace& space, const HparamConfig& config, const std::string& name);
int get_int(const HparamSpace& space, const HparamConfig& config, const std::string& name);

Json config_to_json(const HparamSpace& space, const HparamConfig& config);
HparamConfig config_from_json(const HparamSpace& space, const Json& j);
// Stable identity used for tie-breaks.
std::uint64_t config_hash(const HparamSpace& space, const HparamConfig& config);

// One-hot per categorical/boolean dimension ([1,0] is true), bits/8 for bit
// choices. Throws InputError for out-of-domain indices.
std::vector<double> encode(const HparamSpace& space, const HparamConfig& config);

enum class Fidelity { short_run, full_run };
std::string to_string(Fidelity f);

struct ProxyRecord {
  HparamConfig config;
  std::vector<double> encoding;
  double score = 0.0;
  Fidelity fidelity = Fidelity::short_run;
};

// Two weight layers: encoding -> 32 tanh units -> score.
class Proxy {
 public:
  Proxy(netlab::Network net, netlab::ParamVector params) : net_(std::move(net)), params_(std::move(params)) {}

  double predict(const std::vector<double>& encoding) const;
  std::vector<double> predict(const std::vector<std::vector<double>>& encodings) const;
  // Number of encodings pushed through the network so far.
  std::uint64_t forward_calls() const { return calls_->load(); }

 private:
  netlab::Network net_;
  netlab::ParamVector params_;
  std::shared_ptr<std::atomic<std::uint64_t>> calls_ = std::make_shared<std::atomic<std::uint64_t>>(0);
};

struct ProxyTraining {
  std::size_t hidden = 32;
  int steps = 500;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::uint64_t seed = 0;
};

// Throws InputError with fewer than 2 records.
Proxy fit_proxy(const std::vector<ProxyRecord>& records, const ProxyTraining& training = {});

// Extension point for candidate generation.
class SearchStrategy {
 public:
  virtual ~SearchStrategy() = default;
  virtual std::string name() const = 0;
  // Picks up to `count` of `candidates` (which never repeat).
  virtual std::vector<HparamConfig> sample(const std::vector<HparamConfig>& candidates, std::size_t count,
                                           std::uint64_t seed) const = 0;
};

class RandomStrategy : public SearchStrategy {
 public:
  std::string name() const override { return "random"; }
  std::vector<HparamConfig> sample(const std::vector<HparamConfig>& candidates, std::size_t count,
                                   std::uint64_t seed) const override;
};

struct Proposal {
  std::vector<std::pair<HparamConfig, double>> scored;
  bool exhausted = false;  // fewer than `count` unseen configs remained
};

// Samples `count` configs of the space not in `exclude` and scores each with
// one proxy forward pass.
Proposal propose(const HparamSpace& space, const Proxy& proxy, const SearchStrategy& strategy,
                 std::size_t count, std::uint64_t seed, const std::vector<HparamConfig>& exclude);

struct SearchBudget {
  std::size_t M = 64;
  std::size_t N = 8;
  std::size_t K = 3;
  int short_epochs = 10;
  int full_epochs = 100;
  int rounds = 4;
  std::uint64_t seed = 0;
  // Proposals drawn per round; 0 means every remaining pool member.
  std::size_t candidates_per_round = 0;

  // K < N, N <= M/4, short_epochs < full_epochs. Warns on stderr when N > M/10.
  void validate() const;
};

struct Evaluator {
  std::function<double(const HparamConfig&, int epochs)> short_eval;
  std::function<double(const HparamConfig&, int epochs)> full_eval;
};

struct HistoryEntry {
  int round = 0;
  HparamConfig config;
  std::vector<double> encoding;
  std::optional<double> predicted;
  double realized = 0.0;
  Fidelity fidelity = Fidelity::short_run;
  double seconds = 0.0;
  std::string error;

  bool operator==(const HistoryEntry&) const = default;
};

struct SearchCounters {
  std::uint64_t short_evals = 0;
  std::uint64_t full_evals = 0;
  std::uint64_t proxy_forwards = 0;
  std::uint64_t proposed = 0;
  std::uint64_t replayed = 0;  // evaluations taken from a resumed history
};

struct SearchResult {
  HparamConfig best;
  double best_score = 0.0;
  std::vector<HistoryEntry> history;
  SearchCounters counters;
};

struct SearchOptions {
  int threads = 1;
  bool record_seconds = false;
  ProxyTraining proxy;
  // Entries of an earlier run with the same space and budget; replayed in
  // order instead of calling the evaluator.
  std::vector<HistoryEntry> resume;
  std::shared_ptr<SearchStrategy> strategy;  // random when null
};

SearchResult search(const HparamSpace& space, const Evaluator& evaluator, const SearchBudget& budget,
                    const SearchOptions& options = {});

// Pure random search with the same number of full evaluations (K * rounds).
SearchResult random_search(const HparamSpace& space, const Evaluator& evaluator, const SearchBudget& budget);

Json history_entry_to_json(const HparamSpace& space, const HistoryEntry& e);
HistoryEntry history_entry_from_json(const HparamSpace& space, const Json& j);
std::string history_jsonl(const HparamSpace& space, const std::vector<HistoryEntry>& history);
std::vector<HistoryEntry> parse_history_jsonl(const HparamSpace& space, const std::string& text);

}  // namespace bitplan::nas
