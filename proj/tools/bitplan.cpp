#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bitplan/common/error.hpp"
#include "bitplan/common/rng.hpp"
#include "bitplan/costmodel.hpp"
#include "bitplan/nas_synthetic.hpp"
#include "bitplan/netlab/trainer.hpp"
#include "bitplan/pareto.hpp"
#include "bitplan/pipeline.hpp"
#include "bitplan/planner.hpp"
#include "bitplan/proxy_nas.hpp"
#include "bitplan/sensitivity.hpp"

namespace fs = std::filesystem;
using namespace bitplan;

namespace {

struct Global {
  std::uint64_t seed = 0;
  int threads = 1;
  std::string out_dir = "run";
  fs::path out() const { return out_dir; }
};

// Artifact names inside a run directory.
namespace artifact {
constexpr const char* model = "model.json";
constexpr const char* checkpoint = "model.ckpt";
constexpr const char* dataset = "dataset.bin";
constexpr const char* profile = "profile.json";
constexpr const char* cost_table = "cost_table.json";
constexpr const char* plan = "plan.json";
constexpr const char* frontier_csv = "frontier.csv";
constexpr const char* frontier_json = "frontier.json";
constexpr const char* space_count = "space_count.json";
constexpr const char* pareto_plan = "pareto_plan.json";
constexpr const char* history = "history.jsonl";
constexpr const char* best_config = "best_config.json";
constexpr const char* eval = "eval.json";
constexpr const char* report_md = "report.md";
constexpr const char* report_json = "report.json";
constexpr const char* sensitivity_csv = "sensitivity.csv";
constexpr const char* plan_csv = "plan.csv";
}  // namespace artifact

std::vector<std::string> split(const std::string& s, char sep = ',') {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<int> parse_ints(const std::string& s, const std::string& what) {
  std::vector<int> out;
  for (const std::string& x : split(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stoi(x, &used));
      if (used != x.size()) throw std::invalid_argument(x);
    } catch (const std::exception&) {
      throw InputError("E_CONFIG", "bad integer '" + x + "' in " + what);
    }
  }
  if (out.empty()) throw InputError("E_CONFIG", what + " is empty");
  return out;
}

std::vector<double> parse_doubles(const std::string& s, const std::string& what) {
  std::vector<double> out;
  for (const std::string& x : split(s)) {
    try {
      std::size_t used = 0;
      out.push_back(std::stod(x, &used));
      if (used != x.size()) throw std::invalid_argument(x);
    } catch (const std::exception&) {
      throw InputError("E_CONFIG", "bad number '" + x + "' in " + what);
    }
  }
  if (out.empty()) throw InputError("E_CONFIG", what + " is empty");
  return out;
}

std::vector<cost::Resource> parse_resources(const std::string& s) {
  std::vector<cost::Resource> out;
  for (const std::string& x : split(s)) out.push_back(cost::resource_from_string(x));
  if (out.empty()) throw InputError("E_CONFIG", "resource list is empty");
  return out;
}

quant::QuantSpec parse_spec(const std::string& granularity, const std::string& scheme, const std::string& clip) {
  Json j;
  j["bits"] = 8;
  j["granularity"] = granularity;
  j["scheme"] = scheme;
  j["clip"] = clip;
  return quant::QuantSpec::from_json(j);
}

fs::path or_default(const std::string& given, const Global& g, const char* name) {
  return given.empty() ? g.out() / name : fs::path(given);
}

void require(const fs::path& p, const std::string& code, const std::string& what) {
  if (!fs::exists(p)) throw InputError(code, what + " not found: " + p.string());
}

std::string fmt(double v, int precision = 6) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

// Wall time and invocation details for one stage; kept apart from the
// byte-stable artifacts.
void write_metadata(const Global& g, const std::string& stage, double seconds) {
  Json j;
  j["stage"] = stage;
  j["finished_unix"] = static_cast<std::int64_t>(std::time(nullptr));
  j["wall_seconds"] = seconds;
  j["seed"] = g.seed;
  j["threads"] = g.threads;
  write_json_file(g.out() / "metadata" / (stage + ".json"), j);
}

// ---- shared loading -------------------------------------------------------

netlab::Dataset synthetic_dataset(const netlab::Network& net, std::size_t per_class, double noise,
                                  std::uint64_t seed) {
  const auto& first = net.ops().front();
  const std::size_t classes = net.output_dim();
  if (first.kind == netlab::LayerKind::conv) {
    if (first.geometry.in_channels != 1 || first.geometry.in_h != first.geometry.in_w)
      throw InputError("E_CONFIG", "synthetic images need a square single-channel input");
    return netlab::make_patterns(per_class, classes, first.geometry.in_h, noise, 0.25, seed);
  }
  return netlab::make_blobs(per_class, classes, net.input_dim(), noise, 0.25, seed);
}

struct LoadedTask {
  netlab::ModelDescriptor descriptor;
  pipeline::ToyTask task;
};

// Model, checkpoint and dataset written by the profile stage.
LoadedTask load_task(const Global& g) {
  const fs::path dir = g.out();
  for (const char* name : {artifact::model, artifact::checkpoint, artifact::dataset})
    require(dir / name, "E_STAGE_MISSING", std::string(name) + " (run `bitplan profile` first)");
  LoadedTask t{netlab::ModelDescriptor::load(dir / artifact::model), {}};
  t.task.net = netlab::Network::from_descriptor(t.descriptor);
  t.task.data = netlab::load_dataset(dir / artifact::dataset);
  t.task.trained = netlab::load_checkpoint(dir / artifact::checkpoint);
  if (!(t.task.trained.layout == t.task.net.layout()))
    throw InputError("E_CHECKPOINT", "checkpoint layout does not match model.json");
  t.task.accuracy = netlab::evaluate(t.task.net, t.task.trained, t.task.data.val);
  t.task.finetune = pipeline::finetune_schedule(derive_seed(g.seed, "finetune"));
  return t;
}

struct CostArgs {
  std::string model;
  std::string cost_table;
  std::string latency;
  int activation_bits = 8;
};

void add_cost_options(CLI::App* cmd, CostArgs& a) {
  cmd->add_option("--model", a.model, "model descriptor JSON (default: <out-dir>/model.json)");
  cmd->add_option("--cost-table", a.cost_table, "precomputed cost table JSON instead of --model");
  cmd->add_option("--latency", a.latency, "measured latency CSV (layer,bits,latency)");
  cmd->add_option("--activation-bits", a.activation_bits, "activation bit-width used for BOPs");
}

cost::CostTable load_cost_table(const CostArgs& a, const Global& g, const std::vector<int>& bits) {
  if (!a.cost_table.empty()) {
    require(a.cost_table, "E_COST_TABLE_NOT_FOUND", "cost table");
    return cost::CostTable::from_json(read_json_file(a.cost_table));
  }
  const fs::path model = or_default(a.model, g, artifact::model);
  std::optional<cost::LatencyTable> lat;
  if (!a.latency.empty()) lat = cost::load_latency_csv(a.latency);
  return cost::build_cost_table(netlab::ModelDescriptor::load(model), bits, a.activation_bits, lat);
}

struct BudgetArgs {
  std::optional<double> size_mb, bops, latency;
  std::string level = "medium";
  std::string resources = "size";
  std::optional<double> fraction;
};

void add_budget_options(CLI::App* cmd, BudgetArgs& a) {
  cmd->add_option("--size-mb", a.size_mb, "absolute model size limit (MB)");
  cmd->add_option("--bops", a.bops, "absolute BOPs limit (G)");
  cmd->add_option("--latency-limit", a.latency, "absolute latency limit");
  cmd->add_option("--level", a.level, "budget level: high, medium or low")
      ->check(CLI::IsMember({"high", "medium", "low"}));
  cmd->add_option("--fraction", a.fraction, "budget fraction of the uniform max-bit cost (overrides --level)");
  cmd->add_option("--resources", a.resources, "resources limited by --level/--fraction (size,bops,latency)");
}

bool has_absolute(const BudgetArgs& a) { return a.size_mb || a.bops || a.latency; }

cost::CostBudget make_budget(const BudgetArgs& a, const cost::CostTable& table) {
  cost::CostBudget b;
  if (has_absolute(a)) {
    b.size_limit_mb = a.size_mb;
    b.bops_limit = a.bops;
    b.latency_limit = a.latency;
  } else {
    const double f = a.fraction ? *a.fraction : cost::BudgetLevels{}.fraction(a.level);
    b = cost::fractional_budget(table, parse_resources(a.resources), f);
  }
  b.validate();
  return b;
}

// ---- profile --------------------------------------------------------------

struct ProfileArgs {
  std::string model;
  std::string dataset;
  std::string checkpoint;
  std::string bits = "2,4,8";
  int samples = 64;
  std::string probe = "rademacher";
  std::size_t hessian_batch = 128;
  int epochs = 15;
  std::size_t per_class = 80;
  double noise = 1.6;
  std::string granularity = "per_tensor";
  std::string scheme = "symmetric";
  std::string clip = "minmax";
};

void cmd_profile(const Global& g, const ProfileArgs& a) {
  if (a.model.empty()) throw InputError("E_CONFIG", "--model is required");
  const netlab::ModelDescriptor desc = netlab::ModelDescriptor::load(a.model);
  const netlab::Network net = netlab::Network::from_descriptor(desc);

  netlab::Dataset data;
  if (!a.dataset.empty()) {
    require(a.dataset, "E_DATASET_NOT_FOUND", "dataset");
    data = netlab::load_dataset(a.dataset);
  } else {
    data = synthetic_dataset(net, a.per_class, a.noise, derive_seed(g.seed, "data"));
  }

  netlab::ParamVector params;
  if (!a.checkpoint.empty()) {
    require(a.checkpoint, "E_CHECKPOINT_NOT_FOUND", "checkpoint");
    params = netlab::load_checkpoint(a.checkpoint);
    if (!(params.layout == net.layout()))
      throw InputError("E_CHECKPOINT", "checkpoint layout does not match the model descriptor");
  } else {
    netlab::TrainSchedule s = pipeline::default_schedule(derive_seed(g.seed, "train"));
    s.epochs = a.epochs;
    params = netlab::train(net, net.init_params(derive_seed(g.seed, "init")), data, s).params;
  }

  const std::size_t n = std::min(a.hessian_batch, data.train.size());
  if (n == 0) throw InputError("E_EMPTY_DATASET", "training split is empty");
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = i;
  const netlab::Batch batch = data.train.subset(rows);

  sensitivity::ProfileConfig cfg;
  cfg.samples = a.samples;
  cfg.distribution = sensitivity::probe_distribution_from_string(a.probe);
  cfg.seed = derive_seed(g.seed, "profile");
  cfg.quant = parse_spec(a.granularity, a.scheme, a.clip);
  cfg.threads = g.threads;
  const sensitivity::SensitivityProfile prof =
      sensitivity::profile(net, params, batch, parse_ints(a.bits, "--bits"), cfg);

  fs::create_directories(g.out());
  write_json_file(g.out() / artifact::model, desc.to_json());
  netlab::save_checkpoint(g.out() / artifact::checkpoint, params);
  netlab::save_dataset(g.out() / artifact::dataset, data);
  write_json_file(g.out() / artifact::profile, prof.to_json());

  std::cout << "profiled " << prof.num_layers() << " layers x " << prof.num_options() << " bit options ("
            << a.samples << " probes), val accuracy " << fmt(netlab::evaluate(net, params, data.val), 4) << "\n";
  std::cout << std::left << std::setw(12) << "layer" << std::setw(14) << "trace/param";
  for (int b : prof.bit_options) std::cout << std::setw(14) << ("delta@" + std::to_string(b));
  std::cout << "\n";
  for (std::size_t i = 0; i < prof.num_layers(); ++i) {
    std::cout << std::setw(12) << prof.layer_names[i] << std::setw(14) << fmt(prof.trace_per_param[i], 4);
    for (double d : prof.delta[i]) std::cout << std::setw(14) << fmt(d, 4);
    std::cout << "\n";
  }
}

// ---- plan -----------------------------------------------------------------

struct PlanArgs {
  std::string profile;
  CostArgs cost;
  BudgetArgs budget;
  bool brute_force = false;
};

void print_plan(const BitPlan& plan, const planner::IlpInstance& inst) {
  const cost::PlanCost c = cost::plan_cost(plan, inst.table);
  std::cout << std::left << std::setw(12) << "layer" << std::setw(6) << "bits" << std::setw(14) << "delta"
            << std::setw(12) << "size_mb" << "\n";
  for (std::size_t i = 0; i < plan.assignment.size(); ++i) {
    const int j = inst.table.option_index(plan.assignment[i].second);
    const auto k = static_cast<std::size_t>(j);
    std::cout << std::setw(12) << plan.assignment[i].first << std::setw(6) << plan.assignment[i].second
              << std::setw(14) << fmt(inst.profile.delta[i][k], 4) << std::setw(12)
              << fmt(inst.table.size_mb[i][k], 4) << "\n";
  }
  std::cout << "objective " << fmt(plan.objective) << ", size " << fmt(c.size_mb) << " MB, bops " << fmt(c.bops)
            << " G";
  if (c.latency) std::cout << ", latency " << fmt(*c.latency);
  std::cout << "\n";
  for (const auto& k : cost::check_budget(plan, inst.table, inst.budget).constraints)
    std::cout << "  " << cost::to_string(k.resource) << ": used " << fmt(k.used) << " of " << fmt(k.limit)
              << " (slack " << fmt(k.slack) << ")\n";
}

planner::IlpInstance load_instance(const Global& g, const std::string& profile_path, const CostArgs& cost_args) {
  const fs::path p = or_default(profile_path, g, artifact::profile);
  planner::IlpInstance inst;
  inst.profile = sensitivity::SensitivityProfile::load(p);
  inst.table = load_cost_table(cost_args, g, inst.profile.bit_options);
  return inst;
}

void cmd_plan(const Global& g, const PlanArgs& a) {
  planner::IlpInstance inst = load_instance(g, a.profile, a.cost);
  inst.budget = make_budget(a.budget, inst.table);
  inst.validate();
  planner::SolveStats stats;
  const BitPlan plan = a.brute_force ? planner::brute_force(inst) : planner::solve(inst, &stats);
  fs::create_directories(g.out());
  write_json_file(g.out() / artifact::cost_table, inst.table.to_json());
  write_json_file(g.out() / artifact::plan, planner::plan_to_json(plan, inst.table, inst.budget));
  print_plan(plan, inst);
}

// ---- pareto ---------------------------------------------------------------

struct ParetoArgs {
  std::string profile;
  CostArgs cost;
  BudgetArgs budget;
  std::string objectives = "size";
  std::string sweep = "0.5,0.6,0.7,0.8,0.9,1.0";
  int local_moves = 2;
  double exhaustive_limit = 1e5;
  bool select = false;
};

void cmd_pareto(const Global& g, const ParetoArgs& a) {
  planner::IlpInstance inst = load_instance(g, a.profile, a.cost);
  pareto::FrontierOptions opts;
  opts.objectives = parse_resources(a.objectives);
  opts.sweep_fractions = parse_doubles(a.sweep, "--sweep");
  opts.local_moves = a.local_moves;
  opts.exhaustive_limit = a.exhaustive_limit;
  opts.threads = g.threads;
  inst.budget = cost::fractional_budget(inst.table, opts.objectives, 1.0);
  inst.validate();
  const pareto::FrontierResult fr = pareto::frontier(inst, opts);
  for (const std::string& d : fr.diagnostics) std::cerr << "warning: " << d << "\n";
  const pareto::SpaceCount count =
      pareto::space_count(static_cast<int>(inst.profile.num_options()), static_cast<int>(inst.profile.num_layers()));

  fs::create_directories(g.out());
  write_text_file(g.out() / artifact::frontier_csv, pareto::frontier_csv(fr.points));
  write_json_file(g.out() / artifact::frontier_json, pareto::frontier_json(fr.points));
  Json report = count.to_json();
  report["layers"] = inst.profile.num_layers();
  report["bit_options"] = inst.profile.bit_options;
  report["frontier_points"] = fr.points.size();
  report["pool_size"] = fr.pool_size;
  write_json_file(g.out() / artifact::space_count, report);

  std::cout << "frontier: " << fr.points.size() << " points from a pool of " << fr.pool_size << "\n";
  std::cout << "bit space m^L = " << count.bit_space.str() << "\n";
  std::cout << "schedule space = " << count.schedule_space.str() << "\n";

  if (a.select) {
    const cost::CostBudget b = make_budget(a.budget, inst.table);
    const BitPlan chosen = pareto::select(fr.points, inst.table, b);
    write_json_file(g.out() / artifact::pareto_plan, planner::plan_to_json(chosen, inst.table, b));
    planner::IlpInstance shown = inst;
    shown.budget = b;
    std::cout << "selected for budget:\n";
    print_plan(chosen, shown);
  }
}

// ---- search ---------------------------------------------------------------

struct SearchArgs {
  std::string space;
  bool synthetic = false;
  double noise = 0.04;
  std::size_t M = 64, N = 8, K = 3;
  int short_epochs = 1, full_epochs = 4, rounds = 4;
  std::size_t candidates = 0;
  std::string resume;
};

void cmd_search(const Global& g, const SearchArgs& a) {
  nas::HparamSpace space;
  nas::Evaluator evaluator;
  std::optional<LoadedTask> task;
  if (a.synthetic) {
    space = a.space.empty() ? nas::synthetic_space() : nas::HparamSpace::load(a.space);
    evaluator = nas::synthetic_evaluator(space, a.noise);
  } else {
    if (a.space.empty()) throw InputError("E_CONFIG", "--space is required unless --synthetic is given");
    space = nas::HparamSpace::load(a.space);
    task = load_task(g);
    evaluator = pipeline::recipe_evaluator(task->task, space);
  }
  nas::SearchBudget budget;
  budget.M = a.M;
  budget.N = a.N;
  budget.K = a.K;
  budget.short_epochs = a.short_epochs;
  budget.full_epochs = a.full_epochs;
  budget.rounds = a.rounds;
  budget.candidates_per_round = a.candidates;
  budget.seed = derive_seed(g.seed, "search");
  nas::SearchOptions opts;
  opts.threads = g.threads;
  if (!a.resume.empty()) {
    require(a.resume, "E_HISTORY_NOT_FOUND", "history");
    opts.resume = nas::parse_history_jsonl(space, read_text_file(a.resume));
  }
  const nas::SearchResult r = nas::search(space, evaluator, budget, opts);

  fs::create_directories(g.out());
  write_text_file(g.out() / artifact::history, nas::history_jsonl(space, r.history));
  Json best;
  best["config"] = nas::config_to_json(space, r.best);
  best["score"] = r.best_score;
  best["mode"] = a.synthetic ? "synthetic" : "toy";
  best["space_toml"] = space.to_toml();
  Json counters;
  counters["short_evals"] = r.counters.short_evals;
  counters["full_evals"] = r.counters.full_evals;
  counters["proxy_forwards"] = r.counters.proxy_forwards;
  counters["proposed"] = r.counters.proposed;
  counters["replayed"] = r.counters.replayed;
  best["counters"] = counters;
  Json b;
  b["M"] = budget.M;
  b["N"] = budget.N;
  b["K"] = budget.K;
  b["short_epochs"] = budget.short_epochs;
  b["full_epochs"] = budget.full_epochs;
  b["rounds"] = budget.rounds;
  best["budget"] = b;
  write_json_file(g.out() / artifact::best_config, best);

  std::cout << "history: " << r.history.size() << " evaluations (" << r.counters.short_evals << " short, "
            << r.counters.full_evals << " full, " << r.counters.replayed << " replayed)\n";
  std::cout << "best score " << fmt(r.best_score) << ": " << nas::config_to_json(space, r.best).dump() << "\n";
}

// ---- quantize-eval --------------------------------------------------------

struct EvalArgs {
  std::string plan;
  std::optional<int> uniform;
  std::string config;
  int epochs = 0;
  std::string granularity = "per_tensor";
  std::string scheme = "symmetric";
  std::string clip = "minmax";
};

void cmd_quantize_eval(const Global& g, const EvalArgs& a) {
  const LoadedTask lt = load_task(g);
  const pipeline::ToyTask& t = lt.task;
  const std::vector<std::string> layers = t.net.layout().quantizable_names();

  pipeline::QuantRecipe recipe;
  recipe.spec = parse_spec(a.granularity, a.scheme, a.clip);
  recipe.bits = pipeline::uniform_bits(t.net.layout(), 8);
  Json source;
  if (!a.config.empty()) {
    require(a.config, "E_CONFIG_NOT_FOUND", "search result");
    const Json best = read_json_file(a.config);
    const nas::HparamSpace space = nas::HparamSpace::from_toml(best.at("space_toml").get<std::string>());
    recipe = pipeline::recipe_from_config(space, nas::config_from_json(space, best.at("config")), layers, recipe.spec);
    source["config"] = a.config;
  }
  if (a.uniform) {
    recipe.bits = pipeline::uniform_bits(t.net.layout(), *a.uniform);
    source["uniform"] = *a.uniform;
  } else if (a.config.empty() || !a.plan.empty()) {
    const fs::path plan_path = or_default(a.plan, g, artifact::plan);
    require(plan_path, "E_PLAN_NOT_FOUND", "plan");
    recipe.bits = pipeline::bit_map(planner::plan_from_json(read_json_file(plan_path)));
    source["plan"] = plan_path.filename().string();
  }

  const double acc = pipeline::evaluate_recipe(t.net, t.trained, t.data, recipe, a.epochs, t.finetune);
  Json out;
  out["source"] = source;
  out["recipe"] = recipe.to_json();
  out["finetune_epochs"] = a.epochs;
  out["fp_accuracy"] = t.accuracy;
  out["accuracy"] = acc;
  std::vector<int> bits;
  for (const auto& name : layers) {
    const auto it = recipe.bits.find(name);
    bits.push_back(it == recipe.bits.end() ? 32 : it->second);
  }
  std::int64_t weights = 0;
  double size = 0.0;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto* spec = lt.descriptor.find(layers[i]);
    weights += spec->param_count;
    size += static_cast<double>(spec->param_count) * bits[i] / 8e6;
  }
  out["size_mb"] = size;
  out["quantized_params"] = weights;
  fs::create_directories(g.out());
  write_json_file(g.out() / artifact::eval, out);
  std::cout << "accuracy " << fmt(acc, 4) << " (full precision " << fmt(t.accuracy, 4) << "), size " << fmt(size)
            << " MB\n";
}

// ---- report ---------------------------------------------------------------

void cmd_report(const Global& g, const std::string& run_dir_arg) {
  const fs::path dir = run_dir_arg.empty() ? g.out() : fs::path(run_dir_arg);
  if (!fs::is_directory(dir)) throw InputError("E_RUN_DIR_NOT_FOUND", "run directory not found: " + dir.string());
  std::ostringstream md;
  Json rep;
  Json stages = Json::object();
  const auto stage = [&](const std::string& name, std::vector<std::string> files) {
    Json s;
    bool present = true;
    for (const auto& f : files) present = present && fs::exists(dir / f);
    s["status"] = present ? "present" : "absent";
    s["artifacts"] = files;
    stages[name] = s;
    md << "## " << name << "\n\n";
    if (!present) md << "absent\n\n";
    return present;
  };

  md << "# Run report\n\n";
  std::optional<sensitivity::SensitivityProfile> prof;
  if (stage("profile", {artifact::profile, artifact::model, artifact::checkpoint, artifact::dataset})) {
    prof = sensitivity::SensitivityProfile::load(dir / artifact::profile);
    md << "Artifacts: " << artifact::profile << ", " << artifact::model << ", " << artifact::checkpoint << ", "
       << artifact::dataset << "\n\n| layer | trace/param |";
    for (int b : prof->bit_options) md << " delta@" << b << " |";
    md << "\n|---|---|";
    for (std::size_t k = 0; k < prof->num_options(); ++k) md << "---|";
    md << "\n";
    std::ostringstream csv;
    csv << "layer,bits,delta\n";
    for (std::size_t i = 0; i < prof->num_layers(); ++i) {
      md << "| " << prof->layer_names[i] << " | " << fmt(prof->trace_per_param[i]) << " |";
      for (std::size_t k = 0; k < prof->num_options(); ++k) {
        md << " " << fmt(prof->delta[i][k]) << " |";
        csv << prof->layer_names[i] << "," << prof->bit_options[k] << "," << Json(prof->delta[i][k]).dump() << "\n";
      }
      md << "\n";
    }
    md << "\nPlot data: " << artifact::sensitivity_csv << "\n\n";
    write_text_file(dir / artifact::sensitivity_csv, csv.str());
  }

  if (stage("plan", {artifact::plan, artifact::cost_table})) {
    const Json pj = read_json_file(dir / artifact::plan);
    const BitPlan plan = planner::plan_from_json(pj);
    md << "Artifacts: " << artifact::plan << ", " << artifact::cost_table << "\n\n";
    md << "Objective " << fmt(plan.objective) << "; cost " << pj.at("cost").dump() << "; budget "
       << pj.at("budget").dump() << "\n\n| layer | bits |\n|---|---|\n";
    std::ostringstream csv;
    csv << "layer,bits\n";
    for (const auto& [layer, bits] : plan.assignment) {
      md << "| " << layer << " | " << bits << " |\n";
      csv << layer << "," << bits << "\n";
    }
    md << "\nPlot data: " << artifact::plan_csv << "\n\n";
    write_text_file(dir / artifact::plan_csv, csv.str());
  }

  if (stage("pareto", {artifact::frontier_csv, artifact::frontier_json, artifact::space_count})) {
    const Json sc = read_json_file(dir / artifact::space_count);
    md << "Artifacts: " << artifact::frontier_csv << ", " << artifact::frontier_json << ", " << artifact::space_count
       << "\n\nFrontier points: " << sc.at("frontier_points").dump() << "\n\nBit space (m^L): "
       << sc.at("bit_space").get<std::string>() << "\n\nSchedule space (ordered partitions): "
       << sc.at("schedule_space").get<std::string>() << "\n\n";
    if (fs::exists(dir / artifact::pareto_plan)) md << "Budget selection: " << artifact::pareto_plan << "\n\n";
  }

  if (stage("search", {artifact::history, artifact::best_config})) {
    const Json best = read_json_file(dir / artifact::best_config);
    md << "Artifacts: " << artifact::history << ", " << artifact::best_config << "\n\nBest score "
       << fmt(best.at("score").get<double>()) << " for " << best.at("config").dump() << "\n\nCounters: "
       << best.at("counters").dump() << "\n\n";
  }

  if (stage("quantize-eval", {artifact::eval})) {
    const Json ev = read_json_file(dir / artifact::eval);
    md << "Artifacts: " << artifact::eval << "\n\nAccuracy " << fmt(ev.at("accuracy").get<double>(), 4)
       << " vs full precision " << fmt(ev.at("fp_accuracy").get<double>(), 4) << ", size "
       << fmt(ev.at("size_mb").get<double>()) << " MB\n\n";
  }

  rep["stages"] = stages;
  write_text_file(dir / artifact::report_md, md.str());
  write_json_file(dir / artifact::report_json, rep);
  std::cout << md.str();
}

// ---- main -----------------------------------------------------------------

void print_error(const std::string& code, const std::string& message, const Json& extra = Json::object()) {
  Json j;
  j["error"]["code"] = code;
  j["error"]["message"] = message;
  for (auto it = extra.begin(); it != extra.end(); ++it) j["error"][it.key()] = it.value();
  std::cerr << j.dump() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed-precision bit allocation: sensitivity profiling, ILP planning, Pareto frontiers and "
               "proxy-guided quantization search"};
  app.require_subcommand(1);
  Global g;
  app.add_option("--seed", g.seed, "root seed for every stage");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", g.out_dir, "run directory for artifacts");

  ProfileArgs pa;
  auto* profile = app.add_subcommand("profile", "train or load a model and write its sensitivity profile");
  profile->add_option("--model", pa.model, "model descriptor JSON with layer geometry");
  profile->add_option("--dataset", pa.dataset, "binary dataset (default: synthetic data for the model)");
  profile->add_option("--checkpoint", pa.checkpoint, "trained parameters (default: train from scratch)");
  profile->add_option("--bits", pa.bits, "bit options, comma separated");
  profile->add_option("--samples", pa.samples, "Hutchinson probes per layer");
  profile->add_option("--probe", pa.probe, "rademacher or gaussian");
  profile->add_option("--hessian-batch", pa.hessian_batch, "training samples used for Hessian products");
  profile->add_option("--epochs", pa.epochs, "training epochs when no checkpoint is given");
  profile->add_option("--per-class", pa.per_class, "synthetic samples per class");
  profile->add_option("--noise", pa.noise, "synthetic data noise");
  profile->add_option("--granularity", pa.granularity, "per_tensor or per_channel");
  profile->add_option("--scheme", pa.scheme, "symmetric or asymmetric");
  profile->add_option("--clip", pa.clip, "minmax, mse or percentile:<p>");

  PlanArgs pl;
  auto* plan = app.add_subcommand("plan", "solve the bit allocation ILP for a budget");
  plan->add_option("--profile", pl.profile, "sensitivity profile (default: <out-dir>/profile.json)");
  add_cost_options(plan, pl.cost);
  add_budget_options(plan, pl.budget);
  plan->add_flag("--brute-force", pl.brute_force, "solve by exhaustive enumeration");

  ParetoArgs pr;
  auto* par = app.add_subcommand("pareto", "enumerate the perturbation / cost frontier");
  par->add_option("--profile", pr.profile, "sensitivity profile (default: <out-dir>/profile.json)");
  add_cost_options(par, pr.cost);
  add_budget_options(par, pr.budget);
  par->add_option("--objectives", pr.objectives, "cost objectives (size,bops,latency)");
  par->add_option("--sweep", pr.sweep, "budget fractions seeding the frontier");
  par->add_option("--local-moves", pr.local_moves, "neighbourhood depth around seed plans");
  par->add_option("--exhaustive-limit", pr.exhaustive_limit, "enumerate every plan when the bit space is this small");
  par->add_flag("--select", pr.select, "also pick the frontier point for the budget options");

  SearchArgs sa;
  auto* search = app.add_subcommand("search", "proxy-guided search over quantization hyperparameters");
  search->add_option("--space", sa.space, "search space TOML");
  search->add_flag("--synthetic", sa.synthetic, "score configs with the built-in synthetic benchmark");
  search->add_option("--noise", sa.noise, "short-run noise of the synthetic benchmark");
  search->add_option("--M", sa.M, "candidate pool size");
  search->add_option("--N", sa.N, "short evaluations seeding the proxy");
  search->add_option("--K", sa.K, "full evaluations per round");
  search->add_option("--short-epochs", sa.short_epochs, "fine-tune epochs of a short evaluation");
  search->add_option("--full-epochs", sa.full_epochs, "fine-tune epochs of a full evaluation");
  search->add_option("--rounds", sa.rounds, "search rounds");
  search->add_option("--candidates", sa.candidates, "proposals per round (0: whole remaining pool)");
  search->add_option("--resume", sa.resume, "history JSONL of an interrupted run");

  EvalArgs ea;
  auto* qe = app.add_subcommand("quantize-eval", "apply a plan or recipe and measure validation accuracy");
  qe->add_option("--plan", ea.plan, "bit plan (default: <out-dir>/plan.json)");
  qe->add_option("--uniform", ea.uniform, "uniform bit-width instead of a plan");
  qe->add_option("--config", ea.config, "search result whose recipe to apply");
  qe->add_option("--epochs", ea.epochs, "quantization-aware fine-tune epochs");
  qe->add_option("--granularity", ea.granularity, "per_tensor or per_channel");
  qe->add_option("--scheme", ea.scheme, "symmetric or asymmetric");
  qe->add_option("--clip", ea.clip, "minmax, mse or percentile:<p>");

  std::string run_dir;
  auto* report = app.add_subcommand("report", "summarise a run directory");
  report->add_option("--run-dir", run_dir, "run directory (default: --out-dir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("E_USAGE", e.what());
    return 2;
  }

  const auto start = std::chrono::steady_clock::now();
  std::string stage;
  try {
    if (*profile) stage = "profile", cmd_profile(g, pa);
    else if (*plan) stage = "plan", cmd_plan(g, pl);
    else if (*par) stage = "pareto", cmd_pareto(g, pr);
    else if (*search) stage = "search", cmd_search(g, sa);
    else if (*qe) stage = "quantize-eval", cmd_quantize_eval(g, ea);
    else if (*report) stage = "report", cmd_report(g, run_dir);
    if (stage != "report")
      write_metadata(g, stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count());
  } catch (const planner::InfeasibleError& e) {
    Json binding = Json::array();
    for (cost::Resource r : e.binding()) binding.push_back(cost::to_string(r));
    print_error(e.code(), e.what(), Json{{"binding", binding}});
    return 3;
  } catch (const InputError& e) {
    print_error(e.code(), e.what());
    return 2;
  } catch (const Error& e) {
    print_error(e.code(), e.what());
    return 4;
  } catch (const std::exception& e) {
    print_error("E_INTERNAL", e.what());
    return 4;
  }
  return 0;
}
