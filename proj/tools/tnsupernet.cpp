// tnsupernet command-line driver.
//
//   tnsupernet search   --task tabular|kg --config run.json ...
//   tnsupernet ablate   --task tabular|kg --config run.json --ranks 1,2,3,4
//   tnsupernet verify   --topology ring --edges 3 --choices 3 --rank 2
//   tnsupernet tabular  generate|search|regret
//   tnsupernet kg       synth|search|eval|rules
//
// Exit codes: 0 ok, 1 configuration, 2 data, 3 numerical.

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tnsupernet/checkpoint.hpp"
#include "tnsupernet/config.hpp"
#include "tnsupernet/errors.hpp"
#include "tnsupernet/relational.hpp"
#include "tnsupernet/selfcheck.hpp"
#include "tnsupernet/tabular.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace tnsupernet;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out << text;
}

std::string hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::vector<std::size_t> parse_list(const std::string& text, const char* key) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 0) throw std::invalid_argument(item);
      out.push_back(static_cast<std::size_t>(v));
    } catch (const std::exception&) {
      throw ConfigError(key, std::string("bad entry '") + item + "' in --" + key);
    }
  }
  return out;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("TNSUPERNET_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

// ---------------------------------------------------------------------------
// Task inputs

struct TaskInputs {
  std::string task = "tabular";
  std::string benchmark;
  std::string supernet;
  std::string data;
  std::string target;
};

struct LoadedTask {
  std::shared_ptr<const Supernet> supernet;
  std::shared_ptr<const TabularBenchmark> bench;
  std::shared_ptr<const KgDataset> kg;
  std::optional<ChainTask> chain;
  std::unique_ptr<TaskEvaluator> evaluator;
  std::uint64_t dataset_hash = 0;
};

LoadedTask load_task(const TaskInputs& in, const RunConfig& cfg) {
  LoadedTask t;
  if (in.task == "tabular") {
    if (in.benchmark.empty()) throw ConfigError("benchmark", "--benchmark is required for tabular tasks");
    std::shared_ptr<const Supernet> s;
    if (!in.supernet.empty()) s = std::make_shared<const Supernet>(load_supernet_file(in.supernet));
    const std::string text = read_file(in.benchmark);
    t.bench = std::make_shared<const TabularBenchmark>(parse_benchmark_csv(text, s, in.benchmark));
    t.supernet = t.bench->supernet;
    t.evaluator = std::make_unique<TabularEvaluator>(t.bench);
    t.dataset_hash = fnv1a(text);
  } else if (in.task == "kg") {
    if (in.data.empty()) throw ConfigError("data", "--data is required for kg tasks");
    auto data = std::make_shared<KgDataset>(load_dataset(in.data));
    ChainTaskOptions opts;
    opts.chain_length = cfg.chain_length;
    opts.include_identity = cfg.identity;
    const std::string target = in.target.empty() ? cfg.target : in.target;
    t.chain = make_chain_task(*data, target, opts);
    t.kg = data;
    t.supernet = std::make_shared<const Supernet>(chain_supernet(data->graph, *t.chain));
    t.evaluator = std::make_unique<ChainEvaluator>(t.kg, *t.chain, RelaxedOptions{cfg.clamp},
                                                   cfg.filtered);
    std::uint64_t h = fnv1a("");
    for (const char* name : {"facts.txt", "train.txt", "valid.txt", "test.txt"}) {
      const fs::path p = fs::path(in.data) / name;
      if (fs::exists(p)) h = fnv1a(read_file(p.string()), h);
    }
    t.dataset_hash = h;
  } else {
    throw ConfigError("task", "--task must be 'tabular' or 'kg', got '" + in.task + "'");
  }
  return t;
}

json inputs_json(const TaskInputs& in) {
  json doc{{"task", in.task}};
  if (!in.benchmark.empty()) doc["benchmark"] = fs::absolute(in.benchmark).string();
  if (!in.supernet.empty()) doc["supernet"] = fs::absolute(in.supernet).string();
  if (!in.data.empty()) doc["data"] = fs::absolute(in.data).string();
  if (!in.target.empty()) doc["target"] = in.target;
  return doc;
}

// ---------------------------------------------------------------------------
// Config overrides shared by search-like commands

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> rank;
  std::optional<std::size_t> iterations;
  std::optional<std::string> mode;
  std::optional<double> learning_rate;
};

void add_overrides(CLI::App* cmd, Overrides& ov) {
  cmd->add_option("--seed", ov.seed, "Override the config seed");
  cmd->add_option("--rank", ov.rank, "Override the uniform node rank");
  cmd->add_option("--iterations", ov.iterations, "Override the iteration count");
  cmd->add_option("--mode", ov.mode, "stochastic or deterministic");
  cmd->add_option("--learning-rate", ov.learning_rate, "Override the learning rate");
}

RunConfig resolve_config(const std::string& path, const Overrides& ov) {
  RunConfig cfg = load_run_config(path);
  if (ov.seed) cfg.search.seed = *ov.seed;
  if (ov.rank) {
    if (*ov.rank == 0) throw ConfigError("rank", "rank must be >= 1");
    cfg.rank = *ov.rank;
  }
  if (ov.iterations) cfg.search.iterations = *ov.iterations;
  if (ov.mode) cfg.search.mode = parse_mode(*ov.mode);
  if (ov.learning_rate) cfg.search.learning_rate = *ov.learning_rate;
  cfg.search.validate();
  return cfg;
}

void add_task_options(CLI::App* cmd, TaskInputs& in, bool with_task_flag) {
  if (with_task_flag) cmd->add_option("--task", in.task, "tabular or kg")->required();
  cmd->add_option("--benchmark", in.benchmark, "Benchmark CSV (tabular)");
  cmd->add_option("--supernet", in.supernet, "Supernet JSON (tabular, optional)");
  cmd->add_option("--data", in.data, "Dataset directory (kg)");
  cmd->add_option("--target", in.target, "Target relation (kg)");
}

// ---------------------------------------------------------------------------
// search

struct SearchArgs {
  TaskInputs inputs;
  std::string config;
  std::string manifest;
  std::string out = "run";
  Overrides ov;
};

json kg_metrics_json(const RankMetrics& m) {
  json doc{{"mrr", m.mrr}, {"queries", m.queries}};
  for (const auto& [k, v] : m.hits) doc["hits@" + std::to_string(k)] = v;
  return doc;
}

int run_search(SearchArgs args) {
  if (!args.manifest.empty()) {
    json m;
    try {
      m = json::parse(read_file(args.manifest));
    } catch (const json::parse_error& ex) {
      throw DataError(args.manifest + ": " + ex.what());
    }
    if (!m.contains("inputs") || !m.contains("config")) {
      throw DataError(args.manifest + ": not a run manifest");
    }
    const auto& in = m["inputs"];
    args.inputs.task = in.value("task", "tabular");
    args.inputs.benchmark = in.value("benchmark", "");
    args.inputs.supernet = in.value("supernet", "");
    args.inputs.data = in.value("data", "");
    args.inputs.target = in.value("target", "");
    const fs::path snap = fs::path(args.out) / "config.snapshot.json";
    fs::create_directories(args.out);
    write_file(snap, m["config"].dump(2));
    args.config = snap.string();
  }
  if (args.config.empty()) throw ConfigError("config", "--config is required");
  const RunConfig cfg = resolve_config(args.config, args.ov);
  LoadedTask task = load_task(args.inputs, cfg);

  const fs::path out(args.out);
  fs::create_directories(out);

  auto dist = init_distribution(task.supernet, RankMap::uniform(*task.supernet, cfg.rank),
                                InitSpec::gaussian(cfg.init_sd), cfg.search.seed, cfg.limits);
  OptimizerState state;
  SearchHooks hooks;
  std::vector<std::string> checkpoints;
  if (cfg.checkpoint_every > 0) {
    hooks.checkpoint_every = cfg.checkpoint_every;
    hooks.on_checkpoint = [&](std::size_t it, const TnDistribution& d, const OptimizerState& st) {
      const auto p = out / ("step_" + std::to_string(it) + ".ckpt");
      save_checkpoint(p.string(), make_checkpoint(d, st));
      checkpoints.push_back(p.string());
    };
  }
  const SearchReport report = search(dist, *task.evaluator, cfg.search, hooks, &state);

  json doc = to_json(report);
  doc["task"] = args.inputs.task;
  doc["best_index_labels"] = json::array();
  for (std::size_t t = 0; t < task.supernet->num_edges(); ++t) {
    doc["best_index_labels"].push_back(task.supernet->edge(t).choices[report.best_index[t]]);
  }
  json artifacts{{"report", (out / "report.json").string()},
                 {"trajectory", (out / "trajectory.csv").string()},
                 {"checkpoint", (out / "final.ckpt").string()}};

  if (task.bench) {
    doc["best_val"] = task.bench->val(report.best_index);
    doc["best_test"] = task.bench->best_test();
    doc["regret"] = task.bench->regret(report.best_index);
  } else {
    const auto& g = task.kg->graph;
    const auto& chain = *task.chain;
    const auto rule = rule_from_index(chain, report.best_index, dist.prob(report.best_index));
    doc["rule"] = rule_to_json(g, chain, rule);
    if (!chain.test.empty()) {
      const auto& eval = static_cast<const ChainEvaluator&>(*task.evaluator);
      doc["test_metrics"] = kg_metrics_json(eval.test_metrics(rule.relations));
    }
    const auto top = extract_top_rules(dist, chain, cfg.top_k);
    std::string lines;
    json rules = json::array();
    for (const auto& r : top) {
      lines += format_rule(g, chain, r) + "\n";
      rules.push_back(rule_to_json(g, chain, r));
    }
    write_file(out / "rules.txt", lines);
    write_file(out / "rules.json", rules.dump(2) + "\n");
    artifacts["rules"] = (out / "rules.txt").string();
    artifacts["rules_json"] = (out / "rules.json").string();
  }
  if (!checkpoints.empty()) artifacts["checkpoints"] = checkpoints;

  write_file(out / "report.json", doc.dump(2) + "\n");
  write_file(out / "trajectory.csv", trajectory_csv(report));
  save_checkpoint((out / "final.ckpt").string(), make_checkpoint(dist, state));

  json manifest{{"tool", "tnsupernet"},
                {"version", kToolVersion},
                {"command", "search"},
                {"config", to_json(cfg)},
                {"inputs", inputs_json(args.inputs)},
                {"supernet_hash", hex(task.supernet->hash())},
                {"dataset_hash", hex(task.dataset_hash)},
                {"seed", cfg.search.seed},
                {"artifacts", artifacts}};
  write_file(out / "manifest.json", manifest.dump(2) + "\n");

  std::cout << "best_index " << to_string(report.best_index) << " score " << report.best_score;
  if (task.bench) std::cout << " regret " << doc["regret"].get<double>();
  std::cout << "\n";
  return 0;
}

// ---------------------------------------------------------------------------
// ablate

struct AblateArgs {
  TaskInputs inputs;
  std::string config;
  std::string ranks = "1,2,3,4";
  std::string encodings;
  std::size_t seeds = 5;
  std::string out;
  Overrides ov;
};

int run_ablate(const AblateArgs& args) {
  const RunConfig cfg = resolve_config(args.config, args.ov);
  const LoadedTask task = load_task(args.inputs, cfg);

  struct Variant {
    std::string name;
    std::size_t rank;
  };
  std::vector<Variant> variants;
  if (!args.encodings.empty()) {
    std::stringstream in(args.encodings);
    std::string item;
    while (std::getline(in, item, ',')) {
      if (item == "rank1") {
        variants.push_back({"rank1", 1});
      } else if (item == "trace") {
        variants.push_back({"trace", cfg.rank});
      } else {
        throw ConfigError("encodings", "unknown encoding '" + item + "' (rank1, trace)");
      }
    }
  } else {
    for (auto r : parse_list(args.ranks, "ranks")) {
      if (r == 0) throw ConfigError("ranks", "ranks must be >= 1");
      variants.push_back({"rank" + std::to_string(r), r});
    }
  }
  if (variants.empty()) throw ConfigError("ranks", "no variants to run");
  if (args.seeds == 0) throw ConfigError("seeds", "--seeds must be >= 1");

  struct Job {
    std::size_t variant;
    std::uint64_t seed;
    double score = 0.0;
  };
  std::vector<Job> jobs;
  for (std::size_t v = 0; v < variants.size(); ++v)
    for (std::uint64_t s = 0; s < args.seeds; ++s) jobs.push_back({v, cfg.search.seed + s});

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  auto worker = [&] {
    for (std::size_t k = next++; k < jobs.size(); k = next++) {
      try {
        auto& job = jobs[k];
        SearchConfig sc = cfg.search;
        sc.seed = job.seed;
        auto dist = init_distribution(task.supernet,
                                      RankMap::uniform(*task.supernet, variants[job.variant].rank),
                                      InitSpec::gaussian(cfg.init_sd), job.seed, cfg.limits);
        job.score = search(dist, *task.evaluator, sc).best_score;
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t n = std::min(worker_count(), jobs.size());
  for (std::size_t w = 0; w < n; ++w) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  std::ostringstream csv;
  csv << "variant,seed,final_score\n";
  char buf[32];
  for (const auto& j : jobs) {
    std::snprintf(buf, sizeof buf, "%.17g", j.score);
    csv << variants[j.variant].name << ',' << j.seed << ',' << buf << '\n';
  }
  if (args.out.empty()) {
    std::cout << csv.str();
  } else {
    if (fs::path(args.out).has_parent_path()) fs::create_directories(fs::path(args.out).parent_path());
    write_file(args.out, csv.str());
  }
  return 0;
}

// ---------------------------------------------------------------------------
// verify

struct VerifyArgs {
  std::string supernet;
  std::string topology = "chain";
  std::size_t edges = 3;
  std::size_t choices = 3;
  SelfCheckOptions options;
};

Supernet make_topology(const std::string& topology, std::size_t edges, std::size_t choices) {
  if (edges == 0) throw ConfigError("edges", "--edges must be >= 1");
  if (choices == 0) throw ConfigError("choices", "--choices must be >= 1");
  if (topology == "chain") return make_chain(edges, choices);
  if (topology == "ring") return make_ring(edges, choices);
  if (topology == "star") return make_star(edges, choices);
  throw ConfigError("topology", "--topology must be chain, ring or star");
}

int run_verify(const VerifyArgs& args) {
  auto s = std::make_shared<const Supernet>(
      args.supernet.empty() ? make_topology(args.topology, args.edges, args.choices)
                            : load_supernet_file(args.supernet));
  if (args.options.rank == 0) throw ConfigError("rank", "--rank must be >= 1");
  const auto results = self_check(s, args.options);
  bool ok = true;
  for (const auto& r : results) {
    std::printf("%-20s residual %.3e  tolerance %.0e  %s\n", r.name.c_str(), r.residual,
                r.tolerance, r.passed ? "ok" : "FAILED");
    ok = ok && r.passed;
  }
  if (!ok) {
    for (const auto& r : results) {
      if (!r.passed) throw NumericalError("self-check '" + r.name + "' failed");
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// tabular generate / regret

struct GenerateArgs {
  std::string supernet;
  std::string topology = "chain";
  std::size_t edges = 3;
  std::size_t choices = 5;
  std::string planted;
  double gap = 0.3;
  double noise = 0.0;
  double pairwise = 0.0;
  std::uint64_t seed = 0;
  std::string out;
  std::string supernet_out;
};

int run_generate(const GenerateArgs& args) {
  auto s = std::make_shared<const Supernet>(
      args.supernet.empty() ? make_topology(args.topology, args.edges, args.choices)
                            : load_supernet_file(args.supernet));
  SyntheticSpec spec;
  spec.supernet = s;
  spec.gap = args.gap;
  spec.noise_sd = args.noise;
  spec.pairwise_strength = args.pairwise;
  spec.seed = args.seed;
  if (args.planted.empty()) {
    std::mt19937_64 rng(args.seed);
    for (std::size_t t = 0; t < s->num_edges(); ++t) {
      spec.planted.picks.push_back(
          std::uniform_int_distribution<std::size_t>(0, s->edge(t).num_choices() - 1)(rng));
    }
  } else {
    spec.planted = parse_index(args.planted);
  }
  s->validate(spec.planted);
  const auto bench = generate_synthetic(spec);
  write_file(args.out, benchmark_csv(bench));
  if (!args.supernet_out.empty()) write_file(args.supernet_out, to_json(*s).dump(2) + "\n");
  std::cout << "planted " << to_string(spec.planted) << "\n";
  return 0;
}

int run_regret(const std::string& benchmark, const std::string& supernet, const std::string& index) {
  std::shared_ptr<const Supernet> s;
  if (!supernet.empty()) s = std::make_shared<const Supernet>(load_supernet_file(supernet));
  const auto b = load_benchmark_csv(benchmark, s);
  const auto idx = parse_index(index);
  b.supernet->validate(idx);
  std::printf("index %s val %.17g test %.17g best_test %.17g regret %.17g\n", to_string(idx).c_str(),
              b.val(idx), b.test(idx), b.best_test(), b.regret(idx));
  return 0;
}

// ---------------------------------------------------------------------------
// kg synth / eval / rules

struct SynthArgs {
  PlantedKgSpec spec;
  std::string rule = "1,2";
  std::string out;
};

int run_synth(SynthArgs args) {
  args.spec.rule.clear();
  for (auto r : parse_list(args.rule, "rule")) {
    if (r == 0) throw ConfigError("rule", "--rule uses 1-based relation numbers");
    args.spec.rule.push_back(r - 1);
  }
  const auto kg = generate_planted_kg(args.spec);
  write_dataset(args.out, kg.data);
  std::cout << "entities " << kg.data.graph.num_entities() << " train " << kg.task.train.size()
            << " valid " << kg.task.valid.size() << " test " << kg.task.test.size() << "\n";
  return 0;
}

std::vector<std::size_t> parse_rule_names(const RelationalGraph& g, const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item == "id" || item == "identity") {
      out.push_back(kIdentityRelation);
      continue;
    }
    const auto id = g.relations.find(item);
    if (!id) throw DataError("unknown relation '" + item + "'");
    out.push_back(*id);
  }
  if (out.empty()) throw ConfigError("rule", "--rule is empty");
  return out;
}

int run_kg_eval(const std::string& data_dir, const std::string& target, const std::string& rule,
                const std::string& split, bool raw) {
  auto data = std::make_shared<const KgDataset>(load_dataset(data_dir));
  auto task = make_chain_task(*data, target);
  const auto relations = parse_rule_names(data->graph, rule);
  std::vector<EntityPair> known = task.train;
  known.insert(known.end(), task.valid.begin(), task.valid.end());
  known.insert(known.end(), task.test.begin(), task.test.end());
  const auto& queries = split == "valid" ? task.valid : split == "train" ? task.train : task.test;
  const auto& g = data->graph;
  const auto m = rank_metrics(
      g.num_entities(), [&](std::size_t x) { return chain_row(g, relations, x); }, queries, known,
      {1, 3, 10}, !raw);
  json doc = kg_metrics_json(m);
  doc["split"] = split;
  doc["filtered"] = !raw;
  doc["hard_measure_train"] = hard_measure(g, relations, task.train);
  std::cout << doc.dump() << "\n";
  return 0;
}

int run_kg_rules(const std::string& data_dir, const std::string& checkpoint,
                 const std::string& config, std::size_t top_k) {
  RunConfig cfg;
  if (!config.empty()) cfg = load_run_config(config);
  auto data = std::make_shared<const KgDataset>(load_dataset(data_dir));
  ChainTaskOptions opts;
  opts.chain_length = cfg.chain_length;
  opts.include_identity = cfg.identity;
  const auto task = make_chain_task(*data, cfg.target, opts);
  auto s = std::make_shared<const Supernet>(chain_supernet(data->graph, task));
  const auto dist = restore(load_checkpoint(checkpoint), s, cfg.limits);
  for (const auto& r : extract_top_rules(dist, task, top_k)) {
    std::cout << format_rule(data->graph, task, r) << "\n";
  }
  return 0;
}

// ---------------------------------------------------------------------------

int report_error(int code, const char* kind, const std::string& key, const std::string& what) {
  std::string msg = what;
  std::replace(msg.begin(), msg.end(), '\n', ' ');
  std::replace(msg.begin(), msg.end(), '"', '\'');
  std::cerr << "error code=" << code << " kind=" << kind;
  if (!key.empty()) std::cerr << " key=" << key;
  std::cerr << " message=\"" << msg << "\"\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tensor-network subgraph search over supernets"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  SearchArgs search_args;
  auto* search_cmd = app.add_subcommand("search", "Run a subgraph search and write its artifacts");
  search_cmd->add_option("--task", search_args.inputs.task, "tabular or kg");
  add_task_options(search_cmd, search_args.inputs, false);
  search_cmd->add_option("--config", search_args.config, "Run config (JSON)");
  search_cmd->add_option("--manifest", search_args.manifest, "Re-run from a manifest");
  search_cmd->add_option("--out", search_args.out, "Output directory");
  add_overrides(search_cmd, search_args.ov);

  AblateArgs ablate_args;
  auto* ablate_cmd = app.add_subcommand("ablate", "Sweep ranks or encodings over seeds");
  add_task_options(ablate_cmd, ablate_args.inputs, true);
  ablate_cmd->add_option("--config", ablate_args.config, "Run config (JSON)")->required();
  ablate_cmd->add_option("--ranks", ablate_args.ranks, "Comma-separated rank list");
  ablate_cmd->add_option("--encodings", ablate_args.encodings, "rank1,trace");
  ablate_cmd->add_option("--seeds", ablate_args.seeds, "Seeds per variant");
  ablate_cmd->add_option("--out", ablate_args.out, "CSV path (default stdout)");
  add_overrides(ablate_cmd, ablate_args.ov);

  VerifyArgs verify_args;
  auto* verify_cmd = app.add_subcommand("verify", "Numerical self-check of the encoding");
  verify_cmd->add_option("--supernet", verify_args.supernet, "Supernet JSON");
  verify_cmd->add_option("--topology", verify_args.topology, "chain, ring or star");
  verify_cmd->add_option("--edges", verify_args.edges, "Number of edges");
  verify_cmd->add_option("--choices", verify_args.choices, "Choices per edge");
  verify_cmd->add_option("--rank", verify_args.options.rank, "Uniform node rank");
  verify_cmd->add_option("--seed", verify_args.options.seed, "Seed for random parameters");
  verify_cmd->add_flag("--corrupt-gradient", verify_args.options.corrupt_gradient)->group("");

  auto* tabular_cmd = app.add_subcommand("tabular", "Tabular benchmark utilities");
  tabular_cmd->require_subcommand(1);
  GenerateArgs gen_args;
  auto* gen_cmd = tabular_cmd->add_subcommand("generate", "Write a synthetic planted benchmark");
  gen_cmd->add_option("--supernet", gen_args.supernet, "Supernet JSON");
  gen_cmd->add_option("--topology", gen_args.topology, "chain, ring or star");
  gen_cmd->add_option("--edges", gen_args.edges, "Number of edges");
  gen_cmd->add_option("--choices", gen_args.choices, "Choices per edge");
  gen_cmd->add_option("--planted", gen_args.planted, "Planted index, e.g. 1,3,2");
  gen_cmd->add_option("--gap", gen_args.gap, "Score gap of the planted index");
  gen_cmd->add_option("--noise", gen_args.noise, "Gaussian noise sd");
  gen_cmd->add_option("--pairwise", gen_args.pairwise, "Bonus for agreeing adjacent edges");
  gen_cmd->add_option("--seed", gen_args.seed, "Seed");
  gen_cmd->add_option("--out", gen_args.out, "Benchmark CSV path")->required();
  gen_cmd->add_option("--supernet-out", gen_args.supernet_out, "Also write the supernet JSON");
  SearchArgs tab_search;
  auto* tab_search_cmd = tabular_cmd->add_subcommand("search", "search --task tabular");
  add_task_options(tab_search_cmd, tab_search.inputs, false);
  tab_search_cmd->add_option("--config", tab_search.config, "Run config (JSON)")->required();
  tab_search_cmd->add_option("--out", tab_search.out, "Output directory");
  add_overrides(tab_search_cmd, tab_search.ov);
  std::string regret_bench, regret_supernet, regret_index;
  auto* regret_cmd = tabular_cmd->add_subcommand("regret", "Regret of an index");
  regret_cmd->add_option("--benchmark", regret_bench, "Benchmark CSV")->required();
  regret_cmd->add_option("--supernet", regret_supernet, "Supernet JSON");
  regret_cmd->add_option("--index", regret_index, "Index, e.g. 1,3,2")->required();

  auto* kg_cmd = app.add_subcommand("kg", "Knowledge-graph chain rule utilities");
  kg_cmd->require_subcommand(1);
  SynthArgs synth_args;
  auto* synth_cmd = kg_cmd->add_subcommand("synth", "Write a planted-rule dataset");
  synth_cmd->add_option("--out", synth_args.out, "Dataset directory")->required();
  synth_cmd->add_option("--entities", synth_args.spec.num_entities, "Entity count");
  synth_cmd->add_option("--relations", synth_args.spec.num_relations, "Base relation count");
  synth_cmd->add_option("--rule", synth_args.rule, "Planted chain, 1-based relation numbers");
  synth_cmd->add_option("--out-degree", synth_args.spec.out_degree, "Out-degree per relation");
  synth_cmd->add_option("--coverage", synth_args.spec.coverage, "Fraction of implied pairs kept");
  synth_cmd->add_option("--noise", synth_args.spec.noise, "Fraction of corrupted target facts");
  synth_cmd->add_option("--seed", synth_args.spec.seed, "Seed");
  SearchArgs kg_search;
  kg_search.inputs.task = "kg";
  auto* kg_search_cmd = kg_cmd->add_subcommand("search", "search --task kg");
  add_task_options(kg_search_cmd, kg_search.inputs, false);
  kg_search_cmd->add_option("--config", kg_search.config, "Run config (JSON)")->required();
  kg_search_cmd->add_option("--out", kg_search.out, "Output directory");
  add_overrides(kg_search_cmd, kg_search.ov);
  std::string eval_data, eval_target = "target", eval_rule, eval_split = "test";
  bool eval_raw = false;
  auto* eval_cmd = kg_cmd->add_subcommand("eval", "MRR and Hits@k of a fixed rule");
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--target", eval_target, "Target relation");
  eval_cmd->add_option("--rule", eval_rule, "Relation names, e.g. r1,r2")->required();
  eval_cmd->add_option("--split", eval_split, "train, valid or test")
      ->check(CLI::IsMember({"train", "valid", "test"}));
  eval_cmd->add_flag("--raw", eval_raw, "Unfiltered ranking");
  std::string rules_data, rules_ckpt, rules_config;
  std::size_t rules_k = 5;
  auto* rules_cmd = kg_cmd->add_subcommand("rules", "Top rules of a checkpoint");
  rules_cmd->add_option("--data", rules_data, "Dataset directory")->required();
  rules_cmd->add_option("--checkpoint", rules_ckpt, "Checkpoint file")->required();
  rules_cmd->add_option("--config", rules_config, "Run config used for the search");
  rules_cmd->add_option("--top-k", rules_k, "Number of rules");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(1, "usage", "", e.what());
  }

  try {
    if (*search_cmd) return run_search(search_args);
    if (*ablate_cmd) return run_ablate(ablate_args);
    if (*verify_cmd) return run_verify(verify_args);
    if (*gen_cmd) return run_generate(gen_args);
    if (*tab_search_cmd) {
      tab_search.inputs.task = "tabular";
      return run_search(tab_search);
    }
    if (*regret_cmd) return run_regret(regret_bench, regret_supernet, regret_index);
    if (*synth_cmd) return run_synth(synth_args);
    if (*kg_search_cmd) return run_search(kg_search);
    if (*eval_cmd) return run_kg_eval(eval_data, eval_target, eval_rule, eval_split, eval_raw);
    if (*rules_cmd) return run_kg_rules(rules_data, rules_ckpt, rules_config, rules_k);
  } catch (const ConfigError& e) {
    return report_error(1, "config", e.key(), e.what());
  } catch (const CapExceeded& e) {
    return report_error(1, "cap", "", e.what());
  } catch (const DataError& e) {
    return report_error(2, "data", "", e.what());
  } catch (const NumericalError& e) {
    return report_error(3, "numerical", "", e.what());
  } catch (const fs::filesystem_error& e) {
    return report_error(2, "data", "", e.what());
  } catch (const std::exception& e) {
    return report_error(2, "runtime", "", e.what());
  }
  return 0;
}
