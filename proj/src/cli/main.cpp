#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "manifest.hpp"
#include "treesmu/equation_io.hpp"
#include "treesmu/errors.hpp"
#include "treesmu/eval.hpp"
#include "treesmu/model.hpp"
#include "treesmu/splits.hpp"
#include "treesmu/training.hpp"

namespace fs = std::filesystem;
using namespace treesmu;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
};

struct EvalOptions {
  std::string checkpoint;
  std::string test;
  std::string mode = "verify";
  int depth_lo = 0;
  int depth_hi = 1 << 30;
  std::vector<std::size_t> ks{1, 5, 10, 20, 50};
  std::string match = "oracle";
  std::size_t pool_cap = 2000;
  double tau = 0.001;
};

std::optional<fs::path> env_path(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return fs::path(v);
}

// Relative data files (eval --test, train/validation in configs) resolve against
// TREESMU_DATA when it is set.
fs::path data_path(const std::string& p) {
  fs::path path(p);
  if (path.is_relative()) {
    if (auto base = env_path("TREESMU_DATA")) return *base / path;
  }
  return path;
}

fs::path out_dir(const Globals& g) {
  if (!g.out.empty()) return g.out;
  if (auto env = env_path("TREESMU_OUT")) return *env;
  throw ConfigError("no output directory: pass --out or set TREESMU_OUT");
}

nlohmann::json load_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path.string() + ": invalid JSON: " + e.what());
  }
}

fs::path config_base(const fs::path& config) {
  if (auto base = env_path("TREESMU_DATA")) return *base;
  return config.parent_path();
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

int run_generate(const Globals& g, const std::string& config_file) {
  const fs::path config_path = fs::path(config_file);
  auto config = datagen::DatasetConfig::from_json(load_json(config_path));
  if (g.seed) {
    config.trainval.seed = *g.seed;
    config.test.seed = *g.seed + 1;
  }
  const fs::path dir = out_dir(g);
  const auto summary = datagen::generate_dataset(config, dir, g.jobs);
  for (const auto& w : summary.warnings) std::cerr << "warning: " << w << "\n";
  cli::RunManifest m{"generate", config.to_json(), {config.trainval.seed, config.test.seed},
                     {config_path}, summary.files};
  nlohmann::json j = m.to_json();
  j["dataset"] = summary.manifest;
  std::filesystem::create_directories(dir);
  write_json(dir / "manifest.json", j);
  std::cout << summary.manifest.dump(2) << "\n";
  return 0;
}

training::TrainConfig load_train_config(const Globals& g, const fs::path& config_path) {
  auto config = training::TrainConfig::from_json(load_json(config_path), config_base(config_path));
  if (g.seed) config.seeds = {*g.seed};
  return config;
}

int run_train(const Globals& g, const std::string& config_file) {
  const fs::path config_path = fs::path(config_file);
  const auto config = load_train_config(g, config_path);
  const fs::path dir = out_dir(g);
  std::vector<training::RunRecord> runs;
  std::vector<fs::path> outputs;
  for (auto seed : config.seeds) {
    const fs::path run_dir = dir / ("seed_" + std::to_string(seed));
    runs.push_back(training::train(config, seed, run_dir));
    outputs.push_back(run_dir);
    std::cerr << "seed " << seed << ": best validation accuracy "
              << runs.back().best_validation_accuracy << " at epoch " << runs.back().best_epoch
              << "\n";
  }
  std::size_t best = 0;
  for (std::size_t i = 1; i < runs.size(); ++i) {
    if (runs[i].best_validation_accuracy > runs[best].best_validation_accuracy) best = i;
  }
  fs::copy_file(runs[best].best_checkpoint, dir / "best.ckpt", fs::copy_options::overwrite_existing);
  outputs.push_back(dir / "best.ckpt");

  std::vector<double> accs;
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : runs) {
    accs.push_back(r.best_validation_accuracy);
    records.push_back(r.to_json());
  }
  const double mean = std::accumulate(accs.begin(), accs.end(), 0.0) / static_cast<double>(accs.size());
  double ss = 0;
  for (double a : accs) ss += (a - mean) * (a - mean);
  const double sd = accs.size() > 1 ? std::sqrt(ss / static_cast<double>(accs.size() - 1)) : 0.0;
  const nlohmann::json summary = {{"config_hash", config.hash()},
                                  {"mean_validation_accuracy", mean},
                                  {"sd_validation_accuracy", sd},
                                  {"best_seed", runs[best].seed},
                                  {"runs", records}};
  write_json(dir / "runs.json", summary);
  outputs.push_back(dir / "runs.json");
  cli::RunManifest m{"train", config.to_json(), config.seeds,
                     {config_path, config.train_path, config.validation_path}, outputs};
  m.write(dir);
  std::cout << nlohmann::json{{"mean_validation_accuracy", mean},
                              {"sd_validation_accuracy", sd},
                              {"best_checkpoint", (dir / "best.ckpt").string()}}
                   .dump(2)
            << "\n";
  return 0;
}

int run_grid(const Globals& g, const std::string& config_file) {
  const fs::path config_path = fs::path(config_file);
  const auto config = load_train_config(g, config_path);
  const fs::path dir = out_dir(g);
  const auto result = training::grid_search(config, dir, g.jobs);
  nlohmann::json best = nlohmann::json::object();
  for (const auto& [arch, entry] : result.best) {
    best[std::string(cells::architecture_name(arch))] = entry.to_json();
  }
  cli::RunManifest m{"grid", config.to_json(), config.seeds,
                     {config_path, config.train_path, config.validation_path},
                     {dir / "leaderboard.json"}};
  m.write(dir);
  std::cout << best.dump(2) << "\n";
  return 0;
}

int run_eval(const Globals& g, const EvalOptions& o) {
  const fs::path checkpoint = fs::path(o.checkpoint);
  const fs::path test = data_path(o.test);
  const fs::path dir = out_dir(g);
  const auto model = cells::Model::load(checkpoint);
  fs::create_directories(dir);

  nlohmann::json options = {{"mode", o.mode}, {"checkpoint", checkpoint.string()},
                            {"test", test.string()}};
  nlohmann::json result;
  std::vector<fs::path> outputs;
  if (o.mode == "verify") {
    const auto equations = expr::read_equations(test);
    const auto metrics = eval::verify(eval::model_scorer(model), equations, o.depth_lo, o.depth_hi);
    metrics.write_csv(dir / "metrics.csv");
    result = metrics.to_json();
    write_json(dir / "metrics.json", result);
    outputs = {dir / "metrics.csv", dir / "metrics.json"};
    options["depth_lo"] = o.depth_lo;
    options["depth_hi"] = o.depth_hi;
  } else if (o.mode == "complete") {
    if (o.match != "oracle" && o.match != "gold") {
      throw ConfigError("--match must be 'oracle' or 'gold'");
    }
    const auto items = expr::read_completion_items(test);
    eval::CompletionConfig cfg;
    cfg.ks = o.ks;
    cfg.pool_cap = o.pool_cap;
    cfg.pool_seed = g.seed.value_or(0);
    cfg.match = o.match == "gold" ? eval::MatchMode::Gold : eval::MatchMode::Oracle;
    const auto pool = eval::candidate_pool(model.vocab(), cfg.pool_cap, cfg.pool_seed);
    const auto r = eval::run_completion(eval::model_scorer(model), items, pool, cfg);
    r.write_csv(dir / "completion.csv");
    result = r.to_json();
    write_json(dir / "completion.json", result);
    outputs = {dir / "completion.csv", dir / "completion.json"};
    options["k"] = o.ks;
    options["match"] = o.match;
    options["pool_cap"] = o.pool_cap;
    options["pool_seed"] = cfg.pool_seed;
  } else if (o.mode == "probe") {
    if (!model.config().has_stack()) throw ContractError("architecture has no stack");
    const auto equations = expr::read_equations(test);
    const auto r = eval::stack_usage_probe(model, equations, o.tau);
    r.write_csv(dir / "probe.csv");
    result = r.to_json();
    write_json(dir / "probe.json", result);
    outputs = {dir / "probe.csv", dir / "probe.json"};
    options["tau"] = o.tau;
  } else if (o.mode == "embed") {
    const auto items = datagen::read_classed_expressions(test);
    eval::export_embeddings(model, items, dir / "embeddings.csv");
    result = {{"rows", items.size()}, {"file", (dir / "embeddings.csv").string()}};
    outputs = {dir / "embeddings.csv"};
  } else {
    throw ConfigError("unknown mode '" + o.mode + "' (verify, complete, probe, embed)");
  }
  cli::RunManifest m{o.mode == "verify" ? "eval" : o.mode, options,
                     g.seed ? std::vector<std::uint64_t>{*g.seed} : std::vector<std::uint64_t>{},
                     {checkpoint, test}, outputs};
  m.write(dir);
  std::cout << result.dump(2) << "\n";
  return 0;
}

void add_eval_options(CLI::App* cmd, EvalOptions& o, bool with_mode) {
  cmd->add_option("--checkpoint", o.checkpoint, "model checkpoint (.ckpt)")->required();
  cmd->add_option("--test", o.test, "equations, completion items or classed expressions")
      ->required();
  if (with_mode) {
    cmd->add_option("--mode", o.mode, "verify, complete, probe or embed")
        ->check(CLI::IsMember({"verify", "complete", "probe", "embed"}));
  }
  cmd->add_option("--depth-lo", o.depth_lo, "verify: smallest equation depth");
  cmd->add_option("--depth-hi", o.depth_hi, "verify: largest equation depth");
  cmd->add_option("--k", o.ks, "complete: K values")->delimiter(',');
  cmd->add_option("--match", o.match, "complete: oracle or gold");
  cmd->add_option("--pool-cap", o.pool_cap, "complete: candidate pool size");
  cmd->add_option("--tau", o.tau, "probe: row norm threshold");
}

int report(const char* kind, const std::string& message, int code) {
  std::cerr << "error: " << kind << ": " << message << "\n";
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tree-structured stack memory models for symbolic equation verification"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "seed override");
  app.add_option("--jobs", g.jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out", g.out, "output directory (default: $TREESMU_OUT)");

  std::string config;
  auto* generate = app.add_subcommand("generate", "generate the dataset and splits");
  generate->add_option("--config", config, "dataset config JSON")->required();
  auto* train = app.add_subcommand("train", "train one model per seed");
  train->add_option("--config", config, "training config JSON")->required();
  auto* grid = app.add_subcommand("grid", "grid search over hidden size, dropout and stack size");
  grid->add_option("--config", config, "training config JSON")->required();

  EvalOptions eval_opts;
  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  add_eval_options(eval, eval_opts, true);
  auto* complete = app.add_subcommand("complete", "equation completion (eval --mode complete)");
  add_eval_options(complete, eval_opts, false);
  auto* probe = app.add_subcommand("probe", "stack usage probe (eval --mode probe)");
  add_eval_options(probe, eval_opts, false);
  auto* embed = app.add_subcommand("embed", "export root embeddings (eval --mode embed)");
  add_eval_options(embed, eval_opts, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report("usage", e.what(), 2);
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*generate) return run_generate(g, config);
    if (*train) return run_train(g, config);
    if (*grid) return run_grid(g, config);
    if (*complete) eval_opts.mode = "complete";
    if (*probe) eval_opts.mode = "probe";
    if (*embed) eval_opts.mode = "embed";
    return run_eval(g, eval_opts);
  } catch (const ConfigError& e) {
    return report("config", e.what(), 2);
  } catch (const ParseError& e) {
    return report("parse", e.what(), 3);
  } catch (const DataError& e) {
    return report("data", e.what(), 3);
  } catch (const DimensionError& e) {
    return report("dimension", e.what(), 3);
  } catch (const ContractError& e) {
    return report("contract", e.what(), 4);
  } catch (const TrainingError& e) {
    return report("training", e.what(), 5);
  } catch (const fs::filesystem_error& e) {
    return report("io", e.what(), 3);
  } catch (const std::exception& e) {
    return report("internal", e.what(), 1);
  }
}
