#include "treesmu/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "treesmu/checkpoint.hpp"
#include "treesmu/equation_io.hpp"
#include "treesmu/errors.hpp"
#include "treesmu/graph.hpp"

namespace treesmu::training {
namespace {

using cells::Architecture;
using expr::Equation;
using expr::Label;

double label_value(Label l) { return l == Label::Correct ? 1.0 : 0.0; }

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// BCE of a single logit, same log-sum-exp form as the graph op.
double bce(double z, double y) {
  return std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t a, std::uint64_t b, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(a),    static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b),    static_cast<std::uint32_t>(b >> 32),
                    tag};
  return std::mt19937_64(seq);
}

std::string fnv_hex(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

const char* batching_name(BatchMode m) { return m == BatchMode::Shape ? "shape" : "accumulate"; }

template <class T>
std::vector<T> positive_list(const nlohmann::json& j, const char* what) {
  auto v = j.get<std::vector<T>>();
  if (v.empty()) throw ConfigError(std::string("grid ") + what + " is empty");
  return v;
}

struct EpochAccumulator {
  Confusion confusion;
  std::vector<double> losses;

  void add(double z, Label gold) {
    confusion.add(decide(sigmoid(z)), gold);
    losses.push_back(bce(z, label_value(gold)));
  }
  EpochMetrics finish(std::size_t epoch, const char* split) {
    EpochMetrics m{epoch, split, confusion.accuracy(), confusion.precision(), confusion.recall()};
    if (!losses.empty()) {
      m.loss = std::accumulate(losses.begin(), losses.end(), 0.0) / static_cast<double>(losses.size());
      const auto mid = losses.begin() + static_cast<std::ptrdiff_t>(losses.size() / 2);
      std::nth_element(losses.begin(), mid, losses.end());
      m.median_loss = *mid;
      if (losses.size() % 2 == 0) m.median_loss = (m.median_loss + *std::max_element(losses.begin(), mid)) / 2;
    }
    return m;
  }
};

[[noreturn]] void non_finite(const Equation& eq, std::size_t index) {
  throw TrainingError("non-finite loss on training equation " + std::to_string(index) + ": " +
                      eq.key());
}

class Trainer {
 public:
  Trainer(const TrainConfig& config, std::uint64_t seed, std::span<const Equation> train_set,
          cells::Model& model)
      : config_(config), seed_(seed), train_(train_set), model_(model),
        grads_(model.params().size()) {}

  EpochMetrics epoch(std::size_t e) {
    std::vector<std::size_t> order(train_.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = stream(seed_, e, 0, 0x5f);
    std::shuffle(order.begin(), order.end(), rng);

    EpochAccumulator acc;
    for (std::size_t start = 0; start < order.size(); start += config_.batch_size) {
      const std::size_t end = std::min(order.size(), start + config_.batch_size);
      const std::span<const std::size_t> batch(order.data() + start, end - start);
      grads_.clear();
      if (config_.batching == BatchMode::Shape) {
        shape_batch(e, batch, acc);
      } else {
        for (std::size_t idx : batch) single(e, idx, acc);
      }
      grads_.scale(1.0 / static_cast<double>(batch.size()));
      ad::adam_step(model_.params(), grads_, config_.adam, model_.params().step() + 1);
    }
    return acc.finish(e, "train");
  }

 private:
  void single(std::size_t e, std::size_t idx, EpochAccumulator& acc) {
    const Equation& eq = train_[idx];
    auto rng = stream(seed_, e, idx, 0xd0);
    cells::DropoutSource dropout(model_.config().dropout, {&rng});
    ad::Graph g(model_.params());
    const Equation* one[] = {&eq};
    const ad::NodeId z = model_.logits(g, one, &dropout);
    const ad::NodeId loss = g.bce_loss(z, {label_value(eq.label)});
    if (!std::isfinite(g.value(loss)[0])) non_finite(eq, idx);
    acc.add(g.value(z)[0], eq.label);
    g.backward(loss, grads_);
  }

  void shape_batch(std::size_t e, std::span<const std::size_t> batch, EpochAccumulator& acc) {
    std::vector<std::string> keys;
    std::unordered_map<std::string, std::vector<std::size_t>> groups;
    for (std::size_t idx : batch) {
      std::string key = expr::shape_key(*train_[idx].tree());
      auto [it, inserted] = groups.try_emplace(key);
      if (inserted) keys.push_back(key);
      it->second.push_back(idx);
    }
    for (const auto& key : keys) {
      const auto& members = groups.at(key);
      std::vector<std::mt19937_64> rngs;
      rngs.reserve(members.size());
      std::vector<const Equation*> eqs;
      std::vector<double> labels;
      for (std::size_t idx : members) {
        rngs.push_back(stream(seed_, e, idx, 0xd0));
        eqs.push_back(&train_[idx]);
        labels.push_back(label_value(train_[idx].label));
      }
      std::vector<std::mt19937_64*> ptrs;
      for (auto& r : rngs) ptrs.push_back(&r);
      cells::DropoutSource dropout(model_.config().dropout, ptrs);
      ad::Graph g(model_.params());
      const ad::NodeId z = model_.logits(g, eqs, &dropout);
      const ad::NodeId loss = g.bce_loss(z, labels);
      if (!std::isfinite(g.value(loss)[0])) {
        for (std::size_t b = 0; b < members.size(); ++b) {
          if (!std::isfinite(g.value(z)[b])) non_finite(*eqs[b], members[b]);
        }
        non_finite(*eqs[0], members[0]);
      }
      for (std::size_t b = 0; b < members.size(); ++b) acc.add(g.value(z)[b], eqs[b]->label);
      g.backward(loss, grads_);
    }
  }

  const TrainConfig& config_;
  std::uint64_t seed_;
  std::span<const Equation> train_;
  cells::Model& model_;
  ad::GradMap grads_;
};

void write_run_json(const std::filesystem::path& path, const RunRecord& record) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << record.to_json().dump(2) << "\n";
}

double mean(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sample_sd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

std::string point_name(const cells::ModelConfig& m) {
  std::ostringstream out;
  out << cells::architecture_name(m.architecture) << "_n" << m.n << "_d" << m.dropout;
  if (m.has_stack()) out << "_p" << m.p << "_k" << m.k;
  return out.str();
}

}  // namespace

void TrainConfig::validate() const {
  model.validate();
  if (adam.learning_rate <= 0) throw ConfigError("learning_rate must be positive");
  if (adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 || adam.beta2 >= 1) {
    throw ConfigError("Adam betas must be in [0, 1)");
  }
  if (adam.weight_decay < 0) throw ConfigError("weight_decay must be non-negative");
  if (adam.epsilon <= 0) throw ConfigError("epsilon must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (max_epochs == 0) throw ConfigError("max_epochs must be positive");
  if (seeds.empty()) throw ConfigError("seeds must not be empty");
  if (!(subsample > 0 && subsample <= 1)) throw ConfigError("subsample must be in (0, 1]");
  if (grid.hidden.empty() || grid.dropout.empty() || grid.stack.empty()) {
    throw ConfigError("grid lists must not be empty");
  }
  for (auto n : grid.hidden) {
    if (n == 0) throw ConfigError("grid hidden sizes must be positive");
  }
  for (auto p : grid.stack) {
    if (p == 0) throw ConfigError("grid stack sizes must be positive");
  }
  for (double d : grid.dropout) {
    if (d < 0 || d >= 1) throw ConfigError("grid dropout rates must be in [0, 1)");
  }
}

nlohmann::json TrainConfig::to_json() const {
  nlohmann::json archs = nlohmann::json::array();
  for (auto a : grid.architectures) archs.push_back(std::string(cells::architecture_name(a)));
  return {{"model", model.to_json()},
          {"optimizer",
           {{"learning_rate", adam.learning_rate},
            {"beta1", adam.beta1},
            {"beta2", adam.beta2},
            {"weight_decay", adam.weight_decay},
            {"epsilon", adam.epsilon}}},
          {"batch_size", batch_size},
          {"max_epochs", max_epochs},
          {"patience", patience},
          {"seeds", seeds},
          {"batching", batching_name(batching)},
          {"train", train_path.string()},
          {"validation", validation_path.string()},
          {"subsample", subsample},
          {"train_metrics", full_train_metrics ? "full" : "running"},
          {"grid",
           {{"hidden", grid.hidden},
            {"dropout", grid.dropout},
            {"stack", grid.stack},
            {"architectures", archs}}}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("training config must be a JSON object");
  static const char* const kKeys[] = {"model",    "optimizer", "batch_size", "max_epochs",
                                      "patience", "seeds",     "batching",   "train",
                                      "validation", "subsample", "train_metrics", "grid"};
  for (const auto& [key, v] : j.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys), [&](const char* k) { return key == k; }) ==
        std::end(kKeys)) {
      throw ConfigError("unknown training key '" + key + "'");
    }
  }
  TrainConfig c;
  try {
    if (j.contains("model")) c.model = cells::ModelConfig::from_json(j.at("model"));
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      for (const auto& [key, v] : o.items()) {
        if (key != "learning_rate" && key != "beta1" && key != "beta2" && key != "weight_decay" &&
            key != "epsilon") {
          throw ConfigError("unknown optimizer key '" + key + "'");
        }
      }
      c.adam.learning_rate = o.value("learning_rate", c.adam.learning_rate);
      c.adam.beta1 = o.value("beta1", c.adam.beta1);
      c.adam.beta2 = o.value("beta2", c.adam.beta2);
      c.adam.weight_decay = o.value("weight_decay", c.adam.weight_decay);
      c.adam.epsilon = o.value("epsilon", c.adam.epsilon);
    }
    c.batch_size = j.value("batch_size", c.batch_size);
    c.max_epochs = j.value("max_epochs", c.max_epochs);
    c.patience = j.value("patience", c.patience);
    if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
    if (j.contains("batching")) {
      const auto b = j.at("batching").get<std::string>();
      if (b == "accumulate") c.batching = BatchMode::Accumulate;
      else if (b == "shape") c.batching = BatchMode::Shape;
      else throw ConfigError("batching must be 'accumulate' or 'shape', got '" + b + "'");
    }
    auto path = [&](const char* key) -> std::filesystem::path {
      if (!j.contains(key)) return {};
      std::filesystem::path p = j.at(key).get<std::string>();
      if (p.empty() || p.is_absolute() || base_dir.empty()) return p;
      return base_dir / p;
    };
    c.train_path = path("train");
    c.validation_path = path("validation");
    c.subsample = j.value("subsample", c.subsample);
    if (j.contains("train_metrics")) {
      const auto m = j.at("train_metrics").get<std::string>();
      if (m != "running" && m != "full") {
        throw ConfigError("train_metrics must be 'running' or 'full', got '" + m + "'");
      }
      c.full_train_metrics = m == "full";
    }
    if (j.contains("grid")) {
      const auto& g = j.at("grid");
      for (const auto& [key, v] : g.items()) {
        if (key != "hidden" && key != "dropout" && key != "stack" && key != "architectures") {
          throw ConfigError("unknown grid key '" + key + "'");
        }
      }
      if (g.contains("hidden")) c.grid.hidden = positive_list<std::size_t>(g.at("hidden"), "hidden");
      if (g.contains("dropout")) c.grid.dropout = positive_list<double>(g.at("dropout"), "dropout");
      if (g.contains("stack")) c.grid.stack = positive_list<std::size_t>(g.at("stack"), "stack");
      if (g.contains("architectures")) {
        for (const auto& a : g.at("architectures")) {
          c.grid.architectures.push_back(cells::parse_architecture(a.get<std::string>()));
        }
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string TrainConfig::hash() const {
  nlohmann::json j = to_json();
  j.erase("seeds");
  j.erase("train");
  j.erase("validation");
  return fnv_hex(j.dump());
}

nlohmann::json RunRecord::to_json() const {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& m : history) {
    hist.push_back({{"epoch", m.epoch},
                    {"split", m.split},
                    {"accuracy", m.accuracy},
                    {"precision", m.precision},
                    {"recall", m.recall},
                    {"loss", m.loss}});
  }
  return {{"config_hash", config_hash},
          {"seed", seed},
          {"best_epoch", best_epoch},
          {"best_validation_accuracy", best_validation_accuracy},
          {"best_checkpoint", best_checkpoint.string()},
          {"history", hist}};
}

nlohmann::json GridEntry::to_json() const {
  nlohmann::json rs = nlohmann::json::array();
  for (const auto& r : runs) {
    rs.push_back({{"seed", r.seed},
                  {"best_epoch", r.best_epoch},
                  {"best_validation_accuracy", r.best_validation_accuracy},
                  {"best_checkpoint", r.best_checkpoint.string()}});
  }
  return {{"model", model.to_json()},
          {"config_hash", config_hash},
          {"mean_validation_accuracy", mean_validation_accuracy},
          {"sd_validation_accuracy", sd_validation_accuracy},
          {"runs", rs}};
}

expr::Vocab build_vocab(std::span<const Equation> equations) {
  expr::Vocab v = expr::Vocab::default_alphabet();
  for (const auto& eq : equations) {
    v.add_terminals_of(*eq.lhs);
    v.add_terminals_of(*eq.rhs);
  }
  return v;
}

Label majority_label(std::span<const Equation> equations) {
  std::size_t correct = 0;
  for (const auto& eq : equations) correct += eq.label == Label::Correct;
  return 2 * correct >= equations.size() ? Label::Correct : Label::Incorrect;
}

std::vector<Equation> subsample(std::span<const Equation> equations, double fraction,
                                std::uint64_t seed) {
  if (!(fraction > 0 && fraction <= 1)) throw ConfigError("subsample fraction must be in (0, 1]");
  if (fraction == 1.0) return {equations.begin(), equations.end()};
  const auto keep = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(equations.size())));
  std::vector<std::size_t> idx(equations.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = stream(seed, 0, 0, 0x55);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  std::vector<Equation> out;
  out.reserve(keep);
  for (auto i : idx) out.push_back(equations[i]);
  return out;
}

EpochMetrics evaluate(const cells::Model& model, std::span<const Equation> equations) {
  EpochAccumulator acc;
  if (model.config().architecture == Architecture::MajorityClass) {
    for (const auto& eq : equations) acc.confusion.add(model.majority_label(), eq.label);
    auto m = acc.finish(0, "eval");
    m.loss = std::numeric_limits<double>::quiet_NaN();
    return m;
  }
  for (const auto& eq : equations) {
    ad::Graph g(model.params());
    const Equation* one[] = {&eq};
    acc.add(g.value(model.logits(g, one))[0], eq.label);
  }
  return acc.finish(0, "eval");
}

TrainOutcome train(const TrainConfig& config, std::uint64_t seed, std::span<const Equation> train_set,
                   std::span<const Equation> validation_set,
                   const std::optional<std::filesystem::path>& out_dir,
                   const cells::Model* initial) {
  config.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  if (validation_set.empty()) throw DataError("validation set is empty");
  if (out_dir) std::filesystem::create_directories(*out_dir);

  cells::Model model = initial ? *initial : cells::Model(config.model, build_vocab(train_set));
  if (initial && initial->config().to_json() != config.model.to_json()) {
    throw ConfigError("initial model does not match the configured architecture");
  }
  model.set_majority_label(majority_label(train_set));
  RunRecord record;
  record.config_hash = config.hash();
  record.seed = seed;

  auto save_best = [&](const cells::Model& m, std::size_t epoch, double acc) {
    if (!out_dir) return;
    record.best_checkpoint = *out_dir / "best.ckpt";
    m.save(record.best_checkpoint, {{"seed", seed},
                                    {"epoch", epoch},
                                    {"validation_accuracy", acc},
                                    {"config_hash", record.config_hash}});
  };

  if (config.model.architecture == Architecture::MajorityClass) {
    auto tr = evaluate(model, train_set);
    tr.epoch = 1;
    tr.split = "train";
    auto va = evaluate(model, validation_set);
    va.epoch = 1;
    va.split = "validation";
    record.history = {tr, va};
    record.best_epoch = 1;
    record.best_validation_accuracy = va.accuracy;
    save_best(model, 1, va.accuracy);
  } else {
    if (!initial) model.initialize(seed);
    cells::Model best = model;
    Trainer trainer(config, seed, train_set, model);
    std::size_t since_best = 0;
    record.best_validation_accuracy = -1;
    for (std::size_t e = 1; e <= config.max_epochs; ++e) {
      auto tr = trainer.epoch(e);
      if (config.full_train_metrics) {
        tr = evaluate(model, train_set);
        tr.epoch = e;
        tr.split = "train";
      }
      record.history.push_back(tr);
      auto va = evaluate(model, validation_set);
      va.epoch = e;
      va.split = "validation";
      record.history.push_back(va);
      if (va.accuracy > record.best_validation_accuracy) {
        record.best_validation_accuracy = va.accuracy;
        record.best_epoch = e;
        best = model;
        since_best = 0;
        save_best(best, e, va.accuracy);
      } else if (config.patience > 0 && ++since_best >= config.patience) {
        break;
      }
    }
    model = std::move(best);
  }
  if (out_dir) {
    write_metrics_csv(*out_dir / "metrics.csv", record.history);
    write_run_json(*out_dir / "run.json", record);
  }
  return {std::move(record), std::move(model)};
}

RunRecord train(const TrainConfig& config, std::uint64_t seed,
                const std::optional<std::filesystem::path>& out_dir) {
  config.validate();
  if (config.train_path.empty() || config.validation_path.empty()) {
    throw ConfigError("training config needs 'train' and 'validation' paths");
  }
  const auto all = expr::read_equations(config.train_path);
  const auto train_set = subsample(all, config.subsample, seed);
  const auto validation_set = expr::read_equations(config.validation_path);
  return train(config, seed, train_set, validation_set, out_dir).record;
}

RunRecord subsample_train(TrainConfig config, double fraction, std::uint64_t seed,
                          const std::optional<std::filesystem::path>& out_dir) {
  if (!(fraction > 0 && fraction <= 1)) throw ConfigError("subsample fraction must be in (0, 1]");
  config.subsample = fraction;
  return train(config, seed, out_dir);
}

std::vector<cells::ModelConfig> grid_points(const TrainConfig& config) {
  std::vector<Architecture> archs = config.grid.architectures;
  if (archs.empty()) archs.push_back(config.model.architecture);
  std::vector<cells::ModelConfig> out;
  for (auto arch : archs) {
    cells::ModelConfig base = config.model;
    base.architecture = arch;
    if (arch == Architecture::MajorityClass) {
      out.push_back(base);
      continue;
    }
    for (auto n : config.grid.hidden) {
      for (double d : config.grid.dropout) {
        cells::ModelConfig m = base;
        m.n = n;
        m.dropout = d;
        if (!m.has_stack()) {
          out.push_back(m);
          continue;
        }
        for (auto p : config.grid.stack) {
          m.p = p;
          m.k = std::min(config.model.k, p);
          out.push_back(m);
        }
      }
    }
  }
  return out;
}

GridResult grid_search(const TrainConfig& config, const std::filesystem::path& out_dir, int jobs) {
  config.validate();
  if (config.train_path.empty() || config.validation_path.empty()) {
    throw ConfigError("training config needs 'train' and 'validation' paths");
  }
  const auto all = expr::read_equations(config.train_path);
  const auto validation_set = expr::read_equations(config.validation_path);
  const auto points = grid_points(config);

  struct Task {
    std::size_t point;
    std::size_t seed_index;
  };
  std::vector<Task> tasks;
  for (std::size_t p = 0; p < points.size(); ++p) {
    for (std::size_t s = 0; s < config.seeds.size(); ++s) tasks.push_back({p, s});
  }
  std::vector<std::vector<RunRecord>> runs(points.size(),
                                           std::vector<RunRecord>(config.seeds.size()));
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  auto worker = [&] {
    for (;;) {
      const std::size_t t = next.fetch_add(1);
      if (t >= tasks.size()) return;
      try {
        const auto [p, s] = tasks[t];
        TrainConfig c = config;
        c.model = points[p];
        const std::uint64_t seed = config.seeds[s];
        const auto train_set = subsample(all, c.subsample, seed);
        runs[p][s] = train(c, seed, train_set, validation_set,
                           out_dir / point_name(points[p]) / ("seed_" + std::to_string(seed)))
                         .record;
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = tasks.size();
      }
    }
  };
  const int threads = std::max(1, std::min<int>(jobs, static_cast<int>(tasks.size())));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  GridResult result;
  for (std::size_t p = 0; p < points.size(); ++p) {
    GridEntry entry;
    entry.model = points[p];
    TrainConfig c = config;
    c.model = points[p];
    entry.config_hash = c.hash();
    std::vector<double> accs;
    for (const auto& r : runs[p]) accs.push_back(r.best_validation_accuracy);
    entry.mean_validation_accuracy = mean(accs);
    entry.sd_validation_accuracy = sample_sd(accs);
    entry.runs = std::move(runs[p]);
    result.leaderboard.push_back(std::move(entry));
  }
  std::stable_sort(result.leaderboard.begin(), result.leaderboard.end(),
                   [](const GridEntry& a, const GridEntry& b) {
                     return a.mean_validation_accuracy > b.mean_validation_accuracy;
                   });
  for (const auto& e : result.leaderboard) result.best.try_emplace(e.model.architecture, e);

  nlohmann::json board = nlohmann::json::array();
  for (const auto& e : result.leaderboard) board.push_back(e.to_json());
  std::filesystem::create_directories(out_dir);
  std::ofstream out(out_dir / "leaderboard.json");
  if (!out) throw DataError("cannot write " + (out_dir / "leaderboard.json").string());
  out << nlohmann::json{{"config", config.to_json()}, {"leaderboard", board}}.dump(2) << "\n";
  return result;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "epoch,split,accuracy,precision,recall,loss\n";
  out << std::setprecision(17);
  for (const auto& r : rows) {
    out << r.epoch << "," << r.split << "," << r.accuracy << "," << r.precision << "," << r.recall
        << "," << r.loss << "\n";
  }
}

}  // namespace treesmu::training
