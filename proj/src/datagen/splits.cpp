#include "treesmu/splits.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <unordered_set>

#include "treesmu/equation_io.hpp"
#include "treesmu/errors.hpp"

namespace treesmu::datagen {
namespace {

using expr::Equation;

void validate_spec(const std::string& protocol, const SplitSpec& s) {
  const std::string where = "protocol '" + protocol + "' split '" + s.name + "': ";
  if (s.name != "train" && s.name != "validation" && s.name != "test") {
    throw ConfigError(where + "name must be train, validation or test");
  }
  if (s.depth_lo < 1 || s.depth_hi < s.depth_lo || s.depth_hi > 19) {
    throw ConfigError(where + "invalid depth range");
  }
  if (s.fraction.has_value() == s.count.has_value()) {
    throw ConfigError(where + "set exactly one of fraction and count");
  }
  if (s.fraction && (*s.fraction <= 0 || *s.fraction > 1)) {
    throw ConfigError(where + "fraction must be in (0, 1]");
  }
}

nlohmann::json depth_histogram(const std::vector<Equation>& eqs) {
  std::map<int, std::size_t> counts;
  for (const auto& e : eqs) ++counts[e.depth()];
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [d, n] : counts) j[std::to_string(d)] = n;
  return j;
}

nlohmann::json pool_summary(const GenConfig& cfg, const std::vector<Equation>& eqs) {
  const auto labels = count_labels(eqs);
  return {{"seed", cfg.seed},
          {"count", eqs.size()},
          {"counts_per_depth", depth_histogram(eqs)},
          {"correct", labels.correct},
          {"incorrect", labels.incorrect}};
}

Protocol protocol_from_json(const nlohmann::json& j) {
  Protocol p;
  p.name = j.at("name").get<std::string>();
  for (const auto& sj : j.at("splits")) {
    for (const auto& [k, v] : sj.items()) {
      if (k != "name" && k != "depth" && k != "fraction" && k != "count" && k != "seed") {
        throw ConfigError("unknown split key '" + k + "'");
      }
    }
    SplitSpec s;
    s.name = sj.at("name").get<std::string>();
    const auto& depth = sj.at("depth");
    if (!depth.is_array() || depth.size() != 2) throw ConfigError("split depth must be [lo, hi]");
    s.depth_lo = depth[0].get<int>();
    s.depth_hi = depth[1].get<int>();
    if (sj.contains("fraction")) s.fraction = sj.at("fraction").get<double>();
    if (sj.contains("count")) s.count = sj.at("count").get<std::size_t>();
    s.seed = sj.value("seed", std::uint64_t{0});
    validate_spec(p.name, s);
    p.splits.push_back(s);
  }
  return p;
}

nlohmann::json protocol_to_json(const Protocol& p) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& s : p.splits) {
    nlohmann::json sj = {{"name", s.name}, {"depth", {s.depth_lo, s.depth_hi}}, {"seed", s.seed}};
    if (s.fraction) sj["fraction"] = *s.fraction;
    if (s.count) sj["count"] = *s.count;
    splits.push_back(sj);
  }
  return {{"name", p.name}, {"splits", splits}};
}

}  // namespace

LabelCounts count_labels(const std::vector<Equation>& equations) {
  LabelCounts c;
  for (const auto& e : equations) {
    (e.label == expr::Label::Correct ? c.correct : c.incorrect) += 1;
  }
  return c;
}

double majority_accuracy(const LabelCounts& reference, const LabelCounts& target) {
  if (target.total() == 0) throw DataError("majority accuracy of an empty split");
  const bool correct = reference.correct >= reference.incorrect;
  return static_cast<double>(correct ? target.correct : target.incorrect) /
         static_cast<double>(target.total());
}

std::vector<std::pair<SplitSpec, std::vector<Equation>>> make_splits(
    const std::vector<Equation>& trainval, const std::vector<Equation>& test,
    const Protocol& protocol) {
  for (const auto& s : protocol.splits) validate_spec(protocol.name, s);

  std::vector<bool> used_trainval(trainval.size(), false);
  std::vector<bool> used_test(test.size(), false);
  std::unordered_set<std::string> seen_keys;
  std::vector<std::pair<SplitSpec, std::vector<Equation>>> out(protocol.splits.size());

  auto fill = [&](std::size_t spec_index) {
    const SplitSpec& spec = protocol.splits[spec_index];
    const bool is_test = spec.name == "test";
    const auto& pool = is_test ? test : trainval;
    auto& used = is_test ? used_test : used_trainval;

    std::size_t eligible = 0;
    std::vector<std::size_t> free;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      const int d = pool[i].depth();
      if (d < spec.depth_lo || d > spec.depth_hi) continue;
      ++eligible;
      if (used[i]) continue;
      if (is_test && seen_keys.contains(pool[i].key())) continue;
      free.push_back(i);
    }
    std::mt19937_64 rng(spec.seed);
    std::shuffle(free.begin(), free.end(), rng);
    std::size_t take =
        spec.count ? *spec.count
                   : static_cast<std::size_t>(std::llround(*spec.fraction * static_cast<double>(eligible)));
    take = std::min(take, free.size());
    free.resize(take);
    std::sort(free.begin(), free.end());
    if (free.empty()) {
      throw DataError("split " + protocol.name + "/" + spec.name + " is empty after filtering depths " +
                      std::to_string(spec.depth_lo) + "-" + std::to_string(spec.depth_hi));
    }
    std::vector<Equation> selected;
    for (auto i : free) {
      used[i] = true;
      if (!is_test) seen_keys.insert(pool[i].key());
      selected.push_back(pool[i]);
    }
    out[spec_index] = {spec, std::move(selected)};
  };

  // Test splits go last so they can exclude everything train and validation took.
  for (std::size_t i = 0; i < protocol.splits.size(); ++i) {
    if (protocol.splits[i].name != "test") fill(i);
  }
  for (std::size_t i = 0; i < protocol.splits.size(); ++i) {
    if (protocol.splits[i].name == "test") fill(i);
  }
  return out;
}

nlohmann::json write_splits(const std::vector<Equation>& trainval, const std::vector<Equation>& test,
                            const Protocol& protocol, const std::filesystem::path& dir) {
  const auto splits = make_splits(trainval, test, protocol);
  std::filesystem::create_directories(dir);
  nlohmann::json entries = nlohmann::json::array();
  std::optional<LabelCounts> train_labels;
  for (const auto& [spec, eqs] : splits) {
    if (spec.name == "train") train_labels = count_labels(eqs);
  }
  for (const auto& [spec, eqs] : splits) {
    const std::string file = protocol.name + "_" + spec.name + ".jsonl";
    expr::write_equations(dir / file, eqs);
    const auto labels = count_labels(eqs);
    nlohmann::json e = {{"name", spec.name},
                        {"file", file},
                        {"seed", spec.seed},
                        {"depth", {spec.depth_lo, spec.depth_hi}},
                        {"count", eqs.size()},
                        {"counts_per_depth", depth_histogram(eqs)},
                        {"correct", labels.correct},
                        {"incorrect", labels.incorrect},
                        {"label_balance", static_cast<double>(labels.correct) /
                                              static_cast<double>(labels.total())}};
    if (train_labels) e["majority_accuracy"] = majority_accuracy(*train_labels, labels);
    entries.push_back(e);
  }
  return {{"name", protocol.name}, {"splits", entries}};
}

std::vector<expr::CompletionItem> make_completion_items(const std::vector<Equation>& pool,
                                                        std::size_t count, int depth_lo,
                                                        int depth_hi, std::uint64_t seed) {
  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const int d = pool[i].depth();
    if (pool[i].label == expr::Label::Correct && d >= depth_lo && d <= depth_hi) order.push_back(i);
  }
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<expr::CompletionItem> items;
  for (auto i : order) {
    if (items.size() >= count) break;
    const auto tree = pool[i].tree();
    std::vector<expr::Path> cuts;
    for (auto& p : expr::all_paths(*tree)) {
      if (p.empty()) continue;
      const int d = expr::subtree(tree, p)->depth();
      if (d == 1 || d == 2) cuts.push_back(std::move(p));
    }
    if (cuts.empty()) continue;
    const auto& cut = cuts[std::uniform_int_distribution<std::size_t>(0, cuts.size() - 1)(rng)];
    const auto blanked = expr::replace(tree, cut, expr::Expr::blank());
    items.push_back({blanked->children()[0], blanked->children()[1], expr::subtree(tree, cut)});
  }
  return items;
}

std::vector<ClassedExpression> make_substitutivity_set(const Generator& generator,
                                                       std::size_t count, std::uint64_t seed) {
  std::vector<ClassedExpression> out;
  std::unordered_set<std::string> seen;
  const auto zero = expr::Expr::integer(0);
  const auto one = expr::Expr::integer(1);
  const std::size_t budget = 20 * count + 100;
  for (std::size_t slot = 0; slot < budget && out.size() < count; ++slot) {
    auto rng = slot_rng(seed, 0, slot);
    const int depth = std::uniform_int_distribution<int>(1, 3)(rng);
    expr::ExprPtr e;
    switch (slot % 3) {
      case 0:
      case 1: {
        auto grown = generator.grow(slot % 3 == 0 ? zero : one, depth, rng);
        if (!grown) continue;
        e = *grown;
        break;
      }
      default:
        e = generator.random_expression(depth, rng);
        break;
    }
    if (!seen.insert(expr::print(*e)).second) continue;
    out.push_back({e, constant_class(*e)});
  }
  return out;
}

void write_classed_expressions(const std::filesystem::path& path,
                               const std::vector<ClassedExpression>& items) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& item : items) {
    nlohmann::ordered_json j;
    j["expr"] = expr::print(*item.expression);
    j["class"] = item.label;
    out << j.dump() << '\n';
  }
}

std::vector<ClassedExpression> read_classed_expressions(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open expression file " + path.string());
  std::vector<ClassedExpression> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({expr::parse(j.at("expr").get<std::string>()), j.value("class", "")});
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<Protocol> desk_protocols() {
  auto make = [](std::string name, int train_lo, int train_hi, int test_lo, int test_hi,
                 std::uint64_t seed) {
    Protocol p{std::move(name), {}};
    p.splits.push_back({"train", train_lo, train_hi, 0.9, std::nullopt, seed});
    p.splits.push_back({"validation", train_lo, train_hi, 0.1, std::nullopt, seed + 1});
    p.splits.push_back({"test", test_lo, test_hi, 1.0, std::nullopt, seed + 2});
    return p;
  };
  return {make("productivity", 1, 4, 5, 7, 101), make("localism", 3, 6, 1, 2, 201),
          make("systematicity", 1, 4, 1, 4, 301)};
}

DatasetConfig DatasetConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"trainval", "test", "protocols", "completion",
                                              "substitutivity"};
  DatasetConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (!known.contains(k)) throw ConfigError("unknown dataset key '" + k + "'");
    }
    c.trainval = GenConfig::from_json(j.at("trainval"));
    c.test = GenConfig::from_json(j.at("test"));
    if (j.contains("protocols")) {
      for (const auto& p : j.at("protocols")) c.protocols.push_back(protocol_from_json(p));
    } else {
      c.protocols = desk_protocols();
    }
    if (j.contains("completion")) {
      const auto& cj = j.at("completion");
      c.completion_count = cj.value("count", c.completion_count);
      if (cj.contains("depth")) {
        c.completion_depth_lo = cj.at("depth")[0].get<int>();
        c.completion_depth_hi = cj.at("depth")[1].get<int>();
      }
      c.completion_seed = cj.value("seed", c.completion_seed);
    }
    if (j.contains("substitutivity")) {
      const auto& sj = j.at("substitutivity");
      c.substitutivity_count = sj.value("count", c.substitutivity_count);
      c.substitutivity_seed = sj.value("seed", c.substitutivity_seed);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("dataset config: ") + e.what());
  }
  if (c.trainval.seed == c.test.seed) {
    throw ConfigError("test pool must use a different seed from the train/validation pool");
  }
  if (c.completion_depth_lo < 2 || c.completion_depth_hi < c.completion_depth_lo) {
    throw ConfigError("completion depth range must satisfy 2 <= lo <= hi");
  }
  return c;
}

nlohmann::json DatasetConfig::to_json() const {
  nlohmann::json protocols_json = nlohmann::json::array();
  for (const auto& p : protocols) protocols_json.push_back(protocol_to_json(p));
  return {{"trainval", trainval.to_json()},
          {"test", test.to_json()},
          {"protocols", protocols_json},
          {"completion",
           {{"count", completion_count},
            {"depth", {completion_depth_lo, completion_depth_hi}},
            {"seed", completion_seed}}},
          {"substitutivity", {{"count", substitutivity_count}, {"seed", substitutivity_seed}}}};
}

DatasetSummary generate_dataset(const DatasetConfig& config, const std::filesystem::path& dir,
                                int jobs) {
  std::filesystem::create_directories(dir);
  DatasetSummary summary;
  const Generator trainval_gen(config.trainval);
  const Generator test_gen(config.test);
  auto trainval = trainval_gen.generate(jobs);
  auto test = test_gen.generate(jobs);
  for (auto& w : trainval.warnings) summary.warnings.push_back("trainval pool: " + w);
  for (auto& w : test.warnings) summary.warnings.push_back("test pool: " + w);

  expr::write_equations(dir / "trainval_pool.jsonl", trainval.equations);
  expr::write_equations(dir / "test_pool.jsonl", test.equations);
  summary.files.push_back(dir / "trainval_pool.jsonl");
  summary.files.push_back(dir / "test_pool.jsonl");

  nlohmann::json protocols = nlohmann::json::array();
  for (const auto& p : config.protocols) {
    auto entry = write_splits(trainval.equations, test.equations, p, dir);
    for (const auto& s : entry.at("splits")) summary.files.push_back(dir / s.at("file").get<std::string>());
    protocols.push_back(std::move(entry));
  }

  summary.manifest = {{"config", config.to_json()},
                      {"pools",
                       {{"trainval", pool_summary(config.trainval, trainval.equations)},
                        {"test", pool_summary(config.test, test.equations)}}},
                      {"protocols", protocols}};

  if (config.completion_count > 0) {
    const auto items = make_completion_items(test.equations, config.completion_count,
                                             config.completion_depth_lo,
                                             config.completion_depth_hi, config.completion_seed);
    if (items.empty()) throw DataError("no Correct test equations available for completion items");
    expr::write_completion_items(dir / "completion.jsonl", items);
    summary.files.push_back(dir / "completion.jsonl");
    summary.manifest["completion"] = {{"file", "completion.jsonl"},
                                      {"count", items.size()},
                                      {"seed", config.completion_seed}};
  }
  if (config.substitutivity_count > 0) {
    const auto items =
        make_substitutivity_set(test_gen, config.substitutivity_count, config.substitutivity_seed);
    write_classed_expressions(dir / "substitutivity.jsonl", items);
    summary.files.push_back(dir / "substitutivity.jsonl");
    std::map<std::string, std::size_t> classes;
    for (const auto& i : items) ++classes[i.label];
    summary.manifest["substitutivity"] = {{"file", "substitutivity.jsonl"},
                                          {"count", items.size()},
                                          {"classes", classes},
                                          {"seed", config.substitutivity_seed}};
  }
  summary.manifest["warnings"] = summary.warnings;
  return summary;
}

}  // namespace treesmu::datagen
