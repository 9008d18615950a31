#include "treesmu/generator.hpp"

#include <atomic>
#include <cmath>
#include <set>
#include <thread>
#include <unordered_set>

#include "treesmu/errors.hpp"

namespace treesmu::datagen {
namespace {

using expr::Expr;
using expr::ExprKind;
using expr::ExprPtr;
using expr::Function;
using expr::Path;

template <class T>
const T& pick(const std::vector<T>& items, std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> d(0, items.size() - 1);
  return items[d(rng)];
}

bool coin(std::mt19937_64& rng, double p) { return std::bernoulli_distribution(p)(rng); }

// Paths of nodes that lie on some root-to-leaf path of maximal length.
void deepest_paths(const Expr& e, Path& current, std::vector<Path>& out) {
  out.push_back(current);
  for (std::size_t i = 0; i < e.children().size(); ++i) {
    if (e.children()[i]->depth() + 1 != e.depth()) continue;
    current.push_back(static_cast<std::uint8_t>(i));
    deepest_paths(*e.children()[i], current, out);
    current.pop_back();
  }
}

ExprPtr substitute_symbol(const ExprPtr& e, const std::string& name, const ExprPtr& value) {
  if (e->kind() == ExprKind::Symbol) return e->text() == name ? value : e;
  if (e->is_leaf()) return e;
  std::vector<ExprPtr> children;
  for (const auto& c : e->children()) children.push_back(substitute_symbol(c, name, value));
  return Expr::function(e->function(), std::move(children));
}

std::vector<Function> functions_of_arity(int arity) {
  std::vector<Function> out;
  for (const auto& f : expr::function_table()) {
    if (f.id != Function::Equal && f.arity == arity) out.push_back(f.id);
  }
  return out;
}

const std::vector<Function>& non_equal_functions() {
  static const std::vector<Function> fs = [] {
    auto out = functions_of_arity(1);
    for (auto f : functions_of_arity(2)) out.push_back(f);
    return out;
  }();
  return fs;
}

struct SlotKey {
  int depth;
  bool negative;
};

}  // namespace

void GenConfig::validate() const {
  if (max_depth < 1 || max_depth > 19) throw ConfigError("max_depth must be in [1, 19]");
  for (const auto& [d, c] : counts_per_depth) {
    if (d < 1 || d > max_depth) {
      throw ConfigError("depth " + std::to_string(d) + " outside [1, max_depth]");
    }
  }
  if (corruption.function_swap < 0 || corruption.literal_perturb < 0 ||
      corruption.subtree_swap < 0 ||
      corruption.function_swap + corruption.literal_perturb + corruption.subtree_swap <= 0) {
    throw ConfigError("corruption weights must be non-negative with a positive sum");
  }
  if (oracle_samples < 1) throw ConfigError("oracle_samples must be positive");
  if (negative_fraction < 0 || negative_fraction > 1) {
    throw ConfigError("negative_fraction must be in [0, 1]");
  }
  if (depth_bias < 0 || depth_bias > 1) throw ConfigError("depth_bias must be in [0, 1]");
  if (max_attempts < 1) throw ConfigError("max_attempts must be positive");
}

nlohmann::json GenConfig::to_json() const {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [d, c] : counts_per_depth) counts[std::to_string(d)] = c;
  return {{"seed", seed},
          {"counts_per_depth", counts},
          {"max_depth", max_depth},
          {"corruption",
           {{"function_swap", corruption.function_swap},
            {"literal_perturb", corruption.literal_perturb},
            {"subtree_swap", corruption.subtree_swap}}},
          {"oracle_samples", oracle_samples},
          {"negative_fraction", negative_fraction},
          {"depth_bias", depth_bias},
          {"max_attempts", max_attempts}};
}

GenConfig GenConfig::from_json(const nlohmann::json& j) {
  static const std::set<std::string> known = {"seed",       "counts_per_depth", "max_depth",
                                              "corruption", "oracle_samples",   "negative_fraction",
                                              "depth_bias", "max_attempts"};
  GenConfig c;
  try {
    for (const auto& [k, v] : j.items()) {
      if (!known.contains(k)) throw ConfigError("unknown generation key '" + k + "'");
    }
    c.seed = j.value("seed", c.seed);
    if (j.contains("counts_per_depth")) {
      for (const auto& [k, v] : j.at("counts_per_depth").items()) {
        c.counts_per_depth[std::stoi(k)] = v.get<std::size_t>();
      }
    }
    c.max_depth = j.value("max_depth", c.max_depth);
    if (j.contains("corruption")) {
      const auto& w = j.at("corruption");
      c.corruption.function_swap = w.value("function_swap", c.corruption.function_swap);
      c.corruption.literal_perturb = w.value("literal_perturb", c.corruption.literal_perturb);
      c.corruption.subtree_swap = w.value("subtree_swap", c.corruption.subtree_swap);
    }
    c.oracle_samples = j.value("oracle_samples", c.oracle_samples);
    c.negative_fraction = j.value("negative_fraction", c.negative_fraction);
    c.depth_bias = j.value("depth_bias", c.depth_bias);
    c.max_attempts = j.value("max_attempts", c.max_attempts);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("generation config: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ConfigError("counts_per_depth keys must be integers");
  }
  c.validate();
  return c;
}

std::mt19937_64 slot_rng(std::uint64_t seed, int depth, std::uint64_t slot) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(depth), static_cast<std::uint32_t>(slot),
                    static_cast<std::uint32_t>(slot >> 32)};
  return std::mt19937_64(seq);
}

Generator::Generator(GenConfig config, std::vector<RewriteRule> rules)
    : config_(std::move(config)), rules_(std::move(rules)) {
  config_.validate();
  if (rules_.empty()) throw ContractError("generator needs at least one rewrite rule");
  for (const char* s : {"x", "y", "z", "w", "θ"}) symbols_.push_back(Expr::symbol(s));
  for (const char* n : {"-1", "0", "1", "2", "3", "4", "1/2", "-1/2"}) {
    literals_.push_back(Expr::number(n));
  }
  literals_.push_back(Expr::pi());
}

OracleConfig Generator::oracle_config() const {
  OracleConfig cfg;
  cfg.samples = config_.oracle_samples;
  return cfg;
}

ExprPtr Generator::random_leaf(std::mt19937_64& rng) const {
  return coin(rng, 0.6) ? pick(symbols_, rng) : pick(literals_, rng);
}

ExprPtr Generator::random_expression(int depth, std::mt19937_64& rng) const {
  if (depth <= 0) return random_leaf(rng);
  const Function f = pick(non_equal_functions(), rng);
  const int arity = expr::info(f).arity;
  const int deep_child = std::uniform_int_distribution<int>(0, arity - 1)(rng);
  std::vector<ExprPtr> children;
  for (int i = 0; i < arity; ++i) {
    const int d = i == deep_child ? depth - 1 : std::uniform_int_distribution<int>(0, depth - 1)(rng);
    children.push_back(random_expression(d, rng));
  }
  return Expr::function(f, std::move(children));
}

std::optional<ExprPtr> Generator::rewrite_step(const ExprPtr& root, int max_depth,
                                               std::mt19937_64& rng) const {
  std::vector<Path> paths;
  if (coin(rng, config_.depth_bias)) {
    Path current;
    deepest_paths(*root, current, paths);
  } else {
    paths = expr::all_paths(*root);
  }
  const Path& path = pick(paths, rng);
  const ExprPtr target = expr::subtree(root, path);

  struct Option {
    const RewriteRule* rule;
    bool forward;
    Bindings bindings;
  };
  std::vector<Option> specific;
  std::vector<Option> wrapping;
  for (const auto& rule : rules_) {
    for (bool forward : {true, false}) {
      const ExprPtr& from = forward ? rule.lhs : rule.rhs;
      Bindings b;
      if (!match(*from, target, b)) continue;
      (is_pattern_variable(*from) ? wrapping : specific).push_back({&rule, forward, std::move(b)});
    }
  }
  if (specific.empty() && wrapping.empty()) return std::nullopt;
  const bool use_specific = !specific.empty() && (wrapping.empty() || coin(rng, 0.6));
  Option option = pick(use_specific ? specific : wrapping, rng);

  const ExprPtr& to = option.forward ? option.rule->rhs : option.rule->lhs;
  for (const auto& v : pattern_variables(*to)) {
    if (!option.bindings.contains(v)) {
      option.bindings.emplace(v, random_expression(coin(rng, 0.7) ? 0 : 1, rng));
    }
  }
  ExprPtr result = expr::replace(root, path, instantiate(to, option.bindings));
  if (result->depth() > max_depth) return std::nullopt;
  return result;
}

std::optional<ExprPtr> Generator::grow(const ExprPtr& start, int depth, std::mt19937_64& rng) const {
  const OracleConfig cfg = oracle_config();
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    ExprPtr e = start;
    const int max_steps = 4 * depth + 12;
    for (int step = 0; step < max_steps; ++step) {
      if (e->depth() == depth && coin(rng, 0.6)) break;
      if (auto next = rewrite_step(e, depth, rng)) e = *next;
    }
    if (e->depth() != depth) continue;
    const auto r = check_equation(*start, *e, rng, cfg);
    if (r.verdict == Verdict::Correct && r.well_defined(cfg.samples)) return e;
  }
  return std::nullopt;
}

std::optional<Equation> Generator::correct(int depth, std::mt19937_64& rng) const {
  if (depth < 1) throw ContractError("equation depth must be at least 1");
  const OracleConfig cfg = oracle_config();
  const int side_depth = depth - 1;
  for (int attempt = 0; attempt < config_.max_attempts; ++attempt) {
    ExprPtr lhs;
    ExprPtr rhs;
    if (depth == 1 || coin(rng, 0.05)) {
      lhs = rhs = random_expression(0, rng);
    } else {
      const RewriteRule& rule = pick(rules_, rng);
      Bindings b;
      for (const auto& v : pattern_variables(*rule.lhs)) {
        b.emplace(v, random_expression(coin(rng, 0.7) ? 0 : 1, rng));
      }
      for (const auto& v : pattern_variables(*rule.rhs)) {
        if (!b.contains(v)) b.emplace(v, random_expression(0, rng));
      }
      lhs = instantiate(rule.lhs, b);
      rhs = instantiate(rule.rhs, b);
    }
    if (std::max(lhs->depth(), rhs->depth()) > side_depth) continue;

    const int max_steps = 4 * depth + 12;
    for (int step = 0; step < max_steps; ++step) {
      if (std::max(lhs->depth(), rhs->depth()) == side_depth && coin(rng, 0.6)) break;
      if (coin(rng, 0.12)) {
        auto names = expr::symbols(*lhs);
        for (auto& s : expr::symbols(*rhs)) names.push_back(std::move(s));
        if (names.empty()) continue;
        const std::string name = pick(names, rng);
        const ExprPtr value = random_expression(coin(rng, 0.5) ? 0 : 1, rng);
        ExprPtr l = substitute_symbol(lhs, name, value);
        ExprPtr r = substitute_symbol(rhs, name, value);
        if (std::max(l->depth(), r->depth()) > side_depth) continue;
        lhs = std::move(l);
        rhs = std::move(r);
        continue;
      }
      ExprPtr& side = coin(rng, 0.5) ? lhs : rhs;
      if (auto next = rewrite_step(side, side_depth, rng)) side = *next;
    }
    if (std::max(lhs->depth(), rhs->depth()) != side_depth) continue;
    if (coin(rng, 0.5)) std::swap(lhs, rhs);
    const auto r = check_equation(*lhs, *rhs, rng, cfg);
    if (r.verdict != Verdict::Correct || !r.well_defined(cfg.samples)) continue;
    return Equation{lhs, rhs, expr::Label::Correct};
  }
  return std::nullopt;
}

std::optional<Equation> Generator::incorrect(const Equation& source, std::mt19937_64& rng) const {
  const OracleConfig cfg = oracle_config();
  const ExprPtr tree = source.tree();
  std::vector<Path> function_nodes;
  std::vector<Path> literal_nodes;
  std::vector<Path> all_nodes;
  for (auto& p : expr::all_paths(*tree)) {
    if (p.empty()) continue;
    const ExprPtr node = expr::subtree(tree, p);
    if (!node->is_leaf()) function_nodes.push_back(p);
    if (node->kind() == ExprKind::Number || node->kind() == ExprKind::Constant) {
      literal_nodes.push_back(p);
    }
    all_nodes.push_back(std::move(p));
  }
  std::discrete_distribution<int> mode({config_.corruption.function_swap,
                                        config_.corruption.literal_perturb,
                                        config_.corruption.subtree_swap});
  static const auto unary = functions_of_arity(1);
  static const auto binary = functions_of_arity(2);

  for (int attempt = 0; attempt < 2 * config_.max_attempts; ++attempt) {
    ExprPtr corrupted;
    switch (mode(rng)) {
      case 0: {
        if (function_nodes.empty()) continue;
        const Path& p = pick(function_nodes, rng);
        const ExprPtr node = expr::subtree(tree, p);
        const auto& options = node->children().size() == 1 ? unary : binary;
        const Function f = pick(options, rng);
        if (f == node->function()) continue;
        corrupted = expr::replace(tree, p, Expr::function(f, node->children()));
        break;
      }
      case 1: {
        if (literal_nodes.empty()) continue;
        const Path& p = pick(literal_nodes, rng);
        const ExprPtr replacement = pick(literals_, rng);
        if (expr::structurally_equal(*replacement, *expr::subtree(tree, p))) continue;
        corrupted = expr::replace(tree, p, replacement);
        break;
      }
      default: {
        const Path& p = pick(all_nodes, rng);
        const ExprPtr node = expr::subtree(tree, p);
        const ExprPtr replacement = random_expression(node->depth(), rng);
        if (expr::structurally_equal(*replacement, *node)) continue;
        corrupted = expr::replace(tree, p, replacement);
        break;
      }
    }
    Equation eq{corrupted->children()[0], corrupted->children()[1], expr::Label::Incorrect};
    if (eq.depth() != source.depth()) continue;
    const auto verdict = check_equation(*eq.lhs, *eq.rhs, rng, cfg);
    if (verdict.verdict == Verdict::Incorrect && verdict.disagree == cfg.samples &&
        verdict.well_defined(cfg.samples)) {
      return eq;
    }
  }
  return std::nullopt;
}

std::optional<Equation> Generator::slot(int depth, bool negative, std::mt19937_64& rng) const {
  for (int attempt = 0; attempt < 4; ++attempt) {
    auto eq = correct(depth, rng);
    if (!eq) return std::nullopt;
    if (!negative) return eq;
    if (auto bad = incorrect(*eq, rng)) return bad;
  }
  return std::nullopt;
}

GenerationResult Generator::generate(int jobs) const {
  std::vector<SlotKey> slots;
  for (const auto& [depth, count] : config_.counts_per_depth) {
    const auto negatives =
        static_cast<std::size_t>(std::llround(config_.negative_fraction * static_cast<double>(count)));
    for (std::size_t i = 0; i < count; ++i) slots.push_back({depth, i >= count - negatives});
  }

  std::vector<std::optional<Equation>> results(slots.size());
  std::vector<std::size_t> slot_index(slots.size());
  {
    std::map<int, std::size_t> seen;
    for (std::size_t i = 0; i < slots.size(); ++i) slot_index[i] = seen[slots[i].depth]++;
  }
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < slots.size(); i = next++) {
      auto rng = slot_rng(config_.seed, slots[i].depth, slot_index[i]);
      results[i] = slot(slots[i].depth, slots[i].negative, rng);
    }
  };
  const int threads = std::max(1, jobs);
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  GenerationResult out;
  std::unordered_set<std::string> keys;
  // Deficits are refilled sequentially from fresh slot indices past the
  // configured count, so the output stays independent of `jobs`.
  std::map<std::pair<int, bool>, std::size_t> deficit;
  std::map<std::pair<int, bool>, std::size_t> skipped;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    const auto key = std::make_pair(slots[i].depth, slots[i].negative);
    if (!results[i]) {
      ++skipped[key];
      ++deficit[key];
      continue;
    }
    if (!keys.insert(results[i]->key()).second) {
      ++deficit[key];
      continue;
    }
    out.equations.push_back(std::move(*results[i]));
  }
  for (const auto& [key, n] : skipped) {
    out.warnings.push_back("depth " + std::to_string(key.first) + ": " + std::to_string(n) + " " +
                           (key.second ? "incorrect" : "correct") +
                           " slots missed the target depth after bounded retries");
  }
  for (const auto& [key, missing] : deficit) {
    const auto [depth, negative] = key;
    std::size_t filled = 0;
    const std::uint64_t base = config_.counts_per_depth.at(depth);
    const std::size_t budget = 20 * missing + 50;
    for (std::size_t tries = 0; tries < budget && filled < missing; ++tries) {
      auto rng = slot_rng(config_.seed, depth, base + 2 * tries + (negative ? 1 : 0));
      auto eq = slot(depth, negative, rng);
      if (!eq || !keys.insert(eq->key()).second) continue;
      out.equations.push_back(std::move(*eq));
      ++filled;
    }
    if (filled < missing) {
      out.warnings.push_back("depth " + std::to_string(depth) + ": produced " +
                             std::to_string(missing - filled) + " fewer unique " +
                             (negative ? "incorrect" : "correct") + " equations than requested");
    }
  }
  std::stable_sort(out.equations.begin(), out.equations.end(),
                   [](const Equation& a, const Equation& b) { return a.depth() < b.depth(); });
  return out;
}

std::vector<Equation> generate_correct(const GenConfig& config, int jobs) {
  GenConfig c = config;
  c.negative_fraction = 0.0;
  return Generator(c).generate(jobs).equations;
}

std::optional<Equation> generate_incorrect(const Equation& correct, const GenConfig& config,
                                           std::mt19937_64& rng) {
  return Generator(config).incorrect(correct, rng);
}

}  // namespace treesmu::datagen
