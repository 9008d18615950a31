#include "treesmu/eval.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <random>
#include <unordered_set>

#include "treesmu/errors.hpp"
#include "treesmu/oracle.hpp"

namespace treesmu::eval {
namespace {

using expr::Equation;
using expr::Expr;
using expr::ExprPtr;

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

nlohmann::json confusion_json(const Confusion& c) {
  return {{"count", c.total()},     {"accuracy", c.accuracy()}, {"precision", c.precision()},
          {"recall", c.recall()},   {"tp", c.tp},               {"tn", c.tn},
          {"fp", c.fp},             {"fn", c.fn}};
}

void confusion_row(std::ostream& out, const std::string& depth, const Confusion& c) {
  out << depth << "," << c.total() << "," << c.accuracy() << "," << c.precision() << ","
      << c.recall() << "\n";
}

}  // namespace

Scorer model_scorer(const cells::Model& model) {
  return [&model](const Equation& eq) { return model.predict(eq); };
}

nlohmann::json Metrics::to_json() const {
  nlohmann::json depths = nlohmann::json::object();
  for (const auto& [d, c] : per_depth) depths[std::to_string(d)] = confusion_json(c);
  return {{"overall", confusion_json(overall)}, {"per_depth", depths}};
}

void Metrics::write_csv(const std::filesystem::path& path) const {
  auto out = open_csv(path);
  out << "depth,count,accuracy,precision,recall\n";
  for (const auto& [d, c] : per_depth) confusion_row(out, std::to_string(d), c);
  confusion_row(out, "overall", overall);
}

Metrics verify(const Scorer& scorer, std::span<const Equation> equations, int depth_lo,
               int depth_hi) {
  Metrics m;
  for (const auto& eq : equations) {
    const int d = eq.depth();
    if (d < depth_lo || d > depth_hi) continue;
    const auto predicted = decide(scorer(eq));
    m.per_depth[d].add(predicted, eq.label);
    m.overall.add(predicted, eq.label);
  }
  if (m.overall.total() == 0) {
    throw DataError("no test equations with depth in [" + std::to_string(depth_lo) + ", " +
                    std::to_string(depth_hi) + "]");
  }
  return m;
}

std::vector<ExprPtr> candidate_pool(const expr::Vocab& vocab, std::size_t cap,
                                    std::uint64_t seed) {
  if (cap == 0) throw ConfigError("candidate pool cap must be positive");
  std::vector<ExprPtr> leaves;
  for (const auto& t : vocab.terminals()) leaves.push_back(expr::parse(t));
  std::vector<ExprPtr> shallow;
  std::vector<const expr::FunctionInfo*> functions;
  for (const auto& f : expr::function_table()) {
    if (f.id == expr::Function::Equal) continue;
    functions.push_back(&f);
    if (f.arity == 1) {
      for (const auto& a : leaves) shallow.push_back(Expr::function(f.id, {a}));
    } else {
      for (const auto& a : leaves) {
        for (const auto& b : leaves) shallow.push_back(Expr::function(f.id, {a, b}));
      }
    }
  }
  std::vector<ExprPtr> pool = leaves;
  pool.insert(pool.end(), shallow.begin(), shallow.end());
  std::mt19937_64 rng(seed);
  if (pool.size() >= cap) {
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(cap);
    std::sort(idx.begin(), idx.end());
    std::vector<ExprPtr> out;
    for (auto i : idx) out.push_back(pool[i]);
    return out;
  }
  std::unordered_set<std::string> seen;
  for (const auto& e : pool) seen.insert(expr::print(*e));
  auto pick = [&rng](const auto& v) {
    return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
  };
  const std::size_t budget = 20 * (cap - pool.size()) + 100;
  for (std::size_t tries = 0; tries < budget && pool.size() < cap; ++tries) {
    const auto* f = pick(functions);
    ExprPtr e;
    if (f->arity == 1) {
      e = Expr::function(f->id, {pick(shallow)});
    } else {
      ExprPtr deep = pick(shallow);
      ExprPtr other = std::bernoulli_distribution(0.5)(rng) ? pick(leaves) : pick(shallow);
      if (std::bernoulli_distribution(0.5)(rng)) std::swap(deep, other);
      e = Expr::function(f->id, {deep, other});
    }
    if (seen.insert(expr::print(*e)).second) pool.push_back(std::move(e));
  }
  return pool;
}

bool completion_match(const expr::CompletionItem& item, const ExprPtr& candidate, MatchMode mode) {
  if (mode == MatchMode::Gold) return expr::print(*candidate) == expr::print(*item.gold);
  const Equation eq = item.filled(candidate);
  std::mt19937_64 rng(datagen::string_seed(eq.key()));
  return datagen::check_equation(*eq.lhs, *eq.rhs, rng).verdict == datagen::Verdict::Correct;
}

std::vector<double> CompletionResult::overall_accuracy() const {
  std::vector<double> acc(ks.size(), 0.0);
  std::size_t total = 0;
  for (const auto& [d, n] : items) total += n;
  if (total == 0) return acc;
  for (std::size_t j = 0; j < ks.size(); ++j) {
    std::size_t h = 0;
    for (const auto& [d, v] : hits) h += v[j];
    acc[j] = static_cast<double>(h) / static_cast<double>(total);
  }
  return acc;
}

double CompletionResult::overall_upper_bound() const {
  std::size_t total = 0;
  std::size_t any = 0;
  for (const auto& [d, n] : items) total += n;
  for (const auto& [d, n] : any_match) any += n;
  return total == 0 ? 0.0 : static_cast<double>(any) / static_cast<double>(total);
}

nlohmann::json CompletionResult::to_json() const {
  nlohmann::json depths = nlohmann::json::object();
  for (const auto& [d, n] : items) {
    nlohmann::json acc = nlohmann::json::array();
    for (auto h : hits.at(d)) acc.push_back(static_cast<double>(h) / static_cast<double>(n));
    depths[std::to_string(d)] = {{"items", n},
                                 {"top_k_accuracy", acc},
                                 {"upper_bound", static_cast<double>(any_match.at(d)) /
                                                     static_cast<double>(n)}};
  }
  return {{"k", ks},
          {"overall", {{"top_k_accuracy", overall_accuracy()}, {"upper_bound", overall_upper_bound()}}},
          {"per_depth", depths}};
}

void CompletionResult::write_csv(const std::filesystem::path& path) const {
  auto out = open_csv(path);
  out << "depth,items";
  for (auto k : ks) out << ",top" << k;
  out << ",upper_bound\n";
  std::size_t total = 0;
  for (const auto& [d, n] : items) {
    total += n;
    out << d << "," << n;
    for (auto h : hits.at(d)) out << "," << static_cast<double>(h) / static_cast<double>(n);
    out << "," << static_cast<double>(any_match.at(d)) / static_cast<double>(n) << "\n";
  }
  out << "overall," << total;
  for (double a : overall_accuracy()) out << "," << a;
  out << "," << overall_upper_bound() << "\n";
}

CompletionResult run_completion(const Scorer& scorer, std::span<const expr::CompletionItem> items,
                                std::span<const ExprPtr> pool, const CompletionConfig& config) {
  if (config.ks.empty()) throw ConfigError("completion needs at least one K");
  for (auto k : config.ks) {
    if (k == 0) throw ConfigError("K must be positive");
  }
  CompletionResult result;
  result.ks = config.ks;
  for (const auto& item : items) {
    std::vector<ExprPtr> candidates(pool.begin(), pool.end());
    const std::string gold = expr::print(*item.gold);
    if (std::none_of(candidates.begin(), candidates.end(),
                     [&](const ExprPtr& c) { return expr::print(*c) == gold; })) {
      candidates.push_back(item.gold);
    }
    if (candidates.empty()) throw DataError("completion item has no candidates");
    std::vector<double> scores;
    scores.reserve(candidates.size());
    for (const auto& c : candidates) scores.push_back(scorer(item.filled(c)));
    std::vector<std::size_t> order(candidates.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    std::size_t first = candidates.size();
    for (std::size_t r = 0; r < order.size(); ++r) {
      if (completion_match(item, candidates[order[r]], config.match)) {
        first = r;
        break;
      }
    }
    const int d = item.depth();
    auto& h = result.hits[d];
    h.resize(config.ks.size(), 0);
    for (std::size_t j = 0; j < config.ks.size(); ++j) h[j] += first < config.ks[j];
    ++result.items[d];
    result.any_match[d] += first < candidates.size();
  }
  return result;
}

std::size_t used_rows(const std::vector<std::vector<double>>& rows, double tau) {
  std::size_t used = 0;
  for (const auto& row : rows) {
    double ss = 0;
    for (double v : row) ss += v * v;
    used += std::sqrt(ss) > tau;
  }
  return used;
}

nlohmann::json ProbeResult::to_json() const {
  nlohmann::json depths = nlohmann::json::object();
  for (const auto& [d, m] : mean_used) {
    depths[std::to_string(d)] = {{"mean_used_rows", m}, {"count", count.at(d)}};
  }
  return {{"tau", tau}, {"per_depth", depths}};
}

void ProbeResult::write_csv(const std::filesystem::path& path) const {
  auto out = open_csv(path);
  out << "depth,count,mean_used_rows\n";
  for (const auto& [d, m] : mean_used) out << d << "," << count.at(d) << "," << m << "\n";
}

ProbeResult stack_usage_probe(const cells::Model& model, std::span<const Equation> equations,
                              double tau) {
  if (!model.config().has_stack()) throw ContractError("architecture has no stack");
  ProbeResult result;
  result.tau = tau;
  std::map<int, double> sums;
  for (const auto& eq : equations) {
    const double usage = 0.5 * static_cast<double>(used_rows(model.stack_rows(*eq.lhs), tau) +
                                                   used_rows(model.stack_rows(*eq.rhs), tau));
    sums[eq.depth()] += usage;
    ++result.count[eq.depth()];
  }
  for (const auto& [d, s] : sums) result.mean_used[d] = s / static_cast<double>(result.count[d]);
  return result;
}

void export_embeddings(const cells::Model& model,
                       std::span<const datagen::ClassedExpression> expressions,
                       const std::filesystem::path& csv) {
  auto out = open_csv(csv);
  out << "expr,class";
  for (std::size_t i = 0; i < model.config().n; ++i) out << ",h" << i;
  out << "\n";
  for (const auto& item : expressions) {
    const auto h = model.hidden(*item.expression);
    out << '"' << expr::print(*item.expression) << "\"," << item.label;
    for (double v : h) out << "," << v;
    out << "\n";
  }
}

}  // namespace treesmu::eval
