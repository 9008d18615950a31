#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "treesmu/equation_io.hpp"
#include "treesmu/expr.hpp"
#include "treesmu/metrics.hpp"
#include "treesmu/model.hpp"
#include "treesmu/splits.hpp"

namespace treesmu::eval {

// Anything that maps an equation to p(Correct).
using Scorer = std::function<double(const expr::Equation&)>;

Scorer model_scorer(const cells::Model& model);

struct Metrics {
  Confusion overall;
  std::map<int, Confusion> per_depth;

  nlohmann::json to_json() const;
  // depth,count,accuracy,precision,recall rows, then an "overall" row.
  void write_csv(const std::filesystem::path& path) const;
};

// Equations with depth in [depth_lo, depth_hi]; DataError if none are.
Metrics verify(const Scorer& scorer, std::span<const expr::Equation> equations,
               int depth_lo = 0, int depth_hi = 1 << 30);

enum class MatchMode { Oracle, Gold };

struct CompletionConfig {
  std::vector<std::size_t> ks{1, 5, 10, 20, 50};
  std::size_t pool_cap = 2000;
  std::uint64_t pool_seed = 0;
  MatchMode match = MatchMode::Oracle;
};

// Terminals, then every function applied to terminals, then seeded depth-2
// applications until `cap`; when the first two groups already exceed the
// cap, a seeded sample of them.
std::vector<expr::ExprPtr> candidate_pool(const expr::Vocab& vocab, std::size_t cap,
                                          std::uint64_t seed);

struct CompletionResult {
  std::vector<std::size_t> ks;
  // hits[depth][j]: items at that depth with a match in the top ks[j].
  std::map<int, std::vector<std::size_t>> hits;
  std::map<int, std::size_t> items;
  // Items where some candidate matches at all (exhaustive K).
  std::map<int, std::size_t> any_match;

  std::vector<double> overall_accuracy() const;
  double overall_upper_bound() const;
  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

// Ranks pool + gold (added when absent) for every item by descending score,
// ties by pool order. Zero candidates is a DataError.
CompletionResult run_completion(const Scorer& scorer, std::span<const expr::CompletionItem> items,
                                std::span<const expr::ExprPtr> pool,
                                const CompletionConfig& config);

// Whether filling the blank with `candidate` counts as a match.
bool completion_match(const expr::CompletionItem& item, const expr::ExprPtr& candidate,
                      MatchMode mode);

// Rows of a root stack with L2 norm above tau.
std::size_t used_rows(const std::vector<std::vector<double>>& rows, double tau);

struct ProbeResult {
  double tau = 0.001;
  std::map<int, double> mean_used;  // by equation depth
  std::map<int, std::size_t> count;

  nlohmann::json to_json() const;
  void write_csv(const std::filesystem::path& path) const;
};

// Usage of an equation is the mean over its two side roots. ContractError
// "architecture has no stack" for models without one.
ProbeResult stack_usage_probe(const cells::Model& model, std::span<const expr::Equation> equations,
                              double tau = 0.001);

// expr,class,h0..h{n-1}
void export_embeddings(const cells::Model& model,
                       std::span<const datagen::ClassedExpression> expressions,
                       const std::filesystem::path& csv);

}  // namespace treesmu::eval
