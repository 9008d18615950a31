#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "treesmu/expr.hpp"
#include "treesmu/oracle.hpp"
#include "treesmu/rules.hpp"

namespace treesmu::datagen {

using expr::Equation;

struct CorruptionWeights {
  double function_swap = 0.4;
  double literal_perturb = 0.3;
  double subtree_swap = 0.3;
};

struct GenConfig {
  std::uint64_t seed = 1;
  // Target number of equations per equation depth.
  std::map<int, std::size_t> counts_per_depth;
  int max_depth = 19;
  CorruptionWeights corruption;
  int oracle_samples = 16;
  // Share of each depth's slots that are corrupted into Incorrect equations.
  double negative_fraction = 0.45;
  // Probability that a rewrite targets a node on a deepest path, which pushes
  // generation towards the target depth faster.
  double depth_bias = 0.3;
  // Restarts per slot before it is skipped with a warning.
  int max_attempts = 40;

  // Throws ConfigError.
  void validate() const;
  nlohmann::json to_json() const;
  static GenConfig from_json(const nlohmann::json& j);
};

struct GenerationResult {
  std::vector<Equation> equations;
  std::vector<std::string> warnings;
};

class Generator {
 public:
  explicit Generator(GenConfig config, std::vector<RewriteRule> rules = default_rules());

  const GenConfig& config() const { return config_; }

  // One oracle-Correct equation of exactly `depth`, or nullopt after
  // max_attempts restarts.
  std::optional<Equation> correct(int depth, std::mt19937_64& rng) const;
  // One corruption of `source` at the same depth that disagrees with it on
  // every oracle sample, or nullopt after bounded attempts.
  std::optional<Equation> incorrect(const Equation& source, std::mt19937_64& rng) const;

  // Rewrites `start` (keeping its value) until it reaches exactly `depth`.
  std::optional<expr::ExprPtr> grow(const expr::ExprPtr& start, int depth,
                                    std::mt19937_64& rng) const;

  expr::ExprPtr random_leaf(std::mt19937_64& rng) const;
  expr::ExprPtr random_expression(int depth, std::mt19937_64& rng) const;

  // Mixed-label corpus with exact per-depth label quotas, deduplicated by
  // equation string. Output depends only on the config, not on `jobs`.
  GenerationResult generate(int jobs = 1) const;

 private:
  std::optional<expr::ExprPtr> rewrite_step(const expr::ExprPtr& root, int max_depth,
                                            std::mt19937_64& rng) const;
  std::optional<Equation> slot(int depth, bool negative, std::mt19937_64& rng) const;
  OracleConfig oracle_config() const;

  GenConfig config_;
  std::vector<RewriteRule> rules_;
  std::vector<expr::ExprPtr> symbols_;
  std::vector<expr::ExprPtr> literals_;
};

// Per-slot stream derived from (seed, depth, slot).
std::mt19937_64 slot_rng(std::uint64_t seed, int depth, std::uint64_t slot);

// Convenience wrappers over Generator.
std::vector<Equation> generate_correct(const GenConfig& config, int jobs = 1);
std::optional<Equation> generate_incorrect(const Equation& correct, const GenConfig& config,
                                           std::mt19937_64& rng);

}  // namespace treesmu::datagen
