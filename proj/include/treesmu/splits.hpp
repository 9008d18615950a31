#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "treesmu/equation_io.hpp"
#include "treesmu/expr.hpp"
#include "treesmu/generator.hpp"

namespace treesmu::datagen {

struct SplitSpec {
  std::string name;  // train, validation or test
  int depth_lo = 1;
  int depth_hi = 19;
  // Exactly one of fraction (of the depth-filtered pool) and count is set.
  std::optional<double> fraction;
  std::optional<std::size_t> count;
  std::uint64_t seed = 0;
};

struct Protocol {
  std::string name;
  std::vector<SplitSpec> splits;
};

struct LabelCounts {
  std::size_t correct = 0;
  std::size_t incorrect = 0;
  std::size_t total() const { return correct + incorrect; }
};

LabelCounts count_labels(const std::vector<expr::Equation>& equations);

// Accuracy of always predicting the majority label of `reference` (ties go
// to Correct) on `target`.
double majority_accuracy(const LabelCounts& reference, const LabelCounts& target);

// Partitions the pools into the protocol's splits. train and validation draw
// disjointly from `trainval`; test draws from `test` minus any equation
// already placed in train or validation. Specs are filled in order, each from
// what earlier specs left. An empty split is a DataError.
std::vector<std::pair<SplitSpec, std::vector<expr::Equation>>> make_splits(
    const std::vector<expr::Equation>& trainval, const std::vector<expr::Equation>& test,
    const Protocol& protocol);

// Writes <protocol>_<split>.jsonl files into `dir` and returns the manifest
// entry (seeds, counts per depth, label balance, majority accuracy).
nlohmann::json write_splits(const std::vector<expr::Equation>& trainval,
                            const std::vector<expr::Equation>& test, const Protocol& protocol,
                            const std::filesystem::path& dir);

// Completion items: a depth-1 or depth-2 subtree of a Correct equation is cut
// out and replaced by the blank leaf.
std::vector<expr::CompletionItem> make_completion_items(const std::vector<expr::Equation>& pool,
                                                        std::size_t count, int depth_lo,
                                                        int depth_hi, std::uint64_t seed);

struct ClassedExpression {
  expr::ExprPtr expression;
  std::string label;  // "0", "1" or "other"
};

// Depth 1-3 expressions grown from the constants 0 and 1 by value-preserving
// rewrites, mixed with random expressions; classes come from the oracle.
std::vector<ClassedExpression> make_substitutivity_set(const Generator& generator,
                                                       std::size_t count, std::uint64_t seed);

// JSON Lines of {"expr": "<prefix>", "class": "0"|"1"|"other"}.
void write_classed_expressions(const std::filesystem::path& path,
                               const std::vector<ClassedExpression>& items);
std::vector<ClassedExpression> read_classed_expressions(const std::filesystem::path& path);

struct DatasetConfig {
  GenConfig trainval;
  GenConfig test;
  std::vector<Protocol> protocols;
  std::size_t completion_count = 0;
  int completion_depth_lo = 2;
  int completion_depth_hi = 7;
  std::uint64_t completion_seed = 11;
  std::size_t substitutivity_count = 0;
  std::uint64_t substitutivity_seed = 13;

  // Throws ConfigError (unknown keys, bad ranges, equal pool seeds).
  static DatasetConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Desk-scale protocols: productivity (train 1-4, test 5-7), localism
// (train 3-6, test 1-2) and systematicity (train and test 1-4).
std::vector<Protocol> desk_protocols();

struct DatasetSummary {
  nlohmann::json manifest;
  std::vector<std::string> warnings;
  std::vector<std::filesystem::path> files;
};

// Generates both pools and writes every protocol split plus the optional
// completion.jsonl and substitutivity.jsonl files.
DatasetSummary generate_dataset(const DatasetConfig& config, const std::filesystem::path& dir,
                                int jobs = 1);

}  // namespace treesmu::datagen
