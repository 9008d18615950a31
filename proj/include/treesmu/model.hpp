#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "treesmu/cells.hpp"
#include "treesmu/checkpoint.hpp"
#include "treesmu/expr.hpp"
#include "treesmu/vocab.hpp"

namespace treesmu::cells {

// A full equation classifier: one cell bundle per function token (tree
// models) or one sequential LSTM, the leaf/token embedding table, and the
// root classifier p(Correct) = sigmoid(h_lhs . h_rhs).
class Model {
 public:
  Model(ModelConfig config, expr::Vocab vocab);

  // Reconstructs architecture and vocabulary from the checkpoint header.
  static Model from_checkpoint(ad::Checkpoint checkpoint);
  static Model load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path, const nlohmann::json& extra = {}) const;

  void initialize(std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const expr::Vocab& vocab() const { return vocab_; }
  ad::ParamStore& params() { return params_; }
  const ad::ParamStore& params() const { return params_; }

  expr::Label majority_label() const { return majority_; }
  void set_majority_label(expr::Label label) { majority_ = label; }

  // Root state of a batch of expressions that share one shape_key.
  NodeState encode_tree(CellContext& ctx, std::span<const expr::Expr* const> batch) const;
  // Root hidden state (n x B) for any non-majority architecture.
  ad::NodeId encode(CellContext& ctx, std::span<const expr::Expr* const> batch) const;
  // Logits h_lhs . h_rhs (1 x B) for equations sharing one shape_key.
  ad::NodeId logits(ad::Graph& graph, std::span<const expr::Equation* const> batch,
                    DropoutSource* dropout = nullptr) const;

  // p(Correct) without dropout. MajorityClass returns 1 or 0.
  double predict(const expr::Equation& equation) const;
  std::vector<double> predict(std::span<const expr::Equation> equations) const;

  // Root hidden state of a single expression (n values).
  std::vector<double> hidden(const expr::Expr& e) const;
  // Root stack rows (p rows of n values, zeros for empty rows). ContractError
  // "architecture has no stack" for non-stack models.
  std::vector<std::vector<double>> stack_rows(const expr::Expr& e) const;

  nlohmann::json metadata() const;

 private:
  NodeState encode_node(CellContext& ctx, std::span<const expr::Expr* const> batch) const;

  ModelConfig config_;
  expr::Vocab vocab_;
  ad::ParamStore params_;
  expr::Label majority_ = expr::Label::Correct;
};

// Scalar parameters of one model for the given config and vocabulary size,
// counted by building the store.
std::size_t parameter_count(const ModelConfig& config, const expr::Vocab& vocab);

}  // namespace treesmu::cells
