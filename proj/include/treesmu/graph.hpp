#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "treesmu/param_store.hpp"
#include "treesmu/tensor.hpp"

namespace treesmu::ad {

enum class OpKind : std::uint8_t {
  Constant,
  Parameter,
  MatMul,
  Add,
  Hadamard,
  Divide,
  Concat,
  Sigmoid,
  Tanh,
  Scale,
  RowSelect,
  RowStack,
  Dot,
  BceLoss,
  DropoutMaskApply,
  Embed,
};

std::string_view op_name(OpKind kind);

struct NodeId {
  std::uint32_t index = 0;
  bool operator==(const NodeId&) const = default;
};

// A define-by-run tape. Every builder call evaluates its node immediately, so
// creation order is a topological order. forward() re-evaluates the whole tape
// against the current parameter values (used by finite-difference checks).
//
// Elementwise binary ops (add, hadamard, divide) broadcast a r x 1 operand
// across columns, a 1 x c operand across rows, and a 1 x 1 operand across both.
class Graph {
 public:
  explicit Graph(const ParamStore& params);

  NodeId constant(Tensor value);
  NodeId parameter(ParamId id);
  NodeId parameter(std::string_view key);

  NodeId matmul(NodeId a, NodeId b);
  NodeId add(NodeId a, NodeId b);
  NodeId hadamard(NodeId a, NodeId b);
  NodeId divide(NodeId a, NodeId b);
  NodeId concat(std::span<const NodeId> parts);  // vertical stacking
  NodeId sigmoid(NodeId a);
  NodeId tanh(NodeId a);
  NodeId scale(NodeId a, double factor);
  NodeId row_select(NodeId a, std::size_t row);    // -> 1 x cols
  NodeId row_stack(std::span<const NodeId> rows);  // 1 x c rows -> k x c
  NodeId dot(NodeId a, NodeId b);                  // column-wise, -> 1 x cols
  // Summed binary cross-entropy of sigmoid(logits) against 0/1 labels,
  // evaluated in the log-sum-exp form so large |logit| stays finite.
  NodeId bce_loss(NodeId logits, std::vector<double> labels);
  // Elementwise product with a fixed, already rescaled mask.
  NodeId dropout(NodeId a, Tensor mask);
  // Column b of the result is row rows[b] of the table.
  NodeId embed(NodeId table, std::vector<std::uint32_t> rows);

  const Tensor& value(NodeId id) const;
  OpKind kind(NodeId id) const { return nodes_[id.index].op; }
  std::size_t size() const { return nodes_.size(); }
  NodeId last() const { return NodeId{static_cast<std::uint32_t>(nodes_.size() - 1)}; }

  const Tensor& forward();

  // Reverse sweep from a 1 x 1 root; parameter gradients are added into `out`.
  void backward(NodeId root, GradMap& out);
  GradMap backward(NodeId root);
  // Gradient of the last backward() w.r.t. any node (empty if untouched).
  const Tensor& gradient(NodeId id) const { return nodes_[id.index].grad; }

 private:
  struct Node {
    OpKind op = OpKind::Constant;
    std::vector<std::uint32_t> inputs;
    Tensor value;
    Tensor grad;
    double factor = 0.0;
    std::size_t row = 0;
    ParamId param{};
    std::vector<double> labels;
    std::vector<std::uint32_t> rows;
    Tensor mask;
  };

  NodeId push(Node node);
  void evaluate(std::uint32_t index);
  void propagate(std::uint32_t index);
  Tensor& grad_of(std::uint32_t index);
  [[noreturn]] void fail(std::uint32_t index, const std::string& detail) const;

  const ParamStore& params_;
  std::vector<Node> nodes_;
  std::unordered_map<std::uint32_t, std::uint32_t> param_nodes_;
};

}  // namespace treesmu::ad
