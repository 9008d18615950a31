#include "treesmu/graph.hpp"

#include <Eigen/Core>
#include <cmath>
#include <string>

#include "treesmu/errors.hpp"

namespace treesmu::ad {
namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;

MatMap as_matrix(Tensor& t) { return MatMap(t.raw(), t.rows(), t.cols()); }
ConstMatMap as_matrix(const Tensor& t) { return ConstMatMap(t.raw(), t.rows(), t.cols()); }

double sigmoid_scalar(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

bool broadcastable(std::size_t a, std::size_t b) { return a == b || a == 1 || b == 1; }

// Index helper for an operand broadcast into an out_rows x out_cols result.
struct Broadcast {
  std::size_t rows, cols;
  std::size_t at(std::size_t r, std::size_t c) const {
    return (rows == 1 ? 0 : r) * cols + (cols == 1 ? 0 : c);
  }
};

void ensure_shape(Tensor& t, std::size_t rows, std::size_t cols) {
  if (t.rows() != rows || t.cols() != cols) t = Tensor(rows, cols);
}

}  // namespace

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::Constant: return "constant";
    case OpKind::Parameter: return "parameter";
    case OpKind::MatMul: return "matmul";
    case OpKind::Add: return "add";
    case OpKind::Hadamard: return "hadamard";
    case OpKind::Divide: return "divide";
    case OpKind::Concat: return "concat";
    case OpKind::Sigmoid: return "sigmoid";
    case OpKind::Tanh: return "tanh";
    case OpKind::Scale: return "scale";
    case OpKind::RowSelect: return "row-select";
    case OpKind::RowStack: return "row-stack";
    case OpKind::Dot: return "dot";
    case OpKind::BceLoss: return "bce-loss";
    case OpKind::DropoutMaskApply: return "dropout-mask-apply";
    case OpKind::Embed: return "embed";
  }
  return "unknown";
}

Graph::Graph(const ParamStore& params) : params_(params) {}

const Tensor& Graph::value(NodeId id) const {
  const Node& n = nodes_[id.index];
  if (n.op == OpKind::Parameter) return params_.value(n.param);
  return n.value;
}

NodeId Graph::push(Node node) {
  const auto index = static_cast<std::uint32_t>(nodes_.size());
  for (auto in : node.inputs) {
    if (in >= index) throw ContractError("graph input refers to a later node");
  }
  nodes_.push_back(std::move(node));
  try {
    evaluate(index);
  } catch (...) {
    nodes_.pop_back();
    throw;
  }
  return NodeId{index};
}

void Graph::fail(std::uint32_t index, const std::string& detail) const {
  throw DimensionError(std::string(op_name(nodes_[index].op)) + " (node " +
                       std::to_string(index) + "): " + detail);
}

NodeId Graph::constant(Tensor value) {
  Node n;
  n.op = OpKind::Constant;
  n.value = std::move(value);
  return push(std::move(n));
}

NodeId Graph::parameter(ParamId id) {
  if (id.index >= params_.size()) throw ContractError("parameter id out of range");
  if (auto it = param_nodes_.find(id.index); it != param_nodes_.end()) {
    return NodeId{it->second};
  }
  Node n;
  n.op = OpKind::Parameter;
  n.param = id;
  NodeId node = push(std::move(n));
  param_nodes_.emplace(id.index, node.index);
  return node;
}

NodeId Graph::parameter(std::string_view key) { return parameter(params_.id(key)); }

NodeId Graph::matmul(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::MatMul;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::add(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Add;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::hadamard(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Hadamard;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::divide(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Divide;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::concat(std::span<const NodeId> parts) {
  Node n;
  n.op = OpKind::Concat;
  for (auto p : parts) n.inputs.push_back(p.index);
  return push(std::move(n));
}

NodeId Graph::sigmoid(NodeId a) {
  Node n;
  n.op = OpKind::Sigmoid;
  n.inputs = {a.index};
  return push(std::move(n));
}

NodeId Graph::tanh(NodeId a) {
  Node n;
  n.op = OpKind::Tanh;
  n.inputs = {a.index};
  return push(std::move(n));
}

NodeId Graph::scale(NodeId a, double factor) {
  Node n;
  n.op = OpKind::Scale;
  n.inputs = {a.index};
  n.factor = factor;
  return push(std::move(n));
}

NodeId Graph::row_select(NodeId a, std::size_t row) {
  Node n;
  n.op = OpKind::RowSelect;
  n.inputs = {a.index};
  n.row = row;
  return push(std::move(n));
}

NodeId Graph::row_stack(std::span<const NodeId> rows) {
  Node n;
  n.op = OpKind::RowStack;
  for (auto r : rows) n.inputs.push_back(r.index);
  return push(std::move(n));
}

NodeId Graph::dot(NodeId a, NodeId b) {
  Node n;
  n.op = OpKind::Dot;
  n.inputs = {a.index, b.index};
  return push(std::move(n));
}

NodeId Graph::bce_loss(NodeId logits, std::vector<double> labels) {
  Node n;
  n.op = OpKind::BceLoss;
  n.inputs = {logits.index};
  n.labels = std::move(labels);
  return push(std::move(n));
}

NodeId Graph::dropout(NodeId a, Tensor mask) {
  Node n;
  n.op = OpKind::DropoutMaskApply;
  n.inputs = {a.index};
  n.mask = std::move(mask);
  return push(std::move(n));
}

NodeId Graph::embed(NodeId table, std::vector<std::uint32_t> rows) {
  Node n;
  n.op = OpKind::Embed;
  n.inputs = {table.index};
  n.rows = std::move(rows);
  return push(std::move(n));
}

void Graph::evaluate(std::uint32_t index) {
  Node& n = nodes_[index];
  auto in = [&](std::size_t k) -> const Tensor& { return value(NodeId{n.inputs[k]}); };

  switch (n.op) {
    case OpKind::Constant:
    case OpKind::Parameter:
      return;

    case OpKind::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (a.cols() != b.rows()) {
        fail(index, "cannot multiply " + a.shape_string() + " by " + b.shape_string());
      }
      ensure_shape(n.value, a.rows(), b.cols());
      as_matrix(n.value).noalias() = as_matrix(a) * as_matrix(b);
      return;
    }

    case OpKind::Add:
    case OpKind::Hadamard:
    case OpKind::Divide: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!broadcastable(a.rows(), b.rows()) || !broadcastable(a.cols(), b.cols())) {
        fail(index, "operands " + a.shape_string() + " and " + b.shape_string() +
                        " do not broadcast");
      }
      const std::size_t rows = std::max(a.rows(), b.rows());
      const std::size_t cols = std::max(a.cols(), b.cols());
      ensure_shape(n.value, rows, cols);
      if (a.same_shape(b)) {
        auto out = as_matrix(n.value).array();
        if (n.op == OpKind::Add) out = as_matrix(a).array() + as_matrix(b).array();
        else if (n.op == OpKind::Hadamard) out = as_matrix(a).array() * as_matrix(b).array();
        else out = as_matrix(a).array() / as_matrix(b).array();
        return;
      }
      const Broadcast ba{a.rows(), a.cols()};
      const Broadcast bb{b.rows(), b.cols()};
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
          const double x = a[ba.at(r, c)];
          const double y = b[bb.at(r, c)];
          double out;
          if (n.op == OpKind::Add) out = x + y;
          else if (n.op == OpKind::Hadamard) out = x * y;
          else out = x / y;
          n.value(r, c) = out;
        }
      }
      return;
    }

    case OpKind::Concat: {
      if (n.inputs.empty()) fail(index, "no parts");
      std::size_t rows = 0;
      const std::size_t cols = in(0).cols();
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (in(k).cols() != cols) {
          fail(index, "part " + std::to_string(k) + " has shape " + in(k).shape_string() +
                          ", expected " + std::to_string(cols) + " columns");
        }
        rows += in(k).rows();
      }
      ensure_shape(n.value, rows, cols);
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        const Tensor& part = in(k);
        std::copy(part.data().begin(), part.data().end(), n.value.raw() + offset);
        offset += part.size();
      }
      return;
    }

    case OpKind::Sigmoid:
    case OpKind::Tanh: {
      const Tensor& a = in(0);
      ensure_shape(n.value, a.rows(), a.cols());
      if (n.op == OpKind::Sigmoid) {
        for (std::size_t k = 0; k < a.size(); ++k) n.value[k] = sigmoid_scalar(a[k]);
      } else {
        for (std::size_t k = 0; k < a.size(); ++k) n.value[k] = std::tanh(a[k]);
      }
      return;
    }

    case OpKind::Scale: {
      const Tensor& a = in(0);
      ensure_shape(n.value, a.rows(), a.cols());
      for (std::size_t k = 0; k < a.size(); ++k) n.value[k] = a[k] * n.factor;
      return;
    }

    case OpKind::RowSelect: {
      const Tensor& a = in(0);
      if (n.row >= a.rows()) {
        fail(index, "row " + std::to_string(n.row) + " outside " + a.shape_string());
      }
      ensure_shape(n.value, 1, a.cols());
      for (std::size_t c = 0; c < a.cols(); ++c) n.value[c] = a(n.row, c);
      return;
    }

    case OpKind::RowStack: {
      if (n.inputs.empty()) fail(index, "no rows");
      const std::size_t cols = in(0).cols();
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        if (in(k).rows() != 1 || in(k).cols() != cols) {
          fail(index, "row " + std::to_string(k) + " has shape " + in(k).shape_string() +
                          ", expected 1x" + std::to_string(cols));
        }
      }
      ensure_shape(n.value, n.inputs.size(), cols);
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        for (std::size_t c = 0; c < cols; ++c) n.value(k, c) = in(k)[c];
      }
      return;
    }

    case OpKind::Dot: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      if (!a.same_shape(b)) {
        fail(index, "operands " + a.shape_string() + " and " + b.shape_string() + " differ");
      }
      ensure_shape(n.value, 1, a.cols());
      n.value.fill(0.0);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) n.value[c] += a(r, c) * b(r, c);
      }
      return;
    }

    case OpKind::BceLoss: {
      const Tensor& z = in(0);
      if (z.rows() != 1 || z.cols() != n.labels.size()) {
        fail(index, "logits " + z.shape_string() + " vs " + std::to_string(n.labels.size()) +
                        " labels");
      }
      double total = 0.0;
      for (std::size_t c = 0; c < z.cols(); ++c) {
        const double x = z[c];
        total += std::max(x, 0.0) - x * n.labels[c] + std::log1p(std::exp(-std::abs(x)));
      }
      ensure_shape(n.value, 1, 1);
      n.value[0] = total;
      return;
    }

    case OpKind::DropoutMaskApply: {
      const Tensor& a = in(0);
      if (!a.same_shape(n.mask)) {
        fail(index, "mask " + n.mask.shape_string() + " vs input " + a.shape_string());
      }
      ensure_shape(n.value, a.rows(), a.cols());
      for (std::size_t k = 0; k < a.size(); ++k) n.value[k] = a[k] * n.mask[k];
      return;
    }

    case OpKind::Embed: {
      const Tensor& table = in(0);
      ensure_shape(n.value, table.cols(), n.rows.size());
      for (std::size_t b = 0; b < n.rows.size(); ++b) {
        if (n.rows[b] >= table.rows()) {
          fail(index, "row " + std::to_string(n.rows[b]) + " outside " + table.shape_string());
        }
        for (std::size_t r = 0; r < table.cols(); ++r) n.value(r, b) = table(n.rows[b], r);
      }
      return;
    }
  }
}

const Tensor& Graph::forward() {
  if (nodes_.empty()) throw ContractError("forward on an empty graph");
  for (std::uint32_t i = 0; i < nodes_.size(); ++i) evaluate(i);
  return value(last());
}

Tensor& Graph::grad_of(std::uint32_t index) {
  Node& n = nodes_[index];
  const Tensor& v = value(NodeId{index});
  if (n.grad.empty()) n.grad = Tensor(v.rows(), v.cols());
  return n.grad;
}

void Graph::propagate(std::uint32_t index) {
  // Copy of the upstream gradient is unnecessary: inputs always have smaller
  // indices, so grad_of() on them never reallocates this node's storage.
  Node& n = nodes_[index];
  const Tensor& g = n.grad;
  auto in = [&](std::size_t k) -> const Tensor& { return value(NodeId{n.inputs[k]}); };

  switch (n.op) {
    case OpKind::Constant:
    case OpKind::Parameter:
      return;

    case OpKind::MatMul: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor& ga = grad_of(n.inputs[0]);
      as_matrix(ga).noalias() += as_matrix(g) * as_matrix(b).transpose();
      Tensor& gb = grad_of(n.inputs[1]);
      as_matrix(gb).noalias() += as_matrix(a).transpose() * as_matrix(g);
      return;
    }

    case OpKind::Add:
    case OpKind::Hadamard:
    case OpKind::Divide: {
      const std::uint32_t ia = n.inputs[0];
      const std::uint32_t ib = n.inputs[1];
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor& ga = grad_of(ia);
      Tensor& gb = grad_of(ib);
      if (a.same_shape(b) && ia != ib) {
        auto G = as_matrix(g).array();
        if (n.op == OpKind::Add) {
          as_matrix(ga).array() += G;
          as_matrix(gb).array() += G;
        } else if (n.op == OpKind::Hadamard) {
          as_matrix(ga).array() += G * as_matrix(b).array();
          as_matrix(gb).array() += G * as_matrix(a).array();
        } else {
          auto B = as_matrix(b).array();
          as_matrix(ga).array() += G / B;
          as_matrix(gb).array() -= G * as_matrix(a).array() / (B * B);
        }
        return;
      }
      const Broadcast ba{a.rows(), a.cols()};
      const Broadcast bb{b.rows(), b.cols()};
      for (std::size_t r = 0; r < g.rows(); ++r) {
        for (std::size_t c = 0; c < g.cols(); ++c) {
          const double up = g(r, c);
          const std::size_t ka = ba.at(r, c);
          const std::size_t kb = bb.at(r, c);
          const double x = a[ka];
          const double y = b[kb];
          if (n.op == OpKind::Add) {
            ga[ka] += up;
            gb[kb] += up;
          } else if (n.op == OpKind::Hadamard) {
            ga[ka] += up * y;
            gb[kb] += up * x;
          } else {
            ga[ka] += up / y;
            gb[kb] -= up * x / (y * y);
          }
        }
      }
      return;
    }

    case OpKind::Concat: {
      std::size_t offset = 0;
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Tensor& gk = grad_of(n.inputs[k]);
        for (std::size_t e = 0; e < gk.size(); ++e) gk[e] += g[offset + e];
        offset += gk.size();
      }
      return;
    }

    case OpKind::Sigmoid: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double s = n.value[k];
        ga[k] += g[k] * s * (1.0 - s);
      }
      return;
    }

    case OpKind::Tanh: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double t = n.value[k];
        ga[k] += g[k] * (1.0 - t * t);
      }
      return;
    }

    case OpKind::Scale: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * n.factor;
      return;
    }

    case OpKind::RowSelect: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t c = 0; c < g.cols(); ++c) ga(n.row, c) += g[c];
      return;
    }

    case OpKind::RowStack: {
      for (std::size_t k = 0; k < n.inputs.size(); ++k) {
        Tensor& gk = grad_of(n.inputs[k]);
        for (std::size_t c = 0; c < g.cols(); ++c) gk[c] += g(k, c);
      }
      return;
    }

    case OpKind::Dot: {
      const Tensor& a = in(0);
      const Tensor& b = in(1);
      Tensor& ga = grad_of(n.inputs[0]);
      Tensor& gb = grad_of(n.inputs[1]);
      for (std::size_t r = 0; r < a.rows(); ++r) {
        for (std::size_t c = 0; c < a.cols(); ++c) {
          ga(r, c) += g[c] * b(r, c);
          gb(r, c) += g[c] * a(r, c);
        }
      }
      return;
    }

    case OpKind::BceLoss: {
      const Tensor& z = in(0);
      Tensor& gz = grad_of(n.inputs[0]);
      for (std::size_t c = 0; c < z.cols(); ++c) {
        gz[c] += g[0] * (sigmoid_scalar(z[c]) - n.labels[c]);
      }
      return;
    }

    case OpKind::DropoutMaskApply: {
      Tensor& ga = grad_of(n.inputs[0]);
      for (std::size_t k = 0; k < g.size(); ++k) ga[k] += g[k] * n.mask[k];
      return;
    }

    case OpKind::Embed: {
      Tensor& gt = grad_of(n.inputs[0]);
      for (std::size_t b = 0; b < n.rows.size(); ++b) {
        for (std::size_t r = 0; r < g.rows(); ++r) gt(n.rows[b], r) += g(r, b);
      }
      return;
    }
  }
}

void Graph::backward(NodeId root, GradMap& out) {
  if (root.index >= nodes_.size()) throw ContractError("backward root out of range");
  const Tensor& root_value = value(root);
  if (root_value.rows() != 1 || root_value.cols() != 1) {
    throw ContractError("backward root must be scalar, got " + root_value.shape_string());
  }
  for (auto& n : nodes_) n.grad = Tensor();
  grad_of(root.index).fill(1.0);
  for (std::uint32_t i = root.index + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.grad.empty()) continue;
    if (n.op == OpKind::Parameter) {
      out.accumulate(n.param, n.grad);
    } else {
      propagate(i);
    }
  }
}

GradMap Graph::backward(NodeId root) {
  GradMap grads(params_.size());
  backward(root, grads);
  return grads;
}

}  // namespace treesmu::ad
