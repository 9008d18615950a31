#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "treesmu/graph.hpp"
#include "treesmu/param_store.hpp"

namespace treesmu::cells {

enum class Architecture { TreeRNN, TreeLSTM, TreeSMU, TreeQueue, SeqLSTM, MajorityClass };

std::string_view architecture_name(Architecture a);
// Accepts the names above (case-insensitive); ConfigError otherwise.
Architecture parse_architecture(std::string_view name);

struct ModelConfig {
  Architecture architecture = Architecture::TreeSMU;
  std::size_t n = 60;
  std::size_t p = 2;
  std::size_t k = 1;
  bool noop = false;
  double dropout = 0.0;

  bool has_stack() const {
    return architecture == Architecture::TreeSMU || architecture == Architecture::TreeQueue;
  }
  bool is_tree() const {
    return architecture != Architecture::SeqLSTM && architecture != Architecture::MajorityClass;
  }
  // Throws ConfigError: n >= 1, p >= 1 and 1 <= k <= p for stack models,
  // dropout in [0, 1).
  void validate() const;
  nlohmann::json to_json() const;
  static ModelConfig from_json(const nlohmann::json& j);
};

// Per-node state over a batch of B columns: h is n x B. c is the Tree-LSTM
// cell (nullopt reads as zero). stack has p rows of n x B for SMU/queue
// models, nullopt rows are known to be zero.
struct NodeState {
  ad::NodeId h;
  std::optional<ad::NodeId> c;
  std::vector<std::optional<ad::NodeId>> stack;
};

// Inverted-dropout masks over a batch. Column b draws from streams[b] only,
// so a batch and the same examples run one at a time see identical masks.
class DropoutSource {
 public:
  DropoutSource(double rate, std::vector<std::mt19937_64*> streams);
  ad::Tensor mask(std::size_t rows);
  double rate() const { return rate_; }

 private:
  double rate_;
  std::vector<std::mt19937_64*> streams_;
};

struct CellContext {
  ad::Graph& graph;
  const ModelConfig& config;
  DropoutSource* dropout = nullptr;
};

// Parameter bundles. Keys are "<prefix>/<name>"; every function token gets
// its own prefix, which is how weights are shared by function type.
void add_rnn_params(ad::ParamStore& store, const std::string& prefix, std::size_t n);
void add_lstm_params(ad::ParamStore& store, const std::string& prefix, std::size_t n);
void add_smu_params(ad::ParamStore& store, const std::string& prefix, const ModelConfig& cfg);
// Sequential LSTM over tokens: input x_t and h_{t-1} are concatenated.
void add_seq_params(ad::ParamStore& store, const std::string& prefix, std::size_t n);

// Scalar counts of one function's bundle, in closed form.
std::size_t rnn_bundle_size(std::size_t n);
std::size_t lstm_bundle_size(std::size_t n);
std::size_t smu_bundle_size(const ModelConfig& cfg);

NodeState zero_state(CellContext& ctx, std::size_t batch);
// Leaf state: h from the table (one column per index), c and stack zero.
NodeState embed_leaf(CellContext& ctx, const std::string& table_key,
                     std::vector<std::uint32_t> indices);

// h = sigmoid(W [h_l; h_r] + b). Child stacks and cells are ignored.
NodeState treernn_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                       const NodeState& right);
// Binary Tree-LSTM: gates from i = [h_l; h_r], c = g_in*u + f1*c_l + f2*c_r,
// h = o * tanh(c).
NodeState treelstm_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                        const NodeState& right);
// Stack memory unit; see README for the update equations.
NodeState treesmu_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                       const NodeState& right);
// The SMU update mirrored: writes land on the back row p-1 and reads come
// from the front rows 0..k-1.
NodeState treequeue_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                         const NodeState& right);

// Final hidden state (n x B) of the sequential LSTM over token columns;
// tokens[t][b] is token t of example b. Empty input is a ContractError.
ad::NodeId seq_lstm_encode(CellContext& ctx, const std::string& prefix,
                           const std::vector<std::vector<std::uint32_t>>& tokens);

// Normalized push/pop(/noop) gates, exposed for the gate-sum invariant.
struct StackGates {
  ad::NodeId push;
  ad::NodeId pop;
  std::optional<ad::NodeId> noop;
};
StackGates stack_gates(CellContext& ctx, const std::string& prefix, ad::NodeId input);

// Matrices U(-1/sqrt(n), 1/sqrt(n)), biases (keys ending in "/b...") zero,
// embedding tables N(0, 0.1). Matches keys by name.
void initialize_params(ad::ParamStore& store, std::size_t n, std::uint64_t seed);

}  // namespace treesmu::cells
