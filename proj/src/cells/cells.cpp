#include "treesmu/cells.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

#include "treesmu/errors.hpp"

namespace treesmu::cells {
namespace {

using ad::Graph;
using ad::NodeId;
using ad::Tensor;

constexpr std::pair<Architecture, std::string_view> kNames[] = {
    {Architecture::TreeRNN, "TreeRNN"},     {Architecture::TreeLSTM, "TreeLSTM"},
    {Architecture::TreeSMU, "TreeSMU"},     {Architecture::TreeQueue, "TreeQueue"},
    {Architecture::SeqLSTM, "SeqLSTM"},     {Architecture::MajorityClass, "MajorityClass"},
};

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

NodeId param(CellContext& ctx, const std::string& prefix, const char* name) {
  return ctx.graph.parameter(prefix + "/" + name);
}

NodeId affine(CellContext& ctx, const std::string& prefix, const char* w, const char* b,
              NodeId input) {
  Graph& g = ctx.graph;
  return g.add(g.matmul(param(ctx, prefix, w), input), param(ctx, prefix, b));
}

NodeId zeros(CellContext& ctx, std::size_t rows, std::size_t cols) {
  return ctx.graph.constant(Tensor(rows, cols));
}

std::size_t batch_of(CellContext& ctx, NodeId h) { return ctx.graph.value(h).cols(); }

// i_j = [h_l; h_r], with dropout when training.
NodeId node_input(CellContext& ctx, const NodeState& left, const NodeState& right) {
  const NodeId parts[] = {left.h, right.h};
  NodeId x = ctx.graph.concat(parts);
  if (ctx.dropout && ctx.dropout->rate() > 0) {
    x = ctx.graph.dropout(x, ctx.dropout->mask(ctx.graph.value(x).rows()));
  }
  return x;
}

// Sum of gate ⊙ row over the present rows; nullopt when every row is zero.
std::optional<NodeId> gated_sum(CellContext& ctx,
                                std::initializer_list<std::pair<NodeId, std::optional<NodeId>>> terms) {
  std::optional<NodeId> acc;
  for (const auto& [gate, row] : terms) {
    if (!row) continue;
    const NodeId t = ctx.graph.hadamard(gate, *row);
    acc = acc ? ctx.graph.add(*acc, t) : t;
  }
  return acc;
}

void add_matrix(ad::ParamStore& store, const std::string& prefix, const char* name,
                std::size_t rows, std::size_t cols) {
  store.add(prefix + "/" + name, Tensor(rows, cols));
}

NodeState stack_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                     const NodeState& right, bool queue) {
  const ModelConfig& cfg = ctx.config;
  Graph& g = ctx.graph;
  const std::size_t p = cfg.p;
  if (left.stack.size() != p || right.stack.size() != p) {
    throw DimensionError("child stacks must have " + std::to_string(p) + " rows");
  }
  const NodeId x = node_input(ctx, left, right);
  const NodeId f1 = g.sigmoid(affine(ctx, prefix, "Uf1", "bf1", x));
  const NodeId f2 = g.sigmoid(affine(ctx, prefix, "Uf2", "bf2", x));
  const StackGates gates = stack_gates(ctx, prefix, x);
  const NodeId u = g.tanh(affine(ctx, prefix, "Uu", "bu", x));
  const NodeId o = g.sigmoid(affine(ctx, prefix, "Uo", "bo", x));

  std::vector<std::optional<NodeId>> combined(p);
  for (std::size_t i = 0; i < p; ++i) {
    combined[i] = gated_sum(ctx, {{f1, left.stack[i]}, {f2, right.stack[i]}});
  }
  auto read = [&](long i) -> std::optional<NodeId> {
    if (i < 0 || i >= static_cast<long>(p)) return std::nullopt;
    return combined[static_cast<std::size_t>(i)];
  };
  // Absent noop gate contributes nothing.
  auto noop_term = [&](long i) -> std::optional<NodeId> {
    return gates.noop ? read(i) : std::nullopt;
  };
  const NodeId noop_gate = gates.noop ? *gates.noop : gates.push;

  NodeState out;
  out.h = o;
  out.stack.resize(p);
  const long last = static_cast<long>(p) - 1;
  for (long i = 0; i <= last; ++i) {
    const bool write_row = queue ? i == last : i == 0;
    const long towards = queue ? i + 1 : i - 1;  // push reads from here
    const long away = queue ? i - 1 : i + 1;     // pop reads from here
    std::optional<NodeId> row;
    if (write_row) {
      row = gated_sum(ctx, {{gates.push, u}, {gates.pop, read(away)}, {noop_gate, noop_term(i)}});
    } else {
      row = gated_sum(ctx, {{gates.push, read(towards)},
                            {gates.pop, read(away)},
                            {noop_gate, noop_term(i)}});
    }
    out.stack[static_cast<std::size_t>(i)] = row;
  }

  std::optional<NodeId> mix;
  if (cfg.k == 1) {
    mix = out.stack[0];
  } else {
    const NodeId weights = g.sigmoid(affine(ctx, prefix, "Up", "bp", x));
    for (std::size_t r = 0; r < cfg.k; ++r) {
      if (!out.stack[r]) continue;
      const NodeId t = g.hadamard(g.row_select(weights, r), *out.stack[r]);
      mix = mix ? g.add(*mix, t) : t;
    }
  }
  const NodeId read_out = mix ? *mix : zeros(ctx, cfg.n, batch_of(ctx, x));
  out.h = g.hadamard(o, g.tanh(read_out));
  return out;
}

}  // namespace

std::string_view architecture_name(Architecture a) {
  for (const auto& [arch, name] : kNames) {
    if (arch == a) return name;
  }
  return "unknown";
}

Architecture parse_architecture(std::string_view name) {
  const std::string wanted = lower(name);
  for (const auto& [arch, n] : kNames) {
    if (lower(n) == wanted) return arch;
  }
  throw ConfigError("unknown architecture '" + std::string(name) + "'");
}

void ModelConfig::validate() const {
  if (n < 1) throw ConfigError("hidden size n must be positive");
  if (has_stack()) {
    if (p < 1) throw ConfigError("stack size p must be at least 1");
    if (k < 1 || k > p) {
      throw ConfigError("top-k readout needs 1 <= k <= p (k=" + std::to_string(k) +
                        ", p=" + std::to_string(p) + ")");
    }
  }
  if (dropout < 0 || dropout >= 1) throw ConfigError("dropout must be in [0, 1)");
}

nlohmann::json ModelConfig::to_json() const {
  return {{"architecture", architecture_name(architecture)},
          {"n", n},
          {"p", p},
          {"k", k},
          {"noop", noop},
          {"dropout", dropout}};
}

ModelConfig ModelConfig::from_json(const nlohmann::json& j) {
  ModelConfig c;
  try {
    for (const auto& [key, v] : j.items()) {
      if (key != "architecture" && key != "n" && key != "p" && key != "k" && key != "noop" &&
          key != "dropout") {
        throw ConfigError("unknown model key '" + key + "'");
      }
    }
    if (j.contains("architecture")) {
      c.architecture = parse_architecture(j.at("architecture").get<std::string>());
    }
    c.n = j.value("n", c.n);
    c.p = j.value("p", c.p);
    c.k = j.value("k", c.k);
    c.noop = j.value("noop", c.noop);
    c.dropout = j.value("dropout", c.dropout);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

DropoutSource::DropoutSource(double rate, std::vector<std::mt19937_64*> streams)
    : rate_(rate), streams_(std::move(streams)) {
  if (rate < 0 || rate >= 1) throw ContractError("dropout rate must be in [0, 1)");
}

Tensor DropoutSource::mask(std::size_t rows) {
  Tensor m(rows, streams_.size());
  const double keep = 1.0 - rate_;
  std::bernoulli_distribution draw(keep);
  for (std::size_t b = 0; b < streams_.size(); ++b) {
    for (std::size_t r = 0; r < rows; ++r) m(r, b) = draw(*streams_[b]) ? 1.0 / keep : 0.0;
  }
  return m;
}

void add_rnn_params(ad::ParamStore& store, const std::string& prefix, std::size_t n) {
  add_matrix(store, prefix, "W", n, 2 * n);
  add_matrix(store, prefix, "b", n, 1);
}

void add_lstm_params(ad::ParamStore& store, const std::string& prefix, std::size_t n) {
  for (const auto& [w, b] : {std::pair{"Ui", "bi"}, {"Uf1", "bf1"}, {"Uf2", "bf2"},
                             {"Uo", "bo"}, {"Uu", "bu"}}) {
    add_matrix(store, prefix, w, n, 2 * n);
    add_matrix(store, prefix, b, n, 1);
  }
}

void add_smu_params(ad::ParamStore& store, const std::string& prefix, const ModelConfig& cfg) {
  const std::size_t n = cfg.n;
  std::vector<std::pair<const char*, const char*>> gates = {
      {"Uf1", "bf1"}, {"Uf2", "bf2"}, {"Apush", "bpush"}, {"Apop", "bpop"}};
  if (cfg.noop) gates.emplace_back("Anoop", "bnoop");
  gates.emplace_back("Uu", "bu");
  gates.emplace_back("Uo", "bo");
  for (const auto& [w, b] : gates) {
    add_matrix(store, prefix, w, n, 2 * n);
    add_matrix(store, prefix, b, n, 1);
  }
  if (cfg.k > 1) {
    add_matrix(store, prefix, "Up", cfg.k, 2 * n);
    add_matrix(store, prefix, "bp", cfg.k, 1);
  }
}

void add_seq_params(ad::ParamStore& store, const std::string& prefix, std::size_t n) {
  for (const auto& [w, b] : {std::pair{"Ui", "bi"}, {"Uf", "bf"}, {"Uo", "bo"}, {"Uu", "bu"}}) {
    add_matrix(store, prefix, w, n, 2 * n);
    add_matrix(store, prefix, b, n, 1);
  }
}

std::size_t rnn_bundle_size(std::size_t n) { return 2 * n * n + n; }
std::size_t lstm_bundle_size(std::size_t n) { return 5 * rnn_bundle_size(n); }
std::size_t smu_bundle_size(const ModelConfig& cfg) {
  const std::size_t gates = cfg.noop ? 7 : 6;
  const std::size_t readout = cfg.k > 1 ? cfg.k * 2 * cfg.n + cfg.k : 0;
  return gates * rnn_bundle_size(cfg.n) + readout;
}

NodeState zero_state(CellContext& ctx, std::size_t batch) {
  NodeState s;
  s.h = zeros(ctx, ctx.config.n, batch);
  if (ctx.config.has_stack()) s.stack.assign(ctx.config.p, std::nullopt);
  return s;
}

NodeState embed_leaf(CellContext& ctx, const std::string& table_key,
                     std::vector<std::uint32_t> indices) {
  NodeState s;
  s.h = ctx.graph.embed(ctx.graph.parameter(table_key), std::move(indices));
  if (ctx.config.has_stack()) s.stack.assign(ctx.config.p, std::nullopt);
  return s;
}

NodeState treernn_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                       const NodeState& right) {
  const NodeId x = node_input(ctx, left, right);
  NodeState out;
  out.h = ctx.graph.sigmoid(affine(ctx, prefix, "W", "b", x));
  return out;
}

NodeState treelstm_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                        const NodeState& right) {
  Graph& g = ctx.graph;
  const NodeId x = node_input(ctx, left, right);
  const NodeId in = g.sigmoid(affine(ctx, prefix, "Ui", "bi", x));
  const NodeId f1 = g.sigmoid(affine(ctx, prefix, "Uf1", "bf1", x));
  const NodeId f2 = g.sigmoid(affine(ctx, prefix, "Uf2", "bf2", x));
  const NodeId o = g.sigmoid(affine(ctx, prefix, "Uo", "bo", x));
  const NodeId u = g.tanh(affine(ctx, prefix, "Uu", "bu", x));
  NodeState out;
  out.c = *gated_sum(ctx, {{in, u}, {f1, left.c}, {f2, right.c}});
  out.h = g.hadamard(o, g.tanh(*out.c));
  return out;
}

StackGates stack_gates(CellContext& ctx, const std::string& prefix, NodeId input) {
  Graph& g = ctx.graph;
  StackGates gates;
  const NodeId push = g.sigmoid(affine(ctx, prefix, "Apush", "bpush", input));
  const NodeId pop = g.sigmoid(affine(ctx, prefix, "Apop", "bpop", input));
  NodeId total = g.add(push, pop);
  std::optional<NodeId> noop;
  if (ctx.config.noop) {
    noop = g.sigmoid(affine(ctx, prefix, "Anoop", "bnoop", input));
    total = g.add(total, *noop);
  }
  gates.push = g.divide(push, total);
  gates.pop = g.divide(pop, total);
  if (noop) gates.noop = g.divide(*noop, total);
  return gates;
}

NodeState treesmu_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                       const NodeState& right) {
  return stack_node(ctx, prefix, left, right, false);
}

NodeState treequeue_node(CellContext& ctx, const std::string& prefix, const NodeState& left,
                         const NodeState& right) {
  return stack_node(ctx, prefix, left, right, true);
}

NodeId seq_lstm_encode(CellContext& ctx, const std::string& prefix,
                       const std::vector<std::vector<std::uint32_t>>& tokens) {
  if (tokens.empty()) throw ContractError("sequential encoder needs at least one token");
  Graph& g = ctx.graph;
  const std::size_t batch = tokens[0].size();
  NodeId h = zeros(ctx, ctx.config.n, batch);
  std::optional<NodeId> c;
  const NodeId table = g.parameter(prefix + "/embed");
  for (const auto& step : tokens) {
    const NodeId parts[] = {g.embed(table, step), h};
    NodeId x = g.concat(parts);
    if (ctx.dropout && ctx.dropout->rate() > 0) x = g.dropout(x, ctx.dropout->mask(2 * ctx.config.n));
    const NodeId in = g.sigmoid(affine(ctx, prefix, "Ui", "bi", x));
    const NodeId f = g.sigmoid(affine(ctx, prefix, "Uf", "bf", x));
    const NodeId o = g.sigmoid(affine(ctx, prefix, "Uo", "bo", x));
    const NodeId u = g.tanh(affine(ctx, prefix, "Uu", "bu", x));
    c = *gated_sum(ctx, {{in, u}, {f, c}});
    h = g.hadamard(o, g.tanh(*c));
  }
  return h;
}

void initialize_params(ad::ParamStore& store, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(n));
  std::uniform_real_distribution<double> matrix(-bound, bound);
  std::normal_distribution<double> embedding(0.0, 0.1);
  for (std::uint32_t i = 0; i < store.size(); ++i) {
    const ad::ParamId id{i};
    const std::string& key = store.key(id);
    const std::string name = key.substr(key.rfind('/') + 1);
    Tensor& t = store.value(id);
    if (name == "embed") {
      for (double& v : t.data()) v = embedding(rng);
    } else if (!name.empty() && name[0] == 'b') {
      t.fill(0.0);
    } else {
      for (double& v : t.data()) v = matrix(rng);
    }
    store.first_moment(id).fill(0.0);
    store.second_moment(id).fill(0.0);
  }
  store.set_step(0);
}

}  // namespace treesmu::cells
