#include "treesmu/model.hpp"

#include <cmath>

#include "treesmu/errors.hpp"

namespace treesmu::cells {
namespace {

constexpr const char* kLeafTable = "leaf/embed";
constexpr const char* kSeqPrefix = "seq";

void require_non_majority(const ModelConfig& cfg, const char* what) {
  if (cfg.architecture == Architecture::MajorityClass) {
    throw ContractError(std::string("MajorityClass has no ") + what);
  }
}

std::vector<double> column(const ad::Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace

Model::Model(ModelConfig config, expr::Vocab vocab)
    : config_(std::move(config)), vocab_(std::move(vocab)) {
  config_.validate();
  const std::size_t n = config_.n;
  switch (config_.architecture) {
    case Architecture::MajorityClass:
      break;
    case Architecture::SeqLSTM:
      params_.add(std::string(kSeqPrefix) + "/embed", ad::Tensor(vocab_.token_count(), n));
      add_seq_params(params_, kSeqPrefix, n);
      break;
    default:
      params_.add(kLeafTable, ad::Tensor(vocab_.terminal_count(), n));
      for (const auto& f : expr::function_table()) {
        if (f.id == expr::Function::Equal) continue;
        const std::string prefix(f.token);
        switch (config_.architecture) {
          case Architecture::TreeRNN: add_rnn_params(params_, prefix, n); break;
          case Architecture::TreeLSTM: add_lstm_params(params_, prefix, n); break;
          default: add_smu_params(params_, prefix, config_); break;
        }
      }
      break;
  }
}

void Model::initialize(std::uint64_t seed) { initialize_params(params_, config_.n, seed); }

nlohmann::json Model::metadata() const {
  return {{"kind", "treesmu-model"},
          {"model", config_.to_json()},
          {"vocab", vocab_.to_json()},
          {"majority_label", majority_ == expr::Label::Correct ? 1 : 0}};
}

void Model::save(const std::filesystem::path& path, const nlohmann::json& extra) const {
  nlohmann::json meta = metadata();
  if (extra.is_object()) {
    for (const auto& [k, v] : extra.items()) meta[k] = v;
  }
  ad::save_checkpoint(path, params_, meta);
}

Model Model::from_checkpoint(ad::Checkpoint checkpoint) {
  const auto& meta = checkpoint.metadata;
  if (!meta.is_object() || meta.value("kind", "") != "treesmu-model") {
    throw DataError("checkpoint does not hold a model");
  }
  Model model(ModelConfig::from_json(meta.at("model")), expr::Vocab::from_json(meta.at("vocab")));
  model.majority_ = meta.value("majority_label", 1) == 1 ? expr::Label::Correct : expr::Label::Incorrect;
  if (checkpoint.params.size() != model.params_.size()) {
    throw DataError("checkpoint has " + std::to_string(checkpoint.params.size()) +
                    " parameters, architecture expects " + std::to_string(model.params_.size()));
  }
  for (std::uint32_t i = 0; i < model.params_.size(); ++i) {
    const ad::ParamId id{i};
    const std::string& key = model.params_.key(id);
    const auto src = checkpoint.params.find(key);
    if (!src) throw DataError("checkpoint lacks parameter " + key);
    if (!checkpoint.params.value(*src).same_shape(model.params_.value(id))) {
      throw DimensionError("parameter " + key + " has shape " +
                           checkpoint.params.value(*src).shape_string() + ", expected " +
                           model.params_.value(id).shape_string());
    }
    model.params_.value(id) = checkpoint.params.value(*src);
    model.params_.first_moment(id) = checkpoint.params.first_moment(*src);
    model.params_.second_moment(id) = checkpoint.params.second_moment(*src);
  }
  model.params_.set_step(checkpoint.params.step());
  return model;
}

Model Model::load(const std::filesystem::path& path) {
  return from_checkpoint(ad::load_checkpoint(path));
}

NodeState Model::encode_node(CellContext& ctx, std::span<const expr::Expr* const> batch) const {
  const expr::Expr& first = *batch[0];
  if (first.is_leaf()) {
    std::vector<std::uint32_t> indices;
    indices.reserve(batch.size());
    for (const auto* e : batch) indices.push_back(vocab_.require_terminal(e->text()));
    return embed_leaf(ctx, kLeafTable, std::move(indices));
  }
  if (first.function() == expr::Function::Equal) {
    throw ContractError("equality can only appear at the equation root");
  }
  std::vector<NodeState> children;
  std::vector<const expr::Expr*> column_batch(batch.size());
  for (std::size_t c = 0; c < first.children().size(); ++c) {
    for (std::size_t b = 0; b < batch.size(); ++b) {
      column_batch[b] = batch[b]->children()[c].get();
    }
    children.push_back(encode_node(ctx, column_batch));
  }
  if (children.size() == 1) children.push_back(zero_state(ctx, batch.size()));
  const std::string prefix(expr::info(first.function()).token);
  switch (config_.architecture) {
    case Architecture::TreeRNN: return treernn_node(ctx, prefix, children[0], children[1]);
    case Architecture::TreeLSTM: return treelstm_node(ctx, prefix, children[0], children[1]);
    case Architecture::TreeSMU: return treesmu_node(ctx, prefix, children[0], children[1]);
    case Architecture::TreeQueue: return treequeue_node(ctx, prefix, children[0], children[1]);
    default: throw ContractError("not a tree architecture");
  }
}

NodeState Model::encode_tree(CellContext& ctx, std::span<const expr::Expr* const> batch) const {
  if (!config_.is_tree()) throw ContractError("encode_tree needs a tree architecture");
  if (batch.empty()) throw ContractError("empty batch");
  return encode_node(ctx, batch);
}

ad::NodeId Model::encode(CellContext& ctx, std::span<const expr::Expr* const> batch) const {
  require_non_majority(config_, "encoder");
  if (batch.empty()) throw ContractError("empty batch");
  if (config_.is_tree()) return encode_tree(ctx, batch).h;
  std::vector<std::vector<std::uint32_t>> per_example;
  for (const auto* e : batch) per_example.push_back(vocab_.tokens(*e));
  const std::size_t steps = per_example[0].size();
  std::vector<std::vector<std::uint32_t>> tokens(steps, std::vector<std::uint32_t>(batch.size()));
  for (std::size_t b = 0; b < batch.size(); ++b) {
    if (per_example[b].size() != steps) throw ContractError("batched sequences differ in length");
    for (std::size_t t = 0; t < steps; ++t) tokens[t][b] = per_example[b][t];
  }
  return seq_lstm_encode(ctx, kSeqPrefix, tokens);
}

ad::NodeId Model::logits(ad::Graph& graph, std::span<const expr::Equation* const> batch,
                         DropoutSource* dropout) const {
  require_non_majority(config_, "logits");
  CellContext ctx{graph, config_, dropout};
  std::vector<const expr::Expr*> lhs;
  std::vector<const expr::Expr*> rhs;
  for (const auto* eq : batch) {
    lhs.push_back(eq->lhs.get());
    rhs.push_back(eq->rhs.get());
  }
  const ad::NodeId hl = encode(ctx, lhs);
  const ad::NodeId hr = encode(ctx, rhs);
  return graph.dot(hl, hr);
}

double Model::predict(const expr::Equation& equation) const {
  if (config_.architecture == Architecture::MajorityClass) {
    return majority_ == expr::Label::Correct ? 1.0 : 0.0;
  }
  ad::Graph graph(params_);
  const expr::Equation* one[] = {&equation};
  const double z = graph.value(logits(graph, one))[0];
  return 1.0 / (1.0 + std::exp(-z));
}

std::vector<double> Model::predict(std::span<const expr::Equation> equations) const {
  std::vector<double> out;
  out.reserve(equations.size());
  for (const auto& eq : equations) out.push_back(predict(eq));
  return out;
}

std::vector<double> Model::hidden(const expr::Expr& e) const {
  require_non_majority(config_, "hidden state");
  ad::Graph graph(params_);
  CellContext ctx{graph, config_, nullptr};
  const expr::Expr* one[] = {&e};
  return column(graph.value(encode(ctx, one)));
}

std::vector<std::vector<double>> Model::stack_rows(const expr::Expr& e) const {
  if (!config_.has_stack()) throw ContractError("architecture has no stack");
  ad::Graph graph(params_);
  CellContext ctx{graph, config_, nullptr};
  const expr::Expr* one[] = {&e};
  const NodeState s = encode_tree(ctx, one);
  std::vector<std::vector<double>> rows;
  for (const auto& r : s.stack) {
    rows.push_back(r ? column(graph.value(*r)) : std::vector<double>(config_.n, 0.0));
  }
  return rows;
}

std::size_t parameter_count(const ModelConfig& config, const expr::Vocab& vocab) {
  return Model(config, vocab).params().scalar_count();
}

}  // namespace treesmu::cells
