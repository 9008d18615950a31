#include "treesmu/vocab.hpp"

#include "treesmu/errors.hpp"

namespace treesmu::expr {
namespace {

void tokens_into(const Vocab& vocab, const Expr& e, std::vector<std::uint32_t>& out) {
  if (e.is_leaf()) {
    out.push_back(vocab.require_token(e.text()));
    return;
  }
  out.push_back(vocab.require_token("("));
  out.push_back(vocab.require_token(info(e.function()).token));
  for (const auto& c : e.children()) tokens_into(vocab, *c, out);
  out.push_back(vocab.require_token(")"));
}

}  // namespace

Vocab Vocab::default_alphabet() {
  Vocab v;
  for (const char* t : {"x", "y", "z", "w", "θ", "-1", "0", "1", "2", "3", "4", "1/2", "-1/2", "pi"}) {
    v.add_terminal(t);
  }
  return v;
}

std::uint32_t Vocab::add_terminal(const std::string& terminal) {
  if (auto it = index_.find(terminal); it != index_.end()) return it->second;
  if (terminal == "_" || terminal == "(" || terminal == ")" || function_from_token(terminal)) {
    throw ContractError("'" + terminal + "' cannot be a terminal");
  }
  const auto index = static_cast<std::uint32_t>(terminals_.size());
  terminals_.push_back(terminal);
  index_.emplace(terminal, index);
  return index;
}

void Vocab::add_terminals_of(const Expr& e) {
  if (e.kind() == ExprKind::Blank) return;
  if (e.is_leaf()) {
    add_terminal(e.text());
    return;
  }
  for (const auto& c : e.children()) add_terminals_of(*c);
}

std::optional<std::uint32_t> Vocab::terminal_index(std::string_view terminal) const {
  auto it = index_.find(std::string(terminal));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocab::require_terminal(std::string_view terminal) const {
  if (auto idx = terminal_index(terminal)) return *idx;
  throw ContractError("out-of-vocabulary terminal '" + std::string(terminal) + "'");
}

std::uint32_t Vocab::require_token(std::string_view token) const {
  if (auto idx = terminal_index(token)) return *idx;
  const auto base = static_cast<std::uint32_t>(terminals_.size());
  if (auto f = function_from_token(token)) return base + static_cast<std::uint32_t>(*f);
  if (token == "(") return base + static_cast<std::uint32_t>(kFunctionCount);
  if (token == ")") return base + static_cast<std::uint32_t>(kFunctionCount) + 1;
  throw ContractError("out-of-vocabulary token '" + std::string(token) + "'");
}

std::vector<std::uint32_t> Vocab::tokens(const Expr& e) const {
  std::vector<std::uint32_t> out;
  tokens_into(*this, e, out);
  return out;
}

nlohmann::json Vocab::to_json() const { return {{"terminals", terminals_}}; }

Vocab Vocab::from_json(const nlohmann::json& j) {
  Vocab v;
  for (const auto& t : j.at("terminals")) v.add_terminal(t.get<std::string>());
  return v;
}

}  // namespace treesmu::expr
