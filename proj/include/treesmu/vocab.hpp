#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"
#include "treesmu/expr.hpp"

namespace treesmu::expr {

// Terminal alphabet (leaf embeddings) and the token alphabet used by the
// sequential baseline: terminals, then every function token, then "(" and ")".
class Vocab {
 public:
  // x, y, z, w, θ, integers -1..4, 1/2, -1/2, pi.
  static Vocab default_alphabet();

  std::uint32_t add_terminal(const std::string& terminal);
  void add_terminals_of(const Expr& e);

  std::optional<std::uint32_t> terminal_index(std::string_view terminal) const;
  // Throws ContractError for out-of-vocabulary terminals.
  std::uint32_t require_terminal(std::string_view terminal) const;
  const std::string& terminal(std::uint32_t index) const { return terminals_.at(index); }
  std::size_t terminal_count() const { return terminals_.size(); }
  const std::vector<std::string>& terminals() const { return terminals_; }

  std::size_t token_count() const { return terminals_.size() + kFunctionCount + 2; }
  std::uint32_t require_token(std::string_view token) const;
  // Prefix token stream with parentheses, e.g. ( + x 0 ).
  std::vector<std::uint32_t> tokens(const Expr& e) const;

  nlohmann::json to_json() const;
  static Vocab from_json(const nlohmann::json& j);

  bool operator==(const Vocab& other) const { return terminals_ == other.terminals_; }

 private:
  std::vector<std::string> terminals_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

}  // namespace treesmu::expr
