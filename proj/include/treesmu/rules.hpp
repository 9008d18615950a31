#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "treesmu/expr.hpp"

namespace treesmu::datagen {

using expr::ExprPtr;

// An identity lhs = rhs over pattern variables (symbols spelled "?a", "?b").
// Rules are used in both directions; variables that only one side mentions
// are filled with random expressions when rewriting towards that side.
struct RewriteRule {
  std::string name;
  ExprPtr lhs;
  ExprPtr rhs;
};

using Bindings = std::map<std::string, ExprPtr, std::less<>>;

bool is_pattern_variable(const expr::Expr& e);
std::vector<std::string> pattern_variables(const expr::Expr& pattern);

// Structural match. Repeated variables must bind structurally equal subtrees.
bool match(const expr::Expr& pattern, const ExprPtr& target, Bindings& bindings);
// Throws ContractError when a variable is unbound.
ExprPtr instantiate(const ExprPtr& pattern, const Bindings& bindings);

// Checks lhs ≈ rhs numerically on `trials` assignments of the pattern
// variables. Requires at least three quarters of the trials to be defined.
bool validate_rule(const RewriteRule& rule, std::mt19937_64& rng, int trials = 20);

// The built-in identity set: arithmetic, power and log laws, trigonometric,
// inverse-trigonometric and hyperbolic identities, and small numeric facts.
// Each entry is validated on first use; an invalid entry is a ContractError.
const std::vector<RewriteRule>& default_rules();

// Parses "lhs ; rhs" pairs into rules.
RewriteRule make_rule(std::string name, std::string_view lhs, std::string_view rhs);

}  // namespace treesmu::datagen
