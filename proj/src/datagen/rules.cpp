#include "treesmu/rules.hpp"

#include "treesmu/errors.hpp"
#include "treesmu/oracle.hpp"

namespace treesmu::datagen {
namespace {

struct RuleText {
  const char* name;
  const char* lhs;
  const char* rhs;
};

// clang-format off
constexpr RuleText kRules[] = {
    // arithmetic
    {"add-zero", "(+ ?a 0)", "?a"},
    {"mul-one", "(* ?a 1)", "?a"},
    {"mul-zero", "(* ?a 0)", "0"},
    {"add-comm", "(+ ?a ?b)", "(+ ?b ?a)"},
    {"mul-comm", "(* ?a ?b)", "(* ?b ?a)"},
    {"add-assoc", "(+ ?a (+ ?b ?c))", "(+ (+ ?a ?b) ?c)"},
    {"mul-assoc", "(* ?a (* ?b ?c))", "(* (* ?a ?b) ?c)"},
    {"distribute", "(* ?a (+ ?b ?c))", "(+ (* ?a ?b) (* ?a ?c))"},
    {"add-inverse", "(+ ?a (* -1 ?a))", "0"},
    {"double-negation", "(* -1 (* -1 ?a))", "?a"},
    {"mul-inverse", "(* ?a (^ ?a -1))", "1"},
    {"add-self", "(+ ?a ?a)", "(* 2 ?a)"},
    // powers and logarithms
    {"pow-one", "(^ ?a 1)", "?a"},
    {"pow-zero", "(^ ?a 0)", "1"},
    {"one-pow", "(^ 1 ?a)", "1"},
    {"pow-square", "(^ ?a 2)", "(* ?a ?a)"},
    {"pow-add", "(* (^ ?a ?b) (^ ?a ?c))", "(^ ?a (+ ?b ?c))"},
    {"pow-mul-base", "(* (^ ?a ?c) (^ ?b ?c))", "(^ (* ?a ?b) ?c)"},
    {"sqrt-half", "(sqrt ?a)", "(^ ?a 1/2)"},
    {"sqrt-square", "(^ (sqrt ?a) 2)", "?a"},
    {"exp-sum", "(exp (+ ?a ?b))", "(* (exp ?a) (exp ?b))"},
    {"exp-log", "(exp (log ?a))", "?a"},
    {"log-exp", "(log (exp ?a))", "?a"},
    {"log-product", "(log (* ?a ?b))", "(+ (log ?a) (log ?b))"},
    {"log-power", "(log (^ ?a ?b))", "(* ?b (log ?a))"},
    {"log-one", "(log 1)", "0"},
    {"exp-zero", "(exp 0)", "1"},
    // trigonometric
    {"pythagoras", "(+ (^ (sin ?a) 2) (^ (cos ?a) 2))", "1"},
    {"tan-ratio", "(tan ?a)", "(* (sin ?a) (^ (cos ?a) -1))"},
    {"sec-recip", "(sec ?a)", "(^ (cos ?a) -1)"},
    {"csc-recip", "(csc ?a)", "(^ (sin ?a) -1)"},
    {"cot-recip", "(cot ?a)", "(^ (tan ?a) -1)"},
    {"tan-sec", "(+ 1 (^ (tan ?a) 2))", "(^ (sec ?a) 2)"},
    {"cot-csc", "(+ 1 (^ (cot ?a) 2))", "(^ (csc ?a) 2)"},
    {"sin-sum", "(sin (+ ?a ?b))", "(+ (* (sin ?a) (cos ?b)) (* (cos ?a) (sin ?b)))"},
    {"cos-sum", "(cos (+ ?a ?b))", "(+ (* (cos ?a) (cos ?b)) (* -1 (* (sin ?a) (sin ?b))))"},
    {"sin-double", "(sin (* 2 ?a))", "(* 2 (* (sin ?a) (cos ?a)))"},
    {"cos-double", "(cos (* 2 ?a))", "(+ (^ (cos ?a) 2) (* -1 (^ (sin ?a) 2)))"},
    {"sin-odd", "(sin (* -1 ?a))", "(* -1 (sin ?a))"},
    {"cos-even", "(cos (* -1 ?a))", "(cos ?a)"},
    {"tan-odd", "(tan (* -1 ?a))", "(* -1 (tan ?a))"},
    {"sin-shift", "(sin (+ ?a pi))", "(* -1 (sin ?a))"},
    {"cos-shift", "(cos (+ ?a pi))", "(* -1 (cos ?a))"},
    {"sec-shift", "(sec (+ ?a pi))", "(* -1 (sec ?a))"},
    {"tan-period", "(tan (+ ?a pi))", "(tan ?a)"},
    {"cofunction", "(sin (+ (* 1/2 pi) (* -1 ?a)))", "(cos ?a)"},
    {"sin-zero", "(sin 0)", "0"},
    {"cos-zero", "(cos 0)", "1"},
    {"sin-pi", "(sin pi)", "0"},
    {"cos-pi", "(cos pi)", "-1"},
    {"sin-half-pi", "(sin (* 1/2 pi))", "1"},
    {"cos-half-pi", "(cos (* 1/2 pi))", "0"},
    // inverse trigonometric
    {"sin-arcsin", "(sin (arcsin ?a))", "?a"},
    {"cos-arccos", "(cos (arccos ?a))", "?a"},
    {"tan-arctan", "(tan (arctan ?a))", "?a"},
    {"arcsin-arccos", "(+ (arcsin ?a) (arccos ?a))", "(* 1/2 pi)"},
    {"arcsec-recip", "(arcsec ?a)", "(arccos (^ ?a -1))"},
    {"arccsc-recip", "(arccsc ?a)", "(arcsin (^ ?a -1))"},
    {"arccot-recip", "(arccot ?a)", "(arctan (^ ?a -1))"},
    {"arcsin-odd", "(arcsin (* -1 ?a))", "(* -1 (arcsin ?a))"},
    {"arctan-odd", "(arctan (* -1 ?a))", "(* -1 (arctan ?a))"},
    // hyperbolic
    {"hyperbolic-pythagoras", "(+ (^ (cosh ?a) 2) (* -1 (^ (sinh ?a) 2)))", "1"},
    {"tanh-ratio", "(tanh ?a)", "(* (sinh ?a) (^ (cosh ?a) -1))"},
    {"sech-recip", "(sech ?a)", "(^ (cosh ?a) -1)"},
    {"csch-recip", "(csch ?a)", "(^ (sinh ?a) -1)"},
    {"coth-recip", "(coth ?a)", "(^ (tanh ?a) -1)"},
    {"sinh-odd", "(sinh (* -1 ?a))", "(* -1 (sinh ?a))"},
    {"cosh-even", "(cosh (* -1 ?a))", "(cosh ?a)"},
    {"sinh-sum", "(sinh (+ ?a ?b))", "(+ (* (sinh ?a) (cosh ?b)) (* (cosh ?a) (sinh ?b)))"},
    {"cosh-sum", "(cosh (+ ?a ?b))", "(+ (* (cosh ?a) (cosh ?b)) (* (sinh ?a) (sinh ?b)))"},
    {"cosh-plus-sinh", "(+ (cosh ?a) (sinh ?a))", "(exp ?a)"},
    {"sinh-arcsinh", "(sinh (arcsinh ?a))", "?a"},
    {"cosh-arccosh", "(cosh (arccosh ?a))", "?a"},
    {"tanh-arctanh", "(tanh (arctanh ?a))", "?a"},
    {"coth-arccoth", "(coth (arccoth ?a))", "?a"},
    {"arccoth-recip", "(arccoth ?a)", "(arctanh (^ ?a -1))"},
    {"sinh-zero", "(sinh 0)", "0"},
    {"cosh-zero", "(cosh 0)", "1"},
    // numeric facts
    {"two-sum", "(+ 1 1)", "2"},
    {"three-sum", "(+ 2 1)", "3"},
    {"four-sum", "(+ 3 1)", "4"},
    {"four-product", "(* 2 2)", "4"},
    {"four-square", "(^ 2 2)", "4"},
    {"sqrt-four", "(sqrt 4)", "2"},
    {"one-minus-one", "(+ 1 -1)", "0"},
    {"half-recip", "(^ 2 -1)", "1/2"},
    {"half-product", "(* 2 1/2)", "1"},
    {"negative-half", "(* -1 1/2)", "-1/2"},
    {"negative-one", "(* -1 1)", "-1"},
    {"half-sum", "(+ 1/2 1/2)", "1"},
    {"three-less-one", "(+ 3 -1)", "2"},
};
// clang-format on

bool same_leaf(const expr::Expr& a, const expr::Expr& b) {
  return a.kind() == b.kind() && a.text() == b.text();
}

void collect_vars(const expr::Expr& e, std::vector<std::string>& out) {
  if (is_pattern_variable(e)) {
    if (std::find(out.begin(), out.end(), e.text()) == out.end()) out.push_back(e.text());
    return;
  }
  for (const auto& c : e.children()) collect_vars(*c, out);
}

}  // namespace

bool is_pattern_variable(const expr::Expr& e) {
  return e.kind() == expr::ExprKind::Symbol && !e.text().empty() && e.text()[0] == '?';
}

std::vector<std::string> pattern_variables(const expr::Expr& pattern) {
  std::vector<std::string> out;
  collect_vars(pattern, out);
  return out;
}

bool match(const expr::Expr& pattern, const ExprPtr& target, Bindings& bindings) {
  if (is_pattern_variable(pattern)) {
    auto it = bindings.find(pattern.text());
    if (it == bindings.end()) {
      bindings.emplace(pattern.text(), target);
      return true;
    }
    return expr::structurally_equal(*it->second, *target);
  }
  if (pattern.is_leaf()) return same_leaf(pattern, *target);
  if (target->is_leaf() || pattern.function() != target->function()) return false;
  for (std::size_t i = 0; i < pattern.children().size(); ++i) {
    if (!match(*pattern.children()[i], target->children()[i], bindings)) return false;
  }
  return true;
}

ExprPtr instantiate(const ExprPtr& pattern, const Bindings& bindings) {
  if (is_pattern_variable(*pattern)) {
    auto it = bindings.find(pattern->text());
    if (it == bindings.end()) {
      throw ContractError("pattern variable " + pattern->text() + " is unbound");
    }
    return it->second;
  }
  if (pattern->is_leaf()) return pattern;
  std::vector<ExprPtr> children;
  children.reserve(pattern->children().size());
  for (const auto& c : pattern->children()) children.push_back(instantiate(c, bindings));
  return expr::Expr::function(pattern->function(), std::move(children));
}

bool validate_rule(const RewriteRule& rule, std::mt19937_64& rng, int trials) {
  OracleConfig cfg;
  cfg.samples = trials;
  // Some identities are only defined on a quarter of the sampling range.
  cfg.redraws = 60;
  return check_equation(*rule.lhs, *rule.rhs, rng, cfg).verdict == Verdict::Correct;
}

RewriteRule make_rule(std::string name, std::string_view lhs, std::string_view rhs) {
  return {std::move(name), expr::parse(lhs), expr::parse(rhs)};
}

const std::vector<RewriteRule>& default_rules() {
  static const std::vector<RewriteRule> rules = [] {
    std::vector<RewriteRule> out;
    std::mt19937_64 rng(1234);
    for (const auto& r : kRules) {
      out.push_back(make_rule(r.name, r.lhs, r.rhs));
      if (!validate_rule(out.back(), rng)) {
        throw ContractError(std::string("rewrite rule ") + r.name + " failed numeric validation");
      }
    }
    return out;
  }();
  return rules;
}

}  // namespace treesmu::datagen
