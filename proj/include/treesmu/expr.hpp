#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace treesmu::expr {

// The frozen 29-entry function table. Subtraction and division are not
// entries: the parser rewrites them to (+ a (* -1 b)) and (* a (^ b -1)).
enum class Function : std::uint8_t {
  Equal,
  Add,
  Mul,
  Pow,
  Sqrt,
  Exp,
  Log,
  Sin,
  Cos,
  Tan,
  Sec,
  Csc,
  Cot,
  Asin,
  Acos,
  Atan,
  Asec,
  Acsc,
  Acot,
  Sinh,
  Cosh,
  Tanh,
  Sech,
  Csch,
  Coth,
  Asinh,
  Acosh,
  Atanh,
  Acoth,
};

inline constexpr std::size_t kFunctionCount = 29;

struct FunctionInfo {
  Function id;
  std::string_view token;
  int arity;
};

std::span<const FunctionInfo> function_table();
const FunctionInfo& info(Function f);
std::optional<Function> function_from_token(std::string_view token);

enum class ExprKind : std::uint8_t { Function, Symbol, Number, Constant, Blank };

class Expr;
using ExprPtr = std::shared_ptr<const Expr>;

// Immutable expression tree node.
class Expr {
 public:
  static ExprPtr function(Function f, std::vector<ExprPtr> children);
  static ExprPtr symbol(std::string name);
  // Integer, reduced rational "p/q", or decimal literal text.
  static ExprPtr number(std::string_view literal);
  static ExprPtr integer(long value);
  static ExprPtr pi();
  static ExprPtr blank();

  ExprKind kind() const { return kind_; }
  Function function() const { return function_; }
  // Symbol name, canonical number text, "pi", or "_".
  const std::string& text() const { return text_; }
  double number_value() const { return value_; }
  const std::vector<ExprPtr>& children() const { return children_; }
  int depth() const { return depth_; }
  std::size_t size() const { return size_; }

  bool is_leaf() const { return kind_ != ExprKind::Function; }

 private:
  Expr() = default;

  ExprKind kind_ = ExprKind::Symbol;
  Function function_ = Function::Equal;
  std::string text_;
  double value_ = 0.0;
  std::vector<ExprPtr> children_;
  int depth_ = 0;
  std::size_t size_ = 1;
};

bool structurally_equal(const Expr& a, const Expr& b);

// Canonical prefix form, e.g. "(+ x (* -1 y))".
std::string print(const Expr& e);

// Structure with every leaf replaced by "_": trees with equal shape keys can
// be evaluated column-batched.
std::string shape_key(const Expr& e);

ExprPtr parse(std::string_view text);

// Free symbols in first-occurrence order.
std::vector<std::string> symbols(const Expr& e);

using Assignment = std::map<std::string, double, std::less<>>;

// IEEE evaluation; nullopt for domain violations (negative sqrt/log argument,
// division by ~0, tan/sec/csc/cot within 1e-9 of a pole, non-finite results).
std::optional<double> evaluate(const Expr& e, const Assignment& assignment);

// |a - b| <= max(1e-8, 1e-6 * max(|a|, |b|)).
bool approx_equal(double a, double b);

enum class Label : std::uint8_t { Incorrect = 0, Correct = 1 };

struct Equation {
  ExprPtr lhs;
  ExprPtr rhs;
  Label label = Label::Correct;

  int depth() const { return 1 + std::max(lhs->depth(), rhs->depth()); }
  ExprPtr tree() const { return Expr::function(Function::Equal, {lhs, rhs}); }
  std::string key() const { return print(*lhs) + " = " + print(*rhs); }
};

// Subtree addressed by child indices from the root.
using Path = std::vector<std::uint8_t>;
ExprPtr subtree(const ExprPtr& root, std::span<const std::uint8_t> path);
ExprPtr replace(const ExprPtr& root, std::span<const std::uint8_t> path, ExprPtr replacement);
std::vector<Path> all_paths(const Expr& e);

}  // namespace treesmu::expr
