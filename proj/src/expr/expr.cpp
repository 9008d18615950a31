#include "treesmu/expr.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <numbers>
#include <numeric>

#include "treesmu/errors.hpp"

namespace treesmu::expr {
namespace {

constexpr std::array<FunctionInfo, kFunctionCount> kTable = {{
    {Function::Equal, "=", 2},      {Function::Add, "+", 2},
    {Function::Mul, "*", 2},        {Function::Pow, "^", 2},
    {Function::Sqrt, "sqrt", 1},    {Function::Exp, "exp", 1},
    {Function::Log, "log", 1},      {Function::Sin, "sin", 1},
    {Function::Cos, "cos", 1},      {Function::Tan, "tan", 1},
    {Function::Sec, "sec", 1},      {Function::Csc, "csc", 1},
    {Function::Cot, "cot", 1},      {Function::Asin, "arcsin", 1},
    {Function::Acos, "arccos", 1},  {Function::Atan, "arctan", 1},
    {Function::Asec, "arcsec", 1},  {Function::Acsc, "arccsc", 1},
    {Function::Acot, "arccot", 1},  {Function::Sinh, "sinh", 1},
    {Function::Cosh, "cosh", 1},    {Function::Tanh, "tanh", 1},
    {Function::Sech, "sech", 1},    {Function::Csch, "csch", 1},
    {Function::Coth, "coth", 1},    {Function::Asinh, "arcsinh", 1},
    {Function::Acosh, "arccosh", 1}, {Function::Atanh, "arctanh", 1},
    {Function::Acoth, "arccoth", 1},
}};

constexpr double kPoleTolerance = 1e-9;

bool is_digits(std::string_view s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// Canonical text and value of a numeric literal, or nullopt if `s` is not one.
std::optional<std::pair<std::string, double>> parse_number(std::string_view s) {
  std::string_view body = s;
  bool negative = false;
  if (!body.empty() && body.front() == '-') {
    negative = true;
    body.remove_prefix(1);
  }
  if (body.empty()) return std::nullopt;

  if (auto slash = body.find('/'); slash != std::string_view::npos) {
    const auto num_text = body.substr(0, slash);
    const auto den_text = body.substr(slash + 1);
    if (!is_digits(num_text) || !is_digits(den_text)) return std::nullopt;
    long num = 0, den = 0;
    std::from_chars(num_text.data(), num_text.data() + num_text.size(), num);
    std::from_chars(den_text.data(), den_text.data() + den_text.size(), den);
    if (den == 0) return std::nullopt;
    const long g = std::gcd(num, den);
    num /= g;
    den /= g;
    if (negative) num = -num;
    if (den == 1) return std::pair{std::to_string(num), static_cast<double>(num)};
    return std::pair{std::to_string(num) + "/" + std::to_string(den),
                     static_cast<double>(num) / static_cast<double>(den)};
  }

  if (is_digits(body)) {
    long v = 0;
    std::from_chars(body.data(), body.data() + body.size(), v);
    if (negative) v = -v;
    return std::pair{std::to_string(v), static_cast<double>(v)};
  }

  // Decimal: digits '.' digits, at least one digit overall.
  const auto dot = body.find('.');
  if (dot == std::string_view::npos) return std::nullopt;
  const auto whole = body.substr(0, dot);
  const auto frac = body.substr(dot + 1);
  if ((!whole.empty() && !is_digits(whole)) || (!frac.empty() && !is_digits(frac)) ||
      (whole.empty() && frac.empty())) {
    return std::nullopt;
  }
  double v = 0.0;
  std::from_chars(s.data(), s.data() + s.size(), v);
  if (v == std::floor(v) && std::abs(v) < 1e15) {
    const auto as_int = static_cast<long>(v);
    return std::pair{std::to_string(as_int), static_cast<double>(as_int)};
  }
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::pair{std::string(buf.data(), end), v};
}

void print_into(const Expr& e, std::string& out) {
  if (e.is_leaf()) {
    out += e.text();
    return;
  }
  out += '(';
  out += info(e.function()).token;
  for (const auto& c : e.children()) {
    out += ' ';
    print_into(*c, out);
  }
  out += ')';
}

void shape_into(const Expr& e, std::string& out) {
  if (e.is_leaf()) {
    out += '_';
    return;
  }
  out += '(';
  out += info(e.function()).token;
  for (const auto& c : e.children()) {
    out += ' ';
    shape_into(*c, out);
  }
  out += ')';
}

struct Token {
  std::string_view text;
  std::size_t position;
};

std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    const char c = text[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
    } else if (c == '(' || c == ')') {
      tokens.push_back({text.substr(i, 1), i});
      ++i;
    } else {
      const std::size_t start = i;
      while (i < text.size() && text[i] != ' ' && text[i] != '\t' && text[i] != '\n' &&
             text[i] != '\r' && text[i] != '(' && text[i] != ')') {
        ++i;
      }
      tokens.push_back({text.substr(start, i - start), start});
    }
  }
  return tokens;
}

class Parser {
 public:
  Parser(std::string_view text) : text_(text), tokens_(tokenize(text)) {}

  ExprPtr parse_root() {
    if (tokens_.empty()) throw ParseError("empty expression", 0);
    ExprPtr e = parse_expr(/*root=*/true);
    if (pos_ != tokens_.size()) {
      throw ParseError("unexpected trailing token '" + std::string(tokens_[pos_].text) + "'",
                       tokens_[pos_].position);
    }
    return e;
  }

 private:
  ExprPtr parse_expr(bool root) {
    if (pos_ >= tokens_.size()) throw ParseError("unexpected end of input", text_.size());
    const Token tok = tokens_[pos_++];
    if (tok.text == ")") throw ParseError("unbalanced ')'", tok.position);
    if (tok.text != "(") return parse_atom(tok);

    if (pos_ >= tokens_.size()) throw ParseError("unbalanced '('", tok.position);
    const Token head = tokens_[pos_++];
    std::vector<ExprPtr> args;
    while (true) {
      if (pos_ >= tokens_.size()) throw ParseError("unbalanced '('", tok.position);
      if (tokens_[pos_].text == ")") {
        ++pos_;
        break;
      }
      args.push_back(parse_expr(false));
    }
    return build(head, std::move(args), tok.position, root);
  }

  ExprPtr build(const Token& head, std::vector<ExprPtr> args, std::size_t open, bool root) {
    auto arity_error = [&](std::string_view name, std::string_view expected) {
      return ParseError(std::string(name) + " expects " + std::string(expected) +
                            " argument(s), got " + std::to_string(args.size()),
                        open);
    };
    if (head.text == "-") {
      if (args.size() == 1) return Expr::function(Function::Mul, {Expr::integer(-1), args[0]});
      if (args.size() != 2) throw arity_error("-", "1 or 2");
      return Expr::function(Function::Add, {args[0], Expr::function(Function::Mul, {Expr::integer(-1), args[1]})});
    }
    if (head.text == "/") {
      if (args.size() != 2) throw arity_error("/", "2");
      return Expr::function(Function::Mul, {args[0], Expr::function(Function::Pow, {args[1], Expr::integer(-1)})});
    }
    const auto f = function_from_token(head.text);
    if (!f) throw ParseError("unknown function '" + std::string(head.text) + "'", head.position);
    if (*f == Function::Equal && !root) {
      throw ParseError("equality is only allowed at the root", head.position);
    }
    const int arity = info(*f).arity;
    if (static_cast<int>(args.size()) != arity) {
      throw arity_error(head.text, std::to_string(arity));
    }
    return Expr::function(*f, std::move(args));
  }

  ExprPtr parse_atom(const Token& tok) {
    if (tok.text == "pi" || tok.text == "π") return Expr::pi();
    if (tok.text == "_") return Expr::blank();
    if (auto num = parse_number(tok.text)) return Expr::number(tok.text);
    if (function_from_token(tok.text) || tok.text == "-" || tok.text == "/") {
      throw ParseError("function '" + std::string(tok.text) + "' used as a leaf", tok.position);
    }
    return Expr::symbol(std::string(tok.text));
  }

  std::string_view text_;
  std::vector<Token> tokens_;
  std::size_t pos_ = 0;
};

std::optional<double> finite(double v) {
  if (!std::isfinite(v)) return std::nullopt;
  return v;
}

std::optional<double> apply(Function f, std::span<const double> x) {
  const double a = x[0];
  switch (f) {
    case Function::Equal:
      throw ContractError("equality has no numeric value");
    case Function::Add: return finite(a + x[1]);
    case Function::Mul: return finite(a * x[1]);
    case Function::Pow: {
      const double b = x[1];
      if (std::abs(a) < kPoleTolerance && b < 0) return std::nullopt;
      if (a < 0 && b != std::floor(b)) return std::nullopt;
      return finite(std::pow(a, b));
    }
    case Function::Sqrt:
      if (a < 0) return std::nullopt;
      return std::sqrt(a);
    case Function::Exp: return finite(std::exp(a));
    case Function::Log:
      if (a <= 0) return std::nullopt;
      return finite(std::log(a));
    case Function::Sin: return std::sin(a);
    case Function::Cos: return std::cos(a);
    case Function::Tan:
      if (std::abs(std::cos(a)) < kPoleTolerance) return std::nullopt;
      return finite(std::tan(a));
    case Function::Sec:
      if (std::abs(std::cos(a)) < kPoleTolerance) return std::nullopt;
      return finite(1.0 / std::cos(a));
    case Function::Csc:
      if (std::abs(std::sin(a)) < kPoleTolerance) return std::nullopt;
      return finite(1.0 / std::sin(a));
    case Function::Cot:
      if (std::abs(std::sin(a)) < kPoleTolerance) return std::nullopt;
      return finite(std::cos(a) / std::sin(a));
    case Function::Asin:
      if (std::abs(a) > 1) return std::nullopt;
      return std::asin(a);
    case Function::Acos:
      if (std::abs(a) > 1) return std::nullopt;
      return std::acos(a);
    case Function::Atan: return std::atan(a);
    case Function::Asec:
      if (std::abs(a) < 1) return std::nullopt;
      return std::acos(1.0 / a);
    case Function::Acsc:
      if (std::abs(a) < 1) return std::nullopt;
      return std::asin(1.0 / a);
    case Function::Acot:
      if (std::abs(a) < kPoleTolerance) return std::nullopt;
      return std::atan(1.0 / a);
    case Function::Sinh: return finite(std::sinh(a));
    case Function::Cosh: return finite(std::cosh(a));
    case Function::Tanh: return std::tanh(a);
    case Function::Sech: return finite(1.0 / std::cosh(a));
    case Function::Csch:
      if (std::abs(std::sinh(a)) < kPoleTolerance) return std::nullopt;
      return finite(1.0 / std::sinh(a));
    case Function::Coth:
      if (std::abs(std::sinh(a)) < kPoleTolerance) return std::nullopt;
      return finite(std::cosh(a) / std::sinh(a));
    case Function::Asinh: return std::asinh(a);
    case Function::Acosh:
      if (a < 1) return std::nullopt;
      return finite(std::acosh(a));
    case Function::Atanh:
      if (std::abs(a) >= 1) return std::nullopt;
      return finite(std::atanh(a));
    case Function::Acoth:
      if (std::abs(a) <= 1) return std::nullopt;
      return finite(0.5 * std::log((a + 1.0) / (a - 1.0)));
  }
  return std::nullopt;
}

void collect_symbols(const Expr& e, std::vector<std::string>& out) {
  if (e.kind() == ExprKind::Symbol) {
    if (std::find(out.begin(), out.end(), e.text()) == out.end()) out.push_back(e.text());
    return;
  }
  for (const auto& c : e.children()) collect_symbols(*c, out);
}

void collect_paths(const Expr& e, Path& current, std::vector<Path>& out) {
  out.push_back(current);
  for (std::size_t i = 0; i < e.children().size(); ++i) {
    current.push_back(static_cast<std::uint8_t>(i));
    collect_paths(*e.children()[i], current, out);
    current.pop_back();
  }
}

}  // namespace

std::span<const FunctionInfo> function_table() { return kTable; }

const FunctionInfo& info(Function f) { return kTable[static_cast<std::size_t>(f)]; }

std::optional<Function> function_from_token(std::string_view token) {
  for (const auto& entry : kTable) {
    if (entry.token == token) return entry.id;
  }
  return std::nullopt;
}

ExprPtr Expr::function(Function f, std::vector<ExprPtr> children) {
  const int arity = info(f).arity;
  if (static_cast<int>(children.size()) != arity) {
    throw ContractError(std::string(info(f).token) + " expects " + std::to_string(arity) +
                        " children, got " + std::to_string(children.size()));
  }
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = ExprKind::Function;
  e->function_ = f;
  int depth = 0;
  std::size_t size = 1;
  for (const auto& c : children) {
    if (!c) throw ContractError("null child expression");
    depth = std::max(depth, c->depth());
    size += c->size();
  }
  e->depth_ = depth + 1;
  e->size_ = size;
  e->children_ = std::move(children);
  return e;
}

ExprPtr Expr::symbol(std::string name) {
  if (name.empty()) throw ContractError("empty symbol name");
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = ExprKind::Symbol;
  e->text_ = std::move(name);
  return e;
}

ExprPtr Expr::number(std::string_view literal) {
  auto parsed = parse_number(literal);
  if (!parsed) throw ContractError("not a numeric literal: '" + std::string(literal) + "'");
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = ExprKind::Number;
  e->text_ = std::move(parsed->first);
  e->value_ = parsed->second;
  return e;
}

ExprPtr Expr::integer(long value) { return number(std::to_string(value)); }

ExprPtr Expr::pi() {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = ExprKind::Constant;
  e->text_ = "pi";
  e->value_ = std::numbers::pi;
  return e;
}

ExprPtr Expr::blank() {
  auto e = std::shared_ptr<Expr>(new Expr());
  e->kind_ = ExprKind::Blank;
  e->text_ = "_";
  return e;
}

bool structurally_equal(const Expr& a, const Expr& b) {
  if (&a == &b) return true;
  if (a.kind() != b.kind() || a.size() != b.size() || a.depth() != b.depth()) return false;
  if (a.kind() != ExprKind::Function) return a.text() == b.text();
  if (a.function() != b.function()) return false;
  for (std::size_t i = 0; i < a.children().size(); ++i) {
    if (!structurally_equal(*a.children()[i], *b.children()[i])) return false;
  }
  return true;
}

std::string print(const Expr& e) {
  std::string out;
  print_into(e, out);
  return out;
}

std::string shape_key(const Expr& e) {
  std::string out;
  shape_into(e, out);
  return out;
}

ExprPtr parse(std::string_view text) { return Parser(text).parse_root(); }

std::vector<std::string> symbols(const Expr& e) {
  std::vector<std::string> out;
  collect_symbols(e, out);
  return out;
}

std::optional<double> evaluate(const Expr& e, const Assignment& assignment) {
  switch (e.kind()) {
    case ExprKind::Number:
    case ExprKind::Constant:
      return e.number_value();
    case ExprKind::Symbol: {
      auto it = assignment.find(e.text());
      if (it == assignment.end()) {
        throw ContractError("symbol '" + e.text() + "' has no assigned value");
      }
      return it->second;
    }
    case ExprKind::Blank:
      throw ContractError("cannot evaluate an expression containing a blank");
    case ExprKind::Function: {
      std::array<double, 2> args{};
      for (std::size_t i = 0; i < e.children().size(); ++i) {
        auto v = evaluate(*e.children()[i], assignment);
        if (!v) return std::nullopt;
        args[i] = *v;
      }
      return apply(e.function(), std::span<const double>(args.data(), e.children().size()));
    }
  }
  return std::nullopt;
}

bool approx_equal(double a, double b) {
  const double tolerance = std::max(1e-8, 1e-6 * std::max(std::abs(a), std::abs(b)));
  return std::abs(a - b) <= tolerance;
}

ExprPtr subtree(const ExprPtr& root, std::span<const std::uint8_t> path) {
  ExprPtr cur = root;
  for (auto i : path) {
    if (i >= cur->children().size()) throw ContractError("path leaves the tree");
    cur = cur->children()[i];
  }
  return cur;
}

ExprPtr replace(const ExprPtr& root, std::span<const std::uint8_t> path, ExprPtr replacement) {
  if (path.empty()) return replacement;
  if (path[0] >= root->children().size()) throw ContractError("path leaves the tree");
  std::vector<ExprPtr> children = root->children();
  children[path[0]] = replace(children[path[0]], path.subspan(1), std::move(replacement));
  return Expr::function(root->function(), std::move(children));
}

std::vector<Path> all_paths(const Expr& e) {
  std::vector<Path> out;
  Path current;
  collect_paths(e, current, out);
  return out;
}

}  // namespace treesmu::expr
