#include "treesmu/oracle.hpp"

#include <cmath>

namespace treesmu::datagen {
namespace {

std::vector<std::string> joint_symbols(const expr::Expr& a, const expr::Expr& b) {
  auto out = expr::symbols(a);
  for (auto& s : expr::symbols(b)) {
    if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(std::move(s));
  }
  return out;
}

void draw_assignment(const std::vector<std::string>& names, std::mt19937_64& rng,
                     const OracleConfig& cfg, expr::Assignment& out) {
  for (const auto& n : names) out[n] = draw_value(rng, cfg);
}

}  // namespace

double draw_value(std::mt19937_64& rng, const OracleConfig& cfg) {
  std::uniform_real_distribution<double> magnitude(cfg.low, cfg.high);
  const double v = magnitude(rng);
  return (rng() & 1) ? v : -v;
}

OracleResult check_equation(const expr::Expr& lhs, const expr::Expr& rhs, std::mt19937_64& rng,
                            const OracleConfig& cfg) {
  const auto names = joint_symbols(lhs, rhs);
  OracleResult result;
  expr::Assignment assignment;
  for (int s = 0; s < cfg.samples; ++s) {
    bool defined = false;
    for (int attempt = 0; attempt <= cfg.redraws && !defined; ++attempt) {
      if (attempt == 1) ++result.redrawn;
      draw_assignment(names, rng, cfg, assignment);
      const auto a = expr::evaluate(lhs, assignment);
      if (!a) continue;
      const auto b = expr::evaluate(rhs, assignment);
      if (!b) continue;
      defined = true;
      if (expr::approx_equal(*a, *b)) {
        ++result.agree;
      } else {
        ++result.disagree;
      }
    }
    if (!defined) ++result.undefined;
  }
  if (result.undefined > 0) {
    result.verdict = Verdict::Undetermined;
  } else if (result.disagree == 0) {
    result.verdict = Verdict::Correct;
  } else {
    result.verdict = Verdict::Incorrect;
  }
  return result;
}

std::uint64_t string_seed(std::string_view text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::optional<double> constant_value(const expr::Expr& e, std::mt19937_64& rng,
                                     const OracleConfig& cfg) {
  const auto names = expr::symbols(e);
  std::optional<double> first;
  expr::Assignment assignment;
  for (int s = 0; s < cfg.samples; ++s) {
    std::optional<double> v;
    for (int attempt = 0; attempt <= cfg.redraws && !v; ++attempt) {
      draw_assignment(names, rng, cfg, assignment);
      v = expr::evaluate(e, assignment);
    }
    if (!v) return std::nullopt;
    if (!first) {
      first = v;
    } else if (!expr::approx_equal(*first, *v)) {
      return std::nullopt;
    }
  }
  return first;
}

std::string constant_class(const expr::Expr& e, const OracleConfig& cfg) {
  std::mt19937_64 rng(string_seed(expr::print(e)));
  const auto v = constant_value(e, rng, cfg);
  if (v && expr::approx_equal(*v, 0.0)) return "0";
  if (v && expr::approx_equal(*v, 1.0)) return "1";
  return "other";
}

}  // namespace treesmu::datagen
