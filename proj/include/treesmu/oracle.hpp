#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>

#include "treesmu/expr.hpp"

namespace treesmu::datagen {

struct OracleConfig {
  int samples = 16;
  // Redraws allowed per sample when either side is undefined.
  int redraws = 5;
  double low = 0.1;
  double high = 2.0;
};

enum class Verdict { Correct, Incorrect, Undetermined };

struct OracleResult {
  Verdict verdict = Verdict::Undetermined;
  int agree = 0;
  int disagree = 0;
  // Samples that stayed undefined after every redraw.
  int undefined = 0;
  // Samples whose first draw was undefined.
  int redrawn = 0;

  // Few first-draw failures: the equation is defined on most of the sampling
  // range, so a fresh re-check will not come back Undetermined.
  bool well_defined(int samples) const { return undefined == 0 && 16 * redrawn <= samples; }
};

// Symbols are drawn uniformly from [-high, -low] ∪ [low, high].
double draw_value(std::mt19937_64& rng, const OracleConfig& cfg);

// Correct iff every sample agrees. Incorrect iff at least one disagrees and
// none are undefined. Undetermined otherwise.
OracleResult check_equation(const expr::Expr& lhs, const expr::Expr& rhs, std::mt19937_64& rng,
                            const OracleConfig& cfg = {});

// Stable per-string seed (FNV-1a) for label re-checks independent of the
// generator's own streams.
std::uint64_t string_seed(std::string_view text);

// If `e` evaluates to the same value on every sample, that value.
std::optional<double> constant_value(const expr::Expr& e, std::mt19937_64& rng,
                                     const OracleConfig& cfg = {});

// "0", "1" or "other", by constant_value.
std::string constant_class(const expr::Expr& e, const OracleConfig& cfg = {});

}  // namespace treesmu::datagen
