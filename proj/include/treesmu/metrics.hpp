#pragma once

#include <cstddef>

#include "treesmu/expr.hpp"

namespace treesmu {

// Confusion counts with Correct as the positive class.
struct Confusion {
  std::size_t tp = 0;
  std::size_t tn = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  void add(expr::Label predicted, expr::Label gold);
  void add(const Confusion& other);
  std::size_t total() const { return tp + tn + fp + fn; }
  double accuracy() const;
  // 0 when nothing was predicted (resp. labelled) positive.
  double precision() const;
  double recall() const;
};

// p(Correct) >= 0.5 counts as a Correct prediction.
inline expr::Label decide(double probability) {
  return probability >= 0.5 ? expr::Label::Correct : expr::Label::Incorrect;
}

}  // namespace treesmu
