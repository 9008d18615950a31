#include "treesmu/metrics.hpp"

namespace treesmu {

void Confusion::add(expr::Label predicted, expr::Label gold) {
  const bool p = predicted == expr::Label::Correct;
  const bool g = gold == expr::Label::Correct;
  if (p && g) ++tp;
  else if (!p && !g) ++tn;
  else if (p) ++fp;
  else ++fn;
}

void Confusion::add(const Confusion& other) {
  tp += other.tp;
  tn += other.tn;
  fp += other.fp;
  fn += other.fn;
}

double Confusion::accuracy() const {
  return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
}

double Confusion::precision() const {
  return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
}

double Confusion::recall() const {
  return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
}

}  // namespace treesmu
