#pragma once

// Straight-line re-implementations of the cells with plain loops over the
// parameter values. No graph, no Eigen: an independent oracle for the
// tape-built cells.

#include <cmath>
#include <string>
#include <vector>

#include "treesmu/cells.hpp"
#include "treesmu/expr.hpp"
#include "treesmu/param_store.hpp"
#include "treesmu/vocab.hpp"

namespace treesmu::testing {

using Vec = std::vector<double>;

struct RefState {
  Vec h;
  Vec c;                   // zeros when unused
  std::vector<Vec> stack;  // p rows, zeros when empty
};

inline double ref_sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline Vec ref_affine(const ad::ParamStore& s, const std::string& prefix, const std::string& w,
                      const std::string& b, const Vec& x) {
  const ad::Tensor& W = s.value(s.id(prefix + "/" + w));
  const ad::Tensor& bias = s.value(s.id(prefix + "/" + b));
  Vec out(W.rows());
  for (std::size_t r = 0; r < W.rows(); ++r) {
    double acc = bias(r, 0);
    for (std::size_t c = 0; c < W.cols(); ++c) acc += W(r, c) * x[c];
    out[r] = acc;
  }
  return out;
}

inline Vec ref_concat(const Vec& a, const Vec& b) {
  Vec out = a;
  out.insert(out.end(), b.begin(), b.end());
  return out;
}

inline Vec ref_map(Vec v, double (*f)(double)) {
  for (double& x : v) x = f(x);
  return v;
}

inline double ref_tanh(double x) { return std::tanh(x); }

inline RefState ref_zero(std::size_t n, std::size_t p) {
  return {Vec(n, 0.0), Vec(n, 0.0), std::vector<Vec>(p, Vec(n, 0.0))};
}

inline RefState ref_rnn(const ad::ParamStore& s, const std::string& prefix, const RefState& l,
                        const RefState& r) {
  const Vec x = ref_concat(l.h, r.h);
  RefState out;
  out.h = ref_map(ref_affine(s, prefix, "W", "b", x), ref_sigmoid);
  out.c = Vec(out.h.size(), 0.0);
  return out;
}

inline RefState ref_lstm(const ad::ParamStore& s, const std::string& prefix, const RefState& l,
                         const RefState& r) {
  const Vec x = ref_concat(l.h, r.h);
  const Vec in = ref_map(ref_affine(s, prefix, "Ui", "bi", x), ref_sigmoid);
  const Vec f1 = ref_map(ref_affine(s, prefix, "Uf1", "bf1", x), ref_sigmoid);
  const Vec f2 = ref_map(ref_affine(s, prefix, "Uf2", "bf2", x), ref_sigmoid);
  const Vec o = ref_map(ref_affine(s, prefix, "Uo", "bo", x), ref_sigmoid);
  const Vec u = ref_map(ref_affine(s, prefix, "Uu", "bu", x), ref_tanh);
  RefState out;
  const std::size_t n = in.size();
  out.c.resize(n);
  out.h.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.c[i] = in[i] * u[i] + f1[i] * l.c[i] + f2[i] * r.c[i];
    out.h[i] = o[i] * std::tanh(out.c[i]);
  }
  return out;
}

// queue=false: stack (write row 0, push shifts down). queue=true: write the
// back row p-1, push shifts towards the front.
inline RefState ref_stack_cell(const ad::ParamStore& s, const std::string& prefix,
                               const cells::ModelConfig& cfg, const RefState& l,
                               const RefState& r, bool queue) {
  const std::size_t n = cfg.n;
  const long p = static_cast<long>(cfg.p);
  const Vec x = ref_concat(l.h, r.h);
  const Vec f1 = ref_map(ref_affine(s, prefix, "Uf1", "bf1", x), ref_sigmoid);
  const Vec f2 = ref_map(ref_affine(s, prefix, "Uf2", "bf2", x), ref_sigmoid);
  Vec push = ref_map(ref_affine(s, prefix, "Apush", "bpush", x), ref_sigmoid);
  Vec pop = ref_map(ref_affine(s, prefix, "Apop", "bpop", x), ref_sigmoid);
  Vec noop(n, 0.0);
  if (cfg.noop) noop = ref_map(ref_affine(s, prefix, "Anoop", "bnoop", x), ref_sigmoid);
  for (std::size_t i = 0; i < n; ++i) {
    const double total = push[i] + pop[i] + noop[i];
    push[i] /= total;
    pop[i] /= total;
    noop[i] /= total;
  }
  const Vec u = ref_map(ref_affine(s, prefix, "Uu", "bu", x), ref_tanh);
  const Vec o = ref_map(ref_affine(s, prefix, "Uo", "bo", x), ref_sigmoid);

  std::vector<Vec> sc(p, Vec(n));
  for (long row = 0; row < p; ++row) {
    for (std::size_t i = 0; i < n; ++i) {
      sc[row][i] = f1[i] * l.stack[row][i] + f2[i] * r.stack[row][i];
    }
  }
  auto at = [&](long row, std::size_t i) { return row < 0 || row >= p ? 0.0 : sc[row][i]; };

  RefState out;
  out.c = Vec(n, 0.0);
  out.stack.assign(p, Vec(n));
  for (long row = 0; row < p; ++row) {
    for (std::size_t i = 0; i < n; ++i) {
      double v;
      if (!queue) {
        const double pushed = row == 0 ? u[i] : at(row - 1, i);
        v = push[i] * pushed + pop[i] * at(row + 1, i);
      } else {
        const double pushed = row == p - 1 ? u[i] : at(row + 1, i);
        v = push[i] * pushed + pop[i] * at(row - 1, i);
      }
      out.stack[row][i] = v + noop[i] * at(row, i);
    }
  }
  Vec mix(n, 0.0);
  if (cfg.k == 1) {
    mix = out.stack[0];
  } else {
    const Vec weights = ref_map(ref_affine(s, prefix, "Up", "bp", x), ref_sigmoid);
    for (std::size_t row = 0; row < cfg.k; ++row) {
      for (std::size_t i = 0; i < n; ++i) mix[i] += weights[row] * out.stack[row][i];
    }
  }
  out.h.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.h[i] = o[i] * std::tanh(mix[i]);
  return out;
}

inline RefState ref_encode(const ad::ParamStore& s, const cells::ModelConfig& cfg,
                           const expr::Vocab& vocab, const expr::Expr& e) {
  const std::size_t n = cfg.n;
  if (e.is_leaf()) {
    const ad::Tensor& table = s.value(s.id("leaf/embed"));
    const auto idx = vocab.require_terminal(e.text());
    RefState out = ref_zero(n, cfg.p);
    for (std::size_t i = 0; i < n; ++i) out.h[i] = table(idx, i);
    return out;
  }
  const RefState l = ref_encode(s, cfg, vocab, *e.children()[0]);
  const RefState r = e.children().size() > 1 ? ref_encode(s, cfg, vocab, *e.children()[1])
                                             : ref_zero(n, cfg.p);
  const std::string prefix(expr::info(e.function()).token);
  switch (cfg.architecture) {
    case cells::Architecture::TreeRNN: return ref_rnn(s, prefix, l, r);
    case cells::Architecture::TreeLSTM: return ref_lstm(s, prefix, l, r);
    case cells::Architecture::TreeSMU: return ref_stack_cell(s, prefix, cfg, l, r, false);
    default: return ref_stack_cell(s, prefix, cfg, l, r, true);
  }
}

inline double ref_probability(const ad::ParamStore& s, const cells::ModelConfig& cfg,
                              const expr::Vocab& vocab, const expr::Equation& eq) {
  const Vec a = ref_encode(s, cfg, vocab, *eq.lhs).h;
  const Vec b = ref_encode(s, cfg, vocab, *eq.rhs).h;
  double z = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) z += a[i] * b[i];
  return ref_sigmoid(z);
}

}  // namespace treesmu::testing
