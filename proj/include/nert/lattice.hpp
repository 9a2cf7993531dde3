#pragma once

// Log-space alignment lattice for transducer training: the (T+1)x(U+1)
// trellis, forward/backward recursions, the unconstrained / fixed /
// constrained alignment losses and their analytic gradients.

#include <Eigen/Dense>
#include <cstdint>
#include <utility>
#include <variant>
#include <vector>

#include "nert/errors.hpp"
#include "nert/logmath.hpp"

namespace nert {

using BoolMatrix = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

enum class Move : std::uint8_t { Blank = 0, Label = 1 };

// label(t, u) = log P(y_{u+1} | t, u)  for t in [0,T), u in [0,U)
// blank(t, u) = log P(blank  | t, u)   for t in [0,T), u in [0,U]
// Row t holds the distributions computed at input frame t (0-based).
struct Lattice {
  Eigen::MatrixXd label;
  Eigen::MatrixXd blank;

  int frames() const { return static_cast<int>(blank.rows()); }
  int labels() const { return static_cast<int>(blank.cols()) - 1; }

  void validate() const {
    const int t = frames();
    const int u = labels();
    if (t < 1 || u < 0) throw ContractViolation("lattice: need T >= 1, U >= 0");
    if (label.rows() != t && u > 0)
      throw ContractViolation("lattice: label/blank row mismatch");
    if (static_cast<int>(label.cols()) != u)
      throw ContractViolation("lattice: label must have U columns");
    auto check = [](const Eigen::MatrixXd& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i)
        if (!is_log_prob(m.data()[i]))
          throw ContractViolation("lattice: entries must be finite or -inf");
    };
    check(label);
    check(blank);
  }
};

// One monotone trellis path: exactly T Blank moves (advance t) and U Label
// moves (advance u), ending with the blank that consumes the last frame.
struct AlignmentPath {
  std::vector<Move> moves;

  int frames() const {
    int n = 0;
    for (Move m : moves) n += (m == Move::Blank);
    return n;
  }
  int labels() const { return static_cast<int>(moves.size()) - frames(); }

  void validate(int T, int U) const {
    if (frames() != T || labels() != U)
      throw ContractViolation("path: move counts do not match (T, U)");
    if (moves.empty() || moves.back() != Move::Blank)
      throw ContractViolation("path: final move must be blank");
  }
};

// Boolean admissibility masks over the two lattice matrices, produced by
// dilating a path's cells with a (1+2*delta_t) x (1+2*delta_u) rectangle.
struct ConstraintMask {
  BoolMatrix label;
  BoolMatrix blank;
  int delta_t = 0;
  int delta_u = 0;

  void check_compatible(const Lattice& lat) const {
    if (blank.rows() != lat.blank.rows() || blank.cols() != lat.blank.cols() ||
        label.rows() != lat.label.rows() || label.cols() != lat.label.cols())
      throw ContractViolation("mask: dimensions do not match lattice");
  }
};

struct ForwardResult {
  Eigen::MatrixXd alpha;  // (T+1) x (U+1), node (t,u) prefix log-sums
  double total = kLogZero;
};

namespace detail {

inline double masked(const Eigen::MatrixXd& m, const BoolMatrix* mask, int t,
                     int u) {
  if (mask && !(*mask)(t, u)) return kLogZero;
  return m(t, u);
}

}  // namespace detail

// alpha(t,u) = log-sum over admissible prefixes from (0,0) to node (t,u);
// total = alpha(T,U) = log of the summed probability of all complete
// admissible paths. A mask admitting no complete path yields total = -inf.
inline ForwardResult forward(const Lattice& lat,
                             const ConstraintMask* mask = nullptr) {
  lat.validate();
  if (mask) mask->check_compatible(lat);
  const int T = lat.frames();
  const int U = lat.labels();
  const BoolMatrix* lm = mask ? &mask->label : nullptr;
  const BoolMatrix* bm = mask ? &mask->blank : nullptr;

  Eigen::MatrixXd alpha(T + 1, U + 1);
  alpha.setConstant(kLogZero);
  alpha(0, 0) = 0.0;
  for (int t = 0; t <= T; ++t) {
    for (int u = 0; u <= U; ++u) {
      if (t == 0 && u == 0) continue;
      double a = kLogZero;
      if (t > 0)
        a = log_add(a, alpha(t - 1, u) + detail::masked(lat.blank, bm, t - 1, u));
      if (u > 0 && t < T)
        a = log_add(a, alpha(t, u - 1) + detail::masked(lat.label, lm, t, u - 1));
      alpha(t, u) = a;
    }
  }
  const double total = alpha(T, U);
  return {std::move(alpha), total};
}

// beta(t,u) = log-sum over admissible suffixes from node (t,u) to (T,U).
// beta(0,0) equals the forward total; beta(T,U) = 0 (empty suffix).
inline Eigen::MatrixXd backward(const Lattice& lat,
                                const ConstraintMask* mask = nullptr) {
  lat.validate();
  if (mask) mask->check_compatible(lat);
  const int T = lat.frames();
  const int U = lat.labels();
  const BoolMatrix* lm = mask ? &mask->label : nullptr;
  const BoolMatrix* bm = mask ? &mask->blank : nullptr;

  Eigen::MatrixXd beta(T + 1, U + 1);
  beta.setConstant(kLogZero);
  beta(T, U) = 0.0;
  for (int t = T; t >= 0; --t) {
    for (int u = U; u >= 0; --u) {
      if (t == T && u == U) continue;
      double b = kLogZero;
      if (t < T)
        b = log_add(b, detail::masked(lat.blank, bm, t, u) + beta(t + 1, u));
      if (u < U && t < T)
        b = log_add(b, detail::masked(lat.label, lm, t, u) + beta(t, u + 1));
      beta(t, u) = b;
    }
  }
  return beta;
}

// Eq.-style unconstrained loss: log P(y|x) marginalized over all alignments.
inline double loss_unconstrained(const Lattice& lat) {
  return forward(lat).total;
}

// Sum of the T+U per-step log-probabilities along one path.
inline double path_logprob(const Lattice& lat, const AlignmentPath& path) {
  lat.validate();
  path.validate(lat.frames(), lat.labels());
  int t = 0, u = 0;
  double sum = 0.0;
  for (Move m : path.moves) {
    if (m == Move::Blank) {
      sum += lat.blank(t, u);
      ++t;
    } else {
      sum += lat.label(t, u);
      ++u;
    }
  }
  return sum;
}

// Fixed-alignment loss: the probability of the given alignment only.
inline double loss_fixed(const Lattice& lat, const AlignmentPath& path) {
  return path_logprob(lat, path);
}

// Path cells dilated by half-widths (delta_t, delta_u), clipped at the
// lattice boundary. Separable dilation: t axis first, then u.
inline ConstraintMask build_constraint_mask(const AlignmentPath& path,
                                            int delta_t, int delta_u) {
  if (delta_t < 0 || delta_u < 0)
    throw ContractViolation("mask: deltas must be non-negative");
  const int T = path.frames();
  const int U = path.labels();
  path.validate(T, U);

  ConstraintMask m;
  m.delta_t = delta_t;
  m.delta_u = delta_u;
  m.label = BoolMatrix::Constant(T, U, false);
  m.blank = BoolMatrix::Constant(T, U + 1, false);
  {
    int t = 0, u = 0;
    for (Move mv : path.moves) {
      if (mv == Move::Blank) {
        m.blank(t, u) = true;
        ++t;
      } else {
        m.label(t, u) = true;
        ++u;
      }
    }
  }
  auto dilate = [](const BoolMatrix& in, int dt, int du) {
    const int R = static_cast<int>(in.rows());
    const int C = static_cast<int>(in.cols());
    BoolMatrix tmp = BoolMatrix::Constant(R, C, false);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) {
        bool v = false;
        for (int k = std::max(0, r - dt); k <= std::min(R - 1, r + dt); ++k)
          v = v || in(k, c);
        tmp(r, c) = v;
      }
    BoolMatrix out = BoolMatrix::Constant(R, C, false);
    for (int r = 0; r < R; ++r)
      for (int c = 0; c < C; ++c) {
        bool v = false;
        for (int k = std::max(0, c - du); k <= std::min(C - 1, c + du); ++k)
          v = v || tmp(r, k);
        out(r, c) = v;
      }
    return out;
  };
  if (delta_t > 0 || delta_u > 0) {
    m.label = dilate(m.label, delta_t, delta_u);
    m.blank = dilate(m.blank, delta_t, delta_u);
  }
  return m;
}

// Constrained-alignment loss: forward total over the delta-dilated mask.
// Equals loss_fixed at delta = 0 and loss_unconstrained at full relaxation.
inline double loss_constrained(const Lattice& lat, const AlignmentPath& path,
                               int delta_t, int delta_u) {
  if (delta_t == 0 && delta_u == 0) return loss_fixed(lat, path);  // bit-identical
  ConstraintMask mask = build_constraint_mask(path, delta_t, delta_u);
  return forward(lat, &mask).total;
}

// --- loss modes and gradients -------------------------------------------

struct ModeUnconstrained {};
struct ModeFixed {
  AlignmentPath path;
};
struct ModeConstrained {
  AlignmentPath path;
  int delta_t = 0;
  int delta_u = 0;
};
using LossMode = std::variant<ModeUnconstrained, ModeFixed, ModeConstrained>;

struct LatticeGradients {
  Eigen::MatrixXd d_label;  // T x U
  Eigen::MatrixXd d_blank;  // T x (U+1)
  double nll = 0.0;         // negative log-likelihood of the chosen mode
};

namespace detail {

inline LatticeGradients occupancy_gradients(const Lattice& lat,
                                            const ConstraintMask* mask) {
  const int T = lat.frames();
  const int U = lat.labels();
  ForwardResult fw = forward(lat, mask);
  if (fw.total == kLogZero)
    throw NoAdmissiblePath("loss_gradients: no admissible path");
  Eigen::MatrixXd beta = backward(lat, mask);
  const BoolMatrix* lm = mask ? &mask->label : nullptr;
  const BoolMatrix* bm = mask ? &mask->blank : nullptr;

  LatticeGradients g;
  g.nll = -fw.total;
  g.d_label = Eigen::MatrixXd::Zero(T, U);
  g.d_blank = Eigen::MatrixXd::Zero(T, U + 1);
  for (int t = 0; t < T; ++t) {
    for (int u = 0; u <= U; ++u) {
      const double lb = masked(lat.blank, bm, t, u);
      if (lb != kLogZero)
        g.d_blank(t, u) = -std::exp(fw.alpha(t, u) + lb + beta(t + 1, u) - fw.total);
      if (u < U) {
        const double ll = masked(lat.label, lm, t, u);
        if (ll != kLogZero)
          g.d_label(t, u) = -std::exp(fw.alpha(t, u) + ll + beta(t, u + 1) - fw.total);
      }
    }
  }
  return g;
}

}  // namespace detail

// Gradients of the negative log-likelihood with respect to the raw log-prob
// entries. Fixed mode: exactly -1 on path steps, 0 elsewhere. The other
// modes use the standard alpha/beta occupancy products.
inline LatticeGradients loss_gradients(const Lattice& lat, const LossMode& mode) {
  if (std::holds_alternative<ModeUnconstrained>(mode)) {
    return detail::occupancy_gradients(lat, nullptr);
  }
  if (const auto* c = std::get_if<ModeConstrained>(&mode)) {
    if (c->delta_t != 0 || c->delta_u != 0) {
      ConstraintMask mask = build_constraint_mask(c->path, c->delta_t, c->delta_u);
      return detail::occupancy_gradients(lat, &mask);
    }
    // delta 0 admits the path alone; fall through to the fixed-mode gradients
  }
  const AlignmentPath& fixed_path = std::holds_alternative<ModeFixed>(mode)
                                        ? std::get<ModeFixed>(mode).path
                                        : std::get<ModeConstrained>(mode).path;
  const double lp = path_logprob(lat, fixed_path);
  if (lp == kLogZero)
    throw NoAdmissiblePath("loss_gradients: fixed path has zero probability");
  const int T = lat.frames();
  const int U = lat.labels();
  LatticeGradients g;
  g.nll = -lp;
  g.d_label = Eigen::MatrixXd::Zero(T, U);
  g.d_blank = Eigen::MatrixXd::Zero(T, U + 1);
  int t = 0, u = 0;
  for (Move m : fixed_path.moves) {
    if (m == Move::Blank) {
      g.d_blank(t, u) -= 1.0;
      ++t;
    } else {
      g.d_label(t, u) -= 1.0;
      ++u;
    }
  }
  return g;
}

}  // namespace nert
