#pragma once

// Self-contained oracle suite: brute-force path enumeration against the
// lattice losses, loss-mode algebra, finite-difference gradient checks at
// the lattice and full-model level, and beam-search exactness against
// exhaustive search. Used by the `verify` subcommand and the acceptance
// harness.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nert/decoder.hpp"
#include "nert/lattice.hpp"
#include "nert/model.hpp"

namespace nert {

struct CheckResult {
  std::string name;
  bool passed = true;
  std::string detail;  // worst-case numbers, for diagnostics
};

namespace verify_detail {

inline Lattice random_lattice(std::mt19937_64& rng, int T, int U) {
  std::normal_distribution<double> n(0.0, 1.5);
  Lattice lat;
  lat.label = Eigen::MatrixXd::Zero(T, U);
  lat.blank = Eigen::MatrixXd::Zero(T, U + 1);
  for (Eigen::Index i = 0; i < lat.label.size(); ++i)
    lat.label.data()[i] = n(rng) - 1.0;
  for (Eigen::Index i = 0; i < lat.blank.size(); ++i)
    lat.blank.data()[i] = n(rng) - 1.0;
  return lat;
}

inline AlignmentPath random_path(std::mt19937_64& rng, int T, int U) {
  // shuffle U labels among the first T+U-1 slots; the last move is blank
  std::vector<Move> moves(static_cast<std::size_t>(T + U), Move::Blank);
  std::vector<int> slots(static_cast<std::size_t>(T + U - 1));
  std::iota(slots.begin(), slots.end(), 0);
  std::shuffle(slots.begin(), slots.end(), rng);
  for (int i = 0; i < U; ++i) moves[static_cast<std::size_t>(slots[i])] = Move::Label;
  return AlignmentPath{std::move(moves)};
}

// log-sum over every complete monotone path, optionally restricted to mask
// cells; pure recursion, no shared state with the lattice recursions.
inline double enumerate_paths(const Lattice& lat, const ConstraintMask* mask,
                              int t, int u, double acc) {
  const int T = lat.frames();
  const int U = lat.labels();
  if (t == T && u == U) return acc;
  double total = kLogZero;
  if (t < T && (!mask || mask->blank(t, u)))
    total = log_add(total, enumerate_paths(lat, mask, t + 1, u, acc + lat.blank(t, u)));
  if (u < U && t < T && (!mask || mask->label(t, u)))
    total = log_add(total, enumerate_paths(lat, mask, t, u + 1, acc + lat.label(t, u)));
  return total;
}

// pseudo-random but state-dependent normalized scorer for decoder checks
class HashScorer : public Scorer {
 public:
  HashScorer(int num_labels, std::uint64_t seed, double gain = 2.0)
      : k_(num_labels), seed_(seed), gain_(gain) {}

  int num_labels() const override { return k_; }
  ScorerState initial_state() const override {
    ScorerState s;
    s.h = Eigen::VectorXd::Zero(1);
    s.h[0] = 1.0;
    return s;
  }
  Eigen::VectorXd logprobs(const ScorerState& s, int frame) const override {
    Eigen::VectorXd logits(k_ + 1);
    for (int i = 0; i <= k_; ++i) {
      const double u = unit(mix(static_cast<std::uint64_t>(s.h[0]) * 1000003 +
                                static_cast<std::uint64_t>(frame) * 10007 +
                                static_cast<std::uint64_t>(i)));
      logits[i] = gain_ * (2.0 * u - 1.0);
    }
    const double m = logits.maxCoeff();
    const double lse = m + std::log((logits.array() - m).exp().sum());
    return logits.array() - lse;
  }
  // state is exactly the emitted label history; blank is a no-op, so
  // hypotheses merged on equal histories share continuations
  ScorerState advance(const ScorerState& s, int token, int) const override {
    if (token == k_) return s;
    ScorerState n = s;
    n.h[0] = static_cast<double>(
        mix(static_cast<std::uint64_t>(s.h[0]) * 31 + static_cast<std::uint64_t>(token)) %
        1000000);
    n.last = token;
    return n;
  }

 private:
  std::uint64_t mix(std::uint64_t x) const {
    x += seed_ * 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
  }
  double unit(std::uint64_t x) const {
    return static_cast<double>(x >> 11) * 0x1.0p-53;
  }

  int k_;
  std::uint64_t seed_;
  double gain_;
};

// exhaustive best label sequence under per-alignment max merging
inline void exhaustive_best(const Scorer& sc, int T, int max_expansion, int t,
                            int in_frame, const ScorerState& state,
                            std::vector<int>& labels, double acc,
                            std::map<std::vector<int>, double>& best) {
  if (t > T) {
    auto [it, fresh] = best.try_emplace(labels, acc);
    if (!fresh) it->second = std::max(it->second, acc);
    return;
  }
  const Eigen::VectorXd lp = sc.logprobs(state, t);
  const int blank = sc.num_labels();
  exhaustive_best(sc, T, max_expansion, t + 1, 0, sc.advance(state, blank, t),
                  labels, acc + lp[blank], best);
  if (in_frame < max_expansion) {
    for (int k = 0; k < blank; ++k) {
      labels.push_back(k);
      exhaustive_best(sc, T, max_expansion, t, in_frame + 1, sc.advance(state, k, t),
                      labels, acc + lp[k], best);
      labels.pop_back();
    }
  }
}

inline std::string fmt(double v) {
  std::ostringstream os;
  os.precision(3);
  os << std::scientific << v;
  return os.str();
}

}  // namespace verify_detail

// Criterion: losses match brute-force enumeration on 200 random lattices.
inline CheckResult check_loss_oracle(int cases = 200, double tol = 1e-9) {
  namespace vd = verify_detail;
  std::mt19937_64 rng(20240817);
  double worst = 0;
  for (int i = 0; i < cases; ++i) {
    const int T = 1 + static_cast<int>(rng() % 6);
    const int U = static_cast<int>(rng() % 6);
    const Lattice lat = vd::random_lattice(rng, T, U);
    worst = std::max(worst, std::abs(loss_unconstrained(lat) -
                                     vd::enumerate_paths(lat, nullptr, 0, 0, 0.0)));
    const AlignmentPath path = vd::random_path(rng, T, U);
    const int dt = static_cast<int>(rng() % 3);
    const int du = static_cast<int>(rng() % 3);
    const ConstraintMask mask = build_constraint_mask(path, dt, du);
    worst = std::max(worst, std::abs(loss_constrained(lat, path, dt, du) -
                                     vd::enumerate_paths(lat, &mask, 0, 0, 0.0)));
  }
  return {"loss enumeration oracle", worst <= tol, "worst " + vd::fmt(worst)};
}

// Criterion: constrained(0) = fixed, constrained(full) = unconstrained,
// monotone non-decreasing in delta.
inline CheckResult check_loss_algebra(int cases = 50, double tol = 1e-12) {
  namespace vd = verify_detail;
  std::mt19937_64 rng(20240818);
  double worst = 0;
  bool monotone = true;
  for (int i = 0; i < cases; ++i) {
    const int T = 1 + static_cast<int>(rng() % 6);
    const int U = static_cast<int>(rng() % 6);
    const Lattice lat = vd::random_lattice(rng, T, U);
    const AlignmentPath path = vd::random_path(rng, T, U);
    worst = std::max(worst, std::abs(loss_constrained(lat, path, 0, 0) -
                                     loss_fixed(lat, path)));
    worst = std::max(worst, std::abs(loss_constrained(lat, path, T, U) -
                                     loss_unconstrained(lat)));
    double prev = kLogZero;
    for (int d = 0; d <= std::max(T, U); ++d) {
      const double v = loss_constrained(lat, path, d, d);
      if (v < prev - 1e-12) monotone = false;
      prev = v;
    }
  }
  return {"loss-mode algebra", worst <= tol && monotone,
          "worst " + vd::fmt(worst) + (monotone ? "" : ", monotonicity violated")};
}

// Criterion: analytic lattice gradients match central finite differences.
inline CheckResult check_lattice_gradients(int cases = 20, double tol = 1e-5) {
  namespace vd = verify_detail;
  std::mt19937_64 rng(20240819);
  const double h = 1e-5;
  double worst = 0;
  for (int i = 0; i < cases; ++i) {
    const int T = 2 + static_cast<int>(rng() % 3);
    const int U = 1 + static_cast<int>(rng() % 3);
    Lattice lat = vd::random_lattice(rng, T, U);
    const AlignmentPath path = vd::random_path(rng, T, U);
    const LossMode modes[] = {ModeUnconstrained{}, ModeFixed{path},
                              ModeConstrained{path, 1, 1}};
    for (const LossMode& mode : modes) {
      const LatticeGradients g = loss_gradients(lat, mode);
      auto nll = [&](const Lattice& l) {
        if (std::holds_alternative<ModeUnconstrained>(mode))
          return -loss_unconstrained(l);
        if (std::holds_alternative<ModeFixed>(mode)) return -loss_fixed(l, path);
        return -loss_constrained(l, path, 1, 1);
      };
      auto probe = [&](Eigen::MatrixXd& m, const Eigen::MatrixXd& an) {
        for (Eigen::Index j = 0; j < m.size(); ++j) {
          const double keep = m.data()[j];
          m.data()[j] = keep + h;
          const double up = nll(lat);
          m.data()[j] = keep - h;
          const double dn = nll(lat);
          m.data()[j] = keep;
          const double fd = (up - dn) / (2 * h);
          const double a = an.data()[j];
          if (std::abs(fd - a) < 1e-9) continue;
          worst = std::max(worst,
                           std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-6}));
        }
      };
      probe(lat.blank, g.d_blank);
      if (U > 0) probe(lat.label, g.d_label);
    }
  }
  return {"lattice gradients vs finite differences", worst <= tol,
          "worst rel " + vd::fmt(worst)};
}

// Criterion: full-model gradients (both architectures, every loss mode)
// match central finite differences at width 3.
inline CheckResult check_model_gradients(double tol = 1e-4) {
  namespace vd = verify_detail;
  const double h = 1e-5;
  ModelConfig mc;
  mc.hidden = 3;
  mc.embed = 3;
  mc.layers = 2;
  mc.window = 2;
  mc.vocab_in = 5;
  mc.vocab_out = 4;
  mc.seed = 99;
  const std::vector<int> tokens = {1, 3, 0, 2};
  const std::vector<int> targets = {2, 0};
  const AlignmentPath path{{Move::Blank, Move::Label, Move::Blank, Move::Label,
                            Move::Blank, Move::Blank}};
  double worst = 0;

  auto probe = [&](auto& model, auto loss_fn) {
    model.params().zero_grads();
    loss_fn(true);
    ParamStore& ps = model.params();
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const double keep = ps.get_flat(i);
      ps.set_flat(i, keep + h);
      const double up = loss_fn(false);
      ps.set_flat(i, keep - h);
      const double dn = loss_fn(false);
      ps.set_flat(i, keep);
      const double fd = (up - dn) / (2 * h);
      const double a = ps.grad_flat(i);
      if (std::abs(fd - a) < 1e-8) continue;
      worst = std::max(worst,
                       std::abs(fd - a) / std::max({std::abs(fd), std::abs(a), 1e-6}));
    }
  };

  for (const EncoderArch arch : {EncoderArch::Recurrent, EncoderArch::Attention}) {
    mc.arch = arch;
    const LossMode modes[] = {ModeUnconstrained{}, ModeFixed{path},
                              ModeConstrained{path, 1, 1}};
    for (const LossMode& mode : modes) {
      RnntModel model(mc);
      probe(model, [&](bool grad) {
        return grad ? model.accumulate_gradients(tokens, targets, mode)
                    : model.loss(tokens, targets, mode);
      });
    }
    Seq2SeqModel s2s(mc);
    probe(s2s, [&](bool grad) {
      return grad ? s2s.accumulate_gradients(tokens, targets, path)
                  : s2s.loss_fixed(tokens, targets, path);
    });
  }
  return {"model gradients vs finite differences", worst <= tol,
          "worst rel " + vd::fmt(worst)};
}

// Criterion: with an open beam the decoder's top hypothesis equals the
// exhaustive argmax on 100 random scorers.
inline CheckResult check_decoder_exactness(int cases = 100, double tol = 1e-9) {
  namespace vd = verify_detail;
  int failures = 0;
  double worst = 0;
  for (int trial = 0; trial < cases; ++trial) {
    const int K = 1 + trial % 3;
    const int T = 1 + (trial / 3) % 4;
    vd::HashScorer sc(K, 5000 + static_cast<std::uint64_t>(trial));
    DecodeConfig cfg;
    cfg.max_expansion = 2;
    cfg.max_hyps = 100000;
    cfg.max_wave = 100000;
    cfg.merge = MergeMode::Max;
    const auto hyps = beam_search(sc, T, cfg);
    std::map<std::vector<int>, double> best;
    std::vector<int> labels;
    vd::exhaustive_best(sc, T, cfg.max_expansion, 1, 0, sc.initial_state(), labels,
                        0.0, best);
    const auto top = std::max_element(
        best.begin(), best.end(),
        [](const auto& a, const auto& b) { return a.second < b.second; });
    if (hyps.empty() || hyps[0].labels != top->first) {
      ++failures;
      continue;
    }
    worst = std::max(worst, std::abs(hyps[0].score - top->second));
  }
  return {"decoder exactness vs exhaustive search", failures == 0 && worst <= tol,
          failures ? std::to_string(failures) + " argmax mismatches"
                   : "worst " + vd::fmt(worst)};
}

inline std::vector<CheckResult> run_verification() {
  return {check_loss_oracle(), check_loss_algebra(), check_lattice_gradients(),
          check_model_gradients(), check_decoder_exactness()};
}

}  // namespace nert
