#pragma once

// Shared test-only oracles: brute-force path enumeration, mask filtering,
// and random lattice generation. Kept independent of the forward/backward
// implementation they cross-check.

#include <random>
#include <vector>

#include "nert/lattice.hpp"

namespace nert::testing {

// All complete paths: T blanks, U labels, labels only while t < T (the final
// move is necessarily the blank consuming the last frame).
inline void enumerate_paths_rec(int t, int T, int u, int U,
                                std::vector<Move>& cur,
                                std::vector<AlignmentPath>& out) {
  if (t == T && u == U) {
    out.push_back(AlignmentPath{cur});
    return;
  }
  if (t < T && u < U) {
    cur.push_back(Move::Label);
    enumerate_paths_rec(t, T, u + 1, U, cur, out);
    cur.pop_back();
  }
  if (t < T) {
    cur.push_back(Move::Blank);
    enumerate_paths_rec(t + 1, T, u, U, cur, out);
    cur.pop_back();
  }
}

inline std::vector<AlignmentPath> enumerate_paths(int T, int U) {
  std::vector<AlignmentPath> out;
  std::vector<Move> cur;
  enumerate_paths_rec(0, T, 0, U, cur, out);
  return out;
}

// Does every step of the path stay on mask-admissible cells?
inline bool path_in_mask(const AlignmentPath& p, const ConstraintMask& m) {
  int t = 0, u = 0;
  for (Move mv : p.moves) {
    if (mv == Move::Blank) {
      if (!m.blank(t, u)) return false;
      ++t;
    } else {
      if (!m.label(t, u)) return false;
      ++u;
    }
  }
  return true;
}

// Independent total: log-sum-exp of per-path sums over enumerated paths.
inline double brute_force_total(const Lattice& lat,
                                const ConstraintMask* mask = nullptr) {
  double total = kLogZero;
  for (const AlignmentPath& p : enumerate_paths(lat.frames(), lat.labels())) {
    if (mask && !path_in_mask(p, *mask)) continue;
    int t = 0, u = 0;
    double sum = 0.0;
    for (Move mv : p.moves) {
      if (mv == Move::Blank) {
        sum += lat.blank(t, u);
        ++t;
      } else {
        sum += lat.label(t, u);
        ++u;
      }
    }
    total = log_add(total, sum);
  }
  return total;
}

// Random lattice with finite entries; when `proper` is set the label/blank
// pair at each cell comes from a genuine softmax (plus head room for
// non-target labels).
inline Lattice random_lattice(std::mt19937_64& rng, int T, int U,
                              bool proper = false) {
  Lattice lat;
  lat.label.resize(T, U);
  lat.blank.resize(T, U + 1);
  if (proper) {
    std::uniform_real_distribution<double> unif(0.05, 1.0);
    for (int t = 0; t < T; ++t)
      for (int u = 0; u <= U; ++u) {
        const double a = unif(rng), b = unif(rng), c = unif(rng);
        const double z = a + b + c;
        lat.blank(t, u) = std::log(a / z);
        if (u < U) lat.label(t, u) = std::log(b / z);
      }
  } else {
    std::uniform_real_distribution<double> lp(-3.0, 0.0);
    for (int t = 0; t < T; ++t)
      for (int u = 0; u <= U; ++u) {
        lat.blank(t, u) = lp(rng);
        if (u < U) lat.label(t, u) = lp(rng);
      }
  }
  return lat;
}

// Uniformly random valid path for given (T, U).
inline AlignmentPath random_path(std::mt19937_64& rng, int T, int U) {
  auto all = enumerate_paths(T, U);
  std::uniform_int_distribution<size_t> pick(0, all.size() - 1);
  return all[pick(rng)];
}

}  // namespace nert::testing
