#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace nert {

// Log-domain zero. All lattice arithmetic happens in log space with this
// sentinel; NaN is never a legal value.
inline constexpr double kLogZero = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)) in the max-shift form.
inline double log_add(double a, double b) {
  if (a == kLogZero) return b;
  if (b == kLogZero) return a;
  const double hi = std::max(a, b);
  const double lo = std::min(a, b);
  return hi + std::log1p(std::exp(lo - hi));
}

template <typename It>
double log_sum(It first, It last) {
  double acc = kLogZero;
  for (; first != last; ++first) acc = log_add(acc, *first);
  return acc;
}

inline bool is_log_prob(double x) {
  // finite or -inf, never NaN or +inf
  return !std::isnan(x) && x != std::numeric_limits<double>::infinity();
}

}  // namespace nert
