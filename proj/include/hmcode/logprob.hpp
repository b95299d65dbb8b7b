#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace hmcode {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(exp(a) + exp(b)), safe against -inf arguments.
inline double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = a > b ? a : b;
  const double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

inline double log_sum_exp(std::span<const double> vals) {
  double hi = kNegInf;
  for (double v : vals) hi = std::max(hi, v);
  if (hi == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double v : vals)
    if (v != kNegInf) sum += std::exp(v - hi);
  return hi + std::log(sum);
}

// Shannon entropy in bits of a normalized distribution.
inline double entropy_bits(std::span<const double> p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log2(v);
  return h;
}

}  // namespace hmcode
