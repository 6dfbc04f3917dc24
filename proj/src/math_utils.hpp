#pragma once

#include <cmath>

namespace sace {

inline double expit(double x) {
  if (x >= 0.0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + e^x) without overflow for large |x|.
inline double log1pexp(double x) {
  if (x > 33.3) return x;
  if (x > -37.0) return std::log1p(std::exp(x));
  return std::exp(x);
}

inline double logit(double p) { return std::log(p) - std::log1p(-p); }

// Linear predictors are clamped so expit stays strictly inside (0,1) in
// double precision (expit saturates to exactly 0/1 beyond ~|36.7|).
inline double clamp_linear_predictor(double lp) {
  if (lp > 36.0) return 36.0;
  if (lp < -36.0) return -36.0;
  return lp;
}

inline constexpr double kZ975 = 1.959964;  // 97.5% standard normal quantile

}  // namespace sace
