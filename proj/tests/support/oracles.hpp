// Test-only oracles, independent of the production quadrature/score paths:
// everything here evaluates the defining formulas directly on dense grids or
// by finite differences.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <vector>

namespace oracle {

// trapezoid rule on [lo, hi] with fixed step; integrands decay like a
// Gaussian so the rule is effectively spectrally accurate here
inline double trapezoid(const std::function<double(double)>& f, double lo = -12.0,
                        double hi = 12.0, double step = 1e-4) {
  const long n = std::lround((hi - lo) / step);
  double acc = 0.5 * (f(lo) + f(hi));
  for (long i = 1; i < n; ++i) acc += f(lo + step * i);
  return acc * step;
}

// the random-intercept kernel written out from its definition
inline double g_kernel(double b, const Eigen::MatrixXd& D, const Eigen::VectorXd& S,
                       const Eigen::VectorXd& beta, double sigma2) {
  double lg = -b * b / (2.0 * sigma2);
  for (int j = 0; j < S.size(); ++j) {
    const double eta = D.row(j).dot(beta) + b;
    // log(1+e^eta) = max(eta,0) + log1p(e^-|eta|)
    lg += S[j] * b - std::max(eta, 0.0) - std::log1p(std::exp(-std::abs(eta)));
  }
  return std::exp(lg);
}

inline double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// all seven integral forms on one grid pass
struct SevenIntegrals {
  double i1 = 0, i2 = 0, i3 = 0;
  Eigen::VectorXd i4, i5;
  Eigen::MatrixXd i6, i7;
};

inline SevenIntegrals seven_integrals(const Eigen::MatrixXd& D, const Eigen::VectorXd& S,
                                      const Eigen::VectorXd& beta, double sigma2,
                                      double lo = -12.0, double hi = 12.0, double step = 1e-4) {
  const int p = static_cast<int>(D.cols());
  SevenIntegrals out;
  out.i4 = Eigen::VectorXd::Zero(p);
  out.i5 = Eigen::VectorXd::Zero(p);
  out.i6 = Eigen::MatrixXd::Zero(p, p);
  out.i7 = Eigen::MatrixXd::Zero(p, p);
  const long n = std::lround((hi - lo) / step);
  for (long k = 0; k <= n; ++k) {
    const double b = lo + step * k;
    const double weight = (k == 0 || k == n) ? 0.5 : 1.0;
    const double g = g_kernel(b, D, S, beta, sigma2) * weight;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(p, p);
    for (int j = 0; j < S.size(); ++j) {
      const double w = expit(D.row(j).dot(beta) + b);
      u += D.row(j).transpose() * w;
      q += (w * (1.0 - w)) * (D.row(j).transpose() * D.row(j));
    }
    out.i1 += g;
    out.i2 += g * b * b;
    out.i3 += g * b * b * b * b;
    out.i4 += g * u;
    out.i5 += (g * b * b) * u;
    out.i6 += g * q;
    out.i7 += g * (u * u.transpose());
  }
  out.i1 *= step;
  out.i2 *= step;
  out.i3 *= step;
  out.i4 *= step;
  out.i5 *= step;
  out.i6 *= step;
  out.i7 *= step;
  return out;
}

// dense grid argmax with a three-point parabolic refinement
struct GridMax {
  double argmax = 0.0;
  double curvature = 0.0;  // second difference at the refined point
};

inline GridMax grid_argmax(const std::function<double(double)>& logf, double lo, double hi,
                           double step) {
  const long n = std::lround((hi - lo) / step);
  double best = -1e308;
  long best_i = 0;
  for (long i = 0; i <= n; ++i) {
    const double v = logf(lo + step * i);
    if (v > best) {
      best = v;
      best_i = i;
    }
  }
  GridMax out;
  if (best_i == 0 || best_i == n) {
    out.argmax = lo + step * best_i;
  } else {
    const double f0 = logf(lo + step * (best_i - 1));
    const double f1 = best;
    const double f2 = logf(lo + step * (best_i + 1));
    out.argmax = lo + step * best_i + 0.5 * step * (f0 - f2) / (f0 - 2.0 * f1 + f2);
  }
  const double h = 1e-4;
  out.curvature =
      (logf(out.argmax + h) - 2.0 * logf(out.argmax) + logf(out.argmax - h)) / (h * h);
  return out;
}

// central finite-difference gradient
inline Eigen::VectorXd fd_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                   const Eigen::VectorXd& x, double step = 1e-6) {
  Eigen::VectorXd g(x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    g[i] = (f(hi) - f(lo)) / (2.0 * step);
  }
  return g;
}

// central finite-difference Jacobian of a vector function
inline Eigen::MatrixXd fd_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
    double step = 1e-5) {
  const Eigen::VectorXd f0 = f(x);
  Eigen::MatrixXd J(f0.size(), x.size());
  for (int i = 0; i < x.size(); ++i) {
    Eigen::VectorXd hi = x, lo = x;
    hi[i] += step;
    lo[i] -= step;
    J.col(i) = (f(hi) - f(lo)) / (2.0 * step);
  }
  return J;
}

}  // namespace oracle
