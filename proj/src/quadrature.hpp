#pragma once

#include <Eigen/Dense>
#include <functional>

#include "errors.hpp"

namespace sace {

// Physicists' Gauss-Hermite rule: nodes are the roots of H_n and the weights
// integrate against exp(-x^2), so sum(weights) = sqrt(pi). Nodes are stored
// ascending and are exactly antisymmetric (mirrored in construction).
struct GhRule {
  int order = 0;
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
};

GhRule gh_nodes(int order);  // 1 <= order <= 100

// Recentering for adaptive quadrature: the integrand's mode and
// scale = (-d^2 log h/dt^2 at the mode)^(-1/2).
struct AdaptiveCenter {
  double mode = 0.0;
  double scale = 1.0;
};

// Scalar integrand accessed on the log scale. dlog / d2log are optional
// analytic derivatives of log h; when absent the mode is located by golden
// section on log_value and the curvature by a central finite difference with
// step 1e-5 * (1 + |mode|).
struct LogIntegrand {
  std::function<double(double)> log_value;
  std::function<double(double)> dlog;
  std::function<double(double)> d2log;
};

// Locates the mode to |dt| <= 1e-8 inside [lo, hi]. Throws IntegrationError
// if no interior maximum exists in the bracket or the curvature at the
// candidate is not negative ("integrand not unimodal").
AdaptiveCenter find_center(const LogIntegrand& h, double lo, double hi);

// The recentered rule: integral(h) ~= sqrt(2) * scale *
// sum_i w_i * exp(x_i^2) * h(mode + sqrt(2) * scale * x_i).
// Each term is accumulated on the log scale and re-exponentiated, so very
// small or very large h never overflow the partial products. NaN from h is
// reported as an IntegrationError naming the offending node.
double adaptive_integrate(const std::function<double(double)>& h, const GhRule& rule,
                          const AdaptiveCenter& center);

// Per-cluster integrals against the random-intercept kernel
//   g(b) = exp( sum_j [S_j * b - log(1 + exp(D_j'beta + b))] - b^2 / (2 sigma2_b) ).
// The seven stored quantities are, in order:
//   i1: g           i2: g b^2        i3: g b^4
//   i4: g * sum_j D_j w_j                       (w_j = expit(D_j'beta + b))
//   i5: g b^2 * sum_j D_j w_j
//   i6: g * sum_j D_j D_j' w_j (1 - w_j)
//   i7: g * (sum_j D_j w_j)(sum_j D_j w_j)'
// all divided by g(mode); log_gmax restores the absolute scale and every
// downstream ratio (i_k / i1) is unaffected by the normalization. All seven
// share one center: the mode and curvature of g itself.
struct IntegralSet {
  AdaptiveCenter center;
  double log_gmax = 0.0;
  double i1 = 0.0, i2 = 0.0, i3 = 0.0;
  Eigen::VectorXd i4, i5;
  Eigen::MatrixXd i6, i7;

  double value1() const;  // absolute integral of g
  double r2() const { return i2 / i1; }
  double r3() const { return i3 / i1; }
  Eigen::VectorXd r4() const { return i4 / i1; }
  Eigen::VectorXd r5() const { return i5 / i1; }
  Eigen::MatrixXd r6() const { return i6 / i1; }
  Eigen::MatrixXd r7() const { return i7 / i1; }
};

IntegralSet cluster_integrals(const Eigen::MatrixXd& D, const Eigen::VectorXd& S,
                              const Eigen::VectorXd& beta, double sigma2_b,
                              const GhRule& rule, double warm_mode = 0.0);

// Fast subset for likelihood/score evaluations inside the fitting loop:
// only i1, i2, i4 (and the shared center) are accumulated.
struct ScoreIntegrals {
  AdaptiveCenter center;
  double log_gmax = 0.0;
  double i1 = 0.0, i2 = 0.0;
  Eigen::VectorXd i4;
};

ScoreIntegrals score_integrals(const Eigen::MatrixXd& D, const Eigen::VectorXd& S,
                               const Eigen::VectorXd& beta, double sigma2_b,
                               const GhRule& rule, double warm_mode = 0.0);

}  // namespace sace
