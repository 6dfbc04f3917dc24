#include "quadrature.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <vector>

#include "math_utils.hpp"

namespace sace {

namespace {

constexpr double kPiQuarterRoot = 0.7511255444649425;  // pi^(-1/4)

// Newton iteration on the orthonormal Hermite recurrence. Initial guesses
// follow the usual asymptotic seeds; each root refines in a handful of steps.
void hermite_roots(int n, Eigen::VectorXd& x, Eigen::VectorXd& w) {
  const double eps = 1.0e-14;
  const int max_newton = 200;
  const int half = (n + 1) / 2;
  x.resize(n);
  w.resize(n);
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * x[n - 1];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * x[n - 2];
    } else {
      z = 2.0 * z - x[n - i + 1];
    }
    double pp = 0.0;
    bool done = false;
    for (int it = 0; it < max_newton; ++it) {
      double p1 = kPiQuarterRoot;
      double p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= eps) {
        done = true;
        break;
      }
    }
    if (!done) throw ConfigError("Gauss-Hermite root search did not converge");
    // store descending half, mirror the rest; exact antisymmetry by design
    x[n - 1 - i] = z;
    x[i] = -z;
    w[n - 1 - i] = 2.0 / (pp * pp);
    w[i] = w[n - 1 - i];
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

struct ModeResult {
  double mode = 0.0;
  double curvature = 0.0;  // d2 log g / db2 at the mode (< 0)
};

// Mode of the log-concave kernel g: solve T - sum_j expit(eta_j + b) - b/v = 0
// by Newton with a bisection safeguard inside [-8 sqrt(v), 8 sqrt(v)].
ModeResult kernel_mode(const Eigen::VectorXd& eta, double survivors, double v,
                       double warm_mode) {
  const int n = static_cast<int>(eta.size());
  const double bound = 8.0 * std::sqrt(v);
  auto deriv = [&](double b, double& d1, double& d2) {
    double sw = 0.0, sq = 0.0;
    for (int j = 0; j < n; ++j) {
      const double wj = expit(eta[j] + b);
      sw += wj;
      sq += wj * (1.0 - wj);
    }
    d1 = survivors - sw - b / v;
    d2 = -sq - 1.0 / v;
  };
  double d1, d2;
  double lo = -bound, hi = bound;
  deriv(lo, d1, d2);
  if (!(d1 > 0.0)) {
    throw IntegrationError("integrand not unimodal: no interior maximum in mode bracket");
  }
  deriv(hi, d1, d2);
  if (!(d1 < 0.0)) {
    throw IntegrationError("integrand not unimodal: no interior maximum in mode bracket");
  }
  double b = (warm_mode > lo && warm_mode < hi) ? warm_mode : 0.0;
  for (int it = 0; it < 100; ++it) {
    deriv(b, d1, d2);
    if (d1 > 0.0) {
      lo = b;
    } else {
      hi = b;
    }
    double step = -d1 / d2;
    double bn = b + step;
    if (!(bn > lo && bn < hi)) bn = 0.5 * (lo + hi);
    const double delta = std::abs(bn - b);
    b = bn;
    if (delta <= 1e-12 * (1.0 + std::abs(b))) break;
  }
  deriv(b, d1, d2);
  if (!(d2 < 0.0) || !std::isfinite(d2)) {
    throw IntegrationError("integrand not unimodal: non-negative curvature at mode");
  }
  return {b, d2};
}

}  // namespace

GhRule gh_nodes(int order) {
  if (order < 1 || order > 100) {
    throw ConfigError("quadrature order must be in [1, 100], got " + std::to_string(order));
  }
  GhRule rule;
  rule.order = order;
  if (order == 1) {
    rule.nodes = Eigen::VectorXd::Zero(1);
    rule.weights = Eigen::VectorXd::Constant(1, std::sqrt(M_PI));
    return rule;
  }
  hermite_roots(order, rule.nodes, rule.weights);
  return rule;
}

AdaptiveCenter find_center(const LogIntegrand& h, double lo, double hi) {
  if (!h.log_value) throw ConfigError("find_center: log_value is required");
  if (!(lo < hi)) throw ConfigError("find_center: invalid bracket");

  double mode;
  if (h.dlog) {
    double dlo = h.dlog(lo), dhi = h.dlog(hi);
    if (!(dlo > 0.0) || !(dhi < 0.0)) {
      throw IntegrationError("integrand not unimodal: no interior maximum in bracket");
    }
    double a = lo, b = hi, t = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
      const double d = h.dlog(t);
      if (d > 0.0) {
        a = t;
      } else {
        b = t;
      }
      double tn;
      if (h.d2log) {
        const double dd = h.d2log(t);
        tn = (dd < 0.0) ? t - d / dd : 0.5 * (a + b);
      } else {
        tn = 0.5 * (a + b);
      }
      if (!(tn > a && tn < b)) tn = 0.5 * (a + b);
      const double delta = std::abs(tn - t);
      t = tn;
      if (delta <= 1e-9 && (b - a) <= 1e-8) break;
    }
    mode = t;
  } else {
    // golden section on log h
    const double phi = 0.6180339887498949;
    double a = lo, b = hi;
    double c = b - phi * (b - a), d = a + phi * (b - a);
    double fc = h.log_value(c), fd = h.log_value(d);
    while (b - a > 1e-9) {
      if (fc > fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = h.log_value(c);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = h.log_value(d);
      }
    }
    mode = 0.5 * (a + b);
    if (mode - lo < 1e-7 || hi - mode < 1e-7) {
      throw IntegrationError("integrand not unimodal: maximum sits on the bracket boundary");
    }
  }

  double curvature;
  if (h.d2log) {
    curvature = h.d2log(mode);
  } else {
    const double step = 1e-5 * (1.0 + std::abs(mode));
    curvature = (h.log_value(mode + step) - 2.0 * h.log_value(mode) + h.log_value(mode - step)) /
                (step * step);
  }
  if (!(curvature < 0.0) || !std::isfinite(curvature)) {
    throw IntegrationError("integrand not unimodal: non-negative curvature at mode");
  }
  return {mode, 1.0 / std::sqrt(-curvature)};
}

double adaptive_integrate(const std::function<double(double)>& h, const GhRule& rule,
                          const AdaptiveCenter& center) {
  if (!(center.scale > 0.0) || !std::isfinite(center.scale) || !std::isfinite(center.mode)) {
    throw ConfigError("adaptive_integrate: invalid center");
  }
  const double stretch = std::sqrt(2.0) * center.scale;
  const int n = rule.order;
  std::vector<double> log_terms(n);
  std::vector<int> signs(n);
  double max_term = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < n; ++i) {
    const double t = center.mode + stretch * rule.nodes[i];
    const double hv = h(t);
    if (std::isnan(hv)) {
      std::ostringstream msg;
      msg << "integrand returned NaN at node " << i << " (t = " << t << ")";
      throw IntegrationError(msg.str());
    }
    if (hv == 0.0) {
      signs[i] = 0;
      log_terms[i] = -std::numeric_limits<double>::infinity();
      continue;
    }
    signs[i] = hv > 0.0 ? 1 : -1;
    log_terms[i] =
        std::log(rule.weights[i]) + rule.nodes[i] * rule.nodes[i] + std::log(std::abs(hv));
    if (log_terms[i] > max_term) max_term = log_terms[i];
  }
  if (!std::isfinite(max_term)) return 0.0;
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    if (signs[i] != 0) acc += signs[i] * std::exp(log_terms[i] - max_term);
  }
  return stretch * std::exp(max_term) * acc;
}

double IntegralSet::value1() const { return std::exp(log_gmax) * i1; }

namespace {

// Shared accumulation over nodes. `full` toggles the i3/i5/i6/i7 blocks that
// only the variance assembly needs.
template <bool full>
void accumulate_integrals(const Eigen::MatrixXd& D, const Eigen::VectorXd& S,
                          const Eigen::VectorXd& beta, double v, const GhRule& rule,
                          double warm_mode, AdaptiveCenter& center, double& log_gmax, double& i1,
                          double& i2, double& i3, Eigen::VectorXd& i4, Eigen::VectorXd& i5,
                          Eigen::MatrixXd& i6, Eigen::MatrixXd& i7) {
  const int n = static_cast<int>(D.rows());
  const int p = static_cast<int>(D.cols());
  const Eigen::VectorXd eta = D * beta;
  const double survivors = S.sum();

  const ModeResult m = kernel_mode(eta, survivors, v, warm_mode);
  center.mode = m.mode;
  center.scale = 1.0 / std::sqrt(-m.curvature);

  auto log_g = [&](double b) {
    double acc = survivors * b - b * b / (2.0 * v);
    for (int j = 0; j < n; ++j) acc -= log1pexp(eta[j] + b);
    return acc;
  };
  log_gmax = log_g(m.mode);

  i1 = i2 = i3 = 0.0;
  i4 = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd u(p);
  if constexpr (full) {
    i5 = Eigen::VectorXd::Zero(p);
    i6 = Eigen::MatrixXd::Zero(p, p);
    i7 = Eigen::MatrixXd::Zero(p, p);
  }
  const double stretch = std::sqrt(2.0) * center.scale;
  Eigen::MatrixXd q;
  if constexpr (full) q.resize(p, p);
  for (int k = 0; k < rule.order; ++k) {
    const double x = rule.nodes[k];
    const double b = center.mode + stretch * x;
    double lg = survivors * b - b * b / (2.0 * v);
    u.setZero();
    if constexpr (full) q.setZero();
    for (int j = 0; j < n; ++j) {
      const double e = eta[j] + b;
      lg -= log1pexp(e);
      const double wj = expit(e);
      u += D.row(j).transpose() * wj;
      if constexpr (full) {
        q.noalias() += (wj * (1.0 - wj)) * (D.row(j).transpose() * D.row(j));
      }
    }
    const double c = rule.weights[k] * std::exp(x * x + lg - log_gmax);
    const double b2 = b * b;
    i1 += c;
    i2 += c * b2;
    i4 += c * u;
    if constexpr (full) {
      i3 += c * b2 * b2;
      i5 += (c * b2) * u;
      i6 += c * q;
      i7.noalias() += c * (u * u.transpose());
    }
  }
  i1 *= stretch;
  i2 *= stretch;
  i4 *= stretch;
  if constexpr (full) {
    i3 *= stretch;
    i5 *= stretch;
    i6 *= stretch;
    i7 *= stretch;
  }
}

}  // namespace

IntegralSet cluster_integrals(const Eigen::MatrixXd& D, const Eigen::VectorXd& S,
                              const Eigen::VectorXd& beta, double sigma2_b, const GhRule& rule,
                              double warm_mode) {
  if (!(sigma2_b > 0.0)) throw ConfigError("cluster_integrals requires sigma2_b > 0");
  if (D.rows() != S.size() || D.cols() != beta.size()) {
    throw ConfigError("cluster_integrals: dimension mismatch between design, survival and beta");
  }
  IntegralSet out;
  accumulate_integrals<true>(D, S, beta, sigma2_b, rule, warm_mode, out.center, out.log_gmax,
                             out.i1, out.i2, out.i3, out.i4, out.i5, out.i6, out.i7);
  return out;
}

ScoreIntegrals score_integrals(const Eigen::MatrixXd& D, const Eigen::VectorXd& S,
                               const Eigen::VectorXd& beta, double sigma2_b, const GhRule& rule,
                               double warm_mode) {
  if (!(sigma2_b > 0.0)) throw ConfigError("score_integrals requires sigma2_b > 0");
  ScoreIntegrals out;
  double i3 = 0.0;
  Eigen::VectorXd i5;
  Eigen::MatrixXd i6, i7;
  accumulate_integrals<false>(D, S, beta, sigma2_b, rule, warm_mode, out.center, out.log_gmax,
                              out.i1, out.i2, i3, out.i4, i5, i6, i7);
  return out;
}

}  // namespace sace
