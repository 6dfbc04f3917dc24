#include "variance.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "math_utils.hpp"

namespace sace {

namespace {

// counterfactual survival probability with the plugged-in intercept
inline double prob(const Eigen::MatrixXd& D, int j, const Eigen::VectorXd& beta, double bhat) {
  return expit(clamp_linear_predictor(D.row(j).dot(beta) + bhat));
}

void check_theta(const ClusterWork& c, const ThetaVector& theta) {
  if (c.D.cols() != theta.beta.size()) {
    throw ConfigError("estimating function: theta dimension does not match design");
  }
  if (theta.sigma2_b && !(*theta.sigma2_b > 0.0)) {
    throw ConfigError("estimating function: sigma2_b must be positive when present");
  }
}

// score rows shared by both estimators
void fill_score_rows(const ClusterWork& c, const ThetaVector& theta, const GhRule& rule,
                     Eigen::VectorXd& m) {
  const int p = theta.p();
  if (theta.sigma2_b) {
    const double v = *theta.sigma2_b;
    const ScoreIntegrals si = score_integrals(c.D, c.S, theta.beta, v, rule);
    m.head(p) = c.D.transpose() * c.S - si.i4 / si.i1;
    m[p] = -0.5 / v + 0.5 * (si.i2 / si.i1) / (v * v);
  } else {
    const Eigen::VectorXd eta = c.D * theta.beta;
    m.head(p).setZero();
    for (int j = 0; j < eta.size(); ++j) {
      m.head(p) += c.D.row(j).transpose() * (c.S[j] - expit(eta[j]));
    }
  }
}

}  // namespace

Eigen::VectorXd ThetaVector::stacked() const {
  Eigen::VectorXd out(dim());
  out.head(p()) = beta;
  if (sigma2_b) out[p()] = *sigma2_b;
  out[mu1_index()] = mu1;
  out[mu0_index()] = mu0;
  return out;
}

Eigen::VectorXd ThetaVector::contrast() const {
  Eigen::VectorXd k = Eigen::VectorXd::Zero(dim());
  k[mu1_index()] = 1.0;
  k[mu0_index()] = -1.0;
  return k;
}

ThetaVector ThetaVector::from_fit(const FittedSurvivalModel& model, double mu1, double mu0) {
  ThetaVector theta;
  theta.beta = model.beta;
  if (model.kind == ModelKind::kConditional && !model.boundary && model.sigma2_b > 0.0) {
    theta.sigma2_b = model.sigma2_b;
  }
  theta.mu1 = mu1;
  theta.mu0 = mu0;
  return theta;
}

Eigen::VectorXd m_ssw(const ClusterWork& c, const ThetaVector& theta, const GhRule& rule,
                      double bhat) {
  check_theta(c, theta);
  Eigen::VectorXd m(theta.dim());
  fill_score_rows(c, theta, rule, m);
  const double A = c.treatment;
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (int j = 0; j < c.S.size(); ++j) {
    if (c.S[j] == 0.0) continue;  // S factor zeroes the row
    const double p0 = prob(c.D0, j, theta.beta, bhat);
    const double p1 = prob(c.D1, j, theta.beta, bhat);
    num1 += c.Y[j] * A * p0;
    den1 += A * p0;
    num0 += c.Y[j] * (1.0 - A) * p1;
    den0 += (1.0 - A) * p1;
  }
  m[theta.mu1_index()] = num1 - theta.mu1 * den1;
  m[theta.mu0_index()] = num0 - theta.mu0 * den0;
  return m;
}

Eigen::VectorXd m_psw(const ClusterWork& c, const ThetaVector& theta, const GhRule& rule,
                      double bhat) {
  check_theta(c, theta);
  Eigen::VectorXd m(theta.dim());
  fill_score_rows(c, theta, rule, m);
  const double A = c.treatment;
  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (int j = 0; j < c.S.size(); ++j) {
    if (c.S[j] == 0.0) continue;
    const double p1 = prob(c.D1, j, theta.beta, bhat);
    if (p1 <= 0.0) {
      throw EstimationError("positivity violated: p1 = 0 for a treated survivor in cluster '" +
                            c.id + "'");
    }
    const double ratio = prob(c.D0, j, theta.beta, bhat) / p1;
    num1 += c.Y[j] * A * ratio;
    den1 += A * ratio;
    num0 += c.Y[j] * (1.0 - A);
    den0 += (1.0 - A);
  }
  m[theta.mu1_index()] = num1 - theta.mu1 * den1;
  m[theta.mu0_index()] = num0 - theta.mu0 * den0;
  return m;
}

Eigen::MatrixXd outer_matrix(const std::vector<ClusterWork>& work, const ThetaVector& theta,
                             EstimatorKind estimator, const GhRule& rule,
                             const std::vector<double>& bhat) {
  const int p = theta.p();
  const int dim = theta.dim();
  const int r1 = theta.mu1_index();
  const int r0 = theta.mu0_index();
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(dim, dim);

  for (std::size_t i = 0; i < work.size(); ++i) {
    const ClusterWork& c = work[i];
    const double b = bhat.empty() ? 0.0 : bhat[i];
    const double A = c.treatment;

    // likelihood blocks
    if (theta.sigma2_b) {
      const double v = *theta.sigma2_b;
      IntegralSet I;
      try {
        I = cluster_integrals(c.D, c.S, theta.beta, v, rule, b);
      } catch (const IntegrationError& e) {
        throw VarianceError("integration failed in outer matrix for cluster '" + c.id +
                            "': " + e.what());
      }
      const Eigen::VectorXd r4 = I.r4();
      const double r2 = I.r2();
      // d score_beta / d beta': (I7 - I6)/I1 - (I4/I1)(I4/I1)'
      B.topLeftCorner(p, p) += (I.r7() - I.r6()) - r4 * r4.transpose();
      // d score_beta / d sigma2
      const Eigen::VectorXd b12 = -(0.5 / (v * v)) * (I.r5() - r4 * r2);
      B.block(0, p, p, 1) += b12;
      B.block(p, 0, 1, p) += b12.transpose();
      // d score_sigma2 / d sigma2
      B(p, p) += 0.5 / (v * v) - r2 / (v * v * v) +
                 (0.25 / (v * v * v * v)) * (I.r3() - r2 * r2);
    } else {
      for (int j = 0; j < c.S.size(); ++j) {
        const double w = expit(c.D.row(j).dot(theta.beta));
        B.topLeftCorner(p, p).noalias() -=
            (w * (1.0 - w)) * (c.D.row(j).transpose() * c.D.row(j));
      }
    }

    // mu rows; the plug-in b is held fixed
    for (int j = 0; j < c.S.size(); ++j) {
      if (c.S[j] == 0.0) continue;
      const double p0 = prob(c.D0, j, theta.beta, b);
      const double p1 = prob(c.D1, j, theta.beta, b);
      if (estimator == EstimatorKind::kSsw) {
        B.block(r1, 0, 1, p) +=
            (A * (c.Y[j] - theta.mu1) * p0 * (1.0 - p0)) * c.D0.row(j);
        B(r1, r1) -= A * p0;
        B.block(r0, 0, 1, p) +=
            ((1.0 - A) * (c.Y[j] - theta.mu0) * p1 * (1.0 - p1)) * c.D1.row(j);
        B(r0, r0) -= (1.0 - A) * p1;
      } else {
        const double ratio = p0 / p1;
        B.block(r1, 0, 1, p) += (A * (c.Y[j] - theta.mu1) * ratio) *
                                ((1.0 - p0) * c.D0.row(j) - (1.0 - p1) * c.D1.row(j));
        B(r1, r1) -= A * ratio;
        B(r0, r0) -= (1.0 - A);
      }
    }
  }
  return B;
}

SandwichParts sandwich(const std::vector<ClusterWork>& work, const ThetaVector& theta,
                       EstimatorKind estimator, ModelKind model_kind, const GhRule& rule,
                       const std::vector<double>& bhat, bool df_correct) {
  const int dim = theta.dim();
  const std::size_t n_c = work.size();

  SandwichParts parts;
  parts.per_cluster_m.reserve(n_c);
  parts.M = Eigen::MatrixXd::Zero(dim, dim);
  for (std::size_t i = 0; i < n_c; ++i) {
    const double b = bhat.empty() ? 0.0 : bhat[i];
    Eigen::VectorXd m;
    try {
      m = (estimator == EstimatorKind::kSsw) ? m_ssw(work[i], theta, rule, b)
                                             : m_psw(work[i], theta, rule, b);
    } catch (const IntegrationError& e) {
      throw VarianceError("integration failed in estimating function for cluster '" +
                          work[i].id + "': " + e.what());
    }
    parts.M.noalias() += m * m.transpose();
    parts.per_cluster_m.push_back(std::move(m));
  }

  parts.B = outer_matrix(work, theta, estimator, rule, bhat);
  for (int r = 0; r < dim; ++r) {
    for (int col = 0; col < dim; ++col) {
      if (!std::isfinite(parts.B(r, col))) {
        throw VarianceError("non-finite entry in outer matrix at (" + std::to_string(r) + "," +
                            std::to_string(col) + ")");
      }
    }
  }

  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(parts.B);
  const double smax = svd.singularValues()(0);
  const double smin = svd.singularValues()(dim - 1);
  parts.condition_number = (smin > 0.0) ? smax / smin : std::numeric_limits<double>::infinity();
  if (!(parts.condition_number < 1e12)) {
    std::ostringstream msg;
    msg << "outer matrix is numerically singular (condition number "
        << parts.condition_number << ")";
    throw VarianceError(msg.str());
  }

  const Eigen::PartialPivLU<Eigen::MatrixXd> lu(parts.B);
  Eigen::MatrixXd t = lu.solve(parts.M);
  parts.V = lu.solve(t.transpose()).transpose();

  const Eigen::VectorXd k = theta.contrast();
  parts.var_tau = k.dot(parts.V * k);

  const int n_params = theta.p() + 2 + (model_kind == ModelKind::kConditional ? 1 : 0);
  if (df_correct) {
    if (static_cast<int>(n_c) <= n_params) {
      throw VarianceError("degrees-of-freedom correction undefined: n_c = " +
                          std::to_string(n_c) + " <= #params = " + std::to_string(n_params));
    }
    parts.df_factor = static_cast<double>(n_c) / (static_cast<double>(n_c) - n_params);
    parts.var_tau *= parts.df_factor;
  }
  return parts;
}

SandwichParts sandwich(const CrtDataset& data, const FittedSurvivalModel& model,
                       EstimatorKind estimator, double mu1, double mu0, bool df_correct) {
  const std::vector<ClusterWork> work = build_working(data, model.design);
  const ThetaVector theta = ThetaVector::from_fit(model, mu1, mu0);
  const GhRule rule = gh_nodes(model.quad_order);
  return sandwich(work, theta, estimator, model.kind, rule, model.cluster_modes, df_correct);
}

}  // namespace sace
