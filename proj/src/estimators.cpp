#include "estimators.hpp"

#include <cmath>

#include "math_utils.hpp"
#include "resampling.hpp"
#include "variance.hpp"

namespace sace {

namespace {

void require_converged(const FittedSurvivalModel& model) {
  if (!model.converged) throw ConfigError("estimation requires a converged survival model");
}

std::vector<Eigen::VectorXd> predict_arm(const FittedSurvivalModel& model,
                                         const std::vector<ClusterWork>& work, int a) {
  return predict_survival(model, work, a);
}

}  // namespace

SaceEstimate estimate_ssw(const std::vector<ClusterWork>& work,
                          const FittedSurvivalModel& model) {
  require_converged(model);
  const auto p0 = predict_arm(model, work, 0);
  const auto p1 = predict_arm(model, work, 1);

  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const ClusterWork& c = work[i];
    const double A = c.treatment;
    for (int j = 0; j < c.S.size(); ++j) {
      if (c.S[j] == 0.0) continue;
      num1 += c.Y[j] * A * p0[i][j];
      den1 += A * p0[i][j];
      num0 += c.Y[j] * (1.0 - A) * p1[i][j];
      den0 += (1.0 - A) * p1[i][j];
    }
  }
  if (den1 == 0.0) {
    throw EstimationError("SSW mu(1) undefined: no observed survivors in the treated arm");
  }
  if (den0 == 0.0) {
    throw EstimationError("SSW mu(0) undefined: no observed survivors in the control arm");
  }
  SaceEstimate est;
  est.estimator = EstimatorKind::kSsw;
  est.model_kind = model.kind;
  est.mu1 = num1 / den1;
  est.mu0 = num0 / den0;
  est.tau = est.mu1 - est.mu0;
  return est;
}

SaceEstimate estimate_psw(const std::vector<ClusterWork>& work,
                          const FittedSurvivalModel& model) {
  require_converged(model);
  const auto p0 = predict_arm(model, work, 0);
  const auto p1 = predict_arm(model, work, 1);

  double num1 = 0.0, den1 = 0.0, num0 = 0.0, den0 = 0.0;
  for (std::size_t i = 0; i < work.size(); ++i) {
    const ClusterWork& c = work[i];
    const double A = c.treatment;
    for (int j = 0; j < c.S.size(); ++j) {
      if (c.S[j] == 0.0) continue;
      if (A == 1.0 && p1[i][j] <= 0.0) {
        throw EstimationError("positivity violated: p1 = 0 for a treated survivor in cluster '" +
                              c.id + "'");
      }
      const double ratio = p0[i][j] / p1[i][j];
      num1 += c.Y[j] * A * ratio;
      den1 += A * ratio;
      num0 += c.Y[j] * (1.0 - A);
      den0 += (1.0 - A);
    }
  }
  if (den1 == 0.0) {
    throw EstimationError("PSW mu(1) undefined: no observed survivors in the treated arm");
  }
  if (den0 == 0.0) {
    throw EstimationError("PSW mu(0) undefined: no observed survivors in the control arm");
  }
  SaceEstimate est;
  est.estimator = EstimatorKind::kPsw;
  est.model_kind = model.kind;
  est.mu1 = num1 / den1;
  est.mu0 = num0 / den0;
  est.tau = est.mu1 - est.mu0;
  return est;
}

SaceEstimate estimate_ssw(const CrtDataset& data, const FittedSurvivalModel& model) {
  return estimate_ssw(build_working(data, model.design), model);
}

SaceEstimate estimate_psw(const CrtDataset& data, const FittedSurvivalModel& model) {
  return estimate_psw(build_working(data, model.design), model);
}

std::vector<SaceEstimate> estimate(const CrtDataset& data, const FittedSurvivalModel& model,
                                   WhichEstimators which, const VarianceConfig& cfg) {
  std::vector<EstimatorKind> kinds;
  if (which == WhichEstimators::kSsw || which == WhichEstimators::kBoth) {
    kinds.push_back(EstimatorKind::kSsw);
  }
  if (which == WhichEstimators::kPsw || which == WhichEstimators::kBoth) {
    kinds.push_back(EstimatorKind::kPsw);
  }

  const std::vector<ClusterWork> work = build_working(data, model.design);
  std::vector<SaceEstimate> estimates;
  for (EstimatorKind kind : kinds) {
    estimates.push_back(kind == EstimatorKind::kSsw ? estimate_ssw(work, model)
                                                    : estimate_psw(work, model));
  }

  if (cfg.method == VarianceMethod::kSandwich) {
    const GhRule rule = gh_nodes(model.quad_order);
    for (auto& est : estimates) {
      const ThetaVector theta = ThetaVector::from_fit(model, est.mu1, est.mu0);
      const SandwichParts parts = sandwich(work, theta, est.estimator, model.kind, rule,
                                           model.cluster_modes, cfg.df_correct);
      est.variance = parts.var_tau;
      est.variance_method = VarianceMethod::kSandwich;
      est.df_corrected = cfg.df_correct;
      est.df_factor = parts.df_factor;
      est.condition_number = parts.condition_number;
      const double half = kZ975 * std::sqrt(parts.var_tau);
      est.ci95 = std::make_pair(est.tau - half, est.tau + half);
    }
  } else if (cfg.method == VarianceMethod::kBootstrap) {
    FitOptions opts;
    BootstrapConfig bcfg;
    bcfg.replicates = cfg.bootstrap.replicates;
    bcfg.seed = cfg.bootstrap.seed;
    bcfg.threads = cfg.bootstrap.threads;
    const auto results =
        cluster_bootstrap(data, model.kind, model.design, kinds, opts, model.quad_order, bcfg);
    for (std::size_t i = 0; i < estimates.size(); ++i) {
      estimates[i].variance = results[i].variance;
      estimates[i].ci95 = results[i].ci95;
      estimates[i].variance_method = VarianceMethod::kBootstrap;
      estimates[i].df_corrected = false;
      estimates[i].boot_failed = results[i].n_failed;
    }
  }
  return estimates;
}

}  // namespace sace
