#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "quadrature.hpp"

namespace sace {

enum class ModelKind { kConditional, kMarginal };

inline const char* model_kind_name(ModelKind k) {
  return k == ModelKind::kConditional ? "glmm" : "glm";
}

// Flattened per-cluster working set shared by fitting, estimation and
// variance assembly. D is the observed design, D0/D1 the counterfactual
// designs with the treatment column forced to 0/1. Y is zero-filled where
// the outcome is truncated; the S factor removes those rows from every sum.
struct ClusterWork {
  std::string id;
  double treatment = 0.0;
  Eigen::MatrixXd D, D0, D1;
  Eigen::VectorXd S, Y;
};

std::vector<ClusterWork> build_working(const CrtDataset& data, const DesignSpec& spec);

struct FitOptions {
  int max_iter = 200;
  double tol = 1e-7;  // inf-norm of the score at convergence
  // warm start (beta, sigma2_b) for bootstrap refits
  std::optional<std::pair<Eigen::VectorXd, double>> warm_start;
};

struct FittedSurvivalModel {
  ModelKind kind = ModelKind::kMarginal;
  DesignSpec design;
  Eigen::VectorXd beta;
  double sigma2_b = 0.0;  // fixed 0 for the marginal kind
  // posterior mode/scale of the random intercept per cluster; present iff
  // kind == conditional and sigma2_b > 0
  std::vector<double> cluster_modes;
  std::vector<double> cluster_scales;
  double loglik = 0.0;
  bool converged = false;
  bool boundary = false;  // sigma2_b hit the 0 boundary during GLMM fitting
  int iterations = 0;
  int quad_order = 25;
};

// Marginal log-likelihood of the random-intercept logistic model, the exact
// normal-kernel integral evaluated by adaptive quadrature per cluster.
double loglik_glmm(const CrtDataset& data, const DesignSpec& spec, const Eigen::VectorXd& beta,
                   double sigma2_b, const GhRule& rule);
double loglik_glmm(const std::vector<ClusterWork>& work, const Eigen::VectorXd& beta,
                   double sigma2_b, const GhRule& rule);

// Analytic score, length p+1: d l / d beta stacked over d l / d sigma2_b.
Eigen::VectorXd score_glmm(const CrtDataset& data, const DesignSpec& spec,
                           const Eigen::VectorXd& beta, double sigma2_b, const GhRule& rule);
Eigen::VectorXd score_glmm(const std::vector<ClusterWork>& work, const Eigen::VectorXd& beta,
                           double sigma2_b, const GhRule& rule);

// Quasi-Newton maximization over (beta, log sigma_b). Boundary handling: a
// variance estimate below 1e-6 collapses to the marginal fit with
// boundary=true. Separation is detected by a diverging coefficient norm.
FittedSurvivalModel fit_glmm(const CrtDataset& data, const DesignSpec& spec, const GhRule& rule,
                             const FitOptions& opts = {});

// Plain logistic regression by iteratively reweighted least squares.
FittedSurvivalModel fit_glm(const CrtDataset& data, const DesignSpec& spec,
                            const FitOptions& opts = {});

// p-hat^a_ij = expit(D_ij(a)'beta + b-hat_i); b-hat_i = 0 for the marginal
// kind and for boundary fits. Returned per cluster, rows in input order,
// values strictly inside (0,1).
std::vector<Eigen::VectorXd> predict_survival(const FittedSurvivalModel& model,
                                              const CrtDataset& data, const DesignSpec& spec,
                                              int a);
std::vector<Eigen::VectorXd> predict_survival(const FittedSurvivalModel& model,
                                              const std::vector<ClusterWork>& work, int a);

}  // namespace sace
