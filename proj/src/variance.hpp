#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "estimators.hpp"
#include "survival_models.hpp"

namespace sace {

// Stacked parameter theta = (beta, sigma2_b, mu(1), mu(0)). sigma2_b is
// absent for the marginal model and for boundary GLMM fits, in which case
// the marginal estimating equations apply and the dimension drops to p+2.
struct ThetaVector {
  Eigen::VectorXd beta;
  std::optional<double> sigma2_b;
  double mu1 = 0.0;
  double mu0 = 0.0;

  int p() const { return static_cast<int>(beta.size()); }
  int dim() const { return p() + (sigma2_b ? 3 : 2); }
  int mu1_index() const { return p() + (sigma2_b ? 1 : 0); }
  int mu0_index() const { return mu1_index() + 1; }

  Eigen::VectorXd stacked() const;
  // contrast k with k'theta = mu(1) - mu(0)
  Eigen::VectorXd contrast() const;

  static ThetaVector from_fit(const FittedSurvivalModel& model, double mu1, double mu0);
};

// Per-cluster estimating function for the survival-score weighting estimator:
// the GLMM (or marginal logistic) score rows stacked over the two mu rows.
// bhat is the plugged-in random-intercept value for the mu rows (0 for the
// marginal equations).
Eigen::VectorXd m_ssw(const ClusterWork& cluster, const ThetaVector& theta, const GhRule& rule,
                      double bhat);
Eigen::VectorXd m_psw(const ClusterWork& cluster, const ThetaVector& theta, const GhRule& rule,
                      double bhat);

// Sum over clusters of the analytic Jacobian d m_i / d theta'. Zero blocks
// are never touched. The mu-row blocks hold the plug-in bhat fixed, matching
// the definition of the estimating functions above, so the matrix agrees
// with a numerical Jacobian of sum_i m_i at theta.
Eigen::MatrixXd outer_matrix(const std::vector<ClusterWork>& work, const ThetaVector& theta,
                             EstimatorKind estimator, const GhRule& rule,
                             const std::vector<double>& bhat);

struct SandwichParts {
  Eigen::MatrixXd B;  // outer: sum_i d m_i / d theta'
  Eigen::MatrixXd M;  // middle: sum_i m_i m_i'
  Eigen::MatrixXd V;  // B^-1 M B^-T
  std::vector<Eigen::VectorXd> per_cluster_m;
  double var_tau = 0.0;  // k'Vk, df-corrected when requested
  double df_factor = 1.0;
  double condition_number = 0.0;
};

// Cluster-robust sandwich. The df correction multiplies var_tau by
// n_c / (n_c - #params) with #params = p+3 for the conditional model kind
// (boundary fits included: the variance parameter is still penalized) and
// p+2 for the marginal kind.
SandwichParts sandwich(const std::vector<ClusterWork>& work, const ThetaVector& theta,
                       EstimatorKind estimator, ModelKind model_kind, const GhRule& rule,
                       const std::vector<double>& bhat, bool df_correct);

SandwichParts sandwich(const CrtDataset& data, const FittedSurvivalModel& model,
                       EstimatorKind estimator, double mu1, double mu0, bool df_correct);

}  // namespace sace
