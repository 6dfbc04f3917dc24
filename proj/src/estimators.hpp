#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "survival_models.hpp"

namespace sace {

enum class EstimatorKind { kSsw, kPsw };
enum class WhichEstimators { kSsw, kPsw, kBoth };
enum class VarianceMethod { kNone, kSandwich, kBootstrap };

inline const char* estimator_name(EstimatorKind e) {
  return e == EstimatorKind::kSsw ? "ssw" : "psw";
}

struct SaceEstimate {
  double tau = 0.0;  // stored as mu1 - mu0, never recomputed
  double mu1 = 0.0;
  double mu0 = 0.0;
  EstimatorKind estimator = EstimatorKind::kSsw;
  ModelKind model_kind = ModelKind::kConditional;
  std::optional<double> variance;
  std::optional<std::pair<double, double>> ci95;
  std::optional<VarianceMethod> variance_method;
  bool df_corrected = false;
  // sandwich diagnostics
  std::optional<double> df_factor;
  std::optional<double> condition_number;
  // bootstrap diagnostics
  std::optional<int> boot_failed;
};

// Survival-score weighting (assumption Set 1): observed survivors in arm a
// weighted by their predicted survival under the other arm.
SaceEstimate estimate_ssw(const CrtDataset& data, const FittedSurvivalModel& model);
SaceEstimate estimate_ssw(const std::vector<ClusterWork>& work,
                          const FittedSurvivalModel& model);

// Principal-score weighting (assumption Set 2): mu(0) is the plain control
// survivor mean; treated survivors carry the ratio weight p0/p1.
SaceEstimate estimate_psw(const CrtDataset& data, const FittedSurvivalModel& model);
SaceEstimate estimate_psw(const std::vector<ClusterWork>& work,
                          const FittedSurvivalModel& model);

struct BootstrapSettings {
  int replicates = 250;
  std::uint64_t seed = 0;
  int threads = 1;
};

struct VarianceConfig {
  VarianceMethod method = VarianceMethod::kSandwich;
  bool df_correct = true;
  BootstrapSettings bootstrap;
};

// Orchestration: point estimates for the requested estimators, then the
// configured variance/CI. The survival weights are computed once and shared
// between the point estimate and the variance assembly.
std::vector<SaceEstimate> estimate(const CrtDataset& data, const FittedSurvivalModel& model,
                                   WhichEstimators which, const VarianceConfig& cfg);

}  // namespace sace
