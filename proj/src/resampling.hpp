#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "estimators.hpp"

namespace sace {

struct BootstrapConfig {
  int replicates = 250;
  std::uint64_t seed = 0;
  int threads = 1;  // replicates are independent; any thread count is bit-reproducible
};

struct BootstrapResult {
  EstimatorKind estimator = EstimatorKind::kSsw;
  double variance = 0.0;
  std::pair<double, double> ci95{0.0, 0.0};  // empirical 2.5 / 97.5 percentiles
  int n_replicates = 0;
  int n_failed = 0;
  std::map<std::string, int> failure_taxonomy;
  std::vector<double> replicate_taus;
};

// Non-parametric cluster bootstrap: each replicate resamples n_c whole
// clusters with replacement (original sizes kept), refits the survival model
// and recomputes tau. Replicates whose refit fails (separation, single-arm
// resample, non-convergence) are dropped and counted; more than 10% dropped
// is a hard error. All requested estimators share each replicate's refit.
std::vector<BootstrapResult> cluster_bootstrap(const CrtDataset& data, ModelKind model_kind,
                                               const DesignSpec& spec,
                                               const std::vector<EstimatorKind>& estimators,
                                               const FitOptions& fit_opts, int quad_order,
                                               const BootstrapConfig& cfg);

BootstrapResult cluster_bootstrap(const CrtDataset& data, ModelKind model_kind,
                                  const DesignSpec& spec, EstimatorKind estimator,
                                  const FitOptions& fit_opts, int quad_order,
                                  const BootstrapConfig& cfg);

// type-7 linear-interpolation quantile of a sorted sample
double sorted_quantile(const std::vector<double>& sorted, double q);

}  // namespace sace
