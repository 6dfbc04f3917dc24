#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "estimators.hpp"
#include "rng.hpp"

namespace sace {

enum class Monotonicity { kStochastic, kDeterministic };

enum class Stratum { kAlwaysSurvivor, kProtected, kHarmed, kNeverSurvivor };

Stratum stratum_of(int s1, int s0);

// Generator configuration. The outcome noise variance is tied to the outcome
// ICC: var_eps = sigma2_bstar * (1 - rho) / rho, which is 1 at the defaults
// (rho = 0.1, sigma2_bstar = 1/9). The survival random intercept is
// b_i = xi * bstar_i with xi calibrated from lambda by icc_to_xi.
struct SimScenario {
  std::string id;
  int n_c = 30;
  int size_min = 25;
  int size_max = 50;
  double delta = 0.0;              // treatment effect on survival (log odds)
  double lambda = 0.1;             // survival ICC on the latent scale
  double rho = 0.1;                // outcome ICC
  double sigma2_bstar = 1.0 / 9.0; // variance of the outcome random effect
  Monotonicity monotonicity = Monotonicity::kStochastic;
  double assignment_prob = 0.5;
  std::uint64_t seed = 0;
};

void validate_scenario(const SimScenario& s);

// xi >= 0 solving lambda = xi^2 s2 / (xi^2 s2 + pi^2/3); lambda = 0 gives 0.
double icc_to_xi(double lambda, double sigma2_bstar);

struct ScienceIndividual {
  double x1 = 0.0, x2 = 0.0;
  int s0 = 0, s1 = 0;
  std::optional<double> y0, y1;  // present iff the matching survival is 1
  Stratum stratum = Stratum::kNeverSurvivor;
};

struct ScienceCluster {
  double c1 = 0.0;
  double b = 0.0, bstar = 0.0;
  std::vector<ScienceIndividual> individuals;
};

// Full potential-outcome table; known only to the simulator.
struct ScienceTable {
  std::vector<ScienceCluster> clusters;
};

ScienceTable generate_science(const SimScenario& s, RngStream& stream);

// Ratio-difference SACE over the always-survivors of a fresh super-population
// draw (its own oracle stream derived from the scenario seed).
double true_sace(const SimScenario& s, int oracle_nc = 1000);

// Bernoulli(p) cluster assignment; reveals the assigned arm's potential
// outcomes. Latent b, bstar and the stratum labels are not copied.
CrtDataset randomize_observe(const ScienceTable& science, double p, RngStream& stream);

struct EstimatorConfig {
  EstimatorKind estimator = EstimatorKind::kSsw;
  ModelKind model = ModelKind::kConditional;
};

struct StudyOptions {
  int reps = 1000;
  std::uint64_t seed = 0;
  int quad_order = 25;
  int threads = 1;
  int oracle_nc = 1000;
  VarianceMethod variance = VarianceMethod::kSandwich;
  bool df_correct = true;
  int boot_replicates = 250;
  double max_failure_rate = 0.05;
};

struct PerformanceRow {
  std::string scenario_id;
  EstimatorKind estimator = EstimatorKind::kSsw;
  ModelKind model = ModelKind::kConditional;
  double true_sace = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  double emp_var = 0.0;
  double avg_model_var = 0.0;
  double coverage = 0.0;
  int n_failed = 0;
  int n_used = 0;
};

struct StudyResult {
  std::vector<PerformanceRow> rows;
  double fit_seconds = 0.0;       // summed over replicates
  double variance_seconds = 0.0;  // summed over replicates
  double total_seconds = 0.0;
};

StudyResult run_study(const SimScenario& scenario, const StudyOptions& opts,
                      const std::vector<EstimatorConfig>& configs);

// The published grid: lambda in {0.1, 0.3} x delta in {0, log 1.25, log 5}
// x n_c in {30, 60, 90}, stochastic monotonicity, labels 0.0 / 0.2 / 1.6.
std::vector<SimScenario> preset_table2();

std::string performance_csv(const std::vector<PerformanceRow>& rows, bool paper_scale);

}  // namespace sace
