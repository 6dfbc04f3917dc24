// Shared fixture builders for the unit suites.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "rng.hpp"

namespace fixtures {

inline sace::Individual person(int survival, std::optional<double> outcome,
                               std::vector<double> covs) {
  sace::Individual ind;
  ind.survival = survival;
  ind.outcome = outcome;
  ind.covariates = std::move(covs);
  return ind;
}

// a small two-arm dataset with mixed survival, valid under every invariant
inline sace::CrtDataset small_two_arm() {
  sace::CrtDataset data;
  sace::Cluster c1;
  c1.id = "c1";
  c1.treatment = 1;
  c1.cluster_covariates = {1.0};
  c1.individuals = {person(1, 2.0, {0.5, -0.2}), person(0, std::nullopt, {1.1, 0.3}),
                    person(1, 4.0, {-0.4, 0.8})};
  sace::Cluster c2;
  c2.id = "c2";
  c2.treatment = 0;
  c2.cluster_covariates = {0.0};
  c2.individuals = {person(1, 1.5, {0.2, 0.1}), person(1, 3.5, {0.9, -0.5}),
                    person(0, std::nullopt, {-1.0, 0.4})};
  data.clusters = {c1, c2};
  return data;
}

// n_c clusters drawn from a generator in the same family as the production
// simulator but written out locally, so fixtures do not depend on the module
// under test
inline sace::CrtDataset synthetic_trial(int n_c, std::uint64_t seed, double sigma2_b = 0.4,
                                        double delta = 0.3, int n_min = 8, int n_max = 16,
                                        double intercept = 0.6) {
  sace::RngStream rng(seed, sace::RngPurpose::kScience, 77);
  sace::CrtDataset data;
  for (int i = 0; i < n_c; ++i) {
    sace::Cluster cluster;
    cluster.id = "s" + std::to_string(i + 1);
    cluster.treatment = (i % 2 == 0) ? 1 : 0;  // balanced arms by construction
    const double c1 = rng.bernoulli(0.3) ? 1.0 : 0.0;
    cluster.cluster_covariates = {c1};
    const double b = rng.normal(0.0, std::sqrt(sigma2_b));
    const int n_i = rng.uniform_int(n_min, n_max);
    for (int j = 0; j < n_i; ++j) {
      const double x1 = rng.normal(0.0, 1.0);
      const double x2 = rng.normal(0.0, 1.0);
      const double lp =
          intercept + delta * cluster.treatment + 0.25 * x1 - 0.15 * x2 + 0.2 * c1 + b;
      const int s = rng.bernoulli(1.0 / (1.0 + std::exp(-lp))) ? 1 : 0;
      std::optional<double> y;
      if (s == 1) y = 1.0 + 0.5 * x1 + 0.8 * cluster.treatment + rng.normal(0.0, 1.0);
      cluster.individuals.push_back(person(s, y, {x1, x2}));
    }
    data.clusters.push_back(std::move(cluster));
  }
  return data;
}

}  // namespace fixtures
