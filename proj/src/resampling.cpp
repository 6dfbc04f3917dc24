#include "resampling.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <thread>

#include "rng.hpp"

namespace sace {

namespace {

struct ReplicateOutcome {
  bool ok = false;
  std::string failure;  // taxonomy key when !ok
  std::vector<double> taus;
};

ReplicateOutcome run_replicate(const CrtDataset& data, ModelKind model_kind,
                               const DesignSpec& spec,
                               const std::vector<EstimatorKind>& estimators,
                               const FitOptions& fit_opts, const GhRule& rule,
                               std::uint64_t seed, int replicate_index,
                               const FittedSurvivalModel& original) {
  RngStream stream(seed, RngPurpose::kBootstrap, static_cast<std::uint64_t>(replicate_index));
  const int n_c = static_cast<int>(data.n_clusters());

  CrtDataset resampled;
  resampled.clusters.reserve(n_c);
  bool any_treated = false, any_control = false;
  for (int i = 0; i < n_c; ++i) {
    const int pick = stream.uniform_int(0, n_c - 1);
    Cluster copy = data.clusters[pick];
    copy.id += "#" + std::to_string(i);  // resampled units are distinct clusters
    any_treated = any_treated || copy.treatment == 1;
    any_control = any_control || copy.treatment == 0;
    resampled.clusters.push_back(std::move(copy));
  }

  ReplicateOutcome out;
  if (!(any_treated && any_control)) {
    out.failure = "single-arm";
    return out;
  }

  try {
    FittedSurvivalModel refit;
    if (model_kind == ModelKind::kConditional) {
      FitOptions warm = fit_opts;
      warm.warm_start = std::make_pair(original.beta, std::max(original.sigma2_b, 0.05));
      refit = fit_glmm(resampled, spec, rule, warm);
    } else {
      refit = fit_glm(resampled, spec, fit_opts);
    }
    const std::vector<ClusterWork> work = build_working(resampled, spec);
    for (EstimatorKind e : estimators) {
      const SaceEstimate est = (e == EstimatorKind::kSsw) ? estimate_ssw(work, refit)
                                                          : estimate_psw(work, refit);
      out.taus.push_back(est.tau);
    }
    out.ok = true;
  } catch (const FitError& e) {
    out.failure = std::string(e.what()).find("separation") != std::string::npos
                      ? "separation"
                      : "fit-failure";
  } catch (const EstimationError&) {
    out.failure = "estimation";
  } catch (const InputError&) {
    out.failure = "invalid-resample";
  }
  return out;
}

}  // namespace

double sorted_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = q * (static_cast<double>(sorted.size()) - 1.0);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::vector<BootstrapResult> cluster_bootstrap(const CrtDataset& data, ModelKind model_kind,
                                               const DesignSpec& spec,
                                               const std::vector<EstimatorKind>& estimators,
                                               const FitOptions& fit_opts, int quad_order,
                                               const BootstrapConfig& cfg) {
  if (cfg.replicates < 2) throw ConfigError("bootstrap requires at least 2 replicates");
  if (estimators.empty()) throw ConfigError("bootstrap requires at least one estimator");
  const ValidationReport report = validate_dataset(data);
  if (!report.passed()) throw InputError("dataset failed validation: " + report.summary());

  const GhRule rule = gh_nodes(quad_order);
  // one reference fit supplies warm starts for every replicate
  FittedSurvivalModel original;
  if (model_kind == ModelKind::kConditional) {
    original = fit_glmm(data, spec, rule, fit_opts);
  } else {
    original = fit_glm(data, spec, fit_opts);
  }

  std::vector<ReplicateOutcome> outcomes(cfg.replicates);
  auto run_range = [&](int begin, int end) {
    for (int r = begin; r < end; ++r) {
      outcomes[r] = run_replicate(data, model_kind, spec, estimators, fit_opts, rule, cfg.seed,
                                  r, original);
    }
  };
  const int threads = std::max(1, cfg.threads);
  if (threads == 1) {
    run_range(0, cfg.replicates);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (cfg.replicates + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(cfg.replicates, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  std::map<std::string, int> taxonomy;
  int failed = 0;
  std::vector<std::vector<double>> taus(estimators.size());
  for (const auto& o : outcomes) {
    if (!o.ok) {
      ++failed;
      ++taxonomy[o.failure];
      continue;
    }
    for (std::size_t e = 0; e < estimators.size(); ++e) taus[e].push_back(o.taus[e]);
  }
  if (failed * 10 > cfg.replicates) {
    std::ostringstream msg;
    msg << "bootstrap unstable: " << failed << "/" << cfg.replicates
        << " replicates failed (";
    for (const auto& [key, count] : taxonomy) msg << key << "=" << count << " ";
    msg << ")";
    throw VarianceError(msg.str());
  }

  std::vector<BootstrapResult> results;
  for (std::size_t e = 0; e < estimators.size(); ++e) {
    BootstrapResult res;
    res.estimator = estimators[e];
    res.n_replicates = static_cast<int>(taus[e].size());
    res.n_failed = failed;
    res.failure_taxonomy = taxonomy;
    res.replicate_taus = taus[e];
    const double n = static_cast<double>(taus[e].size());
    double mean = 0.0;
    for (double t : taus[e]) mean += t;
    mean /= n;
    double var = 0.0;
    for (double t : taus[e]) var += (t - mean) * (t - mean);
    res.variance = var / (n - 1.0);
    std::vector<double> sorted = taus[e];
    std::sort(sorted.begin(), sorted.end());
    res.ci95 = {sorted_quantile(sorted, 0.025), sorted_quantile(sorted, 0.975)};
    results.push_back(std::move(res));
  }
  return results;
}

BootstrapResult cluster_bootstrap(const CrtDataset& data, ModelKind model_kind,
                                  const DesignSpec& spec, EstimatorKind estimator,
                                  const FitOptions& fit_opts, int quad_order,
                                  const BootstrapConfig& cfg) {
  return cluster_bootstrap(data, model_kind, spec, std::vector<EstimatorKind>{estimator},
                           fit_opts, quad_order, cfg)
      .front();
}

}  // namespace sace
