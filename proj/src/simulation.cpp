#include "simulation.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <thread>

#include "math_utils.hpp"
#include "resampling.hpp"
#include "variance.hpp"

namespace sace {

namespace {

constexpr double kPi2Over3 = 3.289868133696453;  // pi^2 / 3

// fixed effects of the published generator: 0.75 + delta*a + 0.1 x1 - 0.05 x2 + 0.1 c1
double survival_lp(double x1, double x2, double c1) {
  return 0.75 + 0.1 * x1 - 0.05 * x2 + 0.1 * c1;
}

double outcome_mean(int a, double x1, double x2) {
  return (a + 1) * (1.0 + 0.25 * x1 + 0.125 * x2);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

Stratum stratum_of(int s1, int s0) {
  if (s1 == 1 && s0 == 1) return Stratum::kAlwaysSurvivor;
  if (s1 == 1 && s0 == 0) return Stratum::kProtected;
  if (s1 == 0 && s0 == 1) return Stratum::kHarmed;
  return Stratum::kNeverSurvivor;
}

void validate_scenario(const SimScenario& s) {
  if (s.n_c < 1) throw ConfigError("scenario: n_c must be >= 1");
  if (s.size_min < 1 || s.size_max < s.size_min) {
    throw ConfigError("scenario: invalid cluster size range");
  }
  if (!(s.lambda >= 0.0 && s.lambda < 1.0)) {
    throw ConfigError("scenario: lambda must be in [0, 1)");
  }
  if (!(s.rho >= 0.0 && s.rho < 1.0)) throw ConfigError("scenario: rho must be in [0, 1)");
  if (!(s.sigma2_bstar > 0.0)) throw ConfigError("scenario: sigma2_bstar must be positive");
  if (!(s.assignment_prob >= 0.0 && s.assignment_prob <= 1.0)) {
    throw ConfigError("scenario: assignment_prob must be in [0, 1]");
  }
  if (s.monotonicity == Monotonicity::kDeterministic && !(s.delta > 0.0)) {
    throw ConfigError("scenario: deterministic monotonicity requires delta > 0");
  }
}

double icc_to_xi(double lambda, double sigma2_bstar) {
  if (!(lambda >= 0.0 && lambda < 1.0)) throw ConfigError("icc_to_xi: lambda must be in [0, 1)");
  if (!(sigma2_bstar > 0.0)) throw ConfigError("icc_to_xi: sigma2_bstar must be positive");
  if (lambda == 0.0) return 0.0;
  return std::sqrt(lambda * kPi2Over3 / ((1.0 - lambda) * sigma2_bstar));
}

ScienceTable generate_science(const SimScenario& s, RngStream& stream) {
  validate_scenario(s);
  const double xi = icc_to_xi(s.lambda, s.sigma2_bstar);
  const double sd_bstar = std::sqrt(s.sigma2_bstar);
  const double sd_eps =
      s.rho > 0.0 ? std::sqrt(s.sigma2_bstar * (1.0 - s.rho) / s.rho) : 1.0;

  ScienceTable table;
  table.clusters.reserve(s.n_c);
  for (int i = 0; i < s.n_c; ++i) {
    ScienceCluster cluster;
    const int n_i = stream.uniform_int(s.size_min, s.size_max);
    cluster.c1 = stream.bernoulli(0.3) ? 1.0 : 0.0;
    cluster.bstar = stream.normal(0.0, sd_bstar);
    cluster.b = xi * cluster.bstar;
    cluster.individuals.reserve(n_i);
    for (int j = 0; j < n_i; ++j) {
      ScienceIndividual ind;
      ind.x1 = stream.normal(2.0, std::sqrt(0.5));
      ind.x2 = stream.normal(0.5, std::sqrt(0.25));
      const double lp = survival_lp(ind.x1, ind.x2, cluster.c1) + cluster.b;
      if (s.monotonicity == Monotonicity::kStochastic) {
        // independent draws per arm: S(0) and S(1) conditionally independent
        ind.s0 = stream.bernoulli(expit(lp)) ? 1 : 0;
        ind.s1 = stream.bernoulli(expit(lp + s.delta)) ? 1 : 0;
      } else {
        // latent ordinal strata with cut points -delta and 0
        const double gstar = lp + stream.logistic();
        ind.s1 = gstar > -s.delta ? 1 : 0;
        ind.s0 = gstar > 0.0 ? 1 : 0;
      }
      if (ind.s0 == 1) {
        ind.y0 = stream.normal(outcome_mean(0, ind.x1, ind.x2) + cluster.bstar, sd_eps);
      }
      if (ind.s1 == 1) {
        ind.y1 = stream.normal(outcome_mean(1, ind.x1, ind.x2) + cluster.bstar, sd_eps);
      }
      ind.stratum = stratum_of(ind.s1, ind.s0);
      cluster.individuals.push_back(ind);
    }
    table.clusters.push_back(std::move(cluster));
  }
  return table;
}

double true_sace(const SimScenario& s, int oracle_nc) {
  SimScenario oracle = s;
  oracle.n_c = oracle_nc;
  RngStream stream(s.seed, RngPurpose::kOracle, 0);
  const ScienceTable table = generate_science(oracle, stream);
  double num1 = 0.0, num0 = 0.0, den = 0.0;
  for (const auto& c : table.clusters) {
    for (const auto& ind : c.individuals) {
      if (ind.s0 == 1 && ind.s1 == 1) {
        num1 += *ind.y1;
        num0 += *ind.y0;
        den += 1.0;
      }
    }
  }
  if (den == 0.0) throw EstimationError("oracle SACE undefined: no always-survivors drawn");
  return (num1 - num0) / den;
}

CrtDataset randomize_observe(const ScienceTable& science, double p, RngStream& stream) {
  CrtDataset data;
  data.clusters.reserve(science.clusters.size());
  for (std::size_t i = 0; i < science.clusters.size(); ++i) {
    const ScienceCluster& sc = science.clusters[i];
    Cluster cluster;
    cluster.id = "c" + std::to_string(i + 1);
    cluster.treatment = stream.bernoulli(p) ? 1 : 0;
    cluster.cluster_covariates = {sc.c1};
    cluster.individuals.reserve(sc.individuals.size());
    for (const auto& sci : sc.individuals) {
      Individual ind;
      ind.covariates = {sci.x1, sci.x2};
      if (cluster.treatment == 1) {
        ind.survival = sci.s1;
        if (sci.s1 == 1) ind.outcome = *sci.y1;
      } else {
        ind.survival = sci.s0;
        if (sci.s0 == 1) ind.outcome = *sci.y0;
      }
      cluster.individuals.push_back(std::move(ind));
    }
    data.clusters.push_back(std::move(cluster));
  }
  return data;
}

namespace {

struct RepOutcome {
  // indexed by config
  std::vector<double> tau;
  std::vector<double> var;
  std::vector<bool> ok;
  double fit_seconds = 0.0;
  double variance_seconds = 0.0;
};

RepOutcome run_replicate(const SimScenario& scenario, const StudyOptions& opts,
                         const std::vector<EstimatorConfig>& configs, const GhRule& rule,
                         int rep) {
  RepOutcome out;
  out.tau.assign(configs.size(), 0.0);
  out.var.assign(configs.size(), 0.0);
  out.ok.assign(configs.size(), false);

  RngStream science_stream(opts.seed, RngPurpose::kScience, static_cast<std::uint64_t>(rep));
  const ScienceTable science = generate_science(scenario, science_stream);
  RngStream assign_stream(opts.seed, RngPurpose::kAssignment, static_cast<std::uint64_t>(rep));
  const CrtDataset data = randomize_observe(science, scenario.assignment_prob, assign_stream);

  const DesignSpec spec = DesignSpec::all_covariates(data);

  for (ModelKind kind : {ModelKind::kConditional, ModelKind::kMarginal}) {
    std::vector<std::size_t> active;
    for (std::size_t k = 0; k < configs.size(); ++k) {
      if (configs[k].model == kind) active.push_back(k);
    }
    if (active.empty()) continue;

    FittedSurvivalModel model;
    const auto t_fit = Clock::now();
    try {
      if (kind == ModelKind::kConditional) {
        model = fit_glmm(data, spec, rule, {});
      } else {
        model = fit_glm(data, spec, {});
      }
    } catch (const Error&) {
      out.fit_seconds += seconds_since(t_fit);
      continue;  // every config under this model kind counts as failed
    }
    out.fit_seconds += seconds_since(t_fit);

    const std::vector<ClusterWork> work = build_working(data, spec);
    for (std::size_t k : active) {
      try {
        const SaceEstimate est = configs[k].estimator == EstimatorKind::kSsw
                                     ? estimate_ssw(work, model)
                                     : estimate_psw(work, model);
        const auto t_var = Clock::now();
        double var = 0.0;
        if (opts.variance == VarianceMethod::kBootstrap) {
          BootstrapConfig bcfg;
          bcfg.replicates = opts.boot_replicates;
          bcfg.seed = mix64(opts.seed ^ mix64(static_cast<std::uint64_t>(rep)));
          bcfg.threads = 1;
          var = cluster_bootstrap(data, kind, spec, configs[k].estimator, {}, opts.quad_order,
                                  bcfg)
                    .variance;
        } else {
          const ThetaVector theta = ThetaVector::from_fit(model, est.mu1, est.mu0);
          var = sandwich(work, theta, configs[k].estimator, kind, rule, model.cluster_modes,
                         opts.df_correct)
                    .var_tau;
        }
        out.variance_seconds += seconds_since(t_var);
        out.tau[k] = est.tau;
        out.var[k] = var;
        out.ok[k] = true;
      } catch (const Error&) {
        // dropped and counted
      }
    }
  }
  return out;
}

}  // namespace

StudyResult run_study(const SimScenario& scenario, const StudyOptions& opts,
                      const std::vector<EstimatorConfig>& configs) {
  if (opts.reps < 2) throw ConfigError("run_study requires reps >= 2");
  if (configs.empty()) throw ConfigError("run_study requires at least one estimator config");
  validate_scenario(scenario);

  const auto t_total = Clock::now();
  const GhRule rule = gh_nodes(opts.quad_order);
  SimScenario oracle_scenario = scenario;
  oracle_scenario.seed = opts.seed;  // the oracle draw belongs to the study's seed
  const double truth = true_sace(oracle_scenario, opts.oracle_nc);

  std::vector<RepOutcome> outcomes(opts.reps);
  auto run_range = [&](int begin, int end) {
    for (int r = begin; r < end; ++r) {
      outcomes[r] = run_replicate(scenario, opts, configs, rule, r);
    }
  };
  const int threads = std::max(1, opts.threads);
  if (threads == 1) {
    run_range(0, opts.reps);
  } else {
    std::vector<std::thread> pool;
    const int chunk = (opts.reps + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      const int begin = t * chunk;
      const int end = std::min(opts.reps, begin + chunk);
      if (begin < end) pool.emplace_back(run_range, begin, end);
    }
    for (auto& th : pool) th.join();
  }

  StudyResult result;
  for (std::size_t k = 0; k < configs.size(); ++k) {
    PerformanceRow row;
    row.scenario_id = scenario.id;
    row.estimator = configs[k].estimator;
    row.model = configs[k].model;
    row.true_sace = truth;

    std::vector<double> taus, vars;
    int failed = 0;
    for (const auto& o : outcomes) {
      if (!o.ok[k]) {
        ++failed;
        continue;
      }
      taus.push_back(o.tau[k]);
      vars.push_back(o.var[k]);
    }
    if (failed > opts.max_failure_rate * opts.reps) {
      std::ostringstream msg;
      msg << "study failed: " << failed << "/" << opts.reps << " replicates failed for "
          << estimator_name(configs[k].estimator) << "/" << model_kind_name(configs[k].model);
      throw FitError(msg.str());
    }
    const double n = static_cast<double>(taus.size());
    double mean = 0.0;
    for (double t : taus) mean += t;
    mean /= n;
    double emp_var = 0.0;
    for (double t : taus) emp_var += (t - mean) * (t - mean);
    emp_var /= (n - 1.0);
    double avg_var = 0.0;
    int covered = 0;
    for (std::size_t r = 0; r < taus.size(); ++r) {
      avg_var += vars[r];
      const double half = kZ975 * std::sqrt(vars[r]);
      if (std::abs(taus[r] - truth) <= half) ++covered;
    }
    avg_var /= n;

    row.mean_estimate = mean;
    row.bias = mean - truth;
    row.emp_var = emp_var;
    row.avg_model_var = avg_var;
    row.coverage = static_cast<double>(covered) / n;
    row.n_failed = failed;
    row.n_used = static_cast<int>(taus.size());
    result.rows.push_back(std::move(row));
  }

  for (const auto& o : outcomes) {
    result.fit_seconds += o.fit_seconds;
    result.variance_seconds += o.variance_seconds;
  }
  result.total_seconds = seconds_since(t_total);
  return result;
}

std::vector<SimScenario> preset_table2() {
  std::vector<SimScenario> out;
  const std::pair<double, const char*> deltas[] = {
      {0.0, "0.0"}, {std::log(1.25), "0.2"}, {std::log(5.0), "1.6"}};
  for (double lambda : {0.1, 0.3}) {
    for (const auto& [delta, label] : deltas) {
      for (int n_c : {30, 60, 90}) {
        SimScenario s;
        s.n_c = n_c;
        s.delta = delta;
        s.lambda = lambda;
        char buf[64];
        std::snprintf(buf, sizeof(buf), "l%.2g_d%s_n%d", lambda, label, n_c);
        s.id = buf;
        out.push_back(s);
      }
    }
  }
  return out;
}

std::string performance_csv(const std::vector<PerformanceRow>& rows, bool paper_scale) {
  std::ostringstream out;
  out << "scenario_id,estimator,model,mean_estimate,bias,emp_var,avg_model_var,coverage,"
         "n_failed\n";
  char buf[40];
  auto fmt = [&](double v) {
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return std::string(buf);
  };
  const double scale = paper_scale ? 100.0 : 1.0;
  for (const auto& r : rows) {
    out << r.scenario_id << "," << estimator_name(r.estimator) << ","
        << model_kind_name(r.model) << "," << fmt(r.mean_estimate) << ","
        << fmt(r.bias * scale) << "," << fmt(r.emp_var * scale) << ","
        << fmt(r.avg_model_var * scale) << "," << fmt(r.coverage) << "," << r.n_failed << "\n";
  }
  return out.str();
}

}  // namespace sace
