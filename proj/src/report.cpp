#include "report.hpp"

#include <chrono>
#include <cstdio>
#include <thread>

#include <json.hpp>

#include "estimators.hpp"
#include "json_writer.hpp"
#include "simulation.hpp"
#include "survival_models.hpp"

namespace sace {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json parse_json(const std::string& text, const char* what) {
  json parsed = json::parse(text, nullptr, false);
  if (parsed.is_discarded()) {
    throw ConfigError(std::string("malformed JSON in ") + what);
  }
  return parsed;
}

ModelKind model_kind_from(const std::string& name) {
  if (name == "glmm") return ModelKind::kConditional;
  if (name == "glm") return ModelKind::kMarginal;
  throw ConfigError("unknown model '" + name + "' (expected glmm or glm)");
}

WhichEstimators which_from(const std::string& name) {
  if (name == "ssw") return WhichEstimators::kSsw;
  if (name == "psw") return WhichEstimators::kPsw;
  if (name == "both") return WhichEstimators::kBoth;
  throw ConfigError("unknown estimator '" + name + "' (expected ssw, psw or both)");
}

VarianceMethod variance_from(const std::string& name) {
  if (name == "sandwich") return VarianceMethod::kSandwich;
  if (name == "bootstrap") return VarianceMethod::kBootstrap;
  if (name == "none") return VarianceMethod::kNone;
  throw ConfigError("unknown variance method '" + name +
                    "' (expected sandwich, bootstrap or none)");
}

void write_manifest(JsonWriter& w, const std::string& command_line, const std::string& options,
                    std::uint64_t seed, double fit_s, double variance_s, double total_s) {
  w.key("manifest").begin_object();
  w.key("command_line").value(command_line);
  w.key("config_hash").value(config_hash(options));
  w.key("seed").value(static_cast<unsigned long long>(seed));
  w.key("version").value(SACE_VERSION_STRING);
  w.key("timing_seconds").begin_object();
  w.key("fit").value(fit_s);
  w.key("variance").value(variance_s);
  w.key("total").value(total_s);
  w.end_object();
  w.end_object();
}

std::string canonical_options(const EstimateRequest& r) {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "model=%s estimator=%s variance=%s df=%d quad=%d max_iter=%d tol=%.17g "
                "boot=%d seed=%llu",
                r.model.c_str(), r.estimator.c_str(), r.variance.c_str(), r.df_correct ? 1 : 0,
                r.quad_order, r.max_iter, r.tol, r.boot_reps,
                static_cast<unsigned long long>(r.seed));
  return buf;
}

}  // namespace

std::string config_hash(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[24];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

EstimateRequest parse_estimate_request(const std::string& options_json) {
  EstimateRequest req;
  if (options_json.empty()) return req;
  const json j = parse_json(options_json, "estimate options");
  if (!j.is_object()) throw ConfigError("estimate options must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "model") {
        req.model = value.get<std::string>();
      } else if (key == "estimator") {
        req.estimator = value.get<std::string>();
      } else if (key == "variance") {
        req.variance = value.get<std::string>();
      } else if (key == "df_correction") {
        req.df_correct = value.get<bool>();
      } else if (key == "quad_order") {
        req.quad_order = value.get<int>();
      } else if (key == "max_iter") {
        req.max_iter = value.get<int>();
      } else if (key == "tol") {
        req.tol = value.get<double>();
      } else if (key == "boot_reps") {
        req.boot_reps = value.get<int>();
      } else if (key == "seed") {
        req.seed = value.get<std::uint64_t>();
      } else if (key == "threads") {
        req.threads = value.get<int>();
      } else if (key == "command_line") {
        req.command_line = value.get<std::string>();
      } else {
        throw ConfigError("unknown estimate option '" + key + "'");
      }
    } catch (const json::exception&) {
      throw ConfigError("estimate option '" + key + "' has the wrong type");
    }
  }
  // validate enumerations eagerly
  model_kind_from(req.model);
  which_from(req.estimator);
  variance_from(req.variance);
  if (req.quad_order < 1 || req.quad_order > 100) {
    throw ConfigError("quad_order must be in [1, 100]");
  }
  if (req.max_iter < 1) throw ConfigError("max_iter must be positive");
  if (!(req.tol > 0.0)) throw ConfigError("tol must be positive");
  if (req.boot_reps < 2) throw ConfigError("boot_reps must be >= 2");
  return req;
}

std::string validation_report_json(const CrtDataset& data) {
  const ValidationReport report = validate_dataset(data);
  JsonWriter w;
  w.begin_object();
  w.key("passed").value(report.passed());
  w.key("violations").begin_array();
  for (const auto& v : report.violations) {
    w.begin_object();
    w.key("cluster_id").value(v.cluster_id);
    w.key("rule").value(v.rule);
    w.key("detail").value(v.detail);
    w.end_object();
  }
  w.end_array();
  w.end_object();
  return w.str();
}

std::string run_estimate_report(const CrtDataset& data, const EstimateRequest& req) {
  const auto t_total = Clock::now();

  const ValidationReport validation = validate_dataset(data);
  if (!validation.passed()) {
    throw InputError("dataset failed validation: " + validation.summary());
  }

  const ModelKind kind = model_kind_from(req.model);
  const WhichEstimators which = which_from(req.estimator);
  const VarianceMethod vmethod = variance_from(req.variance);
  const DesignSpec spec = DesignSpec::all_covariates(data);

  FitOptions fit_opts;
  fit_opts.max_iter = req.max_iter;
  fit_opts.tol = req.tol;

  const auto t_fit = Clock::now();
  FittedSurvivalModel model;
  if (kind == ModelKind::kConditional) {
    model = fit_glmm(data, spec, gh_nodes(req.quad_order), fit_opts);
  } else {
    model = fit_glm(data, spec, fit_opts);
    model.quad_order = req.quad_order;
  }
  const double fit_seconds = seconds_since(t_fit);

  VarianceConfig vcfg;
  vcfg.method = vmethod;
  vcfg.df_correct = req.df_correct;
  vcfg.bootstrap.replicates = req.boot_reps;
  vcfg.bootstrap.seed = req.seed;
  vcfg.bootstrap.threads = resolve_threads(req.threads);

  const auto t_var = Clock::now();
  const std::vector<SaceEstimate> estimates = estimate(data, model, which, vcfg);
  const double variance_seconds = seconds_since(t_var);

  JsonWriter w;
  w.begin_object();
  w.key("schema_version").value(1);
  w.key("estimates").begin_array();
  for (const auto& e : estimates) {
    w.begin_object();
    w.key("estimator").value(estimator_name(e.estimator));
    w.key("model").value(model_kind_name(e.model_kind));
    w.key("tau").value(e.tau);
    w.key("mu1").value(e.mu1);
    w.key("mu0").value(e.mu0);
    if (e.variance) {
      w.key("variance").value(*e.variance);
      w.key("ci95").begin_array().value(e.ci95->first).value(e.ci95->second).end_array();
      w.key("variance_method")
          .value(*e.variance_method == VarianceMethod::kSandwich ? "sandwich" : "bootstrap");
      w.key("df_corrected").value(e.df_corrected);
      if (e.df_factor) w.key("df_factor").value(*e.df_factor);
      if (e.condition_number) w.key("condition_number").value(*e.condition_number);
      if (e.boot_failed) w.key("boot_failed").value(*e.boot_failed);
    }
    w.end_object();
  }
  w.end_array();

  w.key("fit").begin_object();
  w.key("model").value(model_kind_name(model.kind));
  w.key("converged").value(model.converged);
  w.key("boundary").value(model.boundary);
  w.key("loglik").value(model.loglik);
  w.key("sigma2_b").value(model.sigma2_b);
  w.key("beta").begin_array();
  for (int i = 0; i < model.beta.size(); ++i) w.value(model.beta[i]);
  w.end_array();
  w.key("iterations").value(model.iterations);
  w.key("quad_order").value(model.quad_order);
  w.key("n_clusters").value(static_cast<int>(data.n_clusters()));
  w.key("n_individuals").value(static_cast<int>(data.n_individuals()));
  w.end_object();

  w.key("validation").begin_object();
  w.key("passed").value(true);
  w.key("violations").begin_array().end_array();
  w.end_object();

  write_manifest(w, req.command_line, canonical_options(req), req.seed, fit_seconds,
                 variance_seconds, seconds_since(t_total));
  w.end_object();
  return w.str();
}

SimulateRequest parse_simulate_request(const std::string& request_json) {
  SimulateRequest req;
  const json j = parse_json(request_json, "simulate request");
  if (!j.is_object()) throw ConfigError("simulate request must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "preset") {
        req.preset = value.get<std::string>();
      } else if (key == "scenarios") {
        if (!value.is_array()) throw ConfigError("'scenarios' must be an array");
        req.scenarios_json = value.dump();
      } else if (key == "reps") {
        req.reps = value.get<int>();
      } else if (key == "seed") {
        req.seed = value.get<std::uint64_t>();
      } else if (key == "paper_scale") {
        req.paper_scale = value.get<bool>();
      } else if (key == "quad_order") {
        req.quad_order = value.get<int>();
      } else if (key == "threads") {
        req.threads = value.get<int>();
      } else if (key == "oracle_nc") {
        req.oracle_nc = value.get<int>();
      } else if (key == "variance") {
        req.variance = value.get<std::string>();
      } else if (key == "boot_reps") {
        req.boot_reps = value.get<int>();
      } else if (key == "command_line") {
        req.command_line = value.get<std::string>();
      } else {
        throw ConfigError("unknown simulate option '" + key + "'");
      }
    } catch (const json::exception&) {
      throw ConfigError("simulate option '" + key + "' has the wrong type");
    }
  }
  if (req.preset.empty() && req.scenarios_json.empty()) {
    throw ConfigError("simulate requires either a preset or a scenarios array");
  }
  if (!req.preset.empty() && !req.scenarios_json.empty()) {
    throw ConfigError("simulate accepts a preset or inline scenarios, not both");
  }
  if (!req.preset.empty() && req.preset != "table2") {
    throw ConfigError("unknown preset '" + req.preset + "'");
  }
  if (req.reps < 2) throw ConfigError("reps must be >= 2");
  if (req.quad_order < 1 || req.quad_order > 100) {
    throw ConfigError("quad_order must be in [1, 100]");
  }
  if (req.variance != "sandwich" && req.variance != "bootstrap") {
    throw ConfigError("simulate variance must be sandwich or bootstrap");
  }
  if (req.oracle_nc < 1) throw ConfigError("oracle_nc must be positive");
  return req;
}

namespace {

SimScenario scenario_from_json(const json& j, std::size_t index) {
  SimScenario s;
  s.id = "scenario" + std::to_string(index + 1);
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "id") {
        s.id = value.get<std::string>();
      } else if (key == "n_c") {
        s.n_c = value.get<int>();
      } else if (key == "size_min") {
        s.size_min = value.get<int>();
      } else if (key == "size_max") {
        s.size_max = value.get<int>();
      } else if (key == "delta") {
        s.delta = value.get<double>();
      } else if (key == "lambda") {
        s.lambda = value.get<double>();
      } else if (key == "rho") {
        s.rho = value.get<double>();
      } else if (key == "sigma2_bstar") {
        s.sigma2_bstar = value.get<double>();
      } else if (key == "monotonicity") {
        const std::string m = value.get<std::string>();
        if (m == "stochastic") {
          s.monotonicity = Monotonicity::kStochastic;
        } else if (m == "deterministic") {
          s.monotonicity = Monotonicity::kDeterministic;
        } else {
          throw ConfigError("unknown monotonicity '" + m + "'");
        }
      } else if (key == "assignment_prob") {
        s.assignment_prob = value.get<double>();
      } else {
        throw ConfigError("unknown scenario field '" + key + "'");
      }
    } catch (const json::exception&) {
      throw ConfigError("scenario field '" + key + "' has the wrong type");
    }
  }
  return s;
}

}  // namespace

std::string run_simulate_csv(const SimulateRequest& req, std::string* manifest_json) {
  const auto t_total = Clock::now();

  std::vector<SimScenario> scenarios;
  if (!req.preset.empty()) {
    scenarios = preset_table2();
  } else {
    const json arr = parse_json(req.scenarios_json, "scenarios");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      scenarios.push_back(scenario_from_json(arr[i], i));
    }
  }
  if (scenarios.empty()) throw ConfigError("no scenarios to run");
  for (const auto& s : scenarios) validate_scenario(s);

  const std::vector<EstimatorConfig> configs = {
      {EstimatorKind::kSsw, ModelKind::kConditional},
      {EstimatorKind::kPsw, ModelKind::kConditional},
      {EstimatorKind::kSsw, ModelKind::kMarginal},
      {EstimatorKind::kPsw, ModelKind::kMarginal},
  };

  StudyOptions opts;
  opts.reps = req.reps;
  opts.quad_order = req.quad_order;
  opts.threads = resolve_threads(req.threads);
  opts.oracle_nc = req.oracle_nc;
  opts.variance =
      req.variance == "bootstrap" ? VarianceMethod::kBootstrap : VarianceMethod::kSandwich;
  opts.boot_replicates = req.boot_reps;

  std::vector<PerformanceRow> rows;
  double fit_seconds = 0.0, variance_seconds = 0.0;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    // each scenario owns a distinct seed stream; the scenario id stays stable
    opts.seed = mix64(req.seed ^ mix64(i + 1));
    const StudyResult result = run_study(scenarios[i], opts, configs);
    fit_seconds += result.fit_seconds;
    variance_seconds += result.variance_seconds;
    // one row per (scenario x model) per estimator, model kind in the id
    for (const auto& row : result.rows) {
      PerformanceRow out = row;
      out.scenario_id = scenarios[i].id + "_" + model_kind_name(row.model);
      rows.push_back(std::move(out));
    }
  }

  if (manifest_json) {
    JsonWriter w;
    w.begin_object();
    char opt_buf[256];
    std::snprintf(opt_buf, sizeof(opt_buf),
                  "preset=%s reps=%d seed=%llu paper_scale=%d quad=%d variance=%s boot=%d",
                  req.preset.empty() ? "-" : req.preset.c_str(), req.reps,
                  static_cast<unsigned long long>(req.seed), req.paper_scale ? 1 : 0,
                  req.quad_order, req.variance.c_str(), req.boot_reps);
    write_manifest(w, req.command_line, opt_buf, req.seed, fit_seconds, variance_seconds,
                   seconds_since(t_total));
    w.end_object();
    *manifest_json = w.str();
  }
  return performance_csv(rows, req.paper_scale);
}

}  // namespace sace
