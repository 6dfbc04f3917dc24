// Command-line front end. Talks to the engine exclusively through the
// C API in <sace/sace.h>; options are marshalled as JSON.

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <sace/sace.h>

namespace {

std::string json_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\t': out += "\\t"; break;
      default: out += c;
    }
  }
  return out;
}

std::string joined_command_line(int argc, char** argv) {
  std::string out;
  for (int i = 0; i < argc; ++i) {
    if (i) out += ' ';
    out += argv[i];
  }
  return out;
}

int fail(int status) {
  std::cerr << "error: " << sace_last_error() << "\n";
  return status;
}

bool write_output(const std::string& path, const char* text) {
  if (path.empty()) {
    std::cout << text;
    return true;
  }
  std::ofstream out(path);
  if (!out) {
    std::cerr << "error: cannot write to " << path << "\n";
    return false;
  }
  out << text;
  return true;
}

struct DatasetHandle {
  sace_dataset* ptr = nullptr;
  ~DatasetHandle() { sace_dataset_free(ptr); }
};

struct StringHandle {
  char* ptr = nullptr;
  ~StringHandle() { sace_string_free(ptr); }
};

int default_threads() {
  if (const char* env = std::getenv("SACE_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return 0;  // library resolves 0 to hardware concurrency
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SACE weighting estimators for cluster-randomized trials"};
  app.require_subcommand(1);
  const std::string command_line = joined_command_line(argc, argv);

  // ---- estimate ----
  auto* est = app.add_subcommand("estimate", "Estimate SACE from a trial CSV");
  std::string input, model = "glmm", estimator = "both", variance = "sandwich";
  std::string df_correction = "on", out_path;
  int quad_order = 25, max_iter = 200, boot_reps = 250, threads = default_threads();
  double tol = 1e-7;
  std::uint64_t seed = 0;
  est->add_option("--input", input, "input CSV file")->required();
  est->add_option("--model", model, "survival model: glmm | glm")->capture_default_str();
  est->add_option("--estimator", estimator, "ssw | psw | both")->capture_default_str();
  est->add_option("--variance", variance, "sandwich | bootstrap | none")->capture_default_str();
  est->add_option("--df-correction", df_correction, "on | off")->capture_default_str();
  est->add_option("--quad-order", quad_order, "adaptive quadrature order")
      ->capture_default_str();
  est->add_option("--max-iter", max_iter, "fit iteration cap")->capture_default_str();
  est->add_option("--tol", tol, "score convergence tolerance")->capture_default_str();
  est->add_option("--boot-reps", boot_reps, "bootstrap replicates")->capture_default_str();
  est->add_option("--seed", seed, "RNG seed")->capture_default_str();
  est->add_option("--threads", threads, "worker threads (0 = auto)")->capture_default_str();
  est->add_option("--out", out_path, "write the JSON report here (default stdout)");

  // ---- simulate ----
  auto* sim = app.add_subcommand("simulate", "Run a Monte-Carlo performance study");
  std::string preset, config_path, sim_out;
  int reps = 1000, sim_threads = default_threads(), sim_quad = 25, sim_boot = 250;
  std::uint64_t sim_seed = 0;
  bool paper_scale = false;
  std::string sim_variance = "sandwich";
  sim->add_option("--preset", preset, "named scenario grid: table2");
  sim->add_option("--config", config_path, "JSON file with a scenarios array");
  sim->add_option("--reps", reps, "replicates per scenario")->capture_default_str();
  sim->add_option("--seed", sim_seed, "RNG seed")->capture_default_str();
  sim->add_option("--out", sim_out, "write the results CSV here (default stdout)");
  sim->add_flag("--paper-scale", paper_scale, "multiply bias/variance columns by 100");
  sim->add_option("--threads", sim_threads, "worker threads (0 = auto)")
      ->capture_default_str();
  sim->add_option("--quad-order", sim_quad, "adaptive quadrature order")
      ->capture_default_str();
  sim->add_option("--variance", sim_variance, "sandwich | bootstrap")->capture_default_str();
  sim->add_option("--boot-reps", sim_boot, "bootstrap replicates")->capture_default_str();

  // ---- validate ----
  auto* val = app.add_subcommand("validate", "Check a trial CSV against the data contract");
  std::string val_input;
  val->add_option("--input", val_input, "input CSV file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 5;
  }

  if (est->parsed()) {
    DatasetHandle dataset;
    int status = sace_dataset_read_csv(input.c_str(), &dataset.ptr);
    if (status != SACE_OK) return fail(status);

    std::ostringstream options;
    options << "{\"model\":\"" << json_escape(model) << "\""
            << ",\"estimator\":\"" << json_escape(estimator) << "\""
            << ",\"variance\":\"" << json_escape(variance) << "\""
            << ",\"df_correction\":" << (df_correction == "off" ? "false" : "true")
            << ",\"quad_order\":" << quad_order << ",\"max_iter\":" << max_iter
            << ",\"tol\":" << tol << ",\"boot_reps\":" << boot_reps << ",\"seed\":" << seed
            << ",\"threads\":" << threads << ",\"command_line\":\""
            << json_escape(command_line) << "\"}";

    StringHandle report;
    status = sace_estimate(dataset.ptr, options.str().c_str(), &report.ptr);
    if (status != SACE_OK) return fail(status);
    if (!write_output(out_path, report.ptr)) return 2;
    if (!out_path.empty()) std::cout << "report written to " << out_path << "\n";
    return 0;
  }

  if (sim->parsed()) {
    std::ostringstream request;
    request << "{";
    if (!preset.empty()) {
      request << "\"preset\":\"" << json_escape(preset) << "\",";
    } else if (!config_path.empty()) {
      std::ifstream in(config_path);
      if (!in) {
        std::cerr << "error: cannot open config file " << config_path << "\n";
        return 5;
      }
      std::stringstream buffer;
      buffer << in.rdbuf();
      // the config file holds {"scenarios": [...]} or a bare array
      std::string body = buffer.str();
      const auto first = body.find_first_not_of(" \t\r\n");
      if (first != std::string::npos && body[first] == '[') {
        request << "\"scenarios\":" << body << ",";
      } else if (first != std::string::npos && body[first] == '{') {
        // merge the object's fields
        const auto last = body.find_last_of('}');
        const auto open = body.find_first_of('{');
        const std::string inner = body.substr(open + 1, last - open - 1);
        if (inner.find_first_not_of(" \t\r\n") != std::string::npos) {
          request << inner << ",";
        }
      } else {
        std::cerr << "error: config file must contain a JSON object or array\n";
        return 5;
      }
    }
    request << "\"reps\":" << reps << ",\"seed\":" << sim_seed
            << ",\"paper_scale\":" << (paper_scale ? "true" : "false")
            << ",\"quad_order\":" << sim_quad << ",\"threads\":" << sim_threads
            << ",\"variance\":\"" << json_escape(sim_variance) << "\""
            << ",\"boot_reps\":" << sim_boot << ",\"command_line\":\""
            << json_escape(command_line) << "\"}";

    StringHandle csv, manifest;
    const int status = sace_simulate(request.str().c_str(), &csv.ptr, &manifest.ptr);
    if (status != SACE_OK) return fail(status);
    if (!write_output(sim_out, csv.ptr)) return 2;
    if (!sim_out.empty()) {
      const std::string manifest_path = sim_out + ".manifest.json";
      if (!write_output(manifest_path, manifest.ptr)) return 2;
      std::cout << "results written to " << sim_out << " (manifest: " << manifest_path
                << ")\n";
    } else {
      std::cerr << manifest.ptr << "\n";  // manifest on stderr keeps stdout CSV-clean
    }
    return 0;
  }

  // validate
  DatasetHandle dataset;
  int status = sace_dataset_read_csv(val_input.c_str(), &dataset.ptr);
  if (status != SACE_OK) return fail(status);
  StringHandle report;
  status = sace_validate(dataset.ptr, &report.ptr);
  if (status != SACE_OK) return fail(status);
  std::cout << report.ptr << "\n";
  const bool passed = std::string(report.ptr).find("\"passed\":true") != std::string::npos;
  return passed ? 0 : 2;
}
