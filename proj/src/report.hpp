#pragma once

#include <cstdint>
#include <string>

#include "data_model.hpp"

namespace sace {

#define SACE_VERSION_STRING "0.1.0"

struct EstimateRequest {
  std::string model = "glmm";          // glmm | glm
  std::string estimator = "both";      // ssw | psw | both
  std::string variance = "sandwich";   // sandwich | bootstrap | none
  bool df_correct = true;
  int quad_order = 25;
  int max_iter = 200;
  double tol = 1e-7;
  int boot_reps = 250;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  std::string command_line;
};

// Parse from the options JSON accepted by the C API; unknown keys rejected.
EstimateRequest parse_estimate_request(const std::string& options_json);

// validate -> fit -> estimate -> variance; returns the versioned JSON report
// (estimates, fit diagnostics, validation block, run manifest with per-phase
// wall clock).
std::string run_estimate_report(const CrtDataset& data, const EstimateRequest& req);

std::string validation_report_json(const CrtDataset& data);

struct SimulateRequest {
  std::string preset;         // "table2" or empty when scenarios are inline
  std::string scenarios_json; // raw JSON array when preset is empty
  int reps = 1000;
  std::uint64_t seed = 0;
  bool paper_scale = false;
  int quad_order = 25;
  int threads = 0;
  int oracle_nc = 1000;
  std::string variance = "sandwich";  // sandwich | bootstrap
  int boot_reps = 250;
  std::string command_line;
};

SimulateRequest parse_simulate_request(const std::string& request_json);

// Runs the Monte-Carlo study; returns the performance CSV and writes the run
// manifest JSON through `manifest_json`.
std::string run_simulate_csv(const SimulateRequest& req, std::string* manifest_json);

int resolve_threads(int requested);

// FNV-1a of the canonical option string; stamped into the manifest.
std::string config_hash(const std::string& text);

}  // namespace sace
