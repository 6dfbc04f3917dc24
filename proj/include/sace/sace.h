/*
 * C API for survivor-average-causal-effect estimation in cluster-randomized
 * trials. Datasets are opaque handles; analysis options and results travel
 * as JSON strings. Every function returns a status code; the most recent
 * error message for the calling thread is available via sace_last_error().
 */
#ifndef SACE_SACE_H
#define SACE_SACE_H

#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

#if defined(_WIN32)
#define SACE_API __declspec(dllexport)
#else
#define SACE_API __attribute__((visibility("default")))
#endif

/* Status codes. Nonzero values match the CLI exit codes. */
enum {
  SACE_OK = 0,
  SACE_ERR_INPUT = 2,    /* unreadable/malformed data, failed validation */
  SACE_ERR_FIT = 3,      /* model fitting or point estimation failed */
  SACE_ERR_VARIANCE = 4, /* sandwich/bootstrap variance failed */
  SACE_ERR_CONFIG = 5,   /* bad options, unknown fields, invalid ranges */
  SACE_ERR_NULLPTR = 10,
  SACE_ERR_INTERNAL = 11
};

typedef struct sace_dataset sace_dataset;

SACE_API const char* sace_version(void);

/* Thread-local message for the last failing call; empty string if none. */
SACE_API const char* sace_last_error(void);
SACE_API void sace_clear_last_error(void);

/*
 * CSV schema (header required): cluster_id, treatment (0/1), survival (0/1),
 * outcome (float, empty when truncated), x1..xk, c1..cm. UTF-8, commas,
 * '.' decimal separator.
 */
SACE_API int sace_dataset_read_csv(const char* path, sace_dataset** out);
SACE_API int sace_dataset_parse_csv(const char* csv_text, sace_dataset** out);
SACE_API void sace_dataset_free(sace_dataset* dataset);
SACE_API int sace_dataset_counts(const sace_dataset* dataset, int32_t* n_clusters,
                                 int32_t* n_individuals);

/*
 * Validation report as JSON: {"passed": bool, "violations": [{cluster_id,
 * rule, detail}]}. A failing report still returns SACE_OK; the report is the
 * result.
 */
SACE_API int sace_validate(const sace_dataset* dataset, char** json_out);

/*
 * Full analysis. options_json keys (all optional):
 *   model: "glmm" | "glm"            estimator: "ssw" | "psw" | "both"
 *   variance: "sandwich" | "bootstrap" | "none"
 *   df_correction: bool               quad_order, max_iter, tol
 *   boot_reps, seed, threads          command_line (echoed into manifest)
 * The report JSON carries estimates, CIs, fit diagnostics and a manifest
 * with per-phase wall-clock timing.
 */
SACE_API int sace_estimate(const sace_dataset* dataset, const char* options_json,
                           char** json_out);

/*
 * Monte-Carlo study. request_json: {"preset": "table2"} or {"scenarios":
 * [...]}, plus reps, seed, paper_scale, quad_order, threads, variance,
 * boot_reps, oracle_nc. Returns the performance CSV; manifest_json_out
 * (optional) receives the run manifest.
 */
SACE_API int sace_simulate(const char* request_json, char** csv_out,
                           char** manifest_json_out);

/* Frees strings returned through char** out-parameters. */
SACE_API void sace_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* SACE_SACE_H */
