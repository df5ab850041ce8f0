/*
 * C interface to the llmopt benchmark harness.
 *
 * Every function returning llmopt_status reports failures through the status
 * code; llmopt_last_error() then returns a message for the calling thread.
 * Handles are opaque and released with their matching *_free function.
 * Strings handed out through char** are released with llmopt_string_free().
 */
#ifndef LLMOPT_H
#define LLMOPT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LLMOPT_API __declspec(dllexport)
#else
#define LLMOPT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum llmopt_status {
  LLMOPT_OK = 0,
  LLMOPT_ERR_INVALID_ARGUMENT = 1,
  LLMOPT_ERR_ARITY = 2,
  LLMOPT_ERR_GRID_TOO_LARGE = 3,
  LLMOPT_ERR_NO_GROUND_TRUTH = 4,
  LLMOPT_ERR_UNDEFINED_METRIC = 5,
  LLMOPT_ERR_PARSE = 6,
  LLMOPT_ERR_SCRIPT_EXHAUSTED = 7,
  LLMOPT_ERR_TRANSPORT = 8,
  LLMOPT_ERR_PROTOCOL = 9,
  LLMOPT_ERR_CONFIG = 10,
  LLMOPT_ERR_IO = 11,
  LLMOPT_ERR_INTERNAL = 99
} llmopt_status;

enum { LLMOPT_FORMAT_CSV = 1u, LLMOPT_FORMAT_JSON = 2u };

typedef struct llmopt_dataset llmopt_dataset;
typedef struct llmopt_config llmopt_config;
typedef struct llmopt_report llmopt_report;

LLMOPT_API const char* llmopt_version(void);
LLMOPT_API const char* llmopt_status_name(llmopt_status status);
/* Message for the last failing call on this thread; "" if none. */
LLMOPT_API const char* llmopt_last_error(void);
LLMOPT_API void llmopt_string_free(char* s);

/* Datasets: JSON lines {id, d, y, init, seed}. */
LLMOPT_API llmopt_status llmopt_dataset_generate(const size_t* dims, size_t n_dims, size_t per_dim, uint64_t seed,
                                                 llmopt_dataset** out);
LLMOPT_API llmopt_status llmopt_dataset_load(const char* path, llmopt_dataset** out);
LLMOPT_API llmopt_status llmopt_dataset_save(const llmopt_dataset* dataset, const char* path);
LLMOPT_API llmopt_status llmopt_dataset_to_jsonl(const llmopt_dataset* dataset, char** out);
LLMOPT_API size_t llmopt_dataset_size(const llmopt_dataset* dataset);
/* Dimension of instance `index`, 0 when out of range. */
LLMOPT_API size_t llmopt_dataset_dim(const llmopt_dataset* dataset, size_t index);
LLMOPT_API void llmopt_dataset_free(llmopt_dataset* dataset);

/* Loss, oracle steps and metrics on raw arrays of length d (or n). */
LLMOPT_API llmopt_status llmopt_mse_loss(const double* y, const double* yhat, size_t d, double* out);
LLMOPT_API llmopt_status llmopt_gd_step(const double* y, const double* point, size_t d, double lr, double* out_point);
LLMOPT_API llmopt_status llmopt_hc_step(const double* y, const double* point, size_t d, double* out_point,
                                        int* improved);
LLMOPT_API llmopt_status llmopt_grid_optimum(const double* y, size_t d, int low, int high, double* out_point);
LLMOPT_API llmopt_status llmopt_goal_metric(const double* init_losses, const double* final_losses, size_t n,
                                            double* out);
/* *present is set to 0 when truth is degenerate (below 1e-9). */
LLMOPT_API llmopt_status llmopt_policy_metric(const double* final_losses, size_t n, double truth, double* out,
                                              int* present);
LLMOPT_API llmopt_status llmopt_uncertainty_metric(const double* final_losses, size_t n, double* out);

/* Experiment configuration (JSON file, see README). */
LLMOPT_API llmopt_status llmopt_config_new(llmopt_config** out);
LLMOPT_API llmopt_status llmopt_config_load(const char* path, llmopt_config** out);
/* Comma-separated task list; parameters from a loaded file are kept per task. */
LLMOPT_API llmopt_status llmopt_config_set_tasks(llmopt_config* config, const char* tasks);
/* "http", "scripted" or "perfect-oracle". */
LLMOPT_API llmopt_status llmopt_config_set_backend(llmopt_config* config, const char* kind);
LLMOPT_API llmopt_status llmopt_config_set_script(llmopt_config* config, const char* path);
LLMOPT_API llmopt_status llmopt_config_set_parallelism(llmopt_config* config, int parallelism);
LLMOPT_API llmopt_status llmopt_config_set_seed(llmopt_config* config, uint64_t seed);
LLMOPT_API llmopt_status llmopt_config_to_json(const llmopt_config* config, char** out);
LLMOPT_API void llmopt_config_free(llmopt_config* config);

/* Runs every configured task on every instance. out_dir (may be NULL)
 * receives traces/ and manifest.json. */
LLMOPT_API llmopt_status llmopt_run(const llmopt_dataset* dataset, const llmopt_config* config, const char* out_dir,
                                    llmopt_report** out);
/* Recomputes metrics from persisted trace files. */
LLMOPT_API llmopt_status llmopt_report_from_traces(const char* trace_dir, double divergence_factor,
                                                   llmopt_report** out);
/* Reference traces for the configured tasks. Either output may be NULL. */
LLMOPT_API llmopt_status llmopt_oracle_traces(const llmopt_dataset* dataset, const llmopt_config* config,
                                              const char* out_dir, char** jsonl_out);

/* Writes metrics.csv and/or metrics.json; *paths_out (optional) gets the
 * written paths, newline-separated. */
LLMOPT_API llmopt_status llmopt_report_emit(const llmopt_report* report, const char* dir, unsigned formats,
                                            char** paths_out);
LLMOPT_API llmopt_status llmopt_report_csv(const llmopt_report* report, char** out);
LLMOPT_API llmopt_status llmopt_report_json(const llmopt_report* report, char** out);
LLMOPT_API llmopt_status llmopt_report_manifest(const llmopt_report* report, char** out);
LLMOPT_API size_t llmopt_report_group_count(const llmopt_report* report);
LLMOPT_API size_t llmopt_report_trial_count(const llmopt_report* report);
LLMOPT_API size_t llmopt_report_excluded_count(const llmopt_report* report);
LLMOPT_API size_t llmopt_report_warning_count(const llmopt_report* report);
LLMOPT_API const char* llmopt_report_warning(const llmopt_report* report, size_t index);
LLMOPT_API void llmopt_report_free(llmopt_report* report);

#ifdef __cplusplus
}
#endif

#endif /* LLMOPT_H */
