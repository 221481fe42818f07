/* C interface for the covariate-adaptive randomization / heavy-tailed
 * treatment-effect toolkit. All functions return a status code:
 *   0  success
 *   2  invalid input (bad config, malformed data)
 *   3  runtime estimation failure
 * On failure carht_last_error() returns a thread-local message. */
#ifndef CARHT_H
#define CARHT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

#define CARHT_OK 0
#define CARHT_EINVAL 2
#define CARHT_ERUNTIME 3

typedef struct carht_dataset carht_dataset;

const char* carht_version(void);
const char* carht_last_error(void);

/* ---- datasets ------------------------------------------------------- */
/* CSV with header; columns: outcome, treatment (0/1), stratum, cov_*. */
int carht_dataset_load(const char* path, carht_dataset** out);
int carht_dataset_parse(const char* csv_text, carht_dataset** out);
void carht_dataset_free(carht_dataset* data);
int carht_dataset_size(const carht_dataset* data, size_t* out);
int carht_dataset_stratum_count(const carht_dataset* data, int* out);

/* ---- treatment assignment ------------------------------------------ */
/* scheme: "simple" | "stratified-block" | "biased-coin" | "minimization".
 * strata: n dense stratum ids. covariates: row-major n x n_weights category
 * ids, required for minimization, may be NULL otherwise. out_assignments:
 * caller-provided buffer of n bytes receiving 0/1. */
int carht_assign(const char* scheme, double pi, int block_size, double coin_p,
                 const double* weights, size_t n_weights, const int* strata,
                 const int* covariates, size_t n, unsigned long long seed,
                 unsigned char* out_assignments);

/* ---- analysis ------------------------------------------------------- */
/* config_json: run configuration (estimators, design, alpha, seed, ...).
 * format: "csv" | "json". *out_text receives a heap string; release it with
 * carht_string_free. Per-estimator failures are reported inside the output,
 * not as a nonzero status. */
int carht_analyze(const carht_dataset* data, const char* config_json,
                  const char* format, char** out_text);

/* ---- simulation ----------------------------------------------------- */
/* config_json: simulation configuration. Overrides < 0 (or 0 threads) mean
 * "use the config value". */
int carht_simulate(const char* config_json, long long reps_override,
                   long long seed_override, int threads_override,
                   const char* format, char** out_text);

void carht_string_free(char* text);

#ifdef __cplusplus
}
#endif

#endif /* CARHT_H */
