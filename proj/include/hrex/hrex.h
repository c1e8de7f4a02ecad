/* C interface to the hrex extreme-value toolkit.
 *
 * Every call returns an hrex_status; on failure hrex_last_error() holds a
 * message for the calling thread. Component indices are 0-based here.
 * Infinite extended reals are passed as IEEE +INFINITY.
 * Strings returned through char** are owned by the caller and released
 * with hrex_string_free. */
#ifndef HREX_H
#define HREX_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define HREX_API __declspec(dllexport)
#else
#define HREX_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum hrex_status {
    HREX_OK = 0,
    HREX_INVALID_ARGUMENT = 1,
    HREX_DIMENSION_MISMATCH = 2,
    HREX_NOT_POSITIVE_SEMIDEFINITE = 3,
    HREX_EMBEDDING_NOT_PSD = 4,
    HREX_INVALID_DELTA_SPEC = 5,
    HREX_SUPPORT_TOO_LARGE = 6,
    HREX_IO = 7,
    HREX_PARSE = 8,
    HREX_INTERNAL = 9
} hrex_status;

typedef enum hrex_sampler_kind { HREX_SAMPLER_CHOLESKY = 0, HREX_SAMPLER_CIRCULANT = 1 } hrex_sampler_kind;

typedef struct hrex_delta_spec hrex_delta_spec;
typedef struct hrex_model hrex_model;
typedef struct hrex_paths hrex_paths;

HREX_API const char* hrex_version(void);
HREX_API const char* hrex_status_name(hrex_status status);
HREX_API const char* hrex_last_error(void);
HREX_API void hrex_string_free(char* s);

/* Warnings (e.g. circulant fallback) go here; NULL restores stderr. */
typedef void (*hrex_log_fn)(const char* message, void* user);
HREX_API void hrex_set_log_callback(hrex_log_fn fn, void* user);

/* Norming and closed-form limits */
HREX_API hrex_status hrex_norming_constants(uint64_t n, double* a_n, double* b_n);
HREX_API hrex_status hrex_threshold(uint64_t n, double x, double* u);
HREX_API hrex_status hrex_hlambda(double lambda, double x, double y, double* out);
HREX_API hrex_status hrex_limit_cdf(size_t d, const double* theta, const double* x, double* out);

/* Delta specs */
HREX_API hrex_status hrex_delta_spec_from_json(const char* json, hrex_delta_spec** out);
/* count entries (i[e], j[e], k[e], delta[e]); unlisted entries take default_delta. */
HREX_API hrex_status hrex_delta_spec_create(size_t d, size_t count, const size_t* i, const size_t* j,
                                            const uint64_t* k, const double* delta, double default_delta,
                                            hrex_delta_spec** out);
HREX_API void hrex_delta_spec_free(hrex_delta_spec* spec);
HREX_API size_t hrex_delta_spec_dim(const hrex_delta_spec* spec);
HREX_API hrex_status hrex_delta_spec_value(const hrex_delta_spec* spec, size_t i, size_t j, uint64_t k, double* out);

/* Correlation models */
HREX_API hrex_status hrex_model_from_json(const char* json, hrex_model** out);
HREX_API hrex_status hrex_model_hr(const hrex_delta_spec* spec, hrex_model** out);
HREX_API hrex_status hrex_model_iid(size_t d, hrex_model** out);
HREX_API void hrex_model_free(hrex_model* model);
HREX_API size_t hrex_model_dim(const hrex_model* model);
HREX_API hrex_status hrex_model_rho(const hrex_model* model, size_t i, size_t j, uint64_t k, uint64_t n,
                                    double* out);

/* Condition checkers */
HREX_API hrex_status hrex_check_long_range(const hrex_model* model, uint64_t n, uint64_t l_n, uint64_t r_n,
                                           double* out);
HREX_API hrex_status hrex_check_short_range(const hrex_model* model, uint64_t n, uint64_t m, uint64_t r_n,
                                            double* out);
HREX_API hrex_status hrex_check_simplified(const hrex_model* model, uint64_t n, uint64_t l_n, double* out);

/* {"model": {...}, "n_list": [...], "alpha": 0.25, "beta": 0.5, "m": 1} -> table JSON.
 * passed is 1 when every checker is nonincreasing along the sweep. */
HREX_API hrex_status hrex_check_json(const char* config, char** result, int* passed);

/* Extremal coefficients */
typedef struct hrex_theta_estimate {
    double value;
    double std_error;
    uint64_t samples;
    uint64_t truncation_K;
} hrex_theta_estimate;

typedef struct hrex_theta_options {
    uint64_t samples;
    uint64_t seed;
    unsigned threads;
    int has_max_lag;
    uint64_t max_lag;
} hrex_theta_options;

HREX_API hrex_theta_options hrex_theta_options_default(void);

/* doubled/has_doubled may be NULL; when the constraint set was truncated,
 * *has_doubled is set and *doubled holds the estimate at twice the lag. */
HREX_API hrex_status hrex_theta(const hrex_delta_spec* spec, size_t target, const double* x,
                                const hrex_theta_options* options, hrex_theta_estimate* estimate,
                                hrex_theta_estimate* doubled, int* has_doubled);
HREX_API hrex_status hrex_theta_oracle_single(double delta, double shift, double* out);
HREX_API hrex_status hrex_theta_bivariate_closed_form(double lambda, double x1, double x2, double* theta1,
                                                      double* theta2);

/* {"delta": {...}, "i": 1, "x": [...], "K": 4?, "samples": N, "seed": s} -> ThetaEstimate JSON */
HREX_API hrex_status hrex_theta_json(const char* config, unsigned threads, char** result);

/* Path sampling */
HREX_API hrex_status hrex_sample(const hrex_model* model, uint64_t n, hrex_sampler_kind kind, uint64_t seed,
                                 uint64_t first, uint64_t count, hrex_paths** out);
HREX_API void hrex_paths_free(hrex_paths* paths);
HREX_API size_t hrex_paths_count(const hrex_paths* paths);
HREX_API size_t hrex_paths_length(const hrex_paths* paths);
HREX_API size_t hrex_paths_dim(const hrex_paths* paths);
/* Row-major length x dim values of path index. */
HREX_API const double* hrex_paths_data(const hrex_paths* paths, size_t index);
HREX_API hrex_status hrex_paths_write(const hrex_paths* paths, size_t index, const char* file);

/* Experiments */

/* Experiment config JSON -> CSV table and JSON summary; passed reflects the
 * trend verdict and the optional final-deviation bound. */
HREX_API hrex_status hrex_converge_json(const char* config, char** csv, char** summary, int* passed);

typedef struct hrex_lemma1_result {
    double lhs;
    double rhs;
    double difference;
    uint64_t atoms;
    uint64_t mismatched_atoms;
} hrex_lemma1_result;

/* Independent cells, row-major n x d. Cell c has support_sizes[c] atoms,
 * stored consecutively in values/probabilities. */
HREX_API hrex_status hrex_lemma1_product(size_t n, size_t d, const size_t* support_sizes, const double* values,
                                         const double* probabilities, const double* thresholds,
                                         hrex_lemma1_result* out);

/* {"n", "d", "cell": {"values", "probabilities"} | "cells": [...], "thresholds": [...]}
 * -> result JSON; passed when difference <= 1e-12 and no atom mismatches. */
HREX_API hrex_status hrex_lemma1_json(const char* config, char** result, int* passed);

typedef struct hrex_block_result {
    double full_prob;
    double block_prob;
    double block_prob_power;
    double gap;
    double std_error;
    uint64_t q_n;
} hrex_block_result;

HREX_API hrex_status hrex_block_check(const hrex_model* model, uint64_t n, uint64_t r_n, uint64_t replicates,
                                      const double* x, hrex_sampler_kind kind, uint64_t seed, unsigned threads,
                                      hrex_block_result* out);

#ifdef __cplusplus
}
#endif

#endif
