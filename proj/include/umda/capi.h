/* SPDX-License-Identifier: Apache-2.0
 * Copyright (c) 2026 umda contributors
 *
 * C interface of the umda shared library: multi-domain adaptive tracking on
 * synthetic weather-corrupted sequences. Handles are opaque; every function
 * returns a status code (UMDA_OK on success) and leaves a human-readable
 * message in umda_last_error() on failure.
 */

#ifndef UMDA_CAPI_H
#define UMDA_CAPI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define UMDA_API __declspec(dllexport)
#else
#define UMDA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

enum umda_status {
    UMDA_OK = 0,
    UMDA_ERR_INVALID_ARGUMENT = 1,
    UMDA_ERR_DIMENSION = 2,
    UMDA_ERR_VALIDATION = 3,
    UMDA_ERR_NUMERIC = 4,
    UMDA_ERR_CONFIG = 5,
    UMDA_ERR_IO = 6,
    UMDA_ERR_UNKNOWN = 7
};

UMDA_API const char* umda_version(void);
/* Thread-local message describing the most recent failure in this thread. */
UMDA_API const char* umda_last_error(void);
UMDA_API const char* umda_status_name(int status);

/* ------------------------------------------------------------------ */
/* Configuration (flat key=value store with typed readers downstream)  */
/* ------------------------------------------------------------------ */

typedef struct umda_config umda_config;

UMDA_API umda_config* umda_config_create(void);
UMDA_API umda_config* umda_config_load(const char* path);
UMDA_API void umda_config_free(umda_config* cfg);
UMDA_API int umda_config_set(umda_config* cfg, const char* key, const char* value);
/* Copies the value into buf (NUL-terminated); fails if absent or too long. */
UMDA_API int umda_config_get(const umda_config* cfg, const char* key, char* buf, size_t buf_len);
/* 16 lowercase hex characters + NUL. */
UMDA_API int umda_config_fingerprint(const umda_config* cfg, char* buf, size_t buf_len);

/* ------------------------------------------------------------------ */
/* Data generation and weather synthesis                               */
/* ------------------------------------------------------------------ */

/* Writes labeled source sequences (PPM frames + groundtruth.txt) under
 * out_dir/seq_0000, seq_0001, ... */
UMDA_API int umda_gen_data(const umda_config* cfg, uint64_t seed, const char* out_dir);

/* Corrupts one sequence directory into out_dir with a per-frame manifest
 * (kind, parameters, seed, ssim). domain is "fog", "dark" or "rain". */
UMDA_API int umda_synth(const umda_config* cfg, const char* domain, uint64_t seed,
                        const char* seq_dir, const char* out_dir);

/* ------------------------------------------------------------------ */
/* Training                                                            */
/* ------------------------------------------------------------------ */

/* Stage 1: teacher-student adaptive training. Writes config.txt,
 * metrics.log, checkpoint.bin and EMA snapshots into out_dir. */
UMDA_API int umda_train_backbone(const umda_config* cfg, uint64_t seed, const char* out_dir);

/* Stage 2: frozen-backbone adapter training for one domain, starting from a
 * stage-1 checkpoint. */
UMDA_API int umda_train_dca(const umda_config* cfg, uint64_t seed, const char* checkpoint_path,
                            const char* domain, const char* out_dir);

/* ------------------------------------------------------------------ */
/* Evaluation and harnesses                                            */
/* ------------------------------------------------------------------ */

typedef struct umda_eval_metrics {
    double auc;
    double precision;
    double ao;
    double sr50;
    double sr75;
    int32_t frames;
} umda_eval_metrics;

/* One-pass evaluation of a checkpoint on held-out sequences of the domain
 * ("source", "fog", "dark", "rain"). Uses the adapter group for the domain
 * when the checkpoint carries one. When out_dir is non-NULL, writes
 * success_curve.csv and summary.json there. */
UMDA_API int umda_eval(const umda_config* cfg, uint64_t seed, const char* checkpoint_path,
                       const char* domain, const char* out_dir, umda_eval_metrics* out);

/* Trains and evaluates the named presets (comma-separated, e.g.
 * "baseline,tca,full") across seeds (comma-separated integers); writes the
 * median/spread table as CSV. */
UMDA_API int umda_ablate(const umda_config* cfg, const char* presets_csv, const char* seeds_csv,
                         const char* out_csv);

/* Sinkhorn-vs-exact-LP sweep; CSV columns n, epsilon, sinkhorn_cost,
 * lp_cost, gap, iters. */
UMDA_API int umda_ot_bench(const umda_config* cfg, uint64_t seed, const char* out_csv);

/* Finite-difference audit of all differentiable blocks. Writes the report
 * into report_buf (truncated if needed) and sets *all_passed to 0/1. */
UMDA_API int umda_grad_check(uint64_t seed, char* report_buf, size_t buf_len, int32_t* all_passed);

/* ------------------------------------------------------------------ */
/* Direct numeric entry points                                         */
/* ------------------------------------------------------------------ */

/* Entropic OT via log-domain Sinkhorn. cost is n*n row-major; a and b are
 * positive marginals summing to 1. Any output pointer may be NULL. plan_out
 * needs n*n doubles; mu_out/nu_out need n doubles. */
UMDA_API int umda_sinkhorn(int32_t n, const double* cost, const double* a, const double* b,
                           double epsilon, int32_t max_iter, double tol, double* plan_out,
                           double* mu_out, double* nu_out, int32_t* iterations_out,
                           double* residual_out, int32_t* converged_out);

/* Exact transport optimum for n <= 6 (simplex oracle). */
UMDA_API int umda_lp_optimum(int32_t n, const double* cost, const double* a, const double* b,
                             double* cost_out, double* plan_out);

/* Mean SSIM between two interleaved-RGB [0,1] images. */
UMDA_API int umda_ssim(int32_t width, int32_t height, const double* rgb_a, const double* rgb_b,
                       double* ssim_out);

#ifdef __cplusplus
}
#endif

#endif /* UMDA_CAPI_H */
