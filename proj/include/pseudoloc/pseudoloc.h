/* SPDX-License-Identifier: Apache-2.0
 *
 * C interface. All handles are opaque; every call returns a status and
 * writes results through out-pointers. The message of the last failure on
 * the calling thread is available from pl_last_error().
 *
 * Text outputs follow one convention: *len receives the length without the
 * terminating NUL. With buf == NULL only the length is reported; a buffer
 * shorter than *len + 1 yields PL_ERR_BUFFER and is left untouched.
 */
#ifndef PSEUDOLOC_H
#define PSEUDOLOC_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PL_API __declspec(dllexport)
#else
#define PL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum pl_status {
  PL_OK = 0,
  PL_ERR_DOMAIN = 1,       /* kernel on the diagonal, singular integral */
  PL_ERR_PRECONDITION = 2, /* invalid argument */
  PL_ERR_WINDOW = 3,       /* dyadic level outside the window */
  PL_ERR_NUMERIC = 4,      /* quadrature or truncation budget exhausted */
  PL_ERR_INVARIANT = 5,
  PL_ERR_PARSE = 6,
  PL_ERR_IO = 7,
  PL_ERR_NULL = 8,   /* required pointer argument was NULL */
  PL_ERR_BUFFER = 9, /* output buffer too small */
  PL_ERR_INTERNAL = 10
} pl_status;

typedef struct pl_kernel pl_kernel;
typedef struct pl_expansion pl_expansion;
typedef struct pl_config pl_config;
typedef struct pl_result pl_result;

/* One CSV row; strings stay valid as long as the owning result. */
typedef struct pl_row {
  const char* experiment;
  const char* kernel;
  int n;
  double gamma;
  double p;
  int s;
  int f_id;
  double ratio;
  double tail_budget;
  const char* status;
} pl_row;

PL_API const char* pl_version(void);
PL_API const char* pl_status_name(pl_status status);
PL_API const char* pl_last_error(void);

/* Kernels: "hilbert1d", "weierstrass1d", "smooth2d". */
PL_API pl_status pl_kernel_create(const char* family, double gamma, double scale, pl_kernel** out);
PL_API void pl_kernel_destroy(pl_kernel* k);
PL_API pl_status pl_kernel_dim(const pl_kernel* k, int* out);
PL_API pl_status pl_kernel_scale(const pl_kernel* k, double* out);
/* x and y hold dim coordinates each. */
PL_API pl_status pl_kernel_eval(const pl_kernel* k, const double* x, const double* y, double* out);
PL_API pl_status pl_kernel_estimates(const pl_kernel* k, size_t samples, uint64_t seed, double* c_size,
                                     double* c_holder);
/* Rescales in place so both constants are at most 1. */
PL_API pl_status pl_kernel_normalize(pl_kernel* k, size_t samples, uint64_t seed);

/* Finite Haar expansions; text lines "k:(m...) eta=<bits> alpha=<decimal>". */
PL_API pl_status pl_expansion_create(int dim, pl_expansion** out);
PL_API pl_status pl_expansion_parse(const char* text, pl_expansion** out);
PL_API void pl_expansion_destroy(pl_expansion* f);
/* index holds dim integers; eta is the signature bit mask (nonzero). */
PL_API pl_status pl_expansion_add(pl_expansion* f, int level, const int64_t* index, uint32_t eta, double alpha);
PL_API pl_status pl_expansion_size(const pl_expansion* f, size_t* out);
PL_API pl_status pl_expansion_lp_norm(const pl_expansion* f, double p, double* out);
PL_API pl_status pl_expansion_text(const pl_expansion* f, char* buf, size_t cap, size_t* len);

/* Tf(x) for x off the support of f. */
PL_API pl_status pl_apply(const pl_kernel* k, const pl_expansion* f, const double* x, double* out);
/* T_eps f(x), eps > 0. */
PL_API pl_status pl_apply_truncated(const pl_kernel* k, const pl_expansion* f, double eps, const double* x,
                                    double* out);
/* <h^theta_J, T_eps h^eta_I>; eps == 0 needs disjoint cubes. */
PL_API pl_status pl_haar_pairing(const pl_kernel* k, int level_j, const int64_t* index_j, uint32_t theta,
                                 int level_i, const int64_t* index_i, uint32_t eta, double eps, double* out);
/* Midpoint sum with 2^res points per axis over the bounding box of f. */
PL_API pl_status pl_oracle_apply(const pl_kernel* k, const pl_expansion* f, const double* x, double eps, int res,
                                 double* out);

/* Exceptional set as space-separated cubes. */
PL_API pl_status pl_sigma_text(const pl_expansion* f, int s, char* buf, size_t cap, size_t* len);
PL_API pl_status pl_sigma_measure(const pl_expansion* f, int s, double* out);
/* Norm of Tf over the box of radius R (0 = automatic) minus the exceptional
 * set, and a bound for the part outside the box. */
PL_API pl_status pl_restricted_norm(const pl_kernel* k, const pl_expansion* f, int s, double p, double R,
                                    double* norm, double* tail);

/* Experiment configuration: flat key=value text. */
PL_API pl_status pl_config_create(pl_config** out);
PL_API pl_status pl_config_parse(const char* text, pl_config** out);
PL_API pl_status pl_config_load(const char* path, pl_config** out);
PL_API void pl_config_destroy(pl_config* cfg);
PL_API pl_status pl_config_set(pl_config* cfg, const char* key, const char* value);
/* Value of the "output" key (empty when unset). */
PL_API pl_status pl_config_output(const pl_config* cfg, char* buf, size_t cap, size_t* len);
PL_API pl_status pl_config_describe(const pl_config* cfg, char* buf, size_t cap, size_t* len);

/* Commands: decay, decompose-check, kernel-check, haar-check, sigma-dump,
 * figiel-sum, oracle. */
PL_API size_t pl_command_count(void);
PL_API const char* pl_command_name(size_t i);
PL_API pl_status pl_run(const char* command, const pl_config* cfg, pl_result** out);
PL_API void pl_result_destroy(pl_result* r);
/* 0 all PASS, 1 numeric budget, 2 invariant violation. */
PL_API int pl_result_exit_code(const pl_result* r);
PL_API size_t pl_result_row_count(const pl_result* r);
PL_API pl_status pl_result_row(const pl_result* r, size_t i, pl_row* out);
PL_API pl_status pl_result_csv(const pl_result* r, char* buf, size_t cap, size_t* len);
PL_API pl_status pl_result_report(const pl_result* r, char* buf, size_t cap, size_t* len);
PL_API pl_status pl_result_write_csv(const pl_result* r, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* PSEUDOLOC_H */
