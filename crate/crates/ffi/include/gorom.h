#ifndef GOROM_H
#define GOROM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes.
typedef enum {
  GOROM_STATUS_OK = 0,
  GOROM_STATUS_NULL_POINTER = 1,
  GOROM_STATUS_INVALID_ARGUMENT = 2,
  GOROM_STATUS_DOMAIN_VIOLATION = 3,
  GOROM_STATUS_NOT_SPD = 4,
  GOROM_STATUS_SINGULAR = 5,
  GOROM_STATUS_INF_SUP = 6,
  GOROM_STATUS_DEGENERATE_TEST_SPACE = 7,
  GOROM_STATUS_SHAPE = 8,
  GOROM_STATUS_CONFIG = 9,
  GOROM_STATUS_UNSUPPORTED = 10,
  GOROM_STATUS_IO = 11,
  GOROM_STATUS_PARSE = 12,
  GOROM_STATUS_EMPTY_SAMPLE = 13,
  GOROM_STATUS_PANIC = 99,
} GoromStatus;

typedef enum {
  GOROM_PROBLEM_KIND_DIFFUSION = 0,
  GOROM_PROBLEM_KIND_ADVECTION_DIFFUSION = 1,
} GoromProblemKind;

typedef enum {
  GOROM_METHOD_PRIMAL = 0,
  GOROM_METHOD_DUAL = 1,
  GOROM_METHOD_PRIMAL_DUAL = 2,
  GOROM_METHOD_SADDLE = 3,
} GoromMethod;

// A full-order model.
typedef struct GoromModel GoromModel;

// Reduced spaces bound to a model.
typedef struct GoromReduced GoromReduced;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *gorom_version(void);

// Message of the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next call into the library on the same thread.
const char *gorom_last_error(void);

// Generates a benchmark problem.
//
// # Safety
// `out` must be a valid pointer.
GoromStatus gorom_model_generate(GoromProblemKind kind,
                                 size_t n,
                                 size_t d,
                                 size_t l,
                                 uint64_t seed,
                                 GoromModel **out);

// Loads a model bundle directory.
//
// # Safety
// `dir` must be a NUL-terminated string and `out` a valid pointer.
GoromStatus gorom_model_load(const char *dir, GoromModel **out);

// Writes a model bundle directory.
//
// # Safety
// `model` must come from this library and `dir` be a NUL-terminated string.
GoromStatus gorom_model_save(GoromModel *model, const char *dir);

// # Safety
// `model` must come from this library or be NULL.
void gorom_model_free(GoromModel *model);

// Number of unknowns, parameters and outputs. Any pointer may be NULL.
//
// # Safety
// `model` must come from this library.
GoromStatus gorom_model_dims(const GoromModel *model, size_t *n, size_t *d, size_t *l);

// Full-order output at `xi` (length `d`) written to `s` (length `l`).
//
// # Safety
// Array pointers must be valid for the given lengths.
GoromStatus gorom_truth_output(const GoromModel *model,
                               const double *xi,
                               size_t xi_len,
                               double *s,
                               size_t s_len);

// Runs the greedy construction with a JSON configuration.
//
// # Safety
// `model` must come from this library, `config_json` be a NUL-terminated string.
GoromStatus gorom_reduced_build(const GoromModel *model,
                                const char *config_json,
                                GoromReduced **out);

// Loads a spaces directory against `model`.
//
// # Safety
// `model` must come from this library, `dir` be a NUL-terminated string.
GoromStatus gorom_reduced_load(const GoromModel *model, const char *dir, GoromReduced **out);

// Writes a spaces directory.
//
// # Safety
// `reduced` must come from this library, `dir` be a NUL-terminated string.
GoromStatus gorom_reduced_save(const GoromReduced *reduced, const char *dir);

// # Safety
// `reduced` must come from this library or be NULL.
void gorom_reduced_free(GoromReduced *reduced);

// Primal and dual dimensions. Either pointer may be NULL.
//
// # Safety
// `reduced` must come from this library.
GoromStatus gorom_reduced_dims(const GoromReduced *reduced, size_t *r, size_t *k);

// Reduced output at `xi`.
//
// # Safety
// Array pointers must be valid for the given lengths.
GoromStatus gorom_reduced_eval(const GoromReduced *reduced,
                               GoromMethod method,
                               const double *xi,
                               size_t xi_len,
                               double *s,
                               size_t s_len);

// Reduced output and its residual error estimate (default estimator settings).
// `s` may be NULL when `s_len` is 0; `certified` may be NULL.
//
// # Safety
// Array pointers must be valid for the given lengths.
GoromStatus gorom_reduced_estimate(const GoromReduced *reduced,
                                   GoromMethod method,
                                   const double *xi,
                                   size_t xi_len,
                                   double *s,
                                   size_t s_len,
                                   double *delta,
                                   bool *certified);

// Writes the spaces plus a greedy trace; convenience for offline runs driven from C.
//
// # Safety
// `model` must come from this library; strings must be NUL-terminated.
GoromStatus gorom_offline(const GoromModel *model, const char *config_json, const char *dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GOROM_H */
