/* C interface for the hypersense tuning-sensitivity library.
* Generated from the Rust sources; do not edit by hand. */

#ifndef HYPERSENSE_H
#define HYPERSENSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of a fallible call.
 */
typedef enum HsStatus {
  HsOk = 0,
  /**
   * A required pointer argument was null.
   */
  HsNullArg = 1,
  /**
   * The input failed validation; see `hs_last_error`.
   */
  HsInvalidInput = 2,
  /**
   * The computation failed on valid input; see `hs_last_error`.
   */
  HsFailed = 3,
  /**
   * An internal panic was caught; see `hs_last_error`.
   */
  HsPanic = 4,
} HsStatus;

/**
 * Streaming per-dimension observation normalizer. Opaque.
 */
typedef struct HsObsNorm HsObsNorm;

/**
 * A parsed, validated set of runs. Opaque.
 */
typedef struct HsRunSet HsRunSet;

/**
 * Streaming percentile scaler for advantages. Opaque.
 */
typedef struct HsScaler HsScaler;

/**
 * Normalized scores over retained cells. Opaque.
 */
typedef struct HsScoreTable HsScoreTable;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static nul-terminated string. Never freed.
 */
const char *hs_version(void);

/**
 * Message behind the most recent failure on this thread. Valid until the
 * next library call on the same thread. Never freed by the caller.
 */
const char *hs_last_error(void);

/**
 * Frees a string returned through an out pointer.
 *
 * # Safety
 * `s` must be null or exactly as returned by this library.
 */
void hs_string_free(char *s);

/**
 * Parses JSONL run records (the same dialect the CLI reads) into a run
 * set, inferring the grid from the values present. `metric` is `"auc"`,
 * `"final:<window>"`, or null for the default.
 *
 * # Safety
 * `text` must be a valid nul-terminated string; `out` must be valid.
 */
enum HsStatus hs_runs_parse_jsonl(const char *text, const char *metric, struct HsRunSet **out);

/**
 * Number of runs in a set; -1 if the handle is null.
 *
 * # Safety
 * `runs` must be null or a valid handle.
 */
int64_t hs_runs_len(const struct HsRunSet *runs);

/**
 * Grid axes as a JSON object of name to value array. Free the string
 * with `hs_string_free`.
 *
 * # Safety
 * `runs` must be a valid handle; `out` must be valid.
 */
enum HsStatus hs_runs_space_json(const struct HsRunSet *runs, char **out);

/**
 * # Safety
 * `runs` must be null or exactly as returned by `hs_runs_parse_jsonl`.
 */
void hs_runs_free(struct HsRunSet *runs);

/**
 * Aggregates runs into cells, drops cells past the divergence threshold,
 * and normalizes the rest into per-environment percentile bands.
 *
 * # Safety
 * `runs` must be a valid handle; `out` must be valid.
 */
enum HsStatus hs_scores_build(const struct HsRunSet *runs,
                              double div_threshold,
                              double q_lo,
                              double q_hi,
                              struct HsScoreTable **out);

/**
 * # Safety
 * `scores` must be null or exactly as returned by `hs_scores_build`.
 */
void hs_scores_free(struct HsScoreTable *scores);

/**
 * Tuning sensitivity of one algorithm as a JSON report (fields include
 * `phi`, `per_env_tuned`, `cross_env_tuned`, argmax coordinates). Free
 * the string with `hs_string_free`.
 *
 * # Safety
 * `scores` and `alg` must be valid; `out` must be valid.
 */
enum HsStatus hs_sensitivity_json(const struct HsScoreTable *scores, const char *alg, char **out);

/**
 * Effective-dimensionality curve of one algorithm as JSON (fields include
 * `d` and per-size best subsets). Free the string with `hs_string_free`.
 *
 * # Safety
 * `scores` and `alg` must be valid; `out` must be valid.
 */
enum HsStatus hs_dimensionality_json(const struct HsScoreTable *scores,
                                     const char *alg,
                                     double threshold_fraction,
                                     char **out);

/**
 * sign(x) * ln(|x| + 1).
 */
double hs_symlog(double x);

/**
 * Inverse of `hs_symlog`.
 */
double hs_symexp(double x);

/**
 * Region of the performance-sensitivity plane relative to a reference:
 * 0 boundary, 1-5 the numbered regions, 6 unclassified, -1 on non-finite
 * input.
 */
int32_t hs_classify_region(double ref_phi, double ref_perf, double phi, double perf, double tol);

/**
 * Plain percentile scaler; fails on a zero spread. `decay` in (0, 1).
 *
 * # Safety
 * `out` must be valid.
 */
enum HsStatus hs_scaler_new(double decay, struct HsScaler **out);

/**
 * Lower-bounded percentile scaler: the divisor never falls below `bound`.
 *
 * # Safety
 * `out` must be valid.
 */
enum HsStatus hs_scaler_new_bounded(double decay, double bound, struct HsScaler **out);

/**
 * Folds a batch of returns into the scaler's band and writes the scaled
 * advantages to `out`, which must hold `n_advantages` doubles.
 *
 * # Safety
 * `scaler` must be a valid handle; `returns` and `advantages` must point
 * to arrays of the stated lengths; `out` must hold `n_advantages` values.
 */
enum HsStatus hs_scaler_scale(struct HsScaler *scaler,
                              const double *returns,
                              uintptr_t n_returns,
                              const double *advantages,
                              uintptr_t n_advantages,
                              double *out);

/**
 * # Safety
 * `scaler` must be null or exactly as returned by a scaler constructor.
 */
void hs_scaler_free(struct HsScaler *scaler);

/**
 * Streaming observation normalizer; the first observation fixes the
 * dimensionality. `eps` must be positive.
 *
 * # Safety
 * `out` must be valid.
 */
enum HsStatus hs_obsnorm_new(double eps, struct HsObsNorm **out);

/**
 * Folds one observation into the running statistics and writes its
 * normalized form to `out`, which must hold `len` doubles.
 *
 * # Safety
 * `norm` must be a valid handle; `obs` must point to `len` values; `out`
 * must hold `len` values.
 */
enum HsStatus hs_obsnorm_normalize(struct HsObsNorm *norm,
                                   const double *obs,
                                   uintptr_t len,
                                   double *out);

/**
 * # Safety
 * `norm` must be null or exactly as returned by `hs_obsnorm_new`.
 */
void hs_obsnorm_free(struct HsObsNorm *norm);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HYPERSENSE_H */
