#ifndef MODCLUST_H
#define MODCLUST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Status codes; the non-zero input/numeric/evaluation codes match the CLI exit codes.
typedef enum McStatus {
  MC_STATUS_OK = 0,
  MC_STATUS_INPUT_ERROR = 2,
  MC_STATUS_NUMERIC_ERROR = 3,
  MC_STATUS_DEGENERATE_EVALUATION = 4,
  MC_STATUS_NULL_ARGUMENT = 10,
  MC_STATUS_INVALID_UTF8 = 11,
  MC_STATUS_PANIC = 12,
} McStatus;

typedef enum McMetric {
  MC_METRIC_PCC = 0,
  MC_METRIC_DCC = 1,
  MC_METRIC_MI1 = 2,
  MC_METRIC_MI2 = 3,
  MC_METRIC_MI3 = 4,
} McMetric;

typedef struct McCorrelation McCorrelation;

typedef struct McDendrogram McDendrogram;

typedef struct McExpression McExpression;

typedef struct McModules McModules;

// Pairwise confusion counts and scores.
typedef struct McScores {
  uint64_t tp;
  uint64_t fp;
  uint64_t tn;
  uint64_t fn_;
  double precision;
  double recall;
  double f;
} McScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next failing call on the same thread.
const char *mc_last_error(void);

// Reads an expression table (genes as rows unless `samples_as_rows`).
//
// # Safety
// `file` must be a NUL-terminated string; `out` must be writable.
enum McStatus mc_expression_read(const char *file, bool samples_as_rows, struct McExpression **out);

// Builds an expression matrix from gene-major values (`n_genes · n_samples`
// doubles). Samples are named `S1`, `S2`, ...
//
// # Safety
// `genes` must point to `n_genes` NUL-terminated strings and `values` to
// `n_genes · n_samples` doubles.
enum McStatus mc_expression_new(const char *const *genes,
                                size_t n_genes,
                                const double *values,
                                size_t n_samples,
                                struct McExpression **out);

// # Safety
// `expr` must be NULL or a handle from this library not yet freed.
void mc_expression_free(struct McExpression *expr);

// # Safety
// `expr` must be a live handle.
size_t mc_expression_n_genes(const struct McExpression *expr);

// Observed correlation matrix with default discretization and bins.
//
// # Safety
// `expr` must be a live handle; `out` must be writable.
enum McStatus mc_correlation_build(const struct McExpression *expr,
                                   enum McMetric metric,
                                   struct McCorrelation **out);

// # Safety
// `file` must be a NUL-terminated string; `out` must be writable.
enum McStatus mc_correlation_read(const char *file, struct McCorrelation **out);

// # Safety
// `corr` must be a live handle; `file` a NUL-terminated string.
enum McStatus mc_correlation_write(const struct McCorrelation *corr, const char *file);

// # Safety
// `corr` must be NULL or a handle from this library not yet freed.
void mc_correlation_free(struct McCorrelation *corr);

// # Safety
// `corr` must be a live handle.
size_t mc_correlation_n(const struct McCorrelation *corr);

// # Safety
// `corr` must be a live handle; `value` must be writable.
enum McStatus mc_correlation_get(const struct McCorrelation *corr,
                                 size_t i,
                                 size_t j,
                                 double *value);

// Global prior incorporation. `rho_hat` in [0, 1]: 0 trusts the priors
// fully, 1 leaves the matrix unchanged.
//
// # Safety
// `corr` and `priors` must be live handles; `out` must be writable.
enum McStatus mc_correlation_supervise(const struct McCorrelation *corr,
                                       const struct McModules *priors,
                                       double rho_hat,
                                       struct McCorrelation **out);

// Deconvolution with automatic scaling and rescaled output.
//
// # Safety
// `corr` must be a live handle; `out` must be writable.
enum McStatus mc_correlation_deconvolve(const struct McCorrelation *corr,
                                        double delta,
                                        struct McCorrelation **out);

// # Safety
// `corr` must be a live handle; `out` must be writable.
enum McStatus mc_single_linkage(const struct McCorrelation *corr, struct McDendrogram **out);

// # Safety
// `tree` must be a live handle; `file` a NUL-terminated string.
enum McStatus mc_dendrogram_write(const struct McDendrogram *tree, const char *file);

// # Safety
// `tree` must be NULL or a handle from this library not yet freed.
void mc_dendrogram_free(struct McDendrogram *tree);

// Flat modules at similarity threshold `epsilon`.
//
// # Safety
// `tree` must be a live handle; `out` must be writable.
enum McStatus mc_cut(const struct McDendrogram *tree, double epsilon, struct McModules **out);

// AUC of the threshold sweep of `tree` against `gold`.
//
// # Safety
// `corr` and `gold` must be live handles; `auc` must be writable.
enum McStatus mc_sweep_auc(const struct McCorrelation *corr,
                           double step,
                           const struct McModules *gold,
                           double *auc);

// Reads a module file (GMT-like); overlap is detected automatically.
//
// # Safety
// `file` must be a NUL-terminated string; `out` must be writable.
enum McStatus mc_modules_read(const char *file, struct McModules **out);

// # Safety
// `modules` must be a live handle; `file` a NUL-terminated string.
enum McStatus mc_modules_write(const struct McModules *modules, const char *file);

// # Safety
// `modules` must be a live handle.
size_t mc_modules_len(const struct McModules *modules);

// # Safety
// `modules` must be NULL or a handle from this library not yet freed.
void mc_modules_free(struct McModules *modules);

// Pairwise scores of `pred` against `gold`.
//
// # Safety
// `pred` and `gold` must be live handles; `out` must be writable.
enum McStatus mc_evaluate(const struct McModules *pred,
                          const struct McModules *gold,
                          struct McScores *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MODCLUST_H */
