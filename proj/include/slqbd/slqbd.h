#ifndef SLQBD_H
#define SLQBD_H

/* C API of the level-structured QBD solver library.
 *
 * All functions return slqbd_status; every non-OK return leaves a
 * human-readable message in slqbd_last_error() (thread-local). Handles are
 * opaque; free them with the matching *_free call. String outputs copy
 * into a caller buffer and are always NUL-terminated (truncating).
 */

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum {
  SLQBD_OK = 0,
  /* Structural precondition fails: the requested method does not apply. */
  SLQBD_ERR_APPLICABILITY = 2,
  /* The method applies but the computation broke down. */
  SLQBD_ERR_NUMERICAL = 3,
  /* Malformed or inconsistent input. */
  SLQBD_ERR_INPUT = 4,
} slqbd_status;

typedef struct slqbd_model slqbd_model;
typedef struct slqbd_chain slqbd_chain;
typedef struct slqbd_result slqbd_result;

const char* slqbd_version(void);
const char* slqbd_last_error(void);

/* Model handling. JSON schema: {"family": "...", "params": {...},
 * "truncation": {"levels": N, "stages": K}}, plus "batch1"/"batch2" for
 * batch-priority and "blocks" for raw input. */
slqbd_status slqbd_model_from_json(const char* json_text, slqbd_model** out);
slqbd_status slqbd_model_from_file(const char* path, slqbd_model** out);
slqbd_status slqbd_model_set_truncation(slqbd_model* model, int levels,
                                        int stages);
/* Offered load of the unbounded model; NaN for raw block input. */
slqbd_status slqbd_model_offered_load(const slqbd_model* model,
                                      double* out_load);
void slqbd_model_free(slqbd_model* model);

/* Chain handling. */
slqbd_status slqbd_chain_build(const slqbd_model* model, slqbd_chain** out);
void slqbd_chain_free(slqbd_chain* chain);
slqbd_status slqbd_chain_num_levels(const slqbd_chain* chain, int* out);
slqbd_status slqbd_chain_stages_at(const slqbd_chain* chain, int level,
                                   int* out);
/* SLQBD_OK when the chain is a well-formed generator with single-entrance
 * down-blocks; SLQBD_ERR_APPLICABILITY otherwise, with the violation
 * summary copied into buf. */
slqbd_status slqbd_chain_validate(const slqbd_chain* chain, char* buf,
                                  size_t buflen);
/* Copies "qdesa", "qdesa+", or "qdesa++" into buf. */
slqbd_status slqbd_chain_classify(const slqbd_chain* chain, char* buf,
                                  size_t buflen);
slqbd_status slqbd_chain_num_warnings(const slqbd_chain* chain, int* out);
slqbd_status slqbd_chain_warning(const slqbd_chain* chain, int index,
                                 char* buf, size_t buflen);
/* Interior jump probabilities in the order {up_down, up_flat, up_up,
 * stage_up, stage_down}, plus the uniformization rate. */
slqbd_status slqbd_chain_jump_probabilities(const slqbd_chain* chain,
                                            double out_phi[5],
                                            double* out_exit_rate);

/* Solving. method: "auto", "qdesa", "qdesa+", "qdesa++", "lpca",
 * "direct". "auto" picks the most specialized applicable analytic lane
 * and falls back to the direct solve. */
slqbd_status slqbd_solve(const slqbd_chain* chain, const char* method,
                         slqbd_result** out);
void slqbd_result_free(slqbd_result* result);
slqbd_status slqbd_result_method(const slqbd_result* result, char* buf,
                                 size_t buflen);
slqbd_status slqbd_result_residual(const slqbd_result* result, double* out);
slqbd_status slqbd_result_truncation_mass(const slqbd_result* result,
                                          double* out);
slqbd_status slqbd_result_seconds(const slqbd_result* result, double* out);
/* Spectral radius of the repeating interior (NaN when not defined). */
slqbd_status slqbd_result_spectral_radius(const slqbd_result* result,
                                          double* out);
slqbd_status slqbd_result_num_levels(const slqbd_result* result, int* out);
slqbd_status slqbd_result_stages_at(const slqbd_result* result, int level,
                                    int* out);
/* Steady-state probability of (level, stage), level-major regardless of
 * how the method laid out its blocks internally. */
slqbd_status slqbd_result_probability(const slqbd_result* result, int level,
                                      int stage, double* out);
slqbd_status slqbd_result_level_mass(const slqbd_result* result, int level,
                                     double* out);

/* Benchmark kernels. Timing covers exactly one run of the kernel;
 * residuals are computed outside the timed window. The inverse kernels
 * act on the constant-coefficient interior block assembled from the given
 * rates; the rate-row kernel takes jump probabilities in the same order
 * as slqbd_chain_jump_probabilities. */
slqbd_status slqbd_bench_structured_inverse(int n, double up, double down,
                                            double surplus, double exit_rate,
                                            double* out_seconds,
                                            double* out_residual);
slqbd_status slqbd_bench_dense_inverse(int n, double up, double down,
                                       double surplus, double exit_rate,
                                       double* out_seconds,
                                       double* out_residual);
slqbd_status slqbd_bench_rate_row(const double phi[5], int dim,
                                  double* out_seconds, double* out_residual);

#ifdef __cplusplus
}
#endif

#endif /* SLQBD_H */
