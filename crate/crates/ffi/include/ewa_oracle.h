#ifndef EWA_ORACLE_H
#define EWA_ORACLE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stddef.h>
#include <stdint.h>

typedef enum EwaStatus {
  EWA_STATUS_OK = 0,
  EWA_STATUS_INVALID_INPUT = 1,
  EWA_STATUS_DIMENSION_MISMATCH = 2,
  EWA_STATUS_UNSUPPORTED = 3,
  EWA_STATUS_NULL_POINTER = 4,
  /*
   The operation ran but a verdict in its report failed.
   */
  EWA_STATUS_VERIFICATION_FAILED = 5,
  EWA_STATUS_PANIC = 6,
} EwaStatus;

/*
 Finite dictionary of atoms in `R^n`.
 */
typedef struct EwaDictionary EwaDictionary;

/*
 Probability vector on the dictionary indices.
 */
typedef struct EwaWeights EwaWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer stays
 valid until the next call into this library on the same thread.
 */
const char *ewa_last_error_message(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *ewa_version(void);

/*
 Builds a dictionary from `m` rows of `n` doubles.

 # Safety
 `data` must point to `m * n` readable doubles and `out` must be writable.
 */
enum EwaStatus ewa_dictionary_new(const double *data,
                                  uintptr_t m,
                                  uintptr_t n,
                                  struct EwaDictionary **out);

/*
 # Safety
 `dict` must be NULL or a handle from [`ewa_dictionary_new`] not yet freed.
 */
void ewa_dictionary_free(struct EwaDictionary *dict);

/*
 Number of atoms, or 0 for NULL.

 # Safety
 `dict` must be NULL or a live handle.
 */
uintptr_t ewa_dictionary_len(const struct EwaDictionary *dict);

/*
 Dimension of the atoms, or 0 for NULL.

 # Safety
 `dict` must be NULL or a live handle.
 */
uintptr_t ewa_dictionary_dim(const struct EwaDictionary *dict);

/*
 Largest coordinate-wise spread of the atoms.

 # Safety
 `dict` must be a live handle and `out` writable.
 */
enum EwaStatus ewa_dictionary_sup_diameter(const struct EwaDictionary *dict, double *out);

/*
 Validated probability vector (nonnegative, sum 1 within 1e-12).

 # Safety
 `weights` must point to `m` readable doubles and `out` must be writable.
 */
enum EwaStatus ewa_weights_new(const double *weights, uintptr_t m, struct EwaWeights **out);

/*
 Uniform weights on `m` atoms.

 # Safety
 `out` must be writable.
 */
enum EwaStatus ewa_weights_uniform(uintptr_t m, struct EwaWeights **out);

/*
 Point mass on atom `j` of `m`.

 # Safety
 `out` must be writable.
 */
enum EwaStatus ewa_weights_dirac(uintptr_t m, uintptr_t j, struct EwaWeights **out);

/*
 # Safety
 `w` must be NULL or a weights handle not yet freed.
 */
void ewa_weights_free(struct EwaWeights *w);

/*
 Number of weights, or 0 for NULL.

 # Safety
 `w` must be NULL or a live handle.
 */
uintptr_t ewa_weights_len(const struct EwaWeights *w);

/*
 Copies the weights into `out`, which must hold exactly `len` doubles.

 # Safety
 `w` must be a live handle and `out` must point to `len` writable doubles.
 */
enum EwaStatus ewa_weights_copy(const struct EwaWeights *w, double *out, uintptr_t len);

/*
 Posterior weights of the observation `y` (length `n`) at temperature
 `beta`; `beta = INFINITY` returns the prior.

 # Safety
 Handles must be live, `y` must point to `n` doubles and `out` be writable.
 */
enum EwaStatus ewa_posterior_weights(const struct EwaDictionary *dict,
                                     const double *y,
                                     uintptr_t n,
                                     const struct EwaWeights *prior,
                                     double beta,
                                     struct EwaWeights **out);

/*
 Weighted average of the atoms, written to `out` (length `n`).

 # Safety
 Handles must be live and `out` must point to `n` writable doubles.
 */
enum EwaStatus ewa_aggregate(const struct EwaDictionary *dict,
                             const struct EwaWeights *weights,
                             double *out,
                             uintptr_t n);

/*
 EWA estimate of the observation `y`, written to `out`; both have length `n`.

 # Safety
 Handles must be live; `y` and `out` must point to `n` doubles each.
 */
enum EwaStatus ewa_estimate(const struct EwaDictionary *dict,
                            const double *y,
                            const struct EwaWeights *prior,
                            double beta,
                            double *out,
                            uintptr_t n);

/*
 `sum_j w_j ||theta_j - mean||^2`.

 # Safety
 Handles must be live and `out` writable.
 */
enum EwaStatus ewa_posterior_variance(const struct EwaDictionary *dict,
                                      const struct EwaWeights *weights,
                                      double *out);

/*
 `KL(p || q)`; `INFINITY` when `p` charges an atom `q` does not.

 # Safety
 Handles must be live and `out` writable.
 */
enum EwaStatus ewa_kl_divergence(const struct EwaWeights *p,
                                 const struct EwaWeights *q,
                                 double *out);

/*
 `sum_j w_j ||y - theta_j||^2 + beta KL(w || prior)`.

 # Safety
 Handles must be live, `y` must point to `n` doubles and `out` be writable.
 */
enum EwaStatus ewa_gibbs_objective(const struct EwaWeights *weights,
                                   const double *y,
                                   uintptr_t n,
                                   const struct EwaDictionary *dict,
                                   const struct EwaWeights *prior,
                                   double beta,
                                   double *out);

/*
 `min_j ||theta_j - truth||^2 + beta log(1 / prior_j)`.

 # Safety
 Handles must be live, `truth` must point to `n` doubles and `out` be writable.
 */
enum EwaStatus ewa_oracle_bound_finite(const struct EwaDictionary *dict,
                                       const double *truth,
                                       uintptr_t n,
                                       const struct EwaWeights *prior,
                                       double beta,
                                       double *out);

/*
 `-beta log sum_j prior_j exp(-||theta_j - truth||^2 / beta)`.

 # Safety
 Handles must be live, `truth` must point to `n` doubles and `out` be writable.
 */
enum EwaStatus ewa_oracle_bound_gibbs(const struct EwaDictionary *dict,
                                      const double *truth,
                                      uintptr_t n,
                                      const struct EwaWeights *prior,
                                      double beta,
                                      double *out);

/*
 Smallest `beta` with a vanishing variance penalty for the noise law given
 as JSON (`{"family": ..., "params": {...}}`) and support diameter `d0`.

 # Safety
 `noise_json` must be a NUL-terminated string and `out` writable.
 */
enum EwaStatus ewa_beta_threshold(const char *noise_json, double d0, double *out);

/*
 Multiplier of the expected posterior variance in the risk bound at `beta`.

 # Safety
 `noise_json` must be a NUL-terminated string and `out` writable.
 */
enum EwaStatus ewa_variance_penalty_coefficient(const char *noise_json,
                                                double beta,
                                                double d0,
                                                double *out);

/*
 Runs a command-line subcommand (`"simulate"`, `"certify"`,
 `"verify-coupling"`, `"verify-bernstein"`, `"dv-check"`, `"oracle-bound"`)
 on a JSON config and stores the JSON report in `*out`. `seed` may be NULL
 to keep the config's seed. Returns `EWA_STATUS_VERIFICATION_FAILED` with
 the report still stored when a verdict fails. Release the report with
 [`ewa_string_free`].

 # Safety
 Strings must be NUL-terminated, `seed` NULL or readable, `out` writable.
 */
enum EwaStatus ewa_run_json(const char *subcommand,
                            const char *config_json,
                            const uint64_t *seed,
                            char **out);

/*
 Releases a string returned by this library.

 # Safety
 `s` must be NULL or a pointer returned through [`ewa_run_json`].
 */
void ewa_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EWA_ORACLE_H */
