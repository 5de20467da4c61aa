/* C ABI for the rainbow-hj pricing library.
 *
 * Conventions:
 *   - Fallible calls return a status code (RHJ_OK on success) and write
 *     results through out-pointers, which are touched only on success.
 *   - rhj_model_t is an opaque, immutable handle; create it with
 *     rhj_model_new and release it with rhj_model_free. Handles may be
 *     shared across threads.
 *   - On failure a thread-local message is retained; fetch it with
 *     rhj_last_error.
 *
 * Link against the rainbow_hj_ffi static or shared library.
 */

#ifndef RAINBOW_HJ_H
#define RAINBOW_HJ_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. */
#define RHJ_OK 0               /* success */
#define RHJ_ERR_NULL 1         /* a required pointer argument was null */
#define RHJ_ERR_INVALID 2      /* arguments failed validation */
#define RHJ_ERR_UNSUPPORTED 3  /* operation not available in this dimension */
#define RHJ_ERR_INTERNAL 4     /* internal error caught at the boundary */

/* Opaque validated market model. */
typedef struct RhjModel rhj_model_t;

/* Copies the most recent failure message on this thread into buf as a
 * NUL-terminated string, truncating to cap bytes, and returns the full
 * message length in bytes (excluding the NUL). buf may be NULL or cap zero
 * to query the length alone. */
size_t rhj_last_error(char *buf, size_t cap);

/* Builds a validated model from n spots, n vols, a flat rate, and an
 * optional row-major n*n correlation matrix (NULL means identity). On
 * success writes the new handle to out_model. */
int32_t rhj_model_new(size_t n, const double *spots, const double *vols,
                      double rate, const double *corr,
                      rhj_model_t **out_model);

/* Releases a model handle. NULL is accepted and ignored. */
void rhj_model_free(rhj_model_t *model);

/* Writes the number of assets in the model to out_n. */
int32_t rhj_model_dim(const rhj_model_t *model, size_t *out_n);

/* Monte Carlo price of the max-of-n call: writes the discounted estimate
 * and its standard error. antithetic is 0 or 1. The result is a pure
 * function of the inputs, independent of CPU or thread count. */
int32_t rhj_price_mc(const rhj_model_t *model, double strike, double maturity,
                     uint64_t n_paths, uint64_t seed, int32_t antithetic,
                     double *out_price, double *out_std_error);

/* Single-asset closed-form call price; RHJ_ERR_UNSUPPORTED when the model
 * holds more than one asset. */
int32_t rhj_price_closed_form(const rhj_model_t *model, double strike,
                              double maturity, double *out_price);

/* Terminal payoff max(s_1, ..., s_n) - strike, floored at zero. */
int32_t rhj_payoff_max_call(size_t n, const double *spots, double strike,
                            double *out_payoff);

/* Number of spatial terms in the n-asset pricing operator. */
uint64_t rhj_term_count(uint64_t n);

/* Standard normal cumulative distribution function. */
double rhj_norm_cdf(double x);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* RAINBOW_HJ_H */
