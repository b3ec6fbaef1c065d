#ifndef LAZYLAB_H
#define LAZYLAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LazylabStatus {
  LAZYLAB_STATUS_OK = 0,
  LAZYLAB_STATUS_NULL_POINTER = 1,
  LAZYLAB_STATUS_INVALID_ARGUMENT = 2,
  LAZYLAB_STATUS_CONTRACT = 3,
  LAZYLAB_STATUS_NUMERICAL = 4,
  LAZYLAB_STATUS_CONFIG = 5,
  LAZYLAB_STATUS_IO = 6,
  LAZYLAB_STATUS_PANIC = 7,
} LazylabStatus;

// Points and labels.
typedef struct LazylabDataset LazylabDataset;

// Parameters together with their scaling and activation.
typedef struct LazylabNetwork LazylabNetwork;

// Outcome of one gradient-flow run.
typedef struct LazylabTrainSummary {
  double laziness;
  double lambda_s;
  double initial_loss;
  double final_loss;
  double dt;
  uint64_t steps;
  // 1 when the loss reached the configured stop ratio.
  uint8_t converged;
  // 1 when the exponential decay bound held up to the target ratio.
  uint8_t decay_bound_held;
} LazylabTrainSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *lazylab_version(void);

// Message of the last failure on this thread; empty if none.
// The pointer stays valid until the next failing call on this thread.
const char *lazylab_last_error(void);

// Draws `n` unit-norm points in dimension `d` with labels uniform on
// `[-label_bound, label_bound]`, no two closer than `delta_parallel` to parallel.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum LazylabStatus lazylab_dataset_generate(size_t n,
                                            size_t d,
                                            double label_bound,
                                            double delta_parallel,
                                            uint64_t seed,
                                            struct LazylabDataset **out);

// Builds a dataset from `n` row-major points of dimension `d` and `n` labels.
//
// # Safety
// `inputs` must hold `n * d` values, `labels` `n` values, `out` one handle.
enum LazylabStatus lazylab_dataset_from_arrays(const double *inputs,
                                               const double *labels,
                                               size_t n,
                                               size_t d,
                                               struct LazylabDataset **out);

// Number of points; 0 for a null handle.
//
// # Safety
// `ds` must be null or a live handle.
size_t lazylab_dataset_len(const struct LazylabDataset *ds);

// Copies point `i` into `x` (length `x_len`, at least the input dimension).
//
// # Safety
// `ds` must be a live handle and `x` writable for `x_len` values.
enum LazylabStatus lazylab_dataset_point(const struct LazylabDataset *ds,
                                         size_t i,
                                         double *x,
                                         size_t x_len,
                                         double *label);

// # Safety
// `ds` must be null or a handle from this library not yet freed.
void lazylab_dataset_free(struct LazylabDataset *ds);

// Initializes a network of `depth` hidden layers of width `width` with
// exponents `gamma[0..depth+1]` and the named activation
// (`scaled_silu` or `modified_softplus`).
//
// # Safety
// `gamma` must hold `gamma_len` values, `activation` must be a NUL-terminated
// string and `out` writable for one handle.
enum LazylabStatus lazylab_network_new(size_t depth,
                                       size_t width,
                                       size_t input_dim,
                                       const double *gamma,
                                       size_t gamma_len,
                                       const char *activation,
                                       uint64_t seed,
                                       struct LazylabNetwork **out);

// # Safety
// `net` must be null or a handle from this library not yet freed.
void lazylab_network_free(struct LazylabNetwork *net);

// s = (L+1)/2 − Σγ; NaN for a null handle.
//
// # Safety
// `net` must be null or a live handle.
double lazylab_network_laziness(const struct LazylabNetwork *net);

// Network output at `x`.
//
// # Safety
// `net` must be a live handle, `x` readable for `x_len` values, `out` writable.
enum LazylabStatus lazylab_network_forward(const struct LazylabNetwork *net,
                                           const double *x,
                                           size_t x_len,
                                           double *out);

// R = (1/2n) Σ_i (f(x_i) − y_i)².
//
// # Safety
// Both handles must be live and `out` writable.
enum LazylabStatus lazylab_network_loss(const struct LazylabNetwork *net,
                                        const struct LazylabDataset *ds,
                                        double *out);

// λ_S of the limiting kernels for the network's scaling and activation,
// by Gauss–Hermite quadrature of order `quad_order`.
//
// # Safety
// Both handles must be live and `out` writable.
enum LazylabStatus lazylab_kernel_lambda(const struct LazylabNetwork *net,
                                         const struct LazylabDataset *ds,
                                         size_t quad_order,
                                         double *out);

// Trains one network by gradient flow. `config_toml` holds experiment
// fields in TOML (null for defaults); the dataset comes from the config.
//
// # Safety
// `config_toml` must be null or NUL-terminated; `out` must be writable.
enum LazylabStatus lazylab_train(const char *config_toml,
                                 size_t width,
                                 uint64_t seed,
                                 struct LazylabTrainSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LAZYLAB_H */
