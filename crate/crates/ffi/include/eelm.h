/* eelm C API: evolutionary ELM training and black-box optimization. */

#ifndef EELM_H
#define EELM_H

/* Generated by cbindgen from eelm-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every API call.
 */
typedef enum EelmStatus {
  EELM_STATUS_OK = 0,
  EELM_STATUS_NULL_ARGUMENT = 1,
  EELM_STATUS_INVALID_ARGUMENT = 2,
  EELM_STATUS_NUMERICAL_FAILURE = 3,
  EELM_STATUS_PANIC = 4,
} EelmStatus;

typedef enum EelmActivation {
  EELM_ACTIVATION_SIGMOID = 0,
  EELM_ACTIVATION_TANH = 1,
  EELM_ACTIVATION_LINEAR = 2,
} EelmActivation;

typedef enum EelmOptimizer {
  EELM_OPTIMIZER_MRFO = 0,
  EELM_OPTIMIZER_MRFO_LEVY = 1,
  EELM_OPTIMIZER_PSO = 2,
  EELM_OPTIMIZER_GA = 3,
  EELM_OPTIMIZER_WOA = 4,
  EELM_OPTIMIZER_RANDOM_SEARCH = 5,
} EelmOptimizer;

/**
 * Opaque trained-model handle.
 */
typedef struct EelmModel EelmModel;

typedef struct Option_EelmObjective Option_EelmObjective;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Static description of a status code.
 */
const char *eelm_status_message(enum EelmStatus status);

/**
 * Mantegna scale constant for the Levy exponent `beta`.
 */
enum EelmStatus eelm_levy_sigma(double beta, double *out_sigma);

enum EelmStatus eelm_rmse(const double *predictions,
                          const double *targets,
                          uintptr_t len,
                          double *out_rmse);

enum EelmStatus eelm_r_squared(const double *predictions,
                               const double *targets,
                               uintptr_t len,
                               double *out_r2);

/**
 * Single-shot ELM: random hidden layer, least-squares output weights.
 */
enum EelmStatus eelm_train_plain(const double *features,
                                 uintptr_t samples,
                                 uintptr_t n_features,
                                 const double *targets,
                                 uintptr_t hidden_nodes,
                                 enum EelmActivation activation,
                                 double penalty,
                                 uint64_t seed,
                                 struct EelmModel **out_model);

/**
 * Evolutionary ELM: hidden parameters tuned by the chosen optimizer.
 * `out_fitness` (optional) receives the best held-out RMSE.
 */
enum EelmStatus eelm_train_evolutionary(const double *features,
                                        uintptr_t samples,
                                        uintptr_t n_features,
                                        const double *targets,
                                        uintptr_t hidden_nodes,
                                        enum EelmActivation activation,
                                        enum EelmOptimizer optimizer,
                                        uintptr_t population,
                                        uintptr_t iterations,
                                        double penalty,
                                        uint64_t seed,
                                        struct EelmModel **out_model,
                                        double *out_fitness);

/**
 * Predicts `samples` rows into `out_predictions` (length `samples`).
 */
enum EelmStatus eelm_model_predict(const struct EelmModel *model,
                                   const double *features,
                                   uintptr_t samples,
                                   uintptr_t n_features,
                                   double *out_predictions);

/**
 * Number of input features the model expects.
 */
enum EelmStatus eelm_model_input_dim(const struct EelmModel *model, uintptr_t *out_dim);

/**
 * Releases a model handle. Null is a no-op.
 */
void eelm_model_free(struct EelmModel *model);

/**
 * Minimizes a caller-supplied objective over `[lower, upper]^dim`.
 * `out_best` must hold `dim` doubles.
 */
enum EelmStatus eelm_optimize(enum EelmOptimizer optimizer,
                              uintptr_t dim,
                              double lower,
                              double upper,
                              uintptr_t population,
                              uintptr_t iterations,
                              uint64_t seed,
                              struct Option_EelmObjective objective,
                              void *user_data,
                              double *out_best,
                              double *out_fitness);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* EELM_H */
