#ifndef SMARTSVM_H
#define SMARTSVM_H

/* Generated by cbindgen from the smartsvm-ffi crate. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call. The first four match the exit codes
 * of the command line tool.
 */
typedef enum SmStatus {
  SM_STATUS_OK = 0,
  SM_STATUS_USAGE = 1,
  SM_STATUS_DATA = 2,
  SM_STATUS_INTERNAL = 3,
  SM_STATUS_NULL_POINTER = 4,
  SM_STATUS_PANIC = 5,
} SmStatus;

/**
 * Multiclass construction used by [`sm_model_train`].
 */
typedef enum SmStrategy {
  SM_STRATEGY_SMART_SVM = 0,
  SM_STRATEGY_OVO = 1,
  SM_STRATEGY_OVR = 2,
} SmStrategy;

/**
 * Candidate regularization grid: `2^-6..2^6` or `2^-18..2^18`, both in
 * steps of `2^2`.
 */
typedef enum SmGrid {
  SM_GRID_DESK = 0,
  SM_GRID_WIDE = 1,
} SmGrid;

/**
 * Labeled feature matrix.
 */
typedef struct SmDataset SmDataset;

/**
 * Trained multiclass model.
 */
typedef struct SmModel SmModel;

/**
 * Bayes error estimate for one class pair or one class against the rest.
 */
typedef struct SmBerEstimate {
  double r_raw;
  double r_corrected;
  double u_hp;
  double p_lower;
  double p_upper;
  double p_hat;
  double p_hat_normalized;
  size_t n1;
  size_t n2;
} SmBerEstimate;

/**
 * Training settings; initialize with [`sm_train_config_default`].
 */
typedef struct SmTrainConfig {
  enum SmStrategy strategy;
  enum SmGrid grid;
  size_t n_trees;
  size_t cv_folds;
  uint64_t seed;
  /**
   * Nonzero to standardize features.
   */
  int32_t standardize;
} SmTrainConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *sm_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void sm_string_free(char *s);

/**
 * Builds a dataset from `n` row-major rows of `d` features and one integer
 * label per row. Class names are the decimal labels, in order of first
 * appearance.
 *
 * # Safety
 * `features` must hold `n * d` values and `labels` `n` values.
 */
enum SmStatus sm_dataset_new(const double *features,
                             size_t n,
                             size_t d,
                             const int64_t *labels,
                             struct SmDataset **out_dataset);

/**
 * Loads a labeled CSV file. `label_column` is a header name or a 0-based
 * column index; null means the column named `label`.
 *
 * # Safety
 * `path` and a non-null `label_column` must be NUL-terminated strings.
 */
enum SmStatus sm_dataset_load_csv(const char *path,
                                  const char *label_column,
                                  struct SmDataset **out_dataset);

/**
 * Frees a dataset. Null is ignored.
 *
 * # Safety
 * `dataset` must come from this library and not have been freed.
 */
void sm_dataset_free(struct SmDataset *dataset);

/**
 * Number of rows; 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t sm_dataset_n_samples(const struct SmDataset *dataset);

/**
 * Number of feature columns; 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t sm_dataset_n_features(const struct SmDataset *dataset);

/**
 * Number of classes; 0 for null.
 *
 * # Safety
 * `dataset` must be null or a live handle.
 */
size_t sm_dataset_n_classes(const struct SmDataset *dataset);

/**
 * Original label of class id `class`, as a new string.
 *
 * # Safety
 * `dataset` must be a live handle.
 */
enum SmStatus sm_dataset_class_name(const struct SmDataset *dataset,
                                    size_t class_,
                                    char **out_name);

/**
 * Bias-corrected estimate for classes `a` and `b` from `n_trees`
 * orthogonal spanning trees.
 *
 * # Safety
 * `dataset` must be a live handle and `out_estimate` writable.
 */
enum SmStatus sm_pairwise_ber(const struct SmDataset *dataset,
                              size_t a,
                              size_t b,
                              size_t n_trees,
                              struct SmBerEstimate *out_estimate);

/**
 * Normalized pairwise estimates as a row-major `K x K` matrix with NaN on
 * the diagonal. `len` is the capacity of `out_matrix`.
 *
 * # Safety
 * `dataset` must be a live handle and `out_matrix` hold `len` values.
 */
enum SmStatus sm_pairwise_ber_matrix(const struct SmDataset *dataset,
                                     size_t n_trees,
                                     double *out_matrix,
                                     size_t len);

/**
 * One-vs-rest estimate for every class, from a single set of spanning
 * trees over the whole dataset. `len` is the capacity of `out_estimates`.
 *
 * # Safety
 * `dataset` must be a live handle and `out_estimates` hold `len` entries.
 */
enum SmStatus sm_ovr_ber(const struct SmDataset *dataset,
                         size_t n_trees,
                         struct SmBerEstimate *out_estimates,
                         size_t len);

/**
 * Fills `config` with the library defaults.
 *
 * # Safety
 * `config` must be null or writable.
 */
void sm_train_config_default(struct SmTrainConfig *config);

/**
 * Trains a model. A null `config` means the defaults.
 *
 * # Safety
 * `dataset` must be a live handle, `config` null or readable.
 */
enum SmStatus sm_model_train(const struct SmDataset *dataset,
                             const struct SmTrainConfig *config,
                             struct SmModel **out_model);

/**
 * Frees a model. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void sm_model_free(struct SmModel *model);

/**
 * Predicts class ids for `n` row-major rows of `d` features.
 *
 * # Safety
 * `model` must be a live handle, `features` hold `n * d` values and
 * `out_classes` `n` entries.
 */
enum SmStatus sm_model_predict(const struct SmModel *model,
                               const double *features,
                               size_t n,
                               size_t d,
                               size_t *out_classes);

/**
 * Number of classes; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t sm_model_n_classes(const struct SmModel *model);

/**
 * Number of binary classifiers in the model; 0 for null.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t sm_model_n_binary(const struct SmModel *model);

/**
 * Original label of class id `class`, as a new string.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum SmStatus sm_model_class_name(const struct SmModel *model, size_t class_, char **out_name);

/**
 * Serializes a model to its JSON document.
 *
 * # Safety
 * `model` must be a live handle.
 */
enum SmStatus sm_model_to_json(const struct SmModel *model, char **out_json);

/**
 * Parses a model JSON document.
 *
 * # Safety
 * `json` must be a NUL-terminated string.
 */
enum SmStatus sm_model_from_json(const char *json, struct SmModel **out_model);

/**
 * Adjusted Rand index of two labelings of `n` samples.
 *
 * # Safety
 * `y` and `y_hat` must hold `n` values.
 */
enum SmStatus sm_adjusted_rand_index(const size_t *y,
                                     const size_t *y_hat,
                                     size_t n,
                                     double *out_ari);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SMARTSVM_H */
