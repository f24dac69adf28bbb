#ifndef ECHOMI_H
#define ECHOMI_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(ECHOMI_BUILDING_LIBRARY)
#    define ECHOMI_API __declspec(dllexport)
#  else
#    define ECHOMI_API __declspec(dllimport)
#  endif
#else
#  define ECHOMI_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum echomi_status {
  ECHOMI_OK = 0,
  ECHOMI_ERR_INVALID_ARGUMENT = 1,
  ECHOMI_ERR_PARSE = 2,
  ECHOMI_ERR_NOT_FOUND = 3,
  ECHOMI_ERR_DUPLICATE = 4,
  ECHOMI_ERR_IO = 5,
  ECHOMI_ERR_DEGENERATE = 6,
  ECHOMI_ERR_INSUFFICIENT_DATA = 7,
  ECHOMI_ERR_RUNTIME = 8,
  ECHOMI_ERR_NULL_ARGUMENT = 9
} echomi_status;

typedef struct echomi_context echomi_context;
typedef struct echomi_model echomi_model;

ECHOMI_API const char* echomi_version(void);
ECHOMI_API const char* echomi_status_name(echomi_status status);
/* 1 for caller mistakes (bad flags, missing or malformed inputs), 0 otherwise. */
ECHOMI_API int echomi_status_is_validation(echomi_status status);

/* ---- context ------------------------------------------------------------ */

ECHOMI_API echomi_status echomi_context_create(echomi_context** out);
ECHOMI_API void echomi_context_free(echomi_context* ctx);
/* Message of the last failed call on this context; "" after a success. */
ECHOMI_API const char* echomi_last_error(const echomi_context* ctx);
/* Summary lines of the last successful stage. */
ECHOMI_API const char* echomi_last_summary(const echomi_context* ctx);
ECHOMI_API size_t echomi_warning_count(const echomi_context* ctx);
ECHOMI_API const char* echomi_warning(const echomi_context* ctx, size_t index);

ECHOMI_API echomi_status echomi_context_load_config(echomi_context* ctx, const char* path);
ECHOMI_API echomi_status echomi_context_set_config_json(echomi_context* ctx, const char* json_text);
ECHOMI_API echomi_status echomi_context_set_seed(echomi_context* ctx, uint64_t seed);
ECHOMI_API echomi_status echomi_context_set_jobs(echomi_context* ctx, int jobs);
/* Recorded verbatim in each run manifest. */
ECHOMI_API echomi_status echomi_context_set_argv(echomi_context* ctx, int argc, const char* const* argv);

/* ---- stages --------------------------------------------------------------
 * Each stage writes its outputs and a run.json manifest under `out_dir`. */

ECHOMI_API echomi_status echomi_segment(echomi_context* ctx, const char* manifest, const char* out_dir);
ECHOMI_API echomi_status echomi_trace(echomi_context* ctx, const char* boundaries, const char* out_dir);
/* `manifest` may be NULL; rows are then unlabeled. */
ECHOMI_API echomi_status echomi_features(echomi_context* ctx, const char* traces, const char* manifest,
                                         const char* out_dir);
/* mode: a4c | a2c | multiview_concat | multiview_or; model: dt | rf | svm | knn | cnn */
ECHOMI_API echomi_status echomi_train(echomi_context* ctx, const char* features, const char* mode, const char* model,
                                      const char* out_dir);
ECHOMI_API echomi_status echomi_predict(echomi_context* ctx, const char* model_file, const char* features,
                                        const char* out_dir);
/* `input` is a manifest or a features.csv. `modes` and `models` are comma
 * separated lists; NULL, "" or "all" select everything. */
ECHOMI_API echomi_status echomi_evaluate(echomi_context* ctx, const char* input, const char* modes, const char* models,
                                         const char* out_dir);
ECHOMI_API echomi_status echomi_fuse(echomi_context* ctx, const char* a4c_predictions, const char* a2c_predictions,
                                     const char* out_dir);
/* Negative counts keep the configured values (20 and 20 by default). */
ECHOMI_API echomi_status echomi_synth(echomi_context* ctx, int n_healthy, int n_mi, const char* out_dir);

/* ---- direct computations -------------------------------------------------- */

typedef struct echomi_confusion {
  int64_t tp;
  int64_t tn;
  int64_t fp;
  int64_t fn;
} echomi_confusion;

/* Percentages; NaN where the denominator is zero. */
typedef struct echomi_metrics {
  double sensitivity;
  double specificity;
  double precision;
  double accuracy;
  double f1;
  double f2;
} echomi_metrics;

ECHOMI_API echomi_status echomi_compute_metrics(const echomi_confusion* cm, echomi_metrics* out);
/* Labels: 0 non-MI, 1 MI. */
ECHOMI_API echomi_status echomi_fuse_labels(int a4c, int a2c, int* out);
/* Back-propagation multiplication count. N has layers + 1 entries, K and V
 * have `layers` entries. */
ECHOMI_API echomi_status echomi_complexity(const int64_t* N, const int64_t* K, const int64_t* V, int layers,
                                           int64_t* out);
/* Same count for the two convolution layers of a CNN architecture. */
ECHOMI_API echomi_status echomi_cnn_complexity(int input_length, int filters, int kernel, int same_padding,
                                               int64_t* out);

/* ---- models --------------------------------------------------------------- */

ECHOMI_API echomi_status echomi_model_load(echomi_context* ctx, const char* path, echomi_model** out);
ECHOMI_API void echomi_model_free(echomi_model* model);
ECHOMI_API size_t echomi_model_n_features(const echomi_model* model);
ECHOMI_API echomi_status echomi_model_predict(echomi_context* ctx, const echomi_model* model, const double* x,
                                              size_t n, int* label, double* score);

#ifdef __cplusplus
}
#endif

#endif
