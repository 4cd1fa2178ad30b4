#ifndef XRC_H
#define XRC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every FFI call.
 */
enum XrcStatus
#ifdef __cplusplus
  : int32_t
#endif // __cplusplus
 {
  Ok = 0,
  NullArgument = 1,
  InvalidArgument = 2,
  IoError = 3,
  ParseError = 4,
  /**
   * The requested metric has a zero denominator for this matrix.
   */
  UndefinedMetric = 5,
};
#ifndef __cplusplus
typedef int32_t XrcStatus;
#endif // __cplusplus

/**
 * Opaque 3x3 confusion matrix (rows true class, columns predicted).
 */
typedef struct XrcConfusion XrcConfusion;

/**
 * Opaque per-class metrics report derived from one confusion matrix.
 */
typedef struct XrcReport XrcReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds a confusion matrix from 9 row-major counts
 * (true class x predicted class, NORMAL/PNEUMONIA/COVID19 order).
 *
 * # Safety
 * `counts` must point to 9 readable `uint64_t`s; `out` must be a valid
 * pointer.
 */
XrcStatus xrc_confusion_new(const uint64_t *counts, struct XrcConfusion **out);

/**
 * Builds a confusion matrix by reading a prediction-log file
 * (`image_id,true_label,predicted_label,p_normal,p_pneumonia,p_covid19`).
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be a valid
 * pointer.
 */
XrcStatus xrc_confusion_from_prediction_log(const char *path, struct XrcConfusion **out);

/**
 * Releases a confusion-matrix handle. Passing NULL is a no-op.
 *
 * # Safety
 * `handle` must come from an `xrc_confusion_*` constructor and not have
 * been freed already.
 */
void xrc_confusion_free(struct XrcConfusion *handle);

/**
 * Total number of counted samples.
 *
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
XrcStatus xrc_confusion_total(const struct XrcConfusion *handle, uint64_t *out);

/**
 * One cell of the matrix.
 *
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
XrcStatus xrc_confusion_count(const struct XrcConfusion *handle,
                              uint32_t true_class,
                              uint32_t predicted_class,
                              uint64_t *out);

/**
 * Computes all metrics for a confusion matrix. `fold` is carried through
 * for labeling only.
 *
 * # Safety
 * `confusion` and `out` must be valid pointers.
 */
XrcStatus xrc_report_new(const struct XrcConfusion *confusion,
                         uint32_t fold,
                         struct XrcReport **out);

/**
 * Releases a report handle. Passing NULL is a no-op.
 *
 * # Safety
 * `handle` must come from `xrc_report_new` and not have been freed
 * already.
 */
void xrc_report_free(struct XrcReport *handle);

/**
 * Overall accuracy as a percentage in [0, 100].
 *
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
XrcStatus xrc_report_overall_accuracy(const struct XrcReport *handle, double *out);

/**
 * One per-class metric as a percentage in [0, 100]. `class_index` is
 * 0 = NORMAL, 1 = PNEUMONIA, 2 = COVID19; `metric` is an `XrcMetricKind`
 * value.
 *
 * # Safety
 * `handle` and `out` must be valid pointers.
 */
XrcStatus xrc_report_class_metric(const struct XrcReport *handle,
                                  uint32_t class_index,
                                  uint32_t metric,
                                  double *out);

/**
 * Human-readable name for a status code; never NULL.
 */
const char *xrc_status_name(int32_t status);

/**
 * Library version as a static string; never NULL.
 */
const char *xrc_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* XRC_H */
