//! C ABI over the metrics core: opaque confusion-matrix and report
//! handles, status codes, per-class metric getters.
//!
//! Class indices follow the fixed order 0 = NORMAL, 1 = PNEUMONIA,
//! 2 = COVID19. Every function returns an `XrcStatus`; results come back
//! through out-pointers. Handles must be released with the matching
//! `*_free` function.

use std::ffi::{c_char, CStr};
use std::path::Path;

use xrc::eval::{confusion_from_rows, read_prediction_log, ConfusionMatrix, MetricsReport};
use xrc::ingest::ClassLabel;
use xrc::XrcError;

/// Status codes returned by every FFI call.
#[repr(i32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XrcStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidArgument = 2,
    IoError = 3,
    ParseError = 4,
    /// The requested metric has a zero denominator for this matrix.
    UndefinedMetric = 5,
}

/// Metric selectors for `xrc_report_class_metric`.
#[repr(u32)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XrcMetricKind {
    Recall = 0,
    Specificity = 1,
    Precision = 2,
    ClassAccuracy = 3,
}

/// Opaque 3x3 confusion matrix (rows true class, columns predicted).
pub struct XrcConfusion {
    inner: ConfusionMatrix,
}

/// Opaque per-class metrics report derived from one confusion matrix.
pub struct XrcReport {
    inner: MetricsReport,
}

fn status_of(err: &XrcError) -> XrcStatus {
    match err {
        XrcError::Io { .. } | XrcError::MissingImage(_) => XrcStatus::IoError,
        XrcError::Data(_) | XrcError::Csv(_) | XrcError::Json(_) => XrcStatus::ParseError,
        _ => XrcStatus::InvalidArgument,
    }
}

/// Builds a confusion matrix from 9 row-major counts
/// (true class x predicted class, NORMAL/PNEUMONIA/COVID19 order).
///
/// # Safety
/// `counts` must point to 9 readable `uint64_t`s; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn xrc_confusion_new(
    counts: *const u64,
    out: *mut *mut XrcConfusion,
) -> XrcStatus {
    if counts.is_null() || out.is_null() {
        return XrcStatus::NullArgument;
    }
    let flat = std::slice::from_raw_parts(counts, 9);
    let mut m = [[0u64; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            m[i][j] = flat[i * 3 + j];
        }
    }
    let handle = Box::new(XrcConfusion {
        inner: ConfusionMatrix { counts: m },
    });
    *out = Box::into_raw(handle);
    XrcStatus::Ok
}

/// Builds a confusion matrix by reading a prediction-log file
/// (`image_id,true_label,predicted_label,p_normal,p_pneumonia,p_covid19`).
///
/// # Safety
/// `path` must be a valid NUL-terminated string; `out` must be a valid
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn xrc_confusion_from_prediction_log(
    path: *const c_char,
    out: *mut *mut XrcConfusion,
) -> XrcStatus {
    if path.is_null() || out.is_null() {
        return XrcStatus::NullArgument;
    }
    let path = match CStr::from_ptr(path).to_str() {
        Ok(s) => Path::new(s),
        Err(_) => return XrcStatus::InvalidArgument,
    };
    let rows = match read_prediction_log(path) {
        Ok(rows) => rows,
        Err(e) => return status_of(&e),
    };
    let cm = match confusion_from_rows(&rows) {
        Ok(cm) => cm,
        Err(e) => return status_of(&e),
    };
    *out = Box::into_raw(Box::new(XrcConfusion { inner: cm }));
    XrcStatus::Ok
}

/// Releases a confusion-matrix handle. Passing NULL is a no-op.
///
/// # Safety
/// `handle` must come from an `xrc_confusion_*` constructor and not have
/// been freed already.
#[no_mangle]
pub unsafe extern "C" fn xrc_confusion_free(handle: *mut XrcConfusion) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Total number of counted samples.
///
/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn xrc_confusion_total(
    handle: *const XrcConfusion,
    out: *mut u64,
) -> XrcStatus {
    if handle.is_null() || out.is_null() {
        return XrcStatus::NullArgument;
    }
    *out = (*handle).inner.n_total();
    XrcStatus::Ok
}

/// One cell of the matrix.
///
/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn xrc_confusion_count(
    handle: *const XrcConfusion,
    true_class: u32,
    predicted_class: u32,
    out: *mut u64,
) -> XrcStatus {
    if handle.is_null() || out.is_null() {
        return XrcStatus::NullArgument;
    }
    if true_class > 2 || predicted_class > 2 {
        return XrcStatus::InvalidArgument;
    }
    *out = (*handle).inner.counts[true_class as usize][predicted_class as usize];
    XrcStatus::Ok
}

/// Computes all metrics for a confusion matrix. `fold` is carried through
/// for labeling only.
///
/// # Safety
/// `confusion` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn xrc_report_new(
    confusion: *const XrcConfusion,
    fold: u32,
    out: *mut *mut XrcReport,
) -> XrcStatus {
    if confusion.is_null() || out.is_null() {
        return XrcStatus::NullArgument;
    }
    let cm = (*confusion).inner.clone();
    match MetricsReport::from_confusion(fold as usize, "ffi", cm) {
        Ok(report) => {
            *out = Box::into_raw(Box::new(XrcReport { inner: report }));
            XrcStatus::Ok
        }
        Err(_) => XrcStatus::InvalidArgument,
    }
}

/// Releases a report handle. Passing NULL is a no-op.
///
/// # Safety
/// `handle` must come from `xrc_report_new` and not have been freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn xrc_report_free(handle: *mut XrcReport) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Overall accuracy as a percentage in [0, 100].
///
/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn xrc_report_overall_accuracy(
    handle: *const XrcReport,
    out: *mut f64,
) -> XrcStatus {
    if handle.is_null() || out.is_null() {
        return XrcStatus::NullArgument;
    }
    match (*handle).inner.overall_accuracy.value() {
        Some(v) => {
            *out = v;
            XrcStatus::Ok
        }
        None => XrcStatus::UndefinedMetric,
    }
}

/// One per-class metric as a percentage in [0, 100]. `class_index` is
/// 0 = NORMAL, 1 = PNEUMONIA, 2 = COVID19; `metric` is an `XrcMetricKind`
/// value.
///
/// # Safety
/// `handle` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn xrc_report_class_metric(
    handle: *const XrcReport,
    class_index: u32,
    metric: u32,
    out: *mut f64,
) -> XrcStatus {
    if handle.is_null() || out.is_null() {
        return XrcStatus::NullArgument;
    }
    let class = match ClassLabel::from_index(class_index as usize) {
        Some(c) => c,
        None => return XrcStatus::InvalidArgument,
    };
    let metrics = (*handle).inner.class_metrics(class);
    let value = match metric {
        m if m == XrcMetricKind::Recall as u32 => metrics.recall,
        m if m == XrcMetricKind::Specificity as u32 => metrics.specificity,
        m if m == XrcMetricKind::Precision as u32 => metrics.precision,
        m if m == XrcMetricKind::ClassAccuracy as u32 => metrics.class_accuracy,
        _ => return XrcStatus::InvalidArgument,
    };
    match value.value() {
        Some(v) => {
            *out = v;
            XrcStatus::Ok
        }
        None => XrcStatus::UndefinedMetric,
    }
}

/// Human-readable name for a status code; never NULL.
#[no_mangle]
pub extern "C" fn xrc_status_name(status: i32) -> *const c_char {
    let name: &'static CStr = match status {
        0 => c"ok",
        1 => c"null argument",
        2 => c"invalid argument",
        3 => c"io error",
        4 => c"parse error",
        5 => c"undefined metric",
        _ => c"unknown status",
    };
    name.as_ptr()
}

/// Library version as a static string; never NULL.
#[no_mangle]
pub extern "C" fn xrc_version() -> *const c_char {
    c"0.1.0".as_ptr()
}
