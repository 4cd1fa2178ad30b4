//! Per-class and overall evaluation metrics.
//!
//! All ratios are formed from exact integer counts; percentages stay at
//! full `f64` precision internally and are rounded half-up to two decimals
//! only when printed. A zero denominator yields an explicit `Undefined`
//! marker instead of a NaN.

use serde::{Deserialize, Serialize};

use crate::error::{Result, XrcError};
use crate::ingest::{ClassLabel, NUM_CLASSES};

use super::confusion::ConfusionMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Metric {
    /// Percentage in [0, 100].
    Defined(f64),
    Undefined,
}

impl Metric {
    fn ratio_pct(numerator: u64, denominator: u64) -> Metric {
        if denominator == 0 {
            Metric::Undefined
        } else {
            Metric::Defined(100.0 * numerator as f64 / denominator as f64)
        }
    }

    pub fn value(&self) -> Option<f64> {
        match self {
            Metric::Defined(v) => Some(*v),
            Metric::Undefined => None,
        }
    }

    /// Two decimals, half-up; undefined prints as an em-dash.
    pub fn display(&self) -> String {
        match self {
            Metric::Defined(v) => format!("{:.2}", round_half_up_2(*v)),
            Metric::Undefined => "—".to_string(),
        }
    }
}

pub fn round_half_up_2(v: f64) -> f64 {
    // Small slack so decimal-intent ties like 41.665 round up despite
    // sitting just below the binary .5 boundary.
    (v * 100.0 + 0.5 + 1e-6).floor() / 100.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub recall: Metric,
    pub specificity: Metric,
    pub precision: Metric,
    pub class_accuracy: Metric,
}

/// Recall, specificity, precision and single-class accuracy for one class.
pub fn per_class_metrics(cm: &ConfusionMatrix, class: ClassLabel) -> Result<ClassMetrics> {
    if cm.n_total() == 0 {
        return Err(XrcError::Data("empty confusion matrix".into()));
    }
    let tp = cm.true_positives(class);
    let fn_ = cm.false_negatives(class);
    let fp = cm.false_positives(class);
    let tn = cm.true_negatives(class);
    Ok(ClassMetrics {
        recall: Metric::ratio_pct(tp, tp + fn_),
        specificity: Metric::ratio_pct(tn, tn + fp),
        precision: Metric::ratio_pct(tp, tp + fp),
        class_accuracy: Metric::ratio_pct(tp + tn, tp + fp + tn + fn_),
    })
}

/// Fraction of correctly classified images over all images, as a percent.
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    if cm.n_total() == 0 {
        return Err(XrcError::Data("empty confusion matrix".into()));
    }
    Ok(100.0 * cm.trace() as f64 / cm.n_total() as f64)
}

/// One evaluated (fold, network) result. Averaged cross-fold reports have
/// `fold_id = None` and no raw matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub fold_id: Option<usize>,
    pub network_name: String,
    pub per_class: [ClassMetrics; NUM_CLASSES],
    pub overall_accuracy: Metric,
    pub confusion: Option<ConfusionMatrix>,
    /// How many undefined fold metrics were dropped from averages.
    pub undefined_excluded: usize,
}

impl MetricsReport {
    pub fn from_confusion(
        fold_id: usize,
        network_name: &str,
        cm: ConfusionMatrix,
    ) -> Result<MetricsReport> {
        let per_class = [
            per_class_metrics(&cm, ClassLabel::Normal)?,
            per_class_metrics(&cm, ClassLabel::Pneumonia)?,
            per_class_metrics(&cm, ClassLabel::Covid19)?,
        ];
        Ok(MetricsReport {
            fold_id: Some(fold_id),
            network_name: network_name.to_string(),
            per_class,
            overall_accuracy: Metric::Defined(overall_accuracy(&cm)?),
            confusion: Some(cm),
            undefined_excluded: 0,
        })
    }

    pub fn class_metrics(&self, class: ClassLabel) -> &ClassMetrics {
        &self.per_class[class.index()]
    }
}

/// Unweighted arithmetic mean of every metric across folds. Undefined
/// fold values are excluded from their mean and counted in
/// `undefined_excluded`; a metric undefined in every fold stays undefined.
pub fn aggregate_folds(reports: &[MetricsReport]) -> Result<MetricsReport> {
    let first = reports
        .first()
        .ok_or_else(|| XrcError::Data("cannot aggregate zero reports".into()))?;
    if reports.iter().any(|r| r.network_name != first.network_name) {
        return Err(XrcError::Data(format!(
            "cannot aggregate mixed networks: {:?}",
            reports.iter().map(|r| r.network_name.as_str()).collect::<Vec<_>>()
        )));
    }
    let mut excluded = 0usize;
    let mut mean = |metrics: Vec<Metric>| -> Metric {
        let defined: Vec<f64> = metrics.iter().filter_map(Metric::value).collect();
        excluded += metrics.len() - defined.len();
        if defined.is_empty() {
            Metric::Undefined
        } else {
            Metric::Defined(defined.iter().sum::<f64>() / defined.len() as f64)
        }
    };

    let mut per_class = Vec::with_capacity(NUM_CLASSES);
    for k in 0..NUM_CLASSES {
        per_class.push(ClassMetrics {
            recall: mean(reports.iter().map(|r| r.per_class[k].recall).collect()),
            specificity: mean(reports.iter().map(|r| r.per_class[k].specificity).collect()),
            precision: mean(reports.iter().map(|r| r.per_class[k].precision).collect()),
            class_accuracy: mean(reports.iter().map(|r| r.per_class[k].class_accuracy).collect()),
        });
    }
    let overall = mean(reports.iter().map(|r| r.overall_accuracy).collect());
    Ok(MetricsReport {
        fold_id: None,
        network_name: first.network_name.clone(),
        per_class: [per_class[0], per_class[1], per_class[2]],
        overall_accuracy: overall,
        confusion: None,
        undefined_excluded: excluded,
    })
}
