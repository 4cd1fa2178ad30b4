use serde::{Deserialize, Serialize};

use crate::error::{Result, XrcError};
use crate::ingest::{ClassLabel, NUM_CLASSES};

/// 3x3 count matrix; rows are true classes, columns predicted, both in
/// (NORMAL, PNEUMONIA, COVID19) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub counts: [[u64; NUM_CLASSES]; NUM_CLASSES],
}

impl ConfusionMatrix {
    pub fn zero() -> ConfusionMatrix {
        ConfusionMatrix {
            counts: [[0; NUM_CLASSES]; NUM_CLASSES],
        }
    }

    pub fn from_labels(true_labels: &[ClassLabel], predicted: &[ClassLabel]) -> Result<ConfusionMatrix> {
        if true_labels.len() != predicted.len() {
            return Err(XrcError::Data(format!(
                "label lists differ in length: {} vs {}",
                true_labels.len(),
                predicted.len()
            )));
        }
        let mut cm = ConfusionMatrix::zero();
        for (t, p) in true_labels.iter().zip(predicted) {
            cm.counts[t.index()][p.index()] += 1;
        }
        Ok(cm)
    }

    /// Reconstructs a consistent matrix from per-class (TP, FN, FP)
    /// triples, as published in per-class results tables. The six
    /// off-diagonal cells are underdetermined by one degree of freedom;
    /// any non-negative solution yields identical per-class metrics, so
    /// the smallest feasible NORMAL-as-COVID cell is chosen.
    pub fn from_per_class_counts(per_class: [(u64, u64, u64); NUM_CLASSES]) -> Result<ConfusionMatrix> {
        let [(tp_n, fn_n, fp_n), (tp_p, fn_p, fp_p), (tp_c, fn_c, fp_c)] = per_class;
        if fn_n + fn_p + fn_c != fp_n + fp_p + fp_c {
            return Err(XrcError::Data(
                "per-class counts are inconsistent: total FN != total FP".into(),
            ));
        }
        // Unknowns: a=cm[N][P] b=cm[N][C] c=cm[P][N] d=cm[P][C]
        //           e=cm[C][N] f=cm[C][P], parameterized by t = b.
        for t in 0..=fn_n {
            let b = t;
            let a = fn_n - t;
            let Some(d) = fp_c.checked_sub(t) else { continue };
            let Some(f) = (fp_p + t).checked_sub(fn_n) else { continue };
            let Some(e) = fn_c.checked_sub(f) else { continue };
            let Some(c) = fp_n.checked_sub(e) else { continue };
            if c + d != fn_p {
                continue;
            }
            return Ok(ConfusionMatrix {
                counts: [[tp_n, a, b], [c, tp_p, d], [e, f, tp_c]],
            });
        }
        Err(XrcError::Data(
            "per-class counts admit no non-negative confusion matrix".into(),
        ))
    }

    pub fn n_total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][i]).sum()
    }

    pub fn row_sum(&self, class: ClassLabel) -> u64 {
        self.counts[class.index()].iter().sum()
    }

    pub fn col_sum(&self, class: ClassLabel) -> u64 {
        (0..NUM_CLASSES).map(|i| self.counts[i][class.index()]).sum()
    }

    pub fn true_positives(&self, class: ClassLabel) -> u64 {
        self.counts[class.index()][class.index()]
    }

    pub fn false_negatives(&self, class: ClassLabel) -> u64 {
        self.row_sum(class) - self.true_positives(class)
    }

    pub fn false_positives(&self, class: ClassLabel) -> u64 {
        self.col_sum(class) - self.true_positives(class)
    }

    pub fn true_negatives(&self, class: ClassLabel) -> u64 {
        self.n_total() - self.row_sum(class) - self.false_positives(class)
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        for i in 0..NUM_CLASSES {
            for j in 0..NUM_CLASSES {
                self.counts[i][j] += other.counts[i][j];
            }
        }
    }
}
