//! Report emission: per-fold count and metric tables, cross-fold
//! averages, a machine-readable structured report and one
//! confusion-matrix plot per (fold, network).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Result, XrcError};
use crate::ingest::ClassLabel;

use super::metrics::{aggregate_folds, MetricsReport};
use super::plot::render_confusion_png;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct ReportPaths {
    pub counts_csv: PathBuf,
    pub metrics_csv: PathBuf,
    pub structured_json: PathBuf,
    pub plots: Vec<PathBuf>,
}

#[derive(Serialize)]
struct StructuredReport<'a> {
    schema_version: u32,
    networks: BTreeMap<&'a str, NetworkSection<'a>>,
}

#[derive(Serialize)]
struct NetworkSection<'a> {
    folds: Vec<&'a MetricsReport>,
    average: MetricsReport,
}

/// Writes every report artifact for a set of per-(fold, network) results.
/// Output is deterministic: rows sorted by (fold, network), JSON keys by
/// network name.
pub fn emit_reports(reports: &[MetricsReport], out_dir: &Path) -> Result<ReportPaths> {
    if reports.is_empty() {
        return Err(XrcError::Data("no metrics reports to emit".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| XrcError::io(out_dir, e))?;

    let mut sorted: Vec<&MetricsReport> = reports.iter().collect();
    sorted.sort_by_key(|r| (r.fold_id, r.network_name.clone()));

    let mut by_network: BTreeMap<&str, Vec<&MetricsReport>> = BTreeMap::new();
    for r in &sorted {
        by_network.entry(r.network_name.as_str()).or_default().push(r);
    }
    let mut averages: BTreeMap<&str, MetricsReport> = BTreeMap::new();
    for (name, group) in &by_network {
        let owned: Vec<MetricsReport> = group.iter().map(|r| (*r).clone()).collect();
        averages.insert(name, aggregate_folds(&owned)?);
    }

    // Table-3-style per-class count rows.
    let counts_csv = out_dir.join("counts.csv");
    {
        let mut wtr = csv::Writer::from_path(&counts_csv)?;
        wtr.write_record([
            "fold",
            "network",
            "covid19_correct",
            "covid19_missed",
            "covid19_wrong",
            "pneumonia_correct",
            "pneumonia_missed",
            "pneumonia_wrong",
            "normal_correct",
            "normal_missed",
            "normal_wrong",
        ])?;
        for r in &sorted {
            let cm = r.confusion.as_ref().ok_or_else(|| {
                XrcError::Data(format!("report for {} lacks a confusion matrix", r.network_name))
            })?;
            let mut row = vec![
                r.fold_id.map_or("-".to_string(), |f| f.to_string()),
                r.network_name.clone(),
            ];
            for class in [ClassLabel::Covid19, ClassLabel::Pneumonia, ClassLabel::Normal] {
                row.push(cm.true_positives(class).to_string());
                row.push(cm.false_negatives(class).to_string());
                row.push(cm.false_positives(class).to_string());
            }
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| XrcError::io(&counts_csv, e))?;
    }

    // Table-4-style metric rows plus one average row per network.
    let metrics_csv = out_dir.join("metrics.csv");
    {
        let mut wtr = csv::Writer::from_path(&metrics_csv)?;
        wtr.write_record([
            "fold",
            "network",
            "accuracy",
            "covid19_recall",
            "pneumonia_recall",
            "normal_recall",
            "covid19_specificity",
            "pneumonia_specificity",
            "normal_specificity",
            "covid19_accuracy",
            "pneumonia_accuracy",
            "normal_accuracy",
            "covid19_precision",
            "pneumonia_precision",
            "normal_precision",
        ])?;
        let write_row = |wtr: &mut csv::Writer<std::fs::File>,
                         fold: String,
                         r: &MetricsReport|
         -> Result<()> {
            let mut row = vec![fold, r.network_name.clone(), r.overall_accuracy.display()];
            let order = [ClassLabel::Covid19, ClassLabel::Pneumonia, ClassLabel::Normal];
            for class in order {
                row.push(r.class_metrics(class).recall.display());
            }
            for class in order {
                row.push(r.class_metrics(class).specificity.display());
            }
            for class in order {
                row.push(r.class_metrics(class).class_accuracy.display());
            }
            for class in order {
                row.push(r.class_metrics(class).precision.display());
            }
            wtr.write_record(&row)?;
            Ok(())
        };
        for r in &sorted {
            write_row(&mut wtr, r.fold_id.map_or("-".into(), |f| f.to_string()), r)?;
        }
        for (_, avg) in &averages {
            write_row(&mut wtr, "average".into(), avg)?;
        }
        wtr.flush().map_err(|e| XrcError::io(&metrics_csv, e))?;
    }

    // Structured hierarchical report.
    let structured_json = out_dir.join("report.json");
    {
        let mut networks = BTreeMap::new();
        for (name, group) in &by_network {
            networks.insert(
                *name,
                NetworkSection {
                    folds: group.clone(),
                    average: averages[name].clone(),
                },
            );
        }
        let doc = StructuredReport {
            schema_version: REPORT_SCHEMA_VERSION,
            networks,
        };
        let json = serde_json::to_string_pretty(&doc)?;
        std::fs::write(&structured_json, json).map_err(|e| XrcError::io(&structured_json, e))?;
    }

    // One plot per (fold, network) with a raw matrix.
    let mut plots = Vec::new();
    for r in &sorted {
        if let (Some(fold), Some(cm)) = (r.fold_id, r.confusion.as_ref()) {
            let path = out_dir.join(format!("cm_fold{}_{}.png", fold, r.network_name));
            render_confusion_png(cm, &path)?;
            plots.push(path);
        }
    }

    Ok(ReportPaths {
        counts_csv,
        metrics_csv,
        structured_json,
        plots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::confusion::ConfusionMatrix;
    use tempfile::tempdir;

    fn report(fold: usize, net: &str) -> MetricsReport {
        let cm = ConfusionMatrix {
            counts: [
                [50 + fold as u64, 3, 1],
                [2, 40, 1],
                [0, 1, 9],
            ],
        };
        MetricsReport::from_confusion(fold, net, cm).unwrap()
    }

    #[test]
    fn single_result_emits_one_of_each() {
        let dir = tempdir().unwrap();
        let paths = emit_reports(&[report(1, "tiny_a")], dir.path()).unwrap();
        assert!(paths.counts_csv.exists());
        assert!(paths.metrics_csv.exists());
        assert!(paths.structured_json.exists());
        assert_eq!(paths.plots.len(), 1);
        assert!(paths.plots[0].file_name().unwrap().to_str().unwrap().starts_with("cm_fold1_"));

        let counts = std::fs::read_to_string(&paths.counts_csv).unwrap();
        assert_eq!(counts.lines().count(), 2);
        let metrics = std::fs::read_to_string(&paths.metrics_csv).unwrap();
        // One data row plus one average row.
        assert_eq!(metrics.lines().count(), 3);
    }

    #[test]
    fn full_grid_shapes() {
        let mut reports = Vec::new();
        for fold in 1..=5 {
            for net in ["net_a", "net_b", "net_c"] {
                reports.push(report(fold, net));
            }
        }
        let dir = tempdir().unwrap();
        let paths = emit_reports(&reports, dir.path()).unwrap();
        let counts = std::fs::read_to_string(&paths.counts_csv).unwrap();
        assert_eq!(counts.lines().count(), 1 + 15);
        let metrics = std::fs::read_to_string(&paths.metrics_csv).unwrap();
        assert_eq!(metrics.lines().count(), 1 + 15 + 3);
        assert_eq!(paths.plots.len(), 15);
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let reports = vec![report(1, "a"), report(2, "a")];
        let dir = tempdir().unwrap();
        let d1 = dir.path().join("r1");
        let d2 = dir.path().join("r2");
        let p1 = emit_reports(&reports, &d1).unwrap();
        let p2 = emit_reports(&reports, &d2).unwrap();
        for (a, b) in [
            (&p1.counts_csv, &p2.counts_csv),
            (&p1.metrics_csv, &p2.metrics_csv),
            (&p1.structured_json, &p2.structured_json),
        ] {
            assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap());
        }
    }
}
