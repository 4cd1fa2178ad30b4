//! Multi-fold experiment orchestration: per-fold split redraws, phase
//! plans, training, validation inference and report emission, persisted
//! under one output directory.

use std::path::{Path, PathBuf};

use ndarray::{Array4, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, XrcError};
use crate::eval::{
    confusion_from_rows, emit_reports, write_prediction_log, MetricsReport, PredictionRow,
    ReportPaths,
};
use crate::ingest::{build_manifest, ClassLabel, Manifest, Source, Split, SplitSpec};
use crate::model::{argmax_label, ArchitectureSpec, Model};
use crate::phases::{build_phase_plan, PhaseLayout};
use crate::seed::stream_rng;

use super::config::TrainingConfig;
use super::train::{load_image, train_fold, TrainOptions};

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold_id: usize,
    pub network: String,
    pub checkpoint: PathBuf,
    pub train_log: PathBuf,
    pub prediction_log: PathBuf,
    pub report: MetricsReport,
}

#[derive(Debug)]
pub struct ExperimentBundle {
    pub out_dir: PathBuf,
    pub results: Vec<FoldResult>,
    pub report_paths: Option<ReportPaths>,
}

impl ExperimentBundle {
    pub fn reports(&self) -> Vec<MetricsReport> {
        self.results.iter().map(|r| r.report.clone()).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct BundleIndex {
    entries: Vec<BundleEntry>,
}

#[derive(Serialize, Deserialize)]
struct BundleEntry {
    fold_id: usize,
    network: String,
    checkpoint: PathBuf,
    train_log: PathBuf,
    prediction_log: PathBuf,
}

/// Runs inference over one split with no augmentation, in manifest order.
pub fn evaluate_split(
    model: &mut Model,
    manifest: &Manifest,
    split: Split,
    batch_size: usize,
) -> Result<Vec<PredictionRow>> {
    let records: Vec<_> = manifest.records_in(split).collect();
    let (h, w) = model.spec.input_resolution;
    let mut rows = Vec::with_capacity(records.len());
    for chunk in records.chunks(batch_size.max(1)) {
        let mut batch = Array4::<f32>::zeros((chunk.len(), h, w, 3));
        for (i, record) in chunk.iter().enumerate() {
            let img = load_image(&record.file_path, (h, w))?;
            batch.index_axis_mut(Axis(0), i).assign(&img);
        }
        let probs = model.predict(batch.view())?;
        for (record, p) in chunk.iter().zip(probs.rows()) {
            rows.push(PredictionRow {
                image_id: record.image_id.clone(),
                true_label: record.class_label,
                predicted_label: argmax_label(p.iter().copied()),
                probabilities: [p[0] as f64, p[1] as f64, p[2] as f64],
            });
        }
    }
    Ok(rows)
}

/// Reconstructs the split quotas a manifest was built with, so later folds
/// can redraw the same-shaped split from the full record pool.
fn infer_split_spec(manifest: &Manifest) -> SplitSpec {
    let train = manifest.split_class_totals(Split::Train);
    let cohen_pneumonia = manifest
        .records_in(Split::Train)
        .filter(|r| r.class_label == ClassLabel::Pneumonia && r.source == Source::CohenXray)
        .count();
    SplitSpec {
        train_covid: train[ClassLabel::Covid19.index()],
        train_pneumonia: train[ClassLabel::Pneumonia.index()],
        train_normal: train[ClassLabel::Normal.index()],
        cohen_pneumonia_train: cohen_pneumonia,
        patient_level: false,
    }
}

/// Trains and evaluates every (fold, network) pair.
///
/// Fold 1 uses the manifest's own split; each later fold redraws a split
/// of the same shape with fold-specific entropy, then gets its own phase
/// plan. Everything lands under `out_dir`:
/// `fold{F}/manifest.csv`, `fold{F}/plan.csv`,
/// `fold{F}/{network}/` checkpoints plus `train_log.csv` and
/// `predictions.csv`, and cross-fold tables under `reports/`.
pub fn run_experiment(
    manifest: &Manifest,
    specs: &[ArchitectureSpec],
    config: &TrainingConfig,
    layout: &PhaseLayout,
    out_dir: &Path,
) -> Result<ExperimentBundle> {
    config.validate()?;
    if specs.is_empty() {
        return Err(XrcError::Config("no networks selected".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| XrcError::io(out_dir, e))?;
    let split_spec = infer_split_spec(manifest);

    let mut results = Vec::new();
    for fold in 1..=config.n_folds {
        let fold_manifest = if fold == 1 {
            manifest.clone()
        } else {
            let fold_seed: u64 = stream_rng(config.seed, "fold-split", &[fold as u64]).gen();
            build_manifest(manifest.records().to_vec(), &split_spec, fold_seed)?
        };
        let fold_dir = out_dir.join(format!("fold{fold}"));
        std::fs::create_dir_all(&fold_dir).map_err(|e| XrcError::io(&fold_dir, e))?;
        fold_manifest.write(&fold_dir.join("manifest.csv"))?;
        let plan = build_phase_plan(&fold_manifest, fold, config.seed, layout)?;
        plan.write(&fold_dir.join("plan.csv"))?;

        for spec in specs {
            let net_dir = fold_dir.join(&spec.name);
            std::fs::create_dir_all(&net_dir).map_err(|e| XrcError::io(&net_dir, e))?;
            let outcome = train_fold(
                &fold_manifest,
                &plan,
                spec,
                config,
                TrainOptions {
                    checkpoint_dir: Some(&net_dir),
                    audit: None,
                },
            )?;
            let train_log = net_dir.join("train_log.csv");
            outcome.log.write(&train_log)?;

            let mut model = outcome.model;
            let rows = evaluate_split(
                &mut model,
                &fold_manifest,
                Split::Validation,
                config.batch_size(spec.kind),
            )?;
            let prediction_log = net_dir.join("predictions.csv");
            write_prediction_log(&prediction_log, &rows)?;
            let report =
                MetricsReport::from_confusion(fold, &spec.name, confusion_from_rows(&rows)?)?;

            let checkpoint = outcome
                .checkpoints
                .last()
                .cloned()
                .ok_or_else(|| XrcError::Model("training produced no checkpoint".into()))?;
            results.push(FoldResult {
                fold_id: fold,
                network: spec.name.clone(),
                checkpoint,
                train_log,
                prediction_log,
                report,
            });
        }
    }

    let reports: Vec<MetricsReport> = results.iter().map(|r| r.report.clone()).collect();
    let report_paths = emit_reports(&reports, &out_dir.join("reports"))?;

    let index = BundleIndex {
        entries: results
            .iter()
            .map(|r| BundleEntry {
                fold_id: r.fold_id,
                network: r.network.clone(),
                checkpoint: r.checkpoint.clone(),
                train_log: r.train_log.clone(),
                prediction_log: r.prediction_log.clone(),
            })
            .collect(),
    };
    let index_path = out_dir.join("bundle.json");
    std::fs::write(&index_path, serde_json::to_string_pretty(&index)?)
        .map_err(|e| XrcError::io(&index_path, e))?;

    Ok(ExperimentBundle {
        out_dir: out_dir.to_path_buf(),
        results,
        report_paths: Some(report_paths),
    })
}

/// Re-runs validation inference from the persisted checkpoints, rewriting
/// each prediction log, and returns the refreshed results.
pub fn reevaluate_experiment(out_dir: &Path, batch_size: usize) -> Result<ExperimentBundle> {
    let index_path = out_dir.join("bundle.json");
    let text = std::fs::read_to_string(&index_path).map_err(|e| XrcError::io(&index_path, e))?;
    let index: BundleIndex = serde_json::from_str(&text)?;
    let mut results = Vec::new();
    for e in index.entries {
        let (mut model, _meta) = crate::model::load_checkpoint(&e.checkpoint)?;
        let manifest_path = out_dir.join(format!("fold{}", e.fold_id)).join("manifest.csv");
        let fold_manifest = Manifest::read(&manifest_path)?;
        let rows = evaluate_split(&mut model, &fold_manifest, Split::Validation, batch_size)?;
        write_prediction_log(&e.prediction_log, &rows)?;
        let report =
            MetricsReport::from_confusion(e.fold_id, &e.network, confusion_from_rows(&rows)?)?;
        results.push(FoldResult {
            fold_id: e.fold_id,
            network: e.network,
            checkpoint: e.checkpoint,
            train_log: e.train_log,
            prediction_log: e.prediction_log,
            report,
        });
    }
    Ok(ExperimentBundle {
        out_dir: out_dir.to_path_buf(),
        results,
        report_paths: None,
    })
}

/// Reloads a persisted experiment; reports are recomputed from the
/// prediction logs.
pub fn load_experiment(out_dir: &Path) -> Result<ExperimentBundle> {
    let index_path = out_dir.join("bundle.json");
    let text = std::fs::read_to_string(&index_path).map_err(|e| XrcError::io(&index_path, e))?;
    let index: BundleIndex = serde_json::from_str(&text)?;
    let mut results = Vec::new();
    for e in index.entries {
        let rows = crate::eval::read_prediction_log(&e.prediction_log)?;
        let report =
            MetricsReport::from_confusion(e.fold_id, &e.network, confusion_from_rows(&rows)?)?;
        results.push(FoldResult {
            fold_id: e.fold_id,
            network: e.network,
            checkpoint: e.checkpoint,
            train_log: e.train_log,
            prediction_log: e.prediction_log,
            report,
        });
    }
    Ok(ExperimentBundle {
        out_dir: out_dir.to_path_buf(),
        results,
        report_paths: None,
    })
}
