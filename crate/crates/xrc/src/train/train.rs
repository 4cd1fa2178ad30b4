//! Phased training loop for one (fold, network) run.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ndarray::{Array3, Array4, Axis};
use rand::seq::SliceRandom;

use crate::error::{Result, XrcError};
use crate::ingest::{ClassLabel, ImageRecord, Manifest};
use crate::model::{build_model, save_checkpoint, ArchitectureSpec, CheckpointMeta, Model, Nadam};
use crate::phases::{phase_schedule, PhasePlan};
use crate::seed::{id_hash, stream_rng};

use super::augment::augment_image;
use super::config::TrainingConfig;
use super::log::{EpochRecord, TrainingLog};

/// Loads a PNG or JPEG as grayscale in [0, 1], resized to `resolution`
/// and replicated to three channels.
pub fn load_image(path: &Path, resolution: (usize, usize)) -> Result<Array3<f32>> {
    if !path.exists() {
        return Err(XrcError::MissingImage(path.to_path_buf()));
    }
    let img = image::open(path)
        .map_err(|e| XrcError::Data(format!("decoding {}: {e}", path.display())))?;
    let (h, w) = resolution;
    let gray = image::imageops::resize(
        &img.to_luma8(),
        w as u32,
        h as u32,
        image::imageops::FilterType::Triangle,
    );
    Ok(Array3::from_shape_fn((h, w, 3), |(y, x, _)| {
        gray.get_pixel(x as u32, y as u32).0[0] as f32 / 255.0
    }))
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Checkpoints are written here at every phase boundary.
    pub checkpoint_dir: Option<&'a Path>,
    /// Called once per batch with (phase_index, epoch, batch image ids)
    /// before the optimization step.
    pub audit: Option<&'a mut dyn FnMut(usize, usize, &[String])>,
}

#[derive(Debug)]
pub struct FoldTrainOutcome {
    pub model: Model,
    pub meta: CheckpointMeta,
    pub log: TrainingLog,
    pub checkpoints: Vec<PathBuf>,
}

/// Runs all phases of a plan in order. Within a phase, every epoch
/// reshuffles the phase's images deterministically and steps the optimizer
/// batch by batch on augmented copies. Aborts on a missing image or a
/// non-finite loss.
pub fn train_fold(
    manifest: &Manifest,
    plan: &PhasePlan,
    spec: &ArchitectureSpec,
    config: &TrainingConfig,
    mut opts: TrainOptions<'_>,
) -> Result<FoldTrainOutcome> {
    config.validate()?;
    let fold = plan.fold_id;
    let by_id: HashMap<&str, &ImageRecord> = manifest
        .records()
        .iter()
        .map(|r| (r.image_id.as_str(), r))
        .collect();

    let mut model = build_model(spec, config.seed.wrapping_add(fold as u64))?;
    let mut optimizer = Nadam::new(config.learning_rate);
    let batch_size = config.batch_size(spec.kind);
    let schedule = phase_schedule(plan, config.epochs_per_phase)?;
    let digest = config.digest();

    let mut cache: HashMap<String, Array3<f32>> = HashMap::new();
    let mut log = TrainingLog::default();
    let mut checkpoints = Vec::new();
    let mut last_epoch = 0usize;

    for (phase_index, epochs) in &schedule {
        let ids: Vec<String> = plan.phases[*phase_index].image_ids.iter().cloned().collect();
        for epoch in epochs.clone() {
            let started = Instant::now();
            let mut order = ids.clone();
            order.shuffle(&mut stream_rng(
                config.seed,
                "epoch-shuffle",
                &[fold as u64, *phase_index as u64, epoch as u64],
            ));

            let mut loss_sum = 0.0f64;
            let mut correct = 0usize;
            for batch_ids in order.chunks(batch_size) {
                if let Some(audit) = opts.audit.as_deref_mut() {
                    audit(*phase_index, epoch, batch_ids);
                }
                let mut batch = Array4::<f32>::zeros((
                    batch_ids.len(),
                    spec.input_resolution.0,
                    spec.input_resolution.1,
                    3,
                ));
                let mut targets: Vec<ClassLabel> = Vec::with_capacity(batch_ids.len());
                for (i, id) in batch_ids.iter().enumerate() {
                    let record = by_id.get(id.as_str()).ok_or_else(|| {
                        XrcError::Data(format!("phase plan references unknown id {id:?}"))
                    })?;
                    if !cache.contains_key(id) {
                        let img = load_image(&record.file_path, spec.input_resolution)?;
                        cache.insert(id.clone(), img);
                    }
                    let augmented = augment_image(
                        &cache[id],
                        &config.augment,
                        config.seed,
                        &[fold as u64, epoch as u64, id_hash(id)],
                    );
                    batch.index_axis_mut(Axis(0), i).assign(&augmented);
                    targets.push(record.class_label);
                }
                let (loss, batch_correct) =
                    model
                        .train_step(batch.view(), &targets, &mut optimizer)
                        .map_err(|e| XrcError::Training {
                            fold,
                            phase: *phase_index,
                            epoch,
                            reason: e.to_string(),
                        })?;
                loss_sum += loss as f64 * batch_ids.len() as f64;
                correct += batch_correct;
            }

            log.push(EpochRecord {
                fold,
                phase: *phase_index,
                epoch,
                loss: (loss_sum / order.len() as f64) as f32,
                train_acc: correct as f32 / order.len() as f32,
                seconds: started.elapsed().as_secs_f64(),
            });
            last_epoch = epoch;
        }

        if let Some(dir) = opts.checkpoint_dir {
            std::fs::create_dir_all(dir).map_err(|e| XrcError::io(dir, e))?;
            let path = dir.join(format!(
                "{}_fold{}_phase{}.ckpt",
                spec.name,
                fold,
                phase_index + 1
            ));
            let meta = CheckpointMeta {
                spec: spec.clone(),
                epoch: last_epoch,
                fold_id: fold,
                config_digest: digest.clone(),
            };
            save_checkpoint(&path, &model, &meta)?;
            checkpoints.push(path);
        }
    }

    let meta = CheckpointMeta {
        spec: spec.clone(),
        epoch: last_epoch,
        fold_id: fold,
        config_digest: digest,
    };
    Ok(FoldTrainOutcome {
        model,
        meta,
        log,
        checkpoints,
    })
}
