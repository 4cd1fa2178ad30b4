//! Synthetic corpus generation.
//!
//! Produces small PNG images whose classes are trivially separable, so the
//! full pipeline (ingest, phase sampling, training, evaluation) can run in
//! CI without the multi-gigabyte source datasets.

use std::path::{Path, PathBuf};

use image::{GrayImage, Luma};
use rand::Rng;

use crate::error::{Result, XrcError};
use crate::seed::{id_hash, stream_rng};

use super::{ClassLabel, ImageRecord, PixelFormat, Source};

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub n_covid: usize,
    pub n_cohen_pneumonia: usize,
    pub n_rsna_pneumonia: usize,
    pub n_normal: usize,
    /// Square image side in pixels.
    pub resolution: u32,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Corpus sized exactly like the real one: 180 COVID-19 and 42
    /// pneumonia images from the first source, 6012 pneumonia and 8851
    /// normal from the second.
    pub fn full_mirror(resolution: u32, seed: u64) -> Self {
        SyntheticSpec {
            n_covid: 180,
            n_cohen_pneumonia: 42,
            n_rsna_pneumonia: 6012,
            n_normal: 8851,
            resolution,
            seed,
        }
    }

    /// Small corpus of roughly `n` images keeping the same class
    /// proportions, with floors so every pool is non-empty.
    pub fn scaled(n: usize, resolution: u32, seed: u64) -> Self {
        let total = 15085.0;
        let scale = n as f64 / total;
        SyntheticSpec {
            n_covid: ((180.0 * scale) as usize).max(4),
            n_cohen_pneumonia: ((42.0 * scale) as usize).max(2),
            n_rsna_pneumonia: ((6012.0 * scale) as usize).max(4),
            n_normal: ((8851.0 * scale) as usize).max(4),
            resolution,
            seed,
        }
    }

    pub fn total(&self) -> usize {
        self.n_covid + self.n_cohen_pneumonia + self.n_rsna_pneumonia + self.n_normal
    }
}

/// Record metadata without any files on disk. Used by tests that only
/// exercise split and phase arithmetic.
#[cfg(test)]
pub(crate) fn synthetic_records(
    n_normal: usize,
    n_pneumonia: usize,
    n_covid: usize,
) -> Vec<ImageRecord> {
    let cohen_pneumonia = n_pneumonia / 2;
    let mut records = Vec::new();
    for i in 0..n_normal {
        records.push(meta_record(ClassLabel::Normal, Source::Rsna, "normal", i));
    }
    for i in 0..n_pneumonia {
        if i < cohen_pneumonia {
            records.push(meta_record(ClassLabel::Pneumonia, Source::CohenXray, "SARS", i));
        } else {
            records.push(meta_record(ClassLabel::Pneumonia, Source::Rsna, "pneumonia", i));
        }
    }
    for i in 0..n_covid {
        records.push(meta_record(ClassLabel::Covid19, Source::CohenXray, "COVID-19", i));
    }
    records
}

fn meta_record(class: ClassLabel, source: Source, sublabel: &str, i: usize) -> ImageRecord {
    let tag = match (class, source) {
        (ClassLabel::Normal, _) => "nor",
        (ClassLabel::Pneumonia, Source::CohenXray) => "pnc",
        (ClassLabel::Pneumonia, Source::Rsna) => "pnr",
        (ClassLabel::Covid19, _) => "cov",
    };
    ImageRecord {
        image_id: format!("syn-{tag}-{i:05}"),
        case_id: format!("case-{tag}-{:05}", i / 2),
        class_label: class,
        source,
        original_sublabel: sublabel.to_string(),
        file_path: PathBuf::from(format!("syn-{tag}-{i:05}.png")),
        pixel_format: PixelFormat::Png8,
    }
}

/// Writes the corpus to `out_dir` and returns its records.
///
/// Class appearance is deliberately separable: normals are a dim vertical
/// gradient, pneumonia images carry periodic stripes, COVID-19 images a
/// bright central blob. Per-image noise comes from a seeded stream so the
/// corpus is reproducible byte for byte.
pub fn generate_synthetic_corpus(spec: &SyntheticSpec, out_dir: &Path) -> Result<Vec<ImageRecord>> {
    std::fs::create_dir_all(out_dir).map_err(|e| XrcError::io(out_dir, e))?;
    let mut records = Vec::with_capacity(spec.total());
    let groups = [
        (ClassLabel::Normal, Source::Rsna, "normal", spec.n_normal),
        (ClassLabel::Pneumonia, Source::CohenXray, "SARS", spec.n_cohen_pneumonia),
        (ClassLabel::Pneumonia, Source::Rsna, "pneumonia", spec.n_rsna_pneumonia),
        (ClassLabel::Covid19, Source::CohenXray, "COVID-19", spec.n_covid),
    ];
    for (class, source, sublabel, count) in groups {
        for i in 0..count {
            let mut record = meta_record(class, source, sublabel, i);
            let path = out_dir.join(record.file_path.file_name().unwrap());
            let img = render_class_image(class, spec.resolution, spec.seed, &record.image_id);
            img.save(&path)
                .map_err(|e| XrcError::Data(format!("writing {}: {e}", path.display())))?;
            record.file_path = path;
            records.push(record);
        }
    }
    Ok(records)
}

fn render_class_image(class: ClassLabel, side: u32, seed: u64, image_id: &str) -> GrayImage {
    let mut rng = stream_rng(seed, "synthetic-image", &[id_hash(image_id)]);
    let center = side as f32 / 2.0;
    GrayImage::from_fn(side, side, |x, y| {
        let base = match class {
            ClassLabel::Normal => 40.0 + 40.0 * (y as f32 / side as f32),
            ClassLabel::Pneumonia => {
                if (x / 3) % 2 == 0 {
                    170.0
                } else {
                    90.0
                }
            }
            ClassLabel::Covid19 => {
                let dx = (x as f32 - center) / center;
                let dy = (y as f32 - center) / center;
                230.0 * (-2.0 * (dx * dx + dy * dy)).exp() + 30.0
            }
        };
        let noise: f32 = rng.gen_range(-12.0..12.0);
        Luma([(base + noise).clamp(0.0, 255.0) as u8])
    })
}
