use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use crate::error::{Result, XrcError};
use crate::seed::stream_rng;

use super::{ClassLabel, ImageRecord, PixelFormat, Source, Split, NUM_CLASSES};

use rand::seq::SliceRandom;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;
const MANIFEST_HEADER: [&str; 7] = [
    "image_id",
    "case_id",
    "class_label",
    "source",
    "original_sublabel",
    "file_path",
    "split",
];

/// Per-class training-set sizes. Remaining records go to validation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub train_covid: usize,
    pub train_pneumonia: usize,
    pub train_normal: usize,
    /// How many of the pneumonia training records must come from the
    /// Cohen corpus (the shared core used by every training phase).
    pub cohen_pneumonia_train: usize,
    /// Assign whole cases instead of single images. Off by default; the
    /// published split counts are only reachable image-level.
    pub patient_level: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_covid: 149,
            train_pneumonia: 1634,
            train_normal: 2000,
            cohen_pneumonia_train: 34,
            patient_level: false,
        }
    }
}

impl SplitSpec {
    pub fn train_count(&self, class: ClassLabel) -> usize {
        match class {
            ClassLabel::Normal => self.train_normal,
            ClassLabel::Pneumonia => self.train_pneumonia,
            ClassLabel::Covid19 => self.train_covid,
        }
    }
}

/// Canonical index of every image with its split assignment.
///
/// Records are kept sorted by `image_id`, so serialization is
/// order-deterministic regardless of how ingestion was scheduled.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Manifest {
    records: Vec<ImageRecord>,
    split: BTreeMap<String, Split>,
    pub schema_version: u32,
}

impl Manifest {
    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn split_of(&self, image_id: &str) -> Option<Split> {
        self.split.get(image_id).copied()
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &ImageRecord> {
        self.records
            .iter()
            .filter(move |r| self.split.get(&r.image_id) == Some(&split))
    }

    pub fn class_totals(&self) -> [usize; NUM_CLASSES] {
        let mut totals = [0usize; NUM_CLASSES];
        for r in &self.records {
            totals[r.class_label.index()] += 1;
        }
        totals
    }

    pub fn split_class_totals(&self, split: Split) -> [usize; NUM_CLASSES] {
        let mut totals = [0usize; NUM_CLASSES];
        for r in self.records_in(split) {
            totals[r.class_label.index()] += 1;
        }
        totals
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(MANIFEST_HEADER)?;
        for r in &self.records {
            let split = self.split[&r.image_id];
            wtr.write_record([
                r.image_id.as_str(),
                r.case_id.as_str(),
                r.class_label.as_str(),
                r.source.as_str(),
                r.original_sublabel.as_str(),
                &r.file_path.display().to_string(),
                split.as_str(),
            ])?;
        }
        wtr.flush().map_err(|e| XrcError::io(path, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Manifest> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        {
            let headers = rdr.headers()?;
            if headers.iter().ne(MANIFEST_HEADER) {
                return Err(XrcError::Data(format!(
                    "manifest {} has unexpected header {:?}",
                    path.display(),
                    headers
                )));
            }
        }
        let mut records = Vec::new();
        let mut split = BTreeMap::new();
        for row in rdr.records() {
            let row = row?;
            if row.len() != MANIFEST_HEADER.len() {
                return Err(XrcError::Data(format!(
                    "manifest row has {} fields, expected {}",
                    row.len(),
                    MANIFEST_HEADER.len()
                )));
            }
            let file_path = PathBuf::from(&row[5]);
            let pixel_format = match file_path.extension().and_then(|e| e.to_str()) {
                Some("dcm") => PixelFormat::DicomRaw,
                _ => PixelFormat::Png8,
            };
            let record = ImageRecord {
                image_id: row[0].to_string(),
                case_id: row[1].to_string(),
                class_label: row[2].parse()?,
                source: row[3].parse()?,
                original_sublabel: row[4].to_string(),
                file_path,
                pixel_format,
            };
            split.insert(record.image_id.clone(), row[6].parse()?);
            records.push(record);
        }
        let manifest = Manifest {
            records,
            split,
            schema_version: MANIFEST_SCHEMA_VERSION,
        };
        manifest.validate()?;
        Ok(manifest)
    }

    fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if !seen.insert(&r.image_id) {
                return Err(XrcError::Data(format!(
                    "duplicate image_id {:?} in manifest",
                    r.image_id
                )));
            }
            if r.class_label == ClassLabel::Covid19 && r.source != Source::CohenXray {
                return Err(XrcError::Data(format!(
                    "record {:?}: COVID19 labels can only come from the Cohen corpus",
                    r.image_id
                )));
            }
            if !self.split.contains_key(&r.image_id) {
                return Err(XrcError::Data(format!(
                    "record {:?} has no split assignment",
                    r.image_id
                )));
            }
        }
        if self.split.len() != self.records.len() {
            return Err(XrcError::Data(
                "split table references unknown image_ids".into(),
            ));
        }
        Ok(())
    }
}

/// Assigns every record to TRAIN or VALIDATION.
///
/// Deterministic in `(records, split_spec, seed)`: candidates are sorted by
/// `image_id` and shuffled by a seeded generator before the per-class
/// training quota is taken. The pneumonia quota is filled Cohen-first so
/// the shared pneumonia core exists in TRAIN; everything else lands in
/// VALIDATION.
pub fn build_manifest(
    records: Vec<ImageRecord>,
    split_spec: &SplitSpec,
    seed: u64,
) -> Result<Manifest> {
    if records.is_empty() {
        return Err(XrcError::Data("cannot build a manifest from zero records".into()));
    }
    let mut records = records;
    records.sort_by(|a, b| a.image_id.cmp(&b.image_id));

    let mut train_ids: BTreeSet<String> = BTreeSet::new();
    for class in ClassLabel::ALL {
        let ids = select_train_ids(&records, class, split_spec, seed)?;
        train_ids.extend(ids);
    }

    let mut split = BTreeMap::new();
    for r in &records {
        let s = if train_ids.contains(&r.image_id) {
            Split::Train
        } else {
            Split::Validation
        };
        split.insert(r.image_id.clone(), s);
    }

    let manifest = Manifest {
        records,
        split,
        schema_version: MANIFEST_SCHEMA_VERSION,
    };
    manifest.validate()?;
    Ok(manifest)
}

fn select_train_ids(
    records: &[ImageRecord],
    class: ClassLabel,
    split_spec: &SplitSpec,
    seed: u64,
) -> Result<Vec<String>> {
    let needed = split_spec.train_count(class);
    let pool: Vec<&ImageRecord> = records.iter().filter(|r| r.class_label == class).collect();
    if pool.len() < needed {
        return Err(XrcError::InsufficientRecords {
            class: class.as_str().into(),
            needed,
            available: pool.len(),
        });
    }

    let mut rng = stream_rng(seed, "split", &[class.index() as u64]);
    let mut picked = Vec::with_capacity(needed);

    if class == ClassLabel::Pneumonia && split_spec.cohen_pneumonia_train > 0 {
        // Cohen pneumonia feeds the shared core; fill that quota first.
        let mut cohen: Vec<&ImageRecord> = pool
            .iter()
            .copied()
            .filter(|r| r.source == Source::CohenXray)
            .collect();
        cohen.shuffle(&mut rng);
        let from_cohen = split_spec.cohen_pneumonia_train.min(cohen.len()).min(needed);
        picked.extend(cohen[..from_cohen].iter().map(|r| r.image_id.clone()));
        let mut rest: Vec<&ImageRecord> = pool
            .iter()
            .copied()
            .filter(|r| !picked.contains(&r.image_id))
            .collect();
        if split_spec.patient_level {
            take_by_case(&mut rest, needed - from_cohen, &mut rng, &mut picked);
        } else {
            rest.shuffle(&mut rng);
            picked.extend(rest[..needed - from_cohen].iter().map(|r| r.image_id.clone()));
        }
    } else {
        let mut pool = pool;
        if split_spec.patient_level {
            take_by_case(&mut pool, needed, &mut rng, &mut picked);
        } else {
            pool.shuffle(&mut rng);
            picked.extend(pool[..needed].iter().map(|r| r.image_id.clone()));
        }
    }
    Ok(picked)
}

/// Patient-level variant: assigns whole cases in shuffled case order until
/// the quota is met. Counts may overshoot by up to one case.
fn take_by_case(
    pool: &mut Vec<&ImageRecord>,
    needed: usize,
    rng: &mut impl rand::Rng,
    picked: &mut Vec<String>,
) {
    let mut cases: Vec<String> = pool
        .iter()
        .map(|r| r.case_id.clone())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    cases.shuffle(rng);
    let mut taken = 0usize;
    for case in cases {
        if taken >= needed {
            break;
        }
        for r in pool.iter().filter(|r| r.case_id == case) {
            picked.push(r.image_id.clone());
            taken += 1;
        }
    }
}
