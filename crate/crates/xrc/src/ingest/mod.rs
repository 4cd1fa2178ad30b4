//! Dataset ingestion: normalizes the two source corpora into a single
//! manifest with a deterministic train/validation split.

mod cohen;
mod dicom;
mod manifest;
mod rsna;
mod synthetic;

pub use cohen::ingest_cohen;
pub use dicom::{decode_dicom, write_dicom_gray, DicomImage};
pub use manifest::{build_manifest, Manifest, SplitSpec};
pub use rsna::ingest_rsna;
pub use synthetic::{generate_synthetic_corpus, SyntheticSpec};
#[cfg(test)]
pub(crate) use synthetic::synthetic_records as synthetic_records_for_tests;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::XrcError;

pub const NUM_CLASSES: usize = 3;

/// Class order is fixed everywhere: NORMAL < PNEUMONIA < COVID19.
/// Confusion-matrix rows/columns and argmax tie-breaking use this order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ClassLabel {
    Normal = 0,
    Pneumonia = 1,
    Covid19 = 2,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; NUM_CLASSES] =
        [ClassLabel::Normal, ClassLabel::Pneumonia, ClassLabel::Covid19];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<ClassLabel> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::Normal => "NORMAL",
            ClassLabel::Pneumonia => "PNEUMONIA",
            ClassLabel::Covid19 => "COVID19",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = XrcError;

    fn from_str(s: &str) -> Result<Self, XrcError> {
        match s {
            "NORMAL" => Ok(ClassLabel::Normal),
            "PNEUMONIA" => Ok(ClassLabel::Pneumonia),
            "COVID19" => Ok(ClassLabel::Covid19),
            other => Err(XrcError::Data(format!("unknown class label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    CohenXray,
    Rsna,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::CohenXray => "COHEN_XRAY",
            Source::Rsna => "RSNA",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = XrcError;

    fn from_str(s: &str) -> Result<Self, XrcError> {
        match s {
            "COHEN_XRAY" => Ok(Source::CohenXray),
            "RSNA" => Ok(Source::Rsna),
            other => Err(XrcError::Data(format!("unknown source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PixelFormat {
    Png8,
    DicomRaw,
}

impl PixelFormat {
    pub fn as_str(self) -> &'static str {
        match self {
            PixelFormat::Png8 => "PNG8",
            PixelFormat::DicomRaw => "DICOM_RAW",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Split {
    Train,
    Validation,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "TRAIN",
            Split::Validation => "VALIDATION",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = XrcError;

    fn from_str(s: &str) -> Result<Self, XrcError> {
        match s {
            "TRAIN" => Ok(Split::Train),
            "VALIDATION" => Ok(Split::Validation),
            other => Err(XrcError::Data(format!("unknown split {other:?}"))),
        }
    }
}

/// One X-ray image with its case identity, class label and provenance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub image_id: String,
    pub case_id: String,
    pub class_label: ClassLabel,
    pub source: Source,
    pub original_sublabel: String,
    pub file_path: PathBuf,
    pub pixel_format: PixelFormat,
}

/// Maps a Cohen finding string to a class, or `None` when the finding is
/// outside the three-class scope (ARDS, unlisted findings, ...).
pub fn map_cohen_finding(finding: &str) -> Option<ClassLabel> {
    let f = finding.trim();
    if f.split('/').any(|part| part.trim().eq_ignore_ascii_case("COVID-19")) {
        return Some(ClassLabel::Covid19);
    }
    for pneumonia_kind in ["SARS", "Streptococcus", "Pneumocystis"] {
        if f.split('/').any(|part| part.trim().eq_ignore_ascii_case(pneumonia_kind)) {
            return Some(ClassLabel::Pneumonia);
        }
    }
    None
}
