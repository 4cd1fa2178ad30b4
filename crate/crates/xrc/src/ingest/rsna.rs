use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Result, XrcError};

use super::{decode_dicom, ClassLabel, ImageRecord, PixelFormat, Source};

/// Reads the pneumonia-challenge label table and converts each referenced
/// DICOM to an 8-bit PNG under `png_out_dir`.
///
/// The table needs a `patientId` column plus either a numeric `Target`
/// (1 = pneumonia) or a textual `class`/`label` column. Duplicate rows per
/// patient (one per bounding box in the source data) collapse to one
/// record; the detection boxes themselves are not used.
pub fn ingest_rsna(
    label_table: &Path,
    dicom_dir: &Path,
    png_out_dir: &Path,
) -> Result<Vec<ImageRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(label_table)?;
    let headers = rdr.headers()?.clone();
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.iter().any(|n| h.trim().eq_ignore_ascii_case(n)))
    };
    let c_id = find(&["patientId", "image_id", "id"]).ok_or_else(|| {
        XrcError::Data(format!(
            "RSNA label table {} lacks a patientId column",
            label_table.display()
        ))
    })?;
    let c_target = find(&["Target"]);
    let c_class = find(&["class", "label"]);
    if c_target.is_none() && c_class.is_none() {
        return Err(XrcError::Data(format!(
            "RSNA label table {} lacks a Target or class column",
            label_table.display()
        )));
    }

    let mut labels: BTreeMap<String, ClassLabel> = BTreeMap::new();
    for row in rdr.records() {
        let row = row?;
        let id = row.get(c_id).unwrap_or("").trim().to_string();
        if id.is_empty() {
            continue;
        }
        let label = if let Some(ct) = c_target {
            match row.get(ct).unwrap_or("").trim() {
                "1" => ClassLabel::Pneumonia,
                _ => ClassLabel::Normal,
            }
        } else {
            let text = row.get(c_class.unwrap()).unwrap_or("").trim().to_ascii_lowercase();
            if text.contains("pneumonia") || text == "p" {
                ClassLabel::Pneumonia
            } else {
                ClassLabel::Normal
            }
        };
        // Pneumonia rows win over the "No Lung Opacity" rows some tables
        // carry for the same patient.
        labels
            .entry(id)
            .and_modify(|l| {
                if label == ClassLabel::Pneumonia {
                    *l = ClassLabel::Pneumonia;
                }
            })
            .or_insert(label);
    }

    std::fs::create_dir_all(png_out_dir).map_err(|e| XrcError::io(png_out_dir, e))?;
    let mut records = Vec::with_capacity(labels.len());
    for (id, class_label) in labels {
        let dcm_path = dicom_dir.join(format!("{id}.dcm"));
        if !dcm_path.is_file() {
            return Err(XrcError::MissingImage(dcm_path));
        }
        let dicom = decode_dicom(&dcm_path)
            .map_err(|e| XrcError::Data(format!("record {id}: {e}")))?;
        let png_path = png_out_dir.join(format!("{id}.png"));
        dicom
            .to_gray8()
            .save(&png_path)
            .map_err(|e| XrcError::Data(format!("record {id}: writing PNG: {e}")))?;
        let sublabel = match class_label {
            ClassLabel::Pneumonia => "pneumonia",
            _ => "normal",
        };
        records.push(ImageRecord {
            image_id: format!("rsna-{id}"),
            case_id: format!("rsna-case-{id}"),
            class_label,
            source: Source::Rsna,
            original_sublabel: sublabel.to_string(),
            file_path: png_path,
            pixel_format: PixelFormat::Png8,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::write_dicom_gray;
    use std::fs;
    use tempfile::tempdir;

    fn write_fixture_dicom(dir: &Path, id: &str) {
        let pixels: Vec<u16> = (0..64).map(|i| i * 100).collect();
        write_dicom_gray(&dir.join(format!("{id}.dcm")), 8, 8, &pixels).unwrap();
    }

    #[test]
    fn empty_label_table() {
        let dir = tempdir().unwrap();
        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "patientId,Target\n").unwrap();
        let records = ingest_rsna(&labels, dir.path(), &dir.path().join("png")).unwrap();
        assert!(records.is_empty());
    }

    #[test]
    fn four_image_fixture_converts_to_png8() {
        let dir = tempdir().unwrap();
        for id in ["a", "b", "c", "d"] {
            write_fixture_dicom(dir.path(), id);
        }
        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "patientId,Target\na,1\nb,1\nc,0\nd,0\n").unwrap();
        let records = ingest_rsna(&labels, dir.path(), &dir.path().join("png")).unwrap();
        assert_eq!(records.len(), 4);
        let pneu = records.iter().filter(|r| r.class_label == ClassLabel::Pneumonia).count();
        let norm = records.iter().filter(|r| r.class_label == ClassLabel::Normal).count();
        assert_eq!((pneu, norm), (2, 2));
        for r in &records {
            assert_eq!(r.pixel_format, PixelFormat::Png8);
            let img = image::open(&r.file_path).unwrap().to_luma8();
            assert_eq!(img.dimensions(), (8, 8));
        }
    }

    #[test]
    fn duplicate_box_rows_collapse() {
        let dir = tempdir().unwrap();
        write_fixture_dicom(dir.path(), "a");
        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "patientId,Target\na,1\na,1\n").unwrap();
        let records = ingest_rsna(&labels, dir.path(), &dir.path().join("png")).unwrap();
        assert_eq!(records.len(), 1);
    }

    #[test]
    fn corrupt_dicom_names_the_record() {
        let dir = tempdir().unwrap();
        fs::write(dir.path().join("bad.dcm"), b"garbage").unwrap();
        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "patientId,Target\nbad,0\n").unwrap();
        let err = ingest_rsna(&labels, dir.path(), &dir.path().join("png")).unwrap_err();
        assert!(err.to_string().contains("record bad"));
    }

    #[test]
    fn label_without_file_is_an_error() {
        let dir = tempdir().unwrap();
        let labels = dir.path().join("labels.csv");
        fs::write(&labels, "patientId,Target\nmissing,0\n").unwrap();
        let err = ingest_rsna(&labels, dir.path(), &dir.path().join("png")).unwrap_err();
        assert!(err.to_string().contains("missing.dcm"));
    }
}
