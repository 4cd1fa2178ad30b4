use std::path::Path;

use log::warn;

use crate::error::{Result, XrcError};

use super::{map_cohen_finding, ImageRecord, PixelFormat, Source};

/// Reads the Cohen chest X-ray metadata table and returns one record per
/// usable X-ray image.
///
/// CT rows are dropped, lateral views are dropped, findings outside the
/// three-class mapping are skipped with a warning. A listed image that is
/// missing on disk is an error naming the path.
pub fn ingest_cohen(metadata_table: &Path, image_dir: &Path) -> Result<Vec<ImageRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_path(metadata_table)?;

    let headers = rdr.headers()?.clone();
    let col = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| {
                XrcError::Data(format!(
                    "Cohen metadata {} lacks column {name:?}",
                    metadata_table.display()
                ))
            })
    };
    let c_patient = col("patientid")?;
    let c_finding = col("finding")?;
    let c_modality = col("modality")?;
    let c_filename = col("filename")?;
    let c_view = headers
        .iter()
        .position(|h| h.trim().eq_ignore_ascii_case("view"));

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let field = |i: usize| row.get(i).unwrap_or("").trim();

        if !field(c_modality).eq_ignore_ascii_case("X-ray") {
            continue;
        }
        if let Some(cv) = c_view {
            let view = field(cv);
            if view.eq_ignore_ascii_case("L") || view.to_ascii_lowercase().contains("lateral") {
                continue;
            }
        }
        let finding = field(c_finding);
        let Some(class_label) = map_cohen_finding(finding) else {
            warn!("skipping Cohen image {:?}: finding {finding:?} outside class map", field(c_filename));
            continue;
        };

        let filename = field(c_filename);
        let file_path = image_dir.join(filename);
        if !file_path.is_file() {
            return Err(XrcError::MissingImage(file_path));
        }
        let image_id = format!(
            "cohen-{}",
            Path::new(filename)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or(filename)
        );
        records.push(ImageRecord {
            image_id,
            case_id: format!("cohen-case-{}", field(c_patient)),
            class_label,
            source: Source::CohenXray,
            original_sublabel: finding.to_string(),
            file_path,
            pixel_format: PixelFormat::Png8,
        });
    }
    Ok(records)
}
