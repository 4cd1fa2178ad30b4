//! Prediction logs: one row per evaluated image, consumable standalone so
//! metrics can be recomputed from any external run.

use std::path::Path;

use crate::error::{Result, XrcError};
use crate::ingest::ClassLabel;

use super::confusion::ConfusionMatrix;

const HEADER: [&str; 6] = [
    "image_id",
    "true_label",
    "predicted_label",
    "p_normal",
    "p_pneumonia",
    "p_covid19",
];

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub image_id: String,
    pub true_label: ClassLabel,
    pub predicted_label: ClassLabel,
    pub probabilities: [f64; 3],
}

pub fn write_prediction_log(path: &Path, rows: &[PredictionRow]) -> Result<()> {
    let mut wtr = csv::Writer::from_path(path)?;
    wtr.write_record(HEADER)?;
    for r in rows {
        wtr.write_record([
            r.image_id.as_str(),
            r.true_label.as_str(),
            r.predicted_label.as_str(),
            &format!("{:.6}", r.probabilities[0]),
            &format!("{:.6}", r.probabilities[1]),
            &format!("{:.6}", r.probabilities[2]),
        ])?;
    }
    wtr.flush().map_err(|e| XrcError::io(path, e))?;
    Ok(())
}

pub fn read_prediction_log(path: &Path) -> Result<Vec<PredictionRow>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    if rdr.headers()?.iter().ne(HEADER) {
        return Err(XrcError::Data(format!(
            "prediction log {} has an unexpected header",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let prob = |i: usize| -> Result<f64> {
            row[i]
                .parse::<f64>()
                .map_err(|_| XrcError::Data(format!("bad probability {:?}", &row[i])))
        };
        rows.push(PredictionRow {
            image_id: row[0].to_string(),
            true_label: row[1].parse()?,
            predicted_label: row[2].parse()?,
            probabilities: [prob(3)?, prob(4)?, prob(5)?],
        });
    }
    Ok(rows)
}

pub fn confusion_from_rows(rows: &[PredictionRow]) -> Result<ConfusionMatrix> {
    let t: Vec<ClassLabel> = rows.iter().map(|r| r.true_label).collect();
    let p: Vec<ClassLabel> = rows.iter().map(|r| r.predicted_label).collect();
    ConfusionMatrix::from_labels(&t, &p)
}
