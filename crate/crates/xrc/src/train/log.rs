use std::path::Path;

use crate::error::{Result, XrcError};

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub fold: usize,
    pub phase: usize,
    /// Global epoch number across all phases, 1-based.
    pub epoch: usize,
    pub loss: f32,
    pub train_acc: f32,
    pub seconds: f64,
}

/// Per-epoch training history for one (fold, network) run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingLog {
    pub entries: Vec<EpochRecord>,
}

impl TrainingLog {
    pub fn push(&mut self, entry: EpochRecord) {
        self.entries.push(entry);
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut wtr = csv::Writer::from_path(path)?;
        wtr.write_record(["fold", "phase", "epoch", "loss", "train_acc", "seconds"])?;
        for e in &self.entries {
            wtr.write_record([
                e.fold.to_string(),
                e.phase.to_string(),
                e.epoch.to_string(),
                format!("{:.6}", e.loss),
                format!("{:.6}", e.train_acc),
                format!("{:.3}", e.seconds),
            ])?;
        }
        wtr.flush().map_err(|e| XrcError::io(path, e))?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<TrainingLog> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut log = TrainingLog::default();
        for row in rdr.records() {
            let row = row?;
            let field = |i: usize| -> Result<&str> {
                row.get(i).ok_or_else(|| {
                    XrcError::Data(format!("training log {} has a short row", path.display()))
                })
            };
            let bad =
                |what: &str| XrcError::Data(format!("training log {}: bad {what}", path.display()));
            log.push(EpochRecord {
                fold: field(0)?.parse().map_err(|_| bad("fold"))?,
                phase: field(1)?.parse().map_err(|_| bad("phase"))?,
                epoch: field(2)?.parse().map_err(|_| bad("epoch"))?,
                loss: field(3)?.parse().map_err(|_| bad("loss"))?,
                train_acc: field(4)?.parse().map_err(|_| bad("train_acc"))?,
                seconds: field(5)?.parse().map_err(|_| bad("seconds"))?,
            });
        }
        Ok(log)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn roundtrip() {
        let mut log = TrainingLog::default();
        for epoch in 1..=4 {
            log.push(EpochRecord {
                fold: 1,
                phase: (epoch - 1) / 2,
                epoch,
                loss: 1.0 / epoch as f32,
                train_acc: 0.25 * epoch as f32,
                seconds: 0.125,
            });
        }
        let dir = tempdir().unwrap();
        let path = dir.path().join("log.csv");
        log.write(&path).unwrap();
        let back = TrainingLog::read(&path).unwrap();
        assert_eq!(back.entries.len(), 4);
        assert_eq!(back.entries[3].epoch, 4);
        assert_eq!(back.entries[3].phase, 1);
        assert!((back.entries[0].loss - 1.0).abs() < 1e-6);
    }
}
