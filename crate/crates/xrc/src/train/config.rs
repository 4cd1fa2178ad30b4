use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Result, XrcError};
use crate::model::NetworkKind;

/// Augmentation ranges. Defaults: both flips on, 5% zoom, full-circle
/// rotation, 5% width/height shift, 1/255 rescale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentConfig {
    pub horizontal_flip: bool,
    pub vertical_flip: bool,
    /// Zoom factor drawn from [1 - zoom_range, 1 + zoom_range].
    pub zoom_range: f32,
    /// Rotation drawn from [0, rotation_range) degrees.
    pub rotation_range_deg: f32,
    /// Shifts drawn from [-range, +range] as a fraction of each dimension.
    pub width_shift: f32,
    pub height_shift: f32,
    pub rescale: f32,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            horizontal_flip: true,
            vertical_flip: true,
            zoom_range: 0.05,
            rotation_range_deg: 360.0,
            width_shift: 0.05,
            height_shift: 0.05,
            rescale: 1.0 / 255.0,
        }
    }
}

impl AugmentConfig {
    /// No-op transform for validation-style loading.
    pub fn identity() -> Self {
        AugmentConfig {
            horizontal_flip: false,
            vertical_flip: false,
            zoom_range: 0.0,
            rotation_range_deg: 0.0,
            width_shift: 0.0,
            height_shift: 0.0,
            rescale: 1.0 / 255.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingConfig {
    pub learning_rate: f32,
    /// Single-backbone networks train with larger batches than the
    /// concatenated one.
    pub batch_size_single: usize,
    pub batch_size_concat: usize,
    pub epochs_per_phase: usize,
    pub n_folds: usize,
    pub seed: u64,
    pub augment: AugmentConfig,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-4,
            batch_size_single: 30,
            batch_size_concat: 20,
            epochs_per_phase: 100,
            n_folds: 5,
            seed: 0,
            augment: AugmentConfig::default(),
        }
    }
}

impl TrainingConfig {
    pub fn batch_size(&self, kind: NetworkKind) -> usize {
        match kind {
            NetworkKind::Concatenated => self.batch_size_concat,
            _ => self.batch_size_single,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs_per_phase == 0 {
            return Err(XrcError::Config("epochs_per_phase must be at least 1".into()));
        }
        if self.batch_size_single == 0 || self.batch_size_concat == 0 {
            return Err(XrcError::Config("batch sizes must be at least 1".into()));
        }
        if self.n_folds == 0 {
            return Err(XrcError::Config("n_folds must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(XrcError::Config("learning_rate must be positive".into()));
        }
        let a = &self.augment;
        if a.zoom_range < 0.0
            || a.rotation_range_deg < 0.0
            || a.width_shift < 0.0
            || a.height_shift < 0.0
            || a.rescale <= 0.0
        {
            return Err(XrcError::Config("augmentation ranges must be non-negative".into()));
        }
        Ok(())
    }

    /// Canonical key=value rendering; also the config-file format.
    pub fn to_kv(&self) -> String {
        let a = &self.augment;
        format!(
            "learning_rate={}\nbatch_size_single={}\nbatch_size_concat={}\n\
             epochs_per_phase={}\nn_folds={}\nseed={}\n\
             horizontal_flip={}\nvertical_flip={}\nzoom_range={}\n\
             rotation_range={}\nwidth_shift={}\nheight_shift={}\nrescale={}\n",
            self.learning_rate,
            self.batch_size_single,
            self.batch_size_concat,
            self.epochs_per_phase,
            self.n_folds,
            self.seed,
            a.horizontal_flip,
            a.vertical_flip,
            a.zoom_range,
            a.rotation_range_deg,
            a.width_shift,
            a.height_shift,
            a.rescale,
        )
    }

    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_kv().as_bytes());
        hex_string(&hasher.finalize()[..8])
    }

    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value.parse().map_err(|_| {
                XrcError::Config(format!("invalid value {value:?} for config key {key:?}"))
            })
        }
        match key {
            "learning_rate" => self.learning_rate = parse(key, value)?,
            "batch_size_single" => self.batch_size_single = parse(key, value)?,
            "batch_size_concat" => self.batch_size_concat = parse(key, value)?,
            "epochs_per_phase" => self.epochs_per_phase = parse(key, value)?,
            "n_folds" => self.n_folds = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            "horizontal_flip" => self.augment.horizontal_flip = parse(key, value)?,
            "vertical_flip" => self.augment.vertical_flip = parse(key, value)?,
            "zoom_range" => self.augment.zoom_range = parse(key, value)?,
            "rotation_range" => self.augment.rotation_range_deg = parse(key, value)?,
            "width_shift" => self.augment.width_shift = parse(key, value)?,
            "height_shift" => self.augment.height_shift = parse(key, value)?,
            "rescale" => self.augment.rescale = parse(key, value)?,
            other => {
                return Err(XrcError::Config(format!("unknown config key {other:?}")));
            }
        }
        Ok(())
    }

    /// Flat `key=value` file, `#` comments and blank lines allowed.
    pub fn from_file(path: &Path) -> Result<TrainingConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| XrcError::io(path, e))?;
        let mut config = TrainingConfig::default();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                XrcError::Config(format!(
                    "{}:{}: expected key=value, got {line:?}",
                    path.display(),
                    lineno + 1
                ))
            })?;
            config.apply_override(key.trim(), value.trim())?;
        }
        config.validate()?;
        Ok(config)
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn defaults_match_published_settings() {
        let c = TrainingConfig::default();
        assert_eq!(c.learning_rate, 1e-4);
        assert_eq!(c.batch_size(NetworkKind::BackboneA), 30);
        assert_eq!(c.batch_size(NetworkKind::Concatenated), 20);
        assert_eq!(c.epochs_per_phase, 100);
        assert_eq!(c.n_folds, 5);
        assert!(c.augment.horizontal_flip && c.augment.vertical_flip);
        assert_eq!(c.augment.zoom_range, 0.05);
        assert_eq!(c.augment.rotation_range_deg, 360.0);
        assert_eq!(c.augment.width_shift, 0.05);
        assert_eq!(c.augment.rescale, 1.0 / 255.0);
        assert!(c.validate().is_ok());
    }

    #[test]
    fn zero_epochs_rejected() {
        let mut c = TrainingConfig::default();
        c.epochs_per_phase = 0;
        assert!(matches!(c.validate(), Err(XrcError::Config(_))));
    }

    #[test]
    fn file_roundtrip_and_unknown_key() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("run.cfg");
        let mut c = TrainingConfig::default();
        c.seed = 99;
        c.epochs_per_phase = 3;
        std::fs::write(&path, c.to_kv()).unwrap();
        let back = TrainingConfig::from_file(&path).unwrap();
        assert_eq!(c, back);
        assert_eq!(c.digest(), back.digest());

        std::fs::write(&path, "bogus_key=1\n").unwrap();
        assert!(TrainingConfig::from_file(&path).is_err());
    }

    #[test]
    fn digest_tracks_content() {
        let a = TrainingConfig::default();
        let mut b = TrainingConfig::default();
        b.seed = 1;
        assert_ne!(a.digest(), b.digest());
    }
}
