//! Training: configuration, augmentation, the phased per-fold loop and
//! whole-experiment orchestration.

mod augment;
mod config;
mod experiment;
mod log;
mod train;

pub use augment::{apply_params, augment_image, sample_params, AugmentParams};
pub use config::{AugmentConfig, TrainingConfig};
pub use experiment::{
    evaluate_split, load_experiment, reevaluate_experiment, run_experiment, ExperimentBundle,
    FoldResult,
};
pub use log::{EpochRecord, TrainingLog};
pub use train::{load_image, train_fold, FoldTrainOutcome, TrainOptions};
