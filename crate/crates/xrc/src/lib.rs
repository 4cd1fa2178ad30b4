//! Three-class chest X-ray classification pipeline: dataset ingestion,
//! phased class-rebalanced training-set construction, dual-backbone CNN
//! training, and per-class metric evaluation across folds.

pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod phases;
pub mod seed;
pub mod train;

pub use error::{Result, XrcError};
