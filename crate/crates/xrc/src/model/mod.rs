//! Network architecture specs, buildable models and checkpoints.

mod checkpoint;
#[allow(clippy::module_inception)]
mod model;
pub mod nn;
mod spec;

pub use checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
pub use model::{argmax_label, build_model, Model};
pub use nn::Nadam;
pub use spec::{
    named_spec, ArchitectureSpec, BackboneKind, BackboneSpec, ConvBlockSpec, HeadSpec, NetworkKind,
    DEFAULT_RESOLUTION, TINY_RESOLUTION,
};
