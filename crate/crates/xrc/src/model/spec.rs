//! Declarative architecture descriptions.
//!
//! A spec fully determines feature shapes, so concatenation compatibility
//! and channel arithmetic are checkable without instantiating weights. The
//! registry carries the two published full-scale backbones (shape metadata
//! plus a pretrained-weights contract) and tiny stand-in backbones that
//! train in seconds on CPU.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Result, XrcError};
use crate::ingest::NUM_CLASSES;

use super::nn::same_pad_out;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NetworkKind {
    BackboneA,
    BackboneB,
    Concatenated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvBlockSpec {
    pub out_channels: usize,
    pub kernel: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum BackboneKind {
    /// Buildable stack of conv+ReLU blocks (the tiny test doubles).
    Stack(Vec<ConvBlockSpec>),
    /// A published large-scale backbone, described by its feature
    /// geometry. Building it requires a weights file.
    Published {
        feature_stride: usize,
        feature_channels: usize,
        weights: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackboneSpec {
    pub name: String,
    pub kind: BackboneKind,
}

impl BackboneSpec {
    /// Feature-map shape (h, w, c) for a given input resolution.
    pub fn feature_shape(&self, input_h: usize, input_w: usize) -> (usize, usize, usize) {
        match &self.kind {
            BackboneKind::Stack(blocks) => {
                let mut h = input_h;
                let mut w = input_w;
                let mut c = 0;
                for b in blocks {
                    h = same_pad_out(h, b.stride);
                    w = same_pad_out(w, b.stride);
                    c = b.out_channels;
                }
                (h, w, c)
            }
            BackboneKind::Published {
                feature_stride,
                feature_channels,
                ..
            } => (
                same_pad_out(input_h, *feature_stride),
                same_pad_out(input_w, *feature_stride),
                *feature_channels,
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    /// Channels of the pointwise conv applied after (concatenated)
    /// backbone features, before pooling and the 3-way softmax.
    pub conv_channels: usize,
}

impl Default for HeadSpec {
    fn default() -> Self {
        HeadSpec { conv_channels: 128 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub name: String,
    pub kind: NetworkKind,
    /// (height, width); inputs are 3-channel in [0, 1].
    pub input_resolution: (usize, usize),
    pub backbones: Vec<BackboneSpec>,
    pub head: HeadSpec,
    pub pretrained_init: bool,
}

impl ArchitectureSpec {
    pub fn num_classes(&self) -> usize {
        NUM_CLASSES
    }

    pub fn validate(&self) -> Result<()> {
        let expected = match self.kind {
            NetworkKind::Concatenated => 2,
            _ => 1,
        };
        if self.backbones.len() != expected {
            return Err(XrcError::Model(format!(
                "{}: expected {expected} backbone(s), found {}",
                self.name,
                self.backbones.len()
            )));
        }
        if self.kind == NetworkKind::Concatenated {
            let (h, w) = self.input_resolution;
            let a = self.backbones[0].feature_shape(h, w);
            let b = self.backbones[1].feature_shape(h, w);
            if (a.0, a.1) != (b.0, b.1) {
                return Err(XrcError::Model(format!(
                    "{}: backbone feature maps disagree spatially: {:?} vs {:?}",
                    self.name,
                    (a.0, a.1),
                    (b.0, b.1)
                )));
            }
        }
        Ok(())
    }

    /// Shape of the (possibly concatenated) feature map fed to the head.
    pub fn pre_head_shape(&self) -> Result<(usize, usize, usize)> {
        self.validate()?;
        let (h, w) = self.input_resolution;
        let shapes: Vec<_> = self
            .backbones
            .iter()
            .map(|b| b.feature_shape(h, w))
            .collect();
        let channels = shapes.iter().map(|s| s.2).sum();
        Ok((shapes[0].0, shapes[0].1, channels))
    }
}

fn published(name: &str) -> BackboneSpec {
    BackboneSpec {
        name: name.to_string(),
        kind: BackboneKind::Published {
            feature_stride: 32,
            feature_channels: 2048,
            weights: None,
        },
    }
}

fn tiny(name: &str, channels: [usize; 2]) -> BackboneSpec {
    BackboneSpec {
        name: name.to_string(),
        kind: BackboneKind::Stack(vec![
            ConvBlockSpec {
                out_channels: channels[0],
                kernel: 3,
                stride: 2,
            },
            ConvBlockSpec {
                out_channels: channels[1],
                kernel: 3,
                stride: 2,
            },
        ]),
    }
}

pub const DEFAULT_RESOLUTION: (usize, usize) = (300, 300);
pub const TINY_RESOLUTION: (usize, usize) = (32, 32);

/// Looks up a named architecture. Full-scale networks use the published
/// backbone geometry at 300x300; `tiny_*` variants are CPU-friendly
/// doubles with the same topology.
pub fn named_spec(name: &str) -> Result<ArchitectureSpec> {
    let spec = match name {
        "xception" => ArchitectureSpec {
            name: name.into(),
            kind: NetworkKind::BackboneA,
            input_resolution: DEFAULT_RESOLUTION,
            backbones: vec![published("xception")],
            head: HeadSpec::default(),
            pretrained_init: true,
        },
        "resnet50v2" => ArchitectureSpec {
            name: name.into(),
            kind: NetworkKind::BackboneB,
            input_resolution: DEFAULT_RESOLUTION,
            backbones: vec![published("resnet50v2")],
            head: HeadSpec::default(),
            pretrained_init: true,
        },
        "concat" => ArchitectureSpec {
            name: name.into(),
            kind: NetworkKind::Concatenated,
            input_resolution: DEFAULT_RESOLUTION,
            backbones: vec![published("xception"), published("resnet50v2")],
            head: HeadSpec::default(),
            pretrained_init: true,
        },
        "tiny_a" => ArchitectureSpec {
            name: name.into(),
            kind: NetworkKind::BackboneA,
            input_resolution: TINY_RESOLUTION,
            backbones: vec![tiny("tiny_a", [8, 16])],
            head: HeadSpec { conv_channels: 32 },
            pretrained_init: false,
        },
        "tiny_b" => ArchitectureSpec {
            name: name.into(),
            kind: NetworkKind::BackboneB,
            input_resolution: TINY_RESOLUTION,
            backbones: vec![tiny("tiny_b", [12, 16])],
            head: HeadSpec { conv_channels: 32 },
            pretrained_init: false,
        },
        "tiny_concat" => ArchitectureSpec {
            name: name.into(),
            kind: NetworkKind::Concatenated,
            input_resolution: TINY_RESOLUTION,
            backbones: vec![tiny("tiny_a", [8, 16]), tiny("tiny_b", [12, 16])],
            head: HeadSpec { conv_channels: 32 },
            pretrained_init: false,
        },
        other => {
            return Err(XrcError::Config(format!(
                "unknown network {other:?} (known: xception, resnet50v2, concat, tiny_a, tiny_b, tiny_concat)"
            )))
        }
    };
    spec.validate()?;
    Ok(spec)
}
