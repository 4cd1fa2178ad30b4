use ndarray::{Array2, Array4, ArrayView4, Axis};

use crate::error::{Result, XrcError};
use crate::ingest::ClassLabel;
use crate::seed::stream_rng;

use super::nn::{cross_entropy_with_grad, softmax, Conv2d, Dense, GlobalAvgPool, Nadam, Relu};
use super::spec::{ArchitectureSpec, BackboneKind};

#[derive(Debug)]
struct ConvBlock {
    conv: Conv2d,
    relu: Relu,
}

#[derive(Debug)]
struct Branch {
    blocks: Vec<ConvBlock>,
}

/// A buildable network: one or two conv-stack backbones, channel
/// concatenation, a pointwise conv head, global average pooling and a
/// 3-way softmax classifier.
#[derive(Debug)]
pub struct Model {
    pub spec: ArchitectureSpec,
    branches: Vec<Branch>,
    head_conv: Conv2d,
    head_relu: Relu,
    pool: GlobalAvgPool,
    classifier: Dense,
    // Channel widths per branch, for splitting the concat gradient.
    branch_channels: Vec<usize>,
}

/// Instantiates weights for a spec.
///
/// Published backbones carry no layer stack in this build: with
/// `pretrained_init` and no weights file that is a missing-weight-source
/// error; otherwise they are rejected as not buildable at desk scale.
pub fn build_model(spec: &ArchitectureSpec, seed: u64) -> Result<Model> {
    spec.validate()?;
    let mut rng = stream_rng(seed, "model-init", &[]);
    let mut branches = Vec::new();
    let mut branch_channels = Vec::new();
    for backbone in &spec.backbones {
        let blocks_spec = match &backbone.kind {
            BackboneKind::Stack(blocks) => blocks,
            BackboneKind::Published { weights, .. } => {
                return Err(if spec.pretrained_init && weights.is_none() {
                    XrcError::Model(format!(
                        "backbone {:?}: missing pretrained weight source",
                        backbone.name
                    ))
                } else {
                    XrcError::Model(format!(
                        "backbone {:?} has no buildable layer stack at desk scale; use the tiny_* networks",
                        backbone.name
                    ))
                });
            }
        };
        let mut in_channels = 3;
        let mut blocks = Vec::new();
        for b in blocks_spec {
            blocks.push(ConvBlock {
                conv: Conv2d::new(b.kernel, b.stride, in_channels, b.out_channels, &mut rng),
                relu: Relu::default(),
            });
            in_channels = b.out_channels;
        }
        branch_channels.push(in_channels);
        branches.push(Branch { blocks });
    }

    let (_, _, concat_channels) = spec.pre_head_shape()?;
    let head_conv = Conv2d::new(1, 1, concat_channels, spec.head.conv_channels, &mut rng);
    let classifier = Dense::new(spec.head.conv_channels, spec.num_classes(), &mut rng);

    Ok(Model {
        spec: spec.clone(),
        branches,
        head_conv,
        head_relu: Relu::default(),
        pool: GlobalAvgPool::default(),
        classifier,
        branch_channels,
    })
}

impl Model {
    fn check_input(&self, batch: &ArrayView4<f32>) -> Result<()> {
        let (_, h, w, c) = batch.dim();
        if (h, w) != self.spec.input_resolution || c != 3 {
            return Err(XrcError::Model(format!(
                "input {:?} does not match the {:?} x3 resolution of {}",
                (h, w, c),
                self.spec.input_resolution,
                self.spec.name
            )));
        }
        Ok(())
    }

    fn forward_logits(&mut self, batch: ArrayView4<f32>, train: bool) -> Result<Array2<f32>> {
        self.check_input(&batch)?;
        let mut features = Vec::with_capacity(self.branches.len());
        for branch in &mut self.branches {
            let mut x = batch.to_owned();
            for block in &mut branch.blocks {
                x = block.conv.forward(x.view(), train);
                x = block.relu.forward(x, train);
            }
            features.push(x);
        }
        let concat = if features.len() == 1 {
            features.pop().unwrap()
        } else {
            let views: Vec<_> = features.iter().map(|f| f.view()).collect();
            ndarray::concatenate(Axis(3), &views)
                .map_err(|e| XrcError::Model(format!("feature concat failed: {e}")))?
        };
        let x = self.head_conv.forward(concat.view(), train);
        let x = self.head_relu.forward(x, train);
        let pooled = self.pool.forward(x.view(), train);
        Ok(self.classifier.forward(pooled.view(), train))
    }

    /// Class probabilities, one row per image, rows summing to 1.
    pub fn predict(&mut self, batch: ArrayView4<f32>) -> Result<Array2<f32>> {
        let logits = self.forward_logits(batch, false)?;
        Ok(softmax(logits.view()))
    }

    /// Argmax with ties broken toward the lowest class index.
    pub fn predict_labels(&mut self, batch: ArrayView4<f32>) -> Result<Vec<ClassLabel>> {
        let probs = self.predict(batch)?;
        Ok(probs.rows().into_iter().map(|row| argmax_label(row.iter().copied())).collect())
    }

    /// One optimization step on a batch; returns (mean loss, correct count).
    pub fn train_step(
        &mut self,
        batch: ArrayView4<f32>,
        targets: &[ClassLabel],
        optimizer: &mut Nadam,
    ) -> Result<(f32, usize)> {
        let target_idx: Vec<usize> = targets.iter().map(|t| t.index()).collect();
        let logits = self.forward_logits(batch, true)?;
        let correct = logits
            .rows()
            .into_iter()
            .zip(&target_idx)
            .filter(|(row, t)| argmax_label(row.iter().copied()).index() == **t)
            .count();
        let (loss, grad_logits) = cross_entropy_with_grad(logits.view(), &target_idx);
        if !loss.is_finite() {
            return Err(XrcError::Model("non-finite loss".into()));
        }

        self.zero_grads();
        let grad_pooled = self.classifier.backward(grad_logits.view());
        let grad_head = self.pool.backward(grad_pooled.view());
        let grad_head = self.head_relu.backward(grad_head);
        let grad_concat = self.head_conv.backward(grad_head.view());

        let mut offset = 0usize;
        for (branch, &channels) in self.branches.iter_mut().zip(&self.branch_channels) {
            let slice: Array4<f32> = grad_concat
                .slice(ndarray::s![.., .., .., offset..offset + channels])
                .to_owned();
            offset += channels;
            let mut grad = slice;
            for block in branch.blocks.iter_mut().rev() {
                grad = block.relu.backward(grad);
                grad = block.conv.backward(grad.view());
            }
        }

        optimizer.begin_step();
        self.apply_updates(optimizer);
        Ok((loss, correct))
    }

    fn zero_grads(&mut self) {
        for branch in &mut self.branches {
            for block in &mut branch.blocks {
                block.conv.grad_weight.fill(0.0);
                block.conv.grad_bias.fill(0.0);
            }
        }
        self.head_conv.grad_weight.fill(0.0);
        self.head_conv.grad_bias.fill(0.0);
        self.classifier.grad_weight.fill(0.0);
        self.classifier.grad_bias.fill(0.0);
    }

    fn apply_updates(&mut self, optimizer: &mut Nadam) {
        let mut slot = 0usize;
        for branch in &mut self.branches {
            for block in &mut branch.blocks {
                let w = block.conv.weight.as_slice_mut().unwrap();
                let g = block.conv.grad_weight.as_slice().unwrap();
                optimizer.update_param(slot, w, g);
                slot += 1;
                let b = block.conv.bias.as_slice_mut().unwrap();
                let gb = block.conv.grad_bias.as_slice().unwrap();
                optimizer.update_param(slot, b, gb);
                slot += 1;
            }
        }
        let w = self.head_conv.weight.as_slice_mut().unwrap();
        let g = self.head_conv.grad_weight.as_slice().unwrap();
        optimizer.update_param(slot, w, g);
        slot += 1;
        let b = self.head_conv.bias.as_slice_mut().unwrap();
        let gb = self.head_conv.grad_bias.as_slice().unwrap();
        optimizer.update_param(slot, b, gb);
        slot += 1;
        let w = self.classifier.weight.as_slice_mut().unwrap();
        let g = self.classifier.grad_weight.as_slice().unwrap();
        optimizer.update_param(slot, w, g);
        slot += 1;
        let b = self.classifier.bias.as_slice_mut().unwrap();
        let gb = self.classifier.grad_bias.as_slice().unwrap();
        optimizer.update_param(slot, b, gb);
    }

    /// Flat views of every parameter tensor, in a fixed order.
    pub fn param_slices(&self) -> Vec<&[f32]> {
        let mut out = Vec::new();
        for branch in &self.branches {
            for block in &branch.blocks {
                out.push(block.conv.weight.as_slice().unwrap());
                out.push(block.conv.bias.as_slice().unwrap());
            }
        }
        out.push(self.head_conv.weight.as_slice().unwrap());
        out.push(self.head_conv.bias.as_slice().unwrap());
        out.push(self.classifier.weight.as_slice().unwrap());
        out.push(self.classifier.bias.as_slice().unwrap());
        out
    }

    /// Overwrites parameters from flat buffers in `param_slices` order.
    pub fn load_param_slices(&mut self, buffers: &[Vec<f32>]) -> Result<()> {
        let mut idx = 0usize;
        let load4 = |arr: &mut Array4<f32>, buffers: &[Vec<f32>], idx: &mut usize| -> Result<()> {
            fill(arr.as_slice_mut().unwrap(), buffers, idx)
        };
        for branch in &mut self.branches {
            for block in &mut branch.blocks {
                load4(&mut block.conv.weight, buffers, &mut idx)?;
                fill(block.conv.bias.as_slice_mut().unwrap(), buffers, &mut idx)?;
            }
        }
        load4(&mut self.head_conv.weight, buffers, &mut idx)?;
        fill(self.head_conv.bias.as_slice_mut().unwrap(), buffers, &mut idx)?;
        fill(self.classifier.weight.as_slice_mut().unwrap(), buffers, &mut idx)?;
        fill(self.classifier.bias.as_slice_mut().unwrap(), buffers, &mut idx)?;
        if idx != buffers.len() {
            return Err(XrcError::Model(format!(
                "checkpoint has {} tensors, model expects {idx}",
                buffers.len()
            )));
        }
        Ok(())
    }
}

fn fill(dst: &mut [f32], buffers: &[Vec<f32>], idx: &mut usize) -> Result<()> {
    let src = buffers
        .get(*idx)
        .ok_or_else(|| XrcError::Model("checkpoint is missing parameter tensors".into()))?;
    if src.len() != dst.len() {
        return Err(XrcError::Model(format!(
            "checkpoint tensor {} has {} values, model expects {}",
            idx,
            src.len(),
            dst.len()
        )));
    }
    dst.copy_from_slice(src);
    *idx += 1;
    Ok(())
}

pub fn argmax_label(row: impl Iterator<Item = f32>) -> ClassLabel {
    let mut best = 0usize;
    let mut best_v = f32::NEG_INFINITY;
    for (i, v) in row.enumerate() {
        if v > best_v {
            best_v = v;
            best = i;
        }
    }
    ClassLabel::from_index(best).unwrap()
}
