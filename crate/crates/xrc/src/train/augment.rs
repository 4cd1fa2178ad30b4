//! Deterministic image augmentation: flips, rotation, zoom and shifts,
//! applied as a single inverse affine warp with bilinear sampling.

use ndarray::Array3;
use rand::Rng;

use crate::seed::stream_rng;

use super::config::AugmentConfig;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentParams {
    pub rotation_deg: f32,
    pub zoom: f32,
    /// Shifts as fractions of width/height.
    pub shift_x: f32,
    pub shift_y: f32,
    pub hflip: bool,
    pub vflip: bool,
}

impl AugmentParams {
    pub fn is_identity(&self) -> bool {
        self.rotation_deg == 0.0
            && self.zoom == 1.0
            && self.shift_x == 0.0
            && self.shift_y == 0.0
            && !self.hflip
            && !self.vflip
    }
}

/// Draws one parameter set from the configured ranges. The same
/// (seed, context) pair always yields the same draw.
pub fn sample_params(cfg: &AugmentConfig, seed: u64, context: &[u64]) -> AugmentParams {
    let mut rng = stream_rng(seed, "augment", context);
    let rotation_deg = if cfg.rotation_range_deg > 0.0 {
        rng.gen_range(0.0..cfg.rotation_range_deg)
    } else {
        0.0
    };
    let zoom = if cfg.zoom_range > 0.0 {
        rng.gen_range(1.0 - cfg.zoom_range..=1.0 + cfg.zoom_range)
    } else {
        1.0
    };
    let shift_x = if cfg.width_shift > 0.0 {
        rng.gen_range(-cfg.width_shift..=cfg.width_shift)
    } else {
        0.0
    };
    let shift_y = if cfg.height_shift > 0.0 {
        rng.gen_range(-cfg.height_shift..=cfg.height_shift)
    } else {
        0.0
    };
    let hflip = cfg.horizontal_flip && rng.gen_bool(0.5);
    let vflip = cfg.vertical_flip && rng.gen_bool(0.5);
    AugmentParams {
        rotation_deg,
        zoom,
        shift_x,
        shift_y,
        hflip,
        vflip,
    }
}

/// Warps an HxWxC image in [0, 1]. For each output pixel the source
/// location is found by inverting the affine transform around the image
/// center; samples outside the input are filled with zero.
pub fn apply_params(img: &Array3<f32>, params: &AugmentParams) -> Array3<f32> {
    if params.is_identity() {
        return img.clone();
    }
    let (h, w, c) = img.dim();
    let cy = (h as f32 - 1.0) / 2.0;
    let cx = (w as f32 - 1.0) / 2.0;
    let theta = params.rotation_deg.to_radians();
    let (sin, cos) = theta.sin_cos();
    let inv_zoom = 1.0 / params.zoom;
    let dx = params.shift_x * w as f32;
    let dy = params.shift_y * h as f32;

    let mut out = Array3::<f32>::zeros((h, w, c));
    for oy in 0..h {
        for ox in 0..w {
            // Undo shift, then rotation and zoom about the center, then flips.
            let mut x = ox as f32 - dx - cx;
            let mut y = oy as f32 - dy - cy;
            let (rx, ry) = (cos * x + sin * y, -sin * x + cos * y);
            x = rx * inv_zoom;
            y = ry * inv_zoom;
            if params.hflip {
                x = -x;
            }
            if params.vflip {
                y = -y;
            }
            let sx = x + cx;
            let sy = y + cy;
            if sx < -1.0 || sy < -1.0 || sx > w as f32 || sy > h as f32 {
                continue;
            }
            let x0 = sx.floor() as isize;
            let y0 = sy.floor() as isize;
            let fx = sx - x0 as f32;
            let fy = sy - y0 as f32;
            for ch in 0..c {
                let sample = |yy: isize, xx: isize| -> f32 {
                    if yy >= 0 && xx >= 0 && (yy as usize) < h && (xx as usize) < w {
                        img[[yy as usize, xx as usize, ch]]
                    } else {
                        0.0
                    }
                };
                let v = sample(y0, x0) * (1.0 - fx) * (1.0 - fy)
                    + sample(y0, x0 + 1) * fx * (1.0 - fy)
                    + sample(y0 + 1, x0) * (1.0 - fx) * fy
                    + sample(y0 + 1, x0 + 1) * fx * fy;
                out[[oy, ox, ch]] = v.clamp(0.0, 1.0);
            }
        }
    }
    out
}

/// Samples parameters and warps in one call.
pub fn augment_image(
    img: &Array3<f32>,
    cfg: &AugmentConfig,
    seed: u64,
    context: &[u64],
) -> Array3<f32> {
    apply_params(img, &sample_params(cfg, seed, context))
}
