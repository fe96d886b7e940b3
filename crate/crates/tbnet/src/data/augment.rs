//! Training-time augmentation: horizontal flip, random crop (within 10%),
//! contrast scale (within 20%), and intensity shift (within 10%).
//!
//! All randomness flows through an explicit draw so the same seed always
//! produces the same transform, and per-sample seeds derive from
//! (global seed, sample index, epoch) so parallel loading cannot change
//! results.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::image::bilinear_resize;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One concrete augmentation transform.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentDraw {
    pub flip: bool,
    /// Crop rectangle (x0, y0, width, height) in input pixels; the crop is
    /// resized back to the input size.
    pub crop: (usize, usize, usize, usize),
    /// Multiplicative contrast factor in [0.8, 1.2].
    pub contrast: f32,
    /// Additive intensity shift in [-0.1, 0.1] of the unit dynamic range.
    pub shift: f32,
}

impl AugmentDraw {
    /// The draw that leaves the image unchanged.
    pub fn identity(height: usize, width: usize) -> AugmentDraw {
        AugmentDraw {
            flip: false,
            crop: (0, 0, width, height),
            contrast: 1.0,
            shift: 0.0,
        }
    }

    /// Samples a transform. Draw order is fixed: flip, crop height, crop
    /// width, crop offsets, contrast, shift.
    pub fn sample(rng: &mut impl Rng, height: usize, width: usize) -> AugmentDraw {
        let flip = rng.gen_bool(0.5);
        let min_h = ((height as f32) * 0.9).ceil() as usize;
        let min_w = ((width as f32) * 0.9).ceil() as usize;
        let crop_h = rng.gen_range(min_h..=height);
        let crop_w = rng.gen_range(min_w..=width);
        let y0 = rng.gen_range(0..=(height - crop_h));
        let x0 = rng.gen_range(0..=(width - crop_w));
        let contrast = rng.gen_range(0.8f32..=1.2f32);
        let shift = rng.gen_range(-0.1f32..=0.1f32);
        AugmentDraw {
            flip,
            crop: (x0, y0, crop_w, crop_h),
            contrast,
            shift,
        }
    }
}

/// Per-sample augmentation seed: mixes (global seed, sample index, epoch)
/// with a splitmix64-style finalizer.
pub fn derive_sample_seed(global_seed: u64, sample_index: u64, epoch: u64) -> u64 {
    let mut z = global_seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(sample_index.wrapping_mul(0xbf58476d1ce4e5b9))
        .wrapping_add(epoch.wrapping_mul(0x94d049bb133111eb));
    z ^= z >> 30;
    z = z.wrapping_mul(0xbf58476d1ce4e5b9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94d049bb133111eb);
    z ^= z >> 31;
    z
}

/// Applies a concrete draw to a `[1,1,H,W]` tensor in `[0,1]`.
pub fn augment_with(image: &Tensor, draw: &AugmentDraw) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 4 || shape[0] != 1 || shape[1] != 1 {
        return Err(Error::Shape {
            op: "augment",
            msg: format!("expected [1,1,H,W], got {shape:?}"),
        });
    }
    let (h, w) = (shape[2], shape[3]);
    let mut pixels: Vec<f32> = image.data().to_vec();

    if draw.flip {
        for row in pixels.chunks_mut(w) {
            row.reverse();
        }
    }

    let (x0, y0, cw, ch) = draw.crop;
    if cw == 0 || ch == 0 || x0 + cw > w || y0 + ch > h {
        return Err(Error::Shape {
            op: "augment",
            msg: format!("crop {draw:?} outside {h}x{w} image"),
        });
    }
    if (cw, ch) != (w, h) {
        let mut cropped = Vec::with_capacity(cw * ch);
        for y in y0..y0 + ch {
            cropped.extend_from_slice(&pixels[y * w + x0..y * w + x0 + cw]);
        }
        pixels = bilinear_resize(&cropped, cw, ch, w, h);
    }

    for v in &mut pixels {
        *v = (*v * draw.contrast + draw.shift).clamp(0.0, 1.0);
    }
    Tensor::from_vec(&[1, 1, h, w], pixels)
}

/// Seeded augmentation of a `[1,1,H,W]` tensor.
pub fn augment(image: &Tensor, seed: u64) -> Result<Tensor> {
    let shape = image.shape();
    if shape.len() != 4 {
        return Err(Error::Shape {
            op: "augment",
            msg: format!("expected [1,1,H,W], got {shape:?}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = AugmentDraw::sample(&mut rng, shape[2], shape[3]);
    augment_with(image, &draw)
}
