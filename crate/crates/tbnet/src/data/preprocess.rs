//! Input preprocessing: resampling, corner mean imputation, and intensity
//! scaling.

use serde::{Deserialize, Serialize};

use super::image::{bilinear_resize, GrayImage};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Preprocessing parameters.
///
/// Chest X-rays often carry embedded markings in the upper corners;
/// `corner_fraction` controls the size of the top-left and top-right
/// rectangles that get overwritten with the image mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSpec {
    pub target_size: (usize, usize),
    pub corner_fraction: f32,
}

impl Default for PreprocessSpec {
    fn default() -> Self {
        PreprocessSpec {
            target_size: (224, 224),
            corner_fraction: 0.15,
        }
    }
}

impl PreprocessSpec {
    pub fn validate(&self) -> Result<()> {
        if self.target_size.0 == 0 || self.target_size.1 == 0 {
            return Err(Error::Preprocess("target_size must be positive".into()));
        }
        if !(self.corner_fraction > 0.0 && self.corner_fraction < 0.5) {
            return Err(Error::Preprocess(format!(
                "corner_fraction must lie in (0, 0.5), got {}",
                self.corner_fraction
            )));
        }
        Ok(())
    }
}

/// Resamples to the target size (bilinear), overwrites the top-left and
/// top-right corner rectangles with the global mean of the resized image,
/// and scales intensities to `[0, 1]`. Returns a `[1,1,H,W]` tensor.
pub fn preprocess(image: &GrayImage, spec: &PreprocessSpec) -> Result<Tensor> {
    spec.validate()?;
    if image.width == 0 || image.height == 0 || image.data.is_empty() {
        return Err(Error::Preprocess("empty input image".into()));
    }
    let (th, tw) = spec.target_size;
    let mut resized = bilinear_resize(&image.data, image.width, image.height, tw, th);

    let mut acc = 0.0f64;
    for v in &resized {
        acc += *v as f64;
    }
    let mean = (acc / resized.len() as f64) as f32;

    let rect_h = (th as f32 * spec.corner_fraction).ceil() as usize;
    let rect_w = (tw as f32 * spec.corner_fraction).ceil() as usize;
    for y in 0..rect_h.min(th) {
        let row = &mut resized[y * tw..(y + 1) * tw];
        for v in &mut row[..rect_w.min(tw)] {
            *v = mean;
        }
        let start = tw - rect_w.min(tw);
        for v in &mut row[start..] {
            *v = mean;
        }
    }

    let scale = 1.0 / image.max_value;
    let data: Vec<f32> = resized.iter().map(|&v| v * scale).collect();
    Tensor::from_vec(&[1, 1, th, tw], data)
}

/// The imputed corner rectangles for a given spec: `(rect_h, rect_w)`.
pub fn corner_rect(spec: &PreprocessSpec) -> (usize, usize) {
    (
        (spec.target_size.0 as f32 * spec.corner_fraction).ceil() as usize,
        (spec.target_size.1 as f32 * spec.corner_fraction).ceil() as usize,
    )
}
