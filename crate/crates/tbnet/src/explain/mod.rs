//! Critical-factor identification by occlusion probing.
//!
//! Slides a fill patch across the input, measures the drop in the predicted
//! class's probability, accumulates the per-pixel maximum drop, and
//! thresholds it into a binary mask of the regions the decision depends on.

mod overlay;

pub use overlay::{render_overlay, write_drop_map};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::Tensor;

/// Anything that scores a `[1,1,H,W]` image into class probabilities.
/// Probing only needs forward passes, so tests can plug analytic models.
pub trait ScoreModel: Sync {
    /// `[p_negative, p_positive]`.
    fn class_probabilities(&self, image: &Tensor) -> Result<[f32; 2]>;
}

impl ScoreModel for Model {
    fn class_probabilities(&self, image: &Tensor) -> Result<[f32; 2]> {
        let probs = self.predict(image)?;
        Ok([probs.data()[0], probs.data()[1]])
    }
}

/// Occlusion probe parameters. The fill value is the per-image mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeSpec {
    pub patch_size: usize,
    pub stride: usize,
    /// Mask threshold as a fraction of the maximum drop.
    pub threshold: f32,
}

impl Default for ProbeSpec {
    fn default() -> Self {
        ProbeSpec {
            patch_size: 16,
            stride: 8,
            threshold: 0.5,
        }
    }
}

impl ProbeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 || self.stride == 0 {
            return Err(Error::Shape {
                op: "explain",
                msg: "patch_size and stride must be >= 1".into(),
            });
        }
        if self.stride > self.patch_size {
            return Err(Error::Shape {
                op: "explain",
                msg: format!(
                    "stride {} exceeds patch_size {} (coverage gaps)",
                    self.stride, self.patch_size
                ),
            });
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(Error::Shape {
                op: "explain",
                msg: format!("threshold {} outside [0, 1]", self.threshold),
            });
        }
        Ok(())
    }
}

/// Binary critical-factor mask plus the underlying score-drop map.
#[derive(Debug, Clone)]
pub struct CriticalFactorMask {
    pub width: usize,
    pub height: usize,
    /// Row-major; true where the drop reaches `threshold * max_drop`.
    pub mask: Vec<bool>,
    /// Row-major per-pixel maximum score drop over covering patches.
    pub drop_map: Vec<f32>,
    pub predicted_class: usize,
    pub base_score: f32,
}

impl CriticalFactorMask {
    pub fn mask_pixel_count(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }
}

/// Patch anchor positions along one axis: stride steps, with a final
/// position snapped to the edge so the whole extent is covered.
fn positions(dim: usize, patch: usize, stride: usize) -> Vec<usize> {
    let mut v = Vec::new();
    let mut p = 0;
    while p + patch <= dim {
        v.push(p);
        p += stride;
    }
    if let Some(&last) = v.last() {
        if last + patch < dim {
            v.push(dim - patch);
        }
    }
    v
}

/// Probes a frozen model with occlusion patches over a preprocessed image.
///
/// Deterministic: probes are independent and the drop map is a max
/// reduction, so parallel execution cannot change the result.
pub fn explain(
    model: &dyn ScoreModel,
    image: &Tensor,
    spec: &ProbeSpec,
) -> Result<CriticalFactorMask> {
    spec.validate()?;
    let shape = image.shape();
    if shape.len() != 4 || shape[0] != 1 || shape[1] != 1 {
        return Err(Error::Shape {
            op: "explain",
            msg: format!("expected [1,1,H,W] image, got {shape:?}"),
        });
    }
    let (h, w) = (shape[2], shape[3]);
    if spec.patch_size > h || spec.patch_size > w {
        return Err(Error::Shape {
            op: "explain",
            msg: format!("patch {} larger than image {h}x{w}", spec.patch_size),
        });
    }

    let base_probs = model.class_probabilities(image)?;
    let predicted_class = usize::from(base_probs[1] > base_probs[0]);
    let base_score = base_probs[predicted_class];

    let mut fill = 0.0f32;
    for v in image.data() {
        fill += v;
    }
    fill /= image.numel() as f32;

    let ys = positions(h, spec.patch_size, spec.stride);
    let xs = positions(w, spec.patch_size, spec.stride);
    let mut probes: Vec<(usize, usize)> = Vec::with_capacity(ys.len() * xs.len());
    for &y in &ys {
        for &x in &xs {
            probes.push((y, x));
        }
    }

    let drops: Vec<f32> = probes
        .par_iter()
        .map(|&(y, x)| -> Result<f32> {
            let mut data = image.data().to_vec();
            for row in y..y + spec.patch_size {
                data[row * w + x..row * w + x + spec.patch_size].fill(fill);
            }
            let occluded = Tensor::from_vec(&[1, 1, h, w], data)?;
            let probs = model.class_probabilities(&occluded)?;
            Ok(base_score - probs[predicted_class])
        })
        .collect::<Result<_>>()?;

    let mut drop_map = vec![f32::NEG_INFINITY; h * w];
    for (&(y, x), &drop) in probes.iter().zip(&drops) {
        for row in y..y + spec.patch_size {
            for v in &mut drop_map[row * w + x..row * w + x + spec.patch_size] {
                if drop > *v {
                    *v = drop;
                }
            }
        }
    }
    debug_assert!(drop_map.iter().all(|v| v.is_finite()), "full patch coverage");

    let max_drop = drop_map.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let mask = if max_drop <= 0.0 {
        vec![false; h * w]
    } else {
        let cut = spec.threshold * max_drop;
        drop_map.iter().map(|&d| d >= cut).collect()
    };

    Ok(CriticalFactorMask {
        width: w,
        height: h,
        mask,
        drop_map,
        predicted_class,
        base_score,
    })
}
