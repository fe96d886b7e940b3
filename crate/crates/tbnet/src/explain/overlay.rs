//! Overlay rendering and drop-map export.

use std::path::Path;

use serde::Serialize;

use super::CriticalFactorMask;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const OVERLAY_ALPHA: f32 = 0.45;

/// Writes a PNG of the grayscale image with masked pixels tinted red
/// (alpha-blended). An empty mask reproduces the grayscale image exactly.
pub fn render_overlay(image: &Tensor, mask: &CriticalFactorMask, out_path: &Path) -> Result<()> {
    let shape = image.shape();
    if shape.len() != 4 || shape[0] != 1 || shape[1] != 1 {
        return Err(Error::Shape {
            op: "render_overlay",
            msg: format!("expected [1,1,H,W] image, got {shape:?}"),
        });
    }
    let (h, w) = (shape[2], shape[3]);
    if h != mask.height || w != mask.width {
        return Err(Error::Shape {
            op: "render_overlay",
            msg: format!(
                "mask {}x{} does not match image {h}x{w}",
                mask.height, mask.width
            ),
        });
    }
    let mut rgb = image::RgbImage::new(w as u32, h as u32);
    for (i, &v) in image.data().iter().enumerate() {
        let g = (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let px = if mask.mask[i] {
            let gf = g as f32;
            let r = ((1.0 - OVERLAY_ALPHA) * gf + OVERLAY_ALPHA * 255.0).round() as u8;
            let gb = ((1.0 - OVERLAY_ALPHA) * gf).round() as u8;
            image::Rgb([r, gb, gb])
        } else {
            image::Rgb([g, g, g])
        };
        rgb.put_pixel((i % w) as u32, (i / w) as u32, px);
    }
    rgb.save(out_path).map_err(|e| Error::Image {
        path: out_path.to_path_buf(),
        msg: e.to_string(),
    })
}

#[derive(Serialize)]
struct DropMapSidecar {
    width: usize,
    height: usize,
    patch: usize,
    stride: usize,
}

/// Dumps the raw drop map as little-endian f32 plus a JSON sidecar
/// (`<base>.raw` and `<base>.json`).
pub fn write_drop_map(
    mask: &CriticalFactorMask,
    patch: usize,
    stride: usize,
    base_path: &Path,
) -> Result<()> {
    let mut raw = Vec::with_capacity(mask.drop_map.len() * 4);
    for v in &mask.drop_map {
        raw.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(base_path.with_extension("raw"), raw)?;
    let sidecar = DropMapSidecar {
        width: mask.width,
        height: mask.height,
        patch,
        stride,
    };
    std::fs::write(
        base_path.with_extension("json"),
        serde_json::to_string_pretty(&sidecar)?,
    )?;
    Ok(())
}
