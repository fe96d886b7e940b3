//! Grayscale image loading and resampling.

use std::path::Path;

use crate::error::{Error, Result};

/// A decoded grayscale image in its native intensity range.
///
/// `data` holds row-major raw intensities in `[0, max_value]`; `max_value`
/// is 255 for 8-bit sources and 65535 for 16-bit sources. Color inputs are
/// converted by channel mean.
#[derive(Debug, Clone)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
    pub max_value: f32,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>, max_value: f32) -> Result<GrayImage> {
        if width == 0 || height == 0 || data.len() != width * height {
            return Err(Error::Preprocess(format!(
                "image buffer of {} values does not match {width}x{height}",
                data.len()
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
            max_value,
        })
    }

    /// Decodes an 8- or 16-bit grayscale PNG or baseline JPEG; color images
    /// are reduced to grayscale by averaging channels.
    pub fn open(path: &Path) -> Result<GrayImage> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        Ok(match img {
            image::DynamicImage::ImageLuma8(g) => {
                let (w, h) = (g.width() as usize, g.height() as usize);
                GrayImage {
                    width: w,
                    height: h,
                    data: g.into_raw().into_iter().map(f32::from).collect(),
                    max_value: 255.0,
                }
            }
            image::DynamicImage::ImageLuma16(g) => {
                let (w, h) = (g.width() as usize, g.height() as usize);
                GrayImage {
                    width: w,
                    height: h,
                    data: g.into_raw().into_iter().map(f32::from).collect(),
                    max_value: 65535.0,
                }
            }
            other => {
                let rgb = other.into_rgb8();
                let (w, h) = (rgb.width() as usize, rgb.height() as usize);
                let data = rgb
                    .pixels()
                    .map(|p| (p.0[0] as f32 + p.0[1] as f32 + p.0[2] as f32) / 3.0)
                    .collect();
                GrayImage {
                    width: w,
                    height: h,
                    data,
                    max_value: 255.0,
                }
            }
        })
    }
}

/// Bilinear resampling with pixel-center alignment. Resizing to the source
/// size is an exact identity.
pub fn bilinear_resize(
    src: &[f32],
    src_w: usize,
    src_h: usize,
    dst_w: usize,
    dst_h: usize,
) -> Vec<f32> {
    assert!(src_w > 0 && src_h > 0 && dst_w > 0 && dst_h > 0);
    let mut dst = vec![0.0f32; dst_w * dst_h];
    let sx = src_w as f32 / dst_w as f32;
    let sy = src_h as f32 / dst_h as f32;
    for oy in 0..dst_h {
        let fy = ((oy as f32 + 0.5) * sy - 0.5).clamp(0.0, (src_h - 1) as f32);
        let y0 = fy.floor() as usize;
        let y1 = (y0 + 1).min(src_h - 1);
        let wy = fy - y0 as f32;
        for ox in 0..dst_w {
            let fx = ((ox as f32 + 0.5) * sx - 0.5).clamp(0.0, (src_w - 1) as f32);
            let x0 = fx.floor() as usize;
            let x1 = (x0 + 1).min(src_w - 1);
            let wx = fx - x0 as f32;
            let top = src[y0 * src_w + x0] * (1.0 - wx) + src[y0 * src_w + x1] * wx;
            let bot = src[y1 * src_w + x0] * (1.0 - wx) + src[y1 * src_w + x1] * wx;
            dst[oy * dst_w + ox] = top * (1.0 - wy) + bot * wy;
        }
    }
    dst
}
