//! PNG encode/decode between files and `[1, c, h, w]` tensors.
//!
//! Images are 8-bit RGB in [0, 1]; depth maps are 16-bit grayscale,
//! linearly quantized over a recorded `[min, max]` meter range. Both
//! round-trip losslessly at their respective bit depths, and encoding is
//! deterministic, which is what lets dataset rebuilds hash identically.

use std::path::Path;

use analogic_core::Tensor;
use image::{ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{AppError, Result};

/// Quantizes a unit-interval value to a byte, clamping out-of-range input
/// (translated images may overshoot [0, 1] before export clamping).
fn to_u8(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

pub fn save_rgb(path: &Path, x: &Tensor<f32>) -> Result<()> {
    let [n, c, h, w] = x.shape();
    if n != 1 || c != 3 {
        return Err(AppError::Mismatch(format!(
            "expected a single [1,3,h,w] image to write as PNG, got {}",
            x.shape_str()
        )));
    }
    let mut img: RgbImage = ImageBuffer::new(w as u32, h as u32);
    for y in 0..h {
        for xp in 0..w {
            let px = Rgb([
                to_u8(x.at(0, 0, y, xp)),
                to_u8(x.at(0, 1, y, xp)),
                to_u8(x.at(0, 2, y, xp)),
            ]);
            img.put_pixel(xp as u32, y as u32, px);
        }
    }
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => AppError::io(path, io),
        other => AppError::Mismatch(format!("{}: {other}", path.display())),
    })
}

pub fn load_rgb(path: &Path) -> Result<Tensor<f32>> {
    let img = image::open(path)
        .map_err(|e| match e {
            image::ImageError::IoError(io) => AppError::io(path, io),
            other => AppError::Mismatch(format!("{}: {other}", path.display())),
        })?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut t = Tensor::zeros([1, 3, h, w]);
    for y in 0..h {
        for xp in 0..w {
            let px = img.get_pixel(xp as u32, y as u32);
            for ch in 0..3 {
                *t.at_mut(0, ch, y, xp) = px.0[ch] as f32 / 255.0;
            }
        }
    }
    Ok(t)
}

/// Linear quantization parameters of a stored depth map, in meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DepthRange {
    pub min: f64,
    pub max: f64,
}

impl DepthRange {
    pub fn new(min: f64, max: f64) -> Result<Self> {
        if !(min.is_finite() && max.is_finite()) || min <= 0.0 || max <= min {
            return Err(AppError::Config(format!(
                "depth quantization range [{min}, {max}] must be positive and increasing"
            )));
        }
        Ok(Self { min, max })
    }

    fn encode(self, meters: f64) -> u16 {
        let t = (meters - self.min) / (self.max - self.min);
        (t.clamp(0.0, 1.0) * 65535.0).round() as u16
    }

    fn decode(self, q: u16) -> f64 {
        self.min + q as f64 / 65535.0 * (self.max - self.min)
    }
}

pub fn save_depth16(path: &Path, depth: &Tensor<f64>, range: DepthRange) -> Result<()> {
    let [n, c, h, w] = depth.shape();
    if n != 1 || c != 1 {
        return Err(AppError::Mismatch(format!(
            "expected a single [1,1,h,w] depth map to write as PNG, got {}",
            depth.shape_str()
        )));
    }
    let mut img: ImageBuffer<Luma<u16>, Vec<u16>> = ImageBuffer::new(w as u32, h as u32);
    for y in 0..h {
        for xp in 0..w {
            img.put_pixel(
                xp as u32,
                y as u32,
                Luma([range.encode(depth.at(0, 0, y, xp))]),
            );
        }
    }
    img.save(path).map_err(|e| match e {
        image::ImageError::IoError(io) => AppError::io(path, io),
        other => AppError::Mismatch(format!("{}: {other}", path.display())),
    })
}

pub fn load_depth16(path: &Path, range: DepthRange) -> Result<Tensor<f64>> {
    let img = image::open(path).map_err(|e| match e {
        image::ImageError::IoError(io) => AppError::io(path, io),
        other => AppError::Mismatch(format!("{}: {other}", path.display())),
    })?;
    let img: ImageBuffer<Luma<u16>, Vec<u16>> = img.into_luma16();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut t = Tensor::zeros([1, 1, h, w]);
    for y in 0..h {
        for xp in 0..w {
            *t.at_mut(0, 0, y, xp) = range.decode(img.get_pixel(xp as u32, y as u32).0[0]);
        }
    }
    Ok(t)
}

/// Lays images out side by side with a 2-pixel divider — the contact-sheet
/// primitive. All inputs must share height.
pub fn save_strip(path: &Path, images: &[&Tensor<f32>]) -> Result<()> {
    if images.is_empty() {
        return Err(AppError::Mismatch("empty image strip".into()));
    }
    let h = images[0].h();
    let gap = 2usize;
    let total_w: usize = images.iter().map(|t| t.w()).sum::<usize>() + gap * (images.len() - 1);
    let mut strip = Tensor::full([1, 3, h, total_w], 1.0f32);
    let mut x0 = 0usize;
    for img in images {
        let [n, c, ih, iw] = img.shape();
        if n != 1 || c != 3 || ih != h {
            return Err(AppError::Mismatch(format!(
                "strip member {} disagrees with height {h}",
                img.shape_str()
            )));
        }
        for ch in 0..3 {
            for y in 0..h {
                for xp in 0..iw {
                    *strip.at_mut(0, ch, y, x0 + xp) = img.at(0, ch, y, xp);
                }
            }
        }
        x0 += iw + gap;
    }
    save_rgb(path, &strip)
}
