//! Inference at several resolutions with logit averaging.

use image::RgbImage;
use serde::{Deserialize, Serialize};

use crate::backend::SegmentationBackend;
use crate::logits::Logits;
use crate::mask::LabelMask;
use crate::resample::{resize_bilinear, resize_nearest, resize_rgb};
use crate::NUM_CLASSES;

use super::tiling::{plan_tiles, run_tiled, DEFAULT_OVERLAP, DEFAULT_PATCH};
use super::InferError;

/// How coarse-scale logits are brought back to full resolution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Upsample {
    #[default]
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferOptions {
    pub scales: Vec<f64>,
    pub patch: u32,
    pub overlap: u32,
    pub upsample: Upsample,
}

impl Default for InferOptions {
    fn default() -> Self {
        Self { scales: vec![1.0, 0.5], patch: DEFAULT_PATCH, overlap: DEFAULT_OVERLAP, upsample: Upsample::Bilinear }
    }
}

impl InferOptions {
    pub fn validate(&self) -> Result<(), InferError> {
        if self.scales.is_empty() {
            return Err(InferError::EmptyScales);
        }
        if let Some(&s) = self.scales.iter().find(|s| !(s.is_finite() && **s > 0.0 && **s <= 4.0)) {
            return Err(InferError::InvalidScale(s));
        }
        if self.patch == 0 || self.overlap >= self.patch {
            return Err(InferError::InvalidTiling { patch: self.patch, overlap: self.overlap });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Prediction {
    pub mask: LabelMask,
    /// Scale-averaged logits at full resolution.
    pub logits: Logits,
}

/// Image size after scaling, at least one pixel per side.
pub fn scaled_dims(width: u32, height: u32, scale: f64) -> (u32, u32) {
    let f = |n: u32| ((n as f64 * scale).round() as u32).max(1);
    (f(width), f(height))
}

fn upsample(l: &Logits, width: u32, height: u32, mode: Upsample) -> Vec<f32> {
    let mut out = Vec::with_capacity(width as usize * height as usize * NUM_CLASSES);
    for k in 0..NUM_CLASSES {
        let (sw, sh) = (l.width() as usize, l.height() as usize);
        let plane = match mode {
            Upsample::Bilinear => resize_bilinear(l.plane(k), 1, sw, sh, width as usize, height as usize),
            Upsample::Nearest => resize_nearest(l.plane(k), 1, sw, sh, width as usize, height as usize),
        };
        out.extend(plane);
    }
    out
}

pub fn multiscale_infer(
    image: &RgbImage,
    backend: &dyn SegmentationBackend,
    options: &InferOptions,
) -> Result<Prediction, InferError> {
    options.validate()?;
    let (w, h) = image.dimensions();
    if w == 0 || h == 0 {
        return Err(InferError::EmptyImage);
    }
    let mut sum = vec![0f32; w as usize * h as usize * NUM_CLASSES];
    for &scale in &options.scales {
        let (sw, sh) = scaled_dims(w, h, scale);
        let scaled;
        let input = if (sw, sh) == (w, h) {
            image
        } else {
            scaled = resize_rgb(image, sw, sh);
            &scaled
        };
        let grid = plan_tiles(sw, sh, options.patch, options.overlap)?;
        log::debug!("scale {scale}: {sw}x{sh}, {} tiles", grid.len());
        let logits = run_tiled(input, backend, &grid, scale)?;
        let full = if (sw, sh) == (w, h) { logits.into_vec() } else { upsample(&logits, w, h, options.upsample) };
        for (s, v) in sum.iter_mut().zip(full) {
            *s += v;
        }
    }
    let n = options.scales.len() as f32;
    for s in &mut sum {
        *s /= n;
    }
    let logits = Logits::new(w, h, NUM_CLASSES as u32, sum).expect("accumulator shape");
    Ok(Prediction { mask: logits.argmax(), logits })
}
