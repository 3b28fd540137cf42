//! Scan and print artefacts: dark spots, grayscale conversion, map-frame
//! crops and JPEG compression.

use std::io::Cursor;

use image::codecs::jpeg::JpegEncoder;
use image::{DynamicImage, ExtendedColorType, GrayImage, ImageFormat, Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::mask::{LabelMask, SemanticClass};
use crate::rng::{self, Stage};

use super::config::{uniform, StyleConfig};
use super::draw;
use super::stylize::mix_color;
use super::SynthError;

/// Fraction of the image side taken by a frame band.
const FRAME_BAND: [f64; 2] = [0.03, 0.12];
const SPOT_COLOR: [u8; 3] = [58, 42, 26];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FrameSide {
    Top,
    Bottom,
    Left,
    Right,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

/// A flat band replacing one edge or corner, as a pixel rectangle
/// `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameCrop {
    pub side: FrameSide,
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl FrameCrop {
    #[inline]
    pub fn contains(&self, x: u32, y: u32) -> bool {
        (self.x0..self.x1).contains(&x) && (self.y0..self.y1).contains(&y)
    }

    pub fn apply_to_mask(&self, mask: &mut LabelMask) {
        for y in self.y0..self.y1 {
            for x in self.x0..self.x1 {
                mask.set(x, y, SemanticClass::Background);
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct Degraded {
    pub image: RgbImage,
    /// The encoded JPEG whose decoding is `image`, if compression ran.
    pub jpeg: Option<Vec<u8>>,
    pub jpeg_quality: Option<u8>,
    pub grayscale: bool,
    pub spots: usize,
    pub frame_crop: Option<FrameCrop>,
}

fn frame_rect(side: FrameSide, w: u32, h: u32, fx: f64, fy: f64) -> FrameCrop {
    let bw = ((w as f64 * fx).round() as u32).clamp(1, w);
    let bh = ((h as f64 * fy).round() as u32).clamp(1, h);
    let (x0, y0, x1, y1) = match side {
        FrameSide::Top => (0, 0, w, bh),
        FrameSide::Bottom => (0, h - bh, w, h),
        FrameSide::Left => (0, 0, bw, h),
        FrameSide::Right => (w - bw, 0, w, h),
        FrameSide::TopLeft => (0, 0, bw * 3, bh * 3),
        FrameSide::TopRight => (w.saturating_sub(bw * 3), 0, w, bh * 3),
        FrameSide::BottomLeft => (0, h.saturating_sub(bh * 3), bw * 3, h),
        FrameSide::BottomRight => (w.saturating_sub(bw * 3), h.saturating_sub(bh * 3), w, h),
    };
    FrameCrop { side, x0, y0, x1: x1.min(w), y1: y1.min(h) }
}

pub fn luminance(p: [u8; 3]) -> u8 {
    (0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64).round().clamp(0.0, 255.0) as u8
}

pub fn encode_jpeg(img: &RgbImage, quality: u8, grayscale: bool) -> Result<Vec<u8>, SynthError> {
    let mut buf = Vec::new();
    let mut enc = JpegEncoder::new_with_quality(&mut buf, quality.clamp(1, 100));
    if grayscale {
        let gray: Vec<u8> = img.pixels().map(|p| p.0[0]).collect();
        enc.encode(&gray, img.width(), img.height(), ExtendedColorType::L8)?;
    } else {
        enc.encode(img.as_raw(), img.width(), img.height(), ExtendedColorType::Rgb8)?;
    }
    Ok(buf)
}

pub fn decode_jpeg(bytes: &[u8]) -> Result<RgbImage, SynthError> {
    let img = image::load(Cursor::new(bytes), ImageFormat::Jpeg)?;
    Ok(match img {
        DynamicImage::ImageLuma8(g) => gray_to_rgb(&g),
        other => other.to_rgb8(),
    })
}

fn gray_to_rgb(g: &GrayImage) -> RgbImage {
    RgbImage::from_fn(g.width(), g.height(), |x, y| {
        let v = g.get_pixel(x, y).0[0];
        Rgb([v, v, v])
    })
}

pub fn psnr(a: &RgbImage, b: &RgbImage) -> f64 {
    let n = a.as_raw().len() as f64;
    let mse = a.as_raw().iter().zip(b.as_raw()).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / n;
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (255.0f64 * 255.0 / mse).log10()
    }
}

/// Applies the artefacts in a fixed order. The only mask-relevant effect is
/// the returned frame crop.
pub fn apply_degradations(
    image: &RgbImage,
    style: &StyleConfig,
    paper: [u8; 3],
    seed: u64,
) -> Result<Degraded, SynthError> {
    let mut rng = rng::stream(seed, Stage::Degrade);
    let mut img = image.clone();
    let (w, h) = img.dimensions();

    let spot = &style.dark_spot_params;
    let spots = rng.random_range(spot.count[0]..=spot.count[1]) as usize;
    for _ in 0..spots {
        let center = [rng.random::<f64>() * w as f64, rng.random::<f64>() * h as f64];
        let rx = uniform(&mut rng, spot.radius);
        let ry = uniform(&mut rng, spot.radius);
        let angle = rng.random::<f64>() * std::f64::consts::PI;
        let opacity = uniform(&mut rng, spot.opacity);
        draw::fill_ellipse(center, rx, ry, angle, w, h, |x, y, d| {
            // Soft falloff towards the rim.
            let alpha = opacity * (1.0 - d * d);
            let p = img.get_pixel_mut(x, y);
            p.0 = mix_color(p.0, SPOT_COLOR, alpha);
        });
    }

    let grayscale = rng.random::<f64>() < style.grayscale_prob;
    if grayscale {
        for p in img.pixels_mut() {
            let l = luminance(p.0);
            p.0 = [l, l, l];
        }
    }

    let frame_crop = if rng.random::<f64>() < style.frame_crop_prob {
        let side = [
            FrameSide::Top,
            FrameSide::Bottom,
            FrameSide::Left,
            FrameSide::Right,
            FrameSide::TopLeft,
            FrameSide::TopRight,
            FrameSide::BottomLeft,
            FrameSide::BottomRight,
        ][rng.random_range(0..8)];
        let crop = frame_rect(side, w, h, uniform(&mut rng, FRAME_BAND), uniform(&mut rng, FRAME_BAND));
        let fill = if grayscale {
            let l = luminance(paper);
            [l, l, l]
        } else {
            paper
        };
        for y in crop.y0..crop.y1 {
            for x in crop.x0..crop.x1 {
                img.put_pixel(x, y, Rgb(fill));
            }
        }
        Some(crop)
    } else {
        None
    };

    let [q0, q1] = style.jpeg_quality_range;
    let quality = rng.random_range(q0..=q1);
    let jpeg = encode_jpeg(&img, quality, grayscale)?;
    let image = decode_jpeg(&jpeg)?;
    Ok(Degraded { image, jpeg: Some(jpeg), jpeg_quality: Some(quality), grayscale, spots, frame_crop })
}
