//! Image-only lettering and map graticules. Nothing here touches the mask.

use std::path::Path;

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::rng::{self, Stage};

use super::config::{uniform, AnnotationParams, StyleConfig};
use super::draw::Pt;
use super::font::{render_text, Bitmap, FontFace};
use super::SynthError;

const DEFAULT_LEXICON: &str = include_str!("../../data/place_names.txt");

fn parse_lexicon(text: &str) -> Vec<String> {
    text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')).map(String::from).collect()
}

/// The bundled list of 500 invented place names.
pub fn default_lexicon() -> Vec<String> {
    parse_lexicon(DEFAULT_LEXICON)
}

/// One name per line; blank lines and `#` comments are skipped.
pub fn load_lexicon(path: impl AsRef<Path>) -> Result<Vec<String>, SynthError> {
    Ok(parse_lexicon(&std::fs::read_to_string(path)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedLabel {
    pub text: String,
    pub x: f64,
    pub y: f64,
    pub scale: u32,
    pub angle_deg: f64,
    pub face: FontFace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Graticule {
    pub spacing: f64,
    pub width: f64,
    pub vertical: Vec<f64>,
    pub horizontal: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Annotations {
    pub labels: Vec<PlacedLabel>,
    pub graticule: Option<Graticule>,
}

/// Line positions `k·spacing` for `k ≥ 1` strictly inside `len`.
pub fn graticule_positions(len: u32, spacing: f64) -> Vec<f64> {
    if !(spacing > 0.0) {
        return Vec::new();
    }
    (1..).map(|k| k as f64 * spacing).take_while(|&p| p < len as f64).collect()
}

/// Pixel columns (or rows) covered by a line of `width` centred on `pos`.
fn band(pos: f64, width: f64, len: u32) -> std::ops::Range<u32> {
    let n = width.round().max(1.0) as i64;
    let start = (pos - width / 2.0).round() as i64;
    let lo = start.clamp(0, len as i64) as u32;
    let hi = (start + n).clamp(0, len as i64) as u32;
    lo..hi
}

/// Stamps a bitmap rotated by `angle_deg` about its center, placed at `at`.
pub fn stamp(img: &mut RgbImage, bmp: &Bitmap, at: Pt, angle_deg: f64, ink: [u8; 3]) {
    let (w, h) = img.dimensions();
    let (s, c) = angle_deg.to_radians().sin_cos();
    let (hw, hh) = (bmp.width as f64 / 2.0, bmp.height as f64 / 2.0);
    let r = (hw * hw + hh * hh).sqrt().ceil();
    let x0 = (at[0] - r).floor().max(0.0) as i64;
    let x1 = (at[0] + r).ceil().min(w as f64 - 1.0) as i64;
    let y0 = (at[1] - r).floor().max(0.0) as i64;
    let y1 = (at[1] + r).ceil().min(h as f64 - 1.0) as i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let (dx, dy) = (x as f64 + 0.5 - at[0], y as f64 + 0.5 - at[1]);
            // Inverse rotation into bitmap space.
            let u = dx * c + dy * s + hw;
            let v = -dx * s + dy * c + hh;
            if u < 0.0 || v < 0.0 {
                continue;
            }
            let (bu, bv) = (u as usize, v as usize);
            if bu < bmp.width && bv < bmp.height && bmp.get(bu, bv) {
                img.put_pixel(x as u32, y as u32, Rgb(ink));
            }
        }
    }
}

fn ink_color(rng: &mut impl Rng) -> [u8; 3] {
    let base = rng.random_range(15..70u8);
    [base + rng.random_range(0..20u8), base + rng.random_range(0..12u8), base]
}

/// Stamps lexicon labels at random positions plus the given anchored
/// names, then maybe a graticule.
pub fn annotate(
    img: &mut RgbImage,
    lexicon: &[String],
    anchors: &[(Pt, String)],
    style: &StyleConfig,
    params: &AnnotationParams,
    seed: u64,
) -> Result<Annotations, SynthError> {
    let (w, h) = img.dimensions();
    let mut rng = rng::stream(seed, Stage::Annotate);
    let megapixels = w as f64 * h as f64 / 1e6;
    let count = (style.label_density * megapixels).round() as usize;
    if count > 0 && lexicon.is_empty() {
        return Err(SynthError::EmptyLexicon);
    }
    let mut out = Annotations::default();
    let mut jobs: Vec<(Pt, String)> = anchors.to_vec();
    for _ in 0..count {
        let name = lexicon[rng.random_range(0..lexicon.len())].clone();
        jobs.push(([rng.random::<f64>() * w as f64, rng.random::<f64>() * h as f64], name));
    }
    for (at, text) in jobs {
        let scale = rng.random_range(params.font_scale[0]..=params.font_scale[1]);
        let angle = rng.random_range(-1.0..=1.0) * params.max_rotation_deg;
        let face = FontFace::ALL[rng.random_range(0..FontFace::ALL.len())];
        let ink = ink_color(&mut rng);
        stamp(img, &render_text(&text, face, scale as usize), at, angle, ink);
        out.labels.push(PlacedLabel { text, x: at[0], y: at[1], scale, angle_deg: angle, face });
    }
    if rng.random::<f64>() < style.graticule_prob {
        let spacing = uniform(&mut rng, params.graticule_spacing);
        let width = uniform(&mut rng, params.graticule_width);
        out.graticule = Some(draw_graticule(img, spacing, width, ink_color(&mut rng)));
    }
    Ok(out)
}

pub fn draw_graticule(img: &mut RgbImage, spacing: f64, width: f64, ink: [u8; 3]) -> Graticule {
    let (w, h) = img.dimensions();
    let vertical = graticule_positions(w, spacing);
    let horizontal = graticule_positions(h, spacing);
    for &x in &vertical {
        for col in band(x, width, w) {
            for y in 0..h {
                img.put_pixel(col, y, Rgb(ink));
            }
        }
    }
    for &y in &horizontal {
        for row in band(y, width, h) {
            for x in 0..w {
                img.put_pixel(x, row, Rgb(ink));
            }
        }
    }
    Graticule { spacing, width, vertical, horizontal }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_lexicon_has_500_names() {
        let names = default_lexicon();
        assert_eq!(names.len(), 500);
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), 500);
    }

    #[test]
    fn graticule_count() {
        assert_eq!(graticule_positions(768, 100.0).len(), 7);
        assert_eq!(graticule_positions(700, 100.0).len(), 6);
        let mut img = RgbImage::from_pixel(768, 768, Rgb([255; 3]));
        let g = draw_graticule(&mut img, 100.0, 1.0, [0; 3]);
        assert_eq!((g.vertical.len(), g.horizontal.len()), (7, 7));
        let dark_cols = (0..768).filter(|&x| img.get_pixel(x, 50).0 == [0; 3]).count();
        assert_eq!(dark_cols, 7);
    }

    #[test]
    fn nothing_to_draw_leaves_image_unchanged() {
        let style = StyleConfig { label_density: 0.0, graticule_prob: 0.0, ..StyleConfig::default() };
        let orig = RgbImage::from_fn(64, 48, |x, y| Rgb([x as u8, y as u8, 7]));
        let mut img = orig.clone();
        let a = annotate(&mut img, &[], &[], &style, &AnnotationParams::default(), 5).unwrap();
        assert_eq!(img, orig);
        assert!(a.labels.is_empty() && a.graticule.is_none());
    }

    #[test]
    fn labels_are_reproducible() {
        let style = StyleConfig { label_density: 40.0, ..StyleConfig::default() };
        let lex = default_lexicon();
        let run = || {
            let mut img = RgbImage::from_pixel(300, 200, Rgb([230; 3]));
            let a = annotate(&mut img, &lex, &[], &style, &AnnotationParams::default(), 11).unwrap();
            (img, a)
        };
        let (i1, a1) = run();
        let (i2, a2) = run();
        assert_eq!(a1, a2);
        assert_eq!(i1, i2);
        assert_eq!(a1.labels.len(), 2);
    }

    #[test]
    fn empty_lexicon_with_labels_is_an_error() {
        let mut img = RgbImage::new(1000, 1000);
        let r = annotate(&mut img, &[], &[], &StyleConfig::default(), &AnnotationParams::default(), 0);
        assert!(matches!(r, Err(SynthError::EmptyLexicon)));
    }
}
