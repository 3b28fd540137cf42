//! Rendering a label template into a stylized RGB image. Every process paints
//! only the pixels of its own region, so the template stays a valid label
//! for the result.

use std::collections::BTreeSet;

use image::{Rgb, RgbImage};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geodata::{BBox, FeatureRole, Variant, VectorFeatureSet};
use crate::mask::{LabelMask, SemanticClass};
use crate::resample;
use crate::rng::{self, Stage};

use super::color::ColorModel;
use super::config::{uniform, PatternParams, Process, StyleConfig};
use super::draw;
use super::rasterize::{paint_feature, LineWidths, PixelTransform};
use super::sprites::{sprite, SpriteKind};
use super::textures::{Texture, TextureKind};
use super::SynthError;

pub type Color = [u8; 3];

/// Pixels that belong to a styled sub-variant of their class.
#[derive(Debug, Clone)]
pub struct SubRegions {
    pub forest: Vec<bool>,
    pub railway: Vec<bool>,
}

impl SubRegions {
    pub fn none(len: usize) -> Self {
        Self { forest: vec![false; len], railway: vec![false; len] }
    }

    /// Rasterizes wood polygons and railway lines, restricted to the pixels
    /// the template assigns to their class.
    pub fn compute(features: &VectorFeatureSet, bbox: &BBox, template: &LabelMask, widths: &LineWidths) -> Self {
        let (w, h) = template.dims();
        let mut out = Self::none(template.len());
        let tf = PixelTransform::new(bbox, w, h);
        for f in &features.features {
            let FeatureRole::Class(class) = f.role else { continue };
            let Ok(entry) = f.entry() else { continue };
            let target = match entry.variant {
                Variant::Forest => &mut out.forest,
                Variant::Railway => &mut out.railway,
                Variant::Base => continue,
            };
            paint_feature(f, entry.variant, class, &tf, widths, w, h, &mut |x, y| {
                if template.get(x, y) == class {
                    target[(y * w + x) as usize] = true;
                }
            });
        }
        out
    }
}

/// What was drawn for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionStyle {
    pub class: SemanticClass,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<String>,
    pub process: Process,
    pub color: Color,
    pub pixels: usize,
}

#[derive(Debug, Clone)]
pub struct Stylized {
    pub image: RgbImage,
    pub paper: Color,
    pub regions: Vec<RegionStyle>,
}

/// One class region as a list of row-major pixel indices.
pub struct Region<'a> {
    pub width: u32,
    pub height: u32,
    pub pixels: &'a [u32],
    pub member: &'a [bool],
}

impl Region<'_> {
    #[inline]
    fn xy(&self, i: u32) -> (u32, u32) {
        (i % self.width, i / self.width)
    }

    #[inline]
    fn contains(&self, x: u32, y: u32) -> bool {
        self.member[(y * self.width + x) as usize]
    }
}

pub fn mix_color(a: Color, b: Color, t: f64) -> Color {
    [0, 1, 2].map(|i| (a[i] as f64 + t * (b[i] as f64 - a[i] as f64)).round().clamp(0.0, 255.0) as u8)
}

fn darken(c: Color, f: f64) -> Color {
    c.map(|v| (v as f64 * f).round() as u8)
}

pub fn fill_plain(img: &mut RgbImage, region: &Region, color: Color) {
    for &i in region.pixels {
        let (x, y) = region.xy(i);
        img.put_pixel(x, y, Rgb(color));
    }
}

/// Parallel strokes at `angle_deg` from the x axis. Returns the number of
/// distinct strokes that touched the region.
#[allow(clippy::too_many_arguments)]
pub fn fill_hatching(
    img: &mut RgbImage,
    region: &Region,
    angle_deg: f64,
    spacing: f64,
    width: f64,
    phase: f64,
    ink: Color,
    ground: Color,
) -> usize {
    let (s, c) = angle_deg.to_radians().sin_cos();
    let mut strokes = BTreeSet::new();
    for &i in region.pixels {
        let (x, y) = region.xy(i);
        // Signed distance along the stroke normal.
        let d = -(x as f64 + 0.5) * s + (y as f64 + 0.5) * c - phase;
        let k = (d / spacing).round();
        let on = (d - k * spacing).abs() <= width / 2.0;
        if on {
            strokes.insert(k as i64);
        }
        img.put_pixel(x, y, Rgb(if on { ink } else { ground }));
    }
    strokes.len()
}

pub fn fill_dots(
    img: &mut RgbImage,
    region: &Region,
    spacing: f64,
    radius: f64,
    phase: [f64; 2],
    ink: Color,
    ground: Color,
) {
    for &i in region.pixels {
        let (x, y) = region.xy(i);
        let (px, py) = (x as f64 + 0.5 - phase[0], y as f64 + 0.5 - phase[1]);
        let row = (py / spacing).round();
        // Alternate rows are offset by half a period.
        let shift = if (row as i64).rem_euclid(2) == 1 { spacing / 2.0 } else { 0.0 };
        let col = ((px - shift) / spacing).round();
        let d = draw::dist([px, py], [col * spacing + shift, row * spacing]);
        img.put_pixel(x, y, Rgb(if d <= radius { ink } else { ground }));
    }
}

/// Concentric strokes following the region outline at increasing offsets.
/// The image border is not treated as a shore. Returns `false` if the region
/// has no outline inside the image.
#[allow(clippy::too_many_arguments)]
pub fn fill_waterlines(
    img: &mut RgbImage,
    region: &Region,
    count: u32,
    spacing: f64,
    width: f64,
    ink: Color,
    ground: Color,
) -> bool {
    let (w, h) = (region.width as usize, region.height as usize);
    let seeds: Vec<bool> = region.member.iter().map(|&m| !m).collect();
    if !seeds.iter().any(|&s| s) {
        return false;
    }
    let d2 = draw::squared_distance_transform(&seeds, w, h);
    for &i in region.pixels {
        let (x, y) = region.xy(i);
        let d = d2[i as usize].sqrt();
        let on = (1..=count).any(|k| (d - k as f64 * spacing).abs() <= width / 2.0);
        img.put_pixel(x, y, Rgb(if on { ink } else { ground }));
    }
    true
}

pub fn fill_texture(img: &mut RgbImage, region: &Region, texture: Texture, strength: f64, ink: Color, ground: Color) {
    for &i in region.pixels {
        let (x, y) = region.xy(i);
        let t = strength * texture.intensity(x, y);
        img.put_pixel(x, y, Rgb(mix_color(ground, ink, t)));
    }
}

/// Stamps sprites on a jittered grid, clipped to the region.
#[allow(clippy::too_many_arguments)]
pub fn fill_icons(
    img: &mut RgbImage,
    region: &Region,
    kinds: &[SpriteKind],
    spacing: f64,
    ink: Color,
    ground: Color,
    rng: &mut impl Rng,
) {
    fill_plain(img, region, ground);
    let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
    for &i in region.pixels {
        let (x, y) = region.xy(i);
        x0 = x0.min(x);
        y0 = y0.min(y);
        x1 = x1.max(x);
        y1 = y1.max(y);
    }
    let jitter = spacing * 0.3;
    let mut gy = y0 as f64 + rng.random::<f64>() * spacing;
    while gy <= y1 as f64 {
        let mut gx = x0 as f64 + rng.random::<f64>() * spacing;
        while gx <= x1 as f64 {
            let s = sprite(kinds[rng.random_range(0..kinds.len())]);
            let cx = gx + rng.random_range(-jitter..=jitter);
            let cy = gy + rng.random_range(-jitter..=jitter);
            let ox = (cx - s.width as f64 / 2.0).round() as i64;
            let oy = (cy - s.height as f64 / 2.0).round() as i64;
            for sy in 0..s.height {
                for sx in 0..s.width {
                    let (px, py) = (ox + sx as i64, oy + sy as i64);
                    if !s.ink(sx, sy) || px < 0 || py < 0 || px >= region.width as i64 || py >= region.height as i64 {
                        continue;
                    }
                    if region.contains(px as u32, py as u32) {
                        img.put_pixel(px as u32, py as u32, Rgb(ink));
                    }
                }
            }
            gx += spacing;
        }
        gy += spacing;
    }
}

/// Alternating dark and light ties along railway strokes.
fn fill_railway(img: &mut RgbImage, region: &Region, ink: Color, ground: Color) {
    for &i in region.pixels {
        let (x, y) = region.xy(i);
        let dash = ((x + y) / 5) % 2 == 0;
        img.put_pixel(x, y, Rgb(if dash { ink } else { ground }));
    }
}

fn icon_kinds(class: SemanticClass, forest: bool) -> &'static [SpriteKind] {
    if forest {
        return &[SpriteKind::Tree, SpriteKind::Conifer];
    }
    match class {
        SemanticClass::NonBuilt => &[SpriteKind::Grass, SpriteKind::Marsh, SpriteKind::Orchard],
        SemanticClass::Water => &[SpriteKind::Wave],
        SemanticClass::Built => &[SpriteKind::House],
        _ => &[SpriteKind::Orchard],
    }
}

#[allow(clippy::too_many_arguments)]
fn paint_region(
    img: &mut RgbImage,
    region: &Region,
    class: SemanticClass,
    forest: bool,
    mut process: Process,
    color: Color,
    paper: Color,
    params: &PatternParams,
    rng: &mut impl Rng,
) -> Process {
    if region.pixels.len() < params.min_pattern_pixels {
        process = Process::Plain;
    }
    let ground = mix_color(paper, color, uniform(rng, params.tint));
    let ink = darken(color, 0.7);
    match process {
        Process::Plain => fill_plain(img, region, color),
        Process::Dots => {
            let spacing = uniform(rng, params.dot_spacing);
            let radius = uniform(rng, params.dot_radius).min(spacing / 2.0);
            let phase = [rng.random::<f64>() * spacing, rng.random::<f64>() * spacing];
            fill_dots(img, region, spacing, radius, phase, ink, ground);
        }
        Process::Hatching => {
            let angle = params.hatch_angles[rng.random_range(0..params.hatch_angles.len())];
            let spacing = uniform(rng, params.hatch_spacing);
            let width = uniform(rng, params.hatch_width);
            let phase = rng.random::<f64>() * spacing;
            fill_hatching(img, region, angle, spacing, width, phase, ink, ground);
        }
        Process::Waterlines => {
            let count = rng.random_range(params.waterline_count[0]..=params.waterline_count[1]);
            let spacing = uniform(rng, params.waterline_spacing);
            let ground = mix_color(paper, color, 0.5 * uniform(rng, params.tint));
            if !fill_waterlines(img, region, count, spacing, params.waterline_width, color, ground) {
                fill_plain(img, region, color);
                return Process::Plain;
            }
        }
        Process::Texture => {
            let kind = TextureKind::ALL[rng.random_range(0..TextureKind::ALL.len())];
            let texture = Texture { kind, seed: rng.random() };
            let strength = uniform(rng, params.texture_strength);
            fill_texture(img, region, texture, strength, ink, color);
        }
        Process::Icons => {
            let spacing = uniform(rng, params.icon_spacing);
            fill_icons(img, region, icon_kinds(class, forest), spacing, ink, ground, rng);
        }
    }
    process
}

/// Blurs colour transitions by shrinking and re-enlarging the image.
pub fn antialias(img: &RgbImage, factor: f64) -> RgbImage {
    if factor <= 1.0 {
        return img.clone();
    }
    let (w, h) = img.dimensions();
    let sw = ((w as f64 / factor).round() as u32).max(1);
    let sh = ((h as f64 / factor).round() as u32).max(1);
    resample::resize_rgb(&resample::resize_rgb(img, sw, sh), w, h)
}

pub fn stylize(
    template: &LabelMask,
    sub: &SubRegions,
    style: &StyleConfig,
    params: &PatternParams,
    colors: &ColorModel,
    seed: u64,
) -> Result<Stylized, SynthError> {
    let (w, h) = template.dims();
    let mut rng = rng::stream(seed, Stage::Stylize);
    let paper = colors.get(SemanticClass::Background)?.sample(&mut rng);
    let mut img = RgbImage::from_pixel(w, h, Rgb(paper));

    // Region 0..6 are the classes, 6 is forest, 7 is railway.
    let mut lists: Vec<Vec<u32>> = vec![Vec::new(); 8];
    for (i, &v) in template.as_raw().iter().enumerate() {
        let slot = if sub.forest[i] {
            6
        } else if sub.railway[i] {
            7
        } else {
            v as usize
        };
        lists[slot].push(i as u32);
    }
    let mut regions = Vec::new();
    let mut member = vec![false; template.len()];
    for (slot, pixels) in lists.iter().enumerate() {
        if pixels.is_empty() {
            continue;
        }
        let (class, variant) = match slot {
            6 => (SemanticClass::NonBuilt, Some(Variant::Forest)),
            7 => (SemanticClass::RoadNetwork, Some(Variant::Railway)),
            id => (SemanticClass::from_id(id as u8).expect("mask values are validated"), None),
        };
        member.iter_mut().for_each(|m| *m = false);
        for &i in pixels {
            member[i as usize] = true;
        }
        let region = Region { width: w, height: h, pixels, member: &member };
        let color = if class == SemanticClass::Background { paper } else { colors.get(class)?.sample(&mut rng) };
        let process = match variant {
            Some(Variant::Railway) => {
                fill_railway(&mut img, &region, darken(color, 0.4), paper);
                Process::Plain
            }
            Some(Variant::Forest) if rng.random::<f64>() < 0.5 => {
                paint_region(&mut img, &region, class, true, Process::Icons, color, paper, params, &mut rng)
            }
            _ => {
                let p = style.sample_process(class, &mut rng);
                paint_region(&mut img, &region, class, variant.is_some(), p, color, paper, params, &mut rng)
            }
        };
        regions.push(RegionStyle {
            class,
            variant: variant.map(|v| format!("{v:?}").to_lowercase()),
            process,
            color,
            pixels: pixels.len(),
        });
    }
    let factor = uniform(&mut rng, params.antialias_factor);
    let image = antialias(&img, factor);
    Ok(Stylized { image, paper, regions })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square_region(n: u32) -> (Vec<u32>, Vec<bool>) {
        ((0..n * n).collect(), vec![true; (n * n) as usize])
    }

    #[test]
    fn hatching_count_at_45_degrees() {
        let (pixels, member) = square_region(64);
        let region = Region { width: 64, height: 64, pixels: &pixels, member: &member };
        let mut img = RgbImage::new(64, 64);
        let expect = (64.0 * 2f64.sqrt() / 8.0).ceil() as i64;
        for phase in [0.0, 1.3, 4.0, 7.9] {
            let n = fill_hatching(&mut img, &region, 45.0, 8.0, 1.5, phase, [0; 3], [255; 3]) as i64;
            assert!((n - expect).abs() <= 1, "phase {phase}: {n} strokes");
        }
    }

    #[test]
    fn waterlines_follow_the_shore() {
        // Left half water; the shore is the column boundary at x = 16.
        let (w, h) = (32u32, 8u32);
        let member: Vec<bool> = (0..w * h).map(|i| i % w < 16).collect();
        let pixels: Vec<u32> = (0..w * h).filter(|&i| member[i as usize]).collect();
        let region = Region { width: w, height: h, pixels: &pixels, member: &member };
        let mut img = RgbImage::new(w, h);
        assert!(fill_waterlines(&mut img, &region, 2, 4.0, 1.0, [0; 3], [255; 3]));
        for x in 0..16u32 {
            let d = (16 - x) as f64;
            let on = (d - 4.0).abs() <= 0.5 || (d - 8.0).abs() <= 0.5;
            assert_eq!(img.get_pixel(x, 3).0 == [0; 3], on, "column {x}");
        }
        assert_eq!(*img.get_pixel(20, 3), Rgb([0, 0, 0]), "outside pixels untouched");
    }

    #[test]
    fn patterns_stay_inside_their_region() {
        let (w, h) = (40u32, 40u32);
        let member: Vec<bool> = (0..w * h).map(|i| (i / w + i % w) % 7 < 3).collect();
        let pixels: Vec<u32> = (0..w * h).filter(|&i| member[i as usize]).collect();
        let region = Region { width: w, height: h, pixels: &pixels, member: &member };
        let sentinel = [1, 2, 3];
        let mut rng = rng::stream(3, Stage::Stylize);
        let params = PatternParams { min_pattern_pixels: 0, ..PatternParams::default() };
        for p in [Process::Plain, Process::Dots, Process::Hatching, Process::Waterlines, Process::Texture, Process::Icons] {
            let mut img = RgbImage::from_pixel(w, h, Rgb(sentinel));
            paint_region(&mut img, &region, SemanticClass::Water, false, p, [20, 60, 200], [240; 3], &params, &mut rng);
            for i in 0..w * h {
                if !member[i as usize] {
                    assert_eq!(img.get_pixel(i % w, i / w).0, sentinel, "{p:?}");
                }
            }
        }
    }

    #[test]
    fn small_regions_fall_back_to_plain() {
        let member = vec![true; 4];
        let pixels = vec![0, 1, 2, 3];
        let region = Region { width: 2, height: 2, pixels: &pixels, member: &member };
        let mut img = RgbImage::new(2, 2);
        let mut rng = rng::stream(0, Stage::Stylize);
        let p = paint_region(
            &mut img,
            &region,
            SemanticClass::Built,
            false,
            Process::Hatching,
            [9, 9, 9],
            [200; 3],
            &PatternParams::default(),
            &mut rng,
        );
        assert_eq!(p, Process::Plain);
        assert!(img.pixels().all(|p| p.0 == [9, 9, 9]));
    }

    #[test]
    fn antialias_keeps_flat_images_flat() {
        let img = RgbImage::from_pixel(50, 30, Rgb([236, 228, 205]));
        assert_eq!(antialias(&img, 1.7), img);
    }
}
