//! Stylization and generation parameters.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geodata::HidePolicy;
use crate::mask::SemanticClass;

use super::SynthError;

/// Graphical process used to fill one class region.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Process {
    Plain,
    Dots,
    Hatching,
    Waterlines,
    Texture,
    Icons,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliefMode {
    None,
    Hachure,
    Hillshade,
    Isolines,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DarkSpotParams {
    pub count: [u32; 2],
    pub radius: [f64; 2],
    pub opacity: [f64; 2],
}

impl Default for DarkSpotParams {
    fn default() -> Self {
        Self { count: [0, 6], radius: [20.0, 120.0], opacity: [0.05, 0.2] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StyleConfig {
    pub process_weights: BTreeMap<SemanticClass, BTreeMap<Process, f64>>,
    pub grayscale_prob: f64,
    pub jpeg_quality_range: [u8; 2],
    pub frame_crop_prob: f64,
    pub dark_spot_params: DarkSpotParams,
    /// Stroke widths in pixels for classes drawn from line geometry.
    pub line_width_ranges: BTreeMap<SemanticClass, [f64; 2]>,
    pub relief_mode_weights: BTreeMap<ReliefMode, f64>,
    pub graticule_prob: f64,
    /// Random text labels per megapixel.
    pub label_density: f64,
    pub seed: u64,
}

fn weights<K: Ord + Copy>(pairs: &[(K, f64)]) -> BTreeMap<K, f64> {
    pairs.iter().copied().collect()
}

impl Default for StyleConfig {
    fn default() -> Self {
        use Process::*;
        use SemanticClass::*;
        let process_weights = [
            (Background, weights(&[(Plain, 1.0)])),
            (Boundary, weights(&[(Plain, 0.85), (Dots, 0.15)])),
            (Built, weights(&[(Plain, 0.45), (Hatching, 0.3), (Texture, 0.1), (Icons, 0.15)])),
            (
                NonBuilt,
                weights(&[(Plain, 0.35), (Dots, 0.15), (Hatching, 0.1), (Texture, 0.25), (Icons, 0.15)]),
            ),
            (
                Water,
                weights(&[(Plain, 0.35), (Hatching, 0.15), (Waterlines, 0.3), (Texture, 0.1), (Icons, 0.1)]),
            ),
            (RoadNetwork, weights(&[(Plain, 0.85), (Dots, 0.15)])),
        ]
        .into_iter()
        .collect();
        Self {
            process_weights,
            grayscale_prob: 0.15,
            jpeg_quality_range: [50, 92],
            frame_crop_prob: 0.35,
            dark_spot_params: DarkSpotParams::default(),
            line_width_ranges: [
                (Boundary, [1.5, 4.0]),
                (Water, [2.0, 6.0]),
                (RoadNetwork, [1.5, 5.0]),
            ]
            .into_iter()
            .collect(),
            relief_mode_weights: weights(&[
                (ReliefMode::None, 0.4),
                (ReliefMode::Hachure, 0.2),
                (ReliefMode::Hillshade, 0.2),
                (ReliefMode::Isolines, 0.2),
            ]),
            graticule_prob: 0.2,
            label_density: 12.0,
            seed: 0,
        }
    }
}

fn check_prob(name: &str, p: f64) -> Result<(), SynthError> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(SynthError::Config(format!("{name} must lie in [0, 1], got {p}")))
    }
}

fn check_distribution<K: std::fmt::Debug>(name: &str, w: &BTreeMap<K, f64>) -> Result<(), SynthError> {
    if w.is_empty() {
        return Err(SynthError::Config(format!("{name} is empty")));
    }
    for (k, &v) in w {
        if !(v.is_finite() && v >= 0.0) {
            return Err(SynthError::Config(format!("{name}[{k:?}] = {v} is not a probability")));
        }
    }
    let sum: f64 = w.values().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(SynthError::Config(format!("{name} sums to {sum}, expected 1")));
    }
    Ok(())
}

fn check_range(name: &str, r: [f64; 2], min: f64) -> Result<(), SynthError> {
    if !(r[0].is_finite() && r[1].is_finite() && r[0] >= min && r[0] <= r[1]) {
        return Err(SynthError::Config(format!("{name} range {r:?} is invalid")));
    }
    Ok(())
}

impl StyleConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        for class in SemanticClass::ALL {
            let w = self
                .process_weights
                .get(&class)
                .ok_or_else(|| SynthError::Config(format!("process_weights has no entry for {class}")))?;
            check_distribution(&format!("process_weights.{class}"), w)?;
        }
        check_prob("grayscale_prob", self.grayscale_prob)?;
        check_prob("frame_crop_prob", self.frame_crop_prob)?;
        check_prob("graticule_prob", self.graticule_prob)?;
        let [qlo, qhi] = self.jpeg_quality_range;
        if qlo == 0 || qlo > qhi || qhi > 100 {
            return Err(SynthError::Config(format!("jpeg_quality_range {:?}", self.jpeg_quality_range)));
        }
        let spots = &self.dark_spot_params;
        if spots.count[0] > spots.count[1] {
            return Err(SynthError::Config("dark_spot_params.count is inverted".into()));
        }
        check_range("dark_spot_params.radius", spots.radius, 0.0)?;
        check_range("dark_spot_params.opacity", spots.opacity, 0.0)?;
        check_prob("dark_spot_params.opacity", spots.opacity[1])?;
        for (class, r) in &self.line_width_ranges {
            check_range(&format!("line_width_ranges.{class}"), *r, 0.5)?;
        }
        check_distribution("relief_mode_weights", &self.relief_mode_weights)?;
        if !(self.label_density.is_finite() && self.label_density >= 0.0) {
            return Err(SynthError::Config(format!("label_density {}", self.label_density)));
        }
        Ok(())
    }

    pub fn sample_process(&self, class: SemanticClass, rng: &mut impl Rng) -> Process {
        self.process_weights
            .get(&class)
            .map(|w| sample_categorical(w, rng))
            .unwrap_or(Process::Plain)
    }
}

/// Draws a key with probability proportional to its weight. Iteration is in
/// key order, so the draw is reproducible.
pub fn sample_categorical<K: Copy>(weights: &BTreeMap<K, f64>, rng: &mut impl Rng) -> K {
    let total: f64 = weights.values().sum();
    let mut u = rng.random::<f64>() * total;
    let mut last = None;
    for (k, &w) in weights {
        if w <= 0.0 {
            continue;
        }
        last = Some(*k);
        if u < w {
            return *k;
        }
        u -= w;
    }
    last.unwrap_or_else(|| *weights.keys().next().expect("non-empty distribution"))
}

pub fn uniform(rng: &mut impl Rng, range: [f64; 2]) -> f64 {
    if range[1] > range[0] {
        rng.random_range(range[0]..range[1])
    } else {
        range[0]
    }
}

/// Geometry of the fill patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PatternParams {
    pub hatch_spacing: [f64; 2],
    pub hatch_width: [f64; 2],
    /// Candidate hatching angles in degrees.
    pub hatch_angles: Vec<f64>,
    pub dot_spacing: [f64; 2],
    pub dot_radius: [f64; 2],
    pub waterline_count: [u32; 2],
    pub waterline_spacing: [f64; 2],
    pub waterline_width: f64,
    pub icon_spacing: [f64; 2],
    pub texture_strength: [f64; 2],
    /// Patterned fills blend their base toward the sheet color by this fraction.
    pub tint: [f64; 2],
    /// Downscale factor of the anti-aliasing pass; `[1, 1]` disables it.
    pub antialias_factor: [f64; 2],
    /// Regions with fewer pixels fall back to a plain fill.
    pub min_pattern_pixels: usize,
}

impl Default for PatternParams {
    fn default() -> Self {
        Self {
            hatch_spacing: [5.0, 11.0],
            hatch_width: [1.0, 2.0],
            hatch_angles: vec![0.0, 45.0, 90.0, 135.0],
            dot_spacing: [5.0, 10.0],
            dot_radius: [0.8, 1.8],
            waterline_count: [2, 5],
            waterline_spacing: [3.0, 6.0],
            waterline_width: 1.0,
            icon_spacing: [14.0, 26.0],
            texture_strength: [0.3, 0.8],
            tint: [0.55, 0.85],
            antialias_factor: [1.2, 1.8],
            min_pattern_pixels: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliefParams {
    pub azimuth_deg: f64,
    pub altitude_deg: f64,
    /// Maximum darkening/brightening applied by hillshading.
    pub hillshade_strength: [f64; 2],
    /// Number of contour levels spanning the elevation range.
    pub isoline_levels: [u32; 2],
    pub isoline_width: [f64; 2],
    pub hachure_spacing: [f64; 2],
    pub hachure_length: [f64; 2],
    /// Slope (rise over run) at which hachures reach full density.
    pub hachure_full_slope: f64,
}

impl Default for ReliefParams {
    fn default() -> Self {
        Self {
            azimuth_deg: 315.0,
            altitude_deg: 45.0,
            hillshade_strength: [0.3, 0.7],
            isoline_levels: [6, 20],
            isoline_width: [0.8, 1.6],
            hachure_spacing: [5.0, 9.0],
            hachure_length: [4.0, 9.0],
            hachure_full_slope: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnnotationParams {
    /// Integer glyph magnification.
    pub font_scale: [u32; 2],
    /// Label rotation in degrees, symmetric around zero.
    pub max_rotation_deg: f64,
    pub graticule_spacing: [f64; 2],
    pub graticule_width: [f64; 2],
}

impl Default for AnnotationParams {
    fn default() -> Self {
        Self {
            font_scale: [1, 3],
            max_rotation_deg: 35.0,
            graticule_spacing: [90.0, 220.0],
            graticule_width: [1.0, 2.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImageFormat {
    Jpeg,
    Png,
}

/// Everything `generate_sample` needs besides the geodata and colors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub width: u32,
    pub height: u32,
    /// Recorded in outputs only; does not alter the geometry.
    pub dpi: u32,
    pub style: StyleConfig,
    pub patterns: PatternParams,
    pub relief: ReliefParams,
    pub annotation: AnnotationParams,
    pub hide: HidePolicy,
    /// Radius of settlement markers drawn from point features, pixels.
    pub place_radius: [f64; 2],
    /// Maximum random shift of the view center, as a fraction of the view.
    pub center_jitter: f64,
    /// Used for feature files that record neither zoom nor scale.
    pub default_scale_denominator: f64,
    pub image_format: ImageFormat,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            width: 768,
            height: 768,
            dpi: 300,
            style: StyleConfig::default(),
            patterns: PatternParams::default(),
            relief: ReliefParams::default(),
            annotation: AnnotationParams::default(),
            hide: HidePolicy {
                probabilities: [("landcover_wood".to_string(), 0.25)].into_iter().collect(),
            },
            place_radius: [3.0, 8.0],
            center_jitter: 0.1,
            default_scale_denominator: 25_000.0,
            image_format: ImageFormat::Jpeg,
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.width == 0 || self.height == 0 {
            return Err(SynthError::Config("width and height must be positive".into()));
        }
        self.style.validate()?;
        self.hide.validate().map_err(|e| SynthError::Config(e.to_string()))?;
        let p = &self.patterns;
        check_range("patterns.hatch_spacing", p.hatch_spacing, 1.0)?;
        check_range("patterns.hatch_width", p.hatch_width, 0.1)?;
        check_range("patterns.dot_spacing", p.dot_spacing, 1.0)?;
        check_range("patterns.dot_radius", p.dot_radius, 0.1)?;
        check_range("patterns.waterline_spacing", p.waterline_spacing, 1.0)?;
        check_range("patterns.icon_spacing", p.icon_spacing, 4.0)?;
        check_range("patterns.texture_strength", p.texture_strength, 0.0)?;
        check_range("patterns.tint", p.tint, 0.0)?;
        check_range("patterns.antialias_factor", p.antialias_factor, 1.0)?;
        if p.hatch_angles.is_empty() || p.waterline_count[0] > p.waterline_count[1] {
            return Err(SynthError::Config("patterns: empty hatch angles or inverted waterline count".into()));
        }
        let r = &self.relief;
        check_range("relief.hillshade_strength", r.hillshade_strength, 0.0)?;
        check_range("relief.isoline_width", r.isoline_width, 0.1)?;
        check_range("relief.hachure_spacing", r.hachure_spacing, 1.0)?;
        check_range("relief.hachure_length", r.hachure_length, 0.5)?;
        if r.isoline_levels[0] == 0 || r.isoline_levels[0] > r.isoline_levels[1] {
            return Err(SynthError::Config("relief.isoline_levels".into()));
        }
        let a = &self.annotation;
        if a.font_scale[0] == 0 || a.font_scale[0] > a.font_scale[1] {
            return Err(SynthError::Config("annotation.font_scale".into()));
        }
        check_range("annotation.graticule_spacing", a.graticule_spacing, 2.0)?;
        check_range("annotation.graticule_width", a.graticule_width, 0.5)?;
        check_range("place_radius", self.place_radius, 0.5)?;
        if !(0.0..=1.0).contains(&self.center_jitter) {
            return Err(SynthError::Config("center_jitter must lie in [0, 1]".into()));
        }
        if !(self.default_scale_denominator.is_finite() && self.default_scale_denominator > 0.0) {
            return Err(SynthError::Config("default_scale_denominator must be positive".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex_digest(&json)
    }
}

pub fn hex_digest(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn defaults_validate() {
        GenerationConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_unnormalized_weights() {
        let mut s = StyleConfig::default();
        s.process_weights.get_mut(&SemanticClass::Water).unwrap().insert(Process::Dots, 0.5);
        assert!(matches!(s.validate(), Err(SynthError::Config(_))));
        let mut s = StyleConfig::default();
        s.grayscale_prob = 1.5;
        assert!(s.validate().is_err());
    }

    #[test]
    fn unknown_keys_rejected() {
        let err = serde_json::from_str::<StyleConfig>(r#"{"grayscale_probability": 0.2}"#);
        assert!(err.is_err());
        let ok: StyleConfig = serde_json::from_str(r#"{"grayscale_prob": 0.2}"#).unwrap();
        assert_eq!(ok.grayscale_prob, 0.2);
        assert_eq!(ok.jpeg_quality_range, [50, 92]);
    }

    #[test]
    fn categorical_frequencies() {
        let w: BTreeMap<u8, f64> = [(0, 0.25), (1, 0.0), (2, 0.75)].into_iter().collect();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let n = 20_000;
        let hits = (0..n).filter(|_| sample_categorical(&w, &mut rng) == 0).count();
        let p = hits as f64 / n as f64;
        assert!((p - 0.25).abs() < 3.0 * (0.25 * 0.75 / n as f64).sqrt() + 1e-3);
    }

    #[test]
    fn digest_tracks_content() {
        let a = GenerationConfig::default();
        let mut b = a.clone();
        assert_eq!(a.digest(), b.digest());
        b.style.grayscale_prob = 0.3;
        assert_ne!(a.digest(), b.digest());
    }
}
