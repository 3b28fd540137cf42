//! End-to-end sample generation: placement, filtering, template, styling,
//! relief, lettering and degradation.

use std::path::{Path, PathBuf};

use image::RgbImage;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geodata::{
    bbox_for_mercator, filter_features, BBox, ElevationGrid, FeatureFile, FeatureFileHeader, FeatureRole,
    Geometry, VectorFeatureSet, ZoomLevel,
};
use crate::mask::{LabelMask, SemanticClass};
use crate::rng::{self, Stage};

use super::annotate::annotate;
use super::color::ColorModel;
use super::config::{hex_digest, sample_categorical, uniform, GenerationConfig, ImageFormat, ReliefMode};
use super::degrade::{apply_degradations, FrameCrop};
use super::draw::Pt;
use super::rasterize::{rasterize_template, LineWidths, PixelTransform};
use super::relief::{composite, render_relief};
use super::stylize::{stylize, RegionStyle, SubRegions};
use super::SynthError;

/// One queried area: its features and, optionally, terrain.
#[derive(Debug, Clone)]
pub struct CorpusRegion {
    pub name: String,
    pub features: VectorFeatureSet,
    pub elevation: Option<ElevationGrid>,
}

#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub regions: Vec<CorpusRegion>,
}

impl Corpus {
    /// Reads every `*.ndjson` feature file in `dir` (sorted by name). A
    /// `<stem>.elev.png` plus `<stem>.elev.json` pair next to it supplies
    /// elevation.
    pub fn load(dir: impl AsRef<Path>, default_zoom: ZoomLevel) -> Result<Self, SynthError> {
        let mut paths: Vec<PathBuf> = std::fs::read_dir(dir.as_ref())?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "ndjson"))
            .collect();
        paths.sort();
        let mut regions = Vec::new();
        for path in paths {
            let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default().to_string();
            let features = FeatureFile::read(&path)?.into_set(default_zoom)?;
            let png = path.with_file_name(format!("{stem}.elev.png"));
            let meta = path.with_file_name(format!("{stem}.elev.json"));
            let elevation = if png.exists() && meta.exists() {
                let g = ElevationGrid::load(&png, &meta)?;
                Some(if g.bbox().is_none() { g.with_bbox(features.source_bbox) } else { g })
            } else {
                None
            };
            regions.push(CorpusRegion { name: stem, features, elevation });
        }
        if regions.is_empty() {
            return Err(SynthError::Config(format!("no .ndjson feature files in {}", dir.as_ref().display())));
        }
        Ok(Self { regions })
    }

    /// The bundled procedural world, named from the default lexicon.
    pub fn fixture(seed: u64, regions: usize) -> Result<Self, SynthError> {
        let names = super::annotate::default_lexicon();
        let regions = crate::geodata::fixture::fixture_regions(seed, regions, &names)?
            .into_iter()
            .map(|r| CorpusRegion { name: r.name, features: r.features, elevation: Some(r.elevation) })
            .collect();
        Ok(Self { regions })
    }

    /// Writes the layout read by [`Corpus::load`].
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        for r in &self.regions {
            let file = FeatureFile {
                header: Some(FeatureFileHeader {
                    bbox: r.features.source_bbox,
                    zoom: Some(r.features.zoom),
                    scale_denominator: None,
                }),
                features: r.features.features.clone(),
            };
            std::fs::write(dir.join(format!("{}.ndjson", r.name)), file.to_ndjson())?;
            if let Some(g) = &r.elevation {
                let g = if g.bbox().is_none() { g.clone().with_bbox(r.features.source_bbox) } else { g.clone() };
                let (png, meta) = (dir.join(format!("{}.elev.png", r.name)), dir.join(format!("{}.elev.json", r.name)));
                g.save(png, meta, 0.1, -1000.0)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub seed: u64,
    pub region: String,
    pub bbox: BBox,
    pub zoom: u8,
    pub width: u32,
    pub height: u32,
    pub dpi: u32,
    pub style_digest: String,
    pub line_widths: LineWidths,
    pub hidden_layers: Vec<String>,
    pub degenerate_geometries: usize,
    pub regions: Vec<RegionStyle>,
    pub relief: ReliefMode,
    pub labels: usize,
    pub graticule_spacing: Option<f64>,
    pub spots: usize,
    pub grayscale: bool,
    pub frame_crop: Option<FrameCrop>,
    pub jpeg_quality: Option<u8>,
    pub image_sha256: String,
    pub mask_sha256: String,
}

#[derive(Debug, Clone)]
pub struct SynthSample {
    pub image: RgbImage,
    pub mask: LabelMask,
    /// Encoded JPEG matching `image`, when the pipeline produced one.
    pub jpeg: Option<Vec<u8>>,
    pub format: ImageFormat,
    pub provenance: Provenance,
}

impl SynthSample {
    pub fn image_extension(&self) -> &'static str {
        match self.format {
            ImageFormat::Jpeg => "jpg",
            ImageFormat::Png => "png",
        }
    }

    /// Writes `<stem>.jpg|png`, `<stem>_mask.png` and `<stem>.json`.
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str) -> Result<(), SynthError> {
        let dir = dir.as_ref();
        let image_path = dir.join(format!("{stem}.{}", self.image_extension()));
        match (&self.jpeg, self.format) {
            (Some(bytes), ImageFormat::Jpeg) => std::fs::write(&image_path, bytes)?,
            _ => self.image.save_with_format(&image_path, image::ImageFormat::Png)?,
        }
        self.mask.save_png(dir.join(format!("{stem}_mask.png")))?;
        let json = serde_json::to_string_pretty(&self.provenance).expect("provenance serializes");
        std::fs::write(dir.join(format!("{stem}.json")), json)?;
        Ok(())
    }
}

fn sample_line_widths(config: &GenerationConfig, seed: u64) -> LineWidths {
    let mut rng = rng::stream(seed, Stage::LineWidths);
    let ranges = &config.style.line_width_ranges;
    let d = LineWidths::default();
    let mut pick = |c: SemanticClass, fallback: f64| ranges.get(&c).map(|&r| uniform(&mut rng, r)).unwrap_or(fallback);
    let boundary = pick(SemanticClass::Boundary, d.boundary);
    let water = pick(SemanticClass::Water, d.water);
    let road = pick(SemanticClass::RoadNetwork, d.road);
    let place_radius = uniform(&mut rng, config.place_radius);
    LineWidths { boundary, water, road, railway: (road * 0.75).max(1.0), place_radius }
}

/// The representative point of a geometry for lettering.
fn anchor_point(g: &Geometry) -> Option<[f64; 2]> {
    match g {
        Geometry::Point(c) => Some(*c),
        Geometry::LineString(cs) => cs.get(cs.len() / 2).copied(),
        Geometry::Polygon(rings) => {
            let r = rings.first()?;
            let n = r.len() as f64;
            Some([r.iter().map(|c| c[0]).sum::<f64>() / n, r.iter().map(|c| c[1]).sum::<f64>() / n])
        }
    }
}

pub struct Generator {
    pub corpus: Corpus,
    pub config: GenerationConfig,
    pub colors: ColorModel,
    pub lexicon: Vec<String>,
    digest: String,
}

impl Generator {
    pub fn new(
        corpus: Corpus,
        config: GenerationConfig,
        colors: ColorModel,
        lexicon: Vec<String>,
    ) -> Result<Self, SynthError> {
        config.validate()?;
        colors.validate()?;
        colors.require_all()?;
        if corpus.regions.is_empty() {
            return Err(SynthError::Config("corpus has no regions".into()));
        }
        if lexicon.is_empty() && config.style.label_density > 0.0 {
            return Err(SynthError::EmptyLexicon);
        }
        let digest = config.digest();
        Ok(Self { corpus, config, colors, lexicon, digest })
    }

    /// The view a sample with this seed will show: region index and extent.
    pub fn placement(&self, seed: u64) -> Result<(usize, BBox, ZoomLevel), SynthError> {
        let mut rng = rng::stream(seed, Stage::Placement);
        let idx = rng.random_range(0..self.corpus.regions.len());
        let region = &self.corpus.regions[idx];
        let zoom = region.features.zoom;
        let (w, h) = (self.config.width, self.config.height);
        let res = zoom.resolution();
        let (vw, vh) = (w as f64 * res, h as f64 * res);
        let src = region.features.source_bbox;
        let jitter = self.config.center_jitter;
        let pick = |rng: &mut rng::StageRng, lo: f64, hi: f64, view: f64| {
            if hi - lo > view {
                lo + view / 2.0 + rng.random::<f64>() * (hi - lo - view)
            } else {
                (lo + hi) / 2.0 + rng.random_range(-1.0..=1.0) * jitter * view
            }
        };
        let cx = pick(&mut rng, src.min_x, src.max_x, vw);
        let cy = pick(&mut rng, src.min_y, src.max_y, vh);
        Ok((idx, bbox_for_mercator(cx, cy, zoom, w, h)?, zoom))
    }

    /// The label template for a seed before frame cropping, and the
    /// filtered features it was painted from.
    pub fn template(&self, seed: u64) -> Result<(LabelMask, VectorFeatureSet, usize), SynthError> {
        let (idx, bbox, zoom) = self.placement(seed)?;
        let region = &self.corpus.regions[idx];
        let view = region.features.query(bbox, zoom);
        let features = filter_features(&view, zoom, Some((&self.config.hide, seed)))?;
        let widths = sample_line_widths(&self.config, seed);
        let t = rasterize_template(&features, &bbox, self.config.width, self.config.height, &widths);
        Ok((t.mask, features, t.degenerate))
    }

    pub fn generate(&self, seed: u64) -> Result<SynthSample, SynthError> {
        let cfg = &self.config;
        let (w, h) = (cfg.width, cfg.height);
        let (idx, bbox, zoom) = self.placement(seed)?;
        let region = &self.corpus.regions[idx];
        let (mut mask, features, degenerate) = self.template(seed)?;
        let widths = sample_line_widths(cfg, seed);

        let sub = SubRegions::compute(&features, &bbox, &mask, &widths);
        let styled = stylize(&mask, &sub, &cfg.style, &cfg.patterns, &self.colors, seed)?;
        let mut image = styled.image;

        let mut relief_rng = rng::stream(seed, Stage::Relief);
        let mut relief = sample_categorical(&cfg.style.relief_mode_weights, &mut relief_rng);
        match (&region.elevation, relief) {
            (Some(grid), mode) if mode != ReliefMode::None => {
                let local = grid.resample(&bbox, w as usize, h as usize)?;
                let overlay = render_relief(&local, mode, &cfg.relief, &mut relief_rng)?;
                let ink = [0, 1, 2].map(|i| (styled.paper[i] as f64 * 0.45) as u8);
                composite(&mut image, &overlay, ink);
            }
            _ => relief = ReliefMode::None,
        }

        let tf = PixelTransform::new(&bbox, w, h);
        let mut name_rng = rng::stream(rng::mix(seed, 1), Stage::Annotate);
        let anchors: Vec<(Pt, String)> = features
            .features
            .iter()
            .filter(|f| f.role == FeatureRole::Text)
            .filter_map(|f| {
                let p = tf.apply(anchor_point(&f.geometry)?);
                let inside = p[0] >= 0.0 && p[1] >= 0.0 && p[0] < w as f64 && p[1] < h as f64;
                let name = match f.label_text() {
                    Some(n) => n.to_string(),
                    None if !self.lexicon.is_empty() => {
                        self.lexicon[name_rng.random_range(0..self.lexicon.len())].clone()
                    }
                    None => return None,
                };
                inside.then_some((p, name))
            })
            .collect();
        let notes = annotate(&mut image, &self.lexicon, &anchors, &cfg.style, &cfg.annotation, seed)?;

        let degraded = apply_degradations(&image, &cfg.style, styled.paper, seed)?;
        if let Some(crop) = &degraded.frame_crop {
            crop.apply_to_mask(&mut mask);
        }
        let provenance = Provenance {
            seed,
            region: region.name.clone(),
            bbox,
            zoom: zoom.get(),
            width: w,
            height: h,
            dpi: cfg.dpi,
            style_digest: self.digest.clone(),
            line_widths: widths,
            hidden_layers: cfg.hide.hidden_names(seed),
            degenerate_geometries: degenerate,
            regions: styled.regions,
            relief,
            labels: notes.labels.len(),
            graticule_spacing: notes.graticule.map(|g| g.spacing),
            spots: degraded.spots,
            grayscale: degraded.grayscale,
            frame_crop: degraded.frame_crop,
            jpeg_quality: degraded.jpeg_quality,
            image_sha256: hex_digest(degraded.image.as_raw()),
            mask_sha256: hex_digest(mask.as_raw()),
        };
        Ok(SynthSample { image: degraded.image, mask, jpeg: degraded.jpeg, format: cfg.image_format, provenance })
    }
}
