//! Procedural synthesis of stylized map images with exact label masks.

pub mod annotate;
pub mod color;
pub mod config;
pub mod degrade;
pub mod draw;
pub mod font;
pub mod generate;
pub mod rasterize;
pub mod relief;
pub mod sprites;
pub mod stylize;
pub mod textures;

use thiserror::Error;

use crate::geodata::GeoError;
use crate::mask::{MaskError, SemanticClass};

pub use color::{fit_color_model, sample_color, ClassMixture, ColorModel, FitReport, GaussianComponent, MixtureDensity};
pub use config::{
    AnnotationParams, DarkSpotParams, GenerationConfig, ImageFormat, PatternParams, Process, ReliefMode,
    ReliefParams, StyleConfig,
};
pub use annotate::{annotate, default_lexicon, load_lexicon};
pub use degrade::{apply_degradations, Degraded, FrameCrop};
pub use generate::{Corpus, CorpusRegion, Generator, Provenance, SynthSample};
pub use relief::{render_relief, ReliefOverlay};
pub use stylize::{stylize, SubRegions, Stylized};
pub use rasterize::{rasterize_template, LineWidths, Template, PAINT_ORDER};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid color model: {0}")]
    ColorModel(String),
    #[error("class {class} has {have} color samples, need at least {need}")]
    InsufficientData { class: SemanticClass, have: usize, need: usize },
    #[error("color model has no entry for class {0}")]
    MissingClass(SemanticClass),
    #[error("lexicon is empty but label_density is positive")]
    EmptyLexicon,
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Mask(#[from] MaskError),
    #[error("image: {0}")]
    Image(#[from] image::ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
