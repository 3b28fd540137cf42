//! Synthetic historical-map generation, tiled segmentation inference and
//! evaluation.

pub mod backend;
pub mod bias;
pub mod evaluation;
pub mod geodata;
pub mod inference;
pub mod logits;
pub mod mask;
pub mod resample;
pub mod rng;
pub mod synth;

/// Library version, recorded in run provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use logits::Logits;
pub use mask::{LabelMask, SemanticClass, NUM_CLASSES};
