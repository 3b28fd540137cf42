//! The segmentation-backend contract and its implementations.
//!
//! A backend turns one RGB tile into six class-major logit planes of the
//! same size. The tiling driver in [`crate::inference`] never looks inside.

mod external;
mod heuristic;
mod oracle;
pub mod wire;

use image::RgbImage;
use thiserror::Error;

use crate::logits::Logits;

pub use external::{ExternalBackend, ExternalConfig};
pub use heuristic::HeuristicBackend;
pub use oracle::{OracleBackend, ORACLE_LOGIT};
pub use wire::{Frame, WireError};

/// Where a tile sits. `x`, `y` are in the coordinates of the image at
/// `scale`, whose unpadded size is `image_width × image_height`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TileContext {
    pub x: u32,
    pub y: u32,
    pub scale: f64,
    pub image_width: u32,
    pub image_height: u32,
}

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("no stored ground truth covers tile ({x}, {y}) at scale {scale}")]
    Uncovered { x: u32, y: u32, scale: f64 },
    #[error("backend returned {got_classes}x{got_width}x{got_height} logits, expected {classes}x{width}x{height}")]
    Shape { classes: u32, width: u32, height: u32, got_classes: u32, got_width: u32, got_height: u32 },
    #[error("backend returned non-finite logits")]
    NonFinite,
    /// Message from an `SGE1` frame, passed through untouched.
    #[error("{0}")]
    Remote(String),
    #[error("protocol error: {0}")]
    Protocol(#[from] WireError),
    #[error("backend process died: {0}")]
    Dead(String),
    #[error("backend did not answer within {0} ms")]
    Timeout(u64),
    #[error("failed to start backend `{command}`: {source}")]
    Spawn { command: String, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub trait SegmentationBackend: Send + Sync {
    fn evaluate(&self, tile: &RgbImage, ctx: &TileContext) -> Result<Logits, BackendError>;

    /// Whether `evaluate` may be called from several threads at once.
    fn concurrent_safe(&self) -> bool;
}

impl<B: SegmentationBackend + ?Sized> SegmentationBackend for Box<B> {
    fn evaluate(&self, tile: &RgbImage, ctx: &TileContext) -> Result<Logits, BackendError> {
        (**self).evaluate(tile, ctx)
    }

    fn concurrent_safe(&self) -> bool {
        (**self).concurrent_safe()
    }
}

/// Rejects output that breaks the contract for a `width × height` tile.
pub fn check_output(logits: &Logits, width: u32, height: u32) -> Result<(), BackendError> {
    let classes = crate::NUM_CLASSES as u32;
    if (logits.classes(), logits.width(), logits.height()) != (classes, width, height) {
        return Err(BackendError::Shape {
            classes,
            width,
            height,
            got_classes: logits.classes(),
            got_width: logits.width(),
            got_height: logits.height(),
        });
    }
    if !logits.all_finite() {
        return Err(BackendError::NonFinite);
    }
    Ok(())
}

/// A backend returning the same per-class constants for every pixel.
#[derive(Debug, Clone)]
pub struct ConstantBackend {
    pub values: [f32; crate::NUM_CLASSES],
}

impl SegmentationBackend for ConstantBackend {
    fn evaluate(&self, tile: &RgbImage, _ctx: &TileContext) -> Result<Logits, BackendError> {
        Ok(Logits::constant(tile.width(), tile.height(), &self.values))
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}
