//! Sliding-window inference over large images at one or more scales.

mod multiscale;
mod tiling;

use thiserror::Error;

use crate::backend::BackendError;

pub use multiscale::{multiscale_infer, scaled_dims, InferOptions, Prediction, Upsample};
pub use tiling::{extract_tile, plan_tiles, run_tiled, LogitMap, TileGrid, DEFAULT_OVERLAP, DEFAULT_PATCH};

#[derive(Debug, Error)]
pub enum InferError {
    #[error("image has no pixels")]
    EmptyImage,
    #[error("patch {patch} must exceed overlap {overlap}")]
    InvalidTiling { patch: u32, overlap: u32 },
    #[error("at least one scale is required")]
    EmptyScales,
    #[error("scale {0} is outside (0, 4]")]
    InvalidScale(f64),
    #[error("tile at ({x}, {y}), scale {scale}: {error}")]
    Tile { x: u32, y: u32, scale: f64, error: BackendError },
}
