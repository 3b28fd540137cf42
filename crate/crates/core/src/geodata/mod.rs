//! Scale and zoom arithmetic, Web-Mercator projection, feature files and
//! zoom-gated feature filtering.

pub mod catalog;
pub mod elevation;
pub mod features;
pub mod filter;
pub mod fixture;
pub mod projection;

use thiserror::Error;

pub use catalog::{catalog, lookup, CatalogEntry, FeatureRole, Variant};
pub use elevation::{ElevationGrid, ElevationSidecar};
pub use features::{
    filter_features, Coord, FeatureFile, FeatureFileHeader, Geometry, HidePolicy, VectorFeature,
    VectorFeatureSet,
};
pub use filter::{FilterError, Predicate};
pub use projection::{
    bbox_for, bbox_for_mercator, lonlat_to_mercator, mercator_to_lonlat, scale_to_zoom,
    scale_to_zoom_with_alpha, BBox, GeoPoint, MapScale, ZoomLevel, ZOOM_ALPHA,
};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("invalid map scale denominator {0}")]
    InvalidScale(f64),
    #[error("zoom level {0} outside 0..=22")]
    InvalidZoom(u8),
    #[error("latitude {lat} outside the Web-Mercator band")]
    OutOfBand { lat: f64 },
    #[error("longitude {0} outside [-180, 180]")]
    InvalidLongitude(f64),
    #[error("invalid bounding box {0:?}")]
    InvalidBBox(BBox),
    #[error("view dimensions must be positive, got {width_px}x{height_px}")]
    EmptyView { width_px: u32, height_px: u32 },
    #[error("unknown feature {0:?}")]
    UnknownFeature(String),
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("hide probability for {name} must lie in [0, 1], got {value}")]
    InvalidProbability { name: String, value: f64 },
    #[error("feature file has no features and no header")]
    EmptyFeatureFile,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid elevation grid: {0}")]
    InvalidElevation(String),
    #[error("elevation grid has no valid cells")]
    AllNoData,
    #[error("filter: {0}")]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
