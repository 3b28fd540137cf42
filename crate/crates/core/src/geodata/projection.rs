//! Map scale, zoom level and spherical Web-Mercator (EPSG:3857) arithmetic.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::GeoError;

/// Sphere radius used by EPSG:3857, meters.
pub const EARTH_RADIUS: f64 = 6_378_137.0;
/// Half the world width in EPSG:3857, meters (`π·R`).
pub const WORLD_HALF_EXTENT: f64 = 20_037_508.342_789_244;
/// Latitude limit of the Mercator validity band, degrees.
pub const MAX_LATITUDE: f64 = 85.0511;
/// Offset in `z = α − log2(d)` relating a 1:d scale to a zoom level.
pub const ZOOM_ALPHA: f64 = 28.1;
pub const MAX_ZOOM: u8 = 22;
/// Side of a standard slippy-map tile in pixels.
pub const TILE_SIZE: f64 = 256.0;

/// A representative fraction 1:`denominator`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct MapScale(f64);

impl MapScale {
    pub fn new(denominator: f64) -> Result<Self, GeoError> {
        if denominator.is_finite() && denominator > 0.0 {
            Ok(Self(denominator))
        } else {
            Err(GeoError::InvalidScale(denominator))
        }
    }

    pub fn denominator(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for MapScale {
    type Error = GeoError;
    fn try_from(v: f64) -> Result<Self, GeoError> {
        Self::new(v)
    }
}

impl From<MapScale> for f64 {
    fn from(s: MapScale) -> f64 {
        s.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct ZoomLevel(u8);

impl ZoomLevel {
    pub fn new(z: u8) -> Result<Self, GeoError> {
        if z <= MAX_ZOOM {
            Ok(Self(z))
        } else {
            Err(GeoError::InvalidZoom(z))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    /// Ground resolution at the equator, meters per pixel.
    pub fn resolution(self) -> f64 {
        (2.0 * PI * EARTH_RADIUS / TILE_SIZE) / 2f64.powi(self.0 as i32)
    }
}

impl TryFrom<u8> for ZoomLevel {
    type Error = GeoError;
    fn try_from(v: u8) -> Result<Self, GeoError> {
        Self::new(v)
    }
}

impl From<ZoomLevel> for u8 {
    fn from(z: ZoomLevel) -> u8 {
        z.0
    }
}

/// Unrounded zoom for a scale under a given offset.
pub fn fractional_zoom(scale: MapScale, alpha: f64) -> f64 {
    alpha - scale.denominator().log2()
}

/// `round_half_up(28.1 − log2(d))`, clamped to the valid zoom range.
pub fn scale_to_zoom(scale: MapScale) -> ZoomLevel {
    scale_to_zoom_with_alpha(scale, ZOOM_ALPHA)
}

pub fn scale_to_zoom_with_alpha(scale: MapScale, alpha: f64) -> ZoomLevel {
    let z = (fractional_zoom(scale, alpha) + 0.5).floor();
    ZoomLevel(z.clamp(0.0, MAX_ZOOM as f64) as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lon: f64,
    pub lat: f64,
}

impl GeoPoint {
    pub fn new(lon: f64, lat: f64) -> Result<Self, GeoError> {
        let p = Self { lon, lat };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !self.lat.is_finite() || self.lat.abs() > MAX_LATITUDE {
            return Err(GeoError::OutOfBand { lat: self.lat });
        }
        if !self.lon.is_finite() || self.lon.abs() > 180.0 {
            return Err(GeoError::InvalidLongitude(self.lon));
        }
        Ok(())
    }
}

pub fn lonlat_to_mercator(p: GeoPoint) -> Result<(f64, f64), GeoError> {
    p.validate()?;
    let x = EARTH_RADIUS * p.lon.to_radians();
    let y = EARTH_RADIUS * (PI / 4.0 + p.lat.to_radians() / 2.0).tan().ln();
    Ok((x, y))
}

pub fn mercator_to_lonlat(x: f64, y: f64) -> GeoPoint {
    let lon = (x / EARTH_RADIUS).to_degrees();
    let lat = (2.0 * (y / EARTH_RADIUS).exp().atan() - PI / 2.0).to_degrees();
    GeoPoint { lon, lat }
}

/// Axis-aligned rectangle in EPSG:3857 meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BBox {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl BBox {
    pub fn new(min_x: f64, min_y: f64, max_x: f64, max_y: f64) -> Result<Self, GeoError> {
        let b = Self { min_x, min_y, max_x, max_y };
        let lim = WORLD_HALF_EXTENT * (1.0 + 1e-12);
        let finite = [min_x, min_y, max_x, max_y].iter().all(|v| v.is_finite());
        if !finite || min_x >= max_x || min_y >= max_y {
            return Err(GeoError::InvalidBBox(b));
        }
        if min_x < -lim || min_y < -lim || max_x > lim || max_y > lim {
            return Err(GeoError::InvalidBBox(b));
        }
        Ok(b)
    }

    pub fn world() -> Self {
        Self {
            min_x: -WORLD_HALF_EXTENT,
            min_y: -WORLD_HALF_EXTENT,
            max_x: WORLD_HALF_EXTENT,
            max_y: WORLD_HALF_EXTENT,
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.min_x + self.max_x) / 2.0, (self.min_y + self.max_y) / 2.0)
    }

    pub fn intersects(&self, other: &BBox) -> bool {
        self.min_x <= other.max_x
            && other.min_x <= self.max_x
            && self.min_y <= other.max_y
            && other.min_y <= self.max_y
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.min_x && x <= self.max_x && y >= self.min_y && y <= self.max_y
    }

    /// Bounding box of a point cloud; `None` when empty or non-finite.
    pub fn enclosing(points: impl IntoIterator<Item = (f64, f64)>) -> Option<BBox> {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for (x, y) in points {
            if !x.is_finite() || !y.is_finite() {
                return None;
            }
            b[0] = b[0].min(x);
            b[1] = b[1].min(y);
            b[2] = b[2].max(x);
            b[3] = b[3].max(y);
        }
        b[0].is_finite().then_some(BBox { min_x: b[0], min_y: b[1], max_x: b[2], max_y: b[3] })
    }

    fn clamp_to_world(self) -> BBox {
        let w = WORLD_HALF_EXTENT;
        BBox {
            min_x: self.min_x.max(-w),
            min_y: self.min_y.max(-w),
            max_x: self.max_x.min(w),
            max_y: self.max_y.min(w),
        }
    }
}

impl TryFrom<[f64; 4]> for BBox {
    type Error = GeoError;
    fn try_from(v: [f64; 4]) -> Result<Self, GeoError> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BBox> for [f64; 4] {
    fn from(b: BBox) -> [f64; 4] {
        [b.min_x, b.min_y, b.max_x, b.max_y]
    }
}

/// Extent of a `width_px × height_px` view at `zoom` centered on `center`.
pub fn bbox_for(
    center: GeoPoint,
    zoom: ZoomLevel,
    width_px: u32,
    height_px: u32,
) -> Result<BBox, GeoError> {
    let (cx, cy) = lonlat_to_mercator(center)?;
    bbox_for_mercator(cx, cy, zoom, width_px, height_px)
}

pub fn bbox_for_mercator(
    cx: f64,
    cy: f64,
    zoom: ZoomLevel,
    width_px: u32,
    height_px: u32,
) -> Result<BBox, GeoError> {
    if width_px == 0 || height_px == 0 {
        return Err(GeoError::EmptyView { width_px, height_px });
    }
    let r = zoom.resolution();
    let hw = width_px as f64 * r / 2.0;
    let hh = height_px as f64 * r / 2.0;
    let raw = BBox { min_x: cx - hw, min_y: cy - hh, max_x: cx + hw, max_y: cy + hh };
    let b = raw.clamp_to_world();
    BBox::new(b.min_x, b.min_y, b.max_x, b.max_y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scale(d: f64) -> MapScale {
        MapScale::new(d).unwrap()
    }

    #[test]
    fn zoom_examples() {
        assert_eq!(scale_to_zoom(scale(20_000.0)).get(), 14);
        assert_eq!(scale_to_zoom(scale(1_000_000.0)).get(), 8);
        assert_eq!(scale_to_zoom(scale(2f64.powf(28.1))).get(), 0);
    }

    #[test]
    fn zoom_clamps_extremes() {
        assert_eq!(scale_to_zoom(scale(1e12)).get(), 0);
        assert_eq!(scale_to_zoom(scale(1.0)).get(), 22);
    }

    #[test]
    fn invalid_scales() {
        for d in [0.0, -5.0, f64::NAN, f64::INFINITY] {
            assert!(matches!(MapScale::new(d), Err(GeoError::InvalidScale(_))));
        }
    }

    #[test]
    fn projection_examples() {
        let (x, y) = lonlat_to_mercator(GeoPoint::new(0.0, 0.0).unwrap()).unwrap();
        assert_eq!(x, 0.0);
        assert!(y.abs() < 1e-6);
        let (x, _) = lonlat_to_mercator(GeoPoint::new(180.0, 0.0).unwrap()).unwrap();
        assert!((x - 20_037_508.3428).abs() < 1e-3);
        let (_, y) = lonlat_to_mercator(GeoPoint::new(0.0, 85.0511).unwrap()).unwrap();
        // The band edge is rounded; the exact π·R latitude is 85.05112878°.
        assert!((y - WORLD_HALF_EXTENT).abs() < 50.0, "{y}");
    }

    #[test]
    fn out_of_band_latitude() {
        assert!(matches!(
            GeoPoint::new(0.0, 85.06),
            Err(GeoError::OutOfBand { .. })
        ));
    }

    #[test]
    fn bbox_examples() {
        let origin = GeoPoint::new(0.0, 0.0).unwrap();
        let world = bbox_for(origin, ZoomLevel::new(0).unwrap(), 256, 256).unwrap();
        assert!((world.width() - 2.0 * WORLD_HALF_EXTENT).abs() < 1e-6);
        assert!((world.height() - 2.0 * WORLD_HALF_EXTENT).abs() < 1e-6);

        let z14 = ZoomLevel::new(14).unwrap();
        let b = bbox_for(origin, z14, 768, 768).unwrap();
        let expected_half = 384.0 * 156_543.033_928_041 / 2f64.powi(14);
        assert!((b.width() / 2.0 - expected_half).abs() < 1e-6);
        assert!((expected_half - 3668.977).abs() < 1e-3);

        let wide = bbox_for(origin, z14, 768, 384).unwrap();
        assert_eq!(wide.height() * 2.0, wide.width());
    }

    #[test]
    fn bbox_clamps_to_world() {
        let edge = GeoPoint::new(179.9, 0.0).unwrap();
        let b = bbox_for(edge, ZoomLevel::new(2).unwrap(), 768, 768).unwrap();
        assert_eq!(b.max_x, WORLD_HALF_EXTENT);
    }
}
