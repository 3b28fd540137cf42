//! Elevation grids: a 16-bit single-channel PNG plus a JSON sidecar.

use std::path::Path;

use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};

use super::projection::BBox;
use super::GeoError;

/// Sidecar describing how raw PNG samples map to meters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElevationSidecar {
    pub bbox: BBox,
    /// Raw sample value marking missing data.
    #[serde(default)]
    pub nodata: Option<u16>,
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub offset: f64,
}

fn one() -> f64 {
    1.0
}

impl ElevationSidecar {
    pub fn parse(json: &str) -> Result<Self, GeoError> {
        let s: Self = serde_json::from_str(json)
            .map_err(|e| GeoError::Parse { line: e.line(), message: e.to_string() })?;
        if !s.scale.is_finite() || s.scale == 0.0 || !s.offset.is_finite() {
            return Err(GeoError::Parse { line: 0, message: "scale must be finite and non-zero".into() });
        }
        Ok(s)
    }
}

/// Row-major elevation samples in meters; row 0 is the northern edge.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    width: usize,
    height: usize,
    values: Vec<f64>,
    cell_size: f64,
    nodata: Option<f64>,
    bbox: Option<BBox>,
}

impl ElevationGrid {
    pub fn new(
        width: usize,
        height: usize,
        values: Vec<f64>,
        cell_size: f64,
        nodata: Option<f64>,
    ) -> Result<Self, GeoError> {
        if width == 0 || height == 0 || values.len() != width * height {
            return Err(GeoError::InvalidElevation(format!(
                "{} values for a {width}x{height} grid",
                values.len()
            )));
        }
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(GeoError::InvalidElevation(format!("cell size {cell_size}")));
        }
        let g = Self { width, height, values, cell_size, nodata, bbox: None };
        if (0..g.values.len()).any(|i| !g.is_nodata_index(i) && !g.values[i].is_finite()) {
            return Err(GeoError::InvalidElevation("non-finite elevation".into()));
        }
        Ok(g)
    }

    pub fn with_bbox(mut self, bbox: BBox) -> Self {
        self.bbox = Some(bbox);
        self
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        cell_size: f64,
        f: impl Fn(usize, usize) -> f64,
    ) -> Result<Self, GeoError> {
        let mut values = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                values.push(f(x, y));
            }
        }
        Self::new(width, height, values, cell_size, None)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn bbox(&self) -> Option<BBox> {
        self.bbox
    }

    pub fn nodata(&self) -> Option<f64> {
        self.nodata
    }

    fn is_nodata_index(&self, i: usize) -> bool {
        match self.nodata {
            Some(nd) => self.values[i] == nd || (nd.is_nan() && self.values[i].is_nan()),
            None => false,
        }
    }

    /// Elevation at a cell, `None` for nodata.
    pub fn get(&self, x: usize, y: usize) -> Option<f64> {
        let i = y * self.width + x;
        (!self.is_nodata_index(i)).then(|| self.values[i])
    }

    pub fn valid_count(&self) -> usize {
        (0..self.values.len()).filter(|&i| !self.is_nodata_index(i)).count()
    }

    /// Bilinear resample onto a `width × height` pixel grid covering `target`.
    /// Requires the grid to carry its own extent.
    pub fn resample(&self, target: &BBox, width: usize, height: usize) -> Result<ElevationGrid, GeoError> {
        let src = self
            .bbox
            .ok_or_else(|| GeoError::InvalidElevation("grid has no georeference".into()))?;
        let fill = self.mean_valid().ok_or(GeoError::AllNoData)?;
        let sx = src.width() / self.width as f64;
        let sy = src.height() / self.height as f64;
        let px = target.width() / width as f64;
        let py = target.height() / height as f64;
        let sample = |gx: isize, gy: isize| -> f64 {
            let gx = gx.clamp(0, self.width as isize - 1) as usize;
            let gy = gy.clamp(0, self.height as isize - 1) as usize;
            self.get(gx, gy).unwrap_or(fill)
        };
        let mut values = Vec::with_capacity(width * height);
        for row in 0..height {
            let my = target.max_y - (row as f64 + 0.5) * py;
            let fy = (src.max_y - my) / sy - 0.5;
            let y0 = fy.floor();
            let ty = fy - y0;
            for col in 0..width {
                let mx = target.min_x + (col as f64 + 0.5) * px;
                let fx = (mx - src.min_x) / sx - 0.5;
                let x0 = fx.floor();
                let tx = fx - x0;
                let (x0, y0i) = (x0 as isize, y0 as isize);
                let top = lerp(sample(x0, y0i), sample(x0 + 1, y0i), tx);
                let bottom = lerp(sample(x0, y0i + 1), sample(x0 + 1, y0i + 1), tx);
                values.push(lerp(top, bottom, ty));
            }
        }
        Ok(ElevationGrid::new(width, height, values, px, None)?.with_bbox(*target))
    }

    fn mean_valid(&self) -> Option<f64> {
        let mut sum = 0.0;
        let mut n = 0usize;
        for i in 0..self.values.len() {
            if !self.is_nodata_index(i) {
                sum += self.values[i];
                n += 1;
            }
        }
        (n > 0).then(|| sum / n as f64)
    }

    pub fn load(png: impl AsRef<Path>, sidecar: impl AsRef<Path>) -> Result<Self, GeoError> {
        let meta = ElevationSidecar::parse(&std::fs::read_to_string(sidecar)?)?;
        let img = image::open(png.as_ref())
            .map_err(|e| GeoError::InvalidElevation(e.to_string()))?
            .into_luma16();
        Self::from_raw(img.width() as usize, img.height() as usize, img.as_raw(), &meta)
    }

    pub fn from_raw(width: usize, height: usize, raw: &[u16], meta: &ElevationSidecar) -> Result<Self, GeoError> {
        let nodata = meta.nodata.map(|n| n as f64 * meta.scale + meta.offset);
        let values = raw.iter().map(|&v| v as f64 * meta.scale + meta.offset).collect();
        let cell = meta.bbox.width() / width.max(1) as f64;
        Ok(Self::new(width, height, values, cell, nodata)?.with_bbox(meta.bbox))
    }

    /// Writes the PNG and its sidecar; values are quantized to the sidecar's scale.
    pub fn save(&self, png: impl AsRef<Path>, sidecar: impl AsRef<Path>, scale: f64, offset: f64) -> Result<(), GeoError> {
        let bbox = self
            .bbox
            .ok_or_else(|| GeoError::InvalidElevation("grid has no georeference".into()))?;
        let nodata_raw = u16::MAX;
        let raw: Vec<u16> = (0..self.values.len())
            .map(|i| {
                if self.is_nodata_index(i) {
                    nodata_raw
                } else {
                    ((self.values[i] - offset) / scale).round().clamp(0.0, (u16::MAX - 1) as f64) as u16
                }
            })
            .collect();
        let img: ImageBuffer<Luma<u16>, Vec<u16>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, raw)
                .expect("buffer matches dimensions");
        img.save_with_format(png, image::ImageFormat::Png)
            .map_err(|e| GeoError::InvalidElevation(e.to_string()))?;
        let meta = ElevationSidecar {
            bbox,
            nodata: self.nodata.map(|_| nodata_raw),
            scale,
            offset,
        };
        std::fs::write(sidecar, serde_json::to_string_pretty(&meta).expect("sidecar serializes"))?;
        Ok(())
    }
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}
