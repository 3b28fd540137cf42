//! The six-class pixel taxonomy and dense label rasters.

use std::fmt;
use std::path::Path;

use image::{GrayImage, Luma};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const NUM_CLASSES: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
#[repr(u8)]
pub enum SemanticClass {
    Background = 0,
    Boundary = 1,
    Built = 2,
    NonBuilt = 3,
    Water = 4,
    RoadNetwork = 5,
}

impl SemanticClass {
    pub const ALL: [SemanticClass; NUM_CLASSES] = [
        SemanticClass::Background,
        SemanticClass::Boundary,
        SemanticClass::Built,
        SemanticClass::NonBuilt,
        SemanticClass::Water,
        SemanticClass::RoadNetwork,
    ];

    /// Land-content classes over which headline means are taken.
    pub const GEOGRAPHIC: [SemanticClass; 4] = [
        SemanticClass::Built,
        SemanticClass::NonBuilt,
        SemanticClass::Water,
        SemanticClass::RoadNetwork,
    ];

    pub fn from_id(id: u8) -> Option<Self> {
        Self::ALL.get(id as usize).copied()
    }

    pub fn id(self) -> u8 {
        self as u8
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            SemanticClass::Background => "background",
            SemanticClass::Boundary => "boundary",
            SemanticClass::Built => "built",
            SemanticClass::NonBuilt => "non_built",
            SemanticClass::Water => "water",
            SemanticClass::RoadNetwork => "road_network",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|c| c.name() == name)
    }

    pub fn is_geographic(self) -> bool {
        self.id() >= 2
    }
}

impl fmt::Display for SemanticClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Error)]
pub enum MaskError {
    #[error("mask dimensions must be positive, got {width}x{height}")]
    EmptyDimensions { width: u32, height: u32 },
    #[error("mask data length {got} does not match {width}x{height}")]
    LengthMismatch { width: u32, height: u32, got: usize },
    #[error("invalid class id {value} at pixel ({x}, {y})")]
    InvalidClass { value: u8, x: u32, y: u32 },
    #[error("image error: {0}")]
    Image(#[from] image::ImageError),
}

/// Row-major raster of class ids in `0..6`.
#[derive(Clone, PartialEq, Eq)]
pub struct LabelMask {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl fmt::Debug for LabelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LabelMask")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

impl LabelMask {
    pub fn filled(width: u32, height: u32, class: SemanticClass) -> Self {
        assert!(width > 0 && height > 0, "mask dimensions must be positive");
        Self {
            width,
            height,
            data: vec![class.id(); width as usize * height as usize],
        }
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, MaskError> {
        if width == 0 || height == 0 {
            return Err(MaskError::EmptyDimensions { width, height });
        }
        if data.len() != width as usize * height as usize {
            return Err(MaskError::LengthMismatch { width, height, got: data.len() });
        }
        if let Some(i) = data.iter().position(|&v| v as usize >= NUM_CLASSES) {
            return Err(MaskError::InvalidClass {
                value: data[i],
                x: (i % width as usize) as u32,
                y: (i / width as usize) as u32,
            });
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> SemanticClass {
        let v = self.data[y as usize * self.width as usize + x as usize];
        SemanticClass::ALL[v as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, class: SemanticClass) {
        self.data[y as usize * self.width as usize + x as usize] = class.id();
    }

    /// Copies out a window; pixels outside the mask are filled by reflection.
    pub fn crop_reflect(&self, x0: i64, y0: i64, width: u32, height: u32) -> LabelMask {
        let mut data = Vec::with_capacity(width as usize * height as usize);
        for y in 0..height as i64 {
            let sy = reflect_index(y0 + y, self.height as usize);
            for x in 0..width as i64 {
                let sx = reflect_index(x0 + x, self.width as usize);
                data.push(self.data[sy * self.width as usize + sx]);
            }
        }
        LabelMask { width, height, data }
    }

    pub fn class_counts(&self) -> [u64; NUM_CLASSES] {
        let mut counts = [0u64; NUM_CLASSES];
        for &v in &self.data {
            counts[v as usize] += 1;
        }
        counts
    }

    pub fn to_gray_image(&self) -> GrayImage {
        GrayImage::from_raw(self.width, self.height, self.data.clone())
            .expect("mask buffer length matches dimensions")
    }

    pub fn from_gray_image(img: &GrayImage) -> Result<Self, MaskError> {
        Self::from_raw(img.width(), img.height(), img.as_raw().clone())
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), MaskError> {
        self.to_gray_image().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    /// Reads an 8-bit single-channel PNG whose values are class ids.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, MaskError> {
        Self::from_image(image::open(path)?)
    }

    /// Same as [`LabelMask::load_png`] for an in-memory PNG.
    pub fn decode_png(bytes: &[u8]) -> Result<Self, MaskError> {
        Self::from_image(image::load_from_memory_with_format(bytes, image::ImageFormat::Png)?)
    }

    fn from_image(img: image::DynamicImage) -> Result<Self, MaskError> {
        let gray = match img {
            image::DynamicImage::ImageLuma8(g) => g,
            other => {
                // Palette or RGB masks: take the first channel as the id.
                let rgb = other.to_rgb8();
                let mut g = GrayImage::new(rgb.width(), rgb.height());
                for (x, y, p) in rgb.enumerate_pixels() {
                    g.put_pixel(x, y, Luma([p[0]]));
                }
                g
            }
        };
        Self::from_gray_image(&gray)
    }
}

/// Mirror-reflects an index into `0..len` without repeating the edge pixel.
pub fn reflect_index(i: i64, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as i64 - 1);
    let mut m = i.rem_euclid(period);
    if m >= len as i64 {
        m = period - m;
    }
    m as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_out_of_range_ids() {
        let err = LabelMask::from_raw(2, 1, vec![0, 6]).unwrap_err();
        assert!(matches!(err, MaskError::InvalidClass { value: 6, x: 1, y: 0 }));
    }

    #[test]
    fn geographic_set() {
        let ids: Vec<u8> = SemanticClass::GEOGRAPHIC.iter().map(|c| c.id()).collect();
        assert_eq!(ids, vec![2, 3, 4, 5]);
        assert!(!SemanticClass::Boundary.is_geographic());
    }

    #[test]
    fn reflection() {
        let idx: Vec<usize> = (-3..7).map(|i| reflect_index(i, 4)).collect();
        assert_eq!(idx, vec![3, 2, 1, 0, 1, 2, 3, 2, 1, 0]);
        assert_eq!(reflect_index(5, 1), 0);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.png");
        let m = LabelMask::from_raw(3, 2, vec![0, 1, 2, 3, 4, 5]).unwrap();
        m.save_png(&path).unwrap();
        assert_eq!(LabelMask::load_png(&path).unwrap(), m);
    }
}
