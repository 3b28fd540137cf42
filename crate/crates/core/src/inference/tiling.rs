//! Overlapped tile plans and the logit accumulator.

use image::{Rgb, RgbImage};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backend::{check_output, SegmentationBackend, TileContext};
use crate::logits::Logits;
use crate::mask::reflect_index;
use crate::NUM_CLASSES;

use super::InferError;

pub const DEFAULT_PATCH: u32 = 768;
pub const DEFAULT_OVERLAP: u32 = 64;

/// Tile origins along each axis; the full plan is their product, visited
/// row by row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TileGrid {
    pub width: u32,
    pub height: u32,
    pub patch: u32,
    pub overlap: u32,
    pub xs: Vec<u32>,
    pub ys: Vec<u32>,
    /// Set when the image is smaller than the patch along some axis and
    /// tiles are filled by reflection.
    pub padded: bool,
}

impl TileGrid {
    /// Row-major `(x, y)` tile origins.
    pub fn positions(&self) -> Vec<(u32, u32)> {
        self.ys.iter().flat_map(|&y| self.xs.iter().map(move |&x| (x, y))).collect()
    }

    pub fn len(&self) -> usize {
        self.xs.len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Number of tiles covering each pixel, row-major.
    pub fn coverage(&self) -> Vec<u32> {
        let mut cover = vec![0u32; self.width as usize * self.height as usize];
        for (x, y) in self.positions() {
            for yy in y..(y + self.patch).min(self.height) {
                let row = yy as usize * self.width as usize;
                for xx in x..(x + self.patch).min(self.width) {
                    cover[row + xx as usize] += 1;
                }
            }
        }
        cover
    }
}

/// `0, stride, 2·stride, …` with the last origin clamped to `dim − patch`.
fn axis_positions(dim: u32, patch: u32, stride: u32) -> Vec<u32> {
    if dim <= patch {
        return vec![0];
    }
    let mut out = Vec::new();
    let mut pos = 0;
    loop {
        if pos + patch >= dim {
            out.push(pos.min(dim - patch));
            break;
        }
        out.push(pos);
        pos += stride;
    }
    out.dedup();
    out
}

pub fn plan_tiles(width: u32, height: u32, patch: u32, overlap: u32) -> Result<TileGrid, InferError> {
    if width == 0 || height == 0 {
        return Err(InferError::EmptyImage);
    }
    if patch == 0 || overlap >= patch {
        return Err(InferError::InvalidTiling { patch, overlap });
    }
    let stride = patch - overlap;
    Ok(TileGrid {
        width,
        height,
        patch,
        overlap,
        xs: axis_positions(width, patch, stride),
        ys: axis_positions(height, patch, stride),
        padded: width < patch || height < patch,
    })
}

/// Cuts a `patch × patch` tile at `(x, y)`; pixels past the image edge are
/// mirrored back in.
pub fn extract_tile(image: &RgbImage, x: u32, y: u32, patch: u32) -> RgbImage {
    let (w, h) = image.dimensions();
    if x + patch <= w && y + patch <= h {
        return image::imageops::crop_imm(image, x, y, patch, patch).to_image();
    }
    RgbImage::from_fn(patch, patch, |tx, ty| {
        let sx = reflect_index(x as i64 + tx as i64, w as usize) as u32;
        let sy = reflect_index(y as i64 + ty as i64, h as usize) as u32;
        Rgb(image.get_pixel(sx, sy).0)
    })
}

/// Running per-pixel sums and contribution counts.
#[derive(Debug, Clone)]
pub struct LogitMap {
    width: u32,
    height: u32,
    scores: Vec<f32>,
    counts: Vec<u32>,
}

impl LogitMap {
    pub fn new(width: u32, height: u32) -> Self {
        let n = width as usize * height as usize;
        Self { width, height, scores: vec![0.0; n * NUM_CLASSES], counts: vec![0; n] }
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    /// Adds the part of `tile` that falls inside the image.
    pub fn add_tile(&mut self, x: u32, y: u32, tile: &Logits) {
        let (w, h) = (self.width as usize, self.height as usize);
        let tw = tile.width() as usize;
        let x_end = (x as usize + tw).min(w);
        let y_end = (y as usize + tile.height() as usize).min(h);
        let span = x_end - x as usize;
        let plane = w * h;
        for k in 0..NUM_CLASSES {
            let src = tile.plane(k);
            for yy in y as usize..y_end {
                let row = (yy - y as usize) * tw;
                let dst = k * plane + yy * w + x as usize;
                for (d, s) in self.scores[dst..dst + span].iter_mut().zip(&src[row..row + span]) {
                    *d += *s;
                }
            }
        }
        for yy in y as usize..y_end {
            for c in &mut self.counts[yy * w + x as usize..yy * w + x_end] {
                *c += 1;
            }
        }
    }

    /// Divides each sum by its count. Panics on uncovered pixels, which a
    /// valid tile grid never leaves.
    pub fn finalize(self) -> Logits {
        let plane = self.counts.len();
        let mut scores = self.scores;
        for k in 0..NUM_CLASSES {
            for (s, &c) in scores[k * plane..(k + 1) * plane].iter_mut().zip(&self.counts) {
                assert!(c > 0, "pixel not covered by any tile");
                *s /= c as f32;
            }
        }
        Logits::new(self.width, self.height, NUM_CLASSES as u32, scores).expect("accumulator shape")
    }
}

/// Runs the backend over every tile and averages overlapping logits.
/// `scale` only labels the tile context and error messages.
pub fn run_tiled(
    image: &RgbImage,
    backend: &dyn SegmentationBackend,
    grid: &TileGrid,
    scale: f64,
) -> Result<Logits, InferError> {
    assert_eq!(image.dimensions(), (grid.width, grid.height), "grid planned for another image size");
    let positions = grid.positions();
    let eval = |&(x, y): &(u32, u32)| -> Result<Logits, InferError> {
        let tile = extract_tile(image, x, y, grid.patch);
        let ctx = TileContext { x, y, scale, image_width: grid.width, image_height: grid.height };
        let wrap = |error| InferError::Tile { x, y, scale, error };
        let logits = backend.evaluate(&tile, &ctx).map_err(wrap)?;
        check_output(&logits, grid.patch, grid.patch).map_err(wrap)?;
        Ok(logits)
    };
    let mut acc = LogitMap::new(grid.width, grid.height);
    // Bounded batches keep memory flat; each batch is reduced in row-major
    // order so the sums never depend on scheduling.
    let batch = if backend.concurrent_safe() { rayon::current_num_threads().max(1) * 2 } else { 1 };
    for chunk in positions.chunks(batch) {
        let results: Vec<Result<Logits, InferError>> = if batch > 1 {
            chunk.par_iter().map(eval).collect()
        } else {
            chunk.iter().map(eval).collect()
        };
        for (&(x, y), r) in chunk.iter().zip(results) {
            acc.add_tile(x, y, &r?);
        }
    }
    Ok(acc.finalize())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plan_examples() {
        let g = plan_tiles(768, 768, 768, 64).unwrap();
        assert_eq!((g.positions(), g.padded), (vec![(0, 0)], false));
        let g = plan_tiles(1000, 1000, 768, 64).unwrap();
        assert_eq!((g.xs.clone(), g.len()), (vec![0, 232], 4));
        let g = plan_tiles(2000, 768, 768, 64).unwrap();
        assert_eq!((g.xs.clone(), g.ys.clone()), (vec![0, 704, 1232], vec![0]));
        let g = plan_tiles(300, 900, 768, 64).unwrap();
        assert!(g.padded);
        assert_eq!((g.xs.clone(), g.ys.clone()), (vec![0], vec![0, 132]));
    }

    #[test]
    fn bad_plans() {
        assert!(matches!(plan_tiles(10, 10, 64, 64), Err(InferError::InvalidTiling { .. })));
        assert!(matches!(plan_tiles(0, 10, 64, 0), Err(InferError::EmptyImage)));
    }

    #[test]
    fn exact_multiple_has_no_duplicate() {
        // 704 + 768 = 1472 lands exactly on the edge.
        assert_eq!(axis_positions(1472, 768, 704), vec![0, 704]);
    }

    #[test]
    fn padded_tile_mirrors() {
        let img = RgbImage::from_fn(3, 2, |x, y| Rgb([x as u8, y as u8, 0]));
        let t = extract_tile(&img, 0, 0, 5);
        let row: Vec<u8> = (0..5).map(|x| t.get_pixel(x, 0).0[0]).collect();
        assert_eq!(row, [0, 1, 2, 1, 0]);
        let col: Vec<u8> = (0..5).map(|y| t.get_pixel(0, y).0[1]).collect();
        assert_eq!(col, [0, 1, 0, 1, 0]);
    }

    #[test]
    fn overlap_is_averaged() {
        let mut m = LogitMap::new(10, 1);
        m.add_tile(0, 0, &Logits::filled(6, 1, 6, 0.2));
        m.add_tile(4, 0, &Logits::filled(6, 1, 6, 0.6));
        let l = m.finalize();
        assert_eq!(l.get(0, 3, 0), 0.2);
        assert_eq!(l.get(0, 4, 0), 0.4);
        assert_eq!(l.get(5, 5, 0), 0.4);
        assert_eq!(l.get(0, 6, 0), 0.6);
    }
}
