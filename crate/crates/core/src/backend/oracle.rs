//! Ground-truth oracle: answers each tile from stored masks.

use std::collections::BTreeMap;

use image::RgbImage;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::logits::Logits;
use crate::mask::{reflect_index, LabelMask};
use crate::rng::{self, Stage};
use crate::NUM_CLASSES;

use super::{BackendError, SegmentationBackend, TileContext};

/// Logit given to the true class; all others get zero.
pub const ORACLE_LOGIT: f32 = 10.0;

#[derive(Debug, Clone)]
enum Store {
    /// A full-resolution mask; any tile of the image (or of a rescaled
    /// copy) can be answered.
    Full(LabelMask),
    /// Explicit crops keyed by top-left position, valid at scale 1 only.
    Tiles(BTreeMap<(u32, u32), LabelMask>),
}

#[derive(Debug, Clone)]
pub struct OracleBackend {
    store: Store,
    sigma: f32,
    seed: u64,
}

impl OracleBackend {
    pub fn new(mask: LabelMask) -> Self {
        Self { store: Store::Full(mask), sigma: 0.0, seed: 0 }
    }

    pub fn from_tiles(tiles: BTreeMap<(u32, u32), LabelMask>) -> Self {
        Self { store: Store::Tiles(tiles), sigma: 0.0, seed: 0 }
    }

    /// Adds `N(0, sigma²)` noise, drawn from a stream keyed by the tile so
    /// results do not depend on evaluation order.
    pub fn with_noise(mut self, sigma: f32, seed: u64) -> Self {
        self.sigma = sigma;
        self.seed = seed;
        self
    }

    fn one_hot(crop: &LabelMask) -> Logits {
        let mut l = Logits::zeros(crop.width(), crop.height(), NUM_CLASSES as u32);
        let n = l.plane_len();
        let data = l.as_mut_slice();
        for (i, &c) in crop.as_raw().iter().enumerate() {
            data[c as usize * n + i] = ORACLE_LOGIT;
        }
        l
    }

    fn add_noise(&self, logits: &mut Logits, ctx: &TileContext) {
        if self.sigma <= 0.0 {
            return;
        }
        let key = rng::mix(rng::mix(self.seed, ctx.scale.to_bits()), ((ctx.x as u64) << 32) | ctx.y as u64);
        let mut rng = rng::stream(key, Stage::Noise);
        for v in logits.as_mut_slice() {
            *v += self.sigma * rng.sample::<f32, _>(StandardNormal);
        }
    }
}

/// For each index of an axis resampled from `len` to `new_len`, the
/// original pixels its footprint overlaps and the overlap lengths.
fn footprints(len: u32, new_len: u32) -> Vec<Vec<(usize, f64)>> {
    let r = len as f64 / new_len as f64;
    (0..new_len)
        .map(|i| {
            let (a, b) = (i as f64 * r, (i + 1) as f64 * r);
            let j0 = a.floor() as usize;
            let j1 = (b.ceil() as usize).min(len as usize);
            (j0..j1)
                .filter_map(|j| {
                    let w = b.min(j as f64 + 1.0) - a.max(j as f64);
                    (w > 0.0).then_some((j, w))
                })
                .collect()
        })
        .collect()
}

/// Soft labels for a tile of a rescaled image: each class gets
/// `ORACLE_LOGIT` times its area share inside the pixel footprint.
fn area_fractions(mask: &LabelMask, tile_w: u32, tile_h: u32, ctx: &TileContext) -> Logits {
    let fx = footprints(mask.width(), ctx.image_width);
    let fy = footprints(mask.height(), ctx.image_height);
    let area = mask.width() as f64 / ctx.image_width as f64 * mask.height() as f64 / ctx.image_height as f64;
    let mut out = Logits::zeros(tile_w, tile_h, NUM_CLASSES as u32);
    let mut acc = [0f64; NUM_CLASSES];
    for ty in 0..tile_h {
        let sy = reflect_index(ctx.y as i64 + ty as i64, ctx.image_height as usize);
        for tx in 0..tile_w {
            let sx = reflect_index(ctx.x as i64 + tx as i64, ctx.image_width as usize);
            acc.fill(0.0);
            for &(j, wy) in &fy[sy] {
                for &(i, wx) in &fx[sx] {
                    acc[mask.get(i as u32, j as u32).index()] += wx * wy;
                }
            }
            for (k, a) in acc.iter().enumerate() {
                out.set(k, tx, ty, (ORACLE_LOGIT as f64 * a / area) as f32);
            }
        }
    }
    out
}

impl SegmentationBackend for OracleBackend {
    fn evaluate(&self, tile: &RgbImage, ctx: &TileContext) -> Result<Logits, BackendError> {
        let (tw, th) = tile.dimensions();
        let uncovered = || BackendError::Uncovered { x: ctx.x, y: ctx.y, scale: ctx.scale };
        if ctx.x >= ctx.image_width.max(tw) || ctx.y >= ctx.image_height.max(th) {
            return Err(uncovered());
        }
        let mut logits = match &self.store {
            Store::Full(mask) => {
                let (mw, mh) = mask.dims();
                if (ctx.image_width, ctx.image_height) == (mw, mh) {
                    Self::one_hot(&mask.crop_reflect(ctx.x as i64, ctx.y as i64, tw, th))
                } else {
                    let expect = |n: u32| ((n as f64 * ctx.scale).round() as u32).max(1);
                    if (ctx.image_width, ctx.image_height) != (expect(mw), expect(mh)) {
                        return Err(uncovered());
                    }
                    area_fractions(mask, tw, th, ctx)
                }
            }
            Store::Tiles(tiles) => {
                let crop = tiles.get(&(ctx.x, ctx.y)).ok_or_else(uncovered)?;
                if ctx.scale != 1.0 || crop.dims() != (tw, th) {
                    return Err(uncovered());
                }
                Self::one_hot(crop)
            }
        };
        self.add_noise(&mut logits, ctx);
        Ok(logits)
    }

    fn concurrent_safe(&self) -> bool {
        true
    }
}
