//! Procedural fill textures. Each returns an ink intensity in `[0, 1]` per
//! pixel.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextureKind {
    Stipple,
    Grain,
    Wash,
    CrossHatchFine,
    CrossHatchCoarse,
    Ripple,
    Speckle,
    Weave,
}

impl TextureKind {
    pub const ALL: [TextureKind; 8] = [
        TextureKind::Stipple,
        TextureKind::Grain,
        TextureKind::Wash,
        TextureKind::CrossHatchFine,
        TextureKind::CrossHatchCoarse,
        TextureKind::Ripple,
        TextureKind::Speckle,
        TextureKind::Weave,
    ];
}

#[inline]
fn hash(x: i64, y: i64, seed: u64) -> f64 {
    let mut z = seed ^ (x as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ (y as u64).wrapping_mul(0xC2B2_AE3D_27D4_EB4F);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    (z >> 11) as f64 / (1u64 << 53) as f64
}

/// Smoothly interpolated lattice noise with the given cell size.
fn value_noise(x: f64, y: f64, cell: f64, seed: u64) -> f64 {
    let (fx, fy) = (x / cell, y / cell);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (tx, ty) = (fx - x0, fy - y0);
    let s = |t: f64| t * t * (3.0 - 2.0 * t);
    let (sx, sy) = (s(tx), s(ty));
    let (ix, iy) = (x0 as i64, y0 as i64);
    let a = hash(ix, iy, seed);
    let b = hash(ix + 1, iy, seed);
    let c = hash(ix, iy + 1, seed);
    let d = hash(ix + 1, iy + 1, seed);
    let top = a + sx * (b - a);
    let bottom = c + sx * (d - c);
    top + sy * (bottom - top)
}

fn line_ink(d: f64, spacing: f64, half_width: f64) -> f64 {
    let r = d.rem_euclid(spacing);
    if r.min(spacing - r) <= half_width {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Texture {
    pub kind: TextureKind,
    pub seed: u64,
}

impl Texture {
    pub fn intensity(&self, x: u32, y: u32) -> f64 {
        let (xf, yf) = (x as f64 + 0.5, y as f64 + 0.5);
        let (xi, yi) = (x as i64, y as i64);
        let seed = self.seed;
        match self.kind {
            TextureKind::Stipple => (hash(xi, yi, seed) < 0.12) as u8 as f64,
            TextureKind::Grain => (0.6 * value_noise(xf, yf, 3.0, seed) + 0.4 * hash(xi, yi, seed)).powi(2),
            TextureKind::Wash => 0.6 * value_noise(xf, yf, 28.0, seed) + 0.4 * value_noise(xf, yf, 9.0, seed ^ 1),
            TextureKind::CrossHatchFine => {
                line_ink(xf + yf, 5.0, 0.75).max(line_ink(xf - yf, 5.0, 0.75))
            }
            TextureKind::CrossHatchCoarse => {
                line_ink(xf + yf, 10.0, 1.1).max(line_ink(xf - yf, 10.0, 1.1))
            }
            TextureKind::Ripple => {
                let phase = yf * 0.7 + 2.5 * (xf * 0.12 + 6.0 * hash(0, 0, seed)).sin();
                (phase.sin() > 0.75) as u8 as f64
            }
            TextureKind::Speckle => (hash(xi.div_euclid(2), yi.div_euclid(2), seed) < 0.22) as u8 as f64,
            TextureKind::Weave => {
                let (cx, cy) = (xi.div_euclid(6), yi.div_euclid(6));
                let (lx, ly) = (xi.rem_euclid(6), yi.rem_euclid(6));
                if (cx + cy) % 2 == 0 {
                    (ly == 2 || ly == 3) as u8 as f64
                } else {
                    (lx == 2 || lx == 3) as u8 as f64
                }
            }
        }
    }
}
