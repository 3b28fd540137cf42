//! Relief depiction from an elevation grid: Horn hillshading,
//! marching-squares contours and slope hachures.

use std::collections::{HashMap, VecDeque};

use image::{Rgb, RgbImage};
use rand::Rng;

use crate::geodata::{ElevationGrid, GeoError};

use super::config::{uniform, ReliefMode, ReliefParams};
use super::draw::{self, Pt};

/// Dense copy of the grid with nodata cells filled from their nearest valid
/// neighbour (breadth-first), so derivatives and contours are defined
/// everywhere.
pub fn filled_values(grid: &ElevationGrid) -> Result<Vec<f64>, GeoError> {
    let (w, h) = (grid.width(), grid.height());
    let mut out = vec![0.0; w * h];
    let mut known = vec![false; w * h];
    let mut queue = VecDeque::new();
    for y in 0..h {
        for x in 0..w {
            if let Some(v) = grid.get(x, y) {
                out[y * w + x] = v;
                known[y * w + x] = true;
                queue.push_back((x, y));
            }
        }
    }
    if queue.is_empty() {
        return Err(GeoError::AllNoData);
    }
    while let Some((x, y)) = queue.pop_front() {
        let v = out[y * w + x];
        let neighbours = [(x.wrapping_sub(1), y), (x + 1, y), (x, y.wrapping_sub(1)), (x, y + 1)];
        for (nx, ny) in neighbours {
            if nx < w && ny < h && !known[ny * w + nx] {
                known[ny * w + nx] = true;
                out[ny * w + nx] = v;
                queue.push_back((nx, ny));
            }
        }
    }
    Ok(out)
}

/// Horn's 3×3 gradient at a cell, with edges clamped. `y` grows southwards.
/// Returns `(dz/dx, dz/dy)` in map orientation (east, north).
pub fn horn_gradient(values: &[f64], w: usize, h: usize, x: usize, y: usize, cell: f64) -> (f64, f64) {
    let at = |dx: i64, dy: i64| {
        let xx = (x as i64 + dx).clamp(0, w as i64 - 1) as usize;
        let yy = (y as i64 + dy).clamp(0, h as i64 - 1) as usize;
        values[yy * w + xx]
    };
    let (a, b, c) = (at(-1, -1), at(0, -1), at(1, -1));
    let (d, f) = (at(-1, 0), at(1, 0));
    let (g, hh, i) = (at(-1, 1), at(0, 1), at(1, 1));
    let dzdx = ((c + 2.0 * f + i) - (a + 2.0 * d + g)) / (8.0 * cell);
    // Rows run north to south, so north-minus-south is the northward slope.
    let dzdy = ((a + 2.0 * b + c) - (g + 2.0 * hh + i)) / (8.0 * cell);
    (dzdx, dzdy)
}

/// Lambertian shade for a surface gradient, clamped to `[0, 1]`.
pub fn shade(dzdx: f64, dzdy: f64, azimuth_deg: f64, altitude_deg: f64) -> f64 {
    let zenith = (90.0 - altitude_deg).to_radians();
    let az = azimuth_deg.to_radians();
    // Direction towards the light, compass azimuth (clockwise from north).
    let (lx, ly, lz) = (zenith.sin() * az.sin(), zenith.sin() * az.cos(), zenith.cos());
    let norm = (dzdx * dzdx + dzdy * dzdy + 1.0).sqrt();
    let v = (-dzdx * lx - dzdy * ly + lz) / norm;
    v.clamp(0.0, 1.0)
}

pub fn hillshade(grid: &ElevationGrid, azimuth_deg: f64, altitude_deg: f64) -> Result<Vec<f64>, GeoError> {
    let values = filled_values(grid)?;
    let (w, h) = (grid.width(), grid.height());
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let (gx, gy) = horn_gradient(&values, w, h, x, y, grid.cell_size());
            out.push(shade(gx, gy, azimuth_deg, altitude_deg));
        }
    }
    Ok(out)
}

/// A grid edge between two nodes, keyed so that neighbouring cells agree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
enum EdgeKey {
    /// Between `(x, y)` and `(x + 1, y)`.
    H(usize, usize),
    /// Between `(x, y)` and `(x, y + 1)`.
    V(usize, usize),
}

/// Contour polylines of `values` at `level`, in node coordinates (node
/// `(x, y)` at `[x, y]`). Each polyline is closed (first == last) or has
/// both ends on the grid boundary.
pub fn contour(values: &[f64], w: usize, h: usize, level: f64) -> Vec<Vec<Pt>> {
    if w < 2 || h < 2 {
        return Vec::new();
    }
    let above = |x: usize, y: usize| values[y * w + x] >= level;
    let point = |e: EdgeKey| -> Pt {
        let (x0, y0, x1, y1) = match e {
            EdgeKey::H(x, y) => (x, y, x + 1, y),
            EdgeKey::V(x, y) => (x, y, x, y + 1),
        };
        let (a, b) = (values[y0 * w + x0], values[y1 * w + x1]);
        let t = if b != a { ((level - a) / (b - a)).clamp(0.0, 1.0) } else { 0.5 };
        [x0 as f64 + t * (x1 as f64 - x0 as f64), y0 as f64 + t * (y1 as f64 - y0 as f64)]
    };

    let mut segments: Vec<(EdgeKey, EdgeKey)> = Vec::new();
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let (tl, tr, br, bl) = (above(x, y), above(x + 1, y), above(x + 1, y + 1), above(x, y + 1));
            let case = (tl as u8) << 3 | (tr as u8) << 2 | (br as u8) << 1 | bl as u8;
            let (top, right, bottom, left) = (EdgeKey::H(x, y), EdgeKey::V(x + 1, y), EdgeKey::H(x, y + 1), EdgeKey::V(x, y));
            let center_above = || {
                let s = values[y * w + x] + values[y * w + x + 1] + values[(y + 1) * w + x] + values[(y + 1) * w + x + 1];
                s / 4.0 >= level
            };
            match case {
                0 | 15 => {}
                1 | 14 => segments.push((left, bottom)),
                2 | 13 => segments.push((bottom, right)),
                3 | 12 => segments.push((left, right)),
                4 | 11 => segments.push((top, right)),
                6 | 9 => segments.push((top, bottom)),
                7 | 8 => segments.push((left, top)),
                5 => {
                    // tr and bl above.
                    if center_above() {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    } else {
                        segments.push((left, bottom));
                        segments.push((top, right));
                    }
                }
                10 => {
                    // tl and br above.
                    if center_above() {
                        segments.push((left, bottom));
                        segments.push((top, right));
                    } else {
                        segments.push((left, top));
                        segments.push((bottom, right));
                    }
                }
                _ => unreachable!(),
            }
        }
    }

    // Each interior edge is shared by exactly two segments, boundary edges by one.
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (i, &(a, b)) in segments.iter().enumerate() {
        by_edge.entry(a).or_default().push(i);
        by_edge.entry(b).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut lines = Vec::new();
    let other = |seg: (EdgeKey, EdgeKey), e: EdgeKey| if seg.0 == e { seg.1 } else { seg.0 };
    let walk = |start_seg: usize, from: EdgeKey, used: &mut Vec<bool>| -> Vec<EdgeKey> {
        let mut chain = vec![from];
        let mut seg = start_seg;
        let mut at = from;
        loop {
            used[seg] = true;
            at = other(segments[seg], at);
            chain.push(at);
            match by_edge[&at].iter().find(|&&s| !used[s]) {
                Some(&s) => seg = s,
                None => break,
            }
        }
        chain
    };
    // Open chains start at boundary edges (edges with a single segment).
    let mut starts: Vec<(EdgeKey, usize)> = by_edge
        .iter()
        .filter(|(_, segs)| segs.len() == 1)
        .map(|(&e, segs)| (e, segs[0]))
        .collect();
    starts.sort_by_key(|&(e, s)| (s, e));
    for (e, s) in starts {
        if !used[s] {
            let chain = walk(s, e, &mut used);
            lines.push(chain.into_iter().map(point).collect());
        }
    }
    for s in 0..segments.len() {
        if !used[s] {
            let chain = walk(s, segments[s].0, &mut used);
            lines.push(chain.into_iter().map(point).collect());
        }
    }
    lines
}

/// Contour levels at multiples of `interval` strictly inside the value range.
pub fn contour_levels(values: &[f64], interval: f64) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(interval > 0.0) || !(max > min) {
        return Vec::new();
    }
    let mut k = (min / interval).floor() as i64;
    let mut out = Vec::new();
    loop {
        let l = k as f64 * interval;
        if l >= max {
            break;
        }
        if l > min {
            out.push(l);
        }
        k += 1;
    }
    out
}

pub fn isolines(grid: &ElevationGrid, interval: f64) -> Result<Vec<(f64, Vec<Vec<Pt>>)>, GeoError> {
    let values = filled_values(grid)?;
    let (w, h) = (grid.width(), grid.height());
    Ok(contour_levels(&values, interval)
        .into_iter()
        .map(|l| (l, contour(&values, w, h, l)))
        .collect())
}

/// Short downslope strokes on a jittered grid; a site is kept with
/// probability `min(1, slope / full_slope)`.
pub fn hachures(
    grid: &ElevationGrid,
    spacing: f64,
    length: f64,
    full_slope: f64,
    rng: &mut impl Rng,
) -> Result<Vec<Vec<Pt>>, GeoError> {
    let values = filled_values(grid)?;
    let (w, h) = (grid.width(), grid.height());
    let mut out = Vec::new();
    let mut y = spacing / 2.0;
    while y < h as f64 {
        let mut x = spacing / 2.0;
        while x < w as f64 {
            let px = (x + rng.random_range(-0.25..0.25) * spacing).clamp(0.0, w as f64 - 1.0);
            let py = (y + rng.random_range(-0.25..0.25) * spacing).clamp(0.0, h as f64 - 1.0);
            let (gx, gy) = horn_gradient(&values, w, h, px as usize, py as usize, grid.cell_size());
            let slope = (gx * gx + gy * gy).sqrt();
            let keep: f64 = rng.random();
            if slope > 0.0 && keep < (slope / full_slope).min(1.0) {
                // Downslope in image space: east is +x, north is -y.
                let (ux, uy) = (-gx / slope, gy / slope);
                let half = length / 2.0;
                out.push(vec![[px - ux * half, py - uy * half], [px + ux * half, py + uy * half]]);
            }
            x += spacing;
        }
        y += spacing;
    }
    Ok(out)
}

/// Relief rendered at image resolution, ready to composite.
#[derive(Debug, Clone, Default)]
pub struct ReliefOverlay {
    /// Multiplicative shade per pixel in `[0, 1]`; 1 leaves the image as is.
    pub shade: Option<Vec<f64>>,
    /// Polylines in pixel coordinates.
    pub lines: Vec<Vec<Pt>>,
    pub line_width: f64,
}

/// `grid` must already be resampled to the image size.
pub fn render_relief(
    grid: &ElevationGrid,
    mode: ReliefMode,
    params: &ReliefParams,
    rng: &mut impl Rng,
) -> Result<ReliefOverlay, GeoError> {
    if grid.valid_count() == 0 {
        return Err(GeoError::AllNoData);
    }
    if grid.width() < 2 || grid.height() < 2 {
        return Err(GeoError::InvalidElevation("relief needs at least 2x2 cells".into()));
    }
    let mut out = ReliefOverlay::default();
    match mode {
        ReliefMode::None => {}
        ReliefMode::Hillshade => {
            let strength = uniform(rng, params.hillshade_strength);
            let hs = hillshade(grid, params.azimuth_deg, params.altitude_deg)?;
            let flat = shade(0.0, 0.0, params.azimuth_deg, params.altitude_deg);
            // Flat terrain keeps the sheet tone; steeper faces lighten or darken.
            out.shade = Some(hs.iter().map(|&v| (1.0 + strength * (v - flat)).clamp(0.0, 1.0)).collect());
        }
        ReliefMode::Isolines => {
            let values = filled_values(grid)?;
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let n = rng.random_range(params.isoline_levels[0]..=params.isoline_levels[1]);
            out.line_width = uniform(rng, params.isoline_width);
            if max > min {
                let interval = (max - min) / (n + 1) as f64;
                for (_, lines) in isolines(grid, interval)? {
                    // Node (x, y) sits at the center of pixel (x, y).
                    out.lines.extend(lines.into_iter().map(|l| l.into_iter().map(|p| [p[0] + 0.5, p[1] + 0.5]).collect()));
                }
            }
        }
        ReliefMode::Hachure => {
            let spacing = uniform(rng, params.hachure_spacing);
            let length = uniform(rng, params.hachure_length);
            out.line_width = 1.0;
            out.lines = hachures(grid, spacing, length, params.hachure_full_slope, rng)?
                .into_iter()
                .map(|l| l.into_iter().map(|p| [p[0] + 0.5, p[1] + 0.5]).collect())
                .collect();
        }
    }
    Ok(out)
}

/// Darkens the image by the shade field and strokes the lines in `ink`.
pub fn composite(img: &mut RgbImage, overlay: &ReliefOverlay, ink: [u8; 3]) {
    let (w, h) = img.dimensions();
    if let Some(shade) = &overlay.shade {
        for (p, &s) in img.pixels_mut().zip(shade) {
            p.0 = p.0.map(|c| (c as f64 * s).round() as u8);
        }
    }
    for line in &overlay.lines {
        draw::stroke_polyline(line, overlay.line_width, w, h, |x, y| img.put_pixel(x, y, Rgb(ink)));
    }
}
