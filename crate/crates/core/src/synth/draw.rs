//! Pixel-center rasterization primitives shared by template painting,
//! stylization and annotation.
//!
//! Coordinates are continuous pixel space: pixel `(x, y)` covers
//! `[x, x+1) × [y, y+1)` and is sampled at its center.

pub type Pt = [f64; 2];

/// Even-odd scanline fill of a set of closed rings.
pub fn fill_rings(rings: &[Vec<Pt>], width: u32, height: u32, mut plot: impl FnMut(u32, u32)) {
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in rings.iter().flatten() {
        ymin = ymin.min(p[1]);
        ymax = ymax.max(p[1]);
    }
    if !ymin.is_finite() {
        return;
    }
    let row0 = ((ymin - 0.5).ceil().max(0.0)) as i64;
    let row1 = ((ymax - 0.5).floor().min(height as f64 - 1.0)) as i64;
    let mut xs: Vec<f64> = Vec::new();
    for row in row0..=row1 {
        let yc = row as f64 + 0.5;
        xs.clear();
        for ring in rings {
            let n = ring.len();
            if n < 2 {
                continue;
            }
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                if (a[1] <= yc) != (b[1] <= yc) {
                    xs.push(a[0] + (yc - a[1]) * (b[0] - a[0]) / (b[1] - a[1]));
                }
            }
        }
        xs.sort_by(|a, b| a.total_cmp(b));
        for pair in xs.chunks_exact(2) {
            let c0 = ((pair[0] - 0.5).ceil().max(0.0)) as i64;
            let c1 = ((pair[1] - 0.5).ceil().min(width as f64)) as i64;
            for col in c0..c1 {
                plot(col as u32, row as u32);
            }
        }
    }
}

/// Signed area of a ring (shoelace), in squared pixels.
pub fn ring_area(ring: &[Pt]) -> f64 {
    let n = ring.len();
    if n < 3 {
        return 0.0;
    }
    let mut s = 0.0;
    for i in 0..n {
        let a = ring[i];
        let b = ring[(i + 1) % n];
        s += a[0] * b[1] - b[0] * a[1];
    }
    s / 2.0
}

pub fn polyline_length(line: &[Pt]) -> f64 {
    line.windows(2).map(|w| dist(w[0], w[1])).sum()
}

#[inline]
pub fn dist(a: Pt, b: Pt) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Distance from `p` to the segment `a–b`.
#[inline]
pub fn point_segment_distance(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    dist(p, [a[0] + t * dx, a[1] + t * dy])
}

/// Round-capped stroke: every pixel whose center lies within `width / 2` of
/// the polyline. Pixels may be reported more than once.
pub fn stroke_polyline(line: &[Pt], width: f64, w: u32, h: u32, mut plot: impl FnMut(u32, u32)) {
    let r = width / 2.0;
    let segments: Vec<(Pt, Pt)> = if line.len() == 1 {
        vec![(line[0], line[0])]
    } else {
        line.windows(2).map(|s| (s[0], s[1])).collect()
    };
    for (a, b) in segments {
        let x0 = ((a[0].min(b[0]) - r - 0.5).floor().max(0.0)) as i64;
        let x1 = ((a[0].max(b[0]) + r - 0.5).ceil().min(w as f64 - 1.0)) as i64;
        let y0 = ((a[1].min(b[1]) - r - 0.5).floor().max(0.0)) as i64;
        let y1 = ((a[1].max(b[1]) + r - 0.5).ceil().min(h as f64 - 1.0)) as i64;
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = [x as f64 + 0.5, y as f64 + 0.5];
                if point_segment_distance(c, a, b) <= r {
                    plot(x as u32, y as u32);
                }
            }
        }
    }
}

pub fn fill_disc(center: Pt, radius: f64, w: u32, h: u32, plot: impl FnMut(u32, u32)) {
    stroke_polyline(&[center], radius * 2.0, w, h, plot);
}

/// Ellipse with semi-axes `(rx, ry)` rotated by `angle` radians; calls `plot`
/// with the normalized radial distance (`< 1` inside).
pub fn fill_ellipse(
    center: Pt,
    rx: f64,
    ry: f64,
    angle: f64,
    w: u32,
    h: u32,
    mut plot: impl FnMut(u32, u32, f64),
) {
    let r = rx.max(ry);
    let (s, c) = angle.sin_cos();
    let x0 = ((center[0] - r).floor().max(0.0)) as i64;
    let x1 = ((center[0] + r).ceil().min(w as f64 - 1.0)) as i64;
    let y0 = ((center[1] - r).floor().max(0.0)) as i64;
    let y1 = ((center[1] + r).ceil().min(h as f64 - 1.0)) as i64;
    for y in y0..=y1 {
        for x in x0..=x1 {
            let dx = x as f64 + 0.5 - center[0];
            let dy = y as f64 + 0.5 - center[1];
            let u = (dx * c + dy * s) / rx;
            let v = (-dx * s + dy * c) / ry;
            let d = (u * u + v * v).sqrt();
            if d < 1.0 {
                plot(x as u32, y as u32, d);
            }
        }
    }
}

/// Exact squared Euclidean distance transform (Felzenszwalb–Huttenlocher).
/// `seed[i]` marks feature pixels (distance zero); the rest get the squared
/// distance to the nearest feature pixel, or `f64::INFINITY` if none exist.
pub fn squared_distance_transform(seed: &[bool], width: usize, height: usize) -> Vec<f64> {
    let inf = f64::INFINITY;
    let mut grid: Vec<f64> = seed.iter().map(|&s| if s { 0.0 } else { inf }).collect();
    let n = width.max(height);
    let mut f = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut v = vec![0usize; n];
    let mut z = vec![0.0; n + 1];
    for x in 0..width {
        for y in 0..height {
            f[y] = grid[y * width + x];
        }
        dt_1d(&f[..height], &mut d[..height], &mut v, &mut z);
        for y in 0..height {
            grid[y * width + x] = d[y];
        }
    }
    for y in 0..height {
        f[..width].copy_from_slice(&grid[y * width..(y + 1) * width]);
        dt_1d(&f[..width], &mut d[..width], &mut v, &mut z);
        grid[y * width..(y + 1) * width].copy_from_slice(&d[..width]);
    }
    grid
}

fn dt_1d(f: &[f64], d: &mut [f64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let first = match f.iter().position(|x| x.is_finite()) {
        Some(i) => i,
        None => {
            d.iter_mut().for_each(|x| *x = f64::INFINITY);
            return;
        }
    };
    let mut k = 0usize;
    v[0] = first;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in first + 1..n {
        if !f[q].is_finite() {
            continue;
        }
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
            } else {
                k += 1;
                v[k] = q;
                z[k] = s;
                z[k + 1] = f64::INFINITY;
                break;
            }
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate().take(n) {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        *out = (q as f64 - p as f64).powi(2) + f[p];
    }
}
