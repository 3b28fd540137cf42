//! Separable bilinear and nearest-neighbour resizing of interleaved
//! `f32` planes, using half-pixel centers.

use image::RgbImage;

/// Source coordinate, neighbour indices and weight for one output index.
fn taps(len: usize, new_len: usize) -> Vec<(usize, usize, f32)> {
    let ratio = len as f64 / new_len as f64;
    (0..new_len)
        .map(|i| {
            let s = ((i as f64 + 0.5) * ratio - 0.5).clamp(0.0, (len - 1) as f64);
            let i0 = s.floor() as usize;
            let i1 = (i0 + 1).min(len - 1);
            (i0, i1, (s - i0 as f64) as f32)
        })
        .collect()
}

#[inline]
fn lerp(a: f32, b: f32, t: f32) -> f32 {
    a + t * (b - a)
}

/// Bilinear resize of a `channels`-interleaved row-major buffer.
/// Constant inputs stay exactly constant.
pub fn resize_bilinear(
    src: &[f32],
    channels: usize,
    width: usize,
    height: usize,
    new_width: usize,
    new_height: usize,
) -> Vec<f32> {
    assert_eq!(src.len(), channels * width * height, "buffer size mismatch");
    assert!(width > 0 && height > 0 && new_width > 0 && new_height > 0);
    if (width, height) == (new_width, new_height) {
        return src.to_vec();
    }
    let xt = taps(width, new_width);
    let yt = taps(height, new_height);
    // Horizontal pass.
    let mut tmp = vec![0f32; channels * new_width * height];
    for y in 0..height {
        let row = &src[y * width * channels..(y + 1) * width * channels];
        for (x, &(x0, x1, t)) in xt.iter().enumerate() {
            for c in 0..channels {
                tmp[(y * new_width + x) * channels + c] = lerp(row[x0 * channels + c], row[x1 * channels + c], t);
            }
        }
    }
    // Vertical pass.
    let stride = new_width * channels;
    let mut out = vec![0f32; stride * new_height];
    for (y, &(y0, y1, t)) in yt.iter().enumerate() {
        let (r0, r1) = (&tmp[y0 * stride..(y0 + 1) * stride], &tmp[y1 * stride..(y1 + 1) * stride]);
        for (o, (a, b)) in out[y * stride..(y + 1) * stride].iter_mut().zip(r0.iter().zip(r1)) {
            *o = lerp(*a, *b, t);
        }
    }
    out
}

/// Nearest-neighbour resize; each output pixel copies the source pixel
/// containing its center.
pub fn resize_nearest(
    src: &[f32],
    channels: usize,
    width: usize,
    height: usize,
    new_width: usize,
    new_height: usize,
) -> Vec<f32> {
    assert_eq!(src.len(), channels * width * height, "buffer size mismatch");
    let pick = |i: usize, len: usize, new_len: usize| {
        (((i as f64 + 0.5) * len as f64 / new_len as f64) as usize).min(len - 1)
    };
    let mut out = Vec::with_capacity(channels * new_width * new_height);
    for y in 0..new_height {
        let sy = pick(y, height, new_height);
        for x in 0..new_width {
            let sx = pick(x, width, new_width);
            let base = (sy * width + sx) * channels;
            out.extend_from_slice(&src[base..base + channels]);
        }
    }
    out
}

pub fn rgb_to_f32(img: &RgbImage) -> Vec<f32> {
    img.as_raw().iter().map(|&v| v as f32).collect()
}

pub fn f32_to_rgb(data: &[f32], width: u32, height: u32) -> RgbImage {
    let raw = data.iter().map(|v| v.round().clamp(0.0, 255.0) as u8).collect();
    RgbImage::from_raw(width, height, raw).expect("buffer matches dimensions")
}

pub fn resize_rgb(img: &RgbImage, new_width: u32, new_height: u32) -> RgbImage {
    let data = resize_bilinear(
        &rgb_to_f32(img),
        3,
        img.width() as usize,
        img.height() as usize,
        new_width as usize,
        new_height as usize,
    );
    f32_to_rgb(&data, new_width, new_height)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constants_are_preserved() {
        let src = vec![0.4f32; 2 * 7 * 5];
        for (w, h) in [(3, 2), (14, 10), (9, 4)] {
            assert!(resize_bilinear(&src, 2, 7, 5, w, h).iter().all(|&v| v == 0.4));
        }
    }

    #[test]
    fn doubling_interpolates_between_centers() {
        let src = [0.0f32, 4.0];
        let out = resize_bilinear(&src, 1, 2, 1, 4, 1);
        assert_eq!(out, vec![0.0, 1.0, 3.0, 4.0]);
    }

    #[test]
    fn nearest_doubles_pixels() {
        let src = [1.0f32, 2.0, 3.0, 4.0];
        let out = resize_nearest(&src, 1, 2, 2, 4, 2);
        assert_eq!(out, vec![1.0, 1.0, 2.0, 2.0, 3.0, 3.0, 4.0, 4.0]);
    }
}
