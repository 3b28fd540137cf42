//! Class-major logit planes and the `.lgt` file format.

use std::io::{Read, Write};

use thiserror::Error;

use crate::mask::{LabelMask, NUM_CLASSES};

pub const LGT_MAGIC: &[u8; 4] = b"LGT1";
/// Upper bound on `width × height × classes` accepted from files.
pub const MAX_LOGIT_VALUES: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum LogitsError {
    #[error("expected {expected} logit values, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("logit planes need positive dimensions and classes")]
    EmptyDimensions,
    #[error("bad magic {0:?}, expected LGT1")]
    BadMagic([u8; 4]),
    #[error("{width}x{height}x{classes} logits exceed the size limit")]
    TooLarge { width: u32, height: u32, classes: u32 },
    #[error("truncated logit file: expected {expected} payload bytes, got {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("trailing bytes after logit payload")]
    TrailingBytes,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `classes` planes of `height × width` scores; value `(k, y, x)` lives at
/// `k·h·w + y·w + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    width: u32,
    height: u32,
    classes: u32,
    data: Vec<f32>,
}

impl Logits {
    pub fn new(width: u32, height: u32, classes: u32, data: Vec<f32>) -> Result<Self, LogitsError> {
        if width == 0 || height == 0 || classes == 0 {
            return Err(LogitsError::EmptyDimensions);
        }
        let expected = width as usize * height as usize * classes as usize;
        if data.len() != expected {
            return Err(LogitsError::LengthMismatch { expected, got: data.len() });
        }
        Ok(Self { width, height, classes, data })
    }

    pub fn zeros(width: u32, height: u32, classes: u32) -> Self {
        Self::filled(width, height, classes, 0.0)
    }

    pub fn filled(width: u32, height: u32, classes: u32, value: f32) -> Self {
        assert!(width > 0 && height > 0 && classes > 0, "empty logit dimensions");
        Self { width, height, classes, data: vec![value; width as usize * height as usize * classes as usize] }
    }

    /// Per-class constants broadcast over the plane.
    pub fn constant(width: u32, height: u32, values: &[f32]) -> Self {
        let mut l = Self::zeros(width, height, values.len() as u32);
        let plane = l.plane_len();
        for (k, &v) in values.iter().enumerate() {
            l.data[k * plane..(k + 1) * plane].fill(v);
        }
        l
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn classes(&self) -> u32 {
        self.classes
    }

    pub fn plane_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.data
    }

    pub fn plane(&self, k: usize) -> &[f32] {
        let n = self.plane_len();
        &self.data[k * n..(k + 1) * n]
    }

    pub fn plane_mut(&mut self, k: usize) -> &mut [f32] {
        let n = self.plane_len();
        &mut self.data[k * n..(k + 1) * n]
    }

    #[inline]
    pub fn get(&self, k: usize, x: u32, y: u32) -> f32 {
        self.data[k * self.plane_len() + y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, k: usize, x: u32, y: u32, v: f32) {
        let i = k * self.plane_len() + y as usize * self.width as usize + x as usize;
        self.data[i] = v;
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Per-pixel argmax; ties go to the lowest class id. Requires the six
    /// semantic classes.
    pub fn argmax(&self) -> LabelMask {
        assert_eq!(self.classes as usize, NUM_CLASSES, "argmax needs one plane per semantic class");
        let n = self.plane_len();
        let mut out = vec![0u8; n];
        for (i, o) in out.iter_mut().enumerate() {
            let mut best = self.data[i];
            let mut arg = 0u8;
            for k in 1..NUM_CLASSES {
                let v = self.data[k * n + i];
                if v > best {
                    best = v;
                    arg = k as u8;
                }
            }
            *o = arg;
        }
        LabelMask::from_raw(self.width, self.height, out).expect("argmax ids are valid classes")
    }

    /// Rectangular window `[x0, x0+w) × [y0, y0+h)`; must lie inside.
    pub fn crop(&self, x0: u32, y0: u32, w: u32, h: u32) -> Logits {
        assert!(x0 + w <= self.width && y0 + h <= self.height, "crop outside logit plane");
        let mut out = Logits::zeros(w, h, self.classes);
        for k in 0..self.classes as usize {
            for y in 0..h {
                let src = k * self.plane_len() + (y0 + y) as usize * self.width as usize + x0 as usize;
                let dst = k * out.plane_len() + y as usize * w as usize;
                out.data[dst..dst + w as usize].copy_from_slice(&self.data[src..src + w as usize]);
            }
        }
        out
    }

    pub fn write_lgt(&self, mut w: impl Write) -> Result<(), LogitsError> {
        w.write_all(&self.to_lgt_bytes())?;
        Ok(())
    }

    pub fn to_lgt_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.data.len() * 4);
        out.extend_from_slice(LGT_MAGIC);
        for v in [self.width, self.height, self.classes] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    /// Reads one `.lgt` document; trailing bytes are rejected.
    pub fn read_lgt(mut r: impl Read) -> Result<Self, LogitsError> {
        let mut head = [0u8; 16];
        let got = read_up_to(&mut r, &mut head)?;
        if got < 4 || &head[..4] != LGT_MAGIC {
            let mut m = [0u8; 4];
            m[..got.min(4)].copy_from_slice(&head[..got.min(4)]);
            return Err(LogitsError::BadMagic(m));
        }
        if got < 16 {
            return Err(LogitsError::Truncated { expected: 12, got: got as u64 - 4 });
        }
        let word = |i: usize| u32::from_le_bytes(head[i..i + 4].try_into().expect("4 bytes"));
        let (width, height, classes) = (word(4), word(8), word(12));
        if width == 0 || height == 0 || classes == 0 {
            return Err(LogitsError::EmptyDimensions);
        }
        let count = (width as u64 * height as u64).saturating_mul(classes as u64);
        if count > MAX_LOGIT_VALUES {
            return Err(LogitsError::TooLarge { width, height, classes });
        }
        let expected = count * 4;
        let mut payload = Vec::with_capacity(expected.min(1 << 24) as usize);
        let got = (&mut r).take(expected).read_to_end(&mut payload)? as u64;
        if got != expected {
            return Err(LogitsError::Truncated { expected, got });
        }
        let mut probe = [0u8; 1];
        if read_up_to(&mut r, &mut probe)? != 0 {
            return Err(LogitsError::TrailingBytes);
        }
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
        Logits::new(width, height, classes, data)
    }
}

/// Fills as much of `buf` as the reader provides; returns the byte count.
pub(crate) fn read_up_to(r: &mut impl Read, buf: &mut [u8]) -> std::io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        let l = Logits::constant(3, 2, &[1.0, 1.0, 0.0, 1.0, 0.5, 1.0]);
        assert!(l.argmax().as_raw().iter().all(|&v| v == 0));
        let mut l = Logits::zeros(2, 1, 6);
        l.set(4, 1, 0, 2.0);
        l.set(2, 1, 0, 2.0);
        assert_eq!(l.argmax().as_raw(), &[0, 2]);
    }

    #[test]
    fn lgt_layout() {
        let mut l = Logits::zeros(2, 1, 6);
        l.set(5, 1, 0, -1.5);
        let bytes = l.to_lgt_bytes();
        assert_eq!(&bytes[..4], b"LGT1");
        assert_eq!(&bytes[4..16], &[2, 0, 0, 0, 1, 0, 0, 0, 6, 0, 0, 0]);
        assert_eq!(bytes.len(), 16 + 12 * 4);
        assert_eq!(&bytes[16 + 11 * 4..], &(-1.5f32).to_le_bytes());
        assert_eq!(Logits::read_lgt(&bytes[..]).unwrap(), l);
    }

    #[test]
    fn lgt_errors() {
        let l = Logits::zeros(2, 2, 6).to_lgt_bytes();
        assert!(matches!(Logits::read_lgt(&l[..l.len() - 1]), Err(LogitsError::Truncated { expected: 96, got: 95 })));
        let mut extra = l.clone();
        extra.push(0);
        assert!(matches!(Logits::read_lgt(&extra[..]), Err(LogitsError::TrailingBytes)));
        assert!(matches!(Logits::read_lgt(&b"LGT2"[..]), Err(LogitsError::BadMagic(_))));
        let mut huge = b"LGT1".to_vec();
        for v in [u32::MAX, u32::MAX, 6] {
            huge.extend_from_slice(&v.to_le_bytes());
        }
        assert!(matches!(Logits::read_lgt(&huge[..]), Err(LogitsError::TooLarge { .. })));
    }

    #[test]
    fn crop_copies_window() {
        let mut l = Logits::zeros(4, 3, 6);
        l.set(3, 2, 1, 7.0);
        let c = l.crop(1, 1, 2, 2);
        assert_eq!(c.get(3, 1, 0), 7.0);
        assert_eq!(c.as_slice().iter().filter(|&&v| v != 0.0).count(), 1);
    }
}
