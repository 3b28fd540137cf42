//! Binary stdio framing between the inference driver and an external
//! backend process. All integers are little-endian.
//!
//! | frame    | layout                                                        |
//! |----------|---------------------------------------------------------------|
//! | hello    | `SGH1` u8 flags (bit 0: concurrent-safe)                      |
//! | request  | `SGT1` u32 w, u32 h, u8 channels = 3, w·h·3 bytes RGB8         |
//! | response | `SGL1` u32 w, u32 h, u32 classes = 6, classes·h·w f32 logits   |
//! | error    | `SGE1` u32 len, len bytes UTF-8                               |

use std::io::{Read, Write};

use image::RgbImage;
use thiserror::Error;

use crate::logits::{read_up_to, Logits};
use crate::NUM_CLASSES;

pub const HELLO_MAGIC: &[u8; 4] = b"SGH1";
pub const REQUEST_MAGIC: &[u8; 4] = b"SGT1";
pub const RESPONSE_MAGIC: &[u8; 4] = b"SGL1";
pub const ERROR_MAGIC: &[u8; 4] = b"SGE1";

pub const FLAG_CONCURRENT: u8 = 1;
/// Largest tile side accepted in either direction.
pub const MAX_SIDE: u32 = 16_384;
pub const MAX_MESSAGE_BYTES: u32 = 1 << 20;

#[derive(Debug, Error)]
pub enum WireError {
    #[error("unknown frame magic {found:?} at byte {offset}")]
    BadMagic { offset: u64, found: [u8; 4] },
    #[error("truncated {field} at byte {offset}: expected {expected} bytes, received {received}")]
    Truncated { offset: u64, field: &'static str, expected: u64, received: u64 },
    #[error("invalid {field} {value} at byte {offset}")]
    InvalidField { offset: u64, field: &'static str, value: u64 },
    #[error("error message at byte {offset} is not valid UTF-8")]
    Utf8 { offset: u64 },
    #[error("stream ended before a frame")]
    Eof,
    #[error("unexpected {kind} frame ending at byte {offset}")]
    UnexpectedFrame { offset: u64, kind: &'static str },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Hello { flags: u8 },
    Request { width: u32, height: u32, rgb: Vec<u8> },
    Response(Logits),
    Error(String),
}

impl Frame {
    pub fn request(tile: &RgbImage) -> Frame {
        Frame::Request { width: tile.width(), height: tile.height(), rgb: tile.as_raw().clone() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Frame::Hello { .. } => "hello",
            Frame::Request { .. } => "request",
            Frame::Response(_) => "response",
            Frame::Error(_) => "error",
        }
    }
}

pub fn encode(frame: &Frame) -> Vec<u8> {
    let mut out = Vec::new();
    match frame {
        Frame::Hello { flags } => {
            out.extend_from_slice(HELLO_MAGIC);
            out.push(*flags);
        }
        Frame::Request { width, height, rgb } => {
            out.reserve(13 + rgb.len());
            out.extend_from_slice(REQUEST_MAGIC);
            out.extend_from_slice(&width.to_le_bytes());
            out.extend_from_slice(&height.to_le_bytes());
            out.push(3);
            out.extend_from_slice(rgb);
        }
        Frame::Response(l) => {
            out.reserve(16 + l.as_slice().len() * 4);
            out.extend_from_slice(RESPONSE_MAGIC);
            for v in [l.width(), l.height(), l.classes()] {
                out.extend_from_slice(&v.to_le_bytes());
            }
            for v in l.as_slice() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Frame::Error(msg) => {
            out.extend_from_slice(ERROR_MAGIC);
            out.extend_from_slice(&(msg.len() as u32).to_le_bytes());
            out.extend_from_slice(msg.as_bytes());
        }
    }
    out
}

pub fn write_frame(mut w: impl Write, frame: &Frame) -> std::io::Result<()> {
    w.write_all(&encode(frame))?;
    w.flush()
}

/// Decodes one frame from the front of `bytes`, returning it with the
/// number of bytes consumed.
pub fn decode(bytes: &[u8]) -> Result<(Frame, usize), WireError> {
    let mut r = FrameReader::new(bytes);
    let frame = r.read_frame()?.ok_or(WireError::Eof)?;
    Ok((frame, r.offset() as usize))
}

/// Reads consecutive frames while tracking the absolute stream offset.
pub struct FrameReader<R> {
    inner: R,
    offset: u64,
}

impl<R: Read> FrameReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner, offset: 0 }
    }

    pub fn offset(&self) -> u64 {
        self.offset
    }

    fn exact(&mut self, n: usize, field: &'static str) -> Result<Vec<u8>, WireError> {
        let at = self.offset;
        let mut buf = Vec::with_capacity(n.min(1 << 24));
        let got = (&mut self.inner).take(n as u64).read_to_end(&mut buf)?;
        self.offset += got as u64;
        if got != n {
            return Err(WireError::Truncated { offset: at, field, expected: n as u64, received: got as u64 });
        }
        Ok(buf)
    }

    fn u32(&mut self, field: &'static str) -> Result<u32, WireError> {
        let b = self.exact(4, field)?;
        Ok(u32::from_le_bytes(b.try_into().expect("4 bytes")))
    }

    fn side(&mut self, field: &'static str) -> Result<u32, WireError> {
        let at = self.offset;
        let v = self.u32(field)?;
        if v == 0 || v > MAX_SIDE {
            return Err(WireError::InvalidField { offset: at, field, value: v as u64 });
        }
        Ok(v)
    }

    /// `Ok(None)` on a clean end of stream at a frame boundary.
    pub fn read_frame(&mut self) -> Result<Option<Frame>, WireError> {
        let start = self.offset;
        let mut magic = [0u8; 4];
        let got = read_up_to(&mut self.inner, &mut magic)?;
        self.offset += got as u64;
        if got == 0 {
            return Ok(None);
        }
        if got < 4 {
            return Err(WireError::Truncated { offset: start, field: "magic", expected: 4, received: got as u64 });
        }
        let frame = match &magic {
            HELLO_MAGIC => Frame::Hello { flags: self.exact(1, "hello flags")?[0] },
            REQUEST_MAGIC => {
                let width = self.side("request width")?;
                let height = self.side("request height")?;
                let at = self.offset;
                let channels = self.exact(1, "request channels")?[0];
                if channels != 3 {
                    return Err(WireError::InvalidField { offset: at, field: "channels", value: channels as u64 });
                }
                let rgb = self.exact(width as usize * height as usize * 3, "request payload")?;
                Frame::Request { width, height, rgb }
            }
            RESPONSE_MAGIC => {
                let width = self.side("response width")?;
                let height = self.side("response height")?;
                let at = self.offset;
                let classes = self.u32("response classes")?;
                if classes as usize != NUM_CLASSES {
                    return Err(WireError::InvalidField { offset: at, field: "classes", value: classes as u64 });
                }
                let n = width as usize * height as usize * NUM_CLASSES;
                let raw = self.exact(n * 4, "response payload")?;
                let data = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes"))).collect();
                Frame::Response(Logits::new(width, height, classes, data).expect("length checked"))
            }
            ERROR_MAGIC => {
                let at = self.offset;
                let len = self.u32("error length")?;
                if len > MAX_MESSAGE_BYTES {
                    return Err(WireError::InvalidField { offset: at, field: "error length", value: len as u64 });
                }
                let at = self.offset;
                let bytes = self.exact(len as usize, "error message")?;
                Frame::Error(String::from_utf8(bytes).map_err(|_| WireError::Utf8 { offset: at })?)
            }
            _ => return Err(WireError::BadMagic { offset: start, found: magic }),
        };
        Ok(Some(frame))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_layout() {
        let f = Frame::Request { width: 2, height: 1, rgb: vec![1, 2, 3, 4, 5, 6] };
        let b = encode(&f);
        assert_eq!(b, [b"SGT1".as_slice(), &[2, 0, 0, 0, 1, 0, 0, 0, 3], &[1, 2, 3, 4, 5, 6]].concat());
        assert_eq!(decode(&b).unwrap(), (f, b.len()));
    }

    #[test]
    fn error_and_hello_layout() {
        assert_eq!(encode(&Frame::Hello { flags: 1 }), b"SGH1\x01");
        let b = encode(&Frame::Error("nö".into()));
        assert_eq!(b, [b"SGE1".as_slice(), &[3, 0, 0, 0], "nö".as_bytes()].concat());
    }

    #[test]
    fn truncated_response_reports_counts() {
        let b = encode(&Frame::Response(Logits::zeros(2, 2, 6)));
        let err = decode(&b[..b.len() - 10]).unwrap_err();
        match err {
            WireError::Truncated { offset, field, expected, received } => {
                assert_eq!((offset, field, expected, received), (16, "response payload", 96, 86));
            }
            e => panic!("unexpected {e:?}"),
        }
        assert!(err_text(&b[..b.len() - 10]).contains("expected 96 bytes, received 86"));
    }

    fn err_text(b: &[u8]) -> String {
        decode(b).unwrap_err().to_string()
    }

    #[test]
    fn rejects_bad_fields() {
        let mut b = encode(&Frame::Request { width: 1, height: 1, rgb: vec![0; 3] });
        b[12] = 4;
        assert!(matches!(decode(&b), Err(WireError::InvalidField { offset: 12, field: "channels", value: 4 })));
        assert!(matches!(decode(b"XXXX"), Err(WireError::BadMagic { offset: 0, .. })));
        assert!(matches!(decode(b"SG"), Err(WireError::Truncated { field: "magic", .. })));
        assert!(matches!(decode(b""), Err(WireError::Eof)));
        let mut r = encode(&Frame::Response(Logits::zeros(1, 1, 6)));
        r[12] = 5;
        assert!(matches!(decode(&r), Err(WireError::InvalidField { field: "classes", .. })));
    }

    #[test]
    fn reader_tracks_offsets_across_frames() {
        let mut stream = encode(&Frame::Hello { flags: 0 });
        stream.extend(encode(&Frame::Error("x".into())));
        stream.extend_from_slice(b"BAD!");
        let mut r = FrameReader::new(&stream[..]);
        assert_eq!(r.read_frame().unwrap(), Some(Frame::Hello { flags: 0 }));
        assert_eq!(r.read_frame().unwrap(), Some(Frame::Error("x".into())));
        assert!(matches!(r.read_frame(), Err(WireError::BadMagic { offset: 14, .. })));
    }
}
