//! Binary PGM (P5) and PPM (P6) reading and writing, 8 and 16 bit.
//!
//! A sample `v` with maxval `m` decodes to `v / m`. Encoding clamps to
//! `[0, 1]` and rounds to the nearest level; 16-bit samples are big-endian.

use std::path::Path;

use crate::error::{Error, PnmError, Result};
use crate::image::{ImageBuffer, Shape};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BitDepth {
    #[default]
    Eight,
    Sixteen,
}

impl BitDepth {
    pub fn maxval(self) -> u16 {
        match self {
            BitDepth::Eight => 255,
            BitDepth::Sixteen => 65535,
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn skip_ws_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b' ' | b'\t' | b'\n' | b'\r' | 0x0b | 0x0c => self.pos += 1,
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                _ => break,
            }
        }
    }

    fn header_uint(&mut self, field: &str) -> Result<u32, PnmError> {
        self.skip_ws_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::MalformedHeader(format!("missing {field}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| PnmError::MalformedHeader(format!("{field} out of range")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<ImageBuffer, PnmError> {
    if bytes.len() < 2 {
        return Err(PnmError::MalformedHeader("file too short for magic number".into()));
    }
    let channels = match &bytes[..2] {
        b"P5" => 1,
        b"P6" => 3,
        other => {
            return Err(PnmError::UnsupportedMagic(
                String::from_utf8_lossy(other).into_owned(),
            ))
        }
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let width = cur.header_uint("width")? as usize;
    let height = cur.header_uint("height")? as usize;
    let maxval = cur.header_uint("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::MalformedHeader("zero image dimension".into()));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PnmError::MalformedHeader(format!("maxval {maxval} not in 1..=65535")));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(PnmError::MalformedHeader("no whitespace after maxval".into())),
    }

    let bytes_per_sample = if maxval < 256 { 1 } else { 2 };
    let shape = Shape::new(height, width, channels);
    let expected = shape.len() * bytes_per_sample;
    let payload = &bytes[cur.pos..];
    if payload.len() < expected {
        return Err(PnmError::Truncated {
            expected,
            found: payload.len(),
        });
    }
    let scale = 1.0 / f64::from(maxval);
    let data = if bytes_per_sample == 1 {
        payload[..expected].iter().map(|&b| f64::from(b) * scale).collect()
    } else {
        payload[..expected]
            .chunks_exact(2)
            .map(|p| f64::from(u16::from_be_bytes([p[0], p[1]])) * scale)
            .collect()
    };
    Ok(ImageBuffer::from_vec(shape, data).expect("length checked above"))
}

pub fn encode(img: &ImageBuffer, depth: BitDepth) -> Result<Vec<u8>> {
    let magic = match img.channels() {
        1 => "P5",
        3 => "P6",
        c => {
            return Err(Error::InvalidArgument(format!(
                "PNM output needs 1 or 3 channels, image has {c}"
            )))
        }
    };
    let maxval = depth.maxval();
    let mut out = format!("{magic}\n{} {}\n{maxval}\n", img.width(), img.height()).into_bytes();
    let m = f64::from(maxval);
    for &v in img.as_slice() {
        let q = (v.clamp(0.0, 1.0) * m).round() as u16;
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&q.to_be_bytes()),
        }
    }
    Ok(out)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<ImageBuffer> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode(&bytes)?)
}

pub fn write_image(path: impl AsRef<Path>, img: &ImageBuffer, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(img, depth)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
