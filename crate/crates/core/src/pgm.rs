//! PGM (netpbm graymap) reading and writing.
//!
//! The reader accepts plain (`P2`) and raw (`P5`) graymaps with 8-bit samples
//! and `#` comments anywhere whitespace is allowed in the header. The writer
//! always emits the canonical form
//!
//! ```text
//! P5\n<width> <height>\n<maxval>\n<raster>
//! ```
//!
//! with an unpadded raster, or for `P2` one scanline per line with samples
//! separated by single spaces. Samples are stored as-is; a `maxval` below
//! 255 never rescales.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::image::{GrayImage, ImageError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PgmFormat {
    /// Plain (ASCII) samples.
    P2,
    /// Raw (binary) samples.
    P5,
}

impl fmt::Display for PgmFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PgmFormat::P2 => "P2",
            PgmFormat::P5 => "P5",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PgmVariant {
    pub format: PgmFormat,
    maxval: u8,
}

impl PgmVariant {
    pub const P2: PgmVariant = PgmVariant {
        format: PgmFormat::P2,
        maxval: 255,
    };
    pub const P5: PgmVariant = PgmVariant {
        format: PgmFormat::P5,
        maxval: 255,
    };

    /// Fails for `maxval == 0`.
    pub fn new(format: PgmFormat, maxval: u8) -> Result<Self, PgmError> {
        if maxval == 0 {
            return Err(PgmError::MaxvalOutOfRange { offset: 0, maxval: 0 });
        }
        Ok(PgmVariant { format, maxval })
    }

    pub fn maxval(&self) -> u8 {
        self.maxval
    }
}

impl Default for PgmVariant {
    fn default() -> Self {
        PgmVariant::P5
    }
}

#[derive(Debug, Error)]
pub enum PgmError {
    #[error("byte {offset}: not a P2 or P5 graymap")]
    BadMagic { offset: usize },
    #[error("byte {offset}: malformed header ({reason})")]
    BadHeader { offset: usize, reason: &'static str },
    #[error("byte {offset}: maxval {maxval} outside 1..=255")]
    MaxvalOutOfRange { offset: usize, maxval: u64 },
    #[error("byte {offset}: raster truncated, expected {expected} samples, found {found}")]
    Truncated {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("byte {offset}: malformed sample")]
    BadSample { offset: usize },
    #[error("byte {offset}: sample {value} exceeds maxval {maxval}")]
    SampleOutOfRange { offset: usize, value: u64, maxval: u8 },
    #[error("byte {offset}: unexpected data after raster")]
    TrailingData { offset: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PgmError {
    /// Byte offset of a parse error, `None` for I/O failures.
    pub fn offset(&self) -> Option<usize> {
        match *self {
            PgmError::BadMagic { offset }
            | PgmError::BadHeader { offset, .. }
            | PgmError::MaxvalOutOfRange { offset, .. }
            | PgmError::Truncated { offset, .. }
            | PgmError::BadSample { offset }
            | PgmError::SampleOutOfRange { offset, .. }
            | PgmError::TrailingData { offset } => Some(offset),
            PgmError::Image(_) | PgmError::Io(_) => None,
        }
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    /// Skips whitespace and comments; returns whether anything was skipped.
    fn skip_separators(&mut self) -> bool {
        let start = self.pos;
        while let Some(b) = self.peek() {
            if b.is_ascii_whitespace() {
                self.pos += 1;
            } else if b == b'#' {
                while let Some(c) = self.peek() {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else {
                break;
            }
        }
        self.pos > start
    }

    /// Parses a decimal number terminated by whitespace, `#` or end of input.
    fn number(&mut self) -> Option<u64> {
        let start = self.pos;
        let mut value: u64 = 0;
        while let Some(b) = self.peek().filter(u8::is_ascii_digit) {
            value = value.saturating_mul(10).saturating_add(u64::from(b - b'0'));
            self.pos += 1;
        }
        let terminated = matches!(self.peek(), None | Some(b'#')) || self.peek().is_some_and(|b| b.is_ascii_whitespace());
        (self.pos > start && terminated).then_some(value)
    }

    fn header_field(&mut self, reason: &'static str) -> Result<u64, PgmError> {
        if !self.skip_separators() {
            return Err(PgmError::BadHeader { offset: self.pos, reason });
        }
        let offset = self.pos;
        self.number().ok_or(PgmError::BadHeader { offset, reason })
    }
}

/// Parses a P2 or P5 graymap.
pub fn read_pgm(bytes: &[u8]) -> Result<GrayImage, PgmError> {
    read_pgm_variant(bytes).map(|(img, _)| img)
}

/// Parses a graymap and reports the format and maxval it was stored with.
pub fn read_pgm_variant(bytes: &[u8]) -> Result<(GrayImage, PgmVariant), PgmError> {
    let format = match bytes.get(..2) {
        Some(b"P2") => PgmFormat::P2,
        Some(b"P5") => PgmFormat::P5,
        _ => return Err(PgmError::BadMagic { offset: 0 }),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    if cur.peek().is_some_and(|b| !b.is_ascii_whitespace() && b != b'#') {
        return Err(PgmError::BadMagic { offset: 2 });
    }
    let width = cur.header_field("expected width")?;
    let height = cur.header_field("expected height")?;
    if width == 0 || height == 0 {
        return Err(PgmError::BadHeader {
            offset: cur.pos,
            reason: "zero dimension",
        });
    }
    let maxval_at = {
        if !cur.skip_separators() {
            return Err(PgmError::BadHeader {
                offset: cur.pos,
                reason: "expected maxval",
            });
        }
        cur.pos
    };
    let maxval = cur.number().ok_or(PgmError::BadHeader {
        offset: maxval_at,
        reason: "expected maxval",
    })?;
    if !(1..=255).contains(&maxval) {
        return Err(PgmError::MaxvalOutOfRange {
            offset: maxval_at,
            maxval,
        });
    }
    let maxval = maxval as u8;
    let (w, h) = (usize::try_from(width), usize::try_from(height));
    let (Ok(w), Ok(h)) = (w, h) else {
        return Err(PgmError::BadHeader {
            offset: maxval_at,
            reason: "dimensions too large",
        });
    };
    let Some(count) = w.checked_mul(h) else {
        return Err(PgmError::BadHeader {
            offset: maxval_at,
            reason: "dimensions too large",
        });
    };

    let data = match format {
        PgmFormat::P5 => {
            match cur.peek() {
                Some(b) if b.is_ascii_whitespace() => cur.pos += 1,
                _ => {
                    return Err(PgmError::BadHeader {
                        offset: cur.pos,
                        reason: "expected single whitespace after maxval",
                    })
                }
            }
            let raster = &bytes[cur.pos..];
            if raster.len() < count {
                return Err(PgmError::Truncated {
                    offset: bytes.len(),
                    expected: count,
                    found: raster.len(),
                });
            }
            if raster.len() > count {
                return Err(PgmError::TrailingData {
                    offset: cur.pos + count,
                });
            }
            if let Some(i) = raster.iter().position(|&v| v > maxval) {
                return Err(PgmError::SampleOutOfRange {
                    offset: cur.pos + i,
                    value: u64::from(raster[i]),
                    maxval,
                });
            }
            raster.to_vec()
        }
        PgmFormat::P2 => {
            let mut data = Vec::with_capacity(count.min(1 << 24));
            while data.len() < count {
                cur.skip_separators();
                let offset = cur.pos;
                if cur.peek().is_none() {
                    return Err(PgmError::Truncated {
                        offset,
                        expected: count,
                        found: data.len(),
                    });
                }
                let value = cur.number().ok_or(PgmError::BadSample { offset })?;
                if value > u64::from(maxval) {
                    return Err(PgmError::SampleOutOfRange {
                        offset,
                        value,
                        maxval,
                    });
                }
                data.push(value as u8);
            }
            cur.skip_separators();
            if cur.peek().is_some() {
                return Err(PgmError::TrailingData { offset: cur.pos });
            }
            data
        }
    };
    let img = GrayImage::new(w, h, data)?;
    Ok((img, PgmVariant { format, maxval }))
}

/// Canonical encoding of `img`. The header's maxval is raised to the image
/// maximum if the variant's is lower.
pub fn write_pgm(img: &GrayImage, variant: PgmVariant) -> Vec<u8> {
    let maxval = variant.maxval.max(img.max_value());
    let mut out = format!("{}\n{} {}\n{}\n", variant.format, img.width(), img.height(), maxval).into_bytes();
    match variant.format {
        PgmFormat::P5 => out.extend_from_slice(img.as_slice()),
        PgmFormat::P2 => {
            for row in img.as_slice().chunks(img.width()) {
                let line: Vec<String> = row.iter().map(u8::to_string).collect();
                out.extend_from_slice(line.join(" ").as_bytes());
                out.push(b'\n');
            }
        }
    }
    out
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage, PgmError> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    read_pgm(&bytes)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage, variant: PgmVariant) -> Result<(), PgmError> {
    std::fs::File::create(path)?.write_all(&write_pgm(img, variant))?;
    Ok(())
}
