//! Binary PGM (P5) reader/writer, the input codec for captured glyphs.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

use super::RawGlyph;

pub fn read_pgm(path: &Path) -> Result<RawGlyph> {
    let bytes = fs::read(path).map_err(|e| Error::ImageFormat {
        path: path.to_path_buf(),
        msg: e.to_string(),
    })?;
    read_pgm_bytes(&bytes).map_err(|e| match e {
        Error::ImageFormat { msg, .. } => Error::ImageFormat {
            path: path.to_path_buf(),
            msg,
        },
        other => other,
    })
}

/// Parses a binary PGM. Header tokens may be separated by any whitespace and
/// `#` comments; maxval must be <= 255 (8-bit only).
pub fn read_pgm_bytes(bytes: &[u8]) -> Result<RawGlyph> {
    let fail = |msg: &str| Error::ImageFormat {
        path: "<bytes>".into(),
        msg: msg.to_string(),
    };
    if bytes.len() < 2 || &bytes[0..2] != b"P5" {
        return Err(fail("not a binary PGM (missing P5 magic)"));
    }
    let mut pos = 2usize;
    let mut fields = [0usize; 3]; // width, height, maxval
    for field in &mut fields {
        // Skip whitespace and comment lines.
        loop {
            while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
                pos += 1;
            }
            if pos < bytes.len() && bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == start {
            return Err(fail("truncated or malformed PGM header"));
        }
        let text = std::str::from_utf8(&bytes[start..pos]).expect("ascii digits");
        *field = text.parse().map_err(|_| fail("header value out of range"))?;
    }
    let [width, height, maxval] = fields;
    if maxval == 0 || maxval > 255 {
        return Err(fail(&format!("unsupported maxval {maxval} (8-bit only)")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(fail("missing separator before pixel data"));
    }
    pos += 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| fail("image dimensions overflow"))?;
    if bytes.len() < pos + need {
        return Err(fail(&format!(
            "pixel data truncated: need {need} bytes, have {}",
            bytes.len() - pos
        )));
    }
    RawGlyph::new(width, height, bytes[pos..pos + need].to_vec())
}

pub fn write_pgm(path: &Path, glyph: &RawGlyph) -> Result<()> {
    let mut out = Vec::with_capacity(20 + glyph.pixels().len());
    write!(out, "P5\n{} {}\n255\n", glyph.width(), glyph.height())?;
    out.extend_from_slice(glyph.pixels());
    fs::write(path, out)?;
    Ok(())
}
