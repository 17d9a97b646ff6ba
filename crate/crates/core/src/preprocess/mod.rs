//! Glyph normalization: turns an arbitrary captured character image into the
//! 28x28 background-black format, plus augmentation and perturbation
//! operators for synthetic corpus variation.
//!
//! The pipeline: auto-detect polarity so ink is bright on black, find the ink
//! region with an Otsu threshold, crop to the tight bounding box, scale the
//! crop (aspect preserved) so its longer side fills the 24-pixel content box,
//! and center it on a zeroed 28x28 canvas, leaving the 2-pixel frame black.

mod augment;
mod pgm;
mod resize;

pub use augment::{augment, perturb_missing_parts, PerturbedGlyph};
pub use pgm::{read_pgm, read_pgm_bytes, write_pgm};
pub use resize::resize_bicubic;

use crate::error::{Error, Result};

/// Output canvas side.
pub const GLYPH_SIDE: usize = 28;
/// Black border width on every side of the canvas.
pub const GLYPH_BORDER: usize = 2;
/// Longer side of the placed ink region: 28 - 2*2.
pub const GLYPH_CONTENT: usize = GLYPH_SIDE - 2 * GLYPH_BORDER;

/// A captured grayscale glyph of arbitrary size and unknown polarity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawGlyph {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl RawGlyph {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::config(
                "raw_glyph",
                format!("dimensions must be >= 1, got {width}x{height}"),
            ));
        }
        if pixels.len() != width * height {
            return Err(Error::Dimension {
                op: "raw_glyph",
                axis: "pixels",
                expected: width * height,
                got: pixels.len(),
            });
        }
        Ok(RawGlyph {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * self.width + x]
    }

    pub fn crop(&self, rect: Rect) -> RawGlyph {
        debug_assert!(rect.x + rect.w <= self.width && rect.y + rect.h <= self.height);
        let mut pixels = Vec::with_capacity(rect.w * rect.h);
        for y in rect.y..rect.y + rect.h {
            let row = y * self.width + rect.x;
            pixels.extend_from_slice(&self.pixels[row..row + rect.w]);
        }
        RawGlyph {
            width: rect.w,
            height: rect.h,
            pixels,
        }
    }
}

/// A normalized 28x28 glyph: background 0, ink bright, 2-pixel black frame,
/// at least one ink pixel. Construction validates all three.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Glyph28 {
    pixels: Vec<u8>,
}

impl Glyph28 {
    pub fn from_pixels(pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != GLYPH_SIDE * GLYPH_SIDE {
            return Err(Error::Dimension {
                op: "glyph28",
                axis: "pixels",
                expected: GLYPH_SIDE * GLYPH_SIDE,
                got: pixels.len(),
            });
        }
        for y in 0..GLYPH_SIDE {
            for x in 0..GLYPH_SIDE {
                let in_frame = x < GLYPH_BORDER
                    || x >= GLYPH_SIDE - GLYPH_BORDER
                    || y < GLYPH_BORDER
                    || y >= GLYPH_SIDE - GLYPH_BORDER;
                if in_frame && pixels[y * GLYPH_SIDE + x] != 0 {
                    return Err(Error::config(
                        "glyph28",
                        format!(
                            "frame pixel ({x},{y}) is {} but must be 0",
                            pixels[y * GLYPH_SIDE + x]
                        ),
                    ));
                }
            }
        }
        if pixels.iter().all(|&p| p == 0) {
            return Err(Error::config("glyph28", "no ink: all pixels are 0"));
        }
        Ok(Glyph28 { pixels })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.pixels[y * GLYPH_SIDE + x]
    }

    /// Tight bounding box of all pixels > 0. Ink is guaranteed present.
    pub fn ink_bbox(&self) -> Rect {
        foreground_bbox(&self.to_raw(), 0).expect("glyph28 invariant: ink present")
    }

    pub fn to_raw(&self) -> RawGlyph {
        RawGlyph {
            width: GLYPH_SIDE,
            height: GLYPH_SIDE,
            pixels: self.pixels.clone(),
        }
    }
}

/// Axis-aligned rectangle inside a source image.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Rect {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
}

/// Maps the image to the background-black, ink-bright convention: if the
/// median of all border pixels exceeds 127 the image is inverted
/// (`v <- 255 - v`), otherwise passed through unchanged.
pub fn normalize_polarity(raw: &RawGlyph) -> RawGlyph {
    let (w, h) = (raw.width, raw.height);
    let mut border = Vec::with_capacity(2 * (w + h));
    for x in 0..w {
        border.push(raw.get(x, 0));
        if h > 1 {
            border.push(raw.get(x, h - 1));
        }
    }
    for y in 1..h.saturating_sub(1) {
        border.push(raw.get(0, y));
        if w > 1 {
            border.push(raw.get(w - 1, y));
        }
    }
    border.sort_unstable();
    let median = border[border.len() / 2];
    if median > 127 {
        RawGlyph {
            width: w,
            height: h,
            pixels: raw.pixels.iter().map(|&v| 255 - v).collect(),
        }
    } else {
        raw.clone()
    }
}

/// Otsu's method: the threshold t in [0,255) maximizing the between-class
/// variance of the histogram split into {<= t} and {> t}. Ties break to the
/// smallest t, so a constant image yields 0.
pub fn otsu_threshold(gray: &RawGlyph) -> u8 {
    let mut hist = [0u64; 256];
    for &p in &gray.pixels {
        hist[p as usize] += 1;
    }
    let total = gray.pixels.len() as f64;
    let total_sum: f64 = hist
        .iter()
        .enumerate()
        .map(|(v, &n)| v as f64 * n as f64)
        .sum();

    let mut best_t = 0u8;
    let mut best_var = f64::NEG_INFINITY;
    let mut w0 = 0.0;
    let mut sum0 = 0.0;
    for t in 0..255usize {
        w0 += hist[t] as f64;
        sum0 += t as f64 * hist[t] as f64;
        let w1 = total - w0;
        let var = if w0 == 0.0 || w1 == 0.0 {
            0.0
        } else {
            let mu0 = sum0 / w0;
            let mu1 = (total_sum - sum0) / w1;
            w0 * w1 * (mu0 - mu1) * (mu0 - mu1)
        };
        if var > best_var {
            best_var = var;
            best_t = t as u8;
        }
    }
    best_t
}

/// Tightest rectangle containing every pixel strictly above `threshold`.
pub fn foreground_bbox(gray: &RawGlyph, threshold: u8) -> Result<Rect> {
    let (mut min_x, mut min_y) = (usize::MAX, usize::MAX);
    let (mut max_x, mut max_y) = (0usize, 0usize);
    let mut found = false;
    for y in 0..gray.height {
        for x in 0..gray.width {
            if gray.get(x, y) > threshold {
                found = true;
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
            }
        }
    }
    if !found {
        return Err(Error::NoForeground { threshold });
    }
    Ok(Rect {
        x: min_x,
        y: min_y,
        w: max_x - min_x + 1,
        h: max_y - min_y + 1,
    })
}

/// Full normalization: polarity -> Otsu -> bounding box -> crop -> scale the
/// crop so its longer side is 24 (aspect preserved, upscaling allowed) ->
/// center on a zeroed 28x28 canvas with floor offsets.
pub fn preprocess_glyph(raw: &RawGlyph) -> Result<Glyph28> {
    let norm = normalize_polarity(raw);
    let threshold = otsu_threshold(&norm);
    let bbox = foreground_bbox(&norm, threshold)?;
    let crop = norm.crop(bbox);

    let (out_w, out_h) = scaled_dims(crop.width, crop.height, GLYPH_CONTENT);
    let resized = resize_bicubic(&crop, out_w, out_h);

    let mut canvas = vec![0u8; GLYPH_SIDE * GLYPH_SIDE];
    let off_x = (GLYPH_SIDE - out_w) / 2;
    let off_y = (GLYPH_SIDE - out_h) / 2;
    for y in 0..out_h {
        let dst = (off_y + y) * GLYPH_SIDE + off_x;
        canvas[dst..dst + out_w].copy_from_slice(&resized.pixels()[y * out_w..(y + 1) * out_w]);
    }
    if canvas.iter().all(|&p| p == 0) {
        return Err(Error::Internal(
            "preprocess_glyph: resampling lost all ink".into(),
        ));
    }
    Glyph28::from_pixels(canvas)
}

/// Aspect-preserving dimensions with the longer side scaled to `long`.
fn scaled_dims(w: usize, h: usize, long: usize) -> (usize, usize) {
    if w >= h {
        let out_h = ((h as f64 * long as f64 / w as f64).round() as usize).max(1);
        (long, out_h)
    } else {
        let out_w = ((w as f64 * long as f64 / h as f64).round() as usize).max(1);
        (out_w, long)
    }
}
