//! Seeded augmentation (shift + rescale) and missing-parts perturbation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

use super::{resize_bicubic, Glyph28, GLYPH_BORDER, GLYPH_CONTENT, GLYPH_SIDE};

/// Random integer translation in [-max_shift, max_shift]^2 and uniform
/// rescale in `scale_range`, re-placed through the preprocessing placement
/// rules so all Glyph28 invariants still hold. Pure function of
/// (glyph, seed): the same seed always yields the same output.
///
/// With `max_shift = 0` and `scale_range = (1.0, 1.0)` this is the identity.
pub fn augment(
    glyph: &Glyph28,
    rng_seed: u64,
    max_shift: u32,
    scale_range: (f64, f64),
) -> Result<Glyph28> {
    let (lo, hi) = scale_range;
    if !(lo > 0.0 && hi >= lo && lo.is_finite() && hi.is_finite()) {
        return Err(Error::config(
            "augment",
            format!("scale_range must satisfy 0 < lo <= hi, got ({lo}, {hi})"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let scale = rng.gen_range(lo..=hi);
    let shift = max_shift as i64;
    let dx = rng.gen_range(-shift..=shift);
    let dy = rng.gen_range(-shift..=shift);

    let bbox = glyph.ink_bbox();
    let crop = glyph.to_raw().crop(bbox);

    let new_w = ((bbox.w as f64 * scale).round() as usize).clamp(1, GLYPH_CONTENT);
    let new_h = ((bbox.h as f64 * scale).round() as usize).clamp(1, GLYPH_CONTENT);
    // Identity scaling resamples to the same size, which is exact.
    let resized = resize_bicubic(&crop, new_w, new_h);

    // Keep the ink centered where it was, adjust for the size change, apply
    // the shift, then clamp so the 2-pixel frame stays black.
    let lo_x = GLYPH_BORDER as i64;
    let hi_x = (GLYPH_SIDE - GLYPH_BORDER - new_w) as i64;
    let lo_y = GLYPH_BORDER as i64;
    let hi_y = (GLYPH_SIDE - GLYPH_BORDER - new_h) as i64;
    let x = (bbox.x as i64 + (bbox.w as i64 - new_w as i64).div_euclid(2) + dx).clamp(lo_x, hi_x);
    let y = (bbox.y as i64 + (bbox.h as i64 - new_h as i64).div_euclid(2) + dy).clamp(lo_y, hi_y);

    let mut canvas = vec![0u8; GLYPH_SIDE * GLYPH_SIDE];
    for row in 0..new_h {
        let dst = (y as usize + row) * GLYPH_SIDE + x as usize;
        canvas[dst..dst + new_w].copy_from_slice(&resized.pixels()[row * new_w..(row + 1) * new_w]);
    }
    if canvas.iter().all(|&p| p == 0) {
        return Err(Error::Internal("augment: resampling lost all ink".into()));
    }
    Glyph28::from_pixels(canvas)
}

/// Result of [`perturb_missing_parts`]: the perturbed pixels plus a flag for
/// the boundary case where the erasure removed every ink pixel (which would
/// violate the Glyph28 ink invariant).
#[derive(Clone, Debug)]
pub struct PerturbedGlyph {
    pixels: Vec<u8>,
    degenerate: bool,
}

impl PerturbedGlyph {
    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    /// True when no ink survived the erasure.
    pub fn is_degenerate(&self) -> bool {
        self.degenerate
    }

    /// Converts back to a validated glyph; fails when degenerate.
    pub fn into_glyph(self) -> Result<Glyph28> {
        Glyph28::from_pixels(self.pixels)
    }
}

/// Simulates characters with missing parts: zeroes a random rectangle whose
/// area is about `fraction` of the ink bounding box, positioned inside that
/// box. Deterministic given the seed.
pub fn perturb_missing_parts(
    glyph: &Glyph28,
    fraction: f64,
    rng_seed: u64,
) -> Result<PerturbedGlyph> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::config(
            "perturb_missing_parts",
            format!("fraction must be in [0, 1], got {fraction}"),
        ));
    }
    let bbox = glyph.ink_bbox();
    let side = fraction.sqrt();
    let rw = ((bbox.w as f64 * side).round() as usize).min(bbox.w);
    let rh = ((bbox.h as f64 * side).round() as usize).min(bbox.h);

    let mut pixels = glyph.pixels().to_vec();
    if rw > 0 && rh > 0 {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let rx = bbox.x + rng.gen_range(0..=bbox.w - rw);
        let ry = bbox.y + rng.gen_range(0..=bbox.h - rh);
        for y in ry..ry + rh {
            for p in &mut pixels[y * GLYPH_SIDE + rx..y * GLYPH_SIDE + rx + rw] {
                *p = 0;
            }
        }
    }
    let degenerate = pixels.iter().all(|&p| p == 0);
    Ok(PerturbedGlyph { pixels, degenerate })
}
