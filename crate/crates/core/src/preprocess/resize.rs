//! Bicubic resampling with the Catmull-Rom kernel (a = -0.5).

use super::RawGlyph;

/// Catmull-Rom cubic convolution weight at distance `x` (a = -0.5).
fn cubic_weight(x: f64) -> f64 {
    let x = x.abs();
    if x < 1.0 {
        (1.5 * x - 2.5) * x * x + 1.0
    } else if x < 2.0 {
        ((-0.5 * x + 2.5) * x - 4.0) * x + 2.0
    } else {
        0.0
    }
}

/// Resamples to `out_w` x `out_h` using cubic convolution with a = -0.5,
/// pixel-center alignment, and edge-clamped taps. Results are accumulated in
/// f64, clamped to [0,255], and rounded to the nearest integer. When the
/// output size equals the input size this is an exact identity.
pub fn resize_bicubic(src: &RawGlyph, out_w: usize, out_h: usize) -> RawGlyph {
    assert!(out_w >= 1 && out_h >= 1, "output dims must be >= 1");
    let (in_w, in_h) = (src.width(), src.height());
    let scale_x = in_w as f64 / out_w as f64;
    let scale_y = in_h as f64 / out_h as f64;

    let mut out = vec![0u8; out_w * out_h];
    for oy in 0..out_h {
        let sy = (oy as f64 + 0.5) * scale_y - 0.5;
        let by = sy.floor();
        let fy = sy - by;
        let wy = [
            cubic_weight(fy + 1.0),
            cubic_weight(fy),
            cubic_weight(1.0 - fy),
            cubic_weight(2.0 - fy),
        ];
        for ox in 0..out_w {
            let sx = (ox as f64 + 0.5) * scale_x - 0.5;
            let bx = sx.floor();
            let fx = sx - bx;
            let wx = [
                cubic_weight(fx + 1.0),
                cubic_weight(fx),
                cubic_weight(1.0 - fx),
                cubic_weight(2.0 - fx),
            ];
            let mut acc = 0.0f64;
            for (j, wyv) in wy.iter().enumerate() {
                let ty = (by as isize + j as isize - 1).clamp(0, in_h as isize - 1) as usize;
                for (i, wxv) in wx.iter().enumerate() {
                    let tx = (bx as isize + i as isize - 1).clamp(0, in_w as isize - 1) as usize;
                    acc += wyv * wxv * src.get(tx, ty) as f64;
                }
            }
            out[oy * out_w + ox] = acc.round().clamp(0.0, 255.0) as u8;
        }
    }
    RawGlyph::new(out_w, out_h, out).expect("dims validated above")
}
