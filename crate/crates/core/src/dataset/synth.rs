//! Procedural synthetic corpus: a fixed stroke skeleton per class, per-writer
//! style variation (stroke width, slant, control-point jitter), rasterized
//! and run through the real preprocessing pipeline.
//!
//! The skeletons gesture at the Tifinagh letterforms (circles, bars, arcs,
//! crossings) but make no fidelity claim; they exist to give the pipeline a
//! 33-class writer-structured problem of the right shape.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::{preprocess_glyph, RawGlyph, GLYPH_CONTENT};

use super::{Corpus, Example, LabelRegistry};

#[derive(Clone, Copy)]
enum Stroke {
    /// Straight segment in unit coordinates.
    Seg(f64, f64, f64, f64),
    /// Open polyline through the listed vertices.
    Poly(&'static [(f64, f64)]),
    /// Circular arc, degrees measured with y pointing down.
    Arc {
        cx: f64,
        cy: f64,
        r: f64,
        deg0: f64,
        deg1: f64,
    },
}

use Stroke::{Arc, Poly, Seg};

const M_SHAPE: &[(f64, f64)] = &[(0.2, 0.9), (0.2, 0.15), (0.5, 0.6), (0.8, 0.15), (0.8, 0.9)];
const W_SHAPE: &[(f64, f64)] = &[(0.14, 0.12), (0.32, 0.88), (0.5, 0.35), (0.68, 0.88), (0.86, 0.12)];
const SQUARE: &[(f64, f64)] = &[(0.2, 0.2), (0.8, 0.2), (0.8, 0.8), (0.2, 0.8), (0.2, 0.2)];
const DIAMOND: &[(f64, f64)] = &[(0.5, 0.1), (0.88, 0.5), (0.5, 0.9), (0.12, 0.5), (0.5, 0.1)];

fn circle(cx: f64, cy: f64, r: f64) -> Stroke {
    Arc {
        cx,
        cy,
        r,
        deg0: 0.0,
        deg1: 360.0,
    }
}

/// One skeleton per registry index, in registry order.
fn skeleton(class: usize) -> Vec<Stroke> {
    match class {
        // ya: the small circle
        0 => vec![circle(0.5, 0.5, 0.30)],
        // yab: circle with a stem below
        1 => vec![circle(0.5, 0.38, 0.20), Seg(0.5, 0.58, 0.5, 0.92)],
        // yag: two verticals under a top bar
        2 => vec![
            Seg(0.25, 0.15, 0.25, 0.9),
            Seg(0.75, 0.15, 0.75, 0.9),
            Seg(0.25, 0.15, 0.75, 0.15),
        ],
        // yagw: yag plus the labialization dot
        3 => {
            let mut s = skeleton(2);
            s.push(circle(0.5, 0.55, 0.10));
            s
        }
        // yad: open arc, gap to the right
        4 => vec![Arc {
            cx: 0.5,
            cy: 0.5,
            r: 0.35,
            deg0: 60.0,
            deg1: 300.0,
        }],
        // yadd: E
        5 => vec![
            Seg(0.3, 0.12, 0.3, 0.88),
            Seg(0.3, 0.12, 0.78, 0.12),
            Seg(0.3, 0.5, 0.72, 0.5),
            Seg(0.3, 0.88, 0.78, 0.88),
        ],
        // yey: I-beam
        6 => vec![
            Seg(0.2, 0.15, 0.8, 0.15),
            Seg(0.2, 0.85, 0.8, 0.85),
            Seg(0.5, 0.15, 0.5, 0.85),
        ],
        // yaf: three verticals on a base bar
        7 => vec![
            Seg(0.2, 0.12, 0.2, 0.88),
            Seg(0.5, 0.12, 0.5, 0.88),
            Seg(0.8, 0.12, 0.8, 0.88),
            Seg(0.2, 0.88, 0.8, 0.88),
        ],
        // yak: Y
        8 => vec![
            Seg(0.5, 0.5, 0.5, 0.92),
            Seg(0.5, 0.5, 0.22, 0.12),
            Seg(0.5, 0.5, 0.78, 0.12),
        ],
        // yakw: Y plus the labialization dot
        9 => {
            let mut s = skeleton(8);
            s.push(circle(0.76, 0.74, 0.10));
            s
        }
        // yah: two stacked circles
        10 => vec![circle(0.5, 0.3, 0.185), circle(0.5, 0.7, 0.185)],
        // yahh: square
        11 => vec![Poly(SQUARE)],
        // yaa: two right-opening bulges, like a 3
        12 => vec![
            Arc {
                cx: 0.45,
                cy: 0.3,
                r: 0.2,
                deg0: -100.0,
                deg1: 100.0,
            },
            Arc {
                cx: 0.45,
                cy: 0.7,
                r: 0.2,
                deg0: -100.0,
                deg1: 100.0,
            },
        ],
        // yakh: X
        13 => vec![Seg(0.2, 0.15, 0.8, 0.85), Seg(0.8, 0.15, 0.2, 0.85)],
        // yaq: stem over a circle
        14 => vec![Seg(0.5, 0.08, 0.5, 0.45), circle(0.5, 0.68, 0.22)],
        // yi: bottom bar with a center stem
        15 => vec![Seg(0.2, 0.85, 0.8, 0.85), Seg(0.5, 0.15, 0.5, 0.85)],
        // yazh: H
        16 => vec![
            Seg(0.25, 0.12, 0.25, 0.88),
            Seg(0.75, 0.12, 0.75, 0.88),
            Seg(0.25, 0.5, 0.75, 0.5),
        ],
        // yal: two verticals
        17 => vec![Seg(0.35, 0.12, 0.35, 0.88), Seg(0.65, 0.12, 0.65, 0.88)],
        // yam: M
        18 => vec![Poly(M_SHAPE)],
        // yan: single vertical
        19 => vec![Seg(0.5, 0.1, 0.5, 0.9)],
        // yu: U with stems
        20 => vec![
            Arc {
                cx: 0.5,
                cy: 0.4,
                r: 0.3,
                deg0: 0.0,
                deg1: 180.0,
            },
            Seg(0.2, 0.12, 0.2, 0.4),
            Seg(0.8, 0.12, 0.8, 0.4),
        ],
        // yar: arch
        21 => vec![
            Arc {
                cx: 0.5,
                cy: 0.6,
                r: 0.3,
                deg0: 180.0,
                deg1: 360.0,
            },
            Seg(0.2, 0.6, 0.2, 0.88),
            Seg(0.8, 0.6, 0.8, 0.88),
        ],
        // yarr: arch on a baseline
        22 => {
            let mut s = skeleton(21);
            s.push(Seg(0.2, 0.88, 0.8, 0.88));
            s
        }
        // yagh: top bar with a left stem
        23 => vec![Seg(0.3, 0.12, 0.3, 0.88), Seg(0.3, 0.12, 0.78, 0.12)],
        // yas: S
        24 => vec![
            Arc {
                cx: 0.5,
                cy: 0.28,
                r: 0.2,
                deg0: 90.0,
                deg1: 270.0,
            },
            Arc {
                cx: 0.5,
                cy: 0.68,
                r: 0.2,
                deg0: 270.0,
                deg1: 450.0,
            },
        ],
        // yass: Z
        25 => vec![
            Seg(0.2, 0.15, 0.8, 0.15),
            Seg(0.8, 0.15, 0.2, 0.85),
            Seg(0.2, 0.85, 0.8, 0.85),
        ],
        // yash: W
        26 => vec![Poly(W_SHAPE)],
        // yat: plus
        27 => vec![Seg(0.5, 0.12, 0.5, 0.88), Seg(0.12, 0.5, 0.88, 0.5)],
        // yatt: stem with two cross bars
        28 => vec![
            Seg(0.5, 0.08, 0.5, 0.92),
            Seg(0.2, 0.33, 0.8, 0.33),
            Seg(0.2, 0.67, 0.8, 0.67),
        ],
        // yaw: diamond
        29 => vec![Poly(DIAMOND)],
        // yay: lambda
        30 => vec![Seg(0.35, 0.1, 0.75, 0.9), Seg(0.52, 0.45, 0.25, 0.9)],
        // yaz: vertical crossed by an X
        31 => vec![
            Seg(0.5, 0.1, 0.5, 0.9),
            Seg(0.22, 0.15, 0.78, 0.85),
            Seg(0.78, 0.15, 0.22, 0.85),
        ],
        // yazz: yaz plus a horizontal bar
        32 => {
            let mut s = skeleton(31);
            s.push(Seg(0.15, 0.5, 0.85, 0.5));
            s
        }
        other => unreachable!("no skeleton for class {other}"),
    }
}

/// splitmix64-style mixer for independent per-(writer, class) streams.
fn mix(seed: u64, a: u64, b: u64) -> u64 {
    let mut z = seed
        ^ a.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ b.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const STYLE_TAG: u64 = 0xA5A5_0001;

struct WriterStyle {
    canvas: usize,
    /// Stroke width in units of the final 24-pixel content box.
    width: f64,
    slant_tan: f64,
    jitter: f64,
    ink: u8,
    dark_on_light: bool,
}

fn writer_style(seed: u64, writer: u32) -> WriterStyle {
    let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, writer as u64, STYLE_TAG));
    let canvas = rng.gen_range(80..=112);
    let width = rng.gen_range(1.0..=3.0);
    let slant_deg: f64 = rng.gen_range(-10.0..=10.0);
    let jitter = rng.gen_range(0.02..=0.10);
    let ink = rng.gen_range(200..=255);
    let dark_on_light = rng.gen_bool(0.5);
    WriterStyle {
        canvas,
        width,
        slant_tan: slant_deg.to_radians().tan(),
        jitter,
        ink,
        dark_on_light,
    }
}

/// Expands a stroke into jittered polyline vertices in unit coordinates.
fn stroke_points(stroke: Stroke, jitter: f64, rng: &mut ChaCha8Rng) -> Vec<(f64, f64)> {
    let mut j = |v: f64| v + rng.gen_range(-jitter..=jitter);
    match stroke {
        Seg(x0, y0, x1, y1) => vec![(j(x0), j(y0)), (j(x1), j(y1))],
        Poly(points) => points.iter().map(|&(x, y)| (j(x), j(y))).collect(),
        Arc {
            cx,
            cy,
            r,
            deg0,
            deg1,
        } => {
            // Jitter the arc's center and radius, not every sample.
            let (cx, cy) = (j(cx), j(cy));
            let r = r * (1.0 + rng.gen_range(-jitter..=jitter));
            let steps = 24;
            (0..=steps)
                .map(|i| {
                    let t = deg0 + (deg1 - deg0) * i as f64 / steps as f64;
                    let rad = t.to_radians();
                    (cx + r * rad.cos(), cy + r * rad.sin())
                })
                .collect()
        }
    }
}

fn rasterize(class: usize, style: &WriterStyle, rng: &mut ChaCha8Rng) -> RawGlyph {
    let canvas = style.canvas;
    let margin = canvas as f64 * 0.15;
    let span = canvas as f64 - 2.0 * margin;
    // Width is specified at the 24-pixel target scale; convert to raster px.
    let half_width = 0.5 * style.width * span / GLYPH_CONTENT as f64;
    let ink = style.ink as f64;

    let mut value = vec![0f64; canvas * canvas];
    for stroke in skeleton(class) {
        let pts = stroke_points(stroke, style.jitter, rng);
        let mapped: Vec<(f64, f64)> = pts
            .iter()
            .map(|&(x, y)| {
                let sheared = x + style.slant_tan * (0.5 - y);
                (margin + sheared * span, margin + y * span)
            })
            .collect();
        for pair in mapped.windows(2) {
            draw_segment(&mut value, canvas, pair[0], pair[1], half_width, ink);
        }
    }

    let pixels = if style.dark_on_light {
        value
            .iter()
            .map(|&v| 255 - v.round().clamp(0.0, 255.0) as u8)
            .collect()
    } else {
        value.iter().map(|&v| v.round().clamp(0.0, 255.0) as u8).collect()
    };
    RawGlyph::new(canvas, canvas, pixels).expect("canvas dims are positive")
}

/// Anti-aliased round-capped segment: per-pixel coverage from the distance
/// to the segment, max-blended into the buffer.
fn draw_segment(
    buf: &mut [f64],
    canvas: usize,
    (x0, y0): (f64, f64),
    (x1, y1): (f64, f64),
    half_width: f64,
    ink: f64,
) {
    let pad = half_width + 1.5;
    let min_x = ((x0.min(x1) - pad).floor().max(0.0)) as usize;
    let max_x = ((x0.max(x1) + pad).ceil().min(canvas as f64 - 1.0)) as usize;
    let min_y = ((y0.min(y1) - pad).floor().max(0.0)) as usize;
    let max_y = ((y0.max(y1) + pad).ceil().min(canvas as f64 - 1.0)) as usize;

    let (dx, dy) = (x1 - x0, y1 - y0);
    let len_sq = dx * dx + dy * dy;
    for py in min_y..=max_y {
        for px in min_x..=max_x {
            let (cx, cy) = (px as f64 + 0.5, py as f64 + 0.5);
            let t = if len_sq > 0.0 {
                (((cx - x0) * dx + (cy - y0) * dy) / len_sq).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let (qx, qy) = (x0 + t * dx, y0 + t * dy);
            let dist = ((cx - qx) * (cx - qx) + (cy - qy) * (cy - qy)).sqrt();
            let coverage = (half_width + 0.5 - dist).clamp(0.0, 1.0);
            if coverage > 0.0 {
                let v = coverage * ink;
                let cell = &mut buf[py * canvas + px];
                if v > *cell {
                    *cell = v;
                }
            }
        }
    }
}

fn build_writer(seed: u64, writer: u32, n_classes: usize) -> Result<Vec<Example>> {
    let style = writer_style(seed, writer);
    let mut out = Vec::with_capacity(n_classes);
    for class in 0..n_classes {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, writer as u64, class as u64));
        let raw = rasterize(class, &style, &mut rng);
        let glyph = preprocess_glyph(&raw)?;
        out.push(Example {
            glyph,
            label: class as u8,
            writer_id: writer,
        });
    }
    Ok(out)
}

/// Generates `n_writers * 33` examples: one glyph per (writer, class) pair,
/// each produced by the full preprocessing pipeline. Deterministic per seed;
/// parallel generation yields bit-identical results because every example is
/// a pure function of (seed, writer, class).
pub fn synth_corpus(n_writers: u32, seed: u64, registry: &LabelRegistry) -> Result<Corpus> {
    if n_writers == 0 {
        return Err(Error::config("synth_corpus", "n_writers must be >= 1"));
    }
    let n_classes = registry.n_classes();

    #[cfg(feature = "parallel")]
    let per_writer: Vec<Result<Vec<Example>>> = {
        use rayon::prelude::*;
        (0..n_writers)
            .into_par_iter()
            .map(|w| build_writer(seed, w, n_classes))
            .collect()
    };
    #[cfg(not(feature = "parallel"))]
    let per_writer: Vec<Result<Vec<Example>>> = (0..n_writers)
        .map(|w| build_writer(seed, w, n_classes))
        .collect();

    let mut examples = Vec::with_capacity(n_writers as usize * n_classes);
    for batch in per_writer {
        examples.extend(batch?);
    }
    Corpus::new(examples, registry.clone())
}
