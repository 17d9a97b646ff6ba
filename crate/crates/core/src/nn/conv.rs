//! 2D convolution in the cross-correlation convention (no kernel flip).

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::{run_units, Mode};

struct ConvDims {
    n: usize,
    c: usize,
    h: usize,
    w: usize,
    k: usize,
    kh: usize,
    kw: usize,
    out_h: usize,
    out_w: usize,
}

fn check_dims<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: usize,
    pad: usize,
) -> Result<ConvDims> {
    if input.rank() != 4 {
        return Err(Error::Dimension {
            op,
            axis: "input rank",
            expected: 4,
            got: input.rank(),
        });
    }
    if weights.rank() != 4 {
        return Err(Error::Dimension {
            op,
            axis: "weights rank",
            expected: 4,
            got: weights.rank(),
        });
    }
    if stride == 0 {
        return Err(Error::config(op, "stride must be >= 1"));
    }
    let (n, c, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    let (k, wc, kh, kw) = (
        weights.dim(0),
        weights.dim(1),
        weights.dim(2),
        weights.dim(3),
    );
    if wc != c {
        return Err(Error::Dimension {
            op,
            axis: "channels",
            expected: c,
            got: wc,
        });
    }
    if let Some(b) = bias {
        if b.rank() != 1 || b.dim(0) != k {
            return Err(Error::Dimension {
                op,
                axis: "bias",
                expected: k,
                got: b.len(),
            });
        }
    }
    if h + 2 * pad < kh {
        return Err(Error::Dimension {
            op,
            axis: "height",
            expected: kh,
            got: h + 2 * pad,
        });
    }
    if w + 2 * pad < kw {
        return Err(Error::Dimension {
            op,
            axis: "width",
            expected: kw,
            got: w + 2 * pad,
        });
    }
    if (h + 2 * pad - kh) % stride != 0 {
        return Err(Error::config(
            op,
            format!(
                "height: input extent {} minus kernel {} not divisible by stride {}",
                h + 2 * pad,
                kh,
                stride
            ),
        ));
    }
    if (w + 2 * pad - kw) % stride != 0 {
        return Err(Error::config(
            op,
            format!(
                "width: input extent {} minus kernel {} not divisible by stride {}",
                w + 2 * pad,
                kw,
                stride
            ),
        ));
    }
    Ok(ConvDims {
        n,
        c,
        h,
        w,
        k,
        kh,
        kw,
        out_h: (h + 2 * pad - kh) / stride + 1,
        out_w: (w + 2 * pad - kw) / stride + 1,
    })
}

/// Valid output-column range for a given kernel column: all `ox` with
/// `0 <= ox*stride + kx - pad < w`.
fn ox_range(kx: usize, pad: usize, stride: usize, w: usize, out_w: usize) -> (usize, usize) {
    let lo = if kx >= pad {
        0
    } else {
        (pad - kx).div_ceil(stride)
    };
    let hi_in = w + pad;
    let hi = if hi_in > kx {
        ((hi_in - kx - 1) / stride + 1).min(out_w)
    } else {
        0
    };
    (lo.min(hi), hi)
}

/// `out[n,k] = bias[k] + sum_{c,ky,kx} input[n,c,oy*s+ky-p, ox*s+kx-p] * weights[k,c,ky,kx]`
pub fn conv2d_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<Tensor<T>> {
    forward_mode(input, weights, bias, stride, pad, Mode::Auto)
}

pub(super) fn forward_mode<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    stride: usize,
    pad: usize,
    mode: Mode,
) -> Result<Tensor<T>> {
    let d = check_dims("conv2d_forward", input, weights, Some(bias), stride, pad)?;
    let mut out = Tensor::zeros(&[d.n, d.k, d.out_h, d.out_w]);
    let plane = d.out_h * d.out_w;
    let in_data = input.data();
    let w_data = weights.data();
    let b_data = bias.data();

    // One unit per (n, k) output plane.
    run_units(out.data_mut(), plane, mode, |unit, chunk| {
        let n = unit / d.k;
        let k = unit % d.k;
        chunk.iter_mut().for_each(|v| *v = b_data[k]);
        let in_base = n * d.c * d.h * d.w;
        let w_base = k * d.c * d.kh * d.kw;
        for c in 0..d.c {
            let in_c = in_base + c * d.h * d.w;
            let w_c = w_base + c * d.kh * d.kw;
            for ky in 0..d.kh {
                for oy in 0..d.out_h {
                    let iy = oy * stride + ky;
                    if iy < pad || iy >= d.h + pad {
                        continue;
                    }
                    let in_row = &in_data[in_c + (iy - pad) * d.w..in_c + (iy - pad + 1) * d.w];
                    let out_row = &mut chunk[oy * d.out_w..(oy + 1) * d.out_w];
                    for kx in 0..d.kw {
                        let wv = w_data[w_c + ky * d.kw + kx];
                        let (lo, hi) = ox_range(kx, pad, stride, d.w, d.out_w);
                        if lo >= hi {
                            continue;
                        }
                        if stride == 1 {
                            // Contiguous windows vectorize.
                            let src = &in_row[lo + kx - pad..hi + kx - pad];
                            for (o, &s) in out_row[lo..hi].iter_mut().zip(src) {
                                *o += wv * s;
                            }
                        } else {
                            for ox in lo..hi {
                                out_row[ox] += wv * in_row[ox * stride + kx - pad];
                            }
                        }
                    }
                }
            }
        }
    });
    Ok(out)
}

/// Exact analytic gradients of [`conv2d_forward`] with respect to input,
/// weights, and bias. `d_bias[k]` is the sum of `d_output` over channel `k`.
#[allow(clippy::type_complexity)]
pub fn conv2d_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    d_output: &Tensor<T>,
    stride: usize,
    pad: usize,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    backward_mode(input, weights, d_output, stride, pad, Mode::Auto)
}

#[allow(clippy::type_complexity)]
pub(super) fn backward_mode<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    d_output: &Tensor<T>,
    stride: usize,
    pad: usize,
    mode: Mode,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = check_dims("conv2d_backward", input, weights, None, stride, pad)?;
    let expect = [d.n, d.k, d.out_h, d.out_w];
    if d_output.rank() != 4 {
        return Err(Error::Dimension {
            op: "conv2d_backward",
            axis: "d_output rank",
            expected: 4,
            got: d_output.rank(),
        });
    }
    let axis = ["batch", "out channels", "out height", "out width"];
    for i in 0..4 {
        if d_output.dim(i) != expect[i] {
            return Err(Error::Dimension {
                op: "conv2d_backward",
                axis: axis[i],
                expected: expect[i],
                got: d_output.dim(i),
            });
        }
    }

    let in_data = input.data();
    let w_data = weights.data();
    let dout = d_output.data();
    let out_plane = d.out_h * d.out_w;

    // d_input: one unit per (n, c) plane, scatter order fixed per plane.
    let mut d_input = Tensor::zeros(&[d.n, d.c, d.h, d.w]);
    run_units(d_input.data_mut(), d.h * d.w, mode, |unit, chunk| {
        let n = unit / d.c;
        let c = unit % d.c;
        for k in 0..d.k {
            let dout_base = (n * d.k + k) * out_plane;
            let w_c = (k * d.c + c) * d.kh * d.kw;
            for ky in 0..d.kh {
                for oy in 0..d.out_h {
                    let iy = oy * stride + ky;
                    if iy < pad || iy >= d.h + pad {
                        continue;
                    }
                    let dout_row = &dout[dout_base + oy * d.out_w..dout_base + (oy + 1) * d.out_w];
                    let din_row = &mut chunk[(iy - pad) * d.w..(iy - pad + 1) * d.w];
                    for kx in 0..d.kw {
                        let wv = w_data[w_c + ky * d.kw + kx];
                        let (lo, hi) = ox_range(kx, pad, stride, d.w, d.out_w);
                        if lo >= hi {
                            continue;
                        }
                        if stride == 1 {
                            let dst = &mut din_row[lo + kx - pad..hi + kx - pad];
                            for (o, &g) in dst.iter_mut().zip(&dout_row[lo..hi]) {
                                *o += wv * g;
                            }
                        } else {
                            for ox in lo..hi {
                                din_row[ox * stride + kx - pad] += wv * dout_row[ox];
                            }
                        }
                    }
                }
            }
        }
    });

    // d_weights: one unit per output channel k.
    let mut d_weights = Tensor::zeros(&[d.k, d.c, d.kh, d.kw]);
    let wk = d.c * d.kh * d.kw;
    run_units(d_weights.data_mut(), wk, mode, |k, chunk| {
        for n in 0..d.n {
            let dout_base = (n * d.k + k) * out_plane;
            let in_base = n * d.c * d.h * d.w;
            for oy in 0..d.out_h {
                let dout_row = &dout[dout_base + oy * d.out_w..dout_base + (oy + 1) * d.out_w];
                for c in 0..d.c {
                    let in_c = in_base + c * d.h * d.w;
                    for ky in 0..d.kh {
                        let iy = oy * stride + ky;
                        if iy < pad || iy >= d.h + pad {
                            continue;
                        }
                        let in_row = &in_data[in_c + (iy - pad) * d.w..in_c + (iy - pad + 1) * d.w];
                        let dw_row = &mut chunk[c * d.kh * d.kw + ky * d.kw..];
                        for kx in 0..d.kw {
                            let (lo, hi) = ox_range(kx, pad, stride, d.w, d.out_w);
                            if lo >= hi {
                                continue;
                            }
                            let mut acc = T::ZERO;
                            if stride == 1 {
                                let src = &in_row[lo + kx - pad..hi + kx - pad];
                                for (&g, &s) in dout_row[lo..hi].iter().zip(src) {
                                    acc += g * s;
                                }
                            } else {
                                for ox in lo..hi {
                                    acc += dout_row[ox] * in_row[ox * stride + kx - pad];
                                }
                            }
                            dw_row[kx] += acc;
                        }
                    }
                }
            }
        }
    });

    // d_bias[k] = sum of d_output over channel k; cheap, done sequentially.
    let mut d_bias = Tensor::zeros(&[d.k]);
    for n in 0..d.n {
        for k in 0..d.k {
            let base = (n * d.k + k) * out_plane;
            let mut acc = T::ZERO;
            for v in &dout[base..base + out_plane] {
                acc += *v;
            }
            d_bias.data_mut()[k] += acc;
        }
    }

    Ok((d_input, d_weights, d_bias))
}
