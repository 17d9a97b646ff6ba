//! Fully connected layer: `out = input * weights^T + bias`.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::{run_units, Mode};

fn check_dims<T: Scalar>(
    op: &'static str,
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: Option<&Tensor<T>>,
) -> Result<(usize, usize, usize)> {
    if input.rank() != 2 {
        return Err(Error::Dimension {
            op,
            axis: "input rank",
            expected: 2,
            got: input.rank(),
        });
    }
    if weights.rank() != 2 {
        return Err(Error::Dimension {
            op,
            axis: "weights rank",
            expected: 2,
            got: weights.rank(),
        });
    }
    let (n, f) = (input.dim(0), input.dim(1));
    let (o, wf) = (weights.dim(0), weights.dim(1));
    if wf != f {
        return Err(Error::Dimension {
            op,
            axis: "features",
            expected: f,
            got: wf,
        });
    }
    if let Some(b) = bias {
        if b.rank() != 1 || b.dim(0) != o {
            return Err(Error::Dimension {
                op,
                axis: "bias",
                expected: o,
                got: b.len(),
            });
        }
    }
    Ok((n, f, o))
}

pub fn dense_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
) -> Result<Tensor<T>> {
    forward_mode(input, weights, bias, Mode::Auto)
}

pub(super) fn forward_mode<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &Tensor<T>,
    mode: Mode,
) -> Result<Tensor<T>> {
    let (n, f, o) = check_dims("dense_forward", input, weights, Some(bias))?;
    let mut out = Tensor::zeros(&[n, o]);
    let in_data = input.data();
    let w_data = weights.data();
    let b_data = bias.data();

    // One unit per batch row.
    run_units(out.data_mut(), o, mode, |row, chunk| {
        let x = &in_data[row * f..(row + 1) * f];
        for (j, outv) in chunk.iter_mut().enumerate() {
            let wrow = &w_data[j * f..(j + 1) * f];
            let mut acc = b_data[j];
            for (xi, wi) in x.iter().zip(wrow) {
                acc += *xi * *wi;
            }
            *outv = acc;
        }
    });
    Ok(out)
}

/// Exact analytic gradients of [`dense_forward`].
#[allow(clippy::type_complexity)]
pub fn dense_backward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    d_output: &Tensor<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    backward_mode(input, weights, d_output, Mode::Auto)
}

#[allow(clippy::type_complexity)]
pub(super) fn backward_mode<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    d_output: &Tensor<T>,
    mode: Mode,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let (n, f, o) = check_dims("dense_backward", input, weights, None)?;
    if d_output.rank() != 2 || d_output.dim(0) != n || d_output.dim(1) != o {
        return Err(Error::Dimension {
            op: "dense_backward",
            axis: "d_output",
            expected: n * o,
            got: d_output.len(),
        });
    }
    let in_data = input.data();
    let w_data = weights.data();
    let dout = d_output.data();

    // d_input[n, f] = sum_o d_out[n, o] * w[o, f]; one unit per batch row.
    let mut d_input = Tensor::zeros(&[n, f]);
    run_units(d_input.data_mut(), f, mode, |row, chunk| {
        let drow = &dout[row * o..(row + 1) * o];
        for (j, &dv) in drow.iter().enumerate() {
            let wrow = &w_data[j * f..(j + 1) * f];
            for (ci, wi) in chunk.iter_mut().zip(wrow) {
                *ci += dv * *wi;
            }
        }
    });

    // d_weights[o, f] = sum_n d_out[n, o] * input[n, f]; one unit per output.
    let mut d_weights = Tensor::zeros(&[o, f]);
    run_units(d_weights.data_mut(), f, mode, |j, chunk| {
        for row in 0..n {
            let dv = dout[row * o + j];
            let x = &in_data[row * f..(row + 1) * f];
            for (ci, xi) in chunk.iter_mut().zip(x) {
                *ci += dv * *xi;
            }
        }
    });

    let mut d_bias = Tensor::zeros(&[o]);
    for row in 0..n {
        for (j, bj) in d_bias.data_mut().iter_mut().enumerate() {
            *bj += dout[row * o + j];
        }
    }

    Ok((d_input, d_weights, d_bias))
}
