//! 2x2 max-pooling with stride 2 and argmax routing for the backward pass.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

use super::{run_units, run_units_pair, Mode};

/// Argmax bookkeeping from a forward pool call: for every pooled output
/// element, the linear index of the window maximum in the input tensor.
/// Ties break to the lowest linear index within the window.
#[derive(Clone, Debug)]
pub struct PoolIndices {
    input_shape: Vec<usize>,
    indices: Vec<u32>,
}

impl PoolIndices {
    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn indices(&self) -> &[u32] {
        &self.indices
    }
}

/// 2x2 windows, stride 2; each output is the window max.
pub fn maxpool2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
    forward_mode(input, Mode::Auto)
}

pub(super) fn forward_mode<T: Scalar>(
    input: &Tensor<T>,
    mode: Mode,
) -> Result<(Tensor<T>, PoolIndices)> {
    if input.rank() != 4 {
        return Err(Error::Dimension {
            op: "maxpool2_forward",
            axis: "input rank",
            expected: 4,
            got: input.rank(),
        });
    }
    let (n, c, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    if h % 2 != 0 {
        return Err(Error::Dimension {
            op: "maxpool2_forward",
            axis: "height",
            expected: h + 1,
            got: h,
        });
    }
    if w % 2 != 0 {
        return Err(Error::Dimension {
            op: "maxpool2_forward",
            axis: "width",
            expected: w + 1,
            got: w,
        });
    }
    let (oh, ow) = (h / 2, w / 2);
    let mut out = Tensor::zeros(&[n, c, oh, ow]);
    let mut indices = vec![0u32; n * c * oh * ow];
    let data = input.data();
    let out_plane = oh * ow;
    let in_plane = h * w;

    // One unit per (n, c) plane.
    run_units_pair(
        out.data_mut(),
        out_plane,
        &mut indices,
        out_plane,
        mode,
        |unit, out_chunk, idx_chunk| {
            let plane_base = unit * in_plane;
            for py in 0..oh {
                for px in 0..ow {
                    let i00 = plane_base + (2 * py) * w + 2 * px;
                    // Window positions in ascending linear order; strict `>`
                    // keeps the lowest index on ties.
                    let cand = [i00, i00 + 1, i00 + w, i00 + w + 1];
                    let mut best = cand[0];
                    let mut best_v = data[cand[0]];
                    for &i in &cand[1..] {
                        if data[i] > best_v {
                            best_v = data[i];
                            best = i;
                        }
                    }
                    out_chunk[py * ow + px] = best_v;
                    idx_chunk[py * ow + px] = best as u32;
                }
            }
        },
    );

    Ok((
        out,
        PoolIndices {
            input_shape: vec![n, c, h, w],
            indices,
        },
    ))
}

/// Routes each `d_output` element to its window's argmax position; all other
/// input positions receive zero.
pub fn maxpool2_backward<T: Scalar>(
    indices: &PoolIndices,
    d_output: &Tensor<T>,
) -> Result<Tensor<T>> {
    backward_mode(indices, d_output, Mode::Auto)
}

pub(super) fn backward_mode<T: Scalar>(
    indices: &PoolIndices,
    d_output: &Tensor<T>,
    mode: Mode,
) -> Result<Tensor<T>> {
    if d_output.len() != indices.indices.len() {
        return Err(Error::Internal(format!(
            "maxpool2_backward: {} gradient elements for {} recorded indices",
            d_output.len(),
            indices.indices.len()
        )));
    }
    let (h, w) = (indices.input_shape[2], indices.input_shape[3]);
    let in_plane = h * w;
    let out_plane = in_plane / 4;
    let dout = d_output.data();
    let idx = &indices.indices;

    // Every recorded index must land in the plane its output element belongs
    // to; anything else means the indices came from a different forward call.
    for (j, &i) in idx.iter().enumerate() {
        if (i as usize) / in_plane != j / out_plane {
            return Err(Error::Internal(format!(
                "maxpool2_backward: recorded index {i} outside the plane of output element {j}"
            )));
        }
    }

    let mut d_input = Tensor::zeros(&indices.input_shape);
    // Windows are disjoint, so scatter within a plane touches each input
    // position at most once.
    run_units(d_input.data_mut(), in_plane, mode, |unit, chunk| {
        let plane_base = unit * in_plane;
        for j in 0..out_plane {
            let target = idx[unit * out_plane + j] as usize;
            chunk[target - plane_base] = dout[unit * out_plane + j];
        }
    });
    Ok(d_input)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_window_takes_max() {
        let input = Tensor::new(&[1, 1, 2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let (out, idx) = maxpool2_forward(&input).unwrap();
        assert_eq!(out.shape(), &[1, 1, 1, 1]);
        assert_eq!(out.data(), &[4.0]);
        assert_eq!(idx.indices(), &[3]);
    }

    #[test]
    fn ties_take_lowest_linear_index() {
        let input = Tensor::filled(&[1, 1, 4, 4], 7.0f64);
        let (out, idx) = maxpool2_forward(&input).unwrap();
        assert!(out.data().iter().all(|&v| v == 7.0));
        // First element of each 2x2 window.
        assert_eq!(idx.indices(), &[0, 2, 8, 10]);
    }

    #[test]
    fn odd_dims_rejected() {
        let input = Tensor::<f64>::zeros(&[1, 1, 3, 4]);
        assert!(maxpool2_forward(&input).is_err());
        let input = Tensor::<f64>::zeros(&[1, 1, 4, 5]);
        assert!(maxpool2_forward(&input).is_err());
    }

    #[test]
    fn backward_routes_to_argmax() {
        let input = Tensor::new(&[1, 1, 2, 2], vec![1.0f64, 2.0, 3.0, 4.0]).unwrap();
        let (_, idx) = maxpool2_forward(&input).unwrap();
        let dout = Tensor::new(&[1, 1, 1, 1], vec![1.0f64]).unwrap();
        let din = maxpool2_backward(&idx, &dout).unwrap();
        assert_eq!(din.data(), &[0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn backward_tie_routes_to_first_position() {
        let input = Tensor::filled(&[1, 1, 2, 2], 5.0f64);
        let (_, idx) = maxpool2_forward(&input).unwrap();
        let dout = Tensor::new(&[1, 1, 1, 1], vec![1.0f64]).unwrap();
        let din = maxpool2_backward(&idx, &dout).unwrap();
        assert_eq!(din.data(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn gradient_mass_is_conserved() {
        let input = Tensor::from_fn(&[2, 3, 6, 6], |i| ((i * 37 + 11) % 101) as f64 * 0.13);
        let (out, idx) = maxpool2_forward(&input).unwrap();
        let dout = Tensor::from_fn(out.shape(), |i| (i % 7) as f64 - 3.0);
        let din = maxpool2_backward(&idx, &dout).unwrap();
        let sum_in: f64 = din.data().iter().sum();
        let sum_out: f64 = dout.data().iter().sum();
        assert_eq!(sum_in, sum_out);
    }
}
