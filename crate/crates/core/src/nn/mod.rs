//! Forward/backward kernels for the CNN: convolution, max-pooling, ReLU,
//! dense, softmax cross-entropy, SGD with momentum, and a finite-difference
//! gradient oracle.
//!
//! Every kernel is written gather-style: each output element is a pure
//! function of the inputs with a fixed inner reduction order. Parallelism
//! (the `parallel` feature) only splits disjoint output chunks across
//! threads, so parallel and sequential runs are bit-identical. The always
//! sequential variants live in [`seq`] for benchmarks and equivalence tests.

mod conv;
mod dense;
mod gradcheck;
mod loss;
mod optim;
mod pool;
mod relu;

pub use conv::{conv2d_backward, conv2d_forward};
pub use dense::{dense_backward, dense_forward};
pub use gradcheck::{finite_difference_grad, max_relative_error};
pub use loss::softmax_cross_entropy;
pub use optim::{sgd_momentum_step, OptimState};
pub use pool::{maxpool2_backward, maxpool2_forward, PoolIndices};
pub use relu::{relu_backward, relu_forward};

/// Sequential reference versions of the data-parallel kernels. Results are
/// bit-identical to the default entry points; used by benches and tests.
pub mod seq {
    use super::*;
    use crate::error::Result;
    use crate::tensor::{Scalar, Tensor};

    pub fn conv2d_forward<T: Scalar>(
        input: &Tensor<T>,
        weights: &Tensor<T>,
        bias: &Tensor<T>,
        stride: usize,
        pad: usize,
    ) -> Result<Tensor<T>> {
        conv::forward_mode(input, weights, bias, stride, pad, Mode::Sequential)
    }

    #[allow(clippy::type_complexity)]
    pub fn conv2d_backward<T: Scalar>(
        input: &Tensor<T>,
        weights: &Tensor<T>,
        d_output: &Tensor<T>,
        stride: usize,
        pad: usize,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        conv::backward_mode(input, weights, d_output, stride, pad, Mode::Sequential)
    }

    pub fn dense_forward<T: Scalar>(
        input: &Tensor<T>,
        weights: &Tensor<T>,
        bias: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        dense::forward_mode(input, weights, bias, Mode::Sequential)
    }

    #[allow(clippy::type_complexity)]
    pub fn dense_backward<T: Scalar>(
        input: &Tensor<T>,
        weights: &Tensor<T>,
        d_output: &Tensor<T>,
    ) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        dense::backward_mode(input, weights, d_output, Mode::Sequential)
    }

    pub fn maxpool2_forward<T: Scalar>(input: &Tensor<T>) -> Result<(Tensor<T>, PoolIndices)> {
        pool::forward_mode(input, Mode::Sequential)
    }

    pub fn maxpool2_backward<T: Scalar>(
        indices: &PoolIndices,
        d_output: &Tensor<T>,
    ) -> Result<Tensor<T>> {
        pool::backward_mode(indices, d_output, Mode::Sequential)
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Parallel when the `parallel` feature is enabled, sequential otherwise.
    Auto,
    Sequential,
}

/// Runs `f` once per disjoint `unit_len` chunk of `data`. Each chunk is
/// written by exactly one invocation, so the result does not depend on the
/// execution order.
pub(crate) fn run_units<T, F>(data: &mut [T], unit_len: usize, mode: Mode, f: F)
where
    T: Send,
    F: Fn(usize, &mut [T]) + Sync,
{
    debug_assert_eq!(data.len() % unit_len, 0);
    match mode {
        Mode::Sequential => {
            for (i, chunk) in data.chunks_mut(unit_len).enumerate() {
                f(i, chunk);
            }
        }
        Mode::Auto => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                data.par_chunks_mut(unit_len)
                    .enumerate()
                    .for_each(|(i, chunk)| f(i, chunk));
            }
            #[cfg(not(feature = "parallel"))]
            {
                for (i, chunk) in data.chunks_mut(unit_len).enumerate() {
                    f(i, chunk);
                }
            }
        }
    }
}

/// Like [`run_units`] but over two buffers chunked in lockstep (used where a
/// kernel emits a value buffer plus an index buffer).
pub(crate) fn run_units_pair<A, B, F>(
    a: &mut [A],
    a_unit: usize,
    b: &mut [B],
    b_unit: usize,
    mode: Mode,
    f: F,
) where
    A: Send,
    B: Send,
    F: Fn(usize, &mut [A], &mut [B]) + Sync,
{
    debug_assert_eq!(a.len() / a_unit, b.len() / b_unit);
    match mode {
        Mode::Sequential => {
            for (i, (ca, cb)) in a.chunks_mut(a_unit).zip(b.chunks_mut(b_unit)).enumerate() {
                f(i, ca, cb);
            }
        }
        Mode::Auto => {
            #[cfg(feature = "parallel")]
            {
                use rayon::prelude::*;
                a.par_chunks_mut(a_unit)
                    .zip(b.par_chunks_mut(b_unit))
                    .enumerate()
                    .for_each(|(i, (ca, cb))| f(i, ca, cb));
            }
            #[cfg(not(feature = "parallel"))]
            {
                for (i, (ca, cb)) in a.chunks_mut(a_unit).zip(b.chunks_mut(b_unit)).enumerate() {
                    f(i, ca, cb);
                }
            }
        }
    }
}
