//! Central finite differences, the independent oracle used to verify every
//! analytic backward pass.

use crate::tensor::{Scalar, Tensor};

/// Central-difference gradient of a scalar function:
/// `g[i] = (f(x + eps*e_i) - f(x - eps*e_i)) / (2*eps)`.
///
/// Evaluates `f` twice per element; meant for small tensors in tests. Run in
/// double precision for meaningful comparisons.
pub fn finite_difference_grad<T: Scalar>(
    mut f: impl FnMut(&Tensor<T>) -> T,
    x: &Tensor<T>,
    eps: f64,
) -> Tensor<T> {
    assert!(eps > 0.0, "finite_difference_grad: eps must be positive");
    let eps_t = T::from_f64(eps);
    let two_eps = T::from_f64(2.0 * eps);
    let mut probe = x.clone();
    let mut grad = Tensor::zeros(x.shape());
    for i in 0..x.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps_t;
        let fp = f(&probe);
        probe.data_mut()[i] = orig - eps_t;
        let fm = f(&probe);
        probe.data_mut()[i] = orig;
        grad.data_mut()[i] = (fp - fm) / two_eps;
    }
    grad
}

/// Worst relative discrepancy between an analytic gradient and its
/// finite-difference estimate. Elements where both are tiny (< `abs_floor`)
/// are compared absolutely instead.
pub fn max_relative_error<T: Scalar>(analytic: &Tensor<T>, numeric: &Tensor<T>) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape());
    let abs_floor = 1e-8;
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.data().iter().zip(numeric.data()) {
        let (a, n) = (a.to_f64(), n.to_f64());
        let diff = (a - n).abs();
        let scale = a.abs().max(n.abs());
        let err = if scale < abs_floor { diff } else { diff / scale };
        if err > worst {
            worst = err;
        }
    }
    worst
}
