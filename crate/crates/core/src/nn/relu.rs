use crate::tensor::{Scalar, Tensor};

/// `y = max(x, 0)` elementwise.
pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::ZERO { v } else { T::ZERO })
}

/// `dx = dy` where `x > 0`, else 0. The subgradient at exactly 0 is 0.
pub fn relu_backward<T: Scalar>(x: &Tensor<T>, d_y: &Tensor<T>) -> Tensor<T> {
    assert_eq!(x.shape(), d_y.shape(), "relu_backward: shape mismatch");
    let mut out = Tensor::zeros(x.shape());
    for ((o, &xv), &dv) in out.data_mut().iter_mut().zip(x.data()).zip(d_y.data()) {
        if xv > T::ZERO {
            *o = dv;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives_and_zero() {
        let x = Tensor::new(&[3], vec![-1.0f64, 0.0, 2.0]).unwrap();
        let y = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn backward_masks_at_and_below_zero() {
        let x = Tensor::new(&[3], vec![-1.0f64, 0.0, 2.0]).unwrap();
        let dy = Tensor::filled(&[3], 5.0f64);
        let dx = relu_backward(&x, &dy);
        assert_eq!(dx.data(), &[0.0, 0.0, 5.0]);
    }
}
