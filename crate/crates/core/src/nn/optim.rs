//! SGD with classical momentum: `v <- momentum*v - lr*g; p <- p + v`.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Optimizer state: one velocity tensor per parameter tensor.
#[derive(Clone, Debug)]
pub struct OptimState<T: Scalar = f32> {
    lr: T,
    momentum: T,
    velocity: Vec<Tensor<T>>,
}

impl<T: Scalar> OptimState<T> {
    pub fn new(lr: f64, momentum: f64, param_shapes: &[&[usize]]) -> Result<Self> {
        if lr <= 0.0 {
            return Err(Error::config("optimizer", format!("lr must be > 0, got {lr}")));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(Error::config(
                "optimizer",
                format!("momentum must be in [0, 1), got {momentum}"),
            ));
        }
        Ok(OptimState {
            lr: T::from_f64(lr),
            momentum: T::from_f64(momentum),
            velocity: param_shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        })
    }

    pub fn lr(&self) -> T {
        self.lr
    }

    pub fn momentum(&self) -> T {
        self.momentum
    }

    pub fn velocity(&self) -> &[Tensor<T>] {
        &self.velocity
    }
}

/// One momentum step over a parameter set. Parameter, gradient, and velocity
/// tensors are matched positionally and must agree in shape.
pub fn sgd_momentum_step<T: Scalar>(
    params: &mut [&mut Tensor<T>],
    grads: &[&Tensor<T>],
    state: &mut OptimState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.velocity.len() {
        return Err(Error::config(
            "sgd_momentum_step",
            format!(
                "parameter set size mismatch: {} params, {} grads, {} velocities",
                params.len(),
                grads.len(),
                state.velocity.len()
            ),
        ));
    }
    for ((p, g), v) in params.iter_mut().zip(grads).zip(state.velocity.iter_mut()) {
        if p.shape() != g.shape() || p.shape() != v.shape() {
            return Err(Error::Dimension {
                op: "sgd_momentum_step",
                axis: "parameter",
                expected: p.len(),
                got: if p.shape() != g.shape() { g.len() } else { v.len() },
            });
        }
        let (m, lr) = (state.momentum, state.lr);
        for ((pv, gv), vv) in p
            .data_mut()
            .iter_mut()
            .zip(g.data())
            .zip(v.data_mut())
        {
            *vv = m * *vv - lr * *gv;
            *pv += *vv;
        }
    }
    Ok(())
}
