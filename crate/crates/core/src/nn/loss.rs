//! Softmax cross-entropy over class logits, with the gradient at the logits.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Numerically stable (max-subtracted) softmax cross-entropy.
///
/// Returns the mean over the batch of `-ln p[label]` together with
/// `d_logits = (softmax - onehot) / N`.
pub fn softmax_cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(T, Tensor<T>)> {
    if logits.rank() != 2 {
        return Err(Error::Dimension {
            op: "softmax_cross_entropy",
            axis: "logits rank",
            expected: 2,
            got: logits.rank(),
        });
    }
    let (n, c) = (logits.dim(0), logits.dim(1));
    if labels.len() != n {
        return Err(Error::Dimension {
            op: "softmax_cross_entropy",
            axis: "labels",
            expected: n,
            got: labels.len(),
        });
    }
    for (row, &label) in labels.iter().enumerate() {
        if label >= c {
            return Err(Error::Label {
                row,
                label,
                n_classes: c,
            });
        }
    }

    let data = logits.data();
    let mut d_logits = Tensor::zeros(&[n, c]);
    let inv_n = T::ONE / T::from_f64(n as f64);
    let mut loss_sum = T::ZERO;

    for row in 0..n {
        let x = &data[row * c..(row + 1) * c];
        let mut max = x[0];
        for &v in &x[1..] {
            max = max.max(v);
        }
        let mut denom = T::ZERO;
        for &v in x {
            denom += (v - max).exp();
        }
        // -ln p[label] = ln(denom) - (x[label] - max)
        loss_sum += denom.ln() - (x[labels[row]] - max);

        let drow = &mut d_logits.data_mut()[row * c..(row + 1) * c];
        for (j, dv) in drow.iter_mut().enumerate() {
            let p = (x[j] - max).exp() / denom;
            let target = if j == labels[row] { T::ONE } else { T::ZERO };
            *dv = (p - target) * inv_n;
        }
    }

    Ok((loss_sum * inv_n, d_logits))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_c() {
        let logits = Tensor::<f64>::zeros(&[4, 33]);
        let labels = vec![0, 5, 17, 32];
        let (loss, _) = softmax_cross_entropy(&logits, &labels).unwrap();
        assert!((loss - (33.0f64).ln()).abs() < 1e-12);
        assert!((loss - 3.496_508).abs() < 1e-6);
    }

    #[test]
    fn saturated_true_class_has_negligible_loss() {
        let mut logits = Tensor::<f64>::zeros(&[1, 33]);
        logits.data_mut()[7] = 50.0;
        let (loss, _) = softmax_cross_entropy(&logits, &[7]).unwrap();
        assert!(loss >= 0.0);
        assert!(loss < 1e-9);
    }

    #[test]
    fn gradient_rows_sum_to_zero() {
        let logits = Tensor::from_fn(&[3, 5], |i| ((i * 31 + 7) % 13) as f64 * 0.21 - 1.0);
        let (_, d) = softmax_cross_entropy(&logits, &[0, 2, 4]).unwrap();
        for row in 0..3 {
            let s: f64 = d.data()[row * 5..(row + 1) * 5].iter().sum();
            assert!(s.abs() < 1e-12, "row {row} gradient sums to {s}");
        }
    }

    #[test]
    fn implied_probabilities_sum_to_one() {
        // Recover p from d_logits: p = d * N + onehot.
        let logits = Tensor::from_fn(&[2, 7], |i| (i as f64 * 0.9).cos() * 3.0);
        let labels = [3, 6];
        let (_, d) = softmax_cross_entropy(&logits, &labels).unwrap();
        for row in 0..2 {
            let mut sum = 0.0;
            for j in 0..7 {
                let onehot = if j == labels[row] { 1.0 } else { 0.0 };
                sum += d.data()[row * 7 + j] * 2.0 + onehot;
            }
            assert!((sum - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn label_out_of_range_names_row() {
        let logits = Tensor::<f64>::zeros(&[3, 5]);
        match softmax_cross_entropy(&logits, &[0, 9, 1]).unwrap_err() {
            Error::Label { row, label, .. } => {
                assert_eq!(row, 1);
                assert_eq!(label, 9);
            }
            other => panic!("unexpected error {other}"),
        }
    }
}
