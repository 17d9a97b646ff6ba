//! Independent oracles for the layer kernels: a naive nested-loop convolution
//! and central finite differences. These never call the code paths they
//! check.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tifinagh_core::nn::{
    conv2d_backward, conv2d_forward, dense_backward, dense_forward, finite_difference_grad,
    maxpool2_backward, maxpool2_forward, max_relative_error, relu_backward, relu_forward, seq,
    softmax_cross_entropy,
};
use tifinagh_core::Tensor;

fn rand_tensor(rng: &mut ChaCha8Rng, shape: &[usize]) -> Tensor<f64> {
    Tensor::from_fn(shape, |_| rng.gen_range(-1.0..1.0))
}

/// Deliberately naive convolution: seven nested loops, nothing shared with
/// the implementation.
fn naive_conv2d(
    input: &Tensor<f64>,
    weights: &Tensor<f64>,
    bias: &Tensor<f64>,
    stride: usize,
    pad: usize,
) -> Tensor<f64> {
    let (n, c, h, w) = (input.dim(0), input.dim(1), input.dim(2), input.dim(3));
    let (k, _, kh, kw) = (
        weights.dim(0),
        weights.dim(1),
        weights.dim(2),
        weights.dim(3),
    );
    let oh = (h + 2 * pad - kh) / stride + 1;
    let ow = (w + 2 * pad - kw) / stride + 1;
    let mut out = Tensor::zeros(&[n, k, oh, ow]);
    for ni in 0..n {
        for ki in 0..k {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = bias.data()[ki];
                    for ci in 0..c {
                        for ky in 0..kh {
                            for kx in 0..kw {
                                let iy = (oy * stride + ky) as isize - pad as isize;
                                let ix = (ox * stride + kx) as isize - pad as isize;
                                if iy >= 0 && iy < h as isize && ix >= 0 && ix < w as isize {
                                    let iv = input.data()
                                        [((ni * c + ci) * h + iy as usize) * w + ix as usize];
                                    let wv = weights.data()[((ki * c + ci) * kh + ky) * kw + kx];
                                    acc += iv * wv;
                                }
                            }
                        }
                    }
                    out.data_mut()[((ni * k + ki) * oh + oy) * ow + ox] = acc;
                }
            }
        }
    }
    out
}

fn random_conv_case(rng: &mut ChaCha8Rng) -> (Tensor<f64>, Tensor<f64>, Tensor<f64>, usize, usize) {
    let n = rng.gen_range(1..3);
    let c = rng.gen_range(1..4);
    let k = rng.gen_range(1..4);
    let kh = rng.gen_range(1..4);
    let kw = rng.gen_range(1..4);
    let stride = rng.gen_range(1..3);
    let pad = rng.gen_range(0..2);
    // Pick extents that satisfy the stride divisibility precondition.
    let oh = rng.gen_range(1..5);
    let ow = rng.gen_range(1..5);
    let h = (oh - 1) * stride + kh;
    let w = (ow - 1) * stride + kw;
    if h < 2 * pad + 1 || w < 2 * pad + 1 {
        return random_conv_case(rng);
    }
    let input = rand_tensor(rng, &[n, c, h - 2 * pad, w - 2 * pad]);
    let weights = rand_tensor(rng, &[k, c, kh, kw]);
    let bias = rand_tensor(rng, &[k]);
    (input, weights, bias, stride, pad)
}

#[test]
fn conv_forward_matches_naive_loop_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..100 {
        let (input, weights, bias, stride, pad) = random_conv_case(&mut rng);
        let fast = conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
        let slow = naive_conv2d(&input, &weights, &bias, stride, pad);
        assert_eq!(fast.shape(), slow.shape(), "trial {trial}");
        for (a, b) in fast.data().iter().zip(slow.data()) {
            assert!((a - b).abs() < 1e-6, "trial {trial}: {a} vs {b}");
        }
    }
}

#[test]
fn conv_forward_fixed_case_matches_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let input = rand_tensor(&mut rng, &[2, 3, 8, 8]);
    let weights = rand_tensor(&mut rng, &[4, 3, 5, 5]);
    let bias = rand_tensor(&mut rng, &[4]);
    let fast = conv2d_forward(&input, &weights, &bias, 1, 0).unwrap();
    let slow = naive_conv2d(&input, &weights, &bias, 1, 0);
    for (a, b) in fast.data().iter().zip(slow.data()) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn conv_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trial in 0..20 {
        let (input, weights, bias, stride, pad) = random_conv_case(&mut rng);
        let out = conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
        // Scalar objective: fixed random weighting of the outputs.
        let coeff = rand_tensor(&mut rng, out.shape());
        let (d_in, d_w, d_b) = conv2d_backward(&input, &weights, &coeff, stride, pad).unwrap();

        let obj_in = |x: &Tensor<f64>| {
            let o = conv2d_forward(x, &weights, &bias, stride, pad).unwrap();
            o.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum()
        };
        let g = finite_difference_grad(obj_in, &input, 1e-5);
        assert!(
            max_relative_error(&d_in, &g) < 1e-5,
            "trial {trial}: d_input off by {}",
            max_relative_error(&d_in, &g)
        );

        let obj_w = |w: &Tensor<f64>| {
            let o = conv2d_forward(&input, w, &bias, stride, pad).unwrap();
            o.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum()
        };
        let g = finite_difference_grad(obj_w, &weights, 1e-5);
        assert!(max_relative_error(&d_w, &g) < 1e-5, "trial {trial}: d_weights");

        let obj_b = |b: &Tensor<f64>| {
            let o = conv2d_forward(&input, &weights, b, stride, pad).unwrap();
            o.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum()
        };
        let g = finite_difference_grad(obj_b, &bias, 1e-5);
        assert!(max_relative_error(&d_b, &g) < 1e-5, "trial {trial}: d_bias");
    }
}

#[test]
fn dense_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for trial in 0..15 {
        let n = rng.gen_range(1..5);
        let f = rng.gen_range(1..7);
        let o = rng.gen_range(1..6);
        let input = rand_tensor(&mut rng, &[n, f]);
        let weights = rand_tensor(&mut rng, &[o, f]);
        let bias = rand_tensor(&mut rng, &[o]);
        let coeff = rand_tensor(&mut rng, &[n, o]);
        let (d_in, d_w, d_b) = dense_backward(&input, &weights, &coeff).unwrap();

        let obj = |x: &Tensor<f64>| {
            let out = dense_forward(x, &weights, &bias).unwrap();
            out.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum()
        };
        assert!(max_relative_error(&d_in, &finite_difference_grad(obj, &input, 1e-5)) < 1e-5);

        let obj = |w: &Tensor<f64>| {
            let out = dense_forward(&input, w, &bias).unwrap();
            out.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum()
        };
        assert!(max_relative_error(&d_w, &finite_difference_grad(obj, &weights, 1e-5)) < 1e-5);

        let obj = |b: &Tensor<f64>| {
            let out = dense_forward(&input, &weights, b).unwrap();
            out.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum()
        };
        assert!(
            max_relative_error(&d_b, &finite_difference_grad(obj, &bias, 1e-5)) < 1e-5,
            "trial {trial}"
        );
    }
}

#[test]
fn relu_gradient_matches_finite_differences_away_from_zero() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        // Keep inputs away from the kink so central differences are valid.
        let x = Tensor::from_fn(&[4, 6], |_| {
            let v: f64 = rng.gen_range(0.1..1.0);
            if rng.gen_bool(0.5) {
                v
            } else {
                -v
            }
        });
        let coeff = rand_tensor(&mut rng, x.shape());
        let d_x = relu_backward(&x, &coeff);
        let obj = |t: &Tensor<f64>| {
            relu_forward(t)
                .data()
                .iter()
                .zip(coeff.data())
                .map(|(a, b)| a * b)
                .sum()
        };
        let g = finite_difference_grad(obj, &x, 1e-5);
        assert!(max_relative_error(&d_x, &g) < 1e-5);
    }
}

#[test]
fn maxpool_gradient_matches_finite_differences_at_non_tied_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..10 {
        let x = rand_tensor(&mut rng, &[1, 2, 6, 6]);
        let (out, idx) = maxpool2_forward(&x).unwrap();
        let coeff = rand_tensor(&mut rng, out.shape());
        let d_x = maxpool2_backward(&idx, &coeff).unwrap();
        let obj = |t: &Tensor<f64>| {
            let (o, _) = maxpool2_forward(t).unwrap();
            o.data().iter().zip(coeff.data()).map(|(a, b)| a * b).sum()
        };
        let g = finite_difference_grad(obj, &x, 1e-6);
        assert!(max_relative_error(&d_x, &g) < 1e-5);
    }
}

#[test]
fn maxpool_forward_matches_naive_window_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let x = rand_tensor(&mut rng, &[1, 2, 6, 6]);
    let (out, _) = maxpool2_forward(&x).unwrap();
    for c in 0..2 {
        for py in 0..3 {
            for px in 0..3 {
                let mut m = f64::NEG_INFINITY;
                for dy in 0..2 {
                    for dx in 0..2 {
                        m = m.max(x.data()[(c * 6 + 2 * py + dy) * 6 + 2 * px + dx]);
                    }
                }
                assert_eq!(out.data()[(c * 3 + py) * 3 + px], m);
            }
        }
    }
}

#[test]
fn loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    for _ in 0..10 {
        let n = rng.gen_range(1..5);
        let c = rng.gen_range(2..8);
        let logits = rand_tensor(&mut rng, &[n, c]);
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..c)).collect();
        let (_, d_logits) = softmax_cross_entropy(&logits, &labels).unwrap();
        let obj = |t: &Tensor<f64>| softmax_cross_entropy(t, &labels).unwrap().0;
        let g = finite_difference_grad(obj, &logits, 1e-6);
        assert!(max_relative_error(&d_logits, &g) < 1e-6);
    }
}

#[test]
fn parallel_and_sequential_kernels_are_bit_identical() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let (input, weights, bias, stride, pad) = random_conv_case(&mut rng);
        let a = conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
        let b = seq::conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
        assert_eq!(a.data(), b.data());

        let coeff = rand_tensor(&mut rng, a.shape());
        let (ai, aw, ab) = conv2d_backward(&input, &weights, &coeff, stride, pad).unwrap();
        let (bi, bw, bb) = seq::conv2d_backward(&input, &weights, &coeff, stride, pad).unwrap();
        assert_eq!(ai.data(), bi.data());
        assert_eq!(aw.data(), bw.data());
        assert_eq!(ab.data(), bb.data());
    }

    let x = rand_tensor(&mut rng, &[3, 17]);
    let w = rand_tensor(&mut rng, &[9, 17]);
    let b = rand_tensor(&mut rng, &[9]);
    assert_eq!(
        dense_forward(&x, &w, &b).unwrap().data(),
        seq::dense_forward(&x, &w, &b).unwrap().data()
    );
    let dout = rand_tensor(&mut rng, &[3, 9]);
    let (ai, aw, ab) = dense_backward(&x, &w, &dout).unwrap();
    let (bi, bw, bb) = seq::dense_backward(&x, &w, &dout).unwrap();
    assert_eq!(ai.data(), bi.data());
    assert_eq!(aw.data(), bw.data());
    assert_eq!(ab.data(), bb.data());

    let p = rand_tensor(&mut rng, &[2, 3, 8, 8]);
    let (pa, ia) = maxpool2_forward(&p).unwrap();
    let (pb, ib) = seq::maxpool2_forward(&p).unwrap();
    assert_eq!(pa.data(), pb.data());
    assert_eq!(ia.indices(), ib.indices());
    let dp = rand_tensor(&mut rng, pa.shape());
    assert_eq!(
        maxpool2_backward(&ia, &dp).unwrap().data(),
        seq::maxpool2_backward(&ib, &dp).unwrap().data()
    );
}

#[test]
fn kernels_are_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let (input, weights, bias, stride, pad) = random_conv_case(&mut rng);
    let a = conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
    let b = conv2d_forward(&input, &weights, &bias, stride, pad).unwrap();
    assert_eq!(a.data(), b.data());
}
