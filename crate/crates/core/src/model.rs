//! The 2-conv / 2-pool / 1-dense CNN: configuration, initialization,
//! forward/backward over batches, top-k prediction, and weight persistence.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn;
use crate::tensor::{GradPair, Scalar, Tensor};

/// Network hyperparameters. The defaults trace
/// 28 -> conv(5) -> 24 -> pool -> 12 -> conv(5) -> 8 -> pool -> 4,
/// flatten 4*4*16 = 256, dense -> 33 logits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CnnConfig {
    pub conv1_out: usize,
    pub conv1_kernel: usize,
    pub conv2_out: usize,
    pub conv2_kernel: usize,
    pub pool: usize,
    pub n_classes: usize,
    pub input_side: usize,
    pub init_seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            conv1_out: 8,
            conv1_kernel: 5,
            conv2_out: 16,
            conv2_kernel: 5,
            pool: 2,
            n_classes: 33,
            input_side: 28,
            init_seed: 42,
        }
    }
}

/// Feature-map side lengths derived from a config.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FeatureTrace {
    pub conv1_side: usize,
    pub pool1_side: usize,
    pub conv2_side: usize,
    pub pool2_side: usize,
    pub flat: usize,
}

impl CnnConfig {
    /// Checks that every intermediate feature map has a positive integer
    /// side, returning the trace.
    pub fn trace(&self) -> Result<FeatureTrace> {
        let fail = |msg: String| Error::config("cnn_config", msg);
        if self.pool != 2 {
            return Err(fail(format!("pool must be 2 (2x2 max-pool), got {}", self.pool)));
        }
        if self.n_classes == 0 {
            return Err(fail("n_classes must be >= 1".into()));
        }
        let step = |side: usize, kernel: usize, what: &str| -> Result<usize> {
            if kernel == 0 || side < kernel {
                return Err(fail(format!(
                    "{what}: kernel {kernel} does not fit side {side}"
                )));
            }
            Ok(side - kernel + 1)
        };
        let conv1_side = step(self.input_side, self.conv1_kernel, "conv1")?;
        if conv1_side % 2 != 0 {
            return Err(fail(format!("pool1: side {conv1_side} is not even")));
        }
        let pool1_side = conv1_side / 2;
        let conv2_side = step(pool1_side, self.conv2_kernel, "conv2")?;
        if conv2_side % 2 != 0 {
            return Err(fail(format!("pool2: side {conv2_side} is not even")));
        }
        let pool2_side = conv2_side / 2;
        Ok(FeatureTrace {
            conv1_side,
            pool1_side,
            conv2_side,
            pool2_side,
            flat: pool2_side * pool2_side * self.conv2_out,
        })
    }

    /// Total learnable parameter count (weights + biases).
    pub fn parameter_count(&self) -> Result<usize> {
        let trace = self.trace()?;
        let conv1 = self.conv1_out * self.conv1_kernel * self.conv1_kernel + self.conv1_out;
        let conv2 = self.conv2_out * self.conv1_out * self.conv2_kernel * self.conv2_kernel
            + self.conv2_out;
        let dense = self.n_classes * trace.flat + self.n_classes;
        Ok(conv1 + conv2 + dense)
    }
}

struct ForwardCache<T: Scalar> {
    input: Tensor<T>,
    conv1_out: Tensor<T>,
    pool1_idx: nn::PoolIndices,
    pool1_out: Tensor<T>,
    conv2_out: Tensor<T>,
    pool2_idx: nn::PoolIndices,
    flat: Tensor<T>,
}

/// Parameter names in storage order; also the weight-file tensor names.
pub const PARAM_NAMES: [&str; 6] = [
    "conv1_w", "conv1_b", "conv2_w", "conv2_b", "dense_w", "dense_b",
];

pub struct Model<T: Scalar = f32> {
    cfg: CnnConfig,
    params: [GradPair<T>; 6],
    cache: Option<ForwardCache<T>>,
}

impl<T: Scalar> std::fmt::Debug for Model<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("cfg", &self.cfg)
            .field("parameters", &self.parameter_count())
            .field("cached", &self.cache.is_some())
            .finish()
    }
}

/// Glorot-uniform initialization: weights in +-sqrt(6/(fan_in+fan_out)),
/// biases zero. The random stream is drawn in f64 so f32 and f64 models with
/// the same seed share values.
pub fn init_model<T: Scalar>(cfg: CnnConfig, seed: u64) -> Result<Model<T>> {
    let trace = cfg.trace()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut glorot = |shape: &[usize], fan_in: usize, fan_out: usize| -> Tensor<T> {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        Tensor::from_fn(shape, |_| T::from_f64(rng.gen_range(-limit..limit)))
    };

    let k1 = cfg.conv1_kernel;
    let k2 = cfg.conv2_kernel;
    let conv1_w = glorot(&[cfg.conv1_out, 1, k1, k1], k1 * k1, cfg.conv1_out * k1 * k1);
    let conv2_w = glorot(
        &[cfg.conv2_out, cfg.conv1_out, k2, k2],
        cfg.conv1_out * k2 * k2,
        cfg.conv2_out * k2 * k2,
    );
    let dense_w = glorot(&[cfg.n_classes, trace.flat], trace.flat, cfg.n_classes);

    Ok(Model {
        cfg,
        params: [
            GradPair::new(conv1_w),
            GradPair::new(Tensor::zeros(&[cfg.conv1_out])),
            GradPair::new(conv2_w),
            GradPair::new(Tensor::zeros(&[cfg.conv2_out])),
            GradPair::new(dense_w),
            GradPair::new(Tensor::zeros(&[cfg.n_classes])),
        ],
        cache: None,
    })
}

impl<T: Scalar> Model<T> {
    pub fn cfg(&self) -> &CnnConfig {
        &self.cfg
    }

    /// Parameters with their gradient buffers, in [`PARAM_NAMES`] order.
    pub fn params(&self) -> &[GradPair<T>; 6] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [GradPair<T>; 6] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    fn run(&self, batch: &Tensor<T>) -> Result<(Tensor<T>, ForwardCache<T>)> {
        let side = self.cfg.input_side;
        if batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != side || batch.dim(3) != side {
            return Err(Error::Dimension {
                op: "model_forward",
                axis: "input",
                expected: side,
                got: if batch.rank() == 4 { batch.dim(2) } else { 0 },
            });
        }
        let n = batch.dim(0);
        let trace = self.cfg.trace()?;
        let [conv1, conv1_b, conv2, conv2_b, dense, dense_b] = &self.params;

        let conv1_out = nn::conv2d_forward(batch, &conv1.value, &conv1_b.value, 1, 0)?;
        let relu1 = nn::relu_forward(&conv1_out);
        let (pool1_out, pool1_idx) = nn::maxpool2_forward(&relu1)?;
        let conv2_out = nn::conv2d_forward(&pool1_out, &conv2.value, &conv2_b.value, 1, 0)?;
        let relu2 = nn::relu_forward(&conv2_out);
        let (pool2_out, pool2_idx) = nn::maxpool2_forward(&relu2)?;
        let flat = pool2_out.reshaped(&[n, trace.flat])?;
        let logits = nn::dense_forward(&flat, &dense.value, &dense_b.value)?;

        Ok((
            logits,
            ForwardCache {
                input: batch.clone(),
                conv1_out,
                pool1_idx,
                pool1_out,
                conv2_out,
                pool2_idx,
                flat,
            },
        ))
    }

    /// Runs the network, caching intermediates for [`Model::backward`].
    /// Input must be exactly `[N, 1, side, side]`.
    pub fn forward(&mut self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let (logits, cache) = self.run(batch)?;
        self.cache = Some(cache);
        Ok(logits)
    }

    /// Forward pass without touching the backward cache; usable on a shared
    /// model reference for inference and evaluation.
    pub fn infer(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.run(batch)?.0)
    }

    /// Exact chain rule from `d_logits` back to every parameter; gradients
    /// land in the [`GradPair`]s. The forward cache is kept, so calling
    /// backward twice with the same `d_logits` reproduces the same gradients.
    pub fn backward(&mut self, d_logits: &Tensor<T>) -> Result<()> {
        let cache = self
            .cache
            .as_ref()
            .ok_or(Error::State("backward called before forward"))?;
        let [conv1, conv1_b, conv2, conv2_b, dense, dense_b] = &mut self.params;

        let (d_flat, d_dense_w, d_dense_b) =
            nn::dense_backward(&cache.flat, &dense.value, d_logits)?;
        let n = cache.input.dim(0);
        let trace = self.cfg.trace()?;
        let d_pool2 = d_flat.reshaped(&[
            n,
            self.cfg.conv2_out,
            trace.pool2_side,
            trace.pool2_side,
        ])?;
        let d_relu2 = nn::maxpool2_backward(&cache.pool2_idx, &d_pool2)?;
        let d_conv2 = nn::relu_backward(&cache.conv2_out, &d_relu2);
        let (d_pool1, d_conv2_w, d_conv2_b) =
            nn::conv2d_backward(&cache.pool1_out, &conv2.value, &d_conv2, 1, 0)?;
        let d_relu1 = nn::maxpool2_backward(&cache.pool1_idx, &d_pool1)?;
        let d_conv1 = nn::relu_backward(&cache.conv1_out, &d_relu1);
        let (_, d_conv1_w, d_conv1_b) =
            nn::conv2d_backward(&cache.input, &conv1.value, &d_conv1, 1, 0)?;

        conv1.grad = d_conv1_w;
        conv1_b.grad = d_conv1_b;
        conv2.grad = d_conv2_w;
        conv2_b.grad = d_conv2_b;
        dense.grad = d_dense_w;
        dense_b.grad = d_dense_b;
        Ok(())
    }
}

/// Indices of the k largest logits per row, descending; ties break to the
/// lower index.
pub fn predict_topk<T: Scalar>(logits: &Tensor<T>, k: usize) -> Result<Vec<Vec<usize>>> {
    if logits.rank() != 2 {
        return Err(Error::Dimension {
            op: "predict_topk",
            axis: "logits rank",
            expected: 2,
            got: logits.rank(),
        });
    }
    let (n, c) = (logits.dim(0), logits.dim(1));
    if k == 0 || k > c {
        return Err(Error::config(
            "predict_topk",
            format!("k must be in [1, {c}], got {k}"),
        ));
    }
    let mut out = Vec::with_capacity(n);
    for row in 0..n {
        let x = &logits.data()[row * c..(row + 1) * c];
        let mut order: Vec<usize> = (0..c).collect();
        // Stable sort on descending value keeps lower indices first on ties.
        order.sort_by(|&a, &b| x[b].partial_cmp(&x[a]).expect("finite logits"));
        order.truncate(k);
        out.push(order);
    }
    Ok(out)
}

const WEIGHTS_TAG: &[u8; 8] = b"TIFCNN1\0";

/// Flat binary weight file: 8-byte tag, then per tensor (u32 LE name length,
/// name bytes, u32 LE rank, u32 LE dims, little-endian f32 payload), in
/// [`PARAM_NAMES`] order. Round-trips bit-exactly.
pub fn save_weights(model: &Model<f32>, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.write_all(WEIGHTS_TAG)?;
    for (pair, name) in model.params.iter().zip(PARAM_NAMES) {
        out.write_all(&(name.len() as u32).to_le_bytes())?;
        out.write_all(name.as_bytes())?;
        out.write_all(&(pair.value.rank() as u32).to_le_bytes())?;
        for &d in pair.value.shape() {
            out.write_all(&(d as u32).to_le_bytes())?;
        }
        for &v in pair.value.data() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    fs::write(path, out)?;
    Ok(())
}

pub fn load_weights(path: &Path, cfg: CnnConfig) -> Result<Model<f32>> {
    let bytes = fs::read(path)?;
    let mut model = init_model::<f32>(cfg, cfg.init_seed)?;

    fn fail(tensor: &str, msg: String) -> Error {
        Error::WeightFormat {
            tensor: tensor.to_string(),
            msg,
        }
    }
    fn take<'a>(bytes: &'a [u8], pos: &mut usize, n: usize, tensor: &str) -> Result<&'a [u8]> {
        if bytes.len() < *pos + n {
            return Err(fail(tensor, format!("file truncated at byte {}", bytes.len())));
        }
        let s = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(s)
    }
    fn read_u32(s: &[u8]) -> usize {
        u32::from_le_bytes([s[0], s[1], s[2], s[3]]) as usize
    }

    if bytes.len() < 8 || &bytes[0..8] != WEIGHTS_TAG {
        return Err(fail("<header>", "bad or missing format tag".into()));
    }
    let mut pos = 8usize;

    for (pair, name) in model.params.iter_mut().zip(PARAM_NAMES) {
        let name_len = read_u32(take(&bytes, &mut pos, 4, name)?);
        let stored = take(&bytes, &mut pos, name_len, name)?.to_vec();
        if stored != name.as_bytes() {
            return Err(fail(
                name,
                format!(
                    "expected tensor {name:?}, found {:?}",
                    String::from_utf8_lossy(&stored)
                ),
            ));
        }
        let rank = read_u32(take(&bytes, &mut pos, 4, name)?);
        if rank != pair.value.rank() {
            return Err(fail(
                name,
                format!("rank {} does not match expected {}", rank, pair.value.rank()),
            ));
        }
        let mut dims = Vec::with_capacity(rank);
        for _ in 0..rank {
            dims.push(read_u32(take(&bytes, &mut pos, 4, name)?));
        }
        if dims != pair.value.shape() {
            return Err(fail(
                name,
                format!("shape {:?} does not match expected {:?}", dims, pair.value.shape()),
            ));
        }
        let payload = take(&bytes, &mut pos, pair.value.len() * 4, name)?;
        for (v, chunk) in pair.value.data_mut().iter_mut().zip(payload.chunks_exact(4)) {
            *v = f32::from_le_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]);
        }
    }
    if pos != bytes.len() {
        return Err(fail(
            "<trailer>",
            format!("{} unexpected trailing bytes", bytes.len() - pos),
        ));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_has_expected_trace_and_param_count() {
        let cfg = CnnConfig::default();
        let trace = cfg.trace().unwrap();
        assert_eq!(
            (trace.conv1_side, trace.pool1_side, trace.conv2_side, trace.pool2_side),
            (24, 12, 8, 4)
        );
        assert_eq!(trace.flat, 256);
        // conv1 8*1*5*5+8 = 208; conv2 16*8*5*5+16 = 3216; dense 33*256+33 = 8481
        assert_eq!(cfg.parameter_count().unwrap(), 11_905);
        let model = init_model::<f32>(cfg, 1).unwrap();
        assert_eq!(model.parameter_count(), 11_905);
    }

    #[test]
    fn bad_geometry_is_a_config_error() {
        let cfg = CnnConfig {
            conv1_kernel: 6, // 28 -> 23, odd: pool fails
            ..CnnConfig::default()
        };
        assert!(matches!(cfg.trace(), Err(Error::Config { .. })));
    }

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let cfg = CnnConfig::default();
        let a = init_model::<f32>(cfg, 7).unwrap();
        let b = init_model::<f32>(cfg, 7).unwrap();
        for (x, y) in a.params().iter().zip(b.params()) {
            assert_eq!(x.value.data(), y.value.data());
        }
        assert!(a.params()[1].value.data().iter().all(|&v| v == 0.0));
        assert!(a.params()[3].value.data().iter().all(|&v| v == 0.0));
        assert!(a.params()[5].value.data().iter().all(|&v| v == 0.0));
        let c = init_model::<f32>(cfg, 8).unwrap();
        assert_ne!(a.params()[0].value.data(), c.params()[0].value.data());
    }

    #[test]
    fn zero_image_yields_zero_logits_at_init() {
        let mut model = init_model::<f32>(CnnConfig::default(), 3).unwrap();
        let batch = Tensor::<f32>::zeros(&[1, 1, 28, 28]);
        let logits = model.forward(&batch).unwrap();
        assert_eq!(logits.shape(), &[1, 33]);
        // Biases are zero, so a zero image propagates to zero logits.
        assert!(logits.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn batch_shape_contract() {
        let mut model = init_model::<f32>(CnnConfig::default(), 3).unwrap();
        let batch = Tensor::from_fn(&[7, 1, 28, 28], |i| (i % 255) as f32 / 255.0);
        let logits = model.forward(&batch).unwrap();
        assert_eq!(logits.shape(), &[7, 33]);
        let bad = Tensor::<f32>::zeros(&[1, 1, 27, 27]);
        assert!(model.forward(&bad).is_err());
    }

    #[test]
    fn backward_before_forward_is_a_state_error() {
        let mut model = init_model::<f32>(CnnConfig::default(), 3).unwrap();
        let d = Tensor::<f32>::zeros(&[1, 33]);
        assert!(matches!(model.backward(&d), Err(Error::State(_))));
    }

    #[test]
    fn zero_upstream_gradient_gives_zero_parameter_gradients() {
        let mut model = init_model::<f32>(CnnConfig::default(), 3).unwrap();
        let batch = Tensor::from_fn(&[2, 1, 28, 28], |i| (i % 100) as f32 / 100.0);
        model.forward(&batch).unwrap();
        model.backward(&Tensor::zeros(&[2, 33])).unwrap();
        for p in model.params() {
            assert!(p.grad.data().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn repeated_backward_from_same_cache_is_identical() {
        let mut model = init_model::<f32>(CnnConfig::default(), 5).unwrap();
        let batch = Tensor::from_fn(&[2, 1, 28, 28], |i| ((i * 13) % 251) as f32 / 251.0);
        model.forward(&batch).unwrap();
        let d = Tensor::from_fn(&[2, 33], |i| (i as f32 * 0.01) - 0.15);
        model.backward(&d).unwrap();
        let first: Vec<Vec<f32>> = model.params().iter().map(|p| p.grad.data().to_vec()).collect();
        model.backward(&d).unwrap();
        for (p, f) in model.params().iter().zip(&first) {
            assert_eq!(p.grad.data(), &f[..]);
        }
    }

    #[test]
    fn topk_picks_largest_with_tie_rule() {
        let mut logits = Tensor::<f64>::zeros(&[1, 8]);
        logits.data_mut()[4] = 3.0;
        assert_eq!(predict_topk(&logits, 1).unwrap()[0], vec![4]);

        let equal = Tensor::<f64>::zeros(&[1, 8]);
        assert_eq!(predict_topk(&equal, 3).unwrap()[0], vec![0, 1, 2]);

        assert!(predict_topk(&equal, 0).is_err());
        assert!(predict_topk(&equal, 9).is_err());
    }

    #[test]
    fn topk_matches_full_sort_oracle() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let logits = Tensor::from_fn(&[6, 33], |_| rng.gen_range(-2.0..2.0));
        let top = predict_topk(&logits, 5).unwrap();
        for row in 0..6 {
            let x = &logits.data()[row * 33..(row + 1) * 33];
            let mut pairs: Vec<(usize, f64)> = x.iter().copied().enumerate().collect();
            pairs.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
            let expect: Vec<usize> = pairs.iter().take(5).map(|p| p.0).collect();
            assert_eq!(top[row], expect);
        }
    }

    #[test]
    fn top1_is_prefix_of_top5() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let logits = Tensor::from_fn(&[10, 33], |_| rng.gen_range(-1.0..1.0));
        let t1 = predict_topk(&logits, 1).unwrap();
        let t5 = predict_topk(&logits, 5).unwrap();
        for (a, b) in t1.iter().zip(&t5) {
            assert_eq!(a[0], b[0]);
        }
    }

    #[test]
    fn weights_round_trip_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let model = init_model::<f32>(CnnConfig::default(), 11).unwrap();
        save_weights(&model, &path).unwrap();
        let loaded = load_weights(&path, CnnConfig::default()).unwrap();
        for (a, b) in model.params().iter().zip(loaded.params()) {
            assert_eq!(a.value.data(), b.value.data());
        }
    }

    #[test]
    fn truncated_weight_file_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let model = init_model::<f32>(CnnConfig::default(), 11).unwrap();
        save_weights(&model, &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            load_weights(&path, CnnConfig::default()).unwrap_err(),
            Error::WeightFormat { .. }
        ));
    }

    #[test]
    fn config_mismatch_names_conv1() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("w.bin");
        let model = init_model::<f32>(CnnConfig::default(), 11).unwrap();
        save_weights(&model, &path).unwrap();
        let other = CnnConfig {
            conv1_out: 4,
            ..CnnConfig::default()
        };
        match load_weights(&path, other).unwrap_err() {
            Error::WeightFormat { tensor, .. } => assert_eq!(tensor, "conv1_w"),
            other => panic!("unexpected {other}"),
        }
    }
}
