//! Flat key=value run configuration covering the network, the training loop,
//! the split, and all seeds. Unknown keys are rejected; absent keys take the
//! defaults below.

use std::collections::BTreeMap;
use std::path::Path;

use tifinagh_core::model::CnnConfig;
use tifinagh_core::training::TrainConfig;
use tifinagh_core::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub shuffle_seed: u64,
    pub eval_every: usize,
    pub train_fraction: f64,
    pub split_seed: u64,
    pub init_seed: u64,
    pub conv1_out: usize,
    pub conv1_kernel: usize,
    pub conv2_out: usize,
    pub conv2_kernel: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        let c = CnnConfig::default();
        RunConfig {
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.lr,
            momentum: t.momentum,
            shuffle_seed: t.shuffle_seed,
            eval_every: t.eval_every,
            train_fraction: 0.86,
            split_seed: 7,
            init_seed: c.init_seed,
            conv1_out: c.conv1_out,
            conv1_kernel: c.conv1_kernel,
            conv2_out: c.conv2_out,
            conv2_kernel: c.conv2_kernel,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// `key=value` per line; blank lines and `#` comments allowed.
    pub fn parse(text: &str) -> Result<Self> {
        let fail = |msg: String| Error::Config {
            op: "run_config",
            msg,
        };
        let mut pairs: BTreeMap<&str, &str> = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| fail(format!("line {}: expected key=value, got {line:?}", lineno + 1)))?;
            let key = key.trim();
            if pairs.insert(key, value.trim()).is_some() {
                return Err(fail(format!("line {}: duplicate key {key:?}", lineno + 1)));
            }
        }

        let mut cfg = RunConfig::default();
        for (key, value) in pairs {
            let bad = |what: &str| fail(format!("key {key:?}: {value:?} is not a valid {what}"));
            match key {
                "epochs" => cfg.epochs = value.parse().map_err(|_| bad("count"))?,
                "batch_size" => cfg.batch_size = value.parse().map_err(|_| bad("count"))?,
                "lr" => cfg.lr = value.parse().map_err(|_| bad("number"))?,
                "momentum" => cfg.momentum = value.parse().map_err(|_| bad("number"))?,
                "shuffle_seed" => cfg.shuffle_seed = value.parse().map_err(|_| bad("seed"))?,
                "eval_every" => cfg.eval_every = value.parse().map_err(|_| bad("count"))?,
                "train_fraction" => cfg.train_fraction = value.parse().map_err(|_| bad("number"))?,
                "split_seed" => cfg.split_seed = value.parse().map_err(|_| bad("seed"))?,
                "init_seed" => cfg.init_seed = value.parse().map_err(|_| bad("seed"))?,
                "conv1_out" => cfg.conv1_out = value.parse().map_err(|_| bad("count"))?,
                "conv1_kernel" => cfg.conv1_kernel = value.parse().map_err(|_| bad("count"))?,
                "conv2_out" => cfg.conv2_out = value.parse().map_err(|_| bad("count"))?,
                "conv2_kernel" => cfg.conv2_kernel = value.parse().map_err(|_| bad("count"))?,
                other => return Err(fail(format!("unknown key {other:?}"))),
            }
        }
        // Surface bad values now rather than deep inside the run.
        cfg.cnn_config().trace()?;
        cfg.train_config().validate()?;
        if !(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0) {
            return Err(fail(format!(
                "train_fraction must be in (0, 1), got {}",
                cfg.train_fraction
            )));
        }
        Ok(cfg)
    }

    pub fn cnn_config(&self) -> CnnConfig {
        CnnConfig {
            conv1_out: self.conv1_out,
            conv1_kernel: self.conv1_kernel,
            conv2_out: self.conv2_out,
            conv2_kernel: self.conv2_kernel,
            init_seed: self.init_seed,
            ..CnnConfig::default()
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            momentum: self.momentum,
            shuffle_seed: self.shuffle_seed,
            eval_every: self.eval_every,
        }
    }
}
