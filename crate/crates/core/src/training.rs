//! Deterministic epoch loop with per-epoch train/test metrics, CSV export,
//! and static SVG accuracy/loss curves.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::Corpus;
use crate::error::{Error, Result};
use crate::model::{predict_topk, Model};
use crate::nn::{self, softmax_cross_entropy, OptimState};
use crate::tensor::{GradPair, Tensor};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub shuffle_seed: u64,
    /// Fresh evaluation every this many epochs (always on the first and last
    /// epoch); intermediate epochs reuse the previous metrics so the history
    /// still has one record per epoch.
    pub eval_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            lr: 0.01,
            momentum: 0.9,
            shuffle_seed: 1,
            eval_every: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::config("train", "epochs must be >= 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("train", "batch_size must be >= 1"));
        }
        if self.lr <= 0.0 {
            return Err(Error::config("train", format!("lr must be > 0, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::config(
                "train",
                format!("momentum must be in [0, 1), got {}", self.momentum),
            ));
        }
        if self.eval_every == 0 {
            return Err(Error::config("train", "eval_every must be >= 1"));
        }
        Ok(())
    }
}

/// Mean loss plus top-1/top-5 accuracy over a corpus.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Metrics {
    pub loss: f64,
    pub top1: f64,
    pub top5: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train: Metrics,
    pub test: Metrics,
}

/// One record per epoch, epochs numbered 1..=n.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub records: Vec<EpochRecord>,
}

/// Pixel tensor (`[N,1,28,28]`, values scaled to [0,1]) plus labels.
pub fn corpus_tensors(corpus: &Corpus) -> (Tensor<f32>, Vec<usize>) {
    let side = crate::preprocess::GLYPH_SIDE;
    let n = corpus.len();
    let mut data = Vec::with_capacity(n * side * side);
    let mut labels = Vec::with_capacity(n);
    for ex in corpus.examples() {
        data.extend(ex.glyph.pixels().iter().map(|&p| p as f32 / 255.0));
        labels.push(ex.label as usize);
    }
    (
        Tensor::new(&[n, 1, side, side], data).expect("consistent corpus dims"),
        labels,
    )
}

fn gather_batch(
    inputs: &Tensor<f32>,
    labels: &[usize],
    indices: &[usize],
) -> (Tensor<f32>, Vec<usize>) {
    let row = inputs.len() / inputs.dim(0);
    let mut data = Vec::with_capacity(indices.len() * row);
    let mut batch_labels = Vec::with_capacity(indices.len());
    for &i in indices {
        data.extend_from_slice(&inputs.data()[i * row..(i + 1) * row]);
        batch_labels.push(labels[i]);
    }
    let side = inputs.dim(2);
    (
        Tensor::new(&[indices.len(), 1, side, side], data).expect("batch dims"),
        batch_labels,
    )
}

const EVAL_BATCH: usize = 256;

/// Mean cross-entropy and top-1/top-5 accuracy. Per-example losses are
/// sorted before summation, so the metrics are invariant under corpus
/// permutation.
pub fn evaluate(model: &Model<f32>, corpus: &Corpus) -> Result<Metrics> {
    if corpus.is_empty() {
        return Err(Error::config("evaluate", "empty corpus"));
    }
    let (inputs, labels) = corpus_tensors(corpus);
    let n = corpus.len();
    let mut losses: Vec<f64> = Vec::with_capacity(n);
    let mut hit1 = 0usize;
    let mut hit5 = 0usize;
    let k5 = 5.min(model.cfg().n_classes);

    let all: Vec<usize> = (0..n).collect();
    for chunk in all.chunks(EVAL_BATCH) {
        let (batch, batch_labels) = gather_batch(&inputs, &labels, chunk);
        let logits = model.infer(&batch)?;
        let c = logits.dim(1);
        for (row, &label) in batch_labels.iter().enumerate() {
            if label >= c {
                return Err(Error::Label {
                    row: chunk[row],
                    label,
                    n_classes: c,
                });
            }
            let x = &logits.data()[row * c..(row + 1) * c];
            // Stable per-row loss: logsumexp(x) - x[label], in f64.
            let max = x.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
            let denom: f64 = x.iter().map(|&v| ((v as f64) - max).exp()).sum();
            losses.push(denom.ln() + max - x[label] as f64);
        }
        let top = predict_topk(&logits, k5)?;
        for (row, &label) in batch_labels.iter().enumerate() {
            if top[row][0] == label {
                hit1 += 1;
            }
            if top[row].contains(&label) {
                hit5 += 1;
            }
        }
    }

    losses.sort_by(|a, b| a.partial_cmp(b).expect("finite losses"));
    let loss = losses.iter().sum::<f64>() / n as f64;
    Ok(Metrics {
        loss,
        top1: hit1 as f64 / n as f64,
        top5: hit5 as f64 / n as f64,
    })
}

fn sgd_step(model: &mut Model<f32>, state: &mut OptimState<f32>) -> Result<()> {
    let mut values: Vec<&mut Tensor<f32>> = Vec::with_capacity(6);
    let mut grads: Vec<&Tensor<f32>> = Vec::with_capacity(6);
    for pair in model.params_mut().iter_mut() {
        let GradPair { value, grad } = pair;
        values.push(value);
        grads.push(&*grad);
    }
    nn::sgd_momentum_step(&mut values, &grads, state)
}

/// Minibatch SGD with a seeded shuffle per epoch (the last partial batch is
/// included) followed by evaluation on both corpora. Fully deterministic
/// given (model, seeds, config, corpora): repeated runs produce bit-identical
/// histories and weights.
pub fn train(
    mut model: Model<f32>,
    train_corpus: &Corpus,
    test_corpus: &Corpus,
    cfg: &TrainConfig,
) -> Result<(Model<f32>, History)> {
    cfg.validate()?;
    if train_corpus.is_empty() || test_corpus.is_empty() {
        return Err(Error::config("train", "corpora must be nonempty"));
    }
    let n_classes = model.cfg().n_classes;
    for (row, ex) in train_corpus.examples().iter().enumerate() {
        if ex.label as usize >= n_classes {
            return Err(Error::Label {
                row,
                label: ex.label as usize,
                n_classes,
            });
        }
    }

    let (inputs, labels) = corpus_tensors(train_corpus);
    let shapes: Vec<&[usize]> = model.params().iter().map(|p| p.value.shape()).collect();
    let mut state = OptimState::new(cfg.lr, cfg.momentum, &shapes)?;

    let mut history = History::default();
    let mut last: Option<(Metrics, Metrics)> = None;
    for epoch in 1..=cfg.epochs {
        // Independent shuffle stream per epoch.
        let mut rng = ChaCha8Rng::seed_from_u64(
            cfg.shuffle_seed
                .wrapping_add((epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
        );
        let mut order: Vec<usize> = (0..train_corpus.len()).collect();
        order.shuffle(&mut rng);

        for chunk in order.chunks(cfg.batch_size) {
            let (batch, batch_labels) = gather_batch(&inputs, &labels, chunk);
            let logits = model.forward(&batch)?;
            let (_, d_logits) = softmax_cross_entropy(&logits, &batch_labels)?;
            model.backward(&d_logits)?;
            sgd_step(&mut model, &mut state)?;
        }

        let fresh = epoch % cfg.eval_every == 0 || epoch == 1 || epoch == cfg.epochs;
        let (train_m, test_m) = if fresh || last.is_none() {
            let m = (evaluate(&model, train_corpus)?, evaluate(&model, test_corpus)?);
            last = Some(m);
            m
        } else {
            last.expect("set on first epoch")
        };
        history.records.push(EpochRecord {
            epoch,
            train: train_m,
            test: test_m,
        });
    }
    Ok((model, history))
}

/// CSV with the exact header
/// `epoch,train_loss,train_top1,test_loss,test_top1,train_top5,test_top5`
/// and one full-precision row per epoch; re-parsing reproduces the history
/// numerically exactly.
pub fn export_history_csv(history: &History, path: &Path) -> Result<()> {
    fs::write(path, history_csv_string(history)?)?;
    Ok(())
}

pub fn history_csv_string(history: &History) -> Result<String> {
    if history.records.is_empty() {
        return Err(Error::config("export_history", "empty history"));
    }
    let mut out = String::from("epoch,train_loss,train_top1,test_loss,test_top1,train_top5,test_top5\n");
    for r in &history.records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epoch, r.train.loss, r.train.top1, r.test.loss, r.test.top1, r.train.top5, r.test.top5
        ));
    }
    Ok(out)
}

pub fn parse_history_csv(text: &str) -> Result<History> {
    let fail = |msg: String| Error::config("parse_history", msg);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| fail("empty file".into()))?;
    if header != "epoch,train_loss,train_top1,test_loss,test_top1,train_top5,test_top5" {
        return Err(fail(format!("unexpected header {header:?}")));
    }
    let mut history = History::default();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(fail(format!("line {}: expected 7 fields", i + 2)));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| fail(format!("line {}: bad number {s:?}", i + 2)))
        };
        history.records.push(EpochRecord {
            epoch: fields[0]
                .parse()
                .map_err(|_| fail(format!("line {}: bad epoch", i + 2)))?,
            train: Metrics {
                loss: num(fields[1])?,
                top1: num(fields[2])?,
                top5: num(fields[5])?,
            },
            test: Metrics {
                loss: num(fields[3])?,
                top1: num(fields[4])?,
                top5: num(fields[6])?,
            },
        });
    }
    Ok(history)
}

/// Static SVG with two line charts: loss (train/test) and top-1 accuracy
/// (train/test) across epochs.
pub fn render_curves_svg(history: &History, path: &Path) -> Result<()> {
    fs::write(path, curves_svg_string(history)?)?;
    Ok(())
}

pub fn curves_svg_string(history: &History) -> Result<String> {
    if history.records.is_empty() {
        return Err(Error::config("render_curves", "empty history"));
    }
    let records = &history.records;
    let max_loss = records
        .iter()
        .flat_map(|r| [r.train.loss, r.test.loss])
        .fold(f64::MIN_POSITIVE, f64::max);

    let chart = |x0: f64, title: &str, ymax: f64, series: [(&str, Vec<f64>, &str); 2]| -> String {
        let (w, h, y0) = (380.0, 280.0, 50.0);
        let n = records.len();
        let px = |i: usize| {
            if n == 1 {
                x0 + w / 2.0
            } else {
                x0 + w * i as f64 / (n - 1) as f64
            }
        };
        let py = |v: f64| y0 + h - (v / ymax).clamp(0.0, 1.0) * h;
        let mut s = format!("  <g class=\"chart\">\n    <text x=\"{}\" y=\"30\" font-size=\"16\">{title}</text>\n", x0 + w / 2.0 - 60.0);
        s.push_str(&format!(
            "    <rect x=\"{x0}\" y=\"{y0}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"#999\"/>\n"
        ));
        s.push_str(&format!(
            "    <text x=\"{}\" y=\"{}\" font-size=\"11\">0</text>\n    <text x=\"{}\" y=\"{}\" font-size=\"11\">{ymax:.3}</text>\n",
            x0 - 28.0, y0 + h + 4.0, x0 - 44.0, y0 + 10.0
        ));
        s.push_str(&format!(
            "    <text x=\"{}\" y=\"{}\" font-size=\"11\">epoch {}</text>\n",
            x0 + w - 50.0, y0 + h + 16.0, records[n - 1].epoch
        ));
        for (idx, (name, values, color)) in series.iter().enumerate() {
            let points: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(i, &v)| format!("{:.2},{:.2}", px(i), py(v)))
                .collect();
            s.push_str(&format!(
                "    <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
                points.join(" ")
            ));
            s.push_str(&format!(
                "    <text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>\n",
                x0 + 10.0 + idx as f64 * 80.0, y0 + h + 30.0
            ));
        }
        s.push_str("  </g>\n");
        s
    };

    let mut svg = String::from(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"960\" height=\"400\" viewBox=\"0 0 960 400\">\n",
    );
    svg.push_str(&chart(
        60.0,
        "loss",
        max_loss * 1.05,
        [
            ("train", records.iter().map(|r| r.train.loss).collect(), "#1f77b4"),
            ("test", records.iter().map(|r| r.test.loss).collect(), "#d62728"),
        ],
    ));
    svg.push_str(&chart(
        540.0,
        "top-1 accuracy",
        1.0,
        [
            ("train", records.iter().map(|r| r.train.top1).collect(), "#1f77b4"),
            ("test", records.iter().map(|r| r.test.top1).collect(), "#d62728"),
        ],
    ));
    svg.push_str("</svg>\n");
    Ok(svg)
}
