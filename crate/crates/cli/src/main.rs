//! Single entry point for the recognition pipeline: synthesize a corpus,
//! ingest captured images, preprocess single glyphs, train, evaluate, and
//! run inference.
//!
//! Exit codes: 0 success, 2 usage/format/config errors, 3 data errors
//! (no foreground ink, ingestion problems).

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::RunConfig;
use tifinagh_core::dataset::{
    load_image_dir, read_idx_with_writers, split_by_writer, synth_corpus, write_idx,
    write_writer_sidecar, Corpus, LabelRegistry,
};
use tifinagh_core::model::{init_model, load_weights, predict_topk, save_weights};
use tifinagh_core::preprocess::{preprocess_glyph, read_pgm, write_pgm};
use tifinagh_core::training::{
    evaluate, export_history_csv, render_curves_svg, train, Metrics,
};
use tifinagh_core::{Error, Result, Tensor};

pub const IMAGES_FILE: &str = "images-idx3-ubyte";
pub const LABELS_FILE: &str = "labels-idx1-ubyte";
pub const WRITERS_FILE: &str = "writers.txt";

#[derive(Parser)]
#[command(name = "tifinagh", about = "Handwritten Tifinagh character recognition pipeline")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic writer-structured corpus as IDX + sidecar.
    Synth {
        /// Number of writers (33 glyphs each).
        #[arg(long, default_value_t = 102)]
        writers: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Output directory for the IDX pair and writer sidecar.
        #[arg(long)]
        out: PathBuf,
    },
    /// Ingest root/<writer_id>/<label>.pgm into an IDX dataset.
    BuildDataset {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Normalize a single PGM glyph to the 28x28 format.
    Preprocess {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Writer-split the dataset, train, and write weights + curves.
    Train {
        /// Directory holding the IDX pair and writer sidecar.
        #[arg(long)]
        data: PathBuf,
        /// key=value run configuration (defaults apply when omitted).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate saved weights over a dataset directory.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Classify one image, printing the top-k classes with probabilities.
    Infer {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 5)]
        topk: usize,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 3 for data-content problems, 2 for everything else.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NoForeground { .. } | Error::Ingest { .. } => 3,
        _ => 2,
    }
}

fn load_config(path: &Option<PathBuf>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::from_file(p),
        None => Ok(RunConfig::default()),
    }
}

fn load_dataset(dir: &Path, registry: &LabelRegistry) -> Result<Corpus> {
    read_idx_with_writers(
        &dir.join(IMAGES_FILE),
        &dir.join(LABELS_FILE),
        &dir.join(WRITERS_FILE),
        registry,
    )
}

fn write_dataset(corpus: &Corpus, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_idx(corpus, &dir.join(IMAGES_FILE), &dir.join(LABELS_FILE))?;
    write_writer_sidecar(corpus, &dir.join(WRITERS_FILE))
}

fn print_metrics(prefix: &str, m: &Metrics) {
    println!(
        "{prefix}: loss={:.6} top1={:.4} top5={:.4}",
        m.loss, m.top1, m.top5
    );
}

fn run(cmd: Cmd) -> Result<()> {
    let registry = LabelRegistry::ircam33();
    match cmd {
        Cmd::Synth { writers, seed, out } => {
            let corpus = synth_corpus(writers, seed, &registry)?;
            write_dataset(&corpus, &out)?;
            println!("wrote {} examples ({} writers) to {}", corpus.len(), writers, out.display());
        }
        Cmd::BuildDataset { input, out } => {
            let corpus = load_image_dir(&input, &registry)?;
            write_dataset(&corpus, &out)?;
            println!("wrote {} examples to {}", corpus.len(), out.display());
        }
        Cmd::Preprocess { input, out } => {
            let raw = read_pgm(&input)?;
            let glyph = preprocess_glyph(&raw)?;
            write_pgm(&out, &glyph.to_raw())?;
            println!("wrote {}", out.display());
        }
        Cmd::Train { data, config, out } => {
            let cfg = load_config(&config)?;
            let corpus = load_dataset(&data, &registry)?;
            let split = split_by_writer(&corpus, cfg.train_fraction, cfg.split_seed)?;
            println!(
                "split: {} train writers ({} examples), {} test writers ({} examples)",
                split.train_writers.len(),
                split.train.len(),
                split.test_writers.len(),
                split.test.len()
            );
            let model = init_model(cfg.cnn_config(), cfg.init_seed)?;
            let (model, history) = train(model, &split.train, &split.test, &cfg.train_config())?;

            std::fs::create_dir_all(&out)?;
            save_weights(&model, &out.join("weights.bin"))?;
            export_history_csv(&history, &out.join("history.csv"))?;
            render_curves_svg(&history, &out.join("curves.svg"))?;

            let last = history.records.last().expect("epochs >= 1");
            print_metrics("final train", &last.train);
            print_metrics("final test", &last.test);
            println!("artifacts in {}", out.display());
        }
        Cmd::Eval { data, weights, config } => {
            let cfg = load_config(&config)?;
            let corpus = load_dataset(&data, &registry)?;
            let model = load_weights(&weights, cfg.cnn_config())?;
            let m = evaluate(&model, &corpus)?;
            print_metrics("eval", &m);
        }
        Cmd::Infer {
            weights,
            image,
            topk,
            config,
        } => {
            let cfg = load_config(&config)?;
            let model = load_weights(&weights, cfg.cnn_config())?;
            let raw = read_pgm(&image)?;
            let glyph = preprocess_glyph(&raw)?;
            let side = tifinagh_core::preprocess::GLYPH_SIDE;
            let data: Vec<f32> = glyph.pixels().iter().map(|&p| p as f32 / 255.0).collect();
            let batch = Tensor::new(&[1, 1, side, side], data)?;
            let logits = model.infer(&batch)?;
            let top = predict_topk(&logits, topk)?;

            // Softmax over the single row for readable confidences.
            let row = logits.data();
            let max = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            let denom: f32 = row.iter().map(|&v| (v - max).exp()).sum();
            for &class in &top[0] {
                let p = (row[class] - max).exp() / denom;
                println!("{class}\t{}\t{:.6}", registry.name(class)?, p);
            }
        }
    }
    Ok(())
}
