//! Labeled corpus model: writer-attributed examples, writer-stratified
//! splitting, directory ingestion, IDX serialization, and the synthetic
//! corpus generator.

mod idx;
mod registry;
mod synth;

pub use idx::{
    read_idx, read_idx_with_writers, read_images_header, read_writer_sidecar, write_idx,
    write_writer_sidecar, IMAGES_MAGIC, LABELS_MAGIC,
};
pub use registry::{LabelEntry, LabelRegistry};
pub use synth::synth_corpus;

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::preprocess::{preprocess_glyph, read_pgm, Glyph28};

/// One labeled glyph with writer attribution.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub glyph: Glyph28,
    pub label: u8,
    pub writer_id: u32,
}

/// An ordered list of examples plus the registry its labels index into.
///
/// Freshly loaded or synthesized corpora have writer ids forming a dense
/// 0..n_writers-1 set and are sorted by (writer, label); the sub-corpora
/// produced by [`split_by_writer`] keep their original writer ids.
#[derive(Clone, Debug)]
pub struct Corpus {
    examples: Vec<Example>,
    registry: LabelRegistry,
}

impl Corpus {
    /// Validates labels against the registry and writer-id density, then
    /// sorts canonically by (writer, label).
    pub fn new(mut examples: Vec<Example>, registry: LabelRegistry) -> Result<Self> {
        if examples.is_empty() {
            return Err(Error::config("corpus", "empty corpus"));
        }
        let n_classes = registry.n_classes();
        for (row, ex) in examples.iter().enumerate() {
            if ex.label as usize >= n_classes {
                return Err(Error::Label {
                    row,
                    label: ex.label as usize,
                    n_classes,
                });
            }
        }
        let mut writers: Vec<u32> = examples.iter().map(|e| e.writer_id).collect();
        writers.sort_unstable();
        writers.dedup();
        let n_writers = writers.len() as u32;
        if writers.last().copied() != Some(n_writers - 1) || writers[0] != 0 {
            return Err(Error::config(
                "corpus",
                format!("writer ids must be dense 0..{n_writers}, got {writers:?}"),
            ));
        }
        examples.sort_by_key(|e| (e.writer_id, e.label));
        Ok(Corpus { examples, registry })
    }

    /// Split views keep original writer ids; density is not re-checked and
    /// example order is preserved as given.
    pub(crate) fn from_split(examples: Vec<Example>, registry: LabelRegistry) -> Self {
        Corpus { examples, registry }
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn registry(&self) -> &LabelRegistry {
        &self.registry
    }

    /// Distinct writer ids, ascending.
    pub fn writer_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.examples.iter().map(|e| e.writer_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }
}

/// Writer-disjoint train/test partition.
#[derive(Clone, Debug)]
pub struct SplitResult {
    pub train: Corpus,
    pub test: Corpus,
    pub train_writers: Vec<u32>,
    pub test_writers: Vec<u32>,
}

/// Splits by writer identity: writers are shuffled by `seed`, the first
/// `round(n_writers * train_fraction)` (clamped so both sides are nonempty)
/// go to train, the rest to test. Every example follows its writer, so no
/// writer contributes to both sides.
pub fn split_by_writer(corpus: &Corpus, train_fraction: f64, seed: u64) -> Result<SplitResult> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::config(
            "split_by_writer",
            format!("train_fraction must be in (0, 1), got {train_fraction}"),
        ));
    }
    let mut writers = corpus.writer_ids();
    if writers.len() < 2 {
        return Err(Error::config(
            "split_by_writer",
            format!("need at least 2 writers, got {}", writers.len()),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    writers.shuffle(&mut rng);
    let n_train = ((writers.len() as f64 * train_fraction).round() as usize)
        .clamp(1, writers.len() - 1);

    let mut train_writers = writers[..n_train].to_vec();
    let mut test_writers = writers[n_train..].to_vec();
    train_writers.sort_unstable();
    test_writers.sort_unstable();

    let in_train = |w: u32| train_writers.binary_search(&w).is_ok();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for ex in &corpus.examples {
        if in_train(ex.writer_id) {
            train.push(ex.clone());
        } else {
            test.push(ex.clone());
        }
    }
    Ok(SplitResult {
        train: Corpus::from_split(train, corpus.registry.clone()),
        test: Corpus::from_split(test, corpus.registry.clone()),
        train_writers,
        test_writers,
    })
}

/// Ingests a directory laid out as `root/<writer_id>/<label_index>.pgm`,
/// preprocessing every image. Writer directory names are reindexed to a
/// dense 0..n-1 range in ascending numeric order.
pub fn load_image_dir(root: &Path, registry: &LabelRegistry) -> Result<Corpus> {
    let ingest = |path: &Path, msg: String| Error::Ingest {
        path: path.to_path_buf(),
        msg,
    };
    let mut writers: BTreeMap<u64, std::path::PathBuf> = BTreeMap::new();
    let entries = std::fs::read_dir(root).map_err(|e| ingest(root, e.to_string()))?;
    for entry in entries {
        let entry = entry.map_err(|e| ingest(root, e.to_string()))?;
        let path = entry.path();
        if !path.is_dir() {
            return Err(ingest(&path, "expected writer directories only".into()));
        }
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let id: u64 = name
            .parse()
            .map_err(|_| ingest(&path, format!("writer directory name {name:?} is not a number")))?;
        writers.insert(id, path);
    }
    if writers.is_empty() {
        return Err(ingest(root, "empty corpus: no writer directories".into()));
    }

    let mut examples = Vec::new();
    for (dense_id, (_, dir)) in writers.into_iter().enumerate() {
        let mut files: Vec<std::path::PathBuf> = Vec::new();
        for entry in std::fs::read_dir(&dir).map_err(|e| ingest(&dir, e.to_string()))? {
            files.push(entry.map_err(|e| ingest(&dir, e.to_string()))?.path());
        }
        files.sort();
        if files.is_empty() {
            return Err(ingest(&dir, "empty corpus: writer has no images".into()));
        }
        for file in files {
            let stem = file
                .file_stem()
                .and_then(|n| n.to_str())
                .unwrap_or_default();
            let is_pgm = file.extension().and_then(|e| e.to_str()) == Some("pgm");
            if !is_pgm {
                return Err(ingest(&file, "expected <label_index>.pgm".into()));
            }
            let label: usize = stem
                .parse()
                .map_err(|_| ingest(&file, format!("file stem {stem:?} is not a label index")))?;
            if label >= registry.n_classes() {
                return Err(ingest(
                    &file,
                    format!("label {label} out of range for {} classes", registry.n_classes()),
                ));
            }
            let raw = read_pgm(&file)?;
            let glyph = preprocess_glyph(&raw).map_err(|e| match e {
                Error::NoForeground { threshold } => ingest(
                    &file,
                    format!("no foreground pixel above threshold {threshold}"),
                ),
                other => other,
            })?;
            examples.push(Example {
                glyph,
                label: label as u8,
                writer_id: dense_id as u32,
            });
        }
    }
    Corpus::new(examples, registry.clone())
}
