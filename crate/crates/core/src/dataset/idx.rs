//! MNIST-compatible IDX serialization plus the writer-id sidecar.
//!
//! Images file: big-endian magic 0x00000803, count, rows=28, cols=28, then
//! raw pixel bytes. Labels file: magic 0x00000801, count, then label bytes.
//! Writer ids travel in a plain-text sidecar, one decimal id per line,
//! aligned with IDX record order.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::preprocess::{Glyph28, GLYPH_SIDE};

use super::{Corpus, Example, LabelRegistry};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

const PIXELS: usize = GLYPH_SIDE * GLYPH_SIDE;

fn put_u32(buf: &mut Vec<u8>, v: u32) {
    buf.extend_from_slice(&v.to_be_bytes());
}

fn get_u32(path: &Path, bytes: &[u8], offset: usize, what: &str) -> Result<u32> {
    if bytes.len() < offset + 4 {
        return Err(Error::IdxFormat {
            path: path.to_path_buf(),
            offset: bytes.len() as u64,
            msg: format!("file truncated while reading {what}"),
        });
    }
    Ok(u32::from_be_bytes([
        bytes[offset],
        bytes[offset + 1],
        bytes[offset + 2],
        bytes[offset + 3],
    ]))
}

/// Writes the corpus as an IDX image/label file pair.
pub fn write_idx(corpus: &Corpus, images_path: &Path, labels_path: &Path) -> Result<()> {
    if corpus.is_empty() {
        return Err(Error::config("write_idx", "refusing to write an empty corpus"));
    }
    let n = corpus.len() as u32;

    let mut images = Vec::with_capacity(16 + corpus.len() * PIXELS);
    put_u32(&mut images, IMAGES_MAGIC);
    put_u32(&mut images, n);
    put_u32(&mut images, GLYPH_SIDE as u32);
    put_u32(&mut images, GLYPH_SIDE as u32);
    for ex in corpus.examples() {
        images.extend_from_slice(ex.glyph.pixels());
    }
    fs::write(images_path, images)?;

    let mut labels = Vec::with_capacity(8 + corpus.len());
    put_u32(&mut labels, LABELS_MAGIC);
    put_u32(&mut labels, n);
    labels.extend(corpus.examples().iter().map(|ex| ex.label));
    fs::write(labels_path, labels)?;
    Ok(())
}

/// Parses and validates an IDX images header, returning (count, rows, cols).
pub fn read_images_header(path: &Path) -> Result<(u32, u32, u32)> {
    let bytes = fs::read(path)?;
    images_header(path, &bytes)
}

fn images_header(path: &Path, bytes: &[u8]) -> Result<(u32, u32, u32)> {
    let magic = get_u32(path, bytes, 0, "images magic")?;
    if magic != IMAGES_MAGIC {
        return Err(Error::IdxFormat {
            path: path.to_path_buf(),
            offset: 0,
            msg: format!("bad images magic 0x{magic:08X}, expected 0x{IMAGES_MAGIC:08X}"),
        });
    }
    let count = get_u32(path, bytes, 4, "image count")?;
    let rows = get_u32(path, bytes, 8, "rows")?;
    let cols = get_u32(path, bytes, 12, "cols")?;
    Ok((count, rows, cols))
}

/// Reads an IDX pair into a corpus. Writer ids are not stored in IDX; every
/// example gets writer 0. Use [`read_idx_with_writers`] when a sidecar is
/// available.
pub fn read_idx(images_path: &Path, labels_path: &Path, registry: &LabelRegistry) -> Result<Corpus> {
    let examples = read_idx_records(images_path, labels_path, registry, |_| 0)?;
    Corpus::new(examples, registry.clone())
}

/// Reads an IDX pair plus the writer sidecar.
pub fn read_idx_with_writers(
    images_path: &Path,
    labels_path: &Path,
    writers_path: &Path,
    registry: &LabelRegistry,
) -> Result<Corpus> {
    let writers = read_writer_sidecar(writers_path)?;
    let examples = read_idx_records(images_path, labels_path, registry, |i| {
        writers.get(i).copied().unwrap_or(0)
    })?;
    if writers.len() != examples.len() {
        return Err(Error::IdxFormat {
            path: writers_path.to_path_buf(),
            offset: 0,
            msg: format!(
                "sidecar has {} writer ids for {} records",
                writers.len(),
                examples.len()
            ),
        });
    }
    Corpus::new(examples, registry.clone())
}

fn read_idx_records(
    images_path: &Path,
    labels_path: &Path,
    registry: &LabelRegistry,
    writer_of: impl Fn(usize) -> u32,
) -> Result<Vec<Example>> {
    let images = fs::read(images_path)?;
    let (count, rows, cols) = images_header(images_path, &images)?;
    if rows as usize != GLYPH_SIDE {
        return Err(Error::IdxFormat {
            path: images_path.to_path_buf(),
            offset: 8,
            msg: format!("rows {rows}, expected {GLYPH_SIDE}"),
        });
    }
    if cols as usize != GLYPH_SIDE {
        return Err(Error::IdxFormat {
            path: images_path.to_path_buf(),
            offset: 12,
            msg: format!("cols {cols}, expected {GLYPH_SIDE}"),
        });
    }
    let need = 16 + count as usize * PIXELS;
    if images.len() != need {
        return Err(Error::IdxFormat {
            path: images_path.to_path_buf(),
            offset: images.len().min(need) as u64,
            msg: format!("images payload is {} bytes, expected {need}", images.len()),
        });
    }

    let labels = fs::read(labels_path)?;
    let magic = get_u32(labels_path, &labels, 0, "labels magic")?;
    if magic != LABELS_MAGIC {
        return Err(Error::IdxFormat {
            path: labels_path.to_path_buf(),
            offset: 0,
            msg: format!("bad labels magic 0x{magic:08X}, expected 0x{LABELS_MAGIC:08X}"),
        });
    }
    let label_count = get_u32(labels_path, &labels, 4, "label count")?;
    if label_count != count {
        return Err(Error::IdxFormat {
            path: labels_path.to_path_buf(),
            offset: 4,
            msg: format!("label count {label_count} does not match image count {count}"),
        });
    }
    let need = 8 + count as usize;
    if labels.len() != need {
        return Err(Error::IdxFormat {
            path: labels_path.to_path_buf(),
            offset: labels.len().min(need) as u64,
            msg: format!("labels payload is {} bytes, expected {need}", labels.len()),
        });
    }

    let n_classes = registry.n_classes();
    let mut examples = Vec::with_capacity(count as usize);
    for i in 0..count as usize {
        let label = labels[8 + i];
        if label as usize >= n_classes {
            return Err(Error::IdxFormat {
                path: labels_path.to_path_buf(),
                offset: (8 + i) as u64,
                msg: format!("label {label} out of range for {n_classes} classes"),
            });
        }
        let start = 16 + i * PIXELS;
        let glyph =
            Glyph28::from_pixels(images[start..start + PIXELS].to_vec()).map_err(|e| {
                Error::IdxFormat {
                    path: images_path.to_path_buf(),
                    offset: start as u64,
                    msg: format!("record {i} is not a valid glyph: {e}"),
                }
            })?;
        examples.push(Example {
            glyph,
            label,
            writer_id: writer_of(i),
        });
    }
    Ok(examples)
}

/// One decimal writer id per line, aligned with IDX record order.
pub fn write_writer_sidecar(corpus: &Corpus, path: &Path) -> Result<()> {
    let mut text = String::with_capacity(corpus.len() * 4);
    for ex in corpus.examples() {
        text.push_str(&ex.writer_id.to_string());
        text.push('\n');
    }
    fs::write(path, text)?;
    Ok(())
}

pub fn read_writer_sidecar(path: &Path) -> Result<Vec<u32>> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        out.push(trimmed.parse().map_err(|_| Error::IdxFormat {
            path: path.to_path_buf(),
            offset: lineno as u64,
            msg: format!("line {} is not a writer id: {trimmed:?}", lineno + 1),
        })?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_corpus(n: usize) -> Corpus {
        let mut ex = Vec::new();
        for i in 0..n {
            let mut px = vec![0u8; PIXELS];
            for y in 5..20 {
                for x in 5..20 {
                    px[y * GLYPH_SIDE + x] = ((x * 7 + y * 13 + i * 31) % 200) as u8 + 55;
                }
            }
            ex.push(Example {
                glyph: Glyph28::from_pixels(px).unwrap(),
                label: (i % 33) as u8,
                writer_id: 0,
            });
        }
        Corpus::new(ex, LabelRegistry::ircam33()).unwrap()
    }

    #[test]
    fn one_image_file_is_exactly_800_bytes_with_magic() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, lbls) = (dir.path().join("i"), dir.path().join("l"));
        write_idx(&sample_corpus(1), &imgs, &lbls).unwrap();
        let bytes = fs::read(&imgs).unwrap();
        assert_eq!(bytes.len(), 16 + 784);
        assert_eq!(&bytes[0..4], &[0x00, 0x00, 0x08, 0x03]);
        let lbytes = fs::read(&lbls).unwrap();
        assert_eq!(&lbytes[0..4], &[0x00, 0x00, 0x08, 0x01]);
    }

    #[test]
    fn round_trip_reserializes_bit_identically() {
        let dir = tempfile::tempdir().unwrap();
        let (i1, l1) = (dir.path().join("i1"), dir.path().join("l1"));
        let (i2, l2) = (dir.path().join("i2"), dir.path().join("l2"));
        let corpus = sample_corpus(10);
        write_idx(&corpus, &i1, &l1).unwrap();
        let read = read_idx(&i1, &l1, corpus.registry()).unwrap();
        assert_eq!(read.len(), 10);
        write_idx(&read, &i2, &l2).unwrap();
        assert_eq!(fs::read(&i1).unwrap(), fs::read(&i2).unwrap());
        assert_eq!(fs::read(&l1).unwrap(), fs::read(&l2).unwrap());
        for (a, b) in corpus.examples().iter().zip(read.examples()) {
            assert_eq!(a.glyph, b.glyph);
            assert_eq!(a.label, b.label);
        }
    }

    #[test]
    fn canonical_mnist_test_header_parses() {
        // The classic t10k images header: magic, 10000 images, 28x28.
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t10k-images-idx3-ubyte");
        let mut bytes = Vec::new();
        put_u32(&mut bytes, 0x0000_0803);
        put_u32(&mut bytes, 10_000);
        put_u32(&mut bytes, 28);
        put_u32(&mut bytes, 28);
        bytes.resize(16 + 10_000 * 784, 0);
        fs::write(&path, &bytes).unwrap();
        let (count, rows, cols) = read_images_header(&path).unwrap();
        assert_eq!((count, rows, cols), (10_000, 28, 28));
    }

    #[test]
    fn bad_magic_truncation_and_count_mismatch_name_offsets() {
        let dir = tempfile::tempdir().unwrap();
        let (imgs, lbls) = (dir.path().join("i"), dir.path().join("l"));
        let corpus = sample_corpus(3);
        write_idx(&corpus, &imgs, &lbls).unwrap();
        let reg = corpus.registry();

        // Corrupt the magic.
        let mut bytes = fs::read(&imgs).unwrap();
        bytes[0] = 0xFF;
        let bad = dir.path().join("bad");
        fs::write(&bad, &bytes).unwrap();
        match read_idx(&bad, &lbls, reg).unwrap_err() {
            Error::IdxFormat { offset, .. } => assert_eq!(offset, 0),
            other => panic!("unexpected {other}"),
        }

        // Truncate the images payload.
        let bytes = fs::read(&imgs).unwrap();
        fs::write(&bad, &bytes[..bytes.len() - 100]).unwrap();
        assert!(matches!(
            read_idx(&bad, &lbls, reg).unwrap_err(),
            Error::IdxFormat { .. }
        ));

        // Count mismatch between the two files.
        let two = sample_corpus(2);
        let (i2, l2) = (dir.path().join("i2"), dir.path().join("l2"));
        write_idx(&two, &i2, &l2).unwrap();
        match read_idx(&imgs, &l2, reg).unwrap_err() {
            Error::IdxFormat { offset, msg, .. } => {
                assert_eq!(offset, 4);
                assert!(msg.contains("does not match"));
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn sidecar_round_trips_writer_ids() {
        let dir = tempfile::tempdir().unwrap();
        let mut ex = Vec::new();
        for w in 0..4u32 {
            for l in 0..2u8 {
                ex.push(Example {
                    glyph: super::super::tests::tiny_glyph(90 + l),
                    label: l,
                    writer_id: w,
                });
            }
        }
        let corpus = Corpus::new(ex, LabelRegistry::ircam33()).unwrap();
        let (i, l, s) = (
            dir.path().join("i"),
            dir.path().join("l"),
            dir.path().join("writers.txt"),
        );
        write_idx(&corpus, &i, &l).unwrap();
        write_writer_sidecar(&corpus, &s).unwrap();
        let read = read_idx_with_writers(&i, &l, &s, corpus.registry()).unwrap();
        assert_eq!(read.len(), corpus.len());
        for (a, b) in corpus.examples().iter().zip(read.examples()) {
            assert_eq!(a.writer_id, b.writer_id);
        }
    }
}
