//! Dataset ingestion: IDX image/label files (raw or gzip), binarization,
//! grayscale conversion, class-balanced subsets, and a flat binary cache.

use std::io::{BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use rand::seq::SliceRandom;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {found:#010x}, expected {expected:#010x}")]
    Magic { expected: u32, found: u32 },
    #[error("image/label count mismatch: {images} images vs {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("truncated file: {0}")]
    Truncated(String),
    #[error("{0}")]
    Invalid(String),
    #[error("class {class} has only {available} examples, need {needed}")]
    Underpopulated { class: u8, available: usize, needed: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Immutable image/label collection; pixel values live in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    images: Vec<f64>,
    labels: Vec<u8>,
    pixels: usize,
    n_classes: usize,
    split: Split,
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Read a whole file, transparently gunzipping when the gzip magic bytes
/// are present.
fn read_maybe_gz(path: impl AsRef<Path>) -> Result<Vec<u8>, DataError> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(buf: &[u8], at: usize, what: &str) -> Result<u32, DataError> {
    buf.get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or_else(|| DataError::Truncated(what.into()))
}

impl Dataset {
    pub fn new(
        images: Vec<f64>,
        labels: Vec<u8>,
        pixels: usize,
        n_classes: usize,
        split: Split,
    ) -> Result<Self, DataError> {
        if pixels == 0 || images.len() != labels.len() * pixels {
            return Err(DataError::Invalid("image buffer size mismatch".into()));
        }
        if images.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(DataError::Invalid("pixel out of [0,1]".into()));
        }
        if let Some(&l) = labels.iter().find(|&&l| (l as usize) >= n_classes) {
            return Err(DataError::Invalid(format!("label {l} >= {n_classes} classes")));
        }
        Ok(Self { images, labels, pixels, n_classes, split })
    }

    /// Load an IDX image/label pair (raw or gzipped).
    pub fn load_idx(
        images_path: impl AsRef<Path>,
        labels_path: impl AsRef<Path>,
        split: Split,
    ) -> Result<Self, DataError> {
        let img = read_maybe_gz(images_path)?;
        let magic = be_u32(&img, 0, "image header")?;
        if magic != IDX_IMAGES_MAGIC {
            return Err(DataError::Magic { expected: IDX_IMAGES_MAGIC, found: magic });
        }
        let n = be_u32(&img, 4, "image count")? as usize;
        let rows = be_u32(&img, 8, "image rows")? as usize;
        let cols = be_u32(&img, 12, "image cols")? as usize;
        let pixels = rows * cols;
        let body = img
            .get(16..16 + n * pixels)
            .ok_or_else(|| DataError::Truncated("image data".into()))?;

        let lab = read_maybe_gz(labels_path)?;
        let magic = be_u32(&lab, 0, "label header")?;
        if magic != IDX_LABELS_MAGIC {
            return Err(DataError::Magic { expected: IDX_LABELS_MAGIC, found: magic });
        }
        let n_labels = be_u32(&lab, 4, "label count")? as usize;
        if n_labels != n {
            return Err(DataError::CountMismatch { images: n, labels: n_labels });
        }
        let labels = lab
            .get(8..8 + n)
            .ok_or_else(|| DataError::Truncated("label data".into()))?
            .to_vec();

        let images = body.iter().map(|&b| b as f64 / 255.0).collect();
        let n_classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
        Self::new(images, labels, pixels, n_classes, split)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.pixels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn image(&self, i: usize) -> &[f64] {
        &self.images[i * self.pixels..(i + 1) * self.pixels]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn image_bits(&self, i: usize) -> impl Iterator<Item = bool> + '_ {
        self.image(i).iter().map(|&p| p >= 0.5)
    }

    /// Per-pixel on-proportion; the bias-initialization statistic.
    pub fn stats(&self) -> Vec<f64> {
        let mut p = vec![0.0; self.pixels];
        for img in self.images.chunks_exact(self.pixels) {
            for (acc, &v) in p.iter_mut().zip(img) {
                *acc += v;
            }
        }
        let n = self.len().max(1) as f64;
        p.iter_mut().for_each(|v| *v /= n);
        p
    }

    /// Threshold pixels to {0, 1}: value ≥ threshold rounds up.
    pub fn binarize(&self, threshold: f64) -> Result<Dataset, DataError> {
        if !(0.0 < threshold && threshold < 1.0) {
            return Err(DataError::Invalid("threshold must be in (0,1)".into()));
        }
        let images = self
            .images
            .iter()
            .map(|&p| if p >= threshold { 1.0 } else { 0.0 })
            .collect();
        Ok(Dataset { images, ..self.clone() })
    }

    pub fn is_binary(&self) -> bool {
        self.images.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Seeded class-balanced subset of `per_class` examples per class.
    pub fn subset(&self, per_class: usize, seed: u64) -> Result<Dataset, DataError> {
        if per_class == 0 {
            return Err(DataError::Invalid("per_class must be >= 1".into()));
        }
        let mut rng = rng::stream(seed ^ 0x5b5e_7a11);
        let mut picked = Vec::new();
        for class in 0..self.n_classes as u8 {
            let mut ids: Vec<usize> =
                (0..self.len()).filter(|&i| self.labels[i] == class).collect();
            if ids.len() < per_class {
                return Err(DataError::Underpopulated {
                    class,
                    available: ids.len(),
                    needed: per_class,
                });
            }
            ids.shuffle(&mut rng);
            picked.extend_from_slice(&ids[..per_class]);
        }
        let mut images = Vec::with_capacity(picked.len() * self.pixels);
        let mut labels = Vec::with_capacity(picked.len());
        for &i in &picked {
            images.extend_from_slice(self.image(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset { images, labels, ..self.clone() })
    }

    /// Flat binary cache: one text header line, raw labels, then pixel
    /// values as little-endian f64 (bit-exact round trip).
    pub fn save_cache(&self, path: impl AsRef<Path>) -> Result<(), DataError> {
        let mut w = BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "DSET1 {} {} {} {}", self.len(), self.pixels, self.n_classes, self.split)?;
        w.write_all(&self.labels)?;
        for &p in &self.images {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn load_cache(path: impl AsRef<Path>) -> Result<Dataset, DataError> {
        let buf = std::fs::read(path)?;
        let nl = buf
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| DataError::Truncated("cache header".into()))?;
        let header = std::str::from_utf8(&buf[..nl])
            .map_err(|_| DataError::Invalid("cache header not utf-8".into()))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 5 || toks[0] != "DSET1" {
            return Err(DataError::Invalid("bad cache header".into()));
        }
        let parse = |s: &str| -> Result<usize, DataError> {
            s.parse().map_err(|_| DataError::Invalid("bad cache header field".into()))
        };
        let (n, pixels, n_classes) = (parse(toks[1])?, parse(toks[2])?, parse(toks[3])?);
        let split = match toks[4] {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(DataError::Invalid(format!("bad split {other:?}"))),
        };
        let body = &buf[nl + 1..];
        if body.len() != n + n * pixels * 8 {
            return Err(DataError::Truncated("cache body".into()));
        }
        let labels = body[..n].to_vec();
        let images = body[n..]
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        Self::new(images, labels, pixels, n_classes, split)
    }
}

/// Standard luma conversion. Channels are planar: R plane, G plane, B
/// plane (CIFAR record layout).
pub fn rgb_to_gray(rgb: &[f64]) -> Result<Vec<f64>, DataError> {
    if rgb.len() % 3 != 0 {
        return Err(DataError::Invalid("expected 3 planar channels".into()));
    }
    let pixels = rgb.len() / 3;
    let (r, rest) = rgb.split_at(pixels);
    let (g, b) = rest.split_at(pixels);
    Ok((0..pixels)
        .map(|i| 0.2989 * r[i] + 0.5870 * g[i] + 0.1140 * b[i])
        .collect())
}

/// CIFAR binary batch: records of 1 label byte + 3×1024 channel-planar
/// pixel bytes, converted here to grayscale.
pub fn load_cifar_batch(path: impl AsRef<Path>, split: Split) -> Result<Dataset, DataError> {
    const RECORD: usize = 1 + 3 * 1024;
    let buf = read_maybe_gz(path)?;
    if buf.is_empty() || buf.len() % RECORD != 0 {
        return Err(DataError::Truncated("CIFAR batch".into()));
    }
    let n = buf.len() / RECORD;
    let mut images = Vec::with_capacity(n * 1024);
    let mut labels = Vec::with_capacity(n);
    for rec in buf.chunks_exact(RECORD) {
        labels.push(rec[0]);
        let rgb: Vec<f64> = rec[1..].iter().map(|&b| b as f64 / 255.0).collect();
        images.extend(rgb_to_gray(&rgb)?);
    }
    let n_classes = labels.iter().copied().max().map_or(1, |m| m as usize + 1);
    Dataset::new(images, labels, 1024, n_classes, split)
}
