//! Inference-time procedures on a trained model: classification readout,
//! class-conditioned annealed generation, image completion, grayscale
//! handling, and image export.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use thiserror::Error;

use crate::graph::RoleAssignment;
use crate::model::Model;
use crate::rng;
use crate::sampler::{AnnealSchedule, ChainState, Discard, Engine, SamplerError, SweepObserver};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("class {0} out of range")]
    InvalidClass(usize),
    #[error("pixel value out of [0,1]")]
    PixelRange,
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone)]
pub struct ClassificationResult {
    /// Time-and-replica-averaged on-activation per class, in [0, 1].
    pub class_scores: Vec<f64>,
    /// Argmax class; ties break toward the lowest class id.
    pub predicted: usize,
}

pub fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

/// Per-node time-averaged probability of the up state.
struct ActivationAverager {
    sums: Vec<f64>,
    count: u64,
}

impl ActivationAverager {
    fn new(n: usize) -> Self {
        Self { sums: vec![0.0; n], count: 0 }
    }

    fn activations(&self) -> Vec<f64> {
        let n = self.count.max(1) as f64;
        self.sums.iter().map(|&s| s / n).collect()
    }
}

impl SweepObserver for ActivationAverager {
    fn observe(&mut self, _sweep: u64, states: &[i8]) {
        for (acc, &m) in self.sums.iter_mut().zip(states) {
            // up == 1 in both representations.
            if m == 1 {
                *acc += 1.0;
            }
        }
        self.count += 1;
    }
}

fn check_image(roles: &RoleAssignment, image_bits: &[bool]) -> Result<(), TaskError> {
    if image_bits.len() != roles.visible_ids.len() {
        return Err(TaskError::Dimension(format!(
            "image has {} bits, model expects {}",
            image_bits.len(),
            roles.visible_ids.len()
        )));
    }
    Ok(())
}

/// Clamp every label replica to the one-hot pattern for `class`.
fn clamp_label_onehot(chain: &mut ChainState, roles: &RoleAssignment, class: usize) {
    let bits = roles
        .label_ids
        .iter()
        .enumerate()
        .map(|(k, _)| k % roles.n_classes == class)
        .collect::<Vec<_>>();
    chain.clamp_bits(&roles.label_ids, bits.iter().copied());
}

/// Clamp the image pixels, leave label and hidden nodes free, sample, and
/// read the labels out as time averages folded across replicas.
pub fn classify(
    model: &Model,
    roles: &RoleAssignment,
    image_bits: &[bool],
    n_sweeps: u64,
    beta: f64,
    engine: Engine,
    seed: u64,
) -> Result<ClassificationResult, TaskError> {
    check_image(roles, image_bits)?;
    let mut chain = ChainState::new(model, seed, beta);
    chain.clamp_bits(&roles.visible_ids, image_bits.iter().copied());
    let mut avg = ActivationAverager::new(model.node_count());
    engine.run(model, &mut chain, n_sweeps, &mut avg)?;
    let activations = avg.activations();

    let mut class_scores = vec![0.0; roles.n_classes];
    for (k, &node) in roles.label_ids.iter().enumerate() {
        class_scores[k % roles.n_classes] += activations[node as usize];
    }
    let r = roles.n_replicas.max(1) as f64;
    class_scores.iter_mut().for_each(|s| *s /= r);
    let predicted = argmax_lowest(&class_scores);
    Ok(ClassificationResult { class_scores, predicted })
}

/// Draw independent Bernoulli(pixel) binary images; one stream per call.
pub fn grayscale_encode(
    image_gray: &[f64],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<Vec<bool>>, TaskError> {
    if image_gray.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
        return Err(TaskError::PixelRange);
    }
    let mut rng = rng::stream(seed ^ 0x6e_c0de);
    Ok((0..n_samples)
        .map(|_| image_gray.iter().map(|&p| rng.gen::<f64>() < p).collect())
        .collect())
}

/// Classify a grayscale image by averaging label activations over
/// Bernoulli-encoded binary samples.
pub fn classify_grayscale(
    model: &Model,
    roles: &RoleAssignment,
    image_gray: &[f64],
    n_samples: usize,
    n_sweeps: u64,
    beta: f64,
    engine: Engine,
    seed: u64,
) -> Result<ClassificationResult, TaskError> {
    let samples = grayscale_encode(image_gray, n_samples.max(1), seed)?;
    let mut class_scores = vec![0.0; roles.n_classes];
    for (k, bits) in samples.iter().enumerate() {
        let r = classify(
            model,
            roles,
            bits,
            n_sweeps,
            beta,
            engine,
            rng::derive_seed(seed, k as u64),
        )?;
        for (acc, s) in class_scores.iter_mut().zip(&r.class_scores) {
            *acc += s;
        }
    }
    class_scores.iter_mut().for_each(|s| *s /= samples.len() as f64);
    let predicted = argmax_lowest(&class_scores);
    Ok(ClassificationResult { class_scores, predicted })
}

#[derive(Debug, Clone)]
pub struct Generated {
    /// Per-visible-node activation in [0, 1], time-averaged over the last
    /// quarter of the final-β sweeps.
    pub pixels: Vec<f64>,
    /// Energy of the starting (β-start) state.
    pub energy_start: f64,
    /// Energy of the state after the full anneal.
    pub energy_end: f64,
}

/// Anneal with the given clamps already applied and average the visible
/// activations over the last 25% of the final-β sweeps.
fn anneal_and_read(
    model: &Model,
    roles: &RoleAssignment,
    chain: &mut ChainState,
    schedule: &AnnealSchedule,
    engine: Engine,
) -> Result<Generated, TaskError> {
    let energy_start = model.energy(chain.states());
    let betas = schedule.betas();
    let per_step = schedule.sweeps_per_step;
    for &beta in &betas[..betas.len() - 1] {
        chain.beta = beta;
        engine.run(model, chain, per_step, &mut Discard)?;
    }
    chain.beta = *betas.last().unwrap();
    let tail = (per_step / 4).max(1).min(per_step);
    engine.run(model, chain, per_step - tail, &mut Discard)?;
    let mut avg = ActivationAverager::new(model.node_count());
    engine.run(model, chain, tail, &mut avg)?;
    let activations = avg.activations();
    let pixels = roles
        .visible_ids
        .iter()
        .map(|&v| activations[v as usize])
        .collect();
    Ok(Generated { pixels, energy_start, energy_end: model.energy(chain.states()) })
}

/// Class-conditioned generation: clamp every label replica to the class
/// one-hot, anneal from scratch, read out the visible activations.
pub fn generate(
    model: &Model,
    roles: &RoleAssignment,
    class_id: usize,
    schedule: &AnnealSchedule,
    engine: Engine,
    seed: u64,
) -> Result<Generated, TaskError> {
    if class_id >= roles.n_classes {
        return Err(TaskError::InvalidClass(class_id));
    }
    let mut chain = ChainState::new(model, seed, schedule.beta_start);
    clamp_label_onehot(&mut chain, roles, class_id);
    anneal_and_read(model, roles, &mut chain, schedule, engine)
}

/// Image completion: clamp the pixels selected by `known_mask` (and the
/// labels when a class is given), anneal, return the full image with the
/// free half filled by time-averaged activations.
pub fn complete(
    model: &Model,
    roles: &RoleAssignment,
    image_bits: &[bool],
    known_mask: &[bool],
    class_id: Option<usize>,
    schedule: &AnnealSchedule,
    engine: Engine,
    seed: u64,
) -> Result<Generated, TaskError> {
    check_image(roles, image_bits)?;
    if known_mask.len() != roles.visible_ids.len() {
        return Err(TaskError::Dimension("mask size mismatch".into()));
    }
    if let Some(c) = class_id {
        if c >= roles.n_classes {
            return Err(TaskError::InvalidClass(c));
        }
    }
    let mut chain = ChainState::new(model, seed, schedule.beta_start);
    let known: Vec<u32> = roles
        .visible_ids
        .iter()
        .zip(known_mask)
        .filter(|(_, &k)| k)
        .map(|(&v, _)| v)
        .collect();
    let known_bits: Vec<bool> = image_bits
        .iter()
        .zip(known_mask)
        .filter(|(_, &k)| k)
        .map(|(&b, _)| b)
        .collect();
    chain.clamp_bits(&known, known_bits.iter().copied());
    if let Some(c) = class_id {
        clamp_label_onehot(&mut chain, roles, c);
    }
    let mut out = anneal_and_read(model, roles, &mut chain, schedule, engine)?;
    // Known pixels pass through exactly.
    for (i, (&b, &k)) in image_bits.iter().zip(known_mask).enumerate() {
        if k {
            out.pixels[i] = if b { 1.0 } else { 0.0 };
        }
    }
    Ok(out)
}

/// Grayscale PGM export; `ascii` selects P2 over P5.
pub fn write_pgm(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    pixels: &[f64],
    ascii: bool,
) -> Result<(), TaskError> {
    if pixels.len() != width * height {
        return Err(TaskError::Dimension("pixel count != width×height".into()));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let bytes: Vec<u8> = pixels
        .iter()
        .map(|&p| (p.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    if ascii {
        writeln!(w, "P2\n{width} {height}\n255")?;
        for row in bytes.chunks(width) {
            let line: Vec<String> = row.iter().map(|b| b.to_string()).collect();
            writeln!(w, "{}", line.join(" "))?;
        }
    } else {
        writeln!(w, "P5\n{width} {height}\n255")?;
        w.write_all(&bytes)?;
    }
    Ok(())
}

/// Binary PBM (P1) export; set bits render black.
pub fn write_pbm(
    path: impl AsRef<Path>,
    width: usize,
    height: usize,
    bits: &[bool],
) -> Result<(), TaskError> {
    if bits.len() != width * height {
        return Err(TaskError::Dimension("bit count != width×height".into()));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "P1\n{width} {height}")?;
    for row in bits.chunks(width) {
        let line: Vec<&str> = row.iter().map(|&b| if b { "1" } else { "0" }).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Composite equally sized tiles into a grid with a 1-pixel separator,
/// figure-panel style. Returns (pixels, width, height).
pub fn composite_grid(
    tiles: &[Vec<f64>],
    tile_w: usize,
    tile_h: usize,
    cols: usize,
) -> Result<(Vec<f64>, usize, usize), TaskError> {
    if tiles.is_empty() || cols == 0 {
        return Err(TaskError::Dimension("empty grid".into()));
    }
    if tiles.iter().any(|t| t.len() != tile_w * tile_h) {
        return Err(TaskError::Dimension("tile size mismatch".into()));
    }
    let rows = tiles.len().div_ceil(cols);
    let width = cols * tile_w + cols - 1;
    let height = rows * tile_h + rows - 1;
    let mut out = vec![0.5; width * height];
    for (t, tile) in tiles.iter().enumerate() {
        let (gr, gc) = (t / cols, t % cols);
        let (oy, ox) = (gr * (tile_h + 1), gc * (tile_w + 1));
        for y in 0..tile_h {
            for x in 0..tile_w {
                out[(oy + y) * width + ox + x] = tile[y * tile_w + x];
            }
        }
    }
    Ok((out, width, height))
}
