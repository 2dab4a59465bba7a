//! Contrastive-divergence training. The orchestrator is single-threaded;
//! parallelism lives inside the chromatic sampler it drives.
//!
//! Master weights stay at float64 and are quantized on every push to the
//! sampler; gradients are never computed in fixed point.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::data::Dataset;
use crate::diagnostics::{self, DiagnosticsError};
use crate::graph::{RoleAssignment, SparseGraph};
use crate::model::{Model, ModelError, Precision, Representation};
use crate::rng;
use crate::sampler::{ChainState, Engine, EngineKind, SamplerError, SweepObserver};
use crate::tasks::{self, TaskError};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dataset: {0}")]
    Dataset(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Task(#[from] TaskError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CdMode {
    /// Fresh negative chain per update.
    Cd,
    /// Persistent negative chain across updates.
    Pcd,
}

impl std::str::FromStr for CdMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cd" => Ok(CdMode::Cd),
            "pcd" => Ok(CdMode::Pcd),
            other => Err(format!("unknown cd_mode {other:?}")),
        }
    }
}

impl std::fmt::Display for CdMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CdMode::Cd => write!(f, "cd"),
            CdMode::Pcd => write!(f, "pcd"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub epochs: u32,
    pub batch_size: usize,
    pub n_batches: usize,
    /// Positive-phase sweeps per clamped image (the n of CD-n).
    pub sweeps_per_image: u64,
    /// Negative-phase sweeps; None means sweeps_per_image × batch_size.
    pub negative_sweeps: Option<u64>,
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub cd_mode: CdMode,
    pub engine: EngineKind,
    pub workers: usize,
    pub beta: f64,
    pub master_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 10,
            n_batches: 10,
            sweeps_per_image: 10_000,
            negative_sweeps: None,
            learning_rate: 0.003,
            momentum: 0.6,
            weight_decay: 0.0,
            cd_mode: CdMode::Cd,
            engine: EngineKind::Chromatic,
            workers: 1,
            beta: 1.0,
            master_seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.batch_size == 0 || self.n_batches == 0 || self.sweeps_per_image == 0 {
            return Err(TrainError::Config("counts must be positive".into()));
        }
        if self.negative_sweeps == Some(0) {
            return Err(TrainError::Config("negative_sweeps must be positive".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(TrainError::Config("learning_rate must be > 0".into()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(TrainError::Config("momentum must be in [0,1)".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(TrainError::Config("weight_decay must be >= 0".into()));
        }
        if self.beta < 0.0 {
            return Err(TrainError::Config("beta must be >= 0".into()));
        }
        Ok(())
    }

    pub fn negative_sweeps(&self) -> u64 {
        self.negative_sweeps
            .unwrap_or(self.sweeps_per_image * self.batch_size as u64)
    }

    pub fn engine(&self) -> Engine {
        Engine::new(self.engine, self.workers)
    }

    /// Apply one `key=value` setting; unknown keys are rejected.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<(), TrainError> {
        let bad = |what: &str| TrainError::Config(format!("bad {what}: {value:?}"));
        match key {
            "epochs" => self.epochs = value.parse().map_err(|_| bad("epochs"))?,
            "batch_size" => self.batch_size = value.parse().map_err(|_| bad("batch_size"))?,
            "n_batches" => self.n_batches = value.parse().map_err(|_| bad("n_batches"))?,
            "sweeps_per_image" => {
                self.sweeps_per_image = value.parse().map_err(|_| bad("sweeps_per_image"))?
            }
            "negative_sweeps" => {
                self.negative_sweeps = if value == "auto" {
                    None
                } else {
                    Some(value.parse().map_err(|_| bad("negative_sweeps"))?)
                }
            }
            "learning_rate" => {
                self.learning_rate = value.parse().map_err(|_| bad("learning_rate"))?
            }
            "momentum" => self.momentum = value.parse().map_err(|_| bad("momentum"))?,
            "weight_decay" => {
                self.weight_decay = value.parse().map_err(|_| bad("weight_decay"))?
            }
            "cd_mode" => self.cd_mode = value.parse().map_err(TrainError::Config)?,
            "engine" => self.engine = value.parse().map_err(TrainError::Config)?,
            "workers" => self.workers = value.parse().map_err(|_| bad("workers"))?,
            "beta" => self.beta = value.parse().map_err(|_| bad("beta"))?,
            "master_seed" => self.master_seed = value.parse().map_err(|_| bad("master_seed"))?,
            other => return Err(TrainError::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parse a flat key=value file body ('#' comments, blank lines ok).
    pub fn from_kv_str(text: &str) -> Result<Self, TrainError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                TrainError::Config(format!("line {}: expected key=value", lineno + 1))
            })?;
            cfg.apply_kv(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, TrainError> {
        Self::from_kv_str(&std::fs::read_to_string(path)?)
    }

    /// Serialize every field as key=value; round-trips through
    /// `from_kv_str`.
    pub fn to_kv_string(&self) -> String {
        let neg = self
            .negative_sweeps
            .map_or_else(|| "auto".to_string(), |v| v.to_string());
        format!(
            "epochs={}\nbatch_size={}\nn_batches={}\nsweeps_per_image={}\n\
             negative_sweeps={}\nlearning_rate={}\nmomentum={}\nweight_decay={}\n\
             cd_mode={}\nengine={}\nworkers={}\nbeta={}\nmaster_seed={}\n",
            self.epochs,
            self.batch_size,
            self.n_batches,
            self.sweeps_per_image,
            neg,
            self.learning_rate,
            self.momentum,
            self.weight_decay,
            self.cd_mode,
            self.engine,
            self.workers,
            self.beta,
            self.master_seed
        )
    }
}

/// Initial model: J ~ Normal(0, 0.01²) per edge, hidden biases zero,
/// visible and label biases log(p/(1−p)) from on-proportions clipped to
/// [δ, 1−δ] with δ = 1e−4.
pub fn init_model(
    graph: Arc<SparseGraph>,
    roles: &RoleAssignment,
    visible_stats: &[f64],
    label_stats: &[f64],
    precision: Precision,
    seed: u64,
) -> Result<Model, TrainError> {
    const DELTA: f64 = 1e-4;
    if visible_stats.len() != roles.visible_ids.len() {
        return Err(TrainError::Dimension("visible stats length".into()));
    }
    if label_stats.len() != roles.n_classes {
        return Err(TrainError::Dimension("label stats length".into()));
    }
    let mut stream = rng::stream(rng::derive_seed(seed, 0x494e4954)); // "INIT"
    let normal = Normal::new(0.0, 0.01).unwrap();
    let j: Vec<f64> = (0..graph.edge_count()).map(|_| normal.sample(&mut stream)).collect();

    let logit = |p: f64| -> Result<f64, TrainError> {
        let p = p.clamp(DELTA, 1.0 - DELTA);
        if !(0.0 < p && p < 1.0) {
            return Err(TrainError::Config(format!("on-proportion {p} outside (0,1)")));
        }
        Ok((p / (1.0 - p)).ln())
    };
    let mut h = vec![0.0; graph.node_count()];
    for (&node, &p) in roles.visible_ids.iter().zip(visible_stats) {
        h[node as usize] = logit(p)?;
    }
    for (k, &node) in roles.label_ids.iter().enumerate() {
        h[node as usize] = logit(label_stats[k % roles.n_classes])?;
    }
    Ok(Model::new(graph, j, h, precision, Representation::Bipolar)?)
}

/// Per-class on-proportion of a labeled dataset (label bias statistic).
pub fn label_stats(ds: &Dataset) -> Vec<f64> {
    let mut counts = vec![0usize; ds.n_classes()];
    for &l in ds.labels() {
        counts[l as usize] += 1;
    }
    let n = ds.len().max(1) as f64;
    counts.iter().map(|&c| c as f64 / n).collect()
}

/// Normalized sufficient statistics from one sampling phase.
#[derive(Debug, Clone)]
pub struct PhaseStats {
    /// ⟨m_i m_j⟩ per edge.
    pub corr: Vec<f64>,
    /// ⟨m_i⟩ per node.
    pub mean: Vec<f64>,
    /// Recorded sweeps backing the averages.
    pub samples: u64,
}

/// Records the up-bit of every node per sweep into packed words; edge
/// correlation sums then cost one xor-popcount pass instead of a per-sweep
/// per-edge loop.
struct BitRecorder {
    nodes: usize,
    words: usize,
    t: usize,
    bits: Vec<u64>,
}

impl BitRecorder {
    fn new(nodes: usize, sweeps: usize) -> Self {
        let words = sweeps.div_ceil(64);
        Self { nodes, words, t: 0, bits: vec![0; nodes * words] }
    }

    /// Add this run's correlation and mean *sums* (bipolar values) to the
    /// accumulators.
    fn accumulate(&self, graph: &SparseGraph, corr_sum: &mut [f64], mean_sum: &mut [f64]) {
        let t = self.t as i64;
        let pop = |node: usize| -> &[u64] {
            &self.bits[node * self.words..(node + 1) * self.words]
        };
        for (e, &(u, v)) in graph.edges().iter().enumerate() {
            let disagree: i64 = pop(u as usize)
                .iter()
                .zip(pop(v as usize))
                .map(|(&a, &b)| (a ^ b).count_ones() as i64)
                .sum();
            // m_u m_v = +1 on agreement, −1 on disagreement.
            corr_sum[e] += (t - 2 * disagree) as f64;
        }
        for node in 0..self.nodes {
            let ones: i64 = pop(node).iter().map(|&w| w.count_ones() as i64).sum();
            mean_sum[node] += (2 * ones - t) as f64;
        }
    }
}

impl SweepObserver for BitRecorder {
    fn observe(&mut self, _sweep: u64, states: &[i8]) {
        let (word, bit) = (self.t / 64, self.t % 64);
        for (node, &m) in states.iter().enumerate() {
            if m == 1 {
                self.bits[node * self.words + word] |= 1 << bit;
            }
        }
        self.t += 1;
    }
}

/// One training example: visible bits plus an optional class label.
pub type BatchItem<'a> = (&'a [bool], Option<u8>);

fn clamp_item(chain: &mut ChainState, roles: &RoleAssignment, item: &BatchItem) {
    chain.clamp_bits(&roles.visible_ids, item.0.iter().copied());
    if let Some(class) = item.1 {
        let bits: Vec<bool> = (0..roles.label_ids.len())
            .map(|k| k % roles.n_classes == class as usize)
            .collect();
        chain.clamp_bits(&roles.label_ids, bits.iter().copied());
    }
}

/// Data-clamped phase: each image is clamped onto the visible (and label)
/// nodes, the free units are sampled for N sweeps, and every sweep's state
/// contributes to ⟨m_i m_j⟩_data = Σ m mᵀ / (N·B).
pub fn positive_phase(
    model: &Model,
    roles: &RoleAssignment,
    batch: &[BatchItem],
    config: &TrainConfig,
    seed: u64,
) -> Result<PhaseStats, TrainError> {
    if model.representation() != Representation::Bipolar {
        return Err(TrainError::Config("training expects a bipolar model".into()));
    }
    if batch.is_empty() {
        return Err(TrainError::Dataset("empty batch".into()));
    }
    let n = model.node_count();
    let sweeps = config.sweeps_per_image;
    let engine = config.engine();
    let mut corr_sum = vec![0.0; model.graph().edge_count()];
    let mut mean_sum = vec![0.0; n];
    for (k, item) in batch.iter().enumerate() {
        if item.0.len() != roles.visible_ids.len() {
            return Err(TrainError::Dimension(format!(
                "image {k} has {} bits, expected {}",
                item.0.len(),
                roles.visible_ids.len()
            )));
        }
        let mut chain = ChainState::new(model, rng::derive_seed(seed, k as u64), config.beta);
        clamp_item(&mut chain, roles, item);
        let mut rec = BitRecorder::new(n, sweeps as usize);
        engine.run(model, &mut chain, sweeps, &mut rec)?;
        rec.accumulate(model.graph(), &mut corr_sum, &mut mean_sum);
    }
    let total = sweeps * batch.len() as u64;
    let norm = total as f64;
    Ok(PhaseStats {
        corr: corr_sum.iter().map(|&s| s / norm).collect(),
        mean: mean_sum.iter().map(|&s| s / norm).collect(),
        samples: total,
    })
}

/// Free-running phase: no clamps at all. CD starts a fresh chain; PCD
/// continues the chain left in `persistent` and stores it back.
pub fn negative_phase(
    model: &Model,
    config: &TrainConfig,
    persistent: &mut Option<ChainState>,
    seed: u64,
) -> Result<PhaseStats, TrainError> {
    let sweeps = config.negative_sweeps();
    let engine = config.engine();
    let n = model.node_count();
    let mut chain = match config.cd_mode {
        CdMode::Cd => ChainState::new(model, seed, config.beta),
        CdMode::Pcd => match persistent.take() {
            Some(mut c) => {
                c.beta = config.beta;
                c
            }
            None => ChainState::new(model, seed, config.beta),
        },
    };
    chain.clear_clamps();
    let mut rec = BitRecorder::new(n, sweeps as usize);
    engine.run(model, &mut chain, sweeps, &mut rec)?;
    let mut corr_sum = vec![0.0; model.graph().edge_count()];
    let mut mean_sum = vec![0.0; n];
    rec.accumulate(model.graph(), &mut corr_sum, &mut mean_sum);
    if config.cd_mode == CdMode::Pcd {
        *persistent = Some(chain);
    }
    let norm = sweeps as f64;
    Ok(PhaseStats {
        corr: corr_sum.iter().map(|&s| s / norm).collect(),
        mean: mean_sum.iter().map(|&s| s / norm).collect(),
        samples: sweeps,
    })
}

/// Owns the float64 master weights, momentum memory and (for PCD) the
/// persistent negative chain.
pub struct Trainer {
    model: Model,
    pub config: TrainConfig,
    master_j: Vec<f64>,
    master_h: Vec<f64>,
    prev_dj: Vec<f64>,
    prev_dh: Vec<f64>,
    persistent: Option<ChainState>,
    update_count: u64,
    last_mean_abs_dj: f64,
}

impl Trainer {
    pub fn new(model: Model, config: TrainConfig) -> Result<Self, TrainError> {
        config.validate()?;
        let ne = model.graph().edge_count();
        let nn = model.node_count();
        Ok(Self {
            master_j: model.couplings().to_vec(),
            master_h: model.biases().to_vec(),
            prev_dj: vec![0.0; ne],
            prev_dh: vec![0.0; nn],
            persistent: None,
            update_count: 0,
            last_mean_abs_dj: 0.0,
            model,
            config,
        })
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn into_model(self) -> Model {
        self.model
    }

    pub fn update_count(&self) -> u64 {
        self.update_count
    }

    pub fn last_mean_abs_dj(&self) -> f64 {
        self.last_mean_abs_dj
    }

    /// Momentum update ΔJ = ε(⟨mm⟩_data − ⟨mm⟩_model) + αΔJ_prev, with the
    /// optional weight-decay term −ελJ; masters stay float64 and the
    /// quantized copy is pushed to the sampler.
    pub fn apply_update(
        &mut self,
        data: &PhaseStats,
        model_stats: &PhaseStats,
    ) -> Result<(), TrainError> {
        let ne = self.master_j.len();
        if data.corr.len() != ne || model_stats.corr.len() != ne {
            return Err(TrainError::Dimension("gradient edge count".into()));
        }
        let (eps, alpha, lambda) =
            (self.config.learning_rate, self.config.momentum, self.config.weight_decay);
        let mut abs_sum = 0.0;
        for e in 0..ne {
            let mut dj = eps * (data.corr[e] - model_stats.corr[e]) + alpha * self.prev_dj[e];
            if lambda > 0.0 {
                dj -= eps * lambda * self.master_j[e];
            }
            self.prev_dj[e] = dj;
            self.master_j[e] += dj;
            abs_sum += dj.abs();
        }
        for i in 0..self.master_h.len() {
            let dh = eps * (data.mean[i] - model_stats.mean[i]) + alpha * self.prev_dh[i];
            self.prev_dh[i] = dh;
            self.master_h[i] += dh;
        }
        self.model.set_weights(&self.master_j, &self.master_h)?;
        self.update_count += 1;
        self.last_mean_abs_dj = abs_sum / ne.max(1) as f64;
        Ok(())
    }

    /// One full weight update: positive phase on the batch, negative
    /// phase, gradient step.
    pub fn step(&mut self, roles: &RoleAssignment, batch: &[BatchItem]) -> Result<(), TrainError> {
        let tag = self.update_count;
        let pos_seed = rng::derive_seed(self.config.master_seed, 2 * tag + 1);
        let neg_seed = rng::derive_seed(self.config.master_seed, 2 * tag + 2);
        let data = positive_phase(&self.model, roles, batch, &self.config, pos_seed)?;
        let mut persistent = self.persistent.take();
        let model_stats = negative_phase(&self.model, &self.config, &mut persistent, neg_seed)?;
        self.persistent = persistent;
        self.apply_update(&data, &model_stats)
    }
}

#[derive(Debug, Clone)]
pub struct EpochMetrics {
    pub epoch: u32,
    pub train_acc: Option<f64>,
    pub test_acc: Option<f64>,
    pub mean_abs_dj: f64,
    pub wallclock_s: f64,
}

#[derive(Default)]
pub struct TrainOptions<'a> {
    /// Evaluate accuracy on these sets each epoch (classification sweeps
    /// below).
    pub eval_train: Option<&'a Dataset>,
    pub eval_test: Option<&'a Dataset>,
    pub eval_sweeps: u64,
    /// Persist a checkpoint per epoch into this directory.
    pub checkpoint_dir: Option<PathBuf>,
    /// Stop once train accuracy reaches this level.
    pub stop_at_train_acc: Option<f64>,
}

/// Classification accuracy of a model over a dataset.
pub fn evaluate_accuracy(
    model: &Model,
    roles: &RoleAssignment,
    ds: &Dataset,
    n_sweeps: u64,
    beta: f64,
    engine: Engine,
    seed: u64,
) -> Result<f64, TrainError> {
    let mut correct = 0usize;
    for i in 0..ds.len() {
        let bits: Vec<bool> = ds.image_bits(i).collect();
        let r = tasks::classify(
            model,
            roles,
            &bits,
            n_sweeps,
            beta,
            engine,
            rng::derive_seed(seed, i as u64),
        )?;
        if r.predicted == ds.label(i) as usize {
            correct += 1;
        }
    }
    Ok(correct as f64 / ds.len().max(1) as f64)
}

/// Epoch/batch training loop: seeded shuffle per epoch, N_B batches of B,
/// one weight update per batch, per-epoch metrics and checkpoints.
pub fn train(
    model: Model,
    roles: &RoleAssignment,
    train_set: &Dataset,
    config: TrainConfig,
    options: &TrainOptions,
    mut callback: Option<&mut dyn FnMut(&EpochMetrics, &Model)>,
) -> Result<(Model, Vec<EpochMetrics>), TrainError> {
    config.validate()?;
    let needed = config.batch_size * config.n_batches;
    if train_set.len() < needed {
        return Err(TrainError::Dataset(format!(
            "need {needed} examples for {} batches of {}, have {}",
            config.n_batches,
            config.batch_size,
            train_set.len()
        )));
    }
    let has_labels = roles.n_classes > 0 && roles.n_replicas > 0;
    let mut trainer = Trainer::new(model, config.clone())?;
    let mut metrics = Vec::new();
    let start = Instant::now();

    // Epoch 0 = the untouched initialization, so epochs=0 still leaves a
    // loadable artifact behind.
    if let Some(dir) = &options.checkpoint_dir {
        std::fs::create_dir_all(dir)?;
        trainer.model().save(dir.join("checkpoint_0000.pbm1"))?;
    }

    for epoch in 1..=config.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut shuffle_rng =
            rng::stream(rng::derive_seed(config.master_seed, 0x10_0000 + epoch as u64));
        order.shuffle(&mut shuffle_rng);

        for b in 0..config.n_batches {
            let ids = &order[b * config.batch_size..(b + 1) * config.batch_size];
            let bits: Vec<Vec<bool>> =
                ids.iter().map(|&i| train_set.image_bits(i).collect()).collect();
            let batch: Vec<BatchItem> = ids
                .iter()
                .zip(&bits)
                .map(|(&i, b)| {
                    (b.as_slice(), has_labels.then(|| train_set.label(i)))
                })
                .collect();
            trainer.step(roles, &batch)?;
        }

        let eval_seed = rng::derive_seed(config.master_seed, 0x20_0000 + epoch as u64);
        let eval = |ds: Option<&Dataset>, salt: u64| -> Result<Option<f64>, TrainError> {
            ds.map(|d| {
                evaluate_accuracy(
                    trainer.model(),
                    roles,
                    d,
                    options.eval_sweeps.max(1),
                    config.beta,
                    config.engine(),
                    eval_seed ^ salt,
                )
            })
            .transpose()
        };
        let m = EpochMetrics {
            epoch,
            train_acc: eval(options.eval_train, 0)?,
            test_acc: eval(options.eval_test, 1)?,
            mean_abs_dj: trainer.last_mean_abs_dj(),
            wallclock_s: start.elapsed().as_secs_f64(),
        };
        if let Some(dir) = &options.checkpoint_dir {
            std::fs::create_dir_all(dir)?;
            trainer.model().save(dir.join(format!("checkpoint_{epoch:04}.pbm1")))?;
        }
        if let Some(cb) = callback.as_deref_mut() {
            cb(&m, trainer.model());
        }
        let reached = match (options.stop_at_train_acc, m.train_acc) {
            (Some(target), Some(acc)) => acc >= target,
            _ => false,
        };
        metrics.push(m);
        if reached {
            break;
        }
    }
    Ok((trainer.into_model(), metrics))
}

/// CSV metrics log: epoch, train_acc, test_acc, mean_abs_dJ, wallclock_s.
pub fn write_metrics(path: impl AsRef<Path>, metrics: &[EpochMetrics]) -> Result<(), TrainError> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "epoch,train_acc,test_acc,mean_abs_dj,wallclock_s")?;
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x}"));
    for m in metrics {
        writeln!(
            w,
            "{},{},{},{},{}",
            m.epoch,
            fmt(m.train_acc),
            fmt(m.test_acc),
            m.mean_abs_dj,
            m.wallclock_s
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct KlGradient {
    /// ⟨m_i m_j⟩_data − ⟨m_i m_j⟩_model per edge.
    pub dj: Vec<f64>,
    /// ⟨m_i⟩_data − ⟨m_i⟩_model per node.
    pub dh: Vec<f64>,
}

/// Exact gradient of −KL(data ∥ model) for a fully visible model, by
/// enumeration over all 2^M states. `data` is indexed by the state index
/// (bit i set = node i up).
pub fn exact_kl_gradient(
    model: &Model,
    data: &[f64],
    beta: f64,
) -> Result<KlGradient, TrainError> {
    let n = model.node_count();
    if n > 12 {
        return Err(TrainError::Config(format!("{n} nodes too many for enumeration")));
    }
    if data.len() != 1 << n {
        return Err(TrainError::Dimension("data distribution size".into()));
    }
    let exact = diagnostics::enumerate_boltzmann(model, beta)?;
    let down = match model.representation() {
        Representation::Bipolar => -1.0,
        Representation::Binary => 0.0,
    };
    let spin = |state: usize, i: usize| -> f64 {
        if state >> i & 1 == 1 {
            1.0
        } else {
            down
        }
    };
    let edges = model.graph().edges();
    let mut dj = vec![0.0; edges.len()];
    let mut dh = vec![0.0; n];
    for state in 0..1usize << n {
        let w = data[state] - exact.probabilities[state];
        if w == 0.0 {
            continue;
        }
        for (e, &(u, v)) in edges.iter().enumerate() {
            dj[e] += w * spin(state, u as usize) * spin(state, v as usize);
        }
        for (i, g) in dh.iter_mut().enumerate() {
            *g += w * spin(state, i);
        }
    }
    Ok(KlGradient { dj, dh })
}
