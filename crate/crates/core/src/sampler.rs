//! p-bit Gibbs dynamics: a sequential oracle engine and a graph-colored
//! parallel engine with barrier-separated color rounds.
//!
//! Both engines draw from per-node random streams, so a run is a pure
//! function of (model, master seed, engine kind, schedule) — the chromatic
//! engine returns bit-identical samples for any worker count.

use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Barrier};

use rand::Rng;
use thiserror::Error;

use crate::model::{Model, Representation};
use crate::rng::{self, NodeRng};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("chromatic engine requires a colored graph")]
    Uncolored,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("stride must be >= 1")]
    ZeroStride,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("sample block file: {0}")]
    Parse(String),
}

/// tanh evaluation for the activation. `Lut` emulates a hardware lookup
/// table at a configurable resolution over a clamped input range.
#[derive(Debug, Clone)]
pub enum Activation {
    Tanh,
    Lut(Arc<TanhLut>),
}

#[derive(Debug)]
pub struct TanhLut {
    table: Vec<f64>,
    max_abs: f64,
    inv_step: f64,
}

impl Activation {
    pub fn lut(entries: usize, max_abs: f64) -> Self {
        assert!(entries >= 2 && max_abs > 0.0);
        let step = 2.0 * max_abs / (entries - 1) as f64;
        let table = (0..entries)
            .map(|k| (-max_abs + k as f64 * step).tanh())
            .collect();
        Activation::Lut(Arc::new(TanhLut { table, max_abs, inv_step: 1.0 / step }))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Lut(lut) => {
                let clamped = x.clamp(-lut.max_abs, lut.max_abs);
                let idx = ((clamped + lut.max_abs) * lut.inv_step).round() as usize;
                lut.table[idx.min(lut.table.len() - 1)]
            }
        }
    }
}

/// Mutable Markov chain state: per-node states, clamp mask and one random
/// stream per node.
pub struct ChainState {
    m: Vec<i8>,
    clamp_mask: Vec<bool>,
    clamp_values: Vec<i8>,
    pub beta: f64,
    pub activation: Activation,
    rngs: Vec<NodeRng>,
    master_seed: u64,
    representation: Representation,
    flip_attempts: u64,
}

impl ChainState {
    /// Fresh chain with all free nodes randomized (one draw per node from
    /// its own stream).
    pub fn new(model: &Model, master_seed: u64, beta: f64) -> Self {
        let n = model.node_count();
        let mut chain = Self {
            m: vec![0; n],
            clamp_mask: vec![false; n],
            clamp_values: vec![0; n],
            beta,
            activation: Activation::Tanh,
            rngs: (0..n).map(|i| rng::node_stream(master_seed, i as u64)).collect(),
            master_seed,
            representation: model.representation(),
            flip_attempts: 0,
        };
        chain.randomize_free();
        chain
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn states(&self) -> &[i8] {
        &self.m
    }

    pub fn node_count(&self) -> usize {
        self.m.len()
    }

    pub fn flip_attempts(&self) -> u64 {
        self.flip_attempts
    }

    #[inline]
    pub fn up(&self) -> i8 {
        1
    }

    #[inline]
    pub fn down(&self) -> i8 {
        match self.representation {
            Representation::Bipolar => -1,
            Representation::Binary => 0,
        }
    }

    /// Draw every free node uniformly from its own stream.
    pub fn randomize_free(&mut self) {
        let down = self.down();
        for i in 0..self.m.len() {
            if self.clamp_mask[i] {
                self.m[i] = self.clamp_values[i];
            } else {
                self.m[i] = if self.rngs[i].gen::<f64>() < 0.5 { self.up() } else { down };
            }
        }
    }

    pub fn set_all_up(&mut self) {
        let up = self.up();
        for i in 0..self.m.len() {
            self.m[i] = if self.clamp_mask[i] { self.clamp_values[i] } else { up };
        }
    }

    /// Clamp nodes to explicit state values.
    pub fn clamp(&mut self, nodes: &[u32], values: &[i8]) {
        assert_eq!(nodes.len(), values.len());
        for (&n, &v) in nodes.iter().zip(values) {
            debug_assert!(v == self.up() || v == self.down(), "clamp value out of domain");
            self.clamp_mask[n as usize] = true;
            self.clamp_values[n as usize] = v;
            self.m[n as usize] = v;
        }
    }

    /// Clamp nodes to data bits (1 → up, 0 → down).
    pub fn clamp_bits(&mut self, nodes: &[u32], bits: impl IntoIterator<Item = bool>) {
        let (up, down) = (self.up(), self.down());
        for (&n, b) in nodes.iter().zip(bits) {
            let v = if b { up } else { down };
            self.clamp_mask[n as usize] = true;
            self.clamp_values[n as usize] = v;
            self.m[n as usize] = v;
        }
    }

    pub fn clear_clamps(&mut self) {
        self.clamp_mask.iter_mut().for_each(|c| *c = false);
    }

    pub fn is_clamped(&self, node: u32) -> bool {
        self.clamp_mask[node as usize]
    }

    pub fn free_count(&self) -> u64 {
        self.clamp_mask.iter().filter(|&&c| !c).count() as u64
    }
}

/// One p-bit update: m = sgn(tanh(βI) − u), u uniform on [−1, 1), ties to
/// up. Consumes exactly one draw. Clamped nodes are skipped by the sweep
/// loops and never reach here.
#[inline]
fn update_node(
    model: &Model,
    activation: &Activation,
    beta: f64,
    states: &mut [i8],
    rng: &mut NodeRng,
    node: u32,
    down: i8,
) {
    let field = model.effective_field(states, node);
    let t = activation.eval(beta * field);
    let u = rng.gen::<f64>().mul_add(2.0, -1.0);
    states[node as usize] = if t >= u { 1 } else { down };
}

/// Receives the chain state after every sweep; recording must not pause
/// the chain, so observers copy what they need and return.
pub trait SweepObserver {
    fn observe(&mut self, sweep: u64, states: &[i8]);
}

/// No-op observer.
pub struct Discard;

impl SweepObserver for Discard {
    fn observe(&mut self, _sweep: u64, _states: &[i8]) {}
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Sequential,
    Chromatic,
}

impl std::str::FromStr for EngineKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sequential" => Ok(EngineKind::Sequential),
            "chromatic" => Ok(EngineKind::Chromatic),
            other => Err(format!("unknown engine {other:?}")),
        }
    }
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            EngineKind::Sequential => write!(f, "sequential"),
            EngineKind::Chromatic => write!(f, "chromatic"),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Engine {
    pub kind: EngineKind,
    pub workers: usize,
}

impl Engine {
    pub fn sequential() -> Self {
        Engine { kind: EngineKind::Sequential, workers: 1 }
    }

    pub fn chromatic(workers: usize) -> Self {
        Engine { kind: EngineKind::Chromatic, workers: workers.max(1) }
    }

    pub fn new(kind: EngineKind, workers: usize) -> Self {
        Engine { kind, workers: workers.max(1) }
    }

    /// Run `n_sweeps` full sweeps, invoking the observer after each.
    pub fn run(
        &self,
        model: &Model,
        chain: &mut ChainState,
        n_sweeps: u64,
        observer: &mut dyn SweepObserver,
    ) -> Result<(), SamplerError> {
        if chain.node_count() != model.node_count() {
            return Err(SamplerError::Dimension(format!(
                "chain has {} nodes, model {}",
                chain.node_count(),
                model.node_count()
            )));
        }
        match self.kind {
            EngineKind::Sequential => self.run_sequential(model, chain, n_sweeps, observer),
            EngineKind::Chromatic => {
                if model.graph().coloring().is_none() {
                    return Err(SamplerError::Uncolored);
                }
                if self.workers == 1 {
                    self.run_chromatic_serial(model, chain, n_sweeps, observer)
                } else {
                    self.run_chromatic_parallel(model, chain, n_sweeps, observer)
                }
            }
        }
    }

    /// Ascending node-id Gibbs sweep; every unclamped node updates once,
    /// each seeing the freshest neighbor states.
    fn run_sequential(
        &self,
        model: &Model,
        chain: &mut ChainState,
        n_sweeps: u64,
        observer: &mut dyn SweepObserver,
    ) -> Result<(), SamplerError> {
        let n = chain.node_count() as u32;
        let free = chain.free_count();
        let down = chain.down();
        for sweep in 1..=n_sweeps {
            for node in 0..n {
                if chain.clamp_mask[node as usize] {
                    continue;
                }
                update_node(
                    model,
                    &chain.activation,
                    chain.beta,
                    &mut chain.m,
                    &mut chain.rngs[node as usize],
                    node,
                    down,
                );
            }
            chain.flip_attempts += free;
            observer.observe(sweep, &chain.m);
        }
        Ok(())
    }

    /// Color groups in schedule order. Within a group no two nodes are
    /// adjacent, so serial in-place updates equal the parallel result.
    fn run_chromatic_serial(
        &self,
        model: &Model,
        chain: &mut ChainState,
        n_sweeps: u64,
        observer: &mut dyn SweepObserver,
    ) -> Result<(), SamplerError> {
        let schedule = model.graph().color_schedule().map_err(|_| SamplerError::Uncolored)?;
        let free = chain.free_count();
        let down = chain.down();
        for sweep in 1..=n_sweeps {
            for group in schedule {
                for &node in group {
                    if chain.clamp_mask[node as usize] {
                        continue;
                    }
                    update_node(
                        model,
                        &chain.activation,
                        chain.beta,
                        &mut chain.m,
                        &mut chain.rngs[node as usize],
                        node,
                        down,
                    );
                }
            }
            chain.flip_attempts += free;
            observer.observe(sweep, &chain.m);
        }
        Ok(())
    }

    /// Lock-step worker pool: each worker owns a fixed chunk of every color
    /// group; a barrier separates color rounds so group k+1 sees all of
    /// group k's writes. Per-node streams keep the result independent of
    /// the worker count.
    fn run_chromatic_parallel(
        &self,
        model: &Model,
        chain: &mut ChainState,
        n_sweeps: u64,
        observer: &mut dyn SweepObserver,
    ) -> Result<(), SamplerError> {
        let schedule = model.graph().color_schedule().map_err(|_| SamplerError::Uncolored)?;
        let workers = self.workers;
        let barrier = Barrier::new(workers);
        let free = chain.free_count();
        let beta = chain.beta;
        let down = chain.down();
        let activation = chain.activation.clone();
        let attempts = AtomicU64::new(chain.flip_attempts);

        // Raw views into the chain. Safety argument: within one color
        // round, worker chunks partition the group, group members are
        // pairwise non-adjacent (coloring invariant), and clamped nodes are
        // skipped — so every state/rng cell is written by at most one
        // thread while readers only touch other colors' cells. Barriers
        // order rounds.
        struct Shared {
            states: *mut i8,
            rngs: *mut NodeRng,
        }
        unsafe impl Sync for Shared {}
        let shared = Shared {
            states: chain.m.as_mut_ptr(),
            rngs: chain.rngs.as_mut_ptr(),
        };
        let clamp_mask = &chain.clamp_mask;
        let n_nodes = chain.m.len();
        // Borrow as a whole so closures capture &Shared (Sync), not the
        // raw pointer fields.
        let shared = &shared;

        let chunk = |group: &[u32], w: usize| -> std::ops::Range<usize> {
            let len = group.len();
            (w * len / workers)..((w + 1) * len / workers)
        };

        let run_worker = |w: usize, mut after_sweep: Option<&mut dyn FnMut(u64)>| {
            for sweep in 1..=n_sweeps {
                for group in schedule {
                    for &node in &group[chunk(group, w)] {
                        if clamp_mask[node as usize] {
                            continue;
                        }
                        // SAFETY: see Shared above.
                        unsafe {
                            let states = std::slice::from_raw_parts_mut(shared.states, n_nodes);
                            let rng = &mut *shared.rngs.add(node as usize);
                            update_node(model, &activation, beta, states, rng, node, down);
                        }
                    }
                    barrier.wait();
                }
                if let Some(hook) = after_sweep.as_deref_mut() {
                    hook(sweep);
                }
                // Keep other workers out of the next color round until the
                // observer has read this sweep's states.
                barrier.wait();
            }
        };

        std::thread::scope(|scope| {
            for w in 1..workers {
                let run_worker = &run_worker;
                scope.spawn(move || run_worker(w, None));
            }
            let states_view =
                unsafe { std::slice::from_raw_parts(shared.states as *const i8, n_nodes) };
            let mut hook = |sweep: u64| {
                attempts.fetch_add(free, Ordering::Relaxed);
                observer.observe(sweep, states_view);
            };
            run_worker(0, Some(&mut hook));
        });

        chain.flip_attempts = attempts.into_inner();
        Ok(())
    }

    /// Execute sweeps and record a snapshot every `stride` sweeps.
    pub fn run_chain(
        &self,
        model: &Model,
        chain: &mut ChainState,
        n_sweeps: u64,
        stride: u64,
    ) -> Result<SampleBlock, SamplerError> {
        if stride == 0 {
            return Err(SamplerError::ZeroStride);
        }
        let mut recorder = BlockRecorder::new(model.node_count(), stride);
        self.run(model, chain, n_sweeps, &mut recorder)?;
        Ok(recorder.finish())
    }

    /// Run `sweeps_per_step` sweeps at each β of the schedule, recording
    /// the state reached at each β. Clamps are untouched.
    pub fn anneal(
        &self,
        model: &Model,
        chain: &mut ChainState,
        schedule: &AnnealSchedule,
    ) -> Result<SampleBlock, SamplerError> {
        let mut block = SampleBlock::empty(model.node_count(), schedule.sweeps_per_step);
        let mut total = 0u64;
        for beta in schedule.betas() {
            chain.beta = beta;
            self.run(model, chain, schedule.sweeps_per_step, &mut Discard)?;
            total += schedule.sweeps_per_step;
            block.push_row(total, chain.states());
        }
        Ok(block)
    }
}

/// Observer that snapshots every `stride`-th sweep into a block.
struct BlockRecorder {
    stride: u64,
    block: SampleBlock,
}

impl BlockRecorder {
    fn new(node_count: usize, stride: u64) -> Self {
        Self { stride, block: SampleBlock::empty(node_count, stride) }
    }

    fn finish(self) -> SampleBlock {
        self.block
    }
}

impl SweepObserver for BlockRecorder {
    fn observe(&mut self, sweep: u64, states: &[i8]) {
        if sweep % self.stride == 0 {
            self.block.push_row(sweep, states);
        }
    }
}

/// β ramp: inclusive of both endpoints.
#[derive(Debug, Clone, Copy)]
pub struct AnnealSchedule {
    pub beta_start: f64,
    pub beta_end: f64,
    pub beta_step: f64,
    pub sweeps_per_step: u64,
}

impl AnnealSchedule {
    pub fn new(
        beta_start: f64,
        beta_end: f64,
        beta_step: f64,
        sweeps_per_step: u64,
    ) -> Result<Self, SamplerError> {
        if beta_start < 0.0 || beta_end < 0.0 {
            return Err(SamplerError::Schedule("beta must be non-negative".into()));
        }
        if sweeps_per_step == 0 {
            return Err(SamplerError::Schedule("sweeps_per_step must be positive".into()));
        }
        if (beta_end - beta_start).abs() > 1e-12 {
            if beta_step == 0.0 || (beta_end - beta_start).signum() != beta_step.signum() {
                return Err(SamplerError::Schedule(
                    "step sign must match end − start".into(),
                ));
            }
        }
        Ok(Self { beta_start, beta_end, beta_step, sweeps_per_step })
    }

    /// Paper default for generation: β from 0 to 5 in 0.125 increments.
    pub fn generation_default(sweeps_per_step: u64) -> Self {
        Self::new(0.0, 5.0, 0.125, sweeps_per_step).unwrap()
    }

    pub fn betas(&self) -> Vec<f64> {
        let span = self.beta_end - self.beta_start;
        if span.abs() <= 1e-12 {
            return vec![self.beta_start];
        }
        let count = (span / self.beta_step + 1e-9).floor() as u64;
        let mut betas: Vec<f64> = (0..=count)
            .map(|k| self.beta_start + k as f64 * self.beta_step)
            .collect();
        if (betas.last().copied().unwrap() - self.beta_end).abs() > 1e-9 {
            betas.push(self.beta_end);
        }
        betas
    }
}

/// Snapshot matrix recorded from a running chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SampleBlock {
    node_count: usize,
    stride: u64,
    sweeps: Vec<u64>,
    states: Vec<i8>,
}

impl SampleBlock {
    pub fn empty(node_count: usize, stride: u64) -> Self {
        Self { node_count, stride, sweeps: Vec::new(), states: Vec::new() }
    }

    fn push_row(&mut self, sweep: u64, states: &[i8]) {
        debug_assert_eq!(states.len(), self.node_count);
        self.sweeps.push(sweep);
        self.states.extend_from_slice(states);
    }

    pub fn n_rows(&self) -> usize {
        self.sweeps.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn stride(&self) -> u64 {
        self.stride
    }

    pub fn sweeps(&self) -> &[u64] {
        &self.sweeps
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.states[i * self.node_count..(i + 1) * self.node_count]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[i8]> {
        self.states.chunks_exact(self.node_count)
    }

    /// Packed-bit export: each row is ceil(n/8) bytes, bit set for the up
    /// state; the sidecar carries dimensions and sweep indices as text.
    pub fn export_packed(
        &self,
        bits_path: impl AsRef<Path>,
        sidecar_path: impl AsRef<Path>,
    ) -> Result<(), SamplerError> {
        let mut bits = std::io::BufWriter::new(std::fs::File::create(bits_path)?);
        let row_bytes = self.node_count.div_ceil(8);
        let mut buf = vec![0u8; row_bytes];
        for row in self.rows() {
            buf.iter_mut().for_each(|b| *b = 0);
            for (i, &s) in row.iter().enumerate() {
                if s == 1 {
                    buf[i / 8] |= 1 << (i % 8);
                }
            }
            bits.write_all(&buf)?;
        }
        let mut side = std::io::BufWriter::new(std::fs::File::create(sidecar_path)?);
        writeln!(side, "{} {} {}", self.n_rows(), self.node_count, self.stride)?;
        for &s in &self.sweeps {
            writeln!(side, "{s}")?;
        }
        Ok(())
    }

    /// Load a packed export. States come back as up/down in the given
    /// representation.
    pub fn import_packed(
        bits_path: impl AsRef<Path>,
        sidecar_path: impl AsRef<Path>,
        representation: Representation,
    ) -> Result<Self, SamplerError> {
        let side = std::fs::File::open(sidecar_path)?;
        let mut lines = BufReader::new(side).lines();
        let header = lines
            .next()
            .ok_or_else(|| SamplerError::Parse("empty sidecar".into()))??;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(SamplerError::Parse("bad sidecar header".into()));
        }
        let rows: usize = toks[0].parse().map_err(|_| SamplerError::Parse("bad rows".into()))?;
        let node_count: usize =
            toks[1].parse().map_err(|_| SamplerError::Parse("bad node count".into()))?;
        let stride: u64 =
            toks[2].parse().map_err(|_| SamplerError::Parse("bad stride".into()))?;
        let mut sweeps = Vec::with_capacity(rows);
        for line in lines.take(rows) {
            sweeps.push(
                line?
                    .trim()
                    .parse()
                    .map_err(|_| SamplerError::Parse("bad sweep index".into()))?,
            );
        }
        if sweeps.len() != rows {
            return Err(SamplerError::Parse("sidecar truncated".into()));
        }

        let down = match representation {
            Representation::Bipolar => -1i8,
            Representation::Binary => 0,
        };
        let row_bytes = node_count.div_ceil(8);
        let mut packed = Vec::new();
        std::fs::File::open(bits_path)?.read_to_end(&mut packed)?;
        if packed.len() != rows * row_bytes {
            return Err(SamplerError::Parse("packed size mismatch".into()));
        }
        let mut states = Vec::with_capacity(rows * node_count);
        for r in 0..rows {
            let row = &packed[r * row_bytes..(r + 1) * row_bytes];
            for i in 0..node_count {
                states.push(if row[i / 8] >> (i % 8) & 1 == 1 { 1 } else { down });
            }
        }
        Ok(Self { node_count, stride, sweeps, states })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SparseGraph;
    use crate::model::Precision;
    use std::sync::Arc;

    fn free_pair_model(j: f64) -> Model {
        let g = Arc::new(SparseGraph::from_edges(2, vec![(0, 1)]).unwrap().color_dsatur());
        Model::new(g, vec![j], vec![0.0, 0.0], Precision::Float64, Representation::Bipolar)
            .unwrap()
    }

    #[test]
    fn all_clamped_sweep_is_identity() {
        let model = free_pair_model(1.0);
        let mut chain = ChainState::new(&model, 1, 1.0);
        chain.clamp(&[0, 1], &[1, -1]);
        let before = chain.states().to_vec();
        Engine::sequential().run(&model, &mut chain, 50, &mut Discard).unwrap();
        assert_eq!(chain.states(), &before[..]);
        assert_eq!(chain.flip_attempts(), 0);
    }

    #[test]
    fn run_chain_row_arithmetic() {
        let model = free_pair_model(0.3);
        let mut chain = ChainState::new(&model, 2, 1.0);
        let block = Engine::sequential().run_chain(&model, &mut chain, 10, 5).unwrap();
        assert_eq!(block.n_rows(), 2);
        assert_eq!(block.sweeps(), &[5, 10]);
        let empty = Engine::sequential().run_chain(&model, &mut chain, 0, 1).unwrap();
        assert_eq!(empty.n_rows(), 0);
    }

    #[test]
    fn clamped_rows_constant_under_stride_one() {
        let model = free_pair_model(0.5);
        let mut chain = ChainState::new(&model, 3, 1.0);
        chain.clamp(&[0, 1], &[1, 1]);
        let block = Engine::sequential().run_chain(&model, &mut chain, 20, 1).unwrap();
        for row in block.rows() {
            assert_eq!(row, &[1, 1]);
        }
    }

    #[test]
    fn sweep_counts_each_free_node_once() {
        let model = free_pair_model(0.0);
        let mut chain = ChainState::new(&model, 4, 1.0);
        chain.clamp(&[0], &[1]);
        Engine::sequential().run(&model, &mut chain, 7, &mut Discard).unwrap();
        assert_eq!(chain.flip_attempts(), 7);
    }

    #[test]
    fn free_node_at_unit_beta_is_fair() {
        // J = 0, h = 0, β = 1: time-average must be 0 within 3σ.
        let model = free_pair_model(0.0);
        let mut chain = ChainState::new(&model, 5, 1.0);
        let n = 100_000u64;
        struct MeanObs(f64);
        impl SweepObserver for MeanObs {
            fn observe(&mut self, _s: u64, states: &[i8]) {
                self.0 += states[0] as f64;
            }
        }
        let mut obs = MeanObs(0.0);
        Engine::sequential().run(&model, &mut chain, n, &mut obs).unwrap();
        let mean = obs.0 / n as f64;
        let sigma = 1.0 / (n as f64).sqrt();
        assert!(mean.abs() < 3.0 * sigma, "mean {mean} vs 3σ {}", 3.0 * sigma);
    }

    #[test]
    fn two_spin_alignment_probability() {
        // J = 1, β = 1: P(m1 = m2) = e / (e + e^{−1}) ≈ 0.8808.
        let model = free_pair_model(1.0);
        let mut chain = ChainState::new(&model, 6, 1.0);
        let n = 200_000u64;
        struct AlignObs(u64);
        impl SweepObserver for AlignObs {
            fn observe(&mut self, _s: u64, states: &[i8]) {
                if states[0] == states[1] {
                    self.0 += 1;
                }
            }
        }
        let mut obs = AlignObs(0);
        Engine::sequential().run(&model, &mut chain, n, &mut obs).unwrap();
        let p = obs.0 as f64 / n as f64;
        let expected = std::f64::consts::E / (std::f64::consts::E + (-1.0f64).exp());
        assert!((p - expected).abs() < 0.01, "p {p} vs {expected}");
    }

    #[test]
    fn chromatic_deterministic_across_worker_counts() {
        let g = Arc::new(SparseGraph::random_regular(120, 6, 9).unwrap().color_dsatur());
        let j: Vec<f64> = (0..g.edge_count()).map(|e| ((e % 7) as f64 - 3.0) * 0.2).collect();
        let h: Vec<f64> = (0..g.node_count()).map(|i| ((i % 5) as f64 - 2.0) * 0.1).collect();
        let model =
            Model::new(g, j, h, Precision::Float64, Representation::Bipolar).unwrap();

        let mut blocks = Vec::new();
        for workers in [1, 2, 5] {
            let mut chain = ChainState::new(&model, 77, 1.0);
            let block = Engine::chromatic(workers)
                .run_chain(&model, &mut chain, 40, 4)
                .unwrap();
            blocks.push(block);
        }
        assert_eq!(blocks[0], blocks[1]);
        assert_eq!(blocks[0], blocks[2]);
    }

    #[test]
    fn sequential_runs_are_reproducible() {
        let model = free_pair_model(0.7);
        let mut a = ChainState::new(&model, 11, 1.0);
        let mut b = ChainState::new(&model, 11, 1.0);
        let ba = Engine::sequential().run_chain(&model, &mut a, 100, 10).unwrap();
        let bb = Engine::sequential().run_chain(&model, &mut b, 100, 10).unwrap();
        assert_eq!(ba, bb);
        let mut c = ChainState::new(&model, 12, 1.0);
        let bc = Engine::sequential().run_chain(&model, &mut c, 100, 10).unwrap();
        assert_ne!(ba, bc);
    }

    #[test]
    fn chromatic_requires_coloring() {
        let g = Arc::new(SparseGraph::from_edges(2, vec![(0, 1)]).unwrap());
        let model = Model::new(
            g,
            vec![1.0],
            vec![0.0; 2],
            Precision::Float64,
            Representation::Bipolar,
        )
        .unwrap();
        let mut chain = ChainState::new(&model, 0, 1.0);
        assert!(matches!(
            Engine::chromatic(1).run(&model, &mut chain, 1, &mut Discard),
            Err(SamplerError::Uncolored)
        ));
    }

    #[test]
    fn anneal_schedule_beta_lists() {
        let s = AnnealSchedule::new(0.0, 5.0, 0.125, 10).unwrap();
        let betas = s.betas();
        assert_eq!(betas.len(), 41);
        assert_eq!(betas[0], 0.0);
        assert_eq!(*betas.last().unwrap(), 5.0);

        let degenerate = AnnealSchedule::new(0.0, 0.0, 0.125, 5).unwrap();
        assert_eq!(degenerate.betas(), vec![0.0]);

        assert!(AnnealSchedule::new(0.0, 5.0, -0.125, 5).is_err());
        assert!(AnnealSchedule::new(0.0, 5.0, 0.125, 0).is_err());
    }

    #[test]
    fn anneal_records_one_row_per_beta() {
        let model = free_pair_model(1.0);
        let mut chain = ChainState::new(&model, 8, 0.0);
        let schedule = AnnealSchedule::new(0.0, 1.0, 0.25, 3).unwrap();
        let block = Engine::sequential().anneal(&model, &mut chain, &schedule).unwrap();
        assert_eq!(block.n_rows(), 5);
        assert_eq!(block.sweeps().last().copied(), Some(15));
    }

    #[test]
    fn packed_export_round_trip() {
        let model = free_pair_model(0.4);
        let mut chain = ChainState::new(&model, 21, 1.0);
        let block = Engine::sequential().run_chain(&model, &mut chain, 30, 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let bits = dir.path().join("samples.bits");
        let side = dir.path().join("samples.sweeps");
        block.export_packed(&bits, &side).unwrap();
        let loaded = SampleBlock::import_packed(&bits, &side, Representation::Bipolar).unwrap();
        assert_eq!(block, loaded);
    }

    #[test]
    fn lut_activation_tracks_tanh() {
        let lut = Activation::lut(4097, 8.0);
        for &x in &[-7.5, -1.0, -0.01, 0.0, 0.3, 2.0, 7.9, 12.0] {
            let exact = (x as f64).clamp(-8.0, 8.0).tanh();
            assert!((lut.eval(x) - exact).abs() < 2e-3, "x={x}");
        }
    }
}
