//! Oracles and benchmarks: exact Boltzmann enumeration, distribution
//! distance, relaxation curves, throughput measurement, mixing studies.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::data::Dataset;
use crate::graph::{GraphError, RoleAssignment, SparseGraph};
use crate::model::{Model, Representation};
use crate::rng;
use crate::sampler::{ChainState, Discard, Engine, EngineKind, SamplerError, SweepObserver};
use crate::trainer::{self, TrainConfig, TrainError, TrainOptions};

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("{nodes} nodes exceed the enumeration cap of {cap}")]
    TooManyNodes { nodes: usize, cap: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("training failed: {0}")]
    Train(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

/// Exact Boltzmann distribution over all 2^M states.
#[derive(Debug, Clone)]
pub struct ExactDistribution {
    /// Indexed by state index (bit i set = node i up).
    pub probabilities: Vec<f64>,
    pub z: f64,
    pub beta: f64,
}

/// Map a state vector to its index: bit i set when node i is up.
pub fn state_index(states: &[i8]) -> usize {
    states
        .iter()
        .enumerate()
        .fold(0, |acc, (i, &m)| acc | (usize::from(m == 1) << i))
}

const ENUMERATION_CAP: usize = 20;

/// Exact probabilities by summation over all states. The Gibbs chain's
/// stationary distribution carries the model's energy-scale factor (the
/// binary form is sampled at an effective 2β), which is applied here so
/// the result matches what the sampler converges to.
pub fn enumerate_boltzmann(
    model: &Model,
    beta: f64,
) -> Result<ExactDistribution, DiagnosticsError> {
    let n = model.node_count();
    if n > ENUMERATION_CAP {
        return Err(DiagnosticsError::TooManyNodes { nodes: n, cap: ENUMERATION_CAP });
    }
    let down = match model.representation() {
        Representation::Bipolar => -1i8,
        Representation::Binary => 0,
    };
    let b = beta * model.distribution_energy_scale();
    let mut energies = Vec::with_capacity(1 << n);
    let mut states = vec![down; n];
    for idx in 0..1usize << n {
        for (i, s) in states.iter_mut().enumerate() {
            *s = if idx >> i & 1 == 1 { 1 } else { down };
        }
        energies.push(model.energy(&states));
    }
    let e_min = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|&e| (-b * (e - e_min)).exp()).collect();
    let shifted_z: f64 = weights.iter().sum();
    let probabilities = weights.iter().map(|&w| w / shifted_z).collect();
    Ok(ExactDistribution {
        probabilities,
        z: shifted_z * (-b * e_min).exp(),
        beta,
    })
}

/// Total variation distance ½ Σ |p − q| between an empirical distribution
/// and the exact one.
pub fn tvd(empirical: &[f64], exact: &ExactDistribution) -> Result<f64, DiagnosticsError> {
    if empirical.len() != exact.probabilities.len() {
        return Err(DiagnosticsError::Dimension("state space size".into()));
    }
    Ok(empirical
        .iter()
        .zip(&exact.probabilities)
        .map(|(&p, &q)| (p - q).abs())
        .sum::<f64>()
        / 2.0)
}

/// Convenience: TVD from raw state-visit counts.
pub fn tvd_counts(counts: &[u64], exact: &ExactDistribution) -> Result<f64, DiagnosticsError> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(DiagnosticsError::Dimension("empty histogram".into()));
    }
    let emp: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
    tvd(&emp, exact)
}

/// Ensemble network-magnetization relaxation for one engine.
#[derive(Debug, Clone)]
pub struct RelaxationCurve {
    pub engine: EngineKind,
    pub workers: usize,
    /// mean[k] = ensemble ⟨m⟩ after k sweeps (index 0 = start, all +1).
    pub mean: Vec<f64>,
    pub stderr: Vec<f64>,
}

impl RelaxationCurve {
    /// Fraction of recorded sweeps where two curves agree within
    /// 3·sqrt(se_a² + se_b²).
    pub fn agreement(&self, other: &RelaxationCurve) -> f64 {
        let n = self.mean.len().min(other.mean.len());
        let ok = (0..n)
            .filter(|&k| {
                let se = (self.stderr[k].powi(2) + other.stderr[k].powi(2)).sqrt();
                (self.mean[k] - other.mean[k]).abs() <= 3.0 * se.max(1e-12)
            })
            .count();
        ok as f64 / n.max(1) as f64
    }
}

struct MagnetizationTrace {
    n: f64,
    values: Vec<f64>,
}

impl SweepObserver for MagnetizationTrace {
    fn observe(&mut self, _sweep: u64, states: &[i8]) {
        let sum: i64 = states.iter().map(|&m| m as i64).sum();
        self.values.push(sum as f64 / self.n);
    }
}

/// Start M independent chains from the all-up state and track the network
/// magnetization Σ m_i / N per sweep; returns one ensemble curve per
/// engine. Identical chain seeds are reused across engines.
pub fn magnetization_relaxation(
    model: &Model,
    engines: &[Engine],
    m_chains: usize,
    sweeps: u64,
    beta: f64,
    seed: u64,
) -> Result<Vec<RelaxationCurve>, DiagnosticsError> {
    let n_points = sweeps as usize + 1;
    let mut out = Vec::with_capacity(engines.len());
    for engine in engines {
        let mut sum = vec![0.0; n_points];
        let mut sumsq = vec![0.0; n_points];
        for k in 0..m_chains {
            let mut chain = ChainState::new(model, rng::derive_seed(seed, k as u64), beta);
            chain.set_all_up();
            let mut trace = MagnetizationTrace {
                n: model.node_count() as f64,
                values: vec![1.0],
            };
            engine.run(model, &mut chain, sweeps, &mut trace)?;
            for (i, &v) in trace.values.iter().enumerate() {
                sum[i] += v;
                sumsq[i] += v * v;
            }
        }
        let m = m_chains.max(1) as f64;
        let mean: Vec<f64> = sum.iter().map(|&s| s / m).collect();
        let stderr: Vec<f64> = mean
            .iter()
            .zip(&sumsq)
            .map(|(&mu, &sq)| {
                if m_chains < 2 {
                    0.0
                } else {
                    let var = ((sq / m) - mu * mu).max(0.0) * m / (m - 1.0);
                    (var / m).sqrt()
                }
            })
            .collect();
        out.push(RelaxationCurve {
            engine: engine.kind,
            workers: engine.workers,
            mean,
            stderr,
        });
    }
    Ok(out)
}

/// Write relaxation curves as gnuplot-friendly columns:
/// sweep mean_a err_a mean_b err_b ...
pub fn write_relaxation(
    path: impl AsRef<Path>,
    curves: &[RelaxationCurve],
) -> Result<(), DiagnosticsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = curves
        .iter()
        .map(|c| format!("{}_mean {}_stderr", c.engine, c.engine))
        .collect();
    writeln!(w, "# sweep {}", header.join(" "))?;
    let n = curves.iter().map(|c| c.mean.len()).min().unwrap_or(0);
    for k in 0..n {
        let cols: Vec<String> = curves
            .iter()
            .map(|c| format!("{} {}", c.mean[k], c.stderr[k]))
            .collect();
        writeln!(w, "{k} {}", cols.join(" "))?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct ThroughputReport {
    pub graph_size: usize,
    pub engine: EngineKind,
    pub workers: usize,
    /// Exact counter of attempted p-bit updates across all repetitions.
    pub attempted_flips: u64,
    /// Total measured seconds across repetitions.
    pub elapsed: f64,
    /// Mean rate over repetitions.
    pub flips_per_ns: f64,
    pub repetitions: usize,
    /// Standard error of the per-repetition rates, in flips/ns.
    pub stderr: f64,
}

/// Measure attempted-flip throughput on fixed-degree random graphs of the
/// given sizes. Each size gets `repetitions` timed runs sized so one run
/// lasts roughly `duration_per_rep`.
pub fn throughput_bench(
    graph_sizes: &[usize],
    degree: usize,
    engine: Engine,
    duration_per_rep: Duration,
    repetitions: usize,
    seed: u64,
) -> Result<Vec<ThroughputReport>, DiagnosticsError> {
    assert!(repetitions >= 1);
    let mut reports = Vec::with_capacity(graph_sizes.len());
    for (gi, &n) in graph_sizes.iter().enumerate() {
        let graph = Arc::new(
            SparseGraph::random_regular(n, degree, rng::derive_seed(seed, gi as u64))?
                .color_dsatur(),
        );
        let j: Vec<f64> = (0..graph.edge_count())
            .map(|e| ((e % 9) as f64 - 4.0) * 0.05)
            .collect();
        let h = vec![0.0; n];
        let model = Model::new(
            graph,
            j,
            h,
            crate::model::Precision::Float64,
            Representation::Bipolar,
        )
        .map_err(|e| DiagnosticsError::Dimension(e.to_string()))?;
        let mut chain = ChainState::new(&model, seed, 1.0);

        // Calibrate sweeps-per-repetition with a short timed run.
        let calib_sweeps = 4u64;
        let t0 = Instant::now();
        engine.run(&model, &mut chain, calib_sweeps, &mut Discard)?;
        let per_sweep = (t0.elapsed().as_secs_f64() / calib_sweeps as f64).max(1e-9);
        let sweeps = ((duration_per_rep.as_secs_f64() / per_sweep) as u64).max(1);

        let flips_before = chain.flip_attempts();
        let mut rates = Vec::with_capacity(repetitions);
        let mut elapsed = 0.0;
        for _ in 0..repetitions {
            let t0 = Instant::now();
            engine.run(&model, &mut chain, sweeps, &mut Discard)?;
            let dt = t0.elapsed().as_secs_f64();
            elapsed += dt;
            rates.push((n as u64 * sweeps) as f64 / dt / 1e9);
        }
        let attempted = chain.flip_attempts() - flips_before;
        let mean = rates.iter().sum::<f64>() / repetitions as f64;
        let stderr = if repetitions > 1 {
            let var = rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>()
                / (repetitions - 1) as f64;
            (var / repetitions as f64).sqrt()
        } else {
            0.0
        };
        reports.push(ThroughputReport {
            graph_size: n,
            engine: engine.kind,
            workers: engine.workers,
            attempted_flips: attempted,
            elapsed,
            flips_per_ns: mean,
            repetitions,
            stderr,
        });
    }
    Ok(reports)
}

/// Tab-separated throughput table.
pub fn write_throughput(
    path: impl AsRef<Path>,
    reports: &[ThroughputReport],
) -> Result<(), DiagnosticsError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(
        w,
        "graph_size\tengine\tworkers\tattempted_flips\telapsed_s\tflips_per_ns\trepetitions\tstderr"
    )?;
    for r in reports {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.graph_size,
            r.engine,
            r.workers,
            r.attempted_flips,
            r.elapsed,
            r.flips_per_ns,
            r.repetitions,
            r.stderr
        )?;
    }
    Ok(())
}

/// One CD-n arm of a mixing study.
#[derive(Debug, Clone)]
pub struct MixingRow {
    pub cd_sweeps: u64,
    /// Train accuracy per epoch.
    pub accuracy: Vec<f64>,
}

/// Train one model per CD-n value with identical seeds and
/// hyperparameters; only the sweep count differs. Reports the accuracy
/// trajectory per arm.
pub fn mixing_study(
    graph: Arc<SparseGraph>,
    roles: &RoleAssignment,
    train_set: &Dataset,
    base: &TrainConfig,
    cd_values: &[u64],
    epochs: u32,
    eval_sweeps: u64,
    precision: crate::model::Precision,
) -> Result<Vec<MixingRow>, DiagnosticsError> {
    let stats = train_set.stats();
    let label_stats = trainer::label_stats(train_set);
    let mut rows = Vec::with_capacity(cd_values.len());
    for &cd in cd_values {
        let model = trainer::init_model(
            graph.clone(),
            roles,
            &stats,
            &label_stats,
            precision,
            base.master_seed,
        )
        .map_err(|e| DiagnosticsError::Train(e.to_string()))?;
        let mut cfg = base.clone();
        cfg.epochs = epochs;
        cfg.sweeps_per_image = cd;
        cfg.negative_sweeps = None;
        let opts = TrainOptions {
            eval_train: Some(train_set),
            eval_sweeps,
            ..TrainOptions::default()
        };
        let (_, metrics) = trainer::train(model, roles, train_set, cfg, &opts, None)
            .map_err(|e: TrainError| DiagnosticsError::Train(e.to_string()))?;
        rows.push(MixingRow {
            cd_sweeps: cd,
            accuracy: metrics.iter().filter_map(|m| m.train_acc).collect(),
        });
    }
    Ok(rows)
}
