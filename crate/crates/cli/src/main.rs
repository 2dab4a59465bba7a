//! Command-line front end tying the sampler, trainer, tasks and
//! diagnostics together into reproducible experiments.

use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use simach_core::data::{Dataset, Split};
use simach_core::diagnostics;
use simach_core::graph::{assign_roles, RoleAssignment};
use simach_core::model::{Precision, Representation};
use simach_core::sampler::{AnnealSchedule, ChainState, Engine, EngineKind, SweepObserver};
use simach_core::tasks;
use simach_core::trainer::{self, TrainConfig, TrainOptions};
use simach_core::{rng, Model, SparseGraph};

#[derive(Parser)]
#[command(
    name = "simach",
    about = "Sparse probabilistic-bit machine: train, sample and benchmark \
             Boltzmann networks with graph-colored Gibbs sampling",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat key=value config file (training keys; flags override).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge-list graph file; a random regular graph is generated when
    /// omitted.
    #[arg(long)]
    graph: Option<PathBuf>,
    /// sequential | chromatic
    #[arg(long)]
    engine: Option<EngineKind>,
    /// Chromatic worker threads.
    #[arg(long, env = "SIMACH_WORKERS")]
    workers: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for metrics, checkpoints and images.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args)]
struct DataArgs {
    /// IDX image file (raw or gzip).
    #[arg(long)]
    images: PathBuf,
    /// IDX label file.
    #[arg(long)]
    labels: PathBuf,
    /// Binarization threshold.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
    /// Class-balanced subset size per class (full set when omitted).
    #[arg(long)]
    per_class: Option<usize>,
}

#[derive(Args)]
struct ModelArgs {
    /// Persisted model file.
    #[arg(long)]
    model: PathBuf,
    /// Role assignment file saved at training time.
    #[arg(long)]
    roles: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Train a sparse Boltzmann network with contrastive divergence.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Held-out IDX images for per-epoch test accuracy.
        #[arg(long)]
        test_images: Option<PathBuf>,
        #[arg(long)]
        test_labels: Option<PathBuf>,
        /// Nodes in the generated random graph.
        #[arg(long, default_value_t = 2000)]
        nodes: usize,
        /// Degree of the generated random graph.
        #[arg(long, default_value_t = 12)]
        degree: usize,
        /// One-hot label replicas.
        #[arg(long, default_value_t = 5)]
        replicas: usize,
        /// Weight precision: float64 or s{i}{f}.
        #[arg(long, default_value = "float64")]
        precision: Precision,
        /// Sweeps per image when evaluating accuracy.
        #[arg(long, default_value_t = 2000)]
        eval_sweeps: u64,
        /// Stop early at this train accuracy.
        #[arg(long)]
        stop_at: Option<f64>,
        /// Override a config key, e.g. --set epochs=5 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        sets: Vec<String>,
    },
    /// Classify images with a trained model and report accuracy.
    Classify {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 10_000)]
        sweeps: u64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
        /// Classify only the first N images.
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Generate class-conditioned images by annealing.
    Generate {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        /// Class to clamp; all classes when omitted.
        #[arg(long)]
        class: Option<usize>,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0.0)]
        beta_start: f64,
        #[arg(long, default_value_t = 5.0)]
        beta_end: f64,
        #[arg(long, default_value_t = 0.125)]
        beta_step: f64,
        #[arg(long, default_value_t = 100)]
        sweeps_per_step: u64,
        /// Square image side (pixels must be side²).
        #[arg(long, default_value_t = 28)]
        side: usize,
    },
    /// Complete partially clamped images.
    Complete {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelArgs,
        #[command(flatten)]
        data: DataArgs,
        /// Index of the image to complete.
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// Which half is clamped: left | right | top | bottom.
        #[arg(long, default_value = "top")]
        known: String,
        /// Clamp the true label too.
        #[arg(long, default_value_t = true)]
        clamp_label: bool,
        #[arg(long, default_value_t = 0.0)]
        beta_start: f64,
        #[arg(long, default_value_t = 5.0)]
        beta_end: f64,
        #[arg(long, default_value_t = 0.125)]
        beta_step: f64,
        #[arg(long, default_value_t = 100)]
        sweeps_per_step: u64,
        #[arg(long, default_value_t = 28)]
        side: usize,
    },
    /// Measure attempted-flip throughput across graph sizes.
    Bench {
        #[command(flatten)]
        common: Common,
        /// Comma-separated node counts.
        #[arg(long, default_value = "1000,2000,4000", value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 12)]
        degree: usize,
        #[arg(long, default_value_t = 200)]
        duration_ms: u64,
        #[arg(long, default_value_t = 5)]
        reps: usize,
    },
    /// Train one model per CD-n value and compare accuracy trajectories.
    Mix {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        data: DataArgs,
        /// Comma-separated CD sweep counts.
        #[arg(long, default_value = "100,1000", value_delimiter = ',')]
        cd: Vec<u64>,
        #[arg(long, default_value_t = 3)]
        epochs: u32,
        #[arg(long, default_value_t = 1000)]
        nodes: usize,
        #[arg(long, default_value_t = 12)]
        degree: usize,
        #[arg(long, default_value_t = 5)]
        replicas: usize,
        #[arg(long, default_value_t = 1000)]
        eval_sweeps: u64,
    },
    /// Check the sampler against exact enumeration on a small random model.
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10)]
        nodes: usize,
        #[arg(long, default_value_t = 4)]
        degree: usize,
        #[arg(long, default_value_t = 1_000_000)]
        sweeps: u64,
        #[arg(long, default_value_t = 0.02)]
        threshold: f64,
        #[arg(long, default_value_t = 1.0)]
        beta: f64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn load_dataset(args: &DataArgs, split: Split, seed: u64) -> Result<Dataset> {
    let ds = Dataset::load_idx(&args.images, &args.labels, split)
        .with_context(|| format!("loading {}", args.images.display()))?
        .binarize(args.threshold)?;
    Ok(match args.per_class {
        Some(k) => ds.subset(k, seed)?,
        None => ds,
    })
}

fn load_graph(common: &Common, nodes: usize, degree: usize, seed: u64) -> Result<Arc<SparseGraph>> {
    let g = match &common.graph {
        Some(path) => SparseGraph::load_edge_list(path)
            .with_context(|| format!("loading graph {}", path.display()))?,
        None => SparseGraph::random_regular(nodes, degree, seed)?,
    };
    Ok(Arc::new(g.color_dsatur()))
}

fn build_config(common: &Common, sets: &[String]) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(path) => TrainConfig::load(path)
            .with_context(|| format!("loading config {}", path.display()))?,
        None => TrainConfig::default(),
    };
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .with_context(|| format!("--set {s:?}: expected KEY=VALUE"))?;
        cfg.apply_kv(k.trim(), v.trim())?;
    }
    if let Some(engine) = common.engine {
        cfg.engine = engine;
    }
    if let Some(workers) = common.workers {
        cfg.workers = workers;
    }
    if let Some(seed) = common.seed {
        cfg.master_seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn load_model(args: &ModelArgs) -> Result<(Model, RoleAssignment)> {
    let model = Model::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let roles = RoleAssignment::load(&args.roles)
        .with_context(|| format!("loading roles {}", args.roles.display()))?;
    Ok((model, roles))
}

fn schedule(start: f64, end: f64, step: f64, sweeps: u64) -> Result<AnnealSchedule> {
    Ok(AnnealSchedule::new(start, end, step, sweeps)?)
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Train {
            common,
            data,
            test_images,
            test_labels,
            nodes,
            degree,
            replicas,
            precision,
            eval_sweeps,
            stop_at,
            sets,
        } => {
            let cfg = build_config(&common, &sets)?;
            std::fs::create_dir_all(&common.out)?;
            let train_set = load_dataset(&data, Split::Train, cfg.master_seed)?;
            let test_set = match (&test_images, &test_labels) {
                (Some(ip), Some(lp)) => Some(
                    Dataset::load_idx(ip, lp, Split::Test)?.binarize(data.threshold)?,
                ),
                (None, None) => None,
                _ => bail!("--test-images and --test-labels go together"),
            };

            let graph = load_graph(&common, nodes, degree, cfg.master_seed)?;
            let roles = assign_roles(
                &graph,
                train_set.pixels(),
                train_set.n_classes(),
                replicas,
                cfg.master_seed,
                true,
            )?;
            let model = trainer::init_model(
                graph.clone(),
                &roles,
                &train_set.stats(),
                &trainer::label_stats(&train_set),
                precision,
                cfg.master_seed,
            )?;

            // Persist the fully resolved, re-runnable configuration.
            let mut effective = cfg.to_kv_string();
            effective.push_str(&format!(
                "# resolved extras\n# precision={precision}\n# nodes={}\n# degree={degree}\n# replicas={replicas}\n",
                graph.node_count()
            ));
            std::fs::write(common.out.join("effective.config"), effective)?;
            roles.save(common.out.join("roles.txt"))?;
            graph.write_edge_list(common.out.join("graph.edges"))?;

            let opts = TrainOptions {
                eval_train: Some(&train_set),
                eval_test: test_set.as_ref(),
                eval_sweeps,
                checkpoint_dir: Some(common.out.clone()),
                stop_at_train_acc: stop_at,
            };
            let mut log = |m: &trainer::EpochMetrics, _: &Model| {
                println!(
                    "epoch {:4}  train {}  test {}  mean|dJ| {:.3e}  {:.0}s",
                    m.epoch,
                    m.train_acc.map_or("-".into(), |a| format!("{:.3}", a)),
                    m.test_acc.map_or("-".into(), |a| format!("{:.3}", a)),
                    m.mean_abs_dj,
                    m.wallclock_s
                );
            };
            let (model, metrics) =
                trainer::train(model, &roles, &train_set, cfg, &opts, Some(&mut log))?;
            model.save(common.out.join("model.pbm1"))?;
            trainer::write_metrics(common.out.join("metrics.csv"), &metrics)?;
            println!("wrote {}", common.out.join("model.pbm1").display());
            Ok(())
        }

        Command::Classify { common, model, data, sweeps, beta, limit } => {
            let (model, roles) = load_model(&model)?;
            let seed = common.seed.unwrap_or(0);
            let ds = load_dataset(&data, Split::Test, seed)?;
            let engine = Engine::new(
                common.engine.unwrap_or(EngineKind::Chromatic),
                common.workers.unwrap_or(1),
            );
            std::fs::create_dir_all(&common.out)?;
            let n = limit.unwrap_or(ds.len()).min(ds.len());
            let mut correct = 0usize;
            let mut lines = String::from("index,label,predicted\n");
            for i in 0..n {
                let bits: Vec<bool> = ds.image_bits(i).collect();
                let r = tasks::classify(
                    &model,
                    &roles,
                    &bits,
                    sweeps,
                    beta,
                    engine,
                    rng::derive_seed(seed, i as u64),
                )?;
                correct += (r.predicted == ds.label(i) as usize) as usize;
                lines.push_str(&format!("{i},{},{}\n", ds.label(i), r.predicted));
            }
            std::fs::write(common.out.join("predictions.csv"), lines)?;
            println!("accuracy {:.4} ({correct}/{n})", correct as f64 / n as f64);
            Ok(())
        }

        Command::Generate {
            common,
            model,
            class,
            count,
            beta_start,
            beta_end,
            beta_step,
            sweeps_per_step,
            side,
        } => {
            let (model, roles) = load_model(&model)?;
            if side * side != roles.visible_ids.len() {
                bail!("--side {side} does not match {} visible nodes", roles.visible_ids.len());
            }
            let sched = schedule(beta_start, beta_end, beta_step, sweeps_per_step)?;
            let engine = Engine::new(
                common.engine.unwrap_or(EngineKind::Chromatic),
                common.workers.unwrap_or(1),
            );
            let seed = common.seed.unwrap_or(0);
            std::fs::create_dir_all(&common.out)?;
            let classes: Vec<usize> = match class {
                Some(c) => vec![c],
                None => (0..roles.n_classes).collect(),
            };
            let mut tiles = Vec::new();
            for &c in &classes {
                for k in 0..count {
                    let g = tasks::generate(
                        &model,
                        &roles,
                        c,
                        &sched,
                        engine,
                        rng::derive_seed(seed, (c * count + k) as u64),
                    )?;
                    let path = common.out.join(format!("gen_c{c}_{k}.pgm"));
                    tasks::write_pgm(&path, side, side, &g.pixels, false)?;
                    println!(
                        "class {c} sample {k}: energy {:.2} -> {:.2}",
                        g.energy_start, g.energy_end
                    );
                    tiles.push(g.pixels);
                }
            }
            let (grid, w, h) = tasks::composite_grid(&tiles, side, side, count.max(1))?;
            tasks::write_pgm(common.out.join("grid.pgm"), w, h, &grid, false)?;
            println!("wrote {}", common.out.join("grid.pgm").display());
            Ok(())
        }

        Command::Complete {
            common,
            model,
            data,
            index,
            known,
            clamp_label,
            beta_start,
            beta_end,
            beta_step,
            sweeps_per_step,
            side,
        } => {
            let (model, roles) = load_model(&model)?;
            let seed = common.seed.unwrap_or(0);
            let ds = load_dataset(&data, Split::Test, seed)?;
            if index >= ds.len() {
                bail!("--index {index} out of range ({} images)", ds.len());
            }
            if side * side != roles.visible_ids.len() {
                bail!("--side {side} does not match {} visible nodes", roles.visible_ids.len());
            }
            let mask: Vec<bool> = (0..side * side)
                .map(|p| {
                    let (row, col) = (p / side, p % side);
                    match known.as_str() {
                        "left" => col < side / 2,
                        "right" => col >= side / 2,
                        "top" => row < side / 2,
                        "bottom" => row >= side / 2,
                        _ => false,
                    }
                })
                .collect();
            if !mask.iter().any(|&m| m) {
                bail!("--known must be one of left|right|top|bottom");
            }
            let bits: Vec<bool> = ds.image_bits(index).collect();
            let sched = schedule(beta_start, beta_end, beta_step, sweeps_per_step)?;
            let engine = Engine::new(
                common.engine.unwrap_or(EngineKind::Chromatic),
                common.workers.unwrap_or(1),
            );
            std::fs::create_dir_all(&common.out)?;
            let out = tasks::complete(
                &model,
                &roles,
                &bits,
                &mask,
                clamp_label.then_some(ds.label(index) as usize),
                &sched,
                engine,
                seed,
            )?;
            let path = common.out.join(format!("complete_{index}.pgm"));
            tasks::write_pgm(&path, side, side, &out.pixels, false)?;
            println!("wrote {}", path.display());
            Ok(())
        }

        Command::Bench { common, sizes, degree, duration_ms, reps } => {
            let engine = Engine::new(
                common.engine.unwrap_or(EngineKind::Chromatic),
                common.workers.unwrap_or(1),
            );
            let reports = diagnostics::throughput_bench(
                &sizes,
                degree,
                engine,
                Duration::from_millis(duration_ms),
                reps,
                common.seed.unwrap_or(0),
            )?;
            std::fs::create_dir_all(&common.out)?;
            diagnostics::write_throughput(common.out.join("throughput.tsv"), &reports)?;
            for r in &reports {
                println!(
                    "N={:6}  {:.4e} flips/ns  (±{:.1e}, {} reps, {} flips)",
                    r.graph_size, r.flips_per_ns, r.stderr, r.repetitions, r.attempted_flips
                );
            }
            Ok(())
        }

        Command::Mix { common, data, cd, epochs, nodes, degree, replicas, eval_sweeps } => {
            let cfg = build_config(&common, &[])?;
            let train_set = load_dataset(&data, Split::Train, cfg.master_seed)?;
            let graph = load_graph(&common, nodes, degree, cfg.master_seed)?;
            let roles = assign_roles(
                &graph,
                train_set.pixels(),
                train_set.n_classes(),
                replicas,
                cfg.master_seed,
                true,
            )?;
            let rows = diagnostics::mixing_study(
                graph,
                &roles,
                &train_set,
                &cfg,
                &cd,
                epochs,
                eval_sweeps,
                Precision::Float64,
            )?;
            std::fs::create_dir_all(&common.out)?;
            let mut table = String::from("cd_sweeps,epoch,train_acc\n");
            for row in &rows {
                for (e, acc) in row.accuracy.iter().enumerate() {
                    table.push_str(&format!("{},{},{acc}\n", row.cd_sweeps, e + 1));
                }
                println!(
                    "CD-{}: final accuracy {:.3}",
                    row.cd_sweeps,
                    row.accuracy.last().copied().unwrap_or(f64::NAN)
                );
            }
            std::fs::write(common.out.join("mixing.csv"), table)?;
            Ok(())
        }

        Command::Validate { common, nodes, degree, sweeps, threshold, beta } => {
            let seed = common.seed.unwrap_or(0);
            let graph = load_graph(&common, nodes, degree, seed)?;
            let n = graph.node_count();
            if n > 20 {
                bail!("validate needs <= 20 nodes for enumeration, got {n}");
            }
            use rand::Rng;
            let mut stream = rng::stream(rng::derive_seed(seed, 0xda7a));
            let j: Vec<f64> =
                (0..graph.edge_count()).map(|_| stream.gen_range(-1.5..1.5)).collect();
            let h: Vec<f64> = (0..n).map(|_| stream.gen_range(-1.0..1.0)).collect();
            let model =
                Model::new(graph, j, h, Precision::Float64, Representation::Bipolar)?;

            struct Hist(Vec<u64>);
            impl SweepObserver for Hist {
                fn observe(&mut self, _s: u64, states: &[i8]) {
                    self.0[diagnostics::state_index(states)] += 1;
                }
            }
            let engine = Engine::new(
                common.engine.unwrap_or(EngineKind::Sequential),
                common.workers.unwrap_or(1),
            );
            let mut chain = ChainState::new(&model, seed, beta);
            let mut hist = Hist(vec![0; 1 << n]);
            engine.run(&model, &mut chain, sweeps, &mut hist)?;
            let exact = diagnostics::enumerate_boltzmann(&model, beta)?;
            let tvd = diagnostics::tvd_counts(&hist.0, &exact)?;
            println!("TVD vs exact over {n} nodes after {sweeps} sweeps: {tvd:.5}");
            if tvd >= threshold {
                bail!("TVD {tvd:.5} >= threshold {threshold}");
            }
            Ok(())
        }
    }
}
