//! Sparse probabilistic-bit machine: graph-colored Gibbs sampling for
//! training, sampling, and evaluating deep Boltzmann networks on sparse
//! graphs.

pub mod data;
pub mod diagnostics;
pub mod graph;
pub mod model;
pub mod rng;
pub mod sampler;
pub mod tasks;
pub mod trainer;

pub use data::Dataset;
pub use graph::{Role, RoleAssignment, SparseGraph};
pub use model::{Model, Precision, Representation};
pub use sampler::{AnnealSchedule, ChainState, Engine, EngineKind, SampleBlock, SweepObserver};
pub use trainer::{TrainConfig, Trainer};
