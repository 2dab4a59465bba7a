//! Shared helpers for the criterion benchmarks.

use std::sync::Arc;

use simach_core::model::{Precision, Representation};
use simach_core::{Model, SparseGraph};

/// Random regular graph with mildly structured couplings, colored and
/// ready to sample.
pub fn bench_model(nodes: usize, degree: usize, seed: u64) -> Model {
    let g = Arc::new(SparseGraph::random_regular(nodes, degree, seed).unwrap().color_dsatur());
    let j: Vec<f64> = (0..g.edge_count()).map(|e| ((e % 9) as f64 - 4.0) * 0.05).collect();
    let h: Vec<f64> = (0..nodes).map(|i| ((i % 5) as f64 - 2.0) * 0.02).collect();
    Model::new(g, j, h, Precision::Float64, Representation::Bipolar).unwrap()
}
