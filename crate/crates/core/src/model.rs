//! Couplings, biases, precision handling and model persistence.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::graph::SparseGraph;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("model file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("graph error: {0}")]
    Graph(#[from] crate::graph::GraphError),
    #[error("{0}")]
    Invalid(String),
}

/// Weight storage precision. Fixed mode is s{i}{f}: one sign bit, `int_bits`
/// integer bits and `frac_bits` fraction bits, saturating at the range edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    Float64,
    Fixed { int_bits: u8, frac_bits: u8 },
}

impl Precision {
    pub fn fixed(int_bits: u8, frac_bits: u8) -> Self {
        assert!(int_bits >= 1, "fixed precision needs at least one integer bit");
        Precision::Fixed { int_bits, frac_bits }
    }

    /// Largest representable magnitude: 2^i − 2^−f.
    pub fn max_value(&self) -> f64 {
        match *self {
            Precision::Float64 => f64::INFINITY,
            Precision::Fixed { int_bits, frac_bits } => {
                (1u64 << int_bits) as f64 - Self::step_of(frac_bits)
            }
        }
    }

    fn step_of(frac_bits: u8) -> f64 {
        1.0 / (1u64 << frac_bits) as f64
    }

    /// Round to the nearest representable value, ties to even multiple,
    /// saturating at ±(2^i − 2^−f). Identity in float64 mode.
    pub fn quantize(&self, x: f64) -> f64 {
        match *self {
            Precision::Float64 => x,
            Precision::Fixed { frac_bits, .. } => {
                let step = Self::step_of(frac_bits);
                let q = (x / step).round_ties_even() * step;
                q.clamp(-self.max_value(), self.max_value())
            }
        }
    }

    /// Saturate an already-representable value (fixed-point accumulator
    /// behavior); no rounding.
    pub fn saturate(&self, x: f64) -> f64 {
        match *self {
            Precision::Float64 => x,
            Precision::Fixed { .. } => x.clamp(-self.max_value(), self.max_value()),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            Precision::Float64 => write!(f, "float64"),
            Precision::Fixed { int_bits, frac_bits } => write!(f, "s{{{int_bits}}}{{{frac_bits}}}"),
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = String;

    /// Accepts "float64" or "s{i}{f}" (also "s6.3" shorthand).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("float64") || s.eq_ignore_ascii_case("f64") {
            return Ok(Precision::Float64);
        }
        let body = s
            .strip_prefix('s')
            .or_else(|| s.strip_prefix('S'))
            .ok_or_else(|| format!("invalid precision {s:?}"))?;
        let cleaned: String = body
            .chars()
            .map(|c| if c == '{' || c == '}' || c == '.' { ' ' } else { c })
            .collect();
        let parts: Vec<&str> = cleaned.split_whitespace().collect();
        if parts.len() != 2 {
            return Err(format!("invalid precision {s:?}"));
        }
        let i: u8 = parts[0].parse().map_err(|_| format!("invalid precision {s:?}"))?;
        let f: u8 = parts[1].parse().map_err(|_| format!("invalid precision {s:?}"))?;
        if i < 1 {
            return Err("fixed precision needs at least one integer bit".into());
        }
        Ok(Precision::Fixed { int_bits: i, frac_bits: f })
    }
}

/// State encoding of the nodes the model is sampled in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// States in {−1, +1}.
    Bipolar,
    /// States in {0, 1}.
    Binary,
}

/// A symmetric sparse Ising model over a shared graph. `j[e]` is the
/// coupling of edge `e` in `graph.edges()` order; `h[i]` the bias of node
/// `i`. Stored values are always representable in `precision`.
#[derive(Debug, Clone)]
pub struct Model {
    graph: Arc<SparseGraph>,
    j: Vec<f64>,
    h: Vec<f64>,
    /// Couplings duplicated in CSR adjacency order so the field gather
    /// reads weights contiguously; rebuilt on every weight push.
    j_csr: Vec<f64>,
    precision: Precision,
    representation: Representation,
}

impl Model {
    pub fn new(
        graph: Arc<SparseGraph>,
        j: Vec<f64>,
        h: Vec<f64>,
        precision: Precision,
        representation: Representation,
    ) -> Result<Self, ModelError> {
        if j.len() != graph.edge_count() {
            return Err(ModelError::Dimension(format!(
                "{} couplings for {} edges",
                j.len(),
                graph.edge_count()
            )));
        }
        if h.len() != graph.node_count() {
            return Err(ModelError::Dimension(format!(
                "{} biases for {} nodes",
                h.len(),
                graph.node_count()
            )));
        }
        let j: Vec<f64> = j.into_iter().map(|x| precision.quantize(x)).collect();
        let h = h.into_iter().map(|x| precision.quantize(x)).collect();
        let mut model =
            Self { graph, j, h, j_csr: Vec::new(), precision, representation };
        model.rebuild_csr();
        Ok(model)
    }

    pub fn zeros(graph: Arc<SparseGraph>, precision: Precision) -> Self {
        let j = vec![0.0; graph.edge_count()];
        let h = vec![0.0; graph.node_count()];
        let j_csr = vec![0.0; graph.edge_count() * 2];
        Self { graph, j, h, j_csr, precision, representation: Representation::Bipolar }
    }

    fn rebuild_csr(&mut self) {
        let (_, _, adj_edge) = self.graph.adjacency();
        self.j_csr.clear();
        self.j_csr.extend(adj_edge.iter().map(|&e| self.j[e as usize]));
    }

    pub fn graph(&self) -> &Arc<SparseGraph> {
        &self.graph
    }

    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    pub fn couplings(&self) -> &[f64] {
        &self.j
    }

    pub fn biases(&self) -> &[f64] {
        &self.h
    }

    pub fn precision(&self) -> Precision {
        self.precision
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    /// I_i = Σ_j J_ij m_j + h_i over the node's neighbors, saturated to the
    /// fixed-point range when in fixed mode (β is applied later, in full
    /// precision).
    #[inline]
    pub fn effective_field(&self, states: &[i8], node: u32) -> f64 {
        let (a, b) = self.graph.neighbor_range(node);
        let (_, adj, _) = self.graph.adjacency();
        let mut acc = self.h[node as usize];
        for (&nbr, &jw) in adj[a..b].iter().zip(&self.j_csr[a..b]) {
            acc += jw * states[nbr as usize] as f64;
        }
        self.precision.saturate(acc)
    }

    /// E = −(Σ_{i<j} J_ij m_i m_j + Σ h_i m_i)
    pub fn energy(&self, states: &[i8]) -> f64 {
        assert_eq!(states.len(), self.node_count(), "state dimension mismatch");
        let mut pair = 0.0;
        for (e, &(u, v)) in self.graph.edges().iter().enumerate() {
            pair += self.j[e] * (states[u as usize] as f64) * (states[v as usize] as f64);
        }
        let field: f64 = self
            .h
            .iter()
            .zip(states)
            .map(|(&h, &m)| h * m as f64)
            .sum();
        -(pair + field)
    }

    /// Scale relating the energy formula to the Boltzmann exponent of the
    /// stationary distribution. Binary states halve every formula term
    /// under the bipolar→binary map while the p-bit activation is
    /// unchanged, so the chain samples exp(−2βE) in that representation.
    pub fn distribution_energy_scale(&self) -> f64 {
        match self.representation {
            Representation::Bipolar => 1.0,
            Representation::Binary => 2.0,
        }
    }

    /// Bipolar→binary conversion: J' = 2J, h'_i = h_i − Σ_j J_ij. The
    /// resulting model, sampled over {0,1} states, realizes the identical
    /// distribution up to an additive energy constant.
    pub fn to_binary_model(&self) -> Result<Model, ModelError> {
        if self.representation != Representation::Bipolar {
            return Err(ModelError::Invalid("model is already binary".into()));
        }
        let j: Vec<f64> = self.j.iter().map(|&x| 2.0 * x).collect();
        let mut h = self.h.clone();
        for (e, &(u, v)) in self.graph.edges().iter().enumerate() {
            h[u as usize] -= self.j[e];
            h[v as usize] -= self.j[e];
        }
        Model::new(
            Arc::clone(&self.graph),
            j,
            h,
            self.precision,
            Representation::Binary,
        )
    }

    /// Replace weights from float64 masters, quantizing per the model's
    /// precision (the trainer's push path).
    pub fn set_weights(&mut self, j: &[f64], h: &[f64]) -> Result<(), ModelError> {
        if j.len() != self.j.len() || h.len() != self.h.len() {
            return Err(ModelError::Dimension("weight push size mismatch".into()));
        }
        for (dst, &src) in self.j.iter_mut().zip(j) {
            *dst = self.precision.quantize(src);
        }
        for (dst, &src) in self.h.iter_mut().zip(h) {
            *dst = self.precision.quantize(src);
        }
        self.rebuild_csr();
        Ok(())
    }

    /// Text persistence:
    /// `PBM1 <node_count> <edge_count> <mode> <int_bits> <frac_bits>`,
    /// edge lines `u v J_uv`, then bias lines `u h_u`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let (mode, ib, fb) = match self.precision {
            Precision::Float64 => ("float64", 0, 0),
            Precision::Fixed { int_bits, frac_bits } => ("fixed", int_bits, frac_bits),
        };
        writeln!(
            out,
            "PBM1 {} {} {} {} {}",
            self.node_count(),
            self.graph.edge_count(),
            mode,
            ib,
            fb
        )?;
        for (e, &(u, v)) in self.graph.edges().iter().enumerate() {
            writeln!(out, "{u} {v} {}", self.j[e])?;
        }
        for (i, &h) in self.h.iter().enumerate() {
            writeln!(out, "{i} {h}")?;
        }
        Ok(())
    }

    /// Load a persisted model. The graph is rebuilt from the edge lines and
    /// DSatur-colored so the result is immediately samplable.
    pub fn load(path: impl AsRef<Path>) -> Result<Model, ModelError> {
        let file = std::fs::File::open(path)?;
        let mut lines = BufReader::new(file).lines().enumerate();
        let perr = |line: usize, msg: &str| ModelError::Parse { line: line + 1, msg: msg.into() };

        let (hline, header) = lines
            .next()
            .ok_or_else(|| perr(0, "empty file"))
            .and_then(|(i, l)| Ok((i, l?)))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 6 || toks[0] != "PBM1" {
            return Err(perr(hline, "expected PBM1 header"));
        }
        let node_count: usize = toks[1].parse().map_err(|_| perr(hline, "bad node count"))?;
        let edge_count: usize = toks[2].parse().map_err(|_| perr(hline, "bad edge count"))?;
        let precision = match toks[3] {
            "float64" => Precision::Float64,
            "fixed" => Precision::Fixed {
                int_bits: toks[4].parse().map_err(|_| perr(hline, "bad int_bits"))?,
                frac_bits: toks[5].parse().map_err(|_| perr(hline, "bad frac_bits"))?,
            },
            other => return Err(perr(hline, &format!("unknown mode {other:?}"))),
        };

        let mut edges = Vec::with_capacity(edge_count);
        let mut j = Vec::with_capacity(edge_count);
        for _ in 0..edge_count {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| perr(hline, "truncated edge section"))
                .and_then(|(i, l)| Ok((i, l?)))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 3 {
                return Err(perr(lineno, "expected 'u v J'"));
            }
            let u: u32 = t[0].parse().map_err(|_| perr(lineno, "bad node id"))?;
            let v: u32 = t[1].parse().map_err(|_| perr(lineno, "bad node id"))?;
            let w: f64 = t[2].parse().map_err(|_| perr(lineno, "bad coupling"))?;
            edges.push((u, v));
            j.push(w);
        }
        let mut h = vec![0.0; node_count];
        for _ in 0..node_count {
            let (lineno, line) = lines
                .next()
                .ok_or_else(|| perr(hline, "truncated bias section"))
                .and_then(|(i, l)| Ok((i, l?)))?;
            let t: Vec<&str> = line.split_whitespace().collect();
            if t.len() != 2 {
                return Err(perr(lineno, "expected 'u h'"));
            }
            let u: usize = t[0].parse().map_err(|_| perr(lineno, "bad node id"))?;
            if u >= node_count {
                return Err(perr(lineno, "bias node id out of range"));
            }
            h[u] = t[1].parse().map_err(|_| perr(lineno, "bad bias"))?;
        }

        // Model edge order must match graph edge order; from_edges sorts, so
        // sort couplings along with their pairs.
        let mut paired: Vec<((u32, u32), f64)> = edges
            .iter()
            .map(|&(u, v)| (u.min(v), u.max(v)))
            .zip(j)
            .collect();
        paired.sort_unstable_by_key(|&(e, _)| e);
        let (edges, j): (Vec<(u32, u32)>, Vec<f64>) = paired.into_iter().unzip();

        let graph = SparseGraph::from_edges(node_count, edges)?.color_dsatur();
        Model::new(Arc::new(graph), j, h, precision, Representation::Bipolar)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_spin(j: f64) -> Model {
        let g = Arc::new(SparseGraph::from_edges(2, vec![(0, 1)]).unwrap());
        Model::new(g, vec![j], vec![0.0, 0.0], Precision::Float64, Representation::Bipolar)
            .unwrap()
    }

    #[test]
    fn quantize_examples() {
        let p = Precision::fixed(6, 3);
        assert_eq!(p.quantize(0.003), 0.0);
        assert_eq!(p.quantize(100.0), 63.875);
        assert_eq!(p.quantize(-100.0), -63.875);
        // 0.0625 is exactly between 0 and 0.125; ties go to the even multiple.
        assert_eq!(p.quantize(0.0625), 0.0);
        assert_eq!(p.quantize(0.1875), 0.25);
        assert_eq!(Precision::Float64.quantize(0.12345), 0.12345);
    }

    #[test]
    fn energy_examples() {
        let m = two_spin(1.0);
        assert_eq!(m.energy(&[1, 1]), -1.0);
        assert_eq!(m.energy(&[1, -1]), 1.0);
        let zero = Model::zeros(Arc::clone(m.graph()), Precision::Float64);
        assert_eq!(zero.energy(&[1, -1]), 0.0);
        assert_eq!(zero.energy(&[-1, -1]), 0.0);
    }

    #[test]
    fn effective_field_examples() {
        let g = Arc::new(SparseGraph::from_edges(2, vec![(0, 1)]).unwrap());
        let m = Model::new(
            g,
            vec![0.5],
            vec![0.25, 0.0],
            Precision::Float64,
            Representation::Bipolar,
        )
        .unwrap();
        assert_eq!(m.effective_field(&[1, 1], 0), 0.75);

        // Isolated node keeps only its bias.
        let g = Arc::new(SparseGraph::from_edges(2, vec![(0, 1)]).unwrap());
        let m = Model::new(
            g,
            vec![0.0],
            vec![0.0, -1.0],
            Precision::Float64,
            Representation::Bipolar,
        )
        .unwrap();
        assert_eq!(m.effective_field(&[1, 1], 1), -1.0);

        // Star with 3 leaves, J = {1, 1, −1}, leaf states {+1, −1, +1}.
        let g = Arc::new(SparseGraph::from_edges(4, vec![(0, 1), (0, 2), (0, 3)]).unwrap());
        let m = Model::new(
            g,
            vec![1.0, 1.0, -1.0],
            vec![0.0; 4],
            Precision::Float64,
            Representation::Bipolar,
        )
        .unwrap();
        assert_eq!(m.effective_field(&[0, 1, -1, 1], 0), -1.0);
    }

    #[test]
    fn binary_conversion_formulas() {
        let m = two_spin(1.0);
        let b = m.to_binary_model().unwrap();
        assert_eq!(b.couplings(), &[2.0]);
        assert_eq!(b.biases(), &[-1.0, -1.0]);
        assert_eq!(b.representation(), Representation::Binary);

        // No couplings: biases pass through.
        let g = Arc::new(SparseGraph::from_edges(2, vec![(0, 1)]).unwrap());
        let m = Model::new(
            g,
            vec![0.0],
            vec![0.7, -0.3],
            Precision::Float64,
            Representation::Bipolar,
        )
        .unwrap();
        let b = m.to_binary_model().unwrap();
        assert_eq!(b.biases(), &[0.7, -0.3]);
    }

    #[test]
    fn field_saturates_in_fixed_mode() {
        let g = Arc::new(SparseGraph::from_edges(2, vec![(0, 1)]).unwrap());
        let m = Model::new(
            g,
            vec![3.0],
            vec![3.5, 0.0],
            Precision::fixed(2, 1),
            Representation::Bipolar,
        )
        .unwrap();
        // 3 + 3.5 = 6.5 saturates to 2^2 − 2^−1 = 3.5.
        assert_eq!(m.effective_field(&[1, 1], 0), 3.5);
    }

    #[test]
    fn persistence_round_trip() {
        let g = Arc::new(
            SparseGraph::from_edges(3, vec![(0, 1), (1, 2)]).unwrap().color_dsatur(),
        );
        let m = Model::new(
            g,
            vec![0.375, -1.25],
            vec![0.5, -0.125, 0.0],
            Precision::fixed(6, 3),
            Representation::Bipolar,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.pbm");
        m.save(&path).unwrap();
        let loaded = Model::load(&path).unwrap();
        assert_eq!(loaded.node_count(), 3);
        assert_eq!(loaded.couplings(), m.couplings());
        assert_eq!(loaded.biases(), m.biases());
        assert_eq!(loaded.precision(), m.precision());
        assert!(loaded.graph().coloring().is_some());
    }

    #[test]
    fn precision_parse() {
        assert_eq!("s{6}{3}".parse::<Precision>().unwrap(), Precision::fixed(6, 3));
        assert_eq!("s6.3".parse::<Precision>().unwrap(), Precision::fixed(6, 3));
        assert_eq!("float64".parse::<Precision>().unwrap(), Precision::Float64);
        assert!("nope".parse::<Precision>().is_err());
    }
}
