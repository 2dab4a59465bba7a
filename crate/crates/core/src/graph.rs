//! Sparse network topology: construction, ingestion, DSatur coloring and
//! visible/label/hidden role assignment.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use thiserror::Error;

use crate::rng;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("line {line}: self-loop {node} {node}")]
    SelfLoop { line: usize, node: u32 },
    #[error("edge list is empty")]
    Empty,
    #[error("infeasible parameters: {0}")]
    Infeasible(String),
    #[error("insufficient nodes: need {needed}, graph has {available}")]
    InsufficientNodes { needed: usize, available: usize },
    #[error("degenerate graph: node count {0} < 2")]
    Degenerate(usize),
    #[error("invalid graph: {0}")]
    Invalid(String),
    #[error("graph is not colored")]
    Uncolored,
}

/// Immutable adjacency structure. Edges are stored once per unordered pair
/// `(u, v)` with `u < v`; the CSR adjacency carries the owning edge index so
/// per-edge couplings can be looked up during a sweep.
#[derive(Debug, Clone)]
pub struct SparseGraph {
    node_count: usize,
    edges: Vec<(u32, u32)>,
    adj_offsets: Vec<u32>,
    adj: Vec<u32>,
    adj_edge: Vec<u32>,
    coloring: Option<Coloring>,
}

#[derive(Debug, Clone)]
pub struct Coloring {
    pub colors: Vec<u16>,
    /// One node-id group per color, ascending ids within a group.
    pub schedule: Vec<Vec<u32>>,
}

impl SparseGraph {
    /// Build from a deduplicated unordered edge set. Validates the type
    /// invariants (no self-loops, no duplicates, ids in range).
    pub fn from_edges(node_count: usize, edges: Vec<(u32, u32)>) -> Result<Self, GraphError> {
        if node_count == 0 {
            return Err(GraphError::Invalid("node count must be positive".into()));
        }
        let mut norm: Vec<(u32, u32)> = Vec::with_capacity(edges.len());
        for (u, v) in edges {
            if u == v {
                return Err(GraphError::Invalid(format!("self-loop at node {u}")));
            }
            if u as usize >= node_count || v as usize >= node_count {
                return Err(GraphError::Invalid(format!(
                    "edge ({u},{v}) out of range for {node_count} nodes"
                )));
            }
            norm.push((u.min(v), u.max(v)));
        }
        norm.sort_unstable();
        let before = norm.len();
        norm.dedup();
        if norm.len() != before {
            return Err(GraphError::Invalid("duplicate edge".into()));
        }

        let mut degree = vec![0u32; node_count];
        for &(u, v) in &norm {
            degree[u as usize] += 1;
            degree[v as usize] += 1;
        }
        let mut adj_offsets = vec![0u32; node_count + 1];
        for i in 0..node_count {
            adj_offsets[i + 1] = adj_offsets[i] + degree[i];
        }
        let mut adj = vec![0u32; norm.len() * 2];
        let mut adj_edge = vec![0u32; norm.len() * 2];
        let mut cursor: Vec<u32> = adj_offsets[..node_count].to_vec();
        for (e, &(u, v)) in norm.iter().enumerate() {
            adj[cursor[u as usize] as usize] = v;
            adj_edge[cursor[u as usize] as usize] = e as u32;
            cursor[u as usize] += 1;
            adj[cursor[v as usize] as usize] = u;
            adj_edge[cursor[v as usize] as usize] = e as u32;
            cursor[v as usize] += 1;
        }
        // Neighbor lists come out ascending because edges were sorted.
        Ok(Self {
            node_count,
            edges: norm,
            adj_offsets,
            adj,
            adj_edge,
            coloring: None,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn neighbors(&self, node: u32) -> &[u32] {
        let (a, b) = self.range(node);
        &self.adj[a..b]
    }

    /// Neighbor ids paired with the index of the joining edge.
    pub fn neighbor_edges(&self, node: u32) -> impl Iterator<Item = (u32, u32)> + '_ {
        let (a, b) = self.range(node);
        self.adj[a..b].iter().copied().zip(self.adj_edge[a..b].iter().copied())
    }

    /// CSR row bounds of a node's adjacency, for cache-building callers
    /// that want slice access instead of the iterator.
    pub fn neighbor_range(&self, node: u32) -> (usize, usize) {
        self.range(node)
    }

    /// Raw CSR arrays: (offsets, neighbor ids, edge ids), neighbor and
    /// edge arrays aligned.
    pub fn adjacency(&self) -> (&[u32], &[u32], &[u32]) {
        (&self.adj_offsets, &self.adj, &self.adj_edge)
    }

    fn range(&self, node: u32) -> (usize, usize) {
        (
            self.adj_offsets[node as usize] as usize,
            self.adj_offsets[node as usize + 1] as usize,
        )
    }

    pub fn degree(&self, node: u32) -> usize {
        let (a, b) = self.range(node);
        b - a
    }

    pub fn max_degree(&self) -> usize {
        (0..self.node_count as u32).map(|n| self.degree(n)).max().unwrap_or(0)
    }

    pub fn coloring(&self) -> Option<&Coloring> {
        self.coloring.as_ref()
    }

    pub fn color_schedule(&self) -> Result<&[Vec<u32>], GraphError> {
        self.coloring
            .as_ref()
            .map(|c| c.schedule.as_slice())
            .ok_or(GraphError::Uncolored)
    }

    pub fn color_count(&self) -> usize {
        self.coloring.as_ref().map(|c| c.schedule.len()).unwrap_or(0)
    }

    /// Parse a whitespace-separated "u v" edge list. Lines starting with '#'
    /// are comments; reversed duplicates merge into one undirected edge.
    pub fn load_edge_list(path: impl AsRef<Path>) -> Result<Self, GraphError> {
        let file = std::fs::File::open(path)?;
        Self::parse_edge_list(BufReader::new(file))
    }

    pub fn parse_edge_list(reader: impl BufRead) -> Result<Self, GraphError> {
        let mut seen: HashSet<(u32, u32)> = HashSet::new();
        let mut edges = Vec::new();
        let mut max_id: u32 = 0;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let lineno = idx + 1;
            let body = line.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let mut parts = body.split_whitespace();
            let parse = |tok: Option<&str>| -> Result<u32, GraphError> {
                let tok = tok.ok_or(GraphError::Parse {
                    line: lineno,
                    msg: "expected two node ids".into(),
                })?;
                tok.parse::<u32>().map_err(|_| GraphError::Parse {
                    line: lineno,
                    msg: format!("invalid node id {tok:?}"),
                })
            };
            let u = parse(parts.next())?;
            let v = parse(parts.next())?;
            if parts.next().is_some() {
                return Err(GraphError::Parse {
                    line: lineno,
                    msg: "trailing tokens after edge".into(),
                });
            }
            if u == v {
                return Err(GraphError::SelfLoop { line: lineno, node: u });
            }
            max_id = max_id.max(u).max(v);
            if seen.insert((u.min(v), u.max(v))) {
                edges.push((u, v));
            }
        }
        if edges.is_empty() {
            return Err(GraphError::Empty);
        }
        Self::from_edges(max_id as usize + 1, edges)
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for &(u, v) in &self.edges {
            writeln!(out, "{u} {v}")?;
        }
        Ok(())
    }

    /// Square lattice without wraparound.
    pub fn grid2d(rows: usize, cols: usize) -> Result<Self, GraphError> {
        if rows == 0 || cols == 0 {
            return Err(GraphError::Infeasible("grid dimensions must be positive".into()));
        }
        let id = |r: usize, c: usize| (r * cols + c) as u32;
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                if c + 1 < cols {
                    edges.push((id(r, c), id(r, c + 1)));
                }
                if r + 1 < rows {
                    edges.push((id(r, c), id(r + 1, c)));
                }
            }
        }
        Self::from_edges(rows * cols, edges)
    }

    /// All visible-hidden pairs, no intralayer edges. Nodes `0..n_visible`
    /// form one layer, the rest the other.
    pub fn bipartite_full(n_visible: usize, n_hidden: usize) -> Result<Self, GraphError> {
        if n_visible == 0 || n_hidden == 0 {
            return Err(GraphError::Infeasible("both layers must be non-empty".into()));
        }
        let mut edges = Vec::with_capacity(n_visible * n_hidden);
        for i in 0..n_visible as u32 {
            for j in 0..n_hidden as u32 {
                edges.push((i, n_visible as u32 + j));
            }
        }
        Self::from_edges(n_visible + n_hidden, edges)
    }

    /// Random d-regular graph: a circulant backbone randomized by seeded
    /// degree-preserving double-edge swaps. Deterministic given the seed.
    pub fn random_regular(n: usize, d: usize, seed: u64) -> Result<Self, GraphError> {
        if d == 0 || n == 0 || (n * d) % 2 != 0 || d >= n {
            return Err(GraphError::Infeasible(format!(
                "cannot build a {d}-regular graph on {n} nodes"
            )));
        }
        if d % 2 == 1 && n % 2 == 1 {
            return Err(GraphError::Infeasible("n*d must be even".into()));
        }
        let mut set: HashSet<(u32, u32)> = HashSet::new();
        let key = |a: u32, b: u32| (a.min(b), a.max(b));
        for i in 0..n as u32 {
            for k in 1..=(d / 2) as u32 {
                set.insert(key(i, (i + k) % n as u32));
            }
        }
        if d % 2 == 1 {
            let half = (n / 2) as u32;
            for i in 0..half {
                set.insert(key(i, i + half));
            }
        }
        let mut edges: Vec<(u32, u32)> = set.iter().copied().collect();
        edges.sort_unstable();

        let mut rng = rng::stream(rng::derive_seed(seed, 0x5247)); // "RG"
        let m = edges.len();
        let mut swaps_done = 0usize;
        let target = m * 10;
        let mut attempts = 0usize;
        while swaps_done < target && attempts < target * 20 {
            attempts += 1;
            let a = rng.gen_range(0..m);
            let b = rng.gen_range(0..m);
            if a == b {
                continue;
            }
            let (u, v) = edges[a];
            let (x, y) = edges[b];
            // Swap to (u,x),(v,y); all four endpoints must be distinct.
            if u == x || u == y || v == x || v == y {
                continue;
            }
            let e1 = key(u, x);
            let e2 = key(v, y);
            if set.contains(&e1) || set.contains(&e2) {
                continue;
            }
            set.remove(&key(u, v));
            set.remove(&key(x, y));
            set.insert(e1);
            set.insert(e2);
            edges[a] = e1;
            edges[b] = e2;
            swaps_done += 1;
        }
        Self::from_edges(n, edges)
    }

    /// DSatur greedy coloring. Ties on saturation break toward higher
    /// degree, then lower node id, so the result is reproducible.
    pub fn color_dsatur(mut self) -> Self {
        let n = self.node_count;
        let max_colors = self.max_degree() + 1;
        let mut color: Vec<Option<u16>> = vec![None; n];
        // Per-node bitmask of neighbor colors; saturation is the popcount.
        let words = max_colors.div_ceil(64);
        let mut neighbor_colors = vec![0u64; n * words];
        let mut saturation = vec![0u32; n];

        for _ in 0..n {
            let mut best: Option<u32> = None;
            for v in 0..n as u32 {
                if color[v as usize].is_some() {
                    continue;
                }
                best = Some(match best {
                    None => v,
                    Some(b) => {
                        let (sv, sb) = (saturation[v as usize], saturation[b as usize]);
                        let (dv, db) = (self.degree(v), self.degree(b));
                        if (sv, dv, std::cmp::Reverse(v)) > (sb, db, std::cmp::Reverse(b)) {
                            v
                        } else {
                            b
                        }
                    }
                });
            }
            let v = best.unwrap() as usize;
            let mask = &neighbor_colors[v * words..(v + 1) * words];
            let mut c = 0usize;
            while mask[c / 64] >> (c % 64) & 1 == 1 {
                c += 1;
            }
            color[v] = Some(c as u16);
            for &w in self.neighbors(v as u32) {
                let w = w as usize;
                let bit = &mut neighbor_colors[w * words + c / 64];
                if *bit >> (c % 64) & 1 == 0 {
                    *bit |= 1 << (c % 64);
                    saturation[w] += 1;
                }
            }
        }

        let colors: Vec<u16> = color.into_iter().map(Option::unwrap).collect();
        let n_colors = colors.iter().copied().max().map(|c| c as usize + 1).unwrap_or(0);
        let mut schedule: Vec<Vec<u32>> = vec![Vec::new(); n_colors];
        for (v, &c) in colors.iter().enumerate() {
            schedule[c as usize].push(v as u32);
        }
        self.coloring = Some(Coloring { colors, schedule });
        self
    }

    /// ρ = 2|E| / (|V|² − |V|)
    pub fn density(&self) -> Result<f64, GraphError> {
        if self.node_count < 2 {
            return Err(GraphError::Degenerate(self.node_count));
        }
        let v = self.node_count as f64;
        Ok(2.0 * self.edge_count() as f64 / (v * v - v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Visible,
    Label,
    Hidden,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Role::Visible => write!(f, "visible"),
            Role::Label => write!(f, "label"),
            Role::Hidden => write!(f, "hidden"),
        }
    }
}

/// Placement of pixels, label replicas and hidden units on graph nodes.
/// `label_ids` is replica-major: the node for (replica r, class c) sits at
/// index `r * n_classes + c`.
#[derive(Debug, Clone)]
pub struct RoleAssignment {
    pub visible_ids: Vec<u32>,
    pub label_ids: Vec<u32>,
    pub hidden_ids: Vec<u32>,
    pub n_classes: usize,
    pub n_replicas: usize,
    pub permutation_seed: u64,
}

impl RoleAssignment {
    pub fn label_node(&self, replica: usize, class: usize) -> u32 {
        self.label_ids[replica * self.n_classes + class]
    }

    pub fn n_visible(&self) -> usize {
        self.visible_ids.len()
    }

    pub fn role_of(&self, node: u32) -> Role {
        if self.visible_ids.contains(&node) {
            Role::Visible
        } else if self.label_ids.contains(&node) {
            Role::Label
        } else {
            Role::Hidden
        }
    }

    /// Order-preserving persistence (pixel order of visible ids matters).
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(
            out,
            "ROLES1 {} {} {}",
            self.n_classes, self.n_replicas, self.permutation_seed
        )?;
        for (tag, ids) in [
            ("visible", &self.visible_ids),
            ("label", &self.label_ids),
            ("hidden", &self.hidden_ids),
        ] {
            let list: Vec<String> = ids.iter().map(|i| i.to_string()).collect();
            writeln!(out, "{tag} {}", list.join(" "))?;
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<RoleAssignment, GraphError> {
        let text = std::fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, msg: &str| GraphError::Parse {
            line: line + 1,
            msg: msg.to_string(),
        };
        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "empty role file"))?;
        let toks: Vec<&str> = header.split_whitespace().collect();
        if toks.len() != 4 || toks[0] != "ROLES1" {
            return Err(parse_err(hl, "expected ROLES1 header"));
        }
        let n_classes = toks[1].parse().map_err(|_| parse_err(hl, "bad class count"))?;
        let n_replicas = toks[2].parse().map_err(|_| parse_err(hl, "bad replica count"))?;
        let permutation_seed =
            toks[3].parse().map_err(|_| parse_err(hl, "bad seed"))?;
        let mut sections: [Option<Vec<u32>>; 3] = [None, None, None];
        for (ln, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let tag = toks.next().unwrap();
            let slot = match tag {
                "visible" => 0,
                "label" => 1,
                "hidden" => 2,
                other => return Err(parse_err(ln, &format!("unknown section {other:?}"))),
            };
            let ids: Result<Vec<u32>, _> = toks.map(|t| t.parse()).collect();
            sections[slot] = Some(ids.map_err(|_| parse_err(ln, "bad node id"))?);
        }
        let [visible, label, hidden] = sections;
        let missing = |what: &str| parse_err(0, &format!("missing {what} section"));
        let label_ids = label.ok_or_else(|| missing("label"))?;
        if label_ids.len() != n_classes * n_replicas {
            return Err(parse_err(0, "label id count != classes × replicas"));
        }
        Ok(RoleAssignment {
            visible_ids: visible.ok_or_else(|| missing("visible"))?,
            label_ids,
            hidden_ids: hidden.ok_or_else(|| missing("hidden"))?,
            n_classes,
            n_replicas,
            permutation_seed,
        })
    }

    /// "node_id role" audit dump.
    pub fn write_role_file(&self, path: impl AsRef<Path>) -> Result<(), GraphError> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let total = self.visible_ids.len() + self.label_ids.len() + self.hidden_ids.len();
        let mut roles: Vec<Role> = vec![Role::Hidden; total];
        for &v in &self.visible_ids {
            roles[v as usize] = Role::Visible;
        }
        for &l in &self.label_ids {
            roles[l as usize] = Role::Label;
        }
        for (node, role) in roles.iter().enumerate() {
            writeln!(out, "{node} {role}")?;
        }
        Ok(())
    }
}

/// Distribute roles over the graph, either serially (ids in order) or via a
/// seeded uniform permutation of all node ids.
pub fn assign_roles(
    g: &SparseGraph,
    n_visible: usize,
    n_classes: usize,
    n_replicas: usize,
    permutation_seed: u64,
    randomize: bool,
) -> Result<RoleAssignment, GraphError> {
    let n_labels = n_classes * n_replicas;
    let needed = n_visible + n_labels;
    if needed > g.node_count() {
        return Err(GraphError::InsufficientNodes {
            needed,
            available: g.node_count(),
        });
    }
    let mut ids: Vec<u32> = (0..g.node_count() as u32).collect();
    if randomize {
        let mut rng = rng::stream(rng::derive_seed(permutation_seed, 0x524f4c45)); // "ROLE"
        ids.shuffle(&mut rng);
    }
    let visible_ids = ids[..n_visible].to_vec();
    let label_ids = ids[n_visible..needed].to_vec();
    let hidden_ids = ids[needed..].to_vec();
    Ok(RoleAssignment {
        visible_ids,
        label_ids,
        hidden_ids,
        n_classes,
        n_replicas,
        permutation_seed,
    })
}
