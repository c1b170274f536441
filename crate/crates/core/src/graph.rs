//! Unit-weight Max-Cut instances on Erdős–Rényi graphs.
//!
//! Basis-state convention used throughout the crate: vertex `i` corresponds
//! to bit `i` of the computational-basis index (vertex 0 is the least
//! significant bit). Bit value 0 maps to label `+1`, bit value 1 to `-1`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::SeedStream;

/// Largest vertex count the exhaustive routines and the statevector engine accept.
pub const MAX_NODES: usize = 24;

/// Number of times an empty edge sample is redrawn (with `seed + k`) before giving up.
pub const EMPTY_GRAPH_RETRIES: u64 = 64;

/// Undirected graph with unit edge weights.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr")]
pub struct Graph {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl Graph {
    /// Builds a graph from an edge list. Pairs may be given in either
    /// orientation; they are normalized to `i < j` and sorted.
    pub fn new(n_nodes: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::invalid("graph needs at least one vertex"));
        }
        let mut normalized = Vec::new();
        for (a, b) in edges {
            if a == b {
                return Err(Error::invalid(format!("self-loop on vertex {a}")));
            }
            let (i, j) = if a < b { (a, b) } else { (b, a) };
            if j >= n_nodes {
                return Err(Error::invalid(format!(
                    "edge ({a}, {b}) out of range for {n_nodes} vertices"
                )));
            }
            normalized.push((i, j));
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid(format!("duplicate edge {:?}", w[0])));
        }
        Ok(Self {
            n_nodes,
            edges: normalized,
        })
    }

    pub fn complete(n: usize) -> Result<Self> {
        let edges = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j)));
        Self::new(n, edges)
    }

    pub fn path(n: usize) -> Result<Self> {
        Self::new(n, (1..n).map(|j| (j - 1, j)))
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Edge weight; fixed at one for every edge.
    pub fn weight(&self) -> f64 {
        1.0
    }

    /// Serializes as `"n m"` followed by one `"i j"` line per edge.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.n_nodes, self.edges.len());
        for &(i, j) in &self.edges {
            writeln!(out, "{i} {j}").unwrap();
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::invalid("empty graph file"))?;
        let (n, m) = parse_pair(header)?;
        let mut edges = Vec::with_capacity(m);
        for line in lines {
            edges.push(parse_pair(line)?);
        }
        if edges.len() != m {
            return Err(Error::invalid(format!(
                "header announces {m} edges, found {}",
                edges.len()
            )));
        }
        Self::new(n, edges)
    }
}

#[derive(Deserialize)]
struct GraphRepr {
    n_nodes: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;

    fn try_from(r: GraphRepr) -> Result<Self> {
        Graph::new(r.n_nodes, r.edges)
    }
}

fn parse_pair(line: &str) -> Result<(usize, usize)> {
    let mut it = line.split_whitespace().map(str::parse::<usize>);
    match (it.next(), it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b)), None) => Ok((a, b)),
        _ => Err(Error::invalid(format!("malformed graph line `{line}`"))),
    }
}

/// Draws `G(n, p)`: each of the `n(n-1)/2` pairs, visited in lexicographic
/// order, is kept when the next uniform draw is below `p`.
///
/// An empty sample is redrawn with `seed + 1`, `seed + 2`, ... up to
/// [`EMPTY_GRAPH_RETRIES`] times.
pub fn generate_erdos_renyi(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if !(2..=MAX_NODES).contains(&n) {
        return Err(Error::invalid(format!(
            "node count {n} outside supported range [2, {MAX_NODES}]"
        )));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid(format!("edge probability {p} outside [0, 1]")));
    }
    for attempt in 0..=EMPTY_GRAPH_RETRIES {
        let mut stream = SeedStream::new(seed.wrapping_add(attempt));
        let mut edges = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if stream.uniform() < p {
                    edges.push((i, j));
                }
            }
        }
        if !edges.is_empty() {
            return Graph::new(n, edges);
        }
    }
    Err(Error::Unsatisfiable(format!(
        "G({n}, {p}) produced no edges in {} attempts from seed {seed}",
        EMPTY_GRAPH_RETRIES + 1
    )))
}

/// A two-coloring of the vertices with labels in `{+1, -1}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CutAssignment(Vec<i8>);

impl CutAssignment {
    pub fn new(labels: Vec<i8>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&z| z != 1 && z != -1) {
            return Err(Error::invalid(format!("label {bad} is not +1 or -1")));
        }
        Ok(Self(labels))
    }

    /// Decodes a basis index: bit `i` set means vertex `i` is labelled `-1`.
    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|i| 1 - 2 * ((index >> i) & 1) as i8).collect())
    }

    pub fn to_index(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &z)| z == -1)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    pub fn labels(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn flipped(&self) -> Self {
        Self(self.0.iter().map(|z| -z).collect())
    }
}

/// `C(z) = 1/2 * sum_{(i,j) in E} (1 - z_i z_j)`.
pub fn cut_value(g: &Graph, z: &CutAssignment) -> Result<f64> {
    if z.len() != g.n_nodes() {
        return Err(Error::invalid(format!(
            "assignment has {} labels, graph has {} vertices",
            z.len(),
            g.n_nodes()
        )));
    }
    let labels = z.labels();
    let total: i32 = g
        .edges()
        .iter()
        .map(|&(i, j)| 1 - (labels[i] * labels[j]) as i32)
        .sum();
    Ok(0.5 * total as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxCutResult {
    pub c_max: f64,
    /// All optimal assignments with vertex 0 labelled `+1`.
    pub witnesses: Vec<CutAssignment>,
}

fn check_size(g: &Graph) -> Result<()> {
    if g.n_nodes() > MAX_NODES {
        return Err(Error::ResourceLimit(format!(
            "{} vertices exceed the exhaustive limit of {MAX_NODES}",
            g.n_nodes()
        )));
    }
    Ok(())
}

fn edge_masks(g: &Graph) -> Vec<usize> {
    g.edges().iter().map(|&(i, j)| (1 << i) | (1 << j)).collect()
}

fn crossing_edges(masks: &[usize], index: usize) -> u32 {
    masks
        .iter()
        .filter(|&&m| (index & m).count_ones() == 1)
        .count() as u32
}

/// Exhaustive Max-Cut over the `2^(n-1)` partitions with vertex 0 fixed.
pub fn brute_force_max_cut(g: &Graph) -> Result<MaxCutResult> {
    check_size(g)?;
    let n = g.n_nodes();
    let masks = edge_masks(g);
    let mut best = 0u32;
    let mut witnesses = Vec::new();
    // vertex 0 is bit 0; keeping it clear fixes its label to +1
    for half in 0..(1usize << (n - 1)) {
        let index = half << 1;
        let cut = crossing_edges(&masks, index);
        if cut > best {
            best = cut;
            witnesses.clear();
        }
        if cut == best {
            witnesses.push(index);
        }
    }
    Ok(MaxCutResult {
        c_max: best as f64,
        witnesses: witnesses
            .into_iter()
            .map(|b| CutAssignment::from_index(b, n))
            .collect(),
    })
}

/// Diagonal of the cost Hamiltonian: the integer cut value of every basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct CutTable {
    n_qubits: usize,
    n_edges: usize,
    cuts: Vec<u32>,
}

impl CutTable {
    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_edges(&self) -> usize {
        self.n_edges
    }

    pub fn len(&self) -> usize {
        self.cuts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cuts.is_empty()
    }

    pub fn cuts(&self) -> &[u32] {
        &self.cuts
    }

    pub fn value(&self, index: usize) -> f64 {
        self.cuts[index] as f64
    }

    pub fn values(&self) -> Vec<f64> {
        self.cuts.iter().map(|&c| c as f64).collect()
    }

    pub fn max(&self) -> f64 {
        self.cuts.iter().copied().max().unwrap_or(0) as f64
    }
}

pub fn basis_cut_table(g: &Graph) -> Result<CutTable> {
    check_size(g)?;
    let masks = edge_masks(g);
    let cuts = (0..1usize << g.n_nodes())
        .map(|b| crossing_edges(&masks, b))
        .collect();
    Ok(CutTable {
        n_qubits: g.n_nodes(),
        n_edges: g.n_edges(),
        cuts,
    })
}
