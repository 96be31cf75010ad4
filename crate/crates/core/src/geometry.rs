//! Point clouds, Euclidean distance matrices and ℓ-minimum spanning trees.
//!
//! The ℓ-MST is the union of ℓ spanning trees built one after another on the
//! complete graph, each minimizing total length subject to sharing no edge with
//! the trees before it. Edges are ordered by `(length, i, j)` so equal lengths
//! are resolved deterministically and the result is unique.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An `n × d` matrix of finite reals, one observation per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    data: Vec<f64>,
    n: usize,
    d: usize,
}

impl PointCloud {
    /// Builds a cloud from row-major data.
    pub fn new(data: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::EmptyCloud { n, d });
        }
        if data.len() != n * d {
            return Err(Error::InvalidConfig(format!(
                "expected {} values for a {n}x{d} cloud, got {}",
                n * d,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput {
                row: pos / d,
                col: pos % d,
            });
        }
        Ok(Self { data, n, d })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let d = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(n * d);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != d {
                return Err(Error::InvalidConfig(format!(
                    "row {i} has {} columns, expected {d}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, n, d)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.d)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// A new cloud holding the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let mut data = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self::new(data, indices.len(), self.d)
    }

    /// Stacks `self` on top of `other`.
    pub fn concat(&self, other: &PointCloud) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch { x: self.d, y: other.d });
        }
        let mut data = self.data.clone();
        data.extend_from_slice(&other.data);
        Ok(Self {
            data,
            n: self.n + other.n,
            d: self.d,
        })
    }

    /// Applies `f` to every entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.data.iter().map(|&v| f(v)).collect(), self.n, self.d)
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut mean = vec![0.0; self.d];
        for r in self.rows() {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= self.n as f64);
        mean
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Dense symmetric Euclidean distance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    size: usize,
    dist: Vec<f64>,
}

impl DistanceMatrix {
    /// Euclidean distances among the rows of a single cloud.
    pub fn euclidean(points: &PointCloud) -> Self {
        let size = points.n();
        let mut dist = vec![0.0; size * size];
        dist.par_chunks_mut(size).enumerate().for_each(|(i, row)| {
            for (j, out) in row.iter_mut().enumerate() {
                if i != j {
                    // (min, max) order so both halves are bit-identical
                    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
                    *out = squared_distance(points.row(lo), points.row(hi)).sqrt();
                } else {
                    *out = 0.0;
                }
            }
        });
        Self { size, dist }
    }

    pub fn len(&self) -> usize {
        self.size
    }

    pub fn is_empty(&self) -> bool {
        self.size == 0
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.dist[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.dist[i * self.size..(i + 1) * self.size]
    }
}

/// Euclidean distances over the pooled sample, X rows first then Y rows.
pub fn pairwise_distances(x: &PointCloud, y: &PointCloud) -> Result<DistanceMatrix> {
    let pooled = x.concat(y)?;
    Ok(DistanceMatrix::euclidean(&pooled))
}

/// Sample membership of a node in the pooled graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    X,
    Y,
}

impl Label {
    /// 1 for the X sample, 2 for the Y sample.
    pub fn id(self) -> u8 {
        match self {
            Label::X => 1,
            Label::Y => 2,
        }
    }

    pub fn from_id(id: u8) -> Option<Self> {
        match id {
            1 => Some(Label::X),
            2 => Some(Label::Y),
            _ => None,
        }
    }
}

/// Undirected edge set of an ℓ-MST. Each edge is stored as `(i, j)` with `i < j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lmst {
    pub nodes: usize,
    pub ell: usize,
    pub edges: Vec<(usize, usize)>,
    /// Total length of each successive spanning tree.
    pub tree_lengths: Vec<f64>,
}

impl Lmst {
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes];
        for &(i, j) in &self.edges {
            deg[i] += 1;
            deg[j] += 1;
        }
        deg
    }

    pub fn with_labels(self, labels: Vec<Label>) -> Result<LabeledGraph> {
        LabeledGraph::new(self, labels)
    }
}

/// An ℓ-MST together with per-node sample labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub graph: Lmst,
    pub labels: Vec<Label>,
}

impl LabeledGraph {
    pub fn new(graph: Lmst, labels: Vec<Label>) -> Result<Self> {
        if labels.len() != graph.nodes {
            return Err(Error::InvalidConfig(format!(
                "{} labels for a graph on {} nodes",
                labels.len(),
                graph.nodes
            )));
        }
        Ok(Self { graph, labels })
    }

    /// Labels the first `n` nodes X and the rest Y, matching [`pairwise_distances`].
    pub fn pooled(graph: Lmst, n: usize) -> Result<Self> {
        let nodes = graph.nodes;
        let labels = (0..nodes).map(|i| if i < n { Label::X } else { Label::Y }).collect();
        Self::new(graph, labels)
    }

    pub fn sample_sizes(&self) -> (usize, usize) {
        let n = self.labels.iter().filter(|&&l| l == Label::X).count();
        (n, self.labels.len() - n)
    }
}

#[derive(Clone, Copy)]
struct EdgeKey {
    len: f64,
    lo: usize,
    hi: usize,
}

impl EdgeKey {
    const NONE: EdgeKey = EdgeKey {
        len: f64::INFINITY,
        lo: usize::MAX,
        hi: usize::MAX,
    };

    fn new(len: f64, a: usize, b: usize) -> Self {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        Self { len, lo, hi }
    }

    fn is_none(&self) -> bool {
        self.lo == usize::MAX
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.len
            .total_cmp(&other.len)
            .then(self.lo.cmp(&other.lo))
            .then(self.hi.cmp(&other.hi))
    }
}

/// Builds the ℓ-MST of the complete graph described by `dist`.
///
/// Each tree is grown with dense Prim in `O(N²)`, skipping edges already used
/// by earlier trees.
pub fn build_lmst(dist: &DistanceMatrix, ell: usize) -> Result<Lmst> {
    let nodes = dist.len();
    if ell == 0 {
        return Err(Error::InvalidConfig("ell must be at least 1".into()));
    }
    if nodes < 2 || nodes <= ell {
        return Err(Error::GraphTooSmall { nodes, ell });
    }

    let mut used = vec![false; nodes * nodes];
    let mut edges = Vec::with_capacity(ell * (nodes - 1));
    let mut tree_lengths = Vec::with_capacity(ell);

    let mut in_tree = vec![false; nodes];
    let mut best = vec![EdgeKey::NONE; nodes];

    for tree in 0..ell {
        in_tree.iter_mut().for_each(|b| *b = false);
        best.iter_mut().for_each(|k| *k = EdgeKey::NONE);
        let mut total = 0.0;
        let mut current = 0;
        in_tree[0] = true;

        for _ in 1..nodes {
            let row = dist.row(current);
            let blocked = &used[current * nodes..(current + 1) * nodes];
            for v in 0..nodes {
                if in_tree[v] || blocked[v] {
                    continue;
                }
                let cand = EdgeKey::new(row[v], current, v);
                if cand.cmp(&best[v]) == Ordering::Less {
                    best[v] = cand;
                }
            }

            let mut next = usize::MAX;
            for v in 0..nodes {
                if in_tree[v] || best[v].is_none() {
                    continue;
                }
                if next == usize::MAX || best[v].cmp(&best[next]) == Ordering::Less {
                    next = v;
                }
            }
            if next == usize::MAX {
                return Err(Error::DisconnectedAfterExclusion { tree: tree + 1 });
            }

            let key = best[next];
            in_tree[next] = true;
            used[key.lo * nodes + key.hi] = true;
            used[key.hi * nodes + key.lo] = true;
            edges.push((key.lo, key.hi));
            total += key.len;
            current = next;
        }
        tree_lengths.push(total);
    }

    Ok(Lmst {
        nodes,
        ell,
        edges,
        tree_lengths,
    })
}
