//! Edge-count statistics on a labeled similarity graph.
//!
//! `R1` and `R2` count edges with both endpoints in the X and Y sample, `R0`
//! counts edges between the samples. The EC test rejects for small `R0`, the
//! generalized (GEC) and weighted (WEC) tests reject for large values of their
//! statistics.
//!
//! Permutation-null moments of `(R1, R2)` come from three routes: exhaustive
//! enumeration of label assignments (ground truth on small graphs), Monte
//! Carlo, and a closed form built from per-edge inclusion probabilities.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Label, LabeledGraph, Lmst};
use crate::seeds::stream_rng;

/// Largest number of label assignments exact enumeration will visit.
pub const MAX_ENUMERATION: u64 = 1_000_000;
/// Minimum number of Monte Carlo draws for moments and p-values.
pub const MIN_DRAWS: usize = 100;
/// Default bound on the condition number of the permutation covariance.
pub const DEFAULT_MAX_CONDITION: f64 = 1e12;

const DRAW_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub r0: usize,
    pub r1: usize,
    pub r2: usize,
    pub total_edges: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StatisticKind {
    Ec,
    Gec,
    Wec,
}

impl StatisticKind {
    pub fn name(self) -> &'static str {
        match self {
            StatisticKind::Ec => "EC",
            StatisticKind::Gec => "GEC",
            StatisticKind::Wec => "WEC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentMethod {
    ExactEnumeration,
    MonteCarlo,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MomentsMode {
    Exact,
    MonteCarlo { draws: usize, seed: u64 },
    ClosedForm,
}

/// Mean and covariance of `(R1, R2)` under uniform relabeling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PermutationMoments {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma: [[f64; 2]; 2],
    pub method: MomentMethod,
    pub draws: Option<usize>,
}

/// The graph quantities the closed-form moments depend on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphSummary {
    pub edges: usize,
    /// Number of unordered pairs of distinct edges sharing a node.
    pub shared_pairs: u64,
}

impl GraphSummary {
    pub fn of(graph: &Lmst) -> Self {
        let shared_pairs = graph
            .degrees()
            .iter()
            .map(|&k| (k as u64) * (k as u64).saturating_sub(1) / 2)
            .sum();
        Self {
            edges: graph.edges.len(),
            shared_pairs,
        }
    }
}

pub(crate) fn count_with_labels(edges: &[(usize, usize)], labels: &[Label]) -> EdgeCounts {
    let (mut r0, mut r1, mut r2) = (0, 0, 0);
    for &(i, j) in edges {
        match (labels[i], labels[j]) {
            (Label::X, Label::X) => r1 += 1,
            (Label::Y, Label::Y) => r2 += 1,
            _ => r0 += 1,
        }
    }
    EdgeCounts {
        r0,
        r1,
        r2,
        total_edges: edges.len(),
    }
}

fn check_two_samples(n: usize, m: usize) -> Result<()> {
    if n == 0 || m == 0 {
        return Err(Error::SingleSample { n, m });
    }
    Ok(())
}

pub fn count_edges(graph: &LabeledGraph) -> Result<EdgeCounts> {
    let (n, m) = graph.sample_sizes();
    check_two_samples(n, m)?;
    Ok(count_with_labels(&graph.graph.edges, &graph.labels))
}

/// `(1/N)·((m/N)·R1 + (n/N)·R2)` with the integer numerator formed first.
pub fn wec_statistic(counts: &EdgeCounts, n: usize, m: usize) -> f64 {
    let big_n = (n + m) as u128;
    let numer = m as u128 * counts.r1 as u128 + n as u128 * counts.r2 as u128;
    numer as f64 / (big_n * big_n) as f64
}

/// WEC centered and scaled by its permutation mean and standard deviation.
pub fn wec_standardized(counts: &EdgeCounts, moments: &PermutationMoments, n: usize, m: usize) -> Result<f64> {
    let big_n = (n + m) as f64;
    let (w1, w2) = (m as f64 / (big_n * big_n), n as f64 / (big_n * big_n));
    let s = &moments.sigma;
    let var = w1 * w1 * s[0][0] + 2.0 * w1 * w2 * s[0][1] + w2 * w2 * s[1][1];
    if !(var > 0.0) {
        return Err(Error::SingularCovariance {
            condition: f64::INFINITY,
        });
    }
    let mean = w1 * moments.mu1 + w2 * moments.mu2;
    Ok((wec_statistic(counts, n, m) - mean) / var.sqrt())
}

/// Centered quadratic form `(R - μ)ᵀ Σ⁻¹ (R - μ)`.
pub fn gec_statistic(counts: &EdgeCounts, moments: &PermutationMoments) -> Result<f64> {
    gec_statistic_with_bound(counts, moments, DEFAULT_MAX_CONDITION)
}

pub fn gec_statistic_with_bound(counts: &EdgeCounts, moments: &PermutationMoments, max_condition: f64) -> Result<f64> {
    let inv = invert_covariance(&moments.sigma, max_condition)?;
    let a = counts.r1 as f64 - moments.mu1;
    let b = counts.r2 as f64 - moments.mu2;
    Ok(a * a * inv[0][0] + 2.0 * a * b * inv[0][1] + b * b * inv[1][1])
}

pub(crate) fn invert_covariance(s: &[[f64; 2]; 2], max_condition: f64) -> Result<[[f64; 2]; 2]> {
    let (a, b, c) = (s[0][0], 0.5 * (s[0][1] + s[1][0]), s[1][1]);
    let half_tr = 0.5 * (a + c);
    let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
    let (hi, lo) = (half_tr + rad, half_tr - rad);
    let condition = if lo > 0.0 { hi / lo } else { f64::INFINITY };
    if !(condition.is_finite() && condition <= max_condition) {
        return Err(Error::SingularCovariance { condition });
    }
    let det = a * c - b * b;
    Ok([[c / det, -b / det], [-b / det, a / det]])
}

/// Falling-factorial ratio `k(k-1)…(k-r+1) / N(N-1)…(N-r+1)`.
fn inclusion(k: usize, total: usize, r: usize) -> f64 {
    if total < r {
        return 0.0;
    }
    (0..r).fold(1.0, |acc, i| acc * (k.saturating_sub(i)) as f64 / (total - i) as f64)
}

/// Closed-form permutation moments.
///
/// An edge is within-X with probability `n(n-1)/(N(N-1))`; two edges sharing a
/// node are both within-X with probability `n(n-1)(n-2)/(N(N-1)(N-2))`; two
/// disjoint edges need four X labels. The covariance term only has disjoint
/// pairs since two edges meeting at a node cannot be within-X and within-Y.
pub fn closed_form_moments(summary: &GraphSummary, n: usize, m: usize) -> PermutationMoments {
    let total = n + m;
    let e = summary.edges as f64;
    let shared_ordered = 2.0 * summary.shared_pairs as f64;
    let disjoint_ordered = e * (e - 1.0) - shared_ordered;

    let p2x = inclusion(n, total, 2);
    let p2y = inclusion(m, total, 2);
    let mu1 = e * p2x;
    let mu2 = e * p2y;

    let var = |k: usize, mu: f64| {
        mu + shared_ordered * inclusion(k, total, 3) + disjoint_ordered * inclusion(k, total, 4) - mu * mu
    };
    let v1 = var(n, mu1);
    let v2 = var(m, mu2);
    let cross = if total >= 4 {
        (n * n.saturating_sub(1)) as f64 * (m * m.saturating_sub(1)) as f64
            / (total as f64 * (total - 1) as f64 * (total - 2) as f64 * (total - 3) as f64)
    } else {
        0.0
    };
    let cov = disjoint_ordered * cross - mu1 * mu2;

    PermutationMoments {
        mu1,
        mu2,
        sigma: [[v1, cov], [cov, v2]],
        method: MomentMethod::ClosedForm,
        draws: None,
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Visits every assignment of `n` X-labels among `total` nodes.
fn for_each_assignment(total: usize, n: usize, mut visit: impl FnMut(&[Label])) {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut labels = vec![Label::Y; total];
    loop {
        labels.iter_mut().for_each(|l| *l = Label::Y);
        for &i in &idx {
            labels[i] = Label::X;
        }
        visit(&labels);

        // advance to the next combination in lexicographic order
        let mut pos = n;
        while pos > 0 && idx[pos - 1] == total - n + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return;
        }
        pos -= 1;
        idx[pos] += 1;
        for k in pos + 1..n {
            idx[k] = idx[k - 1] + 1;
        }
    }
}

fn check_enumeration(total: usize, n: usize) -> Result<()> {
    let count = binomial(total, n);
    if count > MAX_ENUMERATION as f64 {
        return Err(Error::EnumerationTooLarge {
            count,
            limit: MAX_ENUMERATION,
        });
    }
    Ok(())
}

fn exact_moments(graph: &Lmst, n: usize, m: usize) -> Result<PermutationMoments> {
    let total = n + m;
    check_enumeration(total, n)?;
    let (mut t, mut s1, mut s2, mut s11, mut s22, mut s12) = (0i128, 0i128, 0i128, 0i128, 0i128, 0i128);
    for_each_assignment(total, n, |labels| {
        let c = count_with_labels(&graph.edges, labels);
        let (r1, r2) = (c.r1 as i128, c.r2 as i128);
        t += 1;
        s1 += r1;
        s2 += r2;
        s11 += r1 * r1;
        s22 += r2 * r2;
        s12 += r1 * r2;
    });
    let tf = t as f64;
    let cov = |sab: i128, sa: i128, sb: i128| (sab * t - sa * sb) as f64 / (tf * tf);
    let c12 = cov(s12, s1, s2);
    Ok(PermutationMoments {
        mu1: s1 as f64 / tf,
        mu2: s2 as f64 / tf,
        sigma: [[cov(s11, s1, s1), c12], [c12, cov(s22, s2, s2)]],
        method: MomentMethod::ExactEnumeration,
        draws: None,
    })
}

/// Runs `draws` uniform relabelings in fixed-size chunks, one RNG stream per chunk.
fn permuted_counts(graph: &Lmst, n: usize, m: usize, draws: usize, seed: u64) -> Vec<EdgeCounts> {
    let chunks = draws.div_ceil(DRAW_CHUNK);
    (0..chunks)
        .into_par_iter()
        .flat_map_iter(|c| {
            let mut rng = stream_rng(seed, c as u64);
            let mut labels: Vec<Label> = (0..n + m).map(|i| if i < n { Label::X } else { Label::Y }).collect();
            let len = DRAW_CHUNK.min(draws - c * DRAW_CHUNK);
            (0..len)
                .map(|_| {
                    labels.shuffle(&mut rng);
                    count_with_labels(&graph.edges, &labels)
                })
                .collect::<Vec<_>>()
        })
        .collect()
}

fn monte_carlo_moments(graph: &Lmst, n: usize, m: usize, draws: usize, seed: u64) -> Result<PermutationMoments> {
    if draws < MIN_DRAWS {
        return Err(Error::InsufficientDraws {
            got: draws,
            min: MIN_DRAWS,
        });
    }
    let counts = permuted_counts(graph, n, m, draws, seed);
    let k = draws as f64;
    let mu1 = counts.iter().map(|c| c.r1 as f64).sum::<f64>() / k;
    let mu2 = counts.iter().map(|c| c.r2 as f64).sum::<f64>() / k;
    let (mut v1, mut v2, mut c12) = (0.0, 0.0, 0.0);
    for c in &counts {
        let a = c.r1 as f64 - mu1;
        let b = c.r2 as f64 - mu2;
        v1 += a * a;
        v2 += b * b;
        c12 += a * b;
    }
    let denom = k - 1.0;
    Ok(PermutationMoments {
        mu1,
        mu2,
        sigma: [[v1 / denom, c12 / denom], [c12 / denom, v2 / denom]],
        method: MomentMethod::MonteCarlo,
        draws: Some(draws),
    })
}

/// Permutation-null moments of `(R1, R2)` for `n` X-labels and `m` Y-labels on `graph`.
pub fn permutation_moments(graph: &Lmst, n: usize, m: usize, mode: MomentsMode) -> Result<PermutationMoments> {
    check_two_samples(n, m)?;
    if n + m != graph.nodes {
        return Err(Error::InvalidConfig(format!(
            "n + m = {} but the graph has {} nodes",
            n + m,
            graph.nodes
        )));
    }
    match mode {
        MomentsMode::Exact => exact_moments(graph, n, m),
        MomentsMode::MonteCarlo { draws, seed } => monte_carlo_moments(graph, n, m, draws, seed),
        MomentsMode::ClosedForm => Ok(closed_form_moments(&GraphSummary::of(graph), n, m)),
    }
}

/// Evaluates a statistic. EC returns `R0`; GEC needs `moments`.
pub fn statistic_value(
    kind: StatisticKind,
    counts: &EdgeCounts,
    n: usize,
    m: usize,
    moments: Option<&PermutationMoments>,
) -> Result<f64> {
    match kind {
        StatisticKind::Ec => Ok(counts.r0 as f64),
        StatisticKind::Wec => Ok(wec_statistic(counts, n, m)),
        StatisticKind::Gec => {
            let moments = moments.ok_or_else(|| Error::InvalidConfig("GEC requires permutation moments".into()))?;
            gec_statistic(counts, moments)
        }
    }
}

fn is_extreme(kind: StatisticKind, permuted: f64, observed: f64) -> bool {
    match kind {
        StatisticKind::Ec => permuted <= observed,
        StatisticKind::Gec | StatisticKind::Wec => permuted >= observed,
    }
}

struct Evaluator {
    kind: StatisticKind,
    n: usize,
    m: usize,
    moments: Option<PermutationMoments>,
}

impl Evaluator {
    fn new(kind: StatisticKind, graph: &Lmst, n: usize, m: usize) -> Self {
        let moments = (kind == StatisticKind::Gec).then(|| closed_form_moments(&GraphSummary::of(graph), n, m));
        Self { kind, n, m, moments }
    }

    fn eval(&self, counts: &EdgeCounts) -> Result<f64> {
        statistic_value(self.kind, counts, self.n, self.m, self.moments.as_ref())
    }
}

/// Observed statistic on the graph's own labels.
pub fn observed_statistic(kind: StatisticKind, graph: &LabeledGraph) -> Result<f64> {
    let (n, m) = graph.sample_sizes();
    let counts = count_edges(graph)?;
    Evaluator::new(kind, &graph.graph, n, m).eval(&counts)
}

/// Monte Carlo permutation p-value with the add-one correction.
///
/// GEC and WEC count permuted values at least as large as the observed one;
/// EC counts permuted `R0` at most as large.
pub fn permutation_pvalue(kind: StatisticKind, graph: &LabeledGraph, draws: usize, seed: u64) -> Result<f64> {
    if draws < MIN_DRAWS {
        return Err(Error::InsufficientDraws {
            got: draws,
            min: MIN_DRAWS,
        });
    }
    let (n, m) = graph.sample_sizes();
    let counts = count_edges(graph)?;
    let eval = Evaluator::new(kind, &graph.graph, n, m);
    let observed = eval.eval(&counts)?;
    let mut hits = 0usize;
    for c in permuted_counts(&graph.graph, n, m, draws, seed) {
        if is_extreme(kind, eval.eval(&c)?, observed) {
            hits += 1;
        }
    }
    Ok((1 + hits) as f64 / (1 + draws) as f64)
}

/// Exact permutation p-value: the fraction of all label assignments at least as
/// extreme as the observed one.
pub fn exact_permutation_pvalue(kind: StatisticKind, graph: &LabeledGraph) -> Result<f64> {
    let (n, m) = graph.sample_sizes();
    let counts = count_edges(graph)?;
    check_enumeration(n + m, n)?;
    let eval = Evaluator::new(kind, &graph.graph, n, m);
    let observed = eval.eval(&counts)?;
    let (mut hits, mut total) = (0u64, 0u64);
    let mut failure = None;
    for_each_assignment(n + m, n, |labels| {
        total += 1;
        match eval.eval(&count_with_labels(&graph.graph.edges, labels)) {
            Ok(v) if is_extreme(kind, v, observed) => hits += 1,
            Ok(_) => {}
            Err(e) => failure = Some(e),
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(hits as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_lmst, DistanceMatrix, PointCloud};

    fn path(nodes: usize) -> Lmst {
        Lmst {
            nodes,
            ell: 1,
            edges: (0..nodes - 1).map(|i| (i, i + 1)).collect(),
            tree_lengths: vec![],
        }
    }

    fn labeled(graph: Lmst, ids: &[u8]) -> LabeledGraph {
        let labels = ids.iter().map(|&i| Label::from_id(i).unwrap()).collect();
        LabeledGraph::new(graph, labels).unwrap()
    }

    #[test]
    fn counts_on_small_paths() {
        let c = count_edges(&labeled(path(3), &[1, 1, 2])).unwrap();
        assert_eq!((c.r0, c.r1, c.r2), (1, 1, 0));
        let c = count_edges(&labeled(path(4), &[1, 2, 1, 2])).unwrap();
        assert_eq!((c.r0, c.r1, c.r2), (3, 0, 0));
        assert_eq!(c.total_edges, 3);
    }

    #[test]
    fn single_sample_is_rejected() {
        assert!(matches!(
            count_edges(&labeled(path(3), &[1, 1, 1])),
            Err(Error::SingleSample { n: 3, m: 0 })
        ));
        assert!(matches!(
            permutation_moments(&path(3), 3, 0, MomentsMode::Exact),
            Err(Error::SingleSample { .. })
        ));
    }

    #[test]
    fn counts_match_per_edge_recount() {
        let x = PointCloud::from_rows(&[
            [0.1, 0.3],
            [0.9, 0.2],
            [0.4, 0.8],
            [0.5, 0.5],
            [0.7, 0.9],
            [0.2, 0.6],
            [0.95, 0.55],
            [0.3, 0.05],
        ])
        .unwrap();
        let g = build_lmst(&DistanceMatrix::euclidean(&x), 2).unwrap();
        let g = labeled(g, &[1, 2, 2, 1, 1, 2, 1, 2]);
        let c = count_edges(&g).unwrap();
        let mut naive = [0usize; 3];
        for &(i, j) in &g.graph.edges {
            let (a, b) = (g.labels[i].id(), g.labels[j].id());
            let k = if a != b { 0 } else { a as usize };
            naive[k] += 1;
        }
        assert_eq!([c.r0, c.r1, c.r2], naive);
        assert_eq!(c.r0 + c.r1 + c.r2, 14);
    }

    #[test]
    fn wec_values() {
        let zero = EdgeCounts {
            r0: 5,
            r1: 0,
            r2: 0,
            total_edges: 5,
        };
        assert_eq!(wec_statistic(&zero, 4, 3), 0.0);
        let sym = EdgeCounts {
            r0: 0,
            r1: 7,
            r2: 7,
            total_edges: 14,
        };
        assert!((wec_statistic(&sym, 10, 10) - 7.0 / 20.0).abs() < 1e-15);
        let c = EdgeCounts {
            r0: 0,
            r1: 520,
            r2: 30,
            total_edges: 550,
        };
        let direct = (1.0 / 550.0) * ((50.0 / 550.0) * 520.0 + (500.0 / 550.0) * 30.0);
        let v = wec_statistic(&c, 500, 50);
        assert!((v - direct).abs() < 1e-15);
        assert!((v - 0.13554).abs() < 5e-6);
    }

    #[test]
    fn gec_quadratic_form() {
        let id = PermutationMoments {
            mu1: 1.0,
            mu2: 2.0,
            sigma: [[1.0, 0.0], [0.0, 1.0]],
            method: MomentMethod::ClosedForm,
            draws: None,
        };
        let at_mean = EdgeCounts {
            r0: 0,
            r1: 1,
            r2: 2,
            total_edges: 3,
        };
        assert_eq!(gec_statistic(&at_mean, &id).unwrap(), 0.0);
        let off = EdgeCounts {
            r0: 0,
            r1: 4,
            r2: 6,
            total_edges: 10,
        };
        assert!((gec_statistic(&off, &id).unwrap() - 25.0).abs() < 1e-12);
        let singular = PermutationMoments {
            sigma: [[1.0, 1.0], [1.0, 1.0]],
            ..id
        };
        assert!(matches!(
            gec_statistic(&off, &singular),
            Err(Error::SingularCovariance { .. })
        ));
    }

    #[test]
    fn gec_on_six_node_path() {
        // Exhaustive moments for n = m = 3 on the path 0-1-2-3-4-5, frozen from
        // an independent enumeration: 20 assignments, sum R1 = sum R2 = 20,
        // sum R1² = sum R2² = 28, sum R1·R2 = 24, so μ = (1, 1) and
        // Σ = [[0.4, 0.2], [0.2, 0.4]].
        let g = path(6);
        let mom = permutation_moments(&g, 3, 3, MomentsMode::Exact).unwrap();
        assert!((mom.mu1 - 1.0).abs() < 1e-14 && (mom.mu2 - 1.0).abs() < 1e-14);
        assert!((mom.sigma[0][0] - 0.4).abs() < 1e-14);
        assert!((mom.sigma[1][1] - 0.4).abs() < 1e-14);
        assert!((mom.sigma[0][1] - 0.2).abs() < 1e-14);
        // observed (R1, R2) = (2, 1): d = (1, 0), Σ⁻¹[0][0] = 0.4 / 0.12 = 10/3
        let obs = EdgeCounts {
            r0: 2,
            r1: 2,
            r2: 1,
            total_edges: 5,
        };
        let v = gec_statistic(&obs, &mom).unwrap();
        assert!((v - 10.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_mean() {
        let tri = Lmst {
            nodes: 3,
            ell: 1,
            edges: vec![(0, 1), (0, 2), (1, 2)],
            tree_lengths: vec![],
        };
        let ex = permutation_moments(&tri, 2, 1, MomentsMode::Exact).unwrap();
        assert!((ex.mu1 - 1.0).abs() < 1e-15);
        assert_eq!(ex.mu2, 0.0);
        let cf = permutation_moments(&tri, 2, 1, MomentsMode::ClosedForm).unwrap();
        assert!((cf.mu1 - 1.0).abs() < 1e-15);
        assert!((cf.sigma[0][0] - ex.sigma[0][0]).abs() < 1e-12);
    }

    #[test]
    fn star_exact_vs_monte_carlo() {
        let star = Lmst {
            nodes: 5,
            ell: 1,
            edges: (1..5).map(|i| (0, i)).collect(),
            tree_lengths: vec![],
        };
        let ex = permutation_moments(&star, 2, 3, MomentsMode::Exact).unwrap();
        let mc = permutation_moments(
            &star,
            2,
            3,
            MomentsMode::MonteCarlo {
                draws: 100_000,
                seed: 5,
            },
        )
        .unwrap();
        let se1 = (ex.sigma[0][0] / 1e5).sqrt();
        let se2 = (ex.sigma[1][1] / 1e5).sqrt();
        assert!((mc.mu1 - ex.mu1).abs() < 3.0 * se1);
        assert!((mc.mu2 - ex.mu2).abs() < 3.0 * se2);
    }

    #[test]
    fn enumeration_and_draw_limits() {
        let g = path(40);
        assert!(matches!(
            permutation_moments(&g, 20, 20, MomentsMode::Exact),
            Err(Error::EnumerationTooLarge { .. })
        ));
        assert!(matches!(
            permutation_moments(&g, 20, 20, MomentsMode::MonteCarlo { draws: 99, seed: 0 }),
            Err(Error::InsufficientDraws { got: 99, min: 100 })
        ));
    }

    #[test]
    fn extreme_observation_gets_floor_pvalue() {
        // all X on one end, all Y on the other: R1 and R2 are maximal
        let g = labeled(path(12), &[1, 1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 2]);
        let p = permutation_pvalue(StatisticKind::Wec, &g, 200, 1).unwrap();
        assert!(p <= 2.0 / 201.0);
        let p_ec = permutation_pvalue(StatisticKind::Ec, &g, 200, 1).unwrap();
        assert!(p_ec < 0.05);
    }

    #[test]
    fn exact_pvalue_matches_brute_force() {
        let g = labeled(path(6), &[1, 1, 2, 1, 2, 2]);
        // observed: R1 = 1, R2 = 1. Brute force over the 20 assignments.
        let mut hits = 0;
        for_each_assignment(6, 3, |l| {
            let c = count_with_labels(&g.graph.edges, l);
            if wec_statistic(&c, 3, 3) >= wec_statistic(&count_edges(&g).unwrap(), 3, 3) {
                hits += 1;
            }
        });
        let p = exact_permutation_pvalue(StatisticKind::Wec, &g).unwrap();
        assert_eq!(p, hits as f64 / 20.0);
        let mc = permutation_pvalue(StatisticKind::Wec, &g, 100_000, 9).unwrap();
        assert!((mc - p).abs() < 4.0 * (p * (1.0 - p) / 1e5).sqrt() + 1e-4);
    }

    #[test]
    fn standardized_wec_has_unit_moments_over_all_labelings() {
        // closed-form moments standardize; the mean and variance come from enumeration
        let x = PointCloud::from_rows(&[
            [0.0, 0.0],
            [1.0, 0.2],
            [0.3, 1.1],
            [2.0, 1.9],
            [1.4, 0.7],
            [0.8, 2.2],
            [2.5, 0.1],
            [1.9, 1.2],
            [0.2, 1.7],
        ])
        .unwrap();
        let g = build_lmst(&DistanceMatrix::euclidean(&x), 2).unwrap();
        let (n, m) = (6, 3);
        let mom = closed_form_moments(&GraphSummary::of(&g), n, m);
        let (mut s1, mut s2, mut count) = (0.0, 0.0, 0.0);
        for_each_assignment(9, n, |l| {
            let z = wec_standardized(&count_with_labels(&g.edges, l), &mom, n, m).unwrap();
            s1 += z;
            s2 += z * z;
            count += 1.0;
        });
        assert_eq!(count, 84.0);
        assert!((s1 / count).abs() < 1e-12);
        assert!((s2 / count - 1.0).abs() < 1e-12);
    }

    #[test]
    fn enumeration_visits_every_combination_once() {
        let mut seen = std::collections::HashSet::new();
        for_each_assignment(7, 3, |l| {
            let key: Vec<u8> = l.iter().map(|x| x.id()).collect();
            assert!(seen.insert(key));
        });
        assert_eq!(seen.len(), 35);
    }
}
