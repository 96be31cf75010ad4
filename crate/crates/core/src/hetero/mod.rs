//! Two-sample testing against a composite null of re-weighted baseline
//! mixtures.
//!
//! The baseline sample X is clustered into `K̂` classes. Each bootstrap round
//! draws mixing weights on the `K̂`-simplex, takes `⌈m·λ_a⌉` rows from class
//! `a` as a surrogate Y sample and keeps the remaining rows as the surrogate
//! X sample. The statistic of every round forms the calibration ensemble and
//! its upper-α point is the cutoff.
//!
//! Every round pools the residual rows with the surrogate rows, which is the
//! whole baseline sample again, so the ℓ-MST of X is built once and only the
//! node labels change between rounds.

pub mod kmeans;

use std::time::Instant;

use rand::seq::index;
use rand::Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::edgecount::{
    closed_form_moments, count_edges, count_with_labels, gec_statistic, observed_statistic, permutation_pvalue,
    wec_standardized, wec_statistic, EdgeCounts, GraphSummary, StatisticKind,
};
use crate::error::{Error, Result};
use crate::geometry::{build_lmst, pairwise_distances, DistanceMatrix, Label, LabeledGraph, Lmst, PointCloud};
use crate::seeds::{derive_seed, stream_rng};

pub use kmeans::{
    averaged_strength_curve, estimate_num_clusters, estimate_num_clusters_averaged, kmeans, prediction_strength_curve,
    KMeansConfig, KMeansFit,
};

/// Slack for `⌈m·λ⌉` so that e.g. `m·0.3` rounding up to `15.000000000000002`
/// is still 15.
const CEIL_TOL: f64 = 1e-9;
const WEIGHT_SUM_TOL: f64 = 1e-12;
/// Infeasible attempts are redrawn up to this multiple of `B`.
pub const MAX_ATTEMPT_FACTOR: usize = 20;
pub const MIN_ROUNDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WeightMode {
    /// Round `t` puts all weight on class `t mod K̂`.
    Corner,
    /// Uniform on the simplex.
    Dirichlet,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MixingWeights {
    pub lambdas: Vec<f64>,
    pub mode: WeightMode,
}

pub fn sample_mixing_weights(k_hat: usize, mode: WeightMode, round_index: usize, seed: u64) -> Result<MixingWeights> {
    if k_hat == 0 {
        return Err(Error::InvalidConfig("k_hat must be at least 1".into()));
    }
    let lambdas = match mode {
        WeightMode::Corner => {
            let mut l = vec![0.0; k_hat];
            l[round_index % k_hat] = 1.0;
            l
        }
        WeightMode::Dirichlet => {
            let mut rng = stream_rng(seed, round_index as u64);
            let e: Vec<f64> = (0..k_hat).map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = e.iter().sum();
            let mut l: Vec<f64> = e.iter().map(|v| v / total).collect();
            // push rounding residue into the largest weight
            let resid = 1.0 - l.iter().sum::<f64>();
            let big = (0..k_hat).max_by(|&a, &b| l[a].total_cmp(&l[b])).unwrap_or(0);
            l[big] = (l[big] + resid).clamp(0.0, 1.0);
            l
        }
    };
    debug_assert!((lambdas.iter().sum::<f64>() - 1.0).abs() <= WEIGHT_SUM_TOL);
    Ok(MixingWeights { lambdas, mode })
}

/// K-means partition of the baseline sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub k_hat: usize,
    pub assignments: Vec<usize>,
    pub class_sizes: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
}

impl ClusterModel {
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.k_hat];
        for (i, &a) in self.assignments.iter().enumerate() {
            members[a].push(i);
        }
        members
    }
}

pub fn cluster_baseline(x: &PointCloud, k_hat: usize, seed: u64, cfg: &KMeansConfig) -> Result<ClusterModel> {
    let fit = kmeans(x, k_hat, seed, cfg)?;
    Ok(ClusterModel {
        k_hat,
        class_sizes: fit.sizes(),
        centroids: (0..k_hat).map(|a| fit.centroid(a).to_vec()).collect(),
        assignments: fit.assignments,
    })
}

/// `⌈m·λ_a⌉` for every class.
pub fn surrogate_counts(m: usize, lambdas: &[f64]) -> Vec<usize> {
    lambdas
        .iter()
        .map(|&l| ((m as f64 * l) - CEIL_TOL).ceil().max(0.0) as usize)
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateSplit {
    /// Baseline rows playing the Y sample, sorted.
    pub surrogate: Vec<usize>,
    /// The remaining baseline rows, sorted.
    pub residual: Vec<usize>,
    pub per_class: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Split {
    Feasible(SurrogateSplit),
    /// Class `class` would need `needed` rows but has `available`.
    Infeasible {
        class: usize,
        needed: usize,
        available: usize,
    },
}

fn first_infeasible(counts: &[usize], sizes: &[usize]) -> Option<(usize, usize, usize)> {
    counts
        .iter()
        .zip(sizes)
        .enumerate()
        .find(|(_, (c, s))| c > s)
        .map(|(a, (&c, &s))| (a, c, s))
}

/// Draws the surrogate split for one round without replacement within classes.
pub fn bootstrap_surrogate_split(model: &ClusterModel, weights: &MixingWeights, m: usize, seed: u64) -> Result<Split> {
    split_with_members(model, &model.members(), weights, m, seed)
}

fn split_with_members(
    model: &ClusterModel,
    members: &[Vec<usize>],
    weights: &MixingWeights,
    m: usize,
    seed: u64,
) -> Result<Split> {
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    if weights.lambdas.len() != model.k_hat {
        return Err(Error::InvalidConfig(format!(
            "{} weights for {} classes",
            weights.lambdas.len(),
            model.k_hat
        )));
    }
    let counts = surrogate_counts(m, &weights.lambdas);
    if let Some((class, needed, available)) = first_infeasible(&counts, &model.class_sizes) {
        return Ok(Split::Infeasible {
            class,
            needed,
            available,
        });
    }
    let mut rng = stream_rng(seed, 0);
    let n = model.assignments.len();
    let mut in_surrogate = vec![false; n];
    for (rows, &c) in members.iter().zip(&counts) {
        for k in index::sample(&mut rng, rows.len(), c) {
            in_surrogate[rows[k]] = true;
        }
    }
    let (surrogate, residual): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| in_surrogate[i]);
    Ok(Split::Feasible(SurrogateSplit {
        surrogate,
        residual,
        per_class: counts,
    }))
}

/// Scale on which bootstrap-calibrated WEC values are compared.
///
/// `Raw` is the statistic itself. `Standardized` subtracts the permutation
/// mean and divides by the permutation standard deviation for the sample sizes
/// at hand, so the observed pair `(n, m)` and the rounds `(n - m, m)` share a
/// reference point.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WecScale {
    Raw,
    #[default]
    Standardized,
}

impl WecScale {
    fn apply(self, counts: &EdgeCounts, summary: &GraphSummary, n: usize, m: usize) -> Result<f64> {
        match self {
            WecScale::Raw => Ok(wec_statistic(counts, n, m)),
            WecScale::Standardized => wec_standardized(counts, &closed_form_moments(summary, n, m), n, m),
        }
    }
}

impl std::str::FromStr for WecScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(WecScale::Raw),
            "standardized" => Ok(WecScale::Standardized),
            _ => Err(Error::InvalidConfig(format!("unknown WEC scale `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub b_rounds: usize,
    pub alpha: f64,
    pub ell: usize,
    pub weight_mode: WeightMode,
    pub kmax: usize,
    pub ps_threshold: f64,
    /// Half splits the prediction strength is averaged over.
    pub ps_splits: usize,
    pub seed: u64,
    /// Draws for the permutation p-values of the uncalibrated tests.
    pub permutation_draws: usize,
    pub wec_scale: WecScale,
    pub kmeans: KMeansConfig,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            b_rounds: 200,
            alpha: 0.05,
            ell: 5,
            weight_mode: WeightMode::Corner,
            kmax: 10,
            ps_threshold: 0.8,
            ps_splits: 20,
            seed: 0,
            permutation_draws: 1000,
            wec_scale: WecScale::default(),
            kmeans: KMeansConfig::default(),
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.b_rounds < MIN_ROUNDS {
            return bad(format!("B must be at least {MIN_ROUNDS}, got {}", self.b_rounds));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if self.ell == 0 {
            return bad("ell must be at least 1".into());
        }
        if self.kmax == 0 {
            return bad("kmax must be at least 1".into());
        }
        if !(self.ps_threshold > 0.0 && self.ps_threshold <= 1.0) {
            return bad(format!("ps threshold must lie in (0, 1], got {}", self.ps_threshold));
        }
        if self.ps_splits == 0 {
            return bad("ps splits must be at least 1".into());
        }
        if self.kmeans.max_iter == 0 || self.kmeans.n_init == 0 {
            return bad("k-means needs at least one iteration and one initialization".into());
        }
        Ok(())
    }
}

/// `min{s_b : (1/B)·#{r : s_r ≥ s_b} ≤ α}`, or `None` when the set is empty.
pub fn cutoff_from_ensemble(stats: &[f64], alpha: f64) -> Option<f64> {
    let b = stats.len();
    if b == 0 {
        return None;
    }
    let mut sorted = stats.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut i = 0;
    while i < b {
        // sorted[i] is the first occurrence of its value, b - i values are >= it
        if (b - i) as f64 / b as f64 <= alpha {
            return Some(sorted[i]);
        }
        let v = sorted[i];
        while i < b && sorted[i] == v {
            i += 1;
        }
    }
    None
}

/// `(1 + #{s_b ≥ observed}) / (1 + B)`.
pub fn bootstrap_pvalue(stats: &[f64], observed: f64) -> f64 {
    let hits = stats.iter().filter(|&&s| s >= observed).count();
    (1 + hits) as f64 / (1 + stats.len()) as f64
}

/// The calibration ensemble of one baseline sample.
#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapEnsemble {
    pub model: ClusterModel,
    pub wec: Vec<f64>,
    pub gec: Vec<f64>,
    pub attempts: usize,
}

impl BootstrapEnsemble {
    pub fn feasible_rounds(&self) -> usize {
        self.wec.len()
    }

    pub fn stats(&self, kind: StatisticKind) -> Result<&[f64]> {
        match kind {
            StatisticKind::Wec => Ok(&self.wec),
            StatisticKind::Gec => Ok(&self.gec),
            StatisticKind::Ec => Err(Error::InvalidConfig(
                "bootstrap calibration is defined for GEC and WEC only".into(),
            )),
        }
    }
}

struct Baseline {
    graph: Lmst,
    summary: GraphSummary,
}

impl Baseline {
    fn new(x: &PointCloud, ell: usize) -> Result<Self> {
        let graph = build_lmst(&DistanceMatrix::euclidean(x), ell)?;
        let summary = GraphSummary::of(&graph);
        Ok(Self { graph, summary })
    }
}

fn round_statistics(base: &Baseline, split: &SurrogateSplit, scale: WecScale) -> Result<(f64, f64)> {
    let n = base.graph.nodes;
    let mut labels = vec![Label::X; n];
    for &i in &split.surrogate {
        labels[i] = Label::Y;
    }
    let (nb, mb) = (split.residual.len(), split.surrogate.len());
    let counts = count_with_labels(&base.graph.edges, &labels);
    let wec = scale.apply(&counts, &base.summary, nb, mb)?;
    let gec = gec_statistic(&counts, &closed_form_moments(&base.summary, nb, mb))?;
    Ok((wec, gec))
}

/// Clusters `x` and runs the bootstrap rounds for a Y sample of size `m`.
pub fn bootstrap_ensemble(x: &PointCloud, m: usize, cfg: &BootstrapConfig) -> Result<BootstrapEnsemble> {
    cfg.validate()?;
    let n = x.n();
    if m == 0 || m >= n {
        return Err(Error::InvalidConfig(format!(
            "the baseline sample must be the larger one (n = {n}, m = {m})"
        )));
    }
    let k_hat = estimate_num_clusters_averaged(
        x,
        cfg.kmax,
        cfg.ps_threshold,
        cfg.ps_splits,
        derive_seed(cfg.seed, &[1]),
        &cfg.kmeans,
    )?;
    let model = cluster_baseline(x, k_hat, derive_seed(cfg.seed, &[2]), &cfg.kmeans)?;
    let members = model.members();

    let weight_seed = derive_seed(cfg.seed, &[3, 0]);
    let split_seed = derive_seed(cfg.seed, &[3, 1]);
    let max_attempts = MAX_ATTEMPT_FACTOR * cfg.b_rounds;
    let mut feasible = Vec::with_capacity(cfg.b_rounds);
    let mut attempts = 0;
    while feasible.len() < cfg.b_rounds && attempts < max_attempts {
        let w = sample_mixing_weights(k_hat, cfg.weight_mode, attempts, weight_seed)?;
        let counts = surrogate_counts(m, &w.lambdas);
        if first_infeasible(&counts, &model.class_sizes).is_none() {
            feasible.push((attempts, w));
        }
        attempts += 1;
    }
    if 2 * feasible.len() < cfg.b_rounds {
        return Err(Error::TooManyInfeasibleRounds {
            feasible: feasible.len(),
            wanted: cfg.b_rounds,
            attempts,
            m,
            smallest: model.class_sizes.iter().copied().min().unwrap_or(0),
        });
    }

    let base = Baseline::new(x, cfg.ell)?;
    let stats: Vec<(f64, f64)> = feasible
        .par_iter()
        .map(|(t, w)| {
            let seed = derive_seed(split_seed, &[*t as u64]);
            match split_with_members(&model, &members, w, m, seed)? {
                Split::Feasible(split) => round_statistics(&base, &split, cfg.wec_scale),
                Split::Infeasible { .. } => unreachable!("feasibility was checked"),
            }
        })
        .collect::<Result<_>>()?;
    let (wec, gec) = stats.into_iter().unzip();
    Ok(BootstrapEnsemble {
        model,
        wec,
        gec,
        attempts,
    })
}

/// Cutoff, bootstrap statistics and `K̂` for one statistic.
pub fn bootstrap_cutoff(
    x: &PointCloud,
    m: usize,
    kind: StatisticKind,
    cfg: &BootstrapConfig,
) -> Result<(Option<f64>, Vec<f64>, usize)> {
    let ens = bootstrap_ensemble(x, m, cfg)?;
    let stats = ens.stats(kind)?.to_vec();
    Ok((cutoff_from_ensemble(&stats, cfg.alpha), stats, ens.model.k_hat))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TestKind {
    Ec,
    Gec,
    Wec,
    Bgec,
    Bwec,
}

impl TestKind {
    pub const ALL: [TestKind; 5] = [
        TestKind::Ec,
        TestKind::Gec,
        TestKind::Wec,
        TestKind::Bgec,
        TestKind::Bwec,
    ];

    pub fn statistic(self) -> StatisticKind {
        match self {
            TestKind::Ec => StatisticKind::Ec,
            TestKind::Gec | TestKind::Bgec => StatisticKind::Gec,
            TestKind::Wec | TestKind::Bwec => StatisticKind::Wec,
        }
    }

    pub fn is_bootstrap(self) -> bool {
        matches!(self, TestKind::Bgec | TestKind::Bwec)
    }

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Ec => "EC",
            TestKind::Gec => "GEC",
            TestKind::Wec => "WEC",
            TestKind::Bgec => "BGEC",
            TestKind::Bwec => "BWEC",
        }
    }

    pub fn bootstrapped(kind: StatisticKind) -> Result<Self> {
        match kind {
            StatisticKind::Gec => Ok(TestKind::Bgec),
            StatisticKind::Wec => Ok(TestKind::Bwec),
            StatisticKind::Ec => Err(Error::InvalidConfig(
                "bootstrap calibration is defined for GEC and WEC only".into(),
            )),
        }
    }
}

impl std::str::FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TestKind::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown test `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Reject,
    Retain,
}

/// Outcome of one test.
///
/// Bootstrap tests reject when the observed statistic exceeds the cutoff; a
/// `cutoff` of `None` means no ensemble value qualified and the test cannot
/// reject. Permutation-calibrated tests have no cutoff and reject when
/// `p_value <= alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestReport {
    pub test: TestKind,
    pub statistic: StatisticKind,
    pub observed: f64,
    pub cutoff: Option<f64>,
    pub p_value: f64,
    pub decision: Decision,
    pub alpha: f64,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub ell: usize,
    pub k_hat: Option<usize>,
    pub class_sizes: Option<Vec<usize>>,
    pub b_rounds: Option<usize>,
    pub feasible_rounds: Option<usize>,
    pub attempts: Option<usize>,
    pub weight_mode: Option<WeightMode>,
    pub wec_scale: Option<WecScale>,
    pub permutation_draws: Option<usize>,
    pub seed: u64,
    pub wall_ms: f64,
}

impl TestReport {
    pub fn rejects(&self) -> bool {
        self.decision == Decision::Reject
    }
}

/// Runs each requested test on `(x, y)`, sharing the pooled graph and a single
/// bootstrap ensemble between tests. Fails if any test fails.
pub fn run_tests(x: &PointCloud, y: &PointCloud, tests: &[TestKind], cfg: &BootstrapConfig) -> Result<Vec<TestReport>> {
    run_tests_each(x, y, tests, cfg)?.into_iter().collect()
}

/// Like [`run_tests`], but a failure of one test (say, too many infeasible
/// bootstrap rounds) leaves the others intact. The outer error covers the
/// shared steps.
pub fn run_tests_each(
    x: &PointCloud,
    y: &PointCloud,
    tests: &[TestKind],
    cfg: &BootstrapConfig,
) -> Result<Vec<Result<TestReport>>> {
    cfg.validate()?;
    if tests.is_empty() {
        return Err(Error::EmptySelection);
    }
    if x.d() != y.d() {
        return Err(Error::DimensionMismatch { x: x.d(), y: y.d() });
    }
    let start = Instant::now();
    let pooled = LabeledGraph::pooled(build_lmst(&pairwise_distances(x, y)?, cfg.ell)?, x.n())?;
    let shared_ms = start.elapsed().as_secs_f64() * 1e3;

    let mut ensemble: Option<(Result<BootstrapEnsemble>, f64)> = None;
    let mut reports = Vec::with_capacity(tests.len());
    for &test in tests {
        let t0 = Instant::now();
        let mut extra_ms = 0.0;
        let ens = if test.is_bootstrap() {
            let (ens, ms) = ensemble.get_or_insert_with(|| {
                let tb = Instant::now();
                let ens = bootstrap_ensemble(x, y.n(), cfg);
                (ens, tb.elapsed().as_secs_f64() * 1e3)
            });
            extra_ms = *ms;
            Some(ens.as_ref().map_err(Clone::clone))
        } else {
            None
        };
        let report = single_report(x, y, test, cfg, &pooled, ens).map(|mut r| {
            r.wall_ms = shared_ms + extra_ms + t0.elapsed().as_secs_f64() * 1e3;
            r
        });
        reports.push(report);
    }
    Ok(reports)
}

fn single_report(
    x: &PointCloud,
    y: &PointCloud,
    test: TestKind,
    cfg: &BootstrapConfig,
    pooled: &LabeledGraph,
    ensemble: Option<std::result::Result<&BootstrapEnsemble, Error>>,
) -> Result<TestReport> {
    let kind = test.statistic();
    let observed = if test == TestKind::Bwec {
        let (n, m) = pooled.sample_sizes();
        cfg.wec_scale
            .apply(&count_edges(pooled)?, &GraphSummary::of(&pooled.graph), n, m)?
    } else {
        observed_statistic(kind, pooled)?
    };
    let mut report = TestReport {
        test,
        statistic: kind,
        observed,
        cutoff: None,
        p_value: 1.0,
        decision: Decision::Retain,
        alpha: cfg.alpha,
        n: x.n(),
        m: y.n(),
        d: x.d(),
        ell: cfg.ell,
        k_hat: None,
        class_sizes: None,
        b_rounds: None,
        feasible_rounds: None,
        attempts: None,
        weight_mode: None,
        wec_scale: None,
        permutation_draws: None,
        seed: cfg.seed,
        wall_ms: 0.0,
    };
    match ensemble {
        Some(ens) => {
            let ens = ens?;
            let stats = ens.stats(kind)?;
            report.cutoff = cutoff_from_ensemble(stats, cfg.alpha);
            report.p_value = bootstrap_pvalue(stats, observed);
            if matches!(report.cutoff, Some(c) if observed > c) {
                report.decision = Decision::Reject;
            }
            report.k_hat = Some(ens.model.k_hat);
            report.class_sizes = Some(ens.model.class_sizes.clone());
            report.b_rounds = Some(cfg.b_rounds);
            report.feasible_rounds = Some(ens.feasible_rounds());
            report.attempts = Some(ens.attempts);
            report.weight_mode = Some(cfg.weight_mode);
            if kind == StatisticKind::Wec {
                report.wec_scale = Some(cfg.wec_scale);
            }
        }
        None => {
            let seed = derive_seed(cfg.seed, &[4, test as u64]);
            report.p_value = permutation_pvalue(kind, pooled, cfg.permutation_draws, seed)?;
            report.permutation_draws = Some(cfg.permutation_draws);
            if report.p_value <= cfg.alpha {
                report.decision = Decision::Reject;
            }
        }
    }
    Ok(report)
}

/// The bootstrap-calibrated test of `kind` (GEC or WEC).
pub fn heterogeneous_test(
    x: &PointCloud,
    y: &PointCloud,
    kind: StatisticKind,
    cfg: &BootstrapConfig,
) -> Result<TestReport> {
    let test = TestKind::bootstrapped(kind)?;
    Ok(run_tests(x, y, &[test], cfg)?.remove(0))
}
