//! Asymptotic constants and the Henze-Penrose divergence.
//!
//! Under a mixture null with `K` components whose weights exceed `L`, the WEC
//! statistic converges to `ℓρ/(1+ρ)²·δ_ρ(f_X, f_Y)`, and
//! `δ_ρ < 1 + (1+ρ)K²/(Lρ²)`. The 1-d quadrature here evaluates `δ_ρ` directly
//! and is the reference for the plug-in estimate.

use std::collections::BinaryHeap;
use std::sync::Arc;

use crate::datagen::normal_cdf;
use crate::edgecount::{count_edges, wec_statistic};
use crate::error::{Error, Result};
use crate::geometry::{build_lmst, pairwise_distances, LabeledGraph, PointCloud};

/// Absolute tolerance of the 1-d quadrature.
pub const QUAD_TOL: f64 = 1e-6;
/// Largest number of subintervals the adaptive rule may hold.
pub const MAX_SUBINTERVALS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticParams {
    pub ell: usize,
    /// Limit of `n/m`.
    pub rho: f64,
    /// Number of baseline components.
    pub k: usize,
    /// Lower bound on the baseline weights, in `(0, 1/K]`.
    pub l_bound: f64,
    /// Lower bound of `f_X` on the support.
    pub m1: f64,
    /// Upper bound of `f_X` and `f_Y` on the support.
    pub m2: f64,
}

impl AsymptoticParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.ell == 0 {
            return bad("ell must be at least 1");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho must be positive and finite");
        }
        if self.k == 0 {
            return bad("K must be at least 1");
        }
        if !(self.l_bound > 0.0 && self.l_bound * self.k as f64 <= 1.0 + 1e-12) {
            return bad("L must lie in (0, 1/K]");
        }
        if !(self.m1 > 0.0 && self.m2 >= self.m1 && self.m2.is_finite()) {
            return bad("density bounds need 0 < M1 <= M2 < inf");
        }
        Ok(())
    }
}

/// `1 + (1+ρ)K²/(Lρ²)`, the upper bound on `δ_ρ` under the mixture null.
pub fn null_divergence_bound(rho: f64, k: usize, l_bound: f64) -> f64 {
    let k2 = (k * k) as f64;
    1.0 + (1.0 + rho) * k2 / (l_bound * rho * rho)
}

/// `γ = ℓρ/(1+ρ)² · (1 + (1+ρ)K²/(Lρ²))`.
pub fn gamma_cutoff(p: &AsymptoticParams) -> f64 {
    let rho = p.rho;
    p.ell as f64 * rho / ((1.0 + rho) * (1.0 + rho)) * null_divergence_bound(rho, p.k, p.l_bound)
}

/// `ε = (2M₂³(1+ρ)³K² / (M₁²ρ³L))^{1/2}`.
pub fn epsilon_separation(p: &AsymptoticParams) -> f64 {
    let rho = p.rho;
    let k2 = (p.k * p.k) as f64;
    (2.0 * p.m2.powi(3) * (1.0 + rho).powi(3) * k2 / (p.m1 * p.m1 * rho.powi(3) * p.l_bound)).sqrt()
}

/// `1 + ρM₁²/(M₂³(1+ρ)²)·∫(f_Y - f_X)²`, a lower bound on `δ_ρ` for densities
/// with `M₁ ≤ f_X ≤ M₂` and `f_Y ≤ M₂`.
pub fn divergence_lower_bound(rho: f64, m1: f64, m2: f64, l2_sq: f64) -> f64 {
    1.0 + rho * m1 * m1 / (m2.powi(3) * (1.0 + rho) * (1.0 + rho)) * l2_sq
}

/// Plug-in estimate `R_w·(1+ρ̂)²/(ℓρ̂)` with `ρ̂ = n/m`.
pub fn hp_divergence_estimate(x: &PointCloud, y: &PointCloud, ell: usize) -> Result<f64> {
    let (n, m) = (x.n(), y.n());
    if n < 2 || m < 2 {
        return Err(Error::TooFewPoints {
            got: n.min(m),
            needed: 2,
        });
    }
    let graph = LabeledGraph::pooled(build_lmst(&pairwise_distances(x, y)?, ell)?, n)?;
    let rw = wec_statistic(&count_edges(&graph)?, n, m);
    let rho = n as f64 / m as f64;
    Ok(rw * (1.0 + rho) * (1.0 + rho) / (ell as f64 * rho))
}

type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A density on the real line with bounded support `[a, b]`.
///
/// `breaks` lists points inside the support where the density may jump; the
/// quadrature splits there.
#[derive(Clone)]
pub struct Density1D {
    f: DensityFn,
    support: (f64, f64),
    breaks: Vec<f64>,
}

impl std::fmt::Debug for Density1D {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Density1D")
            .field("support", &self.support)
            .field("breaks", &self.breaks)
            .finish()
    }
}

fn check_interval(a: f64, b: f64) -> Result<()> {
    if a.is_finite() && b.is_finite() && a < b {
        Ok(())
    } else {
        Err(Error::InvalidConfig(format!(
            "support [{a}, {b}] is not a bounded interval"
        )))
    }
}

impl Density1D {
    pub fn uniform(a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        let h = 1.0 / (b - a);
        Ok(Self {
            f: Arc::new(move |_| h),
            support: (a, b),
            breaks: Vec::new(),
        })
    }

    /// `N(mu, sd²)` conditioned on `[a, b]`.
    pub fn truncated_normal(mu: f64, sd: f64, a: f64, b: f64) -> Result<Self> {
        check_interval(a, b)?;
        if !(sd > 0.0 && sd.is_finite() && mu.is_finite()) {
            return Err(Error::InvalidConfig(format!("bad normal parameters ({mu}, {sd})")));
        }
        let mass = normal_cdf((b - mu) / sd) - normal_cdf((a - mu) / sd);
        if !(mass > 0.0) {
            return Err(Error::InvalidConfig("truncation interval carries no mass".into()));
        }
        let norm = 1.0 / (sd * (2.0 * std::f64::consts::PI).sqrt() * mass);
        Ok(Self {
            f: Arc::new(move |x| {
                let z = (x - mu) / sd;
                norm * (-0.5 * z * z).exp()
            }),
            support: (a, b),
            breaks: Vec::new(),
        })
    }

    /// `Σ w_i f_i` with nonnegative weights summing to one.
    pub fn mixture(parts: &[(f64, Density1D)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::InvalidConfig("a mixture needs at least one component".into()));
        }
        let total: f64 = parts.iter().map(|(w, _)| w).sum();
        if parts.iter().any(|(w, _)| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(
                "mixture weights must be nonnegative and sum to 1".into(),
            ));
        }
        let a = parts.iter().map(|(_, d)| d.support.0).fold(f64::INFINITY, f64::min);
        let b = parts.iter().map(|(_, d)| d.support.1).fold(f64::NEG_INFINITY, f64::max);
        let mut breaks: Vec<f64> = parts
            .iter()
            .flat_map(|(_, d)| d.breaks.iter().copied().chain([d.support.0, d.support.1]))
            .filter(|&t| t > a && t < b)
            .collect();
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        let parts = parts.to_vec();
        Ok(Self {
            f: Arc::new(move |x| parts.iter().map(|(w, d)| w * d.eval(x)).sum()),
            support: (a, b),
            breaks,
        })
    }

    /// Wraps `f` on `[a, b]`; fails unless it integrates to one within
    /// [`QUAD_TOL`].
    pub fn from_fn(f: impl Fn(f64) -> f64 + Send + Sync + 'static, a: f64, b: f64, breaks: &[f64]) -> Result<Self> {
        check_interval(a, b)?;
        let dens = Self {
            f: Arc::new(f),
            support: (a, b),
            breaks: breaks.iter().copied().filter(|&t| t > a && t < b).collect(),
        };
        let mass = integrate(|x| dens.eval(x), &dens.cuts(), QUAD_TOL / 10.0)?;
        if (mass - 1.0).abs() > QUAD_TOL {
            return Err(Error::InvalidConfig(format!("density integrates to {mass}, not 1")));
        }
        Ok(dens)
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Density at `x`, zero outside the support. Negative values clamp to 0.
    pub fn eval(&self, x: f64) -> f64 {
        if x < self.support.0 || x > self.support.1 {
            0.0
        } else {
            (self.f)(x).max(0.0)
        }
    }

    fn cuts(&self) -> Vec<f64> {
        let mut c = vec![self.support.0];
        c.extend(&self.breaks);
        c.push(self.support.1);
        c
    }
}

/// Sorted breakpoints covering both supports.
fn joint_cuts(f: &Density1D, g: &Density1D) -> Vec<f64> {
    let mut c: Vec<f64> = f.cuts().into_iter().chain(g.cuts()).collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

/// `(ρs² + t²)/(ρs + t)`, with `0/0` read as 0.
pub fn hp_integrand(rho: f64, s: f64, t: f64) -> f64 {
    let den = rho * s + t;
    if den > 0.0 {
        (rho * s * s + t * t) / den
    } else {
        0.0
    }
}

/// `δ_ρ(f_X, f_Y) = ∫ (ρf_X² + f_Y²)/(ρf_X + f_Y)` by adaptive quadrature.
pub fn hp_divergence_quadrature(fx: &Density1D, fy: &Density1D, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::InvalidConfig(format!("rho must be positive, got {rho}")));
    }
    integrate(
        |x| hp_integrand(rho, fx.eval(x), fy.eval(x)),
        &joint_cuts(fx, fy),
        QUAD_TOL,
    )
}

/// `∫ (f_Y - f_X)²`.
pub fn l2_distance_sq(fx: &Density1D, fy: &Density1D) -> Result<f64> {
    integrate(
        |x| {
            let d = fy.eval(x) - fx.eval(x);
            d * d
        },
        &joint_cuts(fx, fy),
        QUAD_TOL,
    )
}

/// `∫_{f_X > κ} (f_Y - f_X)²`.
pub fn truncated_l2_sq(fx: &Density1D, fy: &Density1D, kappa: f64) -> Result<f64> {
    integrate(
        |x| {
            let s = fx.eval(x);
            if s > kappa {
                let d = fy.eval(x) - s;
                d * d
            } else {
                0.0
            }
        },
        &joint_cuts(fx, fy),
        QUAD_TOL,
    )
}

/// Whether the truncated separation `∫_{f_X > κ}(f_Y - f_X)² ≥ ε̃²/κ²` holds,
/// with `ε̃² = 2M₂³(1+ρ)³K²/(ρ³L)`. `M₁` is not used.
pub fn truncated_l2_separated(fx: &Density1D, fy: &Density1D, p: &AsymptoticParams, kappa: f64) -> Result<bool> {
    if !(kappa > 0.0) {
        return Err(Error::InvalidConfig(format!("kappa must be positive, got {kappa}")));
    }
    let rho = p.rho;
    let eps_sq = 2.0 * p.m2.powi(3) * (1.0 + rho).powi(3) * (p.k * p.k) as f64 / (rho.powi(3) * p.l_bound);
    Ok(truncated_l2_sq(fx, fy, kappa)? >= eps_sq / (kappa * kappa))
}

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gauss_kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for i in 0..7 {
        let pair = f(c - h * XGK[i]) + f(c + h * XGK[i]);
        kron += WGK[i] * pair;
        if i % 2 == 1 {
            gauss += WG[i / 2] * pair;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&other.err)
    }
}

/// Globally adaptive Gauss-Kronrod integration over consecutive `cuts`,
/// bisecting the piece with the largest error until the summed error is
/// below `tol`.
pub fn integrate(f: impl Fn(f64) -> f64, cuts: &[f64], tol: f64) -> Result<f64> {
    let mut heap = BinaryHeap::new();
    for w in cuts.windows(2) {
        if w[1] > w[0] {
            let (value, err) = gauss_kronrod(&f, w[0], w[1]);
            heap.push(Piece {
                a: w[0],
                b: w[1],
                value,
                err,
            });
        }
    }
    loop {
        let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.err));
        if !total.is_finite() {
            return Err(Error::QuadratureNonconvergent {
                tol,
                err: f64::INFINITY,
            });
        }
        if err <= tol {
            return Ok(total);
        }
        if heap.len() >= MAX_SUBINTERVALS {
            return Err(Error::QuadratureNonconvergent { tol, err });
        }
        let worst = heap.pop().expect("non-empty while error exceeds tol");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            return Err(Error::QuadratureNonconvergent { tol, err });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, err) = gauss_kronrod(&f, a, b);
            heap.push(Piece { a, b, value, err });
        }
    }
}
