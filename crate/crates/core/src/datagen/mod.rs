//! Seeded samplers for finite mixtures of Gaussian and Gaussian-copula
//! components, with optional per-coordinate zero inflation.
//!
//! A [`MixtureSpec`] is declarative and serializes to TOML:
//!
//! ```toml
//! dim = 2
//! zero_inflation = [0.5, 0.0]     # optional
//!
//! [[components]]
//! weight = 0.25
//! family = "gaussian"
//! mean = [10.0, 10.0]
//! cov = { kind = "identity-scaled", scale = 1.0 }
//!
//! [[components]]
//! weight = 0.75
//! family = "gamma-copula"
//! shape = [5.0, 5.0]
//! rate = [1.0, 1.0]
//! corr = { kind = "tapering", base = 0.7, sign = "positive" }
//! ```
//!
//! Copula correlation inputs are handed to the latent Gaussian unchanged; a
//! scaled matrix such as `0.25·Σ` therefore also shrinks the margins toward
//! their medians.

pub mod experiments;
pub mod special;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::seeds::stream_rng;

pub use experiments::{experiment_names, experiment_spec, Experiment, ExperimentSpec, GridCell};
pub use special::{gamma_quantile, normal_cdf};

const WEIGHT_TOL: f64 = 1e-12;
const ROW_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaperSign {
    Positive,
    Negative,
}

/// How a component's covariance (or copula correlation) matrix is produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CovSpec {
    /// `scale · I`.
    IdentityScaled { scale: f64 },
    /// `scale · QΛQᵀ` with eigenvalues uniform on `[eig_lo, eig_hi]`.
    RandomSpd {
        eig_lo: f64,
        eig_hi: f64,
        seed: u64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// `scale · (s·base)^|i-j|`, with `s = -1` for the negative variant.
    Tapering {
        base: f64,
        sign: TaperSign,
        #[serde(default = "one")]
        scale: f64,
    },
    /// An explicit matrix, row by row.
    Explicit { rows: Vec<Vec<f64>> },
}

fn one() -> f64 {
    1.0
}

impl CovSpec {
    pub fn identity() -> Self {
        CovSpec::IdentityScaled { scale: 1.0 }
    }

    pub fn matrix(&self, d: usize) -> Result<DMatrix<f64>> {
        match *self {
            CovSpec::IdentityScaled { scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::spec("scale", "must be positive"));
                }
                Ok(DMatrix::identity(d, d) * scale)
            }
            CovSpec::RandomSpd {
                eig_lo,
                eig_hi,
                seed,
                scale,
            } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::spec("scale", "must be positive"));
                }
                Ok(random_spd(d, eig_lo, eig_hi, seed)? * scale)
            }
            CovSpec::Tapering { base, sign, scale } => {
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::spec("scale", "must be positive"));
                }
                Ok(tapering_corr(d, base, sign)? * scale)
            }
            CovSpec::Explicit { ref rows } => {
                if rows.len() != d || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::spec("rows", format!("must be a {d}x{d} matrix")));
                }
                let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
                if (0..d).any(|i| (0..d).any(|j| (m[(i, j)] - m[(j, i)]).abs() > 1e-12)) {
                    return Err(Error::spec("rows", "matrix is not symmetric"));
                }
                Ok(m)
            }
        }
    }
}

/// Random symmetric positive definite matrix with eigenvalues drawn uniformly
/// from `[eig_lo, eig_hi]` and eigenvectors from a Haar-distributed orthogonal
/// matrix (QR of a Gaussian matrix with a sign-fixed diagonal).
pub fn random_spd(d: usize, eig_lo: f64, eig_hi: f64, seed: u64) -> Result<DMatrix<f64>> {
    if !(eig_lo > 0.0 && eig_lo <= eig_hi && eig_hi.is_finite()) {
        return Err(Error::spec(
            "eig_lo",
            format!("need 0 < eig_lo <= eig_hi, got [{eig_lo}, {eig_hi}]"),
        ));
    }
    let mut rng = stream_rng(seed, 0);
    let eig: Vec<f64> = (0..d)
        .map(|_| {
            if eig_hi > eig_lo {
                rng.random_range(eig_lo..=eig_hi)
            } else {
                eig_lo
            }
        })
        .collect();
    let g = DMatrix::from_fn(d, d, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    let a = &q * DMatrix::from_diagonal(&DVector::from_vec(eig)) * q.transpose();
    Ok((&a + a.transpose()) * 0.5)
}

/// AR(1)-style correlation matrix with entries `(s·base)^|i-j|`.
pub fn tapering_corr(d: usize, base: f64, sign: TaperSign) -> Result<DMatrix<f64>> {
    if !(base.abs() < 1.0) {
        return Err(Error::spec("base", format!("|base| must be < 1, got {base}")));
    }
    let rho = match sign {
        TaperSign::Positive => base,
        TaperSign::Negative => -base,
    };
    let m = DMatrix::from_fn(d, d, |i, j| rho.powi(i.abs_diff(j) as i32));
    if m.clone().cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum Family {
    Gaussian {
        mean: Vec<f64>,
        cov: CovSpec,
    },
    GammaCopula {
        shape: Vec<f64>,
        rate: Vec<f64>,
        corr: CovSpec,
    },
    ExponentialCopula {
        rate: Vec<f64>,
        corr: CovSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    #[serde(flatten)]
    pub family: Family,
}

/// A finite mixture `Σ w_a F_a` in `dim` dimensions, optionally zero-inflated
/// coordinate by coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpec {
    pub dim: usize,
    pub components: Vec<Component>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zero_inflation: Option<Vec<f64>>,
}

/// The pair of mixtures that generate the X and Y samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub x: MixtureSpec,
    pub y: MixtureSpec,
}

impl ScenarioSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: ScenarioSpec = toml::from_str(s).map_err(|e| Error::toml(s, e))?;
        spec.x.validate_at("x")?;
        spec.y.validate_at("y")?;
        if spec.x.dim != spec.y.dim {
            return Err(Error::spec(
                "y.dim",
                format!("x has dimension {} but y has {}", spec.x.dim, spec.y.dim),
            ));
        }
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }
}

fn check_len(path: String, v: &[f64], d: usize) -> Result<()> {
    if v.len() != d {
        return Err(Error::spec(path, format!("expected {d} values, got {}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::spec(path, "values must be finite"));
    }
    Ok(())
}

fn check_positive(path: String, v: &[f64], d: usize) -> Result<()> {
    check_len(path.clone(), v, d)?;
    if v.iter().any(|&x| x <= 0.0) {
        return Err(Error::spec(path, "values must be positive"));
    }
    Ok(())
}

impl MixtureSpec {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let spec: MixtureSpec = toml::from_str(s).map_err(|e| Error::toml(s, e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Io(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at("")
    }

    fn validate_at(&self, root: &str) -> Result<()> {
        let path = |s: &str| {
            if root.is_empty() {
                s.to_string()
            } else {
                format!("{root}.{s}")
            }
        };
        let d = self.dim;
        if d == 0 {
            return Err(Error::spec(path("dim"), "must be at least 1"));
        }
        if self.components.is_empty() {
            return Err(Error::spec(path("components"), "at least one component is required"));
        }
        let mut total = 0.0;
        for (a, c) in self.components.iter().enumerate() {
            let at = |f: &str| path(&format!("components[{a}].{f}"));
            if !(c.weight > 0.0 && c.weight <= 1.0) {
                return Err(Error::spec(at("weight"), "must lie in (0, 1]"));
            }
            total += c.weight;
            let cov = match &c.family {
                Family::Gaussian { mean, cov } => {
                    check_len(at("mean"), mean, d)?;
                    (cov, "cov")
                }
                Family::GammaCopula { shape, rate, corr } => {
                    check_positive(at("shape"), shape, d)?;
                    check_positive(at("rate"), rate, d)?;
                    (corr, "corr")
                }
                Family::ExponentialCopula { rate, corr } => {
                    check_positive(at("rate"), rate, d)?;
                    (corr, "corr")
                }
            };
            let m = cov.0.matrix(d).map_err(|e| match e {
                Error::InvalidSpec { path: p, msg } => Error::spec(at(&format!("{}.{p}", cov.1)), msg),
                Error::NotPositiveDefinite => Error::spec(at(cov.1), "not positive definite"),
                other => other,
            })?;
            if m.cholesky().is_none() {
                return Err(Error::spec(at(cov.1), "not positive definite"));
            }
        }
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::spec(
                path("components"),
                format!("weights sum to {total}, expected 1"),
            ));
        }
        if let Some(p) = &self.zero_inflation {
            check_len(path("zero_inflation"), p, d)?;
            if p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                return Err(Error::spec(path("zero_inflation"), "probabilities must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Draws `count` rows. Output depends only on `(self, count, seed)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<PointCloud> {
        MixtureSampler::new(self)?.sample(count, seed)
    }
}

enum Margin {
    Gaussian { mean: Vec<f64> },
    Gamma { shape: Vec<f64>, rate: Vec<f64> },
    Exponential { rate: Vec<f64> },
}

struct CompiledComponent {
    chol: DMatrix<f64>,
    margin: Margin,
}

/// A [`MixtureSpec`] with its covariance factors precomputed.
pub struct MixtureSampler {
    dim: usize,
    cumulative: Vec<f64>,
    components: Vec<CompiledComponent>,
    zero_inflation: Option<Vec<f64>>,
}

impl MixtureSampler {
    pub fn new(spec: &MixtureSpec) -> Result<Self> {
        spec.validate()?;
        let d = spec.dim;
        let mut cumulative = Vec::with_capacity(spec.components.len());
        let mut acc = 0.0;
        let mut components = Vec::with_capacity(spec.components.len());
        for c in &spec.components {
            acc += c.weight;
            cumulative.push(acc);
            let (cov, margin) = match &c.family {
                Family::Gaussian { mean, cov } => (cov, Margin::Gaussian { mean: mean.clone() }),
                Family::GammaCopula { shape, rate, corr } => (
                    corr,
                    Margin::Gamma {
                        shape: shape.clone(),
                        rate: rate.clone(),
                    },
                ),
                Family::ExponentialCopula { rate, corr } => (corr, Margin::Exponential { rate: rate.clone() }),
            };
            let chol = cov.matrix(d)?.cholesky().ok_or(Error::NotPositiveDefinite)?.l();
            components.push(CompiledComponent { chol, margin });
        }
        // guard against the last cumulative weight landing just under 1
        if let Some(last) = cumulative.last_mut() {
            *last = f64::INFINITY;
        }
        Ok(Self {
            dim: d,
            cumulative,
            components,
            zero_inflation: spec.zero_inflation.clone(),
        })
    }

    fn draw_row(&self, rng: &mut impl Rng, out: &mut [f64]) {
        let d = self.dim;
        let u: f64 = rng.random();
        let a = self.cumulative.iter().position(|&c| u < c).unwrap_or(0);
        let comp = &self.components[a];
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            let mut z = 0.0;
            for (j, e) in eps.iter().enumerate().take(i + 1) {
                z += comp.chol[(i, j)] * e;
            }
            *o = match &comp.margin {
                Margin::Gaussian { mean } => mean[i] + z,
                Margin::Gamma { shape, rate } => gamma_quantile(shape[i], normal_cdf(z), normal_cdf(-z)) / rate[i],
                Margin::Exponential { rate } => -normal_cdf(-z).ln() / rate[i],
            };
        }
        if let Some(p) = &self.zero_inflation {
            for (o, &pj) in out.iter_mut().zip(p) {
                // always consume a uniform so streams stay aligned across specs
                let v: f64 = rng.random();
                if v < pj {
                    *o = 0.0;
                }
            }
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<PointCloud> {
        if count == 0 {
            return Err(Error::InvalidConfig("sample count must be positive".into()));
        }
        let d = self.dim;
        let mut data = vec![0.0; count * d];
        data.par_chunks_mut(ROW_CHUNK * d).enumerate().for_each(|(c, chunk)| {
            let mut rng = stream_rng(seed, c as u64);
            for row in chunk.chunks_exact_mut(d) {
                self.draw_row(&mut rng, row);
            }
        });
        PointCloud::new(data, count, d)
    }
}
