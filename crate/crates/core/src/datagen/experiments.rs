//! Named simulation settings: the three experiments (two scenarios each) and
//! the two motivating figure examples (three cases each).
//!
//! Experiments 1 and 3 contain randomly drawn pieces (covariance matrices,
//! zero-inflation probabilities). These are redrawn from the seed passed to
//! [`Experiment::scenario`], so each replication gets a fresh instance.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Component, CovSpec, Family, MixtureSpec, ScenarioSpec, TaperSign};
use crate::error::{Error, Result};
use crate::seeds::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

impl GridCell {
    pub const fn new(n: usize, m: usize, d: usize) -> Self {
        Self { n, m, d }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Exp1S1,
    Exp1S2,
    Exp2S1,
    Exp2S2,
    Exp3S1,
    Exp3S2,
    Fig1Case1,
    Fig1Case2,
    Fig1Case3,
    Fig2Case1,
    Fig2Case2,
    Fig2Case3,
}

const ALL: [Experiment; 12] = [
    Experiment::Exp1S1,
    Experiment::Exp1S2,
    Experiment::Exp2S1,
    Experiment::Exp2S2,
    Experiment::Exp3S1,
    Experiment::Exp3S2,
    Experiment::Fig1Case1,
    Experiment::Fig1Case2,
    Experiment::Fig1Case3,
    Experiment::Fig2Case1,
    Experiment::Fig2Case2,
    Experiment::Fig2Case3,
];

pub fn experiment_names() -> Vec<&'static str> {
    ALL.iter().map(|e| e.name()).collect()
}

/// A concrete instance of a named setting at one grid cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    pub cell: GridCell,
    pub scenario: ScenarioSpec,
}

/// The setting `name` at its first grid cell, instantiated with seed 0.
pub fn experiment_spec(name: &str) -> Result<ExperimentSpec> {
    let experiment = Experiment::from_name(name)?;
    let cell = experiment.grid()[0];
    Ok(ExperimentSpec {
        experiment,
        cell,
        scenario: experiment.scenario(cell.d, 0)?,
    })
}

fn two_by_three(m_small: usize, m_large: usize) -> Vec<GridCell> {
    let mut cells = Vec::with_capacity(6);
    for (n, m) in [(500, m_small), (2000, m_large)] {
        for d in [5, 15, 30] {
            cells.push(GridCell::new(n, m, d));
        }
    }
    cells
}

impl Experiment {
    pub fn all() -> &'static [Experiment] {
        &ALL
    }

    pub fn from_name(name: &str) -> Result<Self> {
        ALL.iter()
            .copied()
            .find(|e| e.name() == name)
            .ok_or_else(|| Error::UnknownExperiment(name.to_string()))
    }

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Exp1S1 => "exp1-s1",
            Experiment::Exp1S2 => "exp1-s2",
            Experiment::Exp2S1 => "exp2-s1",
            Experiment::Exp2S2 => "exp2-s2",
            Experiment::Exp3S1 => "exp3-s1",
            Experiment::Exp3S2 => "exp3-s2",
            Experiment::Fig1Case1 => "fig1-case1",
            Experiment::Fig1Case2 => "fig1-case2",
            Experiment::Fig1Case3 => "fig1-case3",
            Experiment::Fig2Case1 => "fig2-case1",
            Experiment::Fig2Case2 => "fig2-case2",
            Experiment::Fig2Case3 => "fig2-case3",
        }
    }

    /// Whether `F_Y` lies in the mixture family generated by `F_X`.
    pub fn null_holds(self) -> bool {
        !matches!(
            self,
            Experiment::Exp1S2
                | Experiment::Exp2S2
                | Experiment::Exp3S2
                | Experiment::Fig1Case3
                | Experiment::Fig2Case3
        )
    }

    pub fn grid(self) -> Vec<GridCell> {
        match self {
            Experiment::Exp1S1 | Experiment::Exp1S2 | Experiment::Exp2S1 | Experiment::Exp3S1 => two_by_three(50, 200),
            Experiment::Exp2S2 => two_by_three(25, 100),
            Experiment::Exp3S2 => two_by_three(10, 40),
            Experiment::Fig1Case1 | Experiment::Fig1Case2 | Experiment::Fig1Case3 => {
                vec![GridCell::new(2000, 200, 2)]
            }
            Experiment::Fig2Case1 | Experiment::Fig2Case2 | Experiment::Fig2Case3 => {
                vec![GridCell::new(2000, 200, 3)]
            }
        }
    }

    /// Dimension is fixed for the figure examples.
    pub fn fixed_dim(self) -> Option<usize> {
        match self {
            Experiment::Fig1Case1 | Experiment::Fig1Case2 | Experiment::Fig1Case3 => Some(2),
            Experiment::Fig2Case1 | Experiment::Fig2Case2 | Experiment::Fig2Case3 => Some(3),
            _ => None,
        }
    }

    /// The pair `(F_X, F_Y)` in dimension `d`; `seed` drives the random pieces.
    pub fn scenario(self, d: usize, seed: u64) -> Result<ScenarioSpec> {
        if d == 0 {
            return Err(Error::InvalidConfig("dimension must be at least 1".into()));
        }
        if let Some(fixed) = self.fixed_dim() {
            if d != fixed {
                return Err(Error::InvalidConfig(format!(
                    "{} is defined only for d = {fixed}",
                    self.name()
                )));
            }
        }
        let (x, y) = match self {
            Experiment::Exp1S1 | Experiment::Exp1S2 => exp1(d, seed, self == Experiment::Exp1S2),
            Experiment::Exp2S1 => exp2_s1(d),
            Experiment::Exp2S2 => exp2_s2(d),
            Experiment::Exp3S1 | Experiment::Exp3S2 => exp3(d, seed, self == Experiment::Exp3S2),
            Experiment::Fig1Case1 | Experiment::Fig1Case2 | Experiment::Fig1Case3 => fig1(self),
            Experiment::Fig2Case1 | Experiment::Fig2Case2 | Experiment::Fig2Case3 => fig2(self),
        };
        let scenario = ScenarioSpec {
            name: Some(self.name().to_string()),
            x,
            y,
        };
        scenario.x.validate()?;
        scenario.y.validate()?;
        Ok(scenario)
    }
}

fn gaussian(weight: f64, mean: Vec<f64>, cov: CovSpec) -> Component {
    Component {
        weight,
        family: Family::Gaussian { mean, cov },
    }
}

fn mixture(dim: usize, components: Vec<Component>) -> MixtureSpec {
    MixtureSpec {
        dim,
        components,
        zero_inflation: None,
    }
}

fn exp1(d: usize, seed: u64, scaled: bool) -> (MixtureSpec, MixtureSpec) {
    let means = [vec![0.0; d], vec![-3.0; d], vec![3.0; d]];
    let covs: Vec<CovSpec> = (0..3u64)
        .map(|k| CovSpec::RandomSpd {
            eig_lo: 1.0,
            eig_hi: 10.0,
            seed: derive_seed(seed, &[1, k]),
            scale: 1.0,
        })
        .collect();
    let build = |weights: [f64; 3], last_scale: f64| {
        let comps = (0..3)
            .map(|k| {
                let mut cov = covs[k].clone();
                if k == 2 {
                    if let CovSpec::RandomSpd { scale, .. } = &mut cov {
                        *scale = last_scale;
                    }
                }
                gaussian(weights[k], means[k].clone(), cov)
            })
            .collect();
        mixture(d, comps)
    };
    let x = build([0.3, 0.3, 0.4], 1.0);
    let y = build([0.1, 0.1, 0.8], if scaled { 0.25 } else { 1.0 });
    (x, y)
}

fn gam(weight: f64, d: usize, rate: f64, corr: CovSpec) -> Component {
    Component {
        weight,
        family: Family::GammaCopula {
            shape: vec![5.0; d],
            rate: vec![rate; d],
            corr,
        },
    }
}

fn expo(weight: f64, d: usize, rate: f64, corr: CovSpec) -> Component {
    Component {
        weight,
        family: Family::ExponentialCopula {
            rate: vec![rate; d],
            corr,
        },
    }
}

fn sigma1() -> CovSpec {
    CovSpec::Tapering {
        base: 0.7,
        sign: TaperSign::Positive,
        scale: 1.0,
    }
}

fn sigma2() -> CovSpec {
    CovSpec::Tapering {
        base: 0.9,
        sign: TaperSign::Negative,
        scale: 1.0,
    }
}

fn exp2_x(d: usize) -> MixtureSpec {
    mixture(d, vec![gam(0.5, d, 1.0, sigma1()), expo(0.5, d, 1.0, sigma2())])
}

fn exp2_s1(d: usize) -> (MixtureSpec, MixtureSpec) {
    let y = mixture(d, vec![gam(0.05, d, 1.0, sigma1()), expo(0.95, d, 1.0, sigma2())]);
    (exp2_x(d), y)
}

fn exp2_s2(d: usize) -> (MixtureSpec, MixtureSpec) {
    let sigma3 = CovSpec::Tapering {
        base: 0.9,
        sign: TaperSign::Positive,
        scale: 0.25,
    };
    let y = mixture(d, vec![gam(0.8, d, 1.0, sigma1()), expo(0.2, d, 1.5, sigma3)]);
    (exp2_x(d), y)
}

/// Number of zero-inflated leading coordinates, `0.8·d` rounded.
pub fn inflated_coordinates(d: usize) -> usize {
    ((0.8 * d as f64).round() as usize).min(d)
}

fn exp3(d: usize, seed: u64, alternative: bool) -> (MixtureSpec, MixtureSpec) {
    let k = inflated_coordinates(d);
    let mut rng = stream_rng(derive_seed(seed, &[3]), 0);
    let p: Vec<f64> = (0..d)
        .map(|j| if j < k { rng.random_range(0.5..0.6) } else { 0.0 })
        .collect();
    let mut x = exp2_x(d);
    x.zero_inflation = Some(p.clone());
    let y = if alternative {
        let q: Vec<f64> = (0..d).map(|j| if j < k { 0.3 } else { 0.0 }).collect();
        let mut y = mixture(d, vec![gam(0.5, d, 1.5, sigma1()), expo(0.5, d, 1.0, sigma2())]);
        y.zero_inflation = Some(q);
        y
    } else {
        let mut y = mixture(d, vec![gam(0.2, d, 1.0, sigma1()), expo(0.8, d, 1.0, sigma2())]);
        y.zero_inflation = Some(p);
        y
    };
    (x, y)
}

fn fig1(case: Experiment) -> (MixtureSpec, MixtureSpec) {
    let means = [[10.0, 10.0], [20.0, 10.0], [20.0, 20.0], [10.0, 20.0]];
    let x = mixture(
        2,
        means
            .iter()
            .map(|mu| gaussian(0.25, mu.to_vec(), CovSpec::identity()))
            .collect(),
    );
    let y = match case {
        Experiment::Fig1Case1 => x.clone(),
        Experiment::Fig1Case2 => mixture(
            2,
            [0.1, 0.8, 0.1]
                .iter()
                .zip(&means)
                .map(|(&w, mu)| gaussian(w, mu.to_vec(), CovSpec::identity()))
                .collect(),
        ),
        _ => mixture(2, vec![gaussian(1.0, vec![25.0, 5.0], CovSpec::identity())]),
    };
    (x, y)
}

fn fig2(case: Experiment) -> (MixtureSpec, MixtureSpec) {
    let means = [[0.0, 0.0, 0.0], [0.0, -4.0, -4.0], [4.0, -2.0, -3.0]];
    let build = |weights: [f64; 3], scale: f64| {
        mixture(
            3,
            weights
                .iter()
                .zip(&means)
                .map(|(&w, mu)| gaussian(w, mu.to_vec(), CovSpec::IdentityScaled { scale }))
                .collect(),
        )
    };
    let x = build([0.3, 0.3, 0.4], 1.0);
    let y = match case {
        Experiment::Fig2Case1 => x.clone(),
        Experiment::Fig2Case2 => build([0.8, 0.1, 0.1], 1.0),
        _ => build([0.8, 0.1, 0.1], 0.1),
    };
    (x, y)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn weights(m: &MixtureSpec) -> Vec<f64> {
        m.components.iter().map(|c| c.weight).collect()
    }

    fn gaussian_parts(c: &Component) -> (&[f64], &CovSpec) {
        match &c.family {
            Family::Gaussian { mean, cov } => (mean, cov),
            other => panic!("expected gaussian, got {other:?}"),
        }
    }

    #[test]
    fn names_round_trip() {
        for name in experiment_names() {
            assert_eq!(Experiment::from_name(name).unwrap().name(), name);
        }
        assert_eq!(experiment_names().len(), 12);
        assert!(matches!(
            Experiment::from_name("exp4-s1"),
            Err(Error::UnknownExperiment(_))
        ));
    }

    #[test]
    fn exp1_parameters() {
        let s1 = Experiment::Exp1S1.scenario(5, 11).unwrap();
        assert_eq!(weights(&s1.x), vec![0.3, 0.3, 0.4]);
        assert_eq!(weights(&s1.y), vec![0.1, 0.1, 0.8]);
        let expected_means = [0.0, -3.0, 3.0];
        for (c, mu) in s1.x.components.iter().zip(expected_means) {
            let (mean, cov) = gaussian_parts(c);
            assert_eq!(mean, vec![mu; 5].as_slice());
            assert!(matches!(cov, CovSpec::RandomSpd { eig_lo, eig_hi, .. } if *eig_lo == 1.0 && *eig_hi == 10.0));
        }
        // same components in x and y for the null scenario
        for (a, b) in s1.x.components.iter().zip(&s1.y.components) {
            assert_eq!(a.family, b.family);
        }
        let s2 = Experiment::Exp1S2.scenario(5, 11).unwrap();
        let third_x = s2.x.components[2].family.clone();
        let third_y = s2.y.components[2].family.clone();
        match (third_x, third_y) {
            (
                Family::Gaussian {
                    cov: CovSpec::RandomSpd {
                        seed: sx, scale: kx, ..
                    },
                    ..
                },
                Family::Gaussian {
                    cov: CovSpec::RandomSpd {
                        seed: sy, scale: ky, ..
                    },
                    ..
                },
            ) => {
                assert_eq!(sx, sy);
                assert_eq!(kx, 1.0);
                assert_eq!(ky, 0.25);
            }
            other => panic!("{other:?}"),
        }
        // the covariance draws change with the replication seed
        let other = Experiment::Exp1S1.scenario(5, 12).unwrap();
        assert_ne!(other.x, s1.x);
    }

    #[test]
    fn exp2_parameters() {
        let s1 = Experiment::Exp2S1.scenario(5, 0).unwrap();
        assert_eq!(weights(&s1.x), vec![0.5, 0.5]);
        assert_eq!(weights(&s1.y), vec![0.05, 0.95]);
        match &s1.x.components[0].family {
            Family::GammaCopula { shape, rate, corr } => {
                assert_eq!(shape, &vec![5.0; 5]);
                assert_eq!(rate, &vec![1.0; 5]);
                assert_eq!(corr, &sigma1());
            }
            other => panic!("{other:?}"),
        }
        let s2 = Experiment::Exp2S2.scenario(5, 0).unwrap();
        assert_eq!(weights(&s2.y), vec![0.8, 0.2]);
        match &s2.y.components[1].family {
            Family::ExponentialCopula { rate, corr } => {
                assert_eq!(rate, &vec![1.5; 5]);
                assert_eq!(
                    corr,
                    &CovSpec::Tapering {
                        base: 0.9,
                        sign: TaperSign::Positive,
                        scale: 0.25
                    }
                );
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(
            Experiment::Exp2S2.grid().iter().map(|c| c.m).collect::<Vec<_>>(),
            vec![25, 25, 25, 100, 100, 100]
        );
    }

    #[test]
    fn exp3_zero_inflation() {
        let s1 = Experiment::Exp3S1.scenario(15, 4).unwrap();
        let p = s1.x.zero_inflation.clone().unwrap();
        assert_eq!(inflated_coordinates(15), 12);
        assert!(p[..12].iter().all(|&v| (0.5..0.6).contains(&v)));
        assert!(p[12..].iter().all(|&v| v == 0.0));
        assert_eq!(s1.y.zero_inflation.as_ref(), Some(&p));
        assert_eq!(weights(&s1.y), vec![0.2, 0.8]);

        let s2 = Experiment::Exp3S2.scenario(5, 4).unwrap();
        assert_eq!(s2.y.zero_inflation, Some(vec![0.3, 0.3, 0.3, 0.3, 0.0]));
        match &s2.y.components[0].family {
            Family::GammaCopula { rate, .. } => assert_eq!(rate, &vec![1.5; 5]),
            other => panic!("{other:?}"),
        }
        assert_eq!(Experiment::Exp3S2.grid()[0], GridCell::new(500, 10, 5));
    }

    #[test]
    fn figure_settings() {
        let c1 = Experiment::Fig1Case1.scenario(2, 0).unwrap();
        assert_eq!(c1.x, c1.y);
        assert_eq!(weights(&c1.x), vec![0.25; 4]);
        let c2 = Experiment::Fig1Case2.scenario(2, 0).unwrap();
        assert_eq!(weights(&c2.y), vec![0.1, 0.8, 0.1]);
        assert_eq!(gaussian_parts(&c2.y.components[1]).0, &[20.0, 10.0]);
        let c3 = Experiment::Fig1Case3.scenario(2, 0).unwrap();
        assert_eq!(c3.y.components.len(), 1);
        assert_eq!(gaussian_parts(&c3.y.components[0]).0, &[25.0, 5.0]);

        let f1 = Experiment::Fig2Case1.scenario(3, 0).unwrap();
        assert_eq!(f1.x, f1.y);
        assert_eq!(gaussian_parts(&f1.x.components[2]).0, &[4.0, -2.0, -3.0]);
        let f3 = Experiment::Fig2Case3.scenario(3, 0).unwrap();
        assert_eq!(weights(&f3.y), vec![0.8, 0.1, 0.1]);
        assert_eq!(
            gaussian_parts(&f3.y.components[0]).1,
            &CovSpec::IdentityScaled { scale: 0.1 }
        );
        assert!(Experiment::Fig2Case3.scenario(4, 0).is_err());
    }

    #[test]
    fn experiment_spec_uses_first_cell() {
        let e = experiment_spec("exp1-s1").unwrap();
        assert_eq!(e.cell, GridCell::new(500, 50, 5));
        assert_eq!(e.scenario.x.dim, 5);
        let x = e.scenario.x.sample(e.cell.n, 1).unwrap();
        assert_eq!((x.n(), x.d()), (500, 5));
    }
}
