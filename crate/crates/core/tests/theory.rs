use hetero2st::datagen::{experiment_spec, Experiment};
use hetero2st::edgecount::{count_edges, wec_statistic};
use hetero2st::geometry::{build_lmst, pairwise_distances, LabeledGraph, PointCloud};
use hetero2st::seeds::{derive_seed, stream_rng};
use hetero2st::theory::*;
use rand::Rng;
use rand_distr::StandardNormal;

fn uniform_cloud(n: usize, d: usize, shift: f64, seed: u64) -> PointCloud {
    let mut rng = stream_rng(seed, 0);
    let data = (0..n * d).map(|_| shift + rng.random::<f64>()).collect();
    PointCloud::new(data, n, d).unwrap()
}

fn truncated_normal_cloud(n: usize, mu: f64, sd: f64, seed: u64) -> PointCloud {
    let mut rng = stream_rng(seed, 0);
    let mut data = Vec::with_capacity(n);
    while data.len() < n {
        let v = mu + sd * rng.sample::<f64, _>(StandardNormal);
        if (0.0..=1.0).contains(&v) {
            data.push(v);
        }
    }
    PointCloud::new(data, n, 1).unwrap()
}

#[test]
fn estimate_of_identical_uniforms_is_near_one() {
    let x = uniform_cloud(2000, 2, 0.0, 1);
    let y = uniform_cloud(2000, 2, 0.0, 2);
    let d = hp_divergence_estimate(&x, &y, 1).unwrap();
    assert!((0.9..=1.1).contains(&d), "{d}");
}

#[test]
fn estimate_of_disjoint_samples_is_near_two() {
    let x = uniform_cloud(2000, 2, 0.0, 3);
    let y = uniform_cloud(2000, 2, 100.0, 4);
    let d = hp_divergence_estimate(&x, &y, 1).unwrap();
    assert!(d >= 1.8, "{d}");
    let f = Density1D::uniform(0.0, 1.0).unwrap();
    let g = Density1D::uniform(100.0, 101.0).unwrap();
    assert!((hp_divergence_quadrature(&f, &g, 1.0).unwrap() - 2.0).abs() < 1e-6);
}

#[test]
fn estimate_is_invariant_under_swap() {
    let x = uniform_cloud(600, 1, 0.0, 5);
    let y = truncated_normal_cloud(200, 0.5, 0.2, 6);
    let a = hp_divergence_estimate(&x, &y, 3).unwrap();
    let b = hp_divergence_estimate(&y, &x, 3).unwrap();
    assert!((a - b).abs() < 1e-12 * a);
    let f = Density1D::uniform(0.0, 1.0).unwrap();
    let g = Density1D::truncated_normal(0.5, 0.2, 0.0, 1.0).unwrap();
    let q_ab = hp_divergence_quadrature(&f, &g, 3.0).unwrap();
    let q_ba = hp_divergence_quadrature(&g, &f, 1.0 / 3.0).unwrap();
    assert!((q_ab - q_ba).abs() < 2e-6);
    assert!((a - q_ab).abs() < 0.15, "{a} vs {q_ab}");
}

#[test]
fn plug_in_error_shrinks_with_n() {
    // f_X = U[0,1], f_Y = N(0.5, 0.2²) restricted to [0,1], ρ = 2
    let f = Density1D::uniform(0.0, 1.0).unwrap();
    let g = Density1D::truncated_normal(0.5, 0.2, 0.0, 1.0).unwrap();
    let truth = hp_divergence_quadrature(&f, &g, 2.0).unwrap();
    let sizes = [200usize, 800, 3200];
    let reps = 6;
    let errors: Vec<f64> = sizes
        .iter()
        .map(|&n| {
            (0..reps)
                .map(|r| {
                    let seed = derive_seed(77, &[n as u64, r]);
                    let x = uniform_cloud(n, 1, 0.0, derive_seed(seed, &[0]));
                    let y = truncated_normal_cloud(n / 2, 0.5, 0.2, derive_seed(seed, &[1]));
                    (hp_divergence_estimate(&x, &y, 1).unwrap() - truth).abs()
                })
                .sum::<f64>()
                / reps as f64
        })
        .collect();
    let lx: Vec<f64> = sizes.iter().map(|&n| (n as f64).ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let mx = lx.iter().sum::<f64>() / 3.0;
    let my = ly.iter().sum::<f64>() / 3.0;
    let slope = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>()
        / lx.iter().map(|a| (a - mx) * (a - mx)).sum::<f64>();
    assert!(slope < 0.0, "errors {errors:?}, slope {slope}");
}

#[test]
fn gamma_cutoff_holds_under_mixture_null() {
    // four equally weighted components, Y reweighted to 0.1/0.8/0.1/0
    let spec = experiment_spec("fig1-case2").unwrap();
    assert_eq!(spec.experiment, Experiment::Fig1Case2);
    let (n, m, ell) = (4000, 400, 5);
    let gamma = gamma_cutoff(&AsymptoticParams {
        ell,
        rho: n as f64 / m as f64,
        k: 4,
        l_bound: 0.25,
        m1: 1.0,
        m2: 1.0,
    });
    let reps = 10;
    let mut above = 0;
    for r in 0..reps {
        let x = spec.scenario.x.sample(n, derive_seed(31, &[r, 0])).unwrap();
        let y = spec.scenario.y.sample(m, derive_seed(31, &[r, 1])).unwrap();
        let g = LabeledGraph::pooled(build_lmst(&pairwise_distances(&x, &y).unwrap(), ell).unwrap(), n).unwrap();
        if wec_statistic(&count_edges(&g).unwrap(), n, m) > gamma {
            above += 1;
        }
    }
    assert!(above as f64 / reps as f64 <= 0.05);
}
