//! Lloyd's k-means with k-means++ seeding, and the prediction-strength
//! estimate of the number of clusters.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{squared_distance, PointCloud};
use crate::seeds::{derive_seed, stream_rng};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Independent initializations; the one with the lowest inertia wins.
    pub n_init: usize,
    /// Re-seedings allowed per initialization when a cluster empties.
    pub max_restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        Self {
            max_iter: 100,
            n_init: 3,
            max_restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub k: usize,
    pub d: usize,
    /// `k × d`, row major.
    pub centroids: Vec<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
}

impl KMeansFit {
    pub fn centroid(&self, a: usize) -> &[f64] {
        &self.centroids[a * self.d..(a + 1) * self.d]
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &a in &self.assignments {
            sizes[a] += 1;
        }
        sizes
    }

    /// Index of the nearest centroid; ties go to the lower index.
    pub fn classify(&self, point: &[f64]) -> usize {
        nearest(&self.centroids, self.d, point).0
    }
}

fn nearest(centroids: &[f64], d: usize, point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (a, c) in centroids.chunks_exact(d).enumerate() {
        let dist = squared_distance(c, point);
        if dist < best.1 {
            best = (a, dist);
        }
    }
    best
}

fn plus_plus_init(x: &PointCloud, k: usize, rng: &mut impl Rng) -> Vec<f64> {
    let (n, d) = (x.n(), x.d());
    let mut centroids = Vec::with_capacity(k * d);
    centroids.extend_from_slice(x.row(rng.random_range(0..n)));
    let mut dist: Vec<f64> = x.rows().map(|r| squared_distance(r, &centroids[..d])).collect();
    for _ in 1..k {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &w) in dist.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        let start = centroids.len();
        centroids.extend_from_slice(x.row(pick));
        for (i, r) in x.rows().enumerate() {
            dist[i] = dist[i].min(squared_distance(r, &centroids[start..]));
        }
    }
    centroids
}

/// One Lloyd run from a k-means++ start. `None` if a cluster empties.
fn lloyd(x: &PointCloud, k: usize, max_iter: usize, rng: &mut impl Rng) -> Option<KMeansFit> {
    let (n, d) = (x.n(), x.d());
    let mut centroids = plus_plus_init(x, k, rng);
    let mut assignments = vec![usize::MAX; n];
    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, r) in x.rows().enumerate() {
            let a = nearest(&centroids, d, r).0;
            if assignments[i] != a {
                assignments[i] = a;
                changed = true;
            }
        }
        let mut sums = vec![0.0; k * d];
        let mut counts = vec![0usize; k];
        for (i, r) in x.rows().enumerate() {
            let a = assignments[i];
            counts[a] += 1;
            for (s, v) in sums[a * d..(a + 1) * d].iter_mut().zip(r) {
                *s += v;
            }
        }
        if counts.contains(&0) {
            return None;
        }
        for a in 0..k {
            for j in 0..d {
                centroids[a * d + j] = sums[a * d + j] / counts[a] as f64;
            }
        }
        if !changed {
            break;
        }
    }
    // final assignment against the final centroids
    let mut inertia = 0.0;
    let mut counts = vec![0usize; k];
    for (i, r) in x.rows().enumerate() {
        let (a, dist) = nearest(&centroids, d, r);
        assignments[i] = a;
        counts[a] += 1;
        inertia += dist;
    }
    if counts.contains(&0) {
        return None;
    }
    Some(KMeansFit {
        k,
        d,
        centroids,
        assignments,
        inertia,
    })
}

/// Deterministic k-means given `seed`.
pub fn kmeans(x: &PointCloud, k: usize, seed: u64, cfg: &KMeansConfig) -> Result<KMeansFit> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if x.n() < k {
        return Err(Error::TooFewPoints { got: x.n(), needed: k });
    }
    let mut best: Option<KMeansFit> = None;
    for init in 0..cfg.n_init.max(1) {
        for restart in 0..=cfg.max_restarts {
            let mut rng = stream_rng(derive_seed(seed, &[init as u64]), restart as u64);
            if let Some(fit) = lloyd(x, k, cfg.max_iter, &mut rng) {
                if best.as_ref().is_none_or(|b| fit.inertia < b.inertia) {
                    best = Some(fit);
                }
                break;
            }
        }
    }
    best.ok_or(Error::EmptyClusterUnrecoverable {
        k,
        restarts: cfg.max_restarts,
    })
}

/// Prediction strength of `k` clusters for a train/test split.
///
/// Test points are classified by the training centroids; for each test
/// cluster with at least two members, the fraction of its ordered pairs that
/// land in the same training class is computed, and the minimum is returned.
/// A failed clustering of either half scores 0.
pub fn prediction_strength(train: &PointCloud, test: &PointCloud, k: usize, seed: u64, cfg: &KMeansConfig) -> f64 {
    if k == 1 {
        return 1.0;
    }
    let (fit_train, fit_test) = match (
        kmeans(train, k, derive_seed(seed, &[0]), cfg),
        kmeans(test, k, derive_seed(seed, &[1]), cfg),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        _ => return 0.0,
    };
    let mut tally = vec![0usize; k * k];
    for (i, r) in test.rows().enumerate() {
        tally[fit_test.assignments[i] * k + fit_train.classify(r)] += 1;
    }
    let mut strength = f64::INFINITY;
    for j in 0..k {
        let row = &tally[j * k..(j + 1) * k];
        let size: usize = row.iter().sum();
        if size < 2 {
            continue;
        }
        let same: usize = row.iter().map(|&c| c * c.saturating_sub(1)).sum();
        strength = strength.min(same as f64 / (size * (size - 1)) as f64);
    }
    if strength.is_finite() {
        strength
    } else {
        0.0
    }
}

/// Prediction-strength estimate of the number of clusters: the largest `k` in
/// `1..=kmax` whose strength reaches `threshold` on a random half split.
pub fn estimate_num_clusters(
    x: &PointCloud,
    kmax: usize,
    threshold: f64,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<usize> {
    estimate_num_clusters_averaged(x, kmax, threshold, 1, seed, cfg)
}

/// Like [`estimate_num_clusters`] with the strength averaged over `splits`
/// independent half splits. One split reproduces the single-split estimate.
pub fn estimate_num_clusters_averaged(
    x: &PointCloud,
    kmax: usize,
    threshold: f64,
    splits: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<usize> {
    Ok(averaged_strength_curve(x, kmax, splits, seed, cfg)?
        .iter()
        .rposition(|&ps| ps >= threshold)
        .map_or(1, |i| i + 1))
}

/// Mean prediction strength over `splits` half splits; split `j > 0` draws
/// from `derive_seed(seed, &[SPLIT_TAG, j])`.
pub fn averaged_strength_curve(
    x: &PointCloud,
    kmax: usize,
    splits: usize,
    seed: u64,
    cfg: &KMeansConfig,
) -> Result<Vec<f64>> {
    if splits == 0 {
        return Err(Error::InvalidConfig("at least one split is needed".into()));
    }
    let curves = (0..splits)
        .into_par_iter()
        .map(|j| {
            let s = if j == 0 {
                seed
            } else {
                derive_seed(seed, &[SPLIT_TAG, j as u64])
            };
            prediction_strength_curve(x, kmax, s, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..kmax)
        .map(|k| curves.iter().map(|c| c[k]).sum::<f64>() / splits as f64)
        .collect())
}

const SPLIT_TAG: u64 = 1 << 32;

/// Prediction strength for `k = 1..=kmax`.
pub fn prediction_strength_curve(x: &PointCloud, kmax: usize, seed: u64, cfg: &KMeansConfig) -> Result<Vec<f64>> {
    if kmax == 0 {
        return Err(Error::InvalidConfig("kmax must be at least 1".into()));
    }
    if x.n() < 2 * kmax {
        return Err(Error::TooFewPoints {
            got: x.n(),
            needed: 2 * kmax,
        });
    }
    let mut order: Vec<usize> = (0..x.n()).collect();
    order.shuffle(&mut stream_rng(seed, 0));
    let half = x.n() / 2;
    let mut train_idx = order[..half].to_vec();
    let mut test_idx = order[half..].to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    let train = x.select(&train_idx)?;
    let test = x.select(&test_idx)?;
    Ok((1..=kmax)
        .into_par_iter()
        .map(|k| prediction_strength(&train, &test, k, derive_seed(seed, &[k as u64]), cfg))
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn blobs(centers: &[Vec<f64>], per: usize, sd: f64, seed: u64) -> PointCloud {
        let mut rng = stream_rng(seed, 0);
        let mut rows = Vec::new();
        for c in centers {
            for _ in 0..per {
                rows.push(
                    c.iter()
                        .map(|&m| m + sd * rng.sample::<f64, _>(StandardNormal))
                        .collect::<Vec<_>>(),
                );
            }
        }
        PointCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let x = blobs(&[vec![1.0, 2.0]], 50, 1.0, 3);
        let fit = kmeans(&x, 1, 0, &KMeansConfig::default()).unwrap();
        let mean = x.column_means();
        assert!(fit.assignments.iter().all(|&a| a == 0));
        for j in 0..2 {
            assert!((fit.centroid(0)[j] - mean[j]).abs() < 1e-12);
        }
    }

    #[test]
    fn each_point_its_own_class_when_k_equals_n() {
        let x = PointCloud::from_rows(&[[0.0], [5.0], [9.0], [20.0]]).unwrap();
        let fit = kmeans(&x, 4, 1, &KMeansConfig::default()).unwrap();
        assert_eq!(fit.sizes(), vec![1, 1, 1, 1]);
        assert_eq!(fit.inertia, 0.0);
    }

    #[test]
    fn coincident_points_cannot_fill_two_clusters() {
        let x = PointCloud::from_rows(&[[1.0, 1.0]; 6]).unwrap();
        assert!(matches!(
            kmeans(&x, 2, 0, &KMeansConfig::default()),
            Err(Error::EmptyClusterUnrecoverable { k: 2, restarts: 10 })
        ));
        assert!(matches!(
            kmeans(&x, 7, 0, &KMeansConfig::default()),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn separated_blobs_recovered() {
        let x = blobs(&[vec![10.0; 3], vec![-10.0; 3]], 100, 1.0, 7);
        let fit = kmeans(&x, 2, 5, &KMeansConfig::default()).unwrap();
        let mut sizes = fit.sizes();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![100, 100]);
        // rows 0..100 share a class
        assert!(fit.assignments[..100].iter().all(|&a| a == fit.assignments[0]));
    }

    #[test]
    fn kmeans_is_deterministic() {
        let x = blobs(&[vec![0.0, 0.0], vec![3.0, 3.0], vec![0.0, 6.0]], 40, 1.0, 2);
        let cfg = KMeansConfig::default();
        assert_eq!(kmeans(&x, 3, 9, &cfg).unwrap(), kmeans(&x, 3, 9, &cfg).unwrap());
    }

    #[test]
    fn estimate_on_identical_points_is_one() {
        let x = PointCloud::from_rows(&[[2.0, 2.0]; 10]).unwrap();
        assert_eq!(
            estimate_num_clusters(&x, 5, 0.8, 1, &KMeansConfig::default()).unwrap(),
            1
        );
        assert!(matches!(
            estimate_num_clusters(&x, 6, 0.8, 1, &KMeansConfig::default()),
            Err(Error::TooFewPoints { got: 10, needed: 12 })
        ));
    }

    #[test]
    fn estimate_finds_separated_clusters() {
        let x = blobs(
            &[vec![0.0, 0.0], vec![20.0, 0.0], vec![0.0, 20.0], vec![20.0, 20.0]],
            100,
            1.0,
            4,
        );
        assert_eq!(
            estimate_num_clusters(&x, 8, 0.8, 3, &KMeansConfig::default()).unwrap(),
            4
        );
    }

    #[test]
    fn estimate_on_single_gaussian_is_one() {
        let x = blobs(&[vec![0.0; 2]], 500, 1.0, 12);
        assert_eq!(
            estimate_num_clusters(&x, 5, 0.8, 8, &KMeansConfig::default()).unwrap(),
            1
        );
    }

    #[test]
    fn one_split_average_is_the_single_curve() {
        let x = blobs(&[vec![0.0, 0.0], vec![6.0, 0.0]], 40, 1.0, 8);
        let cfg = KMeansConfig::default();
        let single = prediction_strength_curve(&x, 4, 21, &cfg).unwrap();
        assert_eq!(averaged_strength_curve(&x, 4, 1, 21, &cfg).unwrap(), single);
        assert_eq!(
            estimate_num_clusters_averaged(&x, 4, 0.8, 1, 21, &cfg).unwrap(),
            estimate_num_clusters(&x, 4, 0.8, 21, &cfg).unwrap()
        );
        let avg = averaged_strength_curve(&x, 4, 5, 21, &cfg).unwrap();
        let manual: Vec<f64> = (0..4)
            .map(|k| {
                (0..5u64)
                    .map(|j| {
                        let s = if j == 0 { 21 } else { derive_seed(21, &[SPLIT_TAG, j]) };
                        prediction_strength_curve(&x, 4, s, &cfg).unwrap()[k]
                    })
                    .sum::<f64>()
                    / 5.0
            })
            .collect();
        assert_eq!(avg, manual);
        assert!(averaged_strength_curve(&x, 4, 0, 21, &cfg).is_err());
    }
}
