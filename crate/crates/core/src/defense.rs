//! Input-sanitizing defenses. Both return a subset of the input points in
//! their original order; coordinates are never modified.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::spectral::nearest_indices;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SorConfig {
    pub k_neighbors: usize,
    pub alpha: f64,
    /// Drop this fraction of highest-scoring points instead of thresholding.
    pub drop_ratio: Option<f64>,
}

impl Default for SorConfig {
    fn default() -> Self {
        Self { k_neighbors: 2, alpha: 1.1, drop_ratio: None }
    }
}

impl SorConfig {
    pub fn with_drop_ratio(ratio: f64) -> Self {
        Self { drop_ratio: Some(ratio), ..Self::default() }
    }
}

/// Mean Euclidean distance from each point to its `k` nearest neighbours.
pub fn sor_scores(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let pts = cloud.points();
    if k == 0 {
        return Err(Error::InvalidConfig(String::from("SOR needs k >= 1")));
    }
    if pts.len() <= k {
        return Err(Error::TooFewPoints { requested: k + 1, available: pts.len() });
    }
    Ok((0..pts.len())
        .map(|i| {
            let sum: f64 = nearest_indices(pts, i, k)
                .into_iter()
                .map(|j| libm::sqrt(crate::linalg::dist2(&pts[i], &pts[j])))
                .sum();
            sum / k as f64
        })
        .collect())
}

/// Statistical outlier removal.
///
/// Threshold mode drops points whose score exceeds `μ + α·σ` over all
/// scores. Ratio mode drops the `⌈ratio·n⌉` highest scores; among equal
/// scores the lower index survives.
pub fn sor_defense(cloud: &PointCloud, config: &SorConfig) -> Result<PointCloud> {
    if !(config.alpha > 0.0) {
        return Err(Error::InvalidConfig(format!("SOR alpha {} must be positive", config.alpha)));
    }
    let scores = sor_scores(cloud, config.k_neighbors)?;
    let n = scores.len();
    let keep: Vec<usize> = match config.drop_ratio {
        Some(ratio) => {
            if !(0.0..1.0).contains(&ratio) {
                return Err(Error::InvalidConfig(format!("drop ratio {ratio} outside [0, 1)")));
            }
            let drop = libm::ceil(ratio * n as f64) as usize;
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(b.cmp(&a)));
            let mut keep: Vec<usize> = order[drop.min(n)..].to_vec();
            keep.sort_unstable();
            keep
        }
        None => {
            let mean = scores.iter().sum::<f64>() / n as f64;
            let var = scores.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
            let threshold = mean + config.alpha * libm::sqrt(var);
            (0..n).filter(|&i| scores[i] <= threshold).collect()
        }
    };
    if keep.is_empty() {
        return Err(Error::EmptyCloud);
    }
    cloud.select(&keep)
}

/// Simple random sampling: keeps a uniform random subset of
/// `n - drop_count` points.
pub fn srs_defense(cloud: &PointCloud, drop_count: usize, seed: u64) -> Result<PointCloud> {
    let n = cloud.len();
    if drop_count >= n {
        return Err(Error::BadCount { count: drop_count, n });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = index::sample(&mut rng, n, n - drop_count).into_vec();
    keep.sort_unstable();
    cloud.select(&keep)
}
