//! Point-cloud data model, normalization and subsampling.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::Point;

/// An `n×3` set of finite coordinates with an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
    label: Option<usize>,
    name: Option<String>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if let Some(index) = points.iter().position(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { points, label: None, name: None })
    }

    pub fn with_label(mut self, label: usize) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    pub fn set_label(&mut self, label: Option<usize>) {
        self.label = label;
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false for a constructed cloud; present for API symmetry.
    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn centroid(&self) -> Point {
        centroid(&self.points)
    }

    /// Same label and name, new coordinates.
    pub fn with_points(&self, points: Vec<Point>) -> Result<Self> {
        let mut out = Self::new(points)?;
        out.label = self.label;
        out.name = self.name.clone();
        Ok(out)
    }

    /// Keeps the points at `indices`, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        self.with_points(indices.iter().map(|&i| self.points[i]).collect())
    }
}

pub(crate) fn centroid(points: &[Point]) -> Point {
    let mut c = [0.0; 3];
    for p in points {
        for k in 0..3 {
            c[k] += p[k];
        }
    }
    let n = points.len().max(1) as f64;
    [c[0] / n, c[1] / n, c[2] / n]
}

/// Centers the cloud at the origin and scales it so the farthest point has
/// norm 1. A cloud whose points all coincide maps to the origin.
pub fn normalize_unit_ball(cloud: &PointCloud) -> PointCloud {
    let c = cloud.centroid();
    let mut pts: Vec<Point> = cloud
        .points
        .iter()
        .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
        .collect();
    let radius = pts.iter().map(norm).fold(0.0f64, f64::max);
    // Coincident input leaves only round-off after centering.
    let extent = cloud.points.iter().map(norm).fold(0.0f64, f64::max);
    if radius <= 1e-12 * extent.max(1.0) {
        pts.iter_mut().for_each(|p| *p = [0.0; 3]);
    } else {
        for p in &mut pts {
            for v in p.iter_mut() {
                *v /= radius;
            }
        }
    }
    PointCloud { points: pts, label: cloud.label, name: cloud.name.clone() }
}

/// Uniform random subsample of `n` points without replacement.
///
/// The survivors keep their original relative order, so `n == cloud.len()`
/// returns the input unchanged.
pub fn sample_points(cloud: &PointCloud, n: usize, seed: u64) -> Result<PointCloud> {
    let available = cloud.len();
    if n > available {
        return Err(Error::TooFewPoints { requested: n, available });
    }
    if n == 0 {
        return Err(Error::EmptyCloud);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, available, n).into_vec();
    picked.sort_unstable();
    cloud.select(&picked)
}
