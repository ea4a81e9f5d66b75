//! Graph spectral representation of point clouds.
//!
//! A point cloud is treated as three signals (x, y, z) living on the
//! vertices of an unweighted K-nearest-neighbour graph. The eigenvectors of
//! the combinatorial Laplacian `L = D - A` form an orthonormal basis; the
//! graph Fourier transform projects the signals onto it, and the inverse
//! transform reconstructs them exactly.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::Range;

use crate::cloud::PointCloud;
use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};
use crate::linalg::{dist2, mul_points, mul_points_transposed, Matrix};
use crate::Point;

/// Undirected, unweighted K-NN graph stored as sorted neighbour lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnnGraph {
    k: usize,
    neighbors: Vec<Vec<usize>>,
}

impl KnnGraph {
    /// Builds a graph from undirected edges over `n` vertices. Self loops
    /// and duplicates are dropped.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut neighbors = vec![Vec::new(); n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::DimensionMismatch { expected: n, found: a.max(b) + 1 });
            }
            if a != b {
                neighbors[a].push(b);
                neighbors[b].push(a);
            }
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        Ok(Self { k: 0, neighbors })
    }

    pub fn n(&self) -> usize {
        self.neighbors.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.neighbors[a].binary_search(&b).is_ok()
    }

    /// Each undirected edge once, as `(low, high)`.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, list) in self.neighbors.iter().enumerate() {
            out.extend(list.iter().filter(|&&j| j > i).map(|&j| (i, j)));
        }
        out
    }

    /// Dense 0/1 adjacency matrix.
    pub fn adjacency(&self) -> Matrix {
        let n = self.n();
        let mut a = Matrix::zeros(n, n);
        for (i, list) in self.neighbors.iter().enumerate() {
            for &j in list {
                a[(i, j)] = 1.0;
            }
        }
        a
    }

    /// Number of connected components.
    pub fn components(&self) -> usize {
        let n = self.n();
        let mut seen = vec![false; n];
        let mut count = 0;
        let mut stack = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            count += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(v) = stack.pop() {
                for &w in &self.neighbors[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
        }
        count
    }
}

/// Indices of the `k` nearest other points to `points[i]`, ties broken by
/// the smaller index.
pub(crate) fn nearest_indices(points: &[Point], i: usize, k: usize) -> Vec<usize> {
    let mut cand: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(j, q)| (dist2(&points[i], q), j))
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < cand.len() {
        cand.select_nth_unstable_by(k, by_key);
        cand.truncate(k);
    }
    cand.sort_unstable_by(by_key);
    cand.into_iter().map(|(_, j)| j).collect()
}

/// Connects each point to its `k` Euclidean nearest neighbours and
/// symmetrizes by union.
pub fn build_knn_graph(cloud: &PointCloud, k: usize) -> Result<KnnGraph> {
    let points = cloud.points();
    let n = points.len();
    if k == 0 || k >= n {
        return Err(Error::KTooLarge { k, n });
    }
    let mut neighbors = vec![Vec::with_capacity(k + 4); n];
    for i in 0..n {
        for j in nearest_indices(points, i, k) {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
    }
    for list in &mut neighbors {
        list.sort_unstable();
        list.dedup();
    }
    Ok(KnnGraph { k, neighbors })
}

/// Combinatorial Laplacian `D - A`.
pub fn laplacian(graph: &KnnGraph) -> Matrix {
    let n = graph.n();
    let mut l = Matrix::zeros(n, n);
    for i in 0..n {
        let list = graph.neighbors(i);
        l[(i, i)] = list.len() as f64;
        for &j in list {
            l[(i, j)] = -1.0;
        }
    }
    l
}

/// Orthonormal transform basis: column `i` of `vectors` pairs with
/// `eigenvalues[i]`, sorted ascending.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralBasis {
    vectors: Matrix,
    eigenvalues: Vec<f64>,
}

impl SpectralBasis {
    /// K-NN graph, Laplacian and eigendecomposition in one step.
    pub fn from_cloud(cloud: &PointCloud, k: usize) -> Result<Self> {
        eigendecompose(&laplacian(&build_knn_graph(cloud, k)?))
    }

    /// Orthonormal DCT-II basis over point-index order.
    ///
    /// This is the eigenbasis of the path-graph Laplacian, whose eigenvalues
    /// `2 - 2 cos(pi k / n)` are reported as the frequencies.
    pub fn dct(n: usize) -> Self {
        let mut vectors = Matrix::zeros(n, n);
        let nf = n as f64;
        for k in 0..n {
            let scale = if k == 0 { libm::sqrt(1.0 / nf) } else { libm::sqrt(2.0 / nf) };
            for j in 0..n {
                let angle = core::f64::consts::PI * (2 * j + 1) as f64 * k as f64 / (2.0 * nf);
                vectors[(j, k)] = scale * libm::cos(angle);
            }
        }
        let eigenvalues = (0..n)
            .map(|k| 2.0 - 2.0 * libm::cos(core::f64::consts::PI * k as f64 / nf))
            .collect();
        Self { vectors, eigenvalues }
    }

    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `n×n` matrix whose columns are the basis vectors.
    pub fn vectors(&self) -> &Matrix {
        &self.vectors
    }

    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }

    /// Forward transform `Uᵀ x`.
    pub fn gft(&self, signal: &[Point]) -> Result<SpectralCoeffs> {
        self.check(signal.len())?;
        Ok(SpectralCoeffs(mul_points_transposed(&self.vectors, signal)))
    }

    /// Inverse transform `U x̂`.
    pub fn igft(&self, coeffs: &SpectralCoeffs) -> Result<Vec<Point>> {
        self.check(coeffs.len())?;
        Ok(mul_points(&self.vectors, &coeffs.0))
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: len });
        }
        Ok(())
    }
}

/// Eigendecomposition of a symmetric Laplacian into a transform basis.
///
/// Eigenvalues are ascending; each eigenvector is flipped so that its
/// largest-magnitude entry (first one on ties) is positive.
pub fn eigendecompose(l: &Matrix) -> Result<SpectralBasis> {
    let n = l.rows();
    if l.cols() != n {
        return Err(Error::DimensionMismatch { expected: n, found: l.cols() });
    }
    let scale = l.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    if l.asymmetry() > 1e-10 * scale {
        return Err(Error::InvalidConfig(alloc::string::String::from("matrix is not symmetric")));
    }
    let (eigenvalues, mut vectors) = symmetric_eigen(l)?;
    for col in 0..n {
        let mut pivot = 0;
        let mut best = -1.0;
        for row in 0..n {
            let v = vectors[(row, col)].abs();
            if v > best {
                best = v;
                pivot = row;
            }
        }
        if vectors[(pivot, col)] < 0.0 {
            for row in 0..n {
                vectors[(row, col)] = -vectors[(row, col)];
            }
        }
    }
    Ok(SpectralBasis { vectors, eigenvalues })
}

/// Transform coefficients: row `i` holds the x/y/z coefficients of
/// frequency `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoeffs(pub Vec<Point>);

impl SpectralCoeffs {
    pub fn zeros(n: usize) -> Self {
        Self(vec![[0.0; 3]; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn rows(&self) -> &[Point] {
        &self.0
    }

    /// Squared sum over all three columns.
    pub fn energy(&self) -> f64 {
        self.0.iter().map(row_energy).sum()
    }

    /// Squared magnitude per frequency.
    pub fn energy_profile(&self) -> Vec<f64> {
        self.0.iter().map(row_energy).collect()
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        libm::sqrt(self.energy())
    }

    /// Entrywise sum.
    pub fn add(&self, other: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.zip_with(other, |a, b| a + b)
    }

    /// Entrywise difference.
    pub fn sub(&self, other: &SpectralCoeffs) -> Result<SpectralCoeffs> {
        self.zip_with(other, |a, b| a - b)
    }

    fn zip_with(&self, other: &SpectralCoeffs, f: impl Fn(f64, f64) -> f64) -> Result<SpectralCoeffs> {
        if self.len() != other.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: other.len() });
        }
        Ok(SpectralCoeffs(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| [f(a[0], b[0]), f(a[1], b[1]), f(a[2], b[2])])
                .collect(),
        ))
    }
}

fn row_energy(r: &Point) -> f64 {
    r[0] * r[0] + r[1] * r[1] + r[2] * r[2]
}

/// Low/mid/high partition of the frequency indices:
/// `[0, low_end)`, `[low_end, high_start)`, `[high_start, n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BandBounds {
    pub low_end: usize,
    pub high_start: usize,
}

impl BandBounds {
    pub fn new(low_end: usize, high_start: usize, n: usize) -> Result<Self> {
        if low_end > high_start || high_start > n {
            return Err(Error::BadRange { start: low_end, end: high_start, len: n });
        }
        Ok(Self { low_end, high_start })
    }

    /// Converts eigenvalue thresholds into index bounds: each band starts at
    /// the first frequency whose eigenvalue reaches its threshold.
    pub fn from_lambdas(lambda_low: f64, lambda_high: f64, eigenvalues: &[f64]) -> Result<Self> {
        if !(0.0..=lambda_high).contains(&lambda_low) {
            return Err(Error::InvalidConfig(alloc::format!(
                "band thresholds {lambda_low} > {lambda_high}"
            )));
        }
        let first_at = |t: f64| eigenvalues.iter().position(|&l| l >= t).unwrap_or(eigenvalues.len());
        Self::new(first_at(lambda_low), first_at(lambda_high), eigenvalues.len())
    }

    /// Smallest index bounds whose cumulative energy reaches the two
    /// quantiles, e.g. `(0.9, 0.97)`.
    pub fn from_energy_quantiles(coeffs: &SpectralCoeffs, q_low: f64, q_high: f64) -> Result<Self> {
        if !(0.0..=q_high).contains(&q_low) || q_high > 1.0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "energy quantiles ({q_low}, {q_high}) are invalid"
            )));
        }
        let profile = coeffs.energy_profile();
        let total: f64 = profile.iter().sum();
        let n = profile.len();
        let cutoff = |q: f64| {
            if total == 0.0 {
                return 0;
            }
            let mut acc = 0.0;
            for (i, e) in profile.iter().enumerate() {
                acc += e;
                if acc >= q * total {
                    return i + 1;
                }
            }
            n
        };
        Self::new(cutoff(q_low), cutoff(q_high), n)
    }

    pub fn low(&self) -> Range<usize> {
        0..self.low_end
    }

    pub fn mid(&self) -> Range<usize> {
        self.low_end..self.high_start
    }

    pub fn high(&self, n: usize) -> Range<usize> {
        self.high_start..n
    }
}

/// Energy fractions of the three bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandEnergy {
    pub low: f64,
    pub mid: f64,
    pub high: f64,
}

/// Fraction of total coefficient energy in each band. All-zero input
/// reports zero in every band.
pub fn band_energy(coeffs: &SpectralCoeffs, bounds: BandBounds) -> Result<BandEnergy> {
    let n = coeffs.len();
    let bounds = BandBounds::new(bounds.low_end, bounds.high_start, n)?;
    let profile = coeffs.energy_profile();
    let sum = |r: Range<usize>| profile[r].iter().sum::<f64>();
    let (low, mid, high) = (sum(bounds.low()), sum(bounds.mid()), sum(bounds.high(n)));
    let total = low + mid + high;
    if total == 0.0 {
        return Ok(BandEnergy { low: 0.0, mid: 0.0, high: 0.0 });
    }
    Ok(BandEnergy { low: low / total, mid: mid / total, high: high / total })
}

/// Fraction of energy held by the lowest `count` frequencies.
pub fn low_frequency_energy(coeffs: &SpectralCoeffs, count: usize) -> f64 {
    let profile = coeffs.energy_profile();
    let total: f64 = profile.iter().sum();
    if total == 0.0 {
        return 0.0;
    }
    profile.iter().take(count).sum::<f64>() / total
}

/// Coefficient edit applied to a band of rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandOp {
    Zero,
    AddConstant(f64),
}

/// Applies `op` to every entry in rows `band`.
pub fn band_filter(coeffs: &SpectralCoeffs, band: Range<usize>, op: BandOp) -> Result<SpectralCoeffs> {
    let n = coeffs.len();
    if band.start > band.end || band.end > n {
        return Err(Error::BadRange { start: band.start, end: band.end, len: n });
    }
    let mut out = coeffs.clone();
    for row in &mut out.0[band] {
        match op {
            BandOp::Zero => *row = [0.0; 3],
            BandOp::AddConstant(delta) => row.iter_mut().for_each(|v| *v += delta),
        }
    }
    Ok(out)
}

/// Orthonormal DCT-II of each coordinate column over point-index order.
pub fn dct1d(signal: &[Point]) -> Vec<Point> {
    if signal.is_empty() {
        return Vec::new();
    }
    mul_points_transposed(SpectralBasis::dct(signal.len()).vectors(), signal)
}

/// Inverse of [`dct1d`].
pub fn idct1d(coeffs: &[Point]) -> Vec<Point> {
    if coeffs.is_empty() {
        return Vec::new();
    }
    mul_points(SpectralBasis::dct(coeffs.len()).vectors(), coeffs)
}
