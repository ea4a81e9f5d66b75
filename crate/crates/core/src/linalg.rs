//! Small dense linear-algebra helpers.
//!
//! Matrices are row-major `f64`. Products go through `matrixmultiply`'s
//! blocked kernels; everything else is plain loops.

use alloc::vec;
use alloc::vec::Vec;

use crate::Point;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    /// Wraps a row-major buffer. Panics if the length is not `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length does not match shape");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            Layout::RowMajor,
            &other.data,
            Layout::RowMajor,
            &mut out.data,
            false,
        );
        out
    }

    /// Largest absolute deviation from symmetry.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl core::ops::Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl core::ops::IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Storage order of a gemm operand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Layout {
    RowMajor,
    /// The buffer holds the transpose in row-major order.
    Transposed,
}

/// `c (+)= a * b` with `a: m×k`, `b: k×n`, `c: m×n` (row-major).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    a_layout: Layout,
    b: &[f64],
    b_layout: Layout,
    c: &mut [f64],
    accumulate: bool,
) {
    assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = match a_layout {
        Layout::RowMajor => (k as isize, 1),
        Layout::Transposed => (1, m as isize),
    };
    let (rsb, csb) = match b_layout {
        Layout::RowMajor => (n as isize, 1),
        Layout::Transposed => (1, k as isize),
    };
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: the slice lengths were checked against the declared shapes and
    // strides above, so every address the kernel touches is in bounds.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `basis * signal` for an `n×n` basis and an `n×3` signal.
pub(crate) fn mul_points(basis: &Matrix, signal: &[Point]) -> Vec<Point> {
    mul_points_impl(basis, Layout::RowMajor, signal)
}

/// `basisᵀ * signal`.
pub(crate) fn mul_points_transposed(basis: &Matrix, signal: &[Point]) -> Vec<Point> {
    mul_points_impl(basis, Layout::Transposed, signal)
}

fn mul_points_impl(basis: &Matrix, layout: Layout, signal: &[Point]) -> Vec<Point> {
    let n = basis.rows();
    debug_assert_eq!(basis.cols(), n);
    debug_assert_eq!(signal.len(), n);
    let flat: Vec<f64> = signal.iter().flat_map(|p| p.iter().copied()).collect();
    let mut out = vec![0.0; n * 3];
    gemm(n, n, 3, basis.as_slice(), layout, &flat, Layout::RowMajor, &mut out, false);
    out.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect()
}

#[inline]
pub(crate) fn dist2(a: &Point, b: &Point) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

#[inline]
pub(crate) fn norm(p: &Point) -> f64 {
    libm::sqrt(p[0] * p[0] + p[1] * p[1] + p[2] * p[2])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gemm_layouts_agree_with_naive_product() {
        let a = Matrix::from_vec(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let b = Matrix::from_vec(3, 2, vec![7.0, 8.0, 9.0, 10.0, 11.0, 12.0]);
        let c = a.matmul(&b);
        assert_eq!(c.as_slice(), &[58.0, 64.0, 139.0, 154.0]);

        let at = a.transpose();
        let mut out = vec![0.0; 4];
        gemm(2, 3, 2, at.as_slice(), Layout::Transposed, b.as_slice(), Layout::RowMajor, &mut out, false);
        assert_eq!(out, c.as_slice());
    }

    #[test]
    fn point_products_match_transpose() {
        let u = Matrix::from_vec(2, 2, vec![0.0, 1.0, 2.0, 3.0]);
        let x = [[1.0, 0.0, -1.0], [2.0, 1.0, 0.5]];
        let direct = mul_points_transposed(&u, &x);
        let explicit = mul_points(&u.transpose(), &x);
        assert_eq!(direct, explicit);
        assert_eq!(direct[0], [4.0, 2.0, 1.0]);
    }
}
