//! Dense symmetric matrices, Cholesky factorisation and triangular solves.

use crate::error::{check_dim, Error, Result};

/// Square matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.set(i, i, v);
        }
        m
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim, data.len())?;
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            check_dim(dim, row.len())?;
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.dim + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn add_to_diagonal(&mut self, v: f64) {
        for i in 0..self.dim {
            self.data[i * self.dim + i] += v;
        }
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        (0..self.dim).all(|i| {
            (0..i).all(|j| {
                let (a, b) = (self.get(i, j), self.get(j, i));
                (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
            })
        })
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| dot(self.row(i), v)).collect()
    }

    /// Rank-one update `self += alpha * x xᵀ`.
    pub fn add_outer(&mut self, alpha: f64, x: &[f64]) {
        for i in 0..self.dim {
            let s = alpha * x[i];
            if s == 0.0 {
                continue;
            }
            let row = &mut self.data[i * self.dim..(i + 1) * self.dim];
            for (r, &xj) in row.iter_mut().zip(x) {
                *r += s * xj;
            }
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    pub fn max_abs_diff(&self, other: &SquareMatrix) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Rough estimate of the smallest eigenvalue by shifted power iteration.
    /// Only used to make factorisation errors informative.
    pub fn smallest_eigenvalue_estimate(&self) -> f64 {
        let n = self.dim;
        if n == 0 {
            return f64::NAN;
        }
        let power = |shift: f64| -> f64 {
            let mut v: Vec<f64> = (0..n).map(|i| 1.0 + (i as f64 * 0.618).fract()).collect();
            normalize(&mut v);
            let mut lambda = 0.0;
            for _ in 0..200 {
                let mut w = self.mul_vec(&v);
                for (wi, vi) in w.iter_mut().zip(&v) {
                    *wi -= shift * vi;
                }
                lambda = dot(&w, &v);
                if normalize(&mut w) == 0.0 {
                    break;
                }
                v = w;
            }
            lambda + shift
        };
        let largest = power(0.0);
        let bound = largest.abs();
        power(bound).min(largest)
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    norm
}

/// Rectangular matrix stored row-major, one observation per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_dim(rows * cols, data.len())?;
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            check_dim(cols, r.len())?;
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.cols.max(1)).take(self.rows)
    }

    /// Column means.
    pub fn column_means(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.cols];
        for r in self.iter_rows() {
            for (a, v) in acc.iter_mut().zip(r) {
                *a += v;
            }
        }
        let n = self.rows as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lower-triangular Cholesky factor `L` with `A = L Lᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    lower: SquareMatrix,
}

impl Cholesky {
    /// Factorises a symmetric positive-definite matrix. Only the lower
    /// triangle of `a` is read.
    pub fn factor(a: &SquareMatrix) -> Result<Self> {
        Self::factor_with_ridge(a, 0.0)
    }

    pub(crate) fn factor_with_ridge(a: &SquareMatrix, ridge: f64) -> Result<Self> {
        let n = a.dim();
        let mut l = SquareMatrix::zeros(n);
        for i in 0..n {
            let (above, rest) = l.data.split_at_mut(i * n);
            let row_i = &mut rest[..n];
            for j in 0..i {
                let row_j = &above[j * n..j * n + j + 1];
                let s = a.get(i, j) - dot(&row_i[..j], &row_j[..j]);
                row_i[j] = s / row_j[j];
            }
            let pivot = a.get(i, i) + ridge - dot(&row_i[..i], &row_i[..i]);
            if !(pivot > 0.0 && pivot.is_finite()) {
                let mut shifted = a.clone();
                shifted.add_to_diagonal(ridge);
                return Err(Error::NotPositiveDefinite {
                    index: i,
                    pivot,
                    ridge,
                    min_eigenvalue: shifted.smallest_eigenvalue_estimate(),
                });
            }
            row_i[i] = pivot.sqrt();
        }
        Ok(Self { lower: l })
    }

    pub fn dim(&self) -> usize {
        self.lower.dim()
    }

    pub fn lower(&self) -> &SquareMatrix {
        &self.lower
    }

    /// Solves `L y = b`.
    pub fn solve_lower(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = b.to_vec();
        for i in 0..n {
            let row = self.lower.row(i);
            let s = dot(&row[..i], &y[..i]);
            y[i] = (y[i] - s) / row[i];
        }
        y
    }

    /// Solves `Lᵀ x = y`.
    pub fn solve_upper(&self, y: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            x[i] /= self.lower.get(i, i);
            let xi = x[i];
            let row = self.lower.row(i);
            for k in 0..i {
                x[k] -= row[k] * xi;
            }
        }
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_upper(&self.solve_lower(b))
    }

    /// `vᵀ A⁻¹ v = ‖L⁻¹ v‖²`.
    pub fn inv_quad(&self, v: &[f64]) -> f64 {
        let y = self.solve_lower(v);
        dot(&y, &y)
    }

    /// `aᵀ A⁻¹ b`.
    pub fn inv_bilinear(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(&self.solve_lower(a), &self.solve_lower(b))
    }

    /// `L Lᵀ`, for checking reconstruction.
    pub fn reconstruct(&self) -> SquareMatrix {
        let n = self.dim();
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for j in 0..=i {
                let v = dot(&self.lower.row(i)[..=j], &self.lower.row(j)[..=j]);
                out.set(i, j, v);
                out.set(j, i, v);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spd(dim: usize, seed: u64) -> SquareMatrix {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut a = SquareMatrix::zeros(dim);
        for _ in 0..dim + 2 {
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            a.add_outer(1.0, &x);
        }
        a.add_to_diagonal(1e-3);
        a
    }

    #[test]
    fn factor_known_matrix() {
        let a = SquareMatrix::from_rows(&[
            vec![4.0, 12.0, -16.0],
            vec![12.0, 37.0, -43.0],
            vec![-16.0, -43.0, 98.0],
        ])
        .unwrap();
        let c = Cholesky::factor(&a).unwrap();
        let expected = [[2.0, 0.0, 0.0], [6.0, 1.0, 0.0], [-8.0, 5.0, 3.0]];
        for (i, row) in expected.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert!((c.lower().get(i, j) - v).abs() < 1e-12);
            }
        }
        let x = c.solve(&[1.0, 2.0, 3.0]);
        let back = a.mul_vec(&x);
        for (b, e) in back.iter().zip([1.0, 2.0, 3.0]) {
            assert!((b - e).abs() < 1e-9);
        }
    }

    #[test]
    fn indefinite_matrix_reports_negative_eigenvalue() {
        let a = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        match Cholesky::factor(&a) {
            Err(Error::NotPositiveDefinite { min_eigenvalue, index, .. }) => {
                assert_eq!(index, 1);
                assert!((min_eigenvalue + 1.0).abs() < 1e-6, "{min_eigenvalue}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn inv_quad_matches_explicit_solve() {
        let a = random_spd(12, 3);
        let c = Cholesky::factor(&a).unwrap();
        let v: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let x = c.solve(&v);
        assert!((c.inv_quad(&v) - dot(&v, &x)).abs() < 1e-8 * dot(&v, &x).abs());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]
        #[test]
        fn reconstruction_is_tight(dim in 1usize..=64, seed in any::<u64>()) {
            let a = random_spd(dim, seed);
            let c = Cholesky::factor(&a).unwrap();
            prop_assert!(c.reconstruct().max_abs_diff(&a) <= 1e-9);
        }
    }
}
