//! Small sparse-matrix toolkit: CSR storage assembled from triplets and a
//! banded LU factorization with partial pivoting. Structured meshes numbered
//! row by row have narrow bandwidth, so the band solver is a direct sparse
//! factorization at the sizes this crate targets.

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Accumulates `(row, col, value)` triplets; duplicates are summed.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> SparseMatrix {
        self.entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        SparseMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx,
            values,
        }
    }
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut b = TripletBuilder::new(diag.len(), diag.len());
        for (i, &d) in diag.iter().enumerate() {
            b.push(i, i, d);
        }
        b.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates the stored entries of row `i` as `(col, value)`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    /// Iterates all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    /// `|A| |x|` row sums, used for rounding-error estimates.
    pub fn abs_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(j, v)| (v * x[j]).abs()).sum())
            .collect()
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for (i, j, v) in self.triplets() {
            b.push(j, i, v);
        }
        b.build()
    }

    /// Entrywise sum of two matrices of equal shape.
    pub fn add(&self, other: &SparseMatrix) -> SparseMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (i, j, v) in self.triplets().chain(other.triplets()) {
            b.push(i, j, v);
        }
        b.build()
    }

    /// Largest absolute entry of `self - other`.
    pub fn max_abs_diff(&self, other: &SparseMatrix) -> f64 {
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            b.push(i, j, v);
        }
        for (i, j, v) in other.triplets() {
            b.push(i, j, -v);
        }
        b.build().values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm of a
    /// symmetric matrix.
    pub fn norm_inf(&self) -> f64 {
        (0..self.nrows)
            .map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Replaces the listed rows with identity rows.
    pub fn with_identity_rows(&self, mask: &[bool]) -> SparseMatrix {
        let mut b = TripletBuilder::new(self.nrows, self.ncols);
        for i in 0..self.nrows {
            if mask[i] {
                b.push(i, i, 1.0);
            } else {
                for (j, v) in self.row(i) {
                    b.push(i, j, v);
                }
            }
        }
        b.build()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.triplets() {
            d[i][j] += v;
        }
        d
    }

    /// Extracts the submatrix with the given row and column index lists.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> SparseMatrix {
        let mut col_map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            col_map[c] = k;
        }
        let mut b = TripletBuilder::new(rows.len(), cols.len());
        for (ri, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if col_map[j] != usize::MAX {
                    b.push(ri, col_map[j], v);
                }
            }
        }
        b.build()
    }

    pub fn factorize(&self) -> Result<BandedLu> {
        BandedLu::new(self)
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        Ok(self.factorize()?.solve(rhs))
    }
}

/// LU factorization with partial pivoting restricted to the matrix band.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    pub fn new(a: &SparseMatrix) -> Result<Self> {
        assert_eq!(a.nrows, a.ncols, "banded LU needs a square matrix");
        let n = a.nrows;
        let (mut kl, mut ku) = (0usize, 0usize);
        for (i, j, _) in a.triplets() {
            if i > j {
                kl = kl.max(i - j);
            } else {
                ku = ku.max(j - i);
            }
        }
        // fill-in from pivoting widens the upper band by kl
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            pivots: vec![0; n],
        };
        for (i, j, v) in a.triplets() {
            *lu.at_mut(i, j) += v;
        }
        let scale = a.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tiny = f64::EPSILON * f64::EPSILON * scale.max(f64::MIN_POSITIVE);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = lu.at(k, k).abs();
            for r in k + 1..=last_row {
                let v = lu.at(r, k).abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= tiny {
                return Err(Error::SingularMatrix { row: k });
            }
            lu.pivots[k] = piv;
            let last_col = (k + ku + kl).min(n - 1);
            if piv != k {
                for j in k..=last_col {
                    let tmp = lu.at(k, j);
                    *lu.at_mut(k, j) = lu.at(piv, j);
                    *lu.at_mut(piv, j) = tmp;
                }
            }
            let pivot = lu.at(k, k);
            for r in k + 1..=last_row {
                let l = lu.at(r, k) / pivot;
                *lu.at_mut(r, k) = l;
                if l != 0.0 {
                    for j in k + 1..=last_col {
                        let ukj = lu.at(k, j);
                        *lu.at_mut(r, j) -= l * ukj;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn offset(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.kl + self.ku);
        i * self.width + (j + self.kl - i)
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.band[self.offset(i, j)]
    }

    #[inline]
    fn at_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        let o = self.offset(i, j);
        &mut self.band[o]
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(rhs.len(), n);
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            for r in k + 1..=(k + self.kl).min(n.saturating_sub(1)) {
                x[r] -= self.at(r, k) * xk;
            }
        }
        for k in (0..n).rev() {
            let last_col = (k + self.ku + self.kl).min(n - 1);
            let mut s = x[k];
            for j in k + 1..=last_col {
                s -= self.at(k, j) * x[j];
            }
            x[k] = s / self.at(k, k);
        }
        x
    }
}

/// Dense Gaussian elimination with partial pivoting, for small systems.
pub fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Result<Vec<f64>> {
    let n = b.len();
    for k in 0..n {
        let piv = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        if a[piv][k] == 0.0 {
            return Err(Error::SingularMatrix { row: k });
        }
        a.swap(k, piv);
        b.swap(k, piv);
        for r in k + 1..n {
            let l = a[r][k] / a[k][k];
            if l != 0.0 {
                for j in k..n {
                    a[r][j] -= l * a[k][j];
                }
                b[r] -= l * b[k];
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|j| a[k][j] * x[j]).sum();
        x[k] = (b[k] - s) / a[k][k];
    }
    Ok(x)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}
