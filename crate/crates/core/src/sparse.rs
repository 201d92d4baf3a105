//! Compressed sparse row matrices and the bridge to faer's factorizations.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use faer::sparse::{SparseColMat, Triplet};

use crate::error::{Error, Result};

/// Coordinate-format accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    pub fn extend_from(&mut self, other: Triplets) {
        debug_assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn into_csr(self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self { nrows, ncols, indptr: vec![0; nrows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self { nrows: n, ncols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: vec![1.0; n] }
    }

    /// Build from `(row, col, value)` entries, summing duplicates. Column
    /// indices are sorted within each row.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut counts = vec![0usize; nrows + 1];
        for &(i, _, _) in entries {
            counts[i + 1] += 1;
        }
        for i in 0..nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut cols = vec![0usize; entries.len()];
        let mut vals = vec![0.0; entries.len()];
        for &(i, j, v) in entries {
            let k = next[i];
            cols[k] = j;
            vals[k] = v;
            next[i] += 1;
        }
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        indptr.push(0);
        let mut row: Vec<(usize, f64)> = Vec::new();
        for i in 0..nrows {
            row.clear();
            row.extend((counts[i]..counts[i + 1]).map(|k| (cols[k], vals[k])));
            row.sort_unstable_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let j = row[k].0;
                let mut s = 0.0;
                while k < row.len() && row[k].0 == j {
                    s += row[k].1;
                    k += 1;
                }
                indices.push(j);
                values.push(s);
            }
            indptr.push(indices.len());
        }
        Self { nrows, ncols, indptr, indices, values }
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

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    /// All stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.indptr[i]..self.indptr[i + 1];
        match self.indices[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.mul_vec_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha A x`.
    pub fn mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let s: f64 = self.row(i).map(|(j, v)| v * x[j]).sum();
            *yi += alpha * s;
        }
    }

    /// `y = Aᵀ x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.ncols];
        self.tr_mul_vec_add(1.0, x, &mut y);
        y
    }

    /// `y += alpha Aᵀ x`.
    pub fn tr_mul_vec_add(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.nrows);
        assert_eq!(y.len(), self.ncols);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (j, v) in self.row(i) {
                    y[j] += alpha * v * xi;
                }
            }
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let entries: Vec<_> = self.iter().map(|(i, j, v)| (j, i, v)).collect();
        CsrMatrix::from_triplets(self.ncols, self.nrows, &entries)
    }

    /// `alpha A + beta B`.
    pub fn add_scaled(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut entries: Vec<_> = self.iter().map(|(i, j, v)| (i, j, alpha * v)).collect();
        entries.extend(other.iter().map(|(i, j, v)| (i, j, beta * v)));
        CsrMatrix::from_triplets(self.nrows, self.ncols, &entries)
    }

    pub fn scaled(&self, alpha: f64) -> CsrMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= alpha);
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `max |a_ij - a_ji| / max |a_ij|` (0 for the zero matrix).
    pub fn asymmetry(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let t = self.transpose();
        self.add_scaled(1.0, &t, -1.0).max_abs() / scale
    }

    /// `⟨A x, y⟩`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        assert_eq!(y.len(), self.nrows);
        (0..self.nrows).map(|i| y[i] * self.row(i).map(|(j, v)| v * x[j]).sum::<f64>()).sum()
    }

    /// Rows that hold no nonzero value.
    pub fn empty_rows(&self) -> Vec<usize> {
        (0..self.nrows).filter(|&i| self.row(i).all(|(_, v)| v == 0.0)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, j, v) in self.iter() {
            d[i][j] += v;
        }
        d
    }

    pub fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let trip: Vec<_> = self.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &trip)
            .map_err(|e| Error::Factorization(format!("{e:?}")))
    }
}

/// Block matrix `[[M00, M01, ...], ...]` flattened into one matrix. `None`
/// blocks are zero; block sizes come from `row_sizes` and `col_sizes`.
pub fn block_matrix(blocks: &[&[Option<&CsrMatrix>]], row_sizes: &[usize], col_sizes: &[usize]) -> CsrMatrix {
    let row_off: Vec<usize> = row_sizes.iter().scan(0, |s, &n| { let o = *s; *s += n; Some(o) }).collect();
    let col_off: Vec<usize> = col_sizes.iter().scan(0, |s, &n| { let o = *s; *s += n; Some(o) }).collect();
    let mut entries = Vec::new();
    for (bi, row) in blocks.iter().enumerate() {
        for (bj, blk) in row.iter().enumerate() {
            if let Some(m) = blk {
                assert_eq!((m.nrows(), m.ncols()), (row_sizes[bi], col_sizes[bj]), "block ({bi},{bj})");
                entries.extend(m.iter().map(|(i, j, v)| (i + row_off[bi], j + col_off[bj], v)));
            }
        }
    }
    CsrMatrix::from_triplets(row_sizes.iter().sum(), col_sizes.iter().sum(), &entries)
}

/// In-place dense Cholesky of the leading `n×n` block of a row-major matrix.
/// Returns the index of the first non-positive pivot on failure.
pub fn dense_cholesky(a: &mut [f64], n: usize) -> core::result::Result<(), usize> {
    dense_cholesky_tol(a, n, 0.0)
}

/// As [`dense_cholesky`], but a pivot `≤ tol` also fails.
pub fn dense_cholesky_tol(a: &mut [f64], n: usize, tol: f64) -> core::result::Result<(), usize> {
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d -= a[j * n + k] * a[j * n + k];
        }
        if d <= tol || d <= 0.0 || !d.is_finite() {
            return Err(j);
        }
        let d = crate::math::sqrt(d);
        a[j * n + j] = d;
        for i in j + 1..n {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= a[i * n + k] * a[j * n + k];
            }
            a[i * n + j] = s / d;
        }
    }
    Ok(())
}
