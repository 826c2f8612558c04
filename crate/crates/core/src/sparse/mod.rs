//! Compressed-column sparse matrices and the LU machinery used by the Newton
//! solves.

mod lu;
mod ordering;

pub use lu::{factorize, DenseLu, LuBackend, LuFactorization, LuOptions, LuPlan, SparseLu};
pub use ordering::{minimum_degree, Ordering};

use crate::error::{dim_check, Error, Result};

/// Coordinate-form builder. Duplicates are allowed and summed by [`Triplets::compress`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Triplets {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl Triplets {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::with_capacity(cap),
        }
    }

    pub fn from_entries(nrows: usize, ncols: usize, entries: Vec<(usize, usize, f64)>) -> Self {
        Self {
            nrows,
            ncols,
            entries,
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn entries(&self) -> &[(usize, usize, f64)] {
        &self.entries
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        self.entries.push((row, col, value));
    }

    /// Appends every stored entry of `m`, shifted by `(r0, c0)`.
    pub fn add_block(&mut self, r0: usize, c0: usize, m: &SparseMatrix) {
        self.add_scaled_block(r0, c0, m, 1.0);
    }

    pub fn add_scaled_block(&mut self, r0: usize, c0: usize, m: &SparseMatrix, scale: f64) {
        for j in 0..m.ncols {
            for p in m.col_ptr[j]..m.col_ptr[j + 1] {
                self.entries.push((r0 + m.row_idx[p], c0 + j, scale * m.values[p]));
            }
        }
    }

    /// Converts to CSC, summing duplicates. Rows are sorted within each column.
    pub fn compress(&self) -> Result<SparseMatrix> {
        self.compress_named("matrix")
    }

    /// Like [`Triplets::compress`], with `name` used in error messages.
    pub fn compress_named(&self, name: &str) -> Result<SparseMatrix> {
        let (nrows, ncols) = (self.nrows, self.ncols);
        let mut counts = vec![0usize; ncols + 1];
        for (k, &(i, j, v)) in self.entries.iter().enumerate() {
            if i >= nrows || j >= ncols {
                return Err(Error::IndexOutOfRange {
                    matrix: name.to_string(),
                    entry: k,
                    row: i,
                    col: j,
                    nrows,
                    ncols,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite(format!("{name} entry {k}")));
            }
            counts[j + 1] += 1;
        }
        for j in 0..ncols {
            counts[j + 1] += counts[j];
        }
        let mut next = counts.clone();
        let mut rows = vec![0usize; self.entries.len()];
        let mut vals = vec![0.0; self.entries.len()];
        for &(i, j, v) in &self.entries {
            let p = next[j];
            rows[p] = i;
            vals[p] = v;
            next[j] += 1;
        }

        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::with_capacity(rows.len());
        let mut values = Vec::with_capacity(rows.len());
        col_ptr.push(0);
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for j in 0..ncols {
            scratch.clear();
            scratch.extend((counts[j]..counts[j + 1]).map(|p| (rows[p], vals[p])));
            // Stable sort keeps the summation order of duplicates deterministic.
            scratch.sort_by_key(|&(i, _)| i);
            let mut iter = scratch.iter().copied();
            if let Some((mut cur, mut acc)) = iter.next() {
                for (i, v) in iter {
                    if i == cur {
                        acc += v;
                    } else {
                        row_idx.push(cur);
                        values.push(acc);
                        cur = i;
                        acc = v;
                    }
                }
                row_idx.push(cur);
                values.push(acc);
            }
            col_ptr.push(row_idx.len());
        }
        Ok(SparseMatrix {
            nrows,
            ncols,
            col_ptr,
            row_idx,
            values,
        })
    }
}

/// Real sparse matrix in compressed-column form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            col_ptr: vec![0; ncols + 1],
            row_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        Self {
            nrows: n,
            ncols: n,
            col_ptr: (0..=n).collect(),
            row_idx: (0..n).collect(),
            values: d.to_vec(),
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Result<Self> {
        Triplets::from_entries(nrows, ncols, entries.to_vec()).compress()
    }

    /// Builds from row-major dense data, keeping only nonzeros.
    pub fn from_dense(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = Triplets::new(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            dim_check("dense row length", ncols, r.len())?;
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.compress()
    }

    /// Assembles a block matrix. `None` blocks are zero; every block row and
    /// block column must have consistent sizes given by `row_sizes`/`col_sizes`.
    pub fn from_blocks(
        row_sizes: &[usize],
        col_sizes: &[usize],
        blocks: &[Vec<Option<&SparseMatrix>>],
    ) -> Result<Self> {
        dim_check("block rows", row_sizes.len(), blocks.len())?;
        let nrows: usize = row_sizes.iter().sum();
        let ncols: usize = col_sizes.iter().sum();
        let mut t = Triplets::new(nrows, ncols);
        let mut r0 = 0;
        for (bi, brow) in blocks.iter().enumerate() {
            dim_check("block columns", col_sizes.len(), brow.len())?;
            let mut c0 = 0;
            for (bj, blk) in brow.iter().enumerate() {
                if let Some(m) = blk {
                    dim_check(&format!("rows of block ({bi},{bj})"), row_sizes[bi], m.nrows)?;
                    dim_check(&format!("columns of block ({bi},{bj})"), col_sizes[bj], m.ncols)?;
                    t.add_block(r0, c0, m);
                }
                c0 += col_sizes[bj];
            }
            r0 += row_sizes[bi];
        }
        t.compress()
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

    pub fn col_ptr(&self) -> &[usize] {
        &self.col_ptr
    }

    pub fn row_idx(&self) -> &[usize] {
        &self.row_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn is_square(&self) -> bool {
        self.nrows == self.ncols
    }

    /// Entry lookup by binary search within the column.
    pub fn get(&self, row: usize, col: usize) -> f64 {
        if row >= self.nrows || col >= self.ncols {
            return 0.0;
        }
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        match self.row_idx[range.clone()].binary_search(&row) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    /// Position of `(row, col)` in the value array, if stored.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        self.row_idx[range.clone()]
            .binary_search(&row)
            .ok()
            .map(|k| range.start + k)
    }

    /// Stored entries in column-major order.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                out.push((self.row_idx[p], j, self.values[p]));
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[p]][j] += self.values[p];
            }
        }
        d
    }

    /// Row-major flat dense copy.
    pub fn to_dense_flat(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows * self.ncols];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                d[self.row_idx[p] * self.ncols + j] += self.values[p];
            }
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        dim_check("matvec operand", self.ncols, x.len())?;
        let mut y = vec![0.0; self.nrows];
        self.gaxpy(1.0, x, &mut y);
        Ok(y)
    }

    /// `Mᵀ x`.
    pub fn tr_matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        dim_check("transposed matvec operand", self.nrows, x.len())?;
        let mut y = vec![0.0; self.ncols];
        self.tr_gaxpy(1.0, x, &mut y);
        Ok(y)
    }

    /// `y += alpha · M x` without dimension checks (callers guarantee sizes).
    pub fn gaxpy(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for (j, &xj) in x.iter().enumerate() {
            if xj == 0.0 {
                continue;
            }
            let s = alpha * xj;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                y[self.row_idx[p]] += s * self.values[p];
            }
        }
    }

    /// `y += alpha · Mᵀ x`.
    pub fn tr_gaxpy(&self, alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.nrows);
        debug_assert_eq!(y.len(), self.ncols);
        for (j, yj) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc += self.values[p] * x[self.row_idx[p]];
            }
            *yj += alpha * acc;
        }
    }

    pub fn transpose(&self) -> SparseMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &i in &self.row_idx {
            counts[i + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut row_idx = vec![0; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for j in 0..self.ncols {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                row_idx[next[i]] = j;
                values[next[i]] = self.values[p];
                next[i] += 1;
            }
        }
        SparseMatrix {
            nrows: self.ncols,
            ncols: self.nrows,
            col_ptr: counts,
            row_idx,
            values,
        }
    }

    /// `a·self + b·other`.
    pub fn add_scaled(&self, a: f64, other: &SparseMatrix, b: f64) -> Result<SparseMatrix> {
        dim_check("sum rows", self.nrows, other.nrows)?;
        dim_check("sum columns", self.ncols, other.ncols)?;
        let mut t = Triplets::with_capacity(self.nrows, self.ncols, self.nnz() + other.nnz());
        t.add_scaled_block(0, 0, self, a);
        t.add_scaled_block(0, 0, other, b);
        t.compress()
    }

    pub fn scaled(&self, s: f64) -> SparseMatrix {
        let mut m = self.clone();
        m.values.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// Multiplies row `i` by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> Result<SparseMatrix> {
        dim_check("row scale vector", self.nrows, d.len())?;
        let mut m = self.clone();
        for (p, v) in m.values.iter_mut().enumerate() {
            *v *= d[self.row_idx[p]];
        }
        Ok(m)
    }

    /// Drops stored entries with `|v| <= tol`.
    pub fn pruned(&self, tol: f64) -> SparseMatrix {
        let mut t = Triplets::new(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            if v.abs() > tol {
                t.push(i, j, v);
            }
        }
        t.compress().expect("indices of a valid matrix stay in range")
    }

    /// Rectangular sub-block `rows × cols` given as half-open ranges.
    pub fn submatrix(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> SparseMatrix {
        let mut t = Triplets::new(rows.len(), cols.len());
        for j in cols.clone() {
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                if rows.contains(&i) {
                    t.push(i - rows.start, j - cols.start, self.values[p]);
                }
            }
        }
        t.compress().expect("sub-block indices are in range")
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        let t = self.transpose();
        match self.add_scaled(1.0, &t, -1.0) {
            Ok(d) => d.values.iter().all(|v| v.abs() <= tol),
            Err(_) => false,
        }
    }

    /// Largest absolute value in each row.
    pub fn row_abs_max(&self) -> Vec<f64> {
        let mut r = vec![0.0f64; self.nrows];
        for (p, &v) in self.values.iter().enumerate() {
            let i = self.row_idx[p];
            r[i] = r[i].max(v.abs());
        }
        r
    }

    /// Largest absolute value in each column.
    pub fn col_abs_max(&self) -> Vec<f64> {
        (0..self.ncols)
            .map(|j| {
                self.values[self.col_ptr[j]..self.col_ptr[j + 1]]
                    .iter()
                    .fold(0.0f64, |a, v| a.max(v.abs()))
            })
            .collect()
    }

    /// Sparse product `self · other`.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        dim_check("product inner dimension", self.ncols, other.nrows)?;
        let mut t = Triplets::new(self.nrows, other.ncols);
        let mut acc = vec![0.0; self.nrows];
        let mut mark = vec![usize::MAX; self.nrows];
        let mut pattern = Vec::new();
        for j in 0..other.ncols {
            pattern.clear();
            for q in other.col_ptr[j]..other.col_ptr[j + 1] {
                let k = other.row_idx[q];
                let bkj = other.values[q];
                for p in self.col_ptr[k]..self.col_ptr[k + 1] {
                    let i = self.row_idx[p];
                    if mark[i] != j {
                        mark[i] = j;
                        acc[i] = 0.0;
                        pattern.push(i);
                    }
                    acc[i] += self.values[p] * bkj;
                }
            }
            for &i in &pattern {
                t.push(i, j, acc[i]);
            }
        }
        t.compress()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed() {
        let m = SparseMatrix::from_triplets(1, 1, &[(0, 0, 1.0), (0, 0, 2.0)]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![3.0]]);
        assert_eq!(m.nnz(), 1);
    }

    #[test]
    fn empty_triplets_give_zero_matrix() {
        let m = SparseMatrix::from_triplets(2, 2, &[]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![0.0; 2]; 2]);
    }

    #[test]
    fn single_subdiagonal_entry() {
        let m = SparseMatrix::from_triplets(2, 2, &[(1, 0, 5.0)]).unwrap();
        assert_eq!(m.to_dense(), vec![vec![0.0, 0.0], vec![5.0, 0.0]]);
    }

    #[test]
    fn out_of_range_names_the_entry() {
        let err = SparseMatrix::from_triplets(2, 2, &[(0, 0, 1.0), (0, 2, 1.0)]).unwrap_err();
        match err {
            Error::IndexOutOfRange { entry, col, .. } => {
                assert_eq!(entry, 1);
                assert_eq!(col, 2);
            }
            e => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn identity_matvec() {
        let y = SparseMatrix::identity(2).matvec(&[3.0, 4.0]).unwrap();
        assert_eq!(y, vec![3.0, 4.0]);
    }

    #[test]
    fn zero_matvec() {
        let y = SparseMatrix::zeros(3, 2).matvec(&[7.0, -1.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
    }

    #[test]
    fn lower_triangular_matvec() {
        let m = SparseMatrix::from_dense(&[vec![2.0, 0.0], vec![3.0, 2.0]]).unwrap();
        assert_eq!(m.matvec(&[1.0, 1.0]).unwrap(), vec![2.0, 5.0]);
        assert_eq!(m.tr_matvec(&[1.0, 1.0]).unwrap(), vec![5.0, 2.0]);
    }

    #[test]
    fn matvec_rejects_wrong_length() {
        let m = SparseMatrix::identity(3);
        assert!(matches!(m.matvec(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn transpose_and_blocks() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0]]).unwrap();
        let at = a.transpose();
        assert_eq!(at.to_dense(), vec![vec![1.0], vec![2.0], vec![0.0]]);
        let i1 = SparseMatrix::identity(1);
        let b = SparseMatrix::from_blocks(&[1, 1], &[3, 1], &[vec![Some(&a), None], vec![None, Some(&i1)]])
            .unwrap();
        assert_eq!(
            b.to_dense(),
            vec![vec![1.0, 2.0, 0.0, 0.0], vec![0.0, 0.0, 0.0, 1.0]]
        );
    }

    #[test]
    fn product_matches_dense() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![0.0, 3.0]]).unwrap();
        let b = SparseMatrix::from_dense(&[vec![4.0, 0.0], vec![1.0, -1.0]]).unwrap();
        assert_eq!(a.matmul(&b).unwrap().to_dense(), vec![vec![6.0, -2.0], vec![3.0, -3.0]]);
    }

    #[test]
    fn symmetry_check() {
        let s = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let k = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap();
        assert!(s.is_symmetric(0.0));
        assert!(!k.is_symmetric(1e-12));
    }
}
