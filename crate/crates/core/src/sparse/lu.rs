use super::ordering::{minimum_degree, Ordering};
use super::SparseMatrix;
use crate::error::{dim_check, Error, Result};

/// Which factorization kernel to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LuBackend {
    /// Dense for small or fill-heavy systems, sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LuOptions {
    pub backend: LuBackend,
    /// Systems up to this size always go dense under [`LuBackend::Auto`].
    pub dense_cutoff: usize,
    /// Sparse pivoting keeps the diagonal while `|a_kk| >= threshold · max_i |a_ik|`.
    pub pivot_threshold: f64,
    /// A pivot below `singular_tol · max|column|` is treated as zero.
    pub singular_tol: f64,
}

impl Default for LuOptions {
    fn default() -> Self {
        Self {
            backend: LuBackend::Auto,
            dense_cutoff: 64,
            pivot_threshold: 0.1,
            singular_tol: 1e-12,
        }
    }
}

// Sparse kernels carry index overhead; they pay off only once they save
// several times the dense work.
const SPARSE_OVERHEAD: f64 = 6.0;

/// Symbolic analysis of a sparsity pattern, reusable for every matrix that
/// shares it.
#[derive(Debug, Clone)]
pub struct LuPlan {
    n: usize,
    sparse: bool,
    cost: f64,
    col_perm: Vec<usize>,
    opts: LuOptions,
}

impl LuPlan {
    pub fn analyze(m: &SparseMatrix, opts: LuOptions) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::NotSquare {
                nrows: m.nrows(),
                ncols: m.ncols(),
            });
        }
        let n = m.nrows();
        let nf = n as f64;
        let dense_flops = nf * nf * nf / 3.0;
        let (sparse, col_perm, cost) = match opts.backend {
            LuBackend::Dense => (false, Vec::new(), dense_flops),
            LuBackend::Sparse => {
                let Ordering { perm, flops, .. } = minimum_degree(m);
                (true, perm, flops * SPARSE_OVERHEAD)
            }
            LuBackend::Auto if n <= opts.dense_cutoff => (false, Vec::new(), dense_flops),
            LuBackend::Auto => {
                let Ordering { perm, flops, .. } = minimum_degree(m);
                if flops * SPARSE_OVERHEAD < dense_flops {
                    (true, perm, flops * SPARSE_OVERHEAD)
                } else {
                    (false, Vec::new(), dense_flops)
                }
            }
        };
        Ok(Self {
            n,
            sparse,
            cost,
            col_perm,
            opts,
        })
    }

    /// Predicted factorization work in dense-flop equivalents, comparable
    /// across plans.
    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn is_sparse(&self) -> bool {
        self.sparse
    }

    pub fn factorize(&self, m: &SparseMatrix) -> Result<LuFactorization> {
        dim_check("factorized matrix rows", self.n, m.nrows())?;
        dim_check("factorized matrix columns", self.n, m.ncols())?;
        if self.sparse {
            SparseLu::factor(m, &self.col_perm, &self.opts).map(LuFactorization::Sparse)
        } else {
            DenseLu::factor(m, &self.opts).map(LuFactorization::Dense)
        }
    }
}

/// Factorizes with default options.
pub fn factorize(m: &SparseMatrix) -> Result<LuFactorization> {
    LuPlan::analyze(m, LuOptions::default())?.factorize(m)
}

/// Opaque LU factors. Solving never mutates them, so one factorization can be
/// shared and reused for any number of right-hand sides.
#[derive(Debug, Clone)]
pub enum LuFactorization {
    Dense(DenseLu),
    Sparse(SparseLu),
}

impl LuFactorization {
    pub fn dim(&self) -> usize {
        match self {
            LuFactorization::Dense(d) => d.n,
            LuFactorization::Sparse(s) => s.n,
        }
    }

    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        dim_check("right-hand side", self.dim(), r.len())?;
        let mut y = r.to_vec();
        self.solve_in_place(&mut y);
        Ok(y)
    }

    /// Overwrites `r` with the solution. Panics on a length mismatch.
    pub fn solve_in_place(&self, r: &mut [f64]) {
        assert_eq!(r.len(), self.dim(), "right-hand side length");
        match self {
            LuFactorization::Dense(d) => d.solve_in_place(r),
            LuFactorization::Sparse(s) => s.solve_in_place(r),
        }
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self, LuFactorization::Sparse(_))
    }
}

/// Row-major dense LU with partial pivoting, `P M = L U`.
#[derive(Debug, Clone)]
pub struct DenseLu {
    n: usize,
    lu: Vec<f64>,
    piv: Vec<usize>,
}

const PANEL: usize = 48;

impl DenseLu {
    pub fn factor(m: &SparseMatrix, opts: &LuOptions) -> Result<Self> {
        let n = m.nrows();
        let colmax = m.col_abs_max();
        let mut a = m.to_dense_flat();
        let mut piv = vec![0usize; n];

        // Right-looking, with the trailing update delayed to panel boundaries.
        let mut k0 = 0;
        while k0 < n {
            let kend = (k0 + PANEL).min(n);
            for k in k0..kend {
                let mut p = k;
                let mut best = a[k * n + k].abs();
                for i in k + 1..n {
                    let v = a[i * n + k].abs();
                    if v > best {
                        best = v;
                        p = i;
                    }
                }
                if !(best > opts.singular_tol * colmax[k]) || !best.is_finite() {
                    return Err(Error::Singular {
                        column: k,
                        pivot: best,
                    });
                }
                piv[k] = p;
                if p != k {
                    let (top, bot) = a.split_at_mut(p * n);
                    top[k * n..(k + 1) * n].swap_with_slice(&mut bot[..n]);
                }
                let d = a[k * n + k];
                for i in k + 1..n {
                    let l = a[i * n + k] / d;
                    a[i * n + k] = l;
                    if l != 0.0 {
                        let (top, bot) = a.split_at_mut(i * n);
                        let rk = &top[k * n + k + 1..k * n + kend];
                        for (x, y) in bot[k + 1..kend].iter_mut().zip(rk) {
                            *x -= l * y;
                        }
                    }
                }
            }
            if kend < n {
                for k in k0..kend {
                    for i in k + 1..kend {
                        let l = a[i * n + k];
                        if l != 0.0 {
                            let (top, bot) = a.split_at_mut(i * n);
                            let rk = &top[k * n + kend..(k + 1) * n];
                            for (x, y) in bot[kend..n].iter_mut().zip(rk) {
                                *x -= l * y;
                            }
                        }
                    }
                }
                let (top, bot) = a.split_at_mut(kend * n);
                for row in bot.chunks_mut(n) {
                    let (lpart, rpart) = row.split_at_mut(kend);
                    for (kk, &l) in lpart[k0..kend].iter().enumerate() {
                        if l != 0.0 {
                            let u = &top[(k0 + kk) * n + kend..(k0 + kk + 1) * n];
                            for (x, y) in rpart.iter_mut().zip(u) {
                                *x -= l * y;
                            }
                        }
                    }
                }
            }
            k0 = kend;
        }
        Ok(Self { n, lu: a, piv })
    }

    fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        for k in 0..n {
            x.swap(k, self.piv[k]);
        }
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
    }
}

/// Left-looking sparse LU (Gilbert–Peierls) with threshold partial pivoting:
/// `P M Q = L U`, Q fixed by the plan, P chosen during elimination.
#[derive(Debug, Clone)]
pub struct SparseLu {
    n: usize,
    /// Row permutation: original row `i` is pivot row `pinv[i]`.
    pinv: Vec<usize>,
    q: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<f64>,
    up: Vec<usize>,
    ui: Vec<usize>,
    ux: Vec<f64>,
}

const UNSET: usize = usize::MAX;

impl SparseLu {
    pub fn factor(m: &SparseMatrix, q: &[usize], opts: &LuOptions) -> Result<Self> {
        let n = m.nrows();
        dim_check("column permutation", n, q.len())?;
        let (ap, ai, ax) = (m.col_ptr(), m.row_idx(), m.values());
        let colmax = m.col_abs_max();

        let guess = 4 * m.nnz() + n;
        let mut lp = Vec::with_capacity(n + 1);
        let mut li = Vec::with_capacity(guess);
        let mut lx = Vec::with_capacity(guess);
        let mut up = Vec::with_capacity(n + 1);
        let mut ui = Vec::with_capacity(guess);
        let mut ux = Vec::with_capacity(guess);
        let mut pinv = vec![UNSET; n];
        let mut x = vec![0.0; n];
        let mut xi = vec![0usize; n];
        let mut stack = vec![0usize; n];
        let mut pstack = vec![0usize; n];
        let mut mark = vec![UNSET; n];

        for k in 0..n {
            lp.push(li.len());
            up.push(ui.len());
            let col = q[k];

            // Reach of column `col` in the graph of the partial L.
            let mut top = n;
            for p in ap[col]..ap[col + 1] {
                let start = ai[p];
                if mark[start] == k {
                    continue;
                }
                let mut head = 0usize;
                stack[0] = start;
                loop {
                    let j = stack[head];
                    let jcol = pinv[j];
                    if mark[j] != k {
                        mark[j] = k;
                        pstack[head] = if jcol == UNSET { 0 } else { lp[jcol] };
                    }
                    let end = if jcol == UNSET { 0 } else { lp[jcol + 1] };
                    let mut done = true;
                    let mut pp = pstack[head];
                    while pp < end {
                        let i = li[pp];
                        pp += 1;
                        if mark[i] != k {
                            pstack[head] = pp;
                            head += 1;
                            stack[head] = i;
                            done = false;
                            break;
                        }
                    }
                    if done {
                        top -= 1;
                        xi[top] = j;
                        if head == 0 {
                            break;
                        }
                        head -= 1;
                    }
                }
            }

            // Sparse triangular solve x = L \ M(:, col).
            for &i in &xi[top..n] {
                x[i] = 0.0;
            }
            for p in ap[col]..ap[col + 1] {
                x[ai[p]] = ax[p];
            }
            for &j in &xi[top..n] {
                let jcol = pinv[j];
                if jcol == UNSET {
                    continue;
                }
                let xj = x[j];
                // Unit diagonal sits first in each L column.
                for p in lp[jcol] + 1..lp[jcol + 1] {
                    x[li[p]] -= lx[p] * xj;
                }
            }

            let mut ipiv = UNSET;
            let mut best = -1.0f64;
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    let t = x[i].abs();
                    if t > best {
                        best = t;
                        ipiv = i;
                    }
                } else {
                    ui.push(pinv[i]);
                    ux.push(x[i]);
                }
            }
            if ipiv == UNSET || !(best > opts.singular_tol * colmax[col]) || !best.is_finite() {
                return Err(Error::Singular {
                    column: k,
                    pivot: best.max(0.0),
                });
            }
            if pinv[col] == UNSET && x[col].abs() >= opts.pivot_threshold * best {
                ipiv = col;
            }
            let pivot = x[ipiv];
            ui.push(k);
            ux.push(pivot);
            pinv[ipiv] = k;
            li.push(ipiv);
            lx.push(1.0);
            for &i in &xi[top..n] {
                if pinv[i] == UNSET {
                    li.push(i);
                    lx.push(x[i] / pivot);
                }
                x[i] = 0.0;
            }
        }
        lp.push(li.len());
        up.push(ui.len());
        for i in li.iter_mut() {
            *i = pinv[*i];
        }
        Ok(Self {
            n,
            pinv,
            q: q.to_vec(),
            lp,
            li,
            lx,
            up,
            ui,
            ux,
        })
    }

    pub fn nnz_l(&self) -> usize {
        self.li.len()
    }

    pub fn nnz_u(&self) -> usize {
        self.ui.len()
    }

    fn solve_in_place(&self, r: &mut [f64]) {
        let n = self.n;
        let mut x = vec![0.0; n];
        for i in 0..n {
            x[self.pinv[i]] = r[i];
        }
        for j in 0..n {
            let xj = x[j];
            if xj != 0.0 {
                for p in self.lp[j] + 1..self.lp[j + 1] {
                    x[self.li[p]] -= self.lx[p] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            let diag = self.up[j + 1] - 1;
            x[j] /= self.ux[diag];
            let xj = x[j];
            if xj != 0.0 {
                for p in self.up[j]..diag {
                    x[self.ui[p]] -= self.ux[p] * xj;
                }
            }
        }
        for k in 0..n {
            r[self.q[k]] = x[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn both(m: &SparseMatrix) -> [LuFactorization; 2] {
        let mk = |backend| {
            LuPlan::analyze(
                m,
                LuOptions {
                    backend,
                    ..LuOptions::default()
                },
            )
            .unwrap()
            .factorize(m)
            .unwrap()
        };
        [mk(LuBackend::Dense), mk(LuBackend::Sparse)]
    }

    #[test]
    fn identity_solve() {
        for f in both(&SparseMatrix::identity(3)) {
            assert_eq!(f.solve(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        }
    }

    #[test]
    fn permutation_solve() {
        let m = SparseMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        for f in both(&m) {
            assert_eq!(f.solve(&[7.0, -2.0]).unwrap(), vec![-2.0, 7.0]);
        }
    }

    #[test]
    fn two_by_two_needs_pivoting() {
        let m = SparseMatrix::from_dense(&[vec![4.0, 3.0], vec![6.0, 3.0]]).unwrap();
        for f in both(&m) {
            let y = f.solve(&[10.0, 12.0]).unwrap();
            assert!((y[0] - 1.0).abs() < 1e-14 && (y[1] - 2.0).abs() < 1e-14, "{y:?}");
        }
    }

    #[test]
    fn diagonal_solve() {
        let m = SparseMatrix::diagonal(&[2.0, 4.0]);
        for f in both(&m) {
            assert_eq!(f.solve(&[2.0, 4.0]).unwrap(), vec![1.0, 1.0]);
        }
    }

    #[test]
    fn reuse_matches_fresh_factorizations() {
        let m = SparseMatrix::from_dense(&[
            vec![3.0, 1.0, 0.0],
            vec![1.0, 4.0, 2.0],
            vec![0.0, -1.0, 5.0],
        ])
        .unwrap();
        let f = factorize(&m).unwrap();
        for r in [[1.0, 0.0, -1.0], [0.5, 2.0, 3.0]] {
            let fresh = factorize(&m).unwrap().solve(&r).unwrap();
            assert_eq!(f.solve(&r).unwrap(), fresh);
            assert_eq!(f.solve(&r).unwrap(), fresh);
        }
    }

    #[test]
    fn singular_is_reported() {
        let m = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        for backend in [LuBackend::Dense, LuBackend::Sparse] {
            let plan = LuPlan::analyze(
                &m,
                LuOptions {
                    backend,
                    ..LuOptions::default()
                },
            )
            .unwrap();
            assert!(matches!(plan.factorize(&m), Err(Error::Singular { .. })));
        }
        let z = SparseMatrix::zeros(2, 2);
        assert!(matches!(factorize(&z), Err(Error::Singular { .. })));
    }

    #[test]
    fn rejects_rectangular() {
        assert!(matches!(
            factorize(&SparseMatrix::zeros(2, 3)),
            Err(Error::NotSquare { .. })
        ));
    }

    #[test]
    fn solve_rejects_wrong_length() {
        let f = factorize(&SparseMatrix::identity(2)).unwrap();
        assert!(matches!(f.solve(&[1.0]), Err(Error::DimensionMismatch { .. })));
    }
}
