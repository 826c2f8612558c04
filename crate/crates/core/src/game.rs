//! Game data: pseudo-gradient `W x + f` and the shared feasible set
//! `χ = {x : A x + b >= 0, G x + h = 0}`.

use std::collections::BTreeMap;

use crate::error::{dim_check, Error, Result};
use crate::linalg::{self, norm2, norm_inf, DENSE_EIG_LIMIT};
use crate::sparse::{SparseMatrix, Triplets};

/// A convex quadratic game in variational form.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticGame {
    block_dims: Vec<usize>,
    w: SparseMatrix,
    f: Vec<f64>,
    a: SparseMatrix,
    b: Vec<f64>,
    g: SparseMatrix,
    h: Vec<f64>,
}

impl QuadraticGame {
    /// Validates dimensions and finiteness. At least one inequality row is
    /// required; equality rows are optional.
    pub fn new(
        block_dims: Vec<usize>,
        w: SparseMatrix,
        f: Vec<f64>,
        a: SparseMatrix,
        b: Vec<f64>,
        g: SparseMatrix,
        h: Vec<f64>,
    ) -> Result<Self> {
        if block_dims.is_empty() {
            return Err(Error::InvalidGame("a game needs at least one player".into()));
        }
        if let Some(i) = block_dims.iter().position(|&d| d == 0) {
            return Err(Error::InvalidGame(format!("player {i} has no decision variables")));
        }
        let n: usize = block_dims.iter().sum();
        dim_check("rows of W", n, w.nrows())?;
        dim_check("columns of W", n, w.ncols())?;
        dim_check("length of f", n, f.len())?;
        dim_check("columns of A", n, a.ncols())?;
        dim_check("length of b", a.nrows(), b.len())?;
        dim_check("columns of G", n, g.ncols())?;
        dim_check("length of h", g.nrows(), h.len())?;
        if a.nrows() == 0 {
            return Err(Error::InvalidGame(
                "at least one inequality constraint is required".into(),
            ));
        }
        for (name, v) in [("f", &f), ("b", &b), ("h", &h)] {
            if !linalg::all_finite(v) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        for (name, m) in [("W", &w), ("A", &a), ("G", &g)] {
            if !linalg::all_finite(m.values()) {
                return Err(Error::NonFinite(name.into()));
            }
        }
        Ok(Self {
            block_dims,
            w,
            f,
            a,
            b,
            g,
            h,
        })
    }

    pub fn block_dims(&self) -> &[usize] {
        &self.block_dims
    }

    pub fn num_players(&self) -> usize {
        self.block_dims.len()
    }

    /// Total number of decision variables.
    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn m_ineq(&self) -> usize {
        self.b.len()
    }

    pub fn m_eq(&self) -> usize {
        self.h.len()
    }

    pub fn w(&self) -> &SparseMatrix {
        &self.w
    }

    pub fn f(&self) -> &[f64] {
        &self.f
    }

    pub fn a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn g(&self) -> &SparseMatrix {
        &self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    /// Start offset of each player's block, plus the total at the end.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut off = Vec::with_capacity(self.block_dims.len() + 1);
        off.push(0);
        for d in &self.block_dims {
            off.push(off.last().unwrap() + d);
        }
        off
    }

    /// Block `(i, j)` of W.
    pub fn w_block(&self, i: usize, j: usize) -> SparseMatrix {
        let off = self.block_offsets();
        self.w.submatrix(off[i]..off[i + 1], off[j]..off[j + 1])
    }

    /// Same feasible set with a different pseudo-gradient.
    pub fn with_objective(&self, w: SparseMatrix, f: Vec<f64>) -> Result<Self> {
        Self::new(
            self.block_dims.clone(),
            w,
            f,
            self.a.clone(),
            self.b.clone(),
            self.g.clone(),
            self.h.clone(),
        )
    }

    /// `W x + f`.
    pub fn pseudo_gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.f.clone();
        self.w.gaxpy(1.0, x, &mut y);
        y
    }

    /// `A x + b`.
    pub fn slack(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.b.clone();
        self.a.gaxpy(1.0, x, &mut y);
        y
    }

    /// `G x + h`.
    pub fn eq_residual(&self, x: &[f64]) -> Vec<f64> {
        let mut y = self.h.clone();
        self.g.gaxpy(1.0, x, &mut y);
        y
    }

    /// Remark-style potential-game test: a symmetric W makes the equilibrium
    /// problem the optimality condition of a single QP.
    pub fn is_potential(&self) -> bool {
        let scale = 1.0 + norm_inf(self.w.values());
        self.w.is_symmetric(1e-12 * scale)
    }

    /// `σ = λ_min((W + Wᵀ)/2)`. The game is monotone iff `σ >= 0`.
    pub fn monotonicity_constant(&self) -> f64 {
        self.sym_min_eigenvalue(false)
    }

    /// `λ_min((W + Wᵀ)/2 + AᵀA)`. A positive value is the sufficient
    /// condition for global convergence of the interior point method.
    pub fn regularity(&self) -> f64 {
        self.sym_min_eigenvalue(true)
    }

    fn sym_min_eigenvalue(&self, with_ata: bool) -> f64 {
        let n = self.dim();
        if n <= DENSE_EIG_LIMIT {
            let mut d = vec![0.0; n * n];
            for (i, j, v) in self.w.triplets() {
                d[i * n + j] += 0.5 * v;
                d[j * n + i] += 0.5 * v;
            }
            if with_ata {
                let at = self.a.transpose();
                // Column j of Aᵀ is row j of A.
                for r in 0..at.ncols() {
                    let (lo, hi) = (at.col_ptr()[r], at.col_ptr()[r + 1]);
                    for p in lo..hi {
                        for q in lo..hi {
                            let (i, j) = (at.row_idx()[p], at.row_idx()[q]);
                            d[i * n + j] += at.values()[p] * at.values()[q];
                        }
                    }
                }
            }
            linalg::min_eigenvalue_dense(n, &d)
        } else {
            let m = self.m_ineq();
            linalg::min_eigenvalue_lanczos(
                n,
                |x, y| {
                    self.w.gaxpy(0.5, x, y);
                    self.w.tr_gaxpy(0.5, x, y);
                    if with_ata {
                        let mut ax = vec![0.0; m];
                        self.a.gaxpy(1.0, x, &mut ax);
                        self.a.tr_gaxpy(1.0, &ax, y);
                    }
                },
                1e-9,
            )
        }
    }

    /// `‖W‖₂` estimated from `iters` power iterations on `WᵀW`.
    pub fn w_spectral_norm(&self, iters: usize) -> f64 {
        linalg::spectral_norm(
            self.dim(),
            |x, y| self.w.gaxpy(1.0, x, y),
            |x, y| self.w.tr_gaxpy(1.0, x, y),
            iters,
        )
    }

    /// Row-equilibrated copy of the game and the divisors that undo it.
    ///
    /// `W, f` are divided by `‖f‖∞ + 1`, each inequality row `(A_i, b_i)` by
    /// `|b_i| + 1` and each equality row `(G_j, h_j)` by `|h_j| + 1`. The
    /// primal solution set is unchanged.
    pub fn rescale(&self) -> (QuadraticGame, ScalingRecord) {
        let omega = norm_inf(&self.f) + 1.0;
        let ineq: Vec<f64> = self.b.iter().map(|v| v.abs() + 1.0).collect();
        let eq: Vec<f64> = self.h.iter().map(|v| v.abs() + 1.0).collect();
        let inv = |d: &[f64]| d.iter().map(|v| 1.0 / v).collect::<Vec<_>>();
        let scaled = QuadraticGame {
            block_dims: self.block_dims.clone(),
            w: self.w.scaled(1.0 / omega),
            f: self.f.iter().map(|v| v / omega).collect(),
            a: self.a.scale_rows(&inv(&ineq)).expect("row scale has matching length"),
            b: self.b.iter().zip(&ineq).map(|(v, d)| v / d).collect(),
            g: self.g.scale_rows(&inv(&eq)).expect("row scale has matching length"),
            h: self.h.iter().zip(&eq).map(|(v, d)| v / d).collect(),
        };
        (scaled, ScalingRecord { omega, ineq, eq })
    }

    /// Distance of `(x, v, λ)` from the central path at barrier level `μ`:
    /// the 2-norm of the stacked residuals of
    /// `W x + f − √μ Aᵀe^v − Gᵀλ = 0`, `A x + b = √μ e^{−v}` and `G x + h = 0`.
    pub fn vi_residual(&self, x: &[f64], v: &[f64], lambda: &[f64], mu: f64) -> f64 {
        let sq = mu.sqrt();
        let ev: Vec<f64> = v.iter().map(|t| t.exp()).collect();
        let mut r1 = self.pseudo_gradient(x);
        self.a.tr_gaxpy(-sq, &ev, &mut r1);
        self.g.tr_gaxpy(-1.0, lambda, &mut r1);
        let r2: Vec<f64> = self
            .slack(x)
            .iter()
            .zip(&ev)
            .map(|(s, e)| s - sq / e)
            .collect();
        let r3 = self.eq_residual(x);
        (norm2(&r1).powi(2) + norm2(&r2).powi(2) + norm2(&r3).powi(2)).sqrt()
    }

    /// Worst violation among stationarity, primal feasibility, dual
    /// feasibility and complementarity (all in the ∞-norm).
    pub fn kkt_residual(&self, point: &KktPoint) -> f64 {
        let mut stat = self.pseudo_gradient(&point.x);
        self.a.tr_gaxpy(-1.0, &point.nu, &mut stat);
        self.g.tr_gaxpy(-1.0, &point.lambda, &mut stat);
        let slack = self.slack(&point.x);
        let primal = slack.iter().fold(0.0f64, |m, s| m.max(-s));
        let dual = point.nu.iter().fold(0.0f64, |m, v| m.max(-v));
        let comp = point
            .nu
            .iter()
            .zip(&slack)
            .fold(0.0f64, |m, (v, s)| m.max((v * s).abs()));
        let eq = norm_inf(&self.eq_residual(&point.x));
        norm_inf(&stat).max(primal).max(dual).max(comp).max(eq)
    }
}

/// Per-player data: own Hessian block, couplings to opponents, linear term.
#[derive(Debug, Clone, PartialEq)]
pub struct PlayerBlock {
    pub q: SparseMatrix,
    pub s: BTreeMap<usize, SparseMatrix>,
    pub p: Vec<f64>,
}

impl PlayerBlock {
    pub fn new(q: SparseMatrix, p: Vec<f64>) -> Self {
        Self {
            q,
            s: BTreeMap::new(),
            p,
        }
    }

    pub fn with_coupling(mut self, opponent: usize, s: SparseMatrix) -> Self {
        self.s.insert(opponent, s);
        self
    }

    pub fn dim(&self) -> usize {
        self.p.len()
    }

    /// Whether `Q` is symmetric positive semidefinite within `tol`. Advisory:
    /// the solver only needs the joint regularity condition.
    pub fn is_psd(&self, tol: f64) -> bool {
        let n = self.q.nrows();
        if !self.q.is_square() || !self.q.is_symmetric(tol) {
            return false;
        }
        let d = self.q.to_dense_flat();
        linalg::min_eigenvalue_dense(n, &d) >= -tol
    }
}

/// Lays out player data as the concatenated game: `Q_i` on the diagonal of W,
/// `S_ij` at block `(i, j)`, and `f = (p_1, …, p_N)`.
pub fn assemble(
    blocks: &[PlayerBlock],
    a: SparseMatrix,
    b: Vec<f64>,
    g: SparseMatrix,
    h: Vec<f64>,
) -> Result<QuadraticGame> {
    let dims: Vec<usize> = blocks.iter().map(PlayerBlock::dim).collect();
    let mut off = vec![0usize];
    for d in &dims {
        off.push(off.last().unwrap() + d);
    }
    let n = *off.last().unwrap();
    let mut t = Triplets::new(n, n);
    let mut f = Vec::with_capacity(n);
    for (i, blk) in blocks.iter().enumerate() {
        dim_check(&format!("rows of Q_{i}"), dims[i], blk.q.nrows())?;
        dim_check(&format!("columns of Q_{i}"), dims[i], blk.q.ncols())?;
        t.add_block(off[i], off[i], &blk.q);
        for (&j, s) in &blk.s {
            if j >= blocks.len() || j == i {
                return Err(Error::InvalidGame(format!(
                    "player {i} has a coupling block to invalid opponent {j}"
                )));
            }
            dim_check(&format!("rows of S_{i}{j}"), dims[i], s.nrows())?;
            dim_check(&format!("columns of S_{i}{j}"), dims[j], s.ncols())?;
            t.add_block(off[i], off[j], s);
        }
        f.extend_from_slice(&blk.p);
    }
    QuadraticGame::new(dims, t.compress_named("W")?, f, a, b, g, h)
}

/// Primal-dual point of the KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct KktPoint {
    pub x: Vec<f64>,
    /// Inequality multipliers.
    pub nu: Vec<f64>,
    /// Equality multipliers.
    pub lambda: Vec<f64>,
    /// Inequality slacks `A x + b`.
    pub s: Vec<f64>,
}

/// Divisors applied by [`QuadraticGame::rescale`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRecord {
    pub omega: f64,
    pub ineq: Vec<f64>,
    pub eq: Vec<f64>,
}

impl ScalingRecord {
    /// Maps a KKT point of the scaled game back to the original game.
    pub fn unscale(&self, p: &KktPoint) -> KktPoint {
        KktPoint {
            x: p.x.clone(),
            nu: p.nu.iter().zip(&self.ineq).map(|(v, d)| self.omega * v / d).collect(),
            lambda: p.lambda.iter().zip(&self.eq).map(|(v, e)| self.omega * v / e).collect(),
            s: p.s.iter().zip(&self.ineq).map(|(v, d)| v * d).collect(),
        }
    }

    /// Largest divisor; bounds how much a KKT residual can grow on unscaling.
    pub fn max_divisor(&self) -> f64 {
        self.ineq
            .iter()
            .chain(&self.eq)
            .fold(self.omega, |m, v| m.max(*v))
    }
}

/// `ν = √μ e^{v}`, `s = √μ e^{−v}`. Both are positive and `ν ⊙ s = μ` for any
/// finite `v`.
pub fn recover_multipliers(v: &[f64], mu: f64) -> (Vec<f64>, Vec<f64>) {
    let sq = mu.sqrt();
    v.iter().map(|t| (sq * t.exp(), sq * (-t).exp())).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_qp() -> QuadraticGame {
        QuadraticGame::new(
            vec![1],
            SparseMatrix::identity(1),
            vec![-1.0],
            SparseMatrix::identity(1),
            vec![0.0],
            SparseMatrix::zeros(0, 1),
            vec![],
        )
        .unwrap()
    }

    fn one(v: f64) -> SparseMatrix {
        SparseMatrix::from_dense(&[vec![v]]).unwrap()
    }

    fn with_w(w: &[Vec<f64>], a: SparseMatrix) -> QuadraticGame {
        let n = w.len();
        let m = a.nrows();
        QuadraticGame::new(
            vec![n],
            SparseMatrix::from_dense(w).unwrap(),
            vec![0.0; n],
            a,
            vec![0.0; m],
            SparseMatrix::zeros(0, n),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn assemble_identity_game() {
        let blocks = vec![
            PlayerBlock::new(one(1.0), vec![-1.0]).with_coupling(1, one(0.0)),
            PlayerBlock::new(one(1.0), vec![-1.0]).with_coupling(0, one(0.0)),
        ];
        let g = assemble(
            &blocks,
            SparseMatrix::identity(2),
            vec![0.0; 2],
            SparseMatrix::zeros(0, 2),
            vec![],
        )
        .unwrap();
        assert_eq!(g.w().to_dense(), vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(g.f(), &[-1.0, -1.0]);
    }

    #[test]
    fn assemble_nonsymmetric_coupling() {
        let blocks = vec![
            PlayerBlock::new(one(1.0), vec![0.0]).with_coupling(1, one(1.0)),
            PlayerBlock::new(one(1.0), vec![0.0]).with_coupling(0, one(-1.0)),
        ];
        let g = assemble(
            &blocks,
            SparseMatrix::identity(2),
            vec![0.0; 2],
            SparseMatrix::zeros(0, 2),
            vec![],
        )
        .unwrap();
        assert_eq!(g.w().to_dense(), vec![vec![1.0, 1.0], vec![-1.0, 1.0]]);
        assert!(!g.is_potential());
    }

    #[test]
    fn assemble_rejects_bad_coupling_shape() {
        let blocks = vec![
            PlayerBlock::new(one(1.0), vec![0.0]).with_coupling(1, SparseMatrix::zeros(1, 2)),
            PlayerBlock::new(one(1.0), vec![0.0]),
        ];
        let err = assemble(
            &blocks,
            SparseMatrix::identity(2),
            vec![0.0; 2],
            SparseMatrix::zeros(0, 2),
            vec![],
        );
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn game_requires_an_inequality() {
        let err = QuadraticGame::new(
            vec![1],
            SparseMatrix::identity(1),
            vec![0.0],
            SparseMatrix::zeros(0, 1),
            vec![],
            SparseMatrix::zeros(0, 1),
            vec![],
        );
        assert!(matches!(err, Err(Error::InvalidGame(_))));
    }

    #[test]
    fn sigma_examples() {
        let eye = with_w(&[vec![1.0, 0.0], vec![0.0, 1.0]], SparseMatrix::identity(2));
        assert!((eye.monotonicity_constant() - 1.0).abs() < 1e-12);
        let skew = with_w(&[vec![0.0, 1.0], vec![-1.0, 0.0]], SparseMatrix::identity(2));
        assert!(skew.monotonicity_constant().abs() < 1e-12);
        // Symmetric part [[2, 1.5], [1.5, 2]] has eigenvalues 0.5 and 3.5.
        let lower = with_w(&[vec![2.0, 0.0], vec![3.0, 2.0]], SparseMatrix::identity(2));
        assert!((lower.monotonicity_constant() - 0.5).abs() < 1e-12);
    }

    #[test]
    fn regularity_examples() {
        let zero_w = with_w(&[vec![0.0]], SparseMatrix::identity(1));
        assert!((zero_w.regularity() - 1.0).abs() < 1e-12);
        let no_a = with_w(
            &[vec![1.0, 0.0], vec![0.0, 1.0]],
            SparseMatrix::zeros(1, 2),
        );
        assert!((no_a.regularity() - 1.0).abs() < 1e-12);
        let skew = with_w(&[vec![0.0, 1.0], vec![-1.0, 0.0]], SparseMatrix::identity(2));
        assert!((skew.regularity() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rescale_examples() {
        let g = QuadraticGame::new(
            vec![1],
            one(2.0),
            vec![3.0],
            one(1.0),
            vec![0.0],
            SparseMatrix::zeros(0, 1),
            vec![],
        )
        .unwrap();
        let (s, rec) = g.rescale();
        assert_eq!(s.w().to_dense(), vec![vec![0.5]]);
        assert_eq!(s.f(), &[0.75]);
        assert_eq!(rec.omega, 4.0);

        let zero_f = with_w(&[vec![2.0]], one(1.0));
        let (s, _) = zero_f.rescale();
        assert_eq!(s.w(), zero_f.w());

        let row = QuadraticGame::new(
            vec![2],
            SparseMatrix::identity(2),
            vec![0.0; 2],
            SparseMatrix::from_dense(&[vec![2.0, 0.0]]).unwrap(),
            vec![-1.0],
            SparseMatrix::zeros(0, 2),
            vec![],
        )
        .unwrap();
        let (s, _) = row.rescale();
        assert_eq!(s.a().to_dense(), vec![vec![1.0, 0.0]]);
        assert_eq!(s.b(), &[-0.5]);
    }

    #[test]
    fn residual_vanishes_on_the_scalar_central_path() {
        // x − 1 = e^v and x = e^{−v} give sinh(−v) = ½.
        let v = -(0.5f64).asinh();
        let x = (-v).exp();
        let g = scalar_qp();
        assert!(g.vi_residual(&[x], &[v], &[], 1.0) < 1e-12);
        assert!((x - 1.618_033_988_749_895).abs() < 1e-12);
    }

    #[test]
    fn residual_by_substitution() {
        let g = scalar_qp();
        assert!((g.vi_residual(&[1.0], &[0.0], &[], 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kkt_residual_examples() {
        let g = scalar_qp();
        let exact = KktPoint {
            x: vec![1.0],
            nu: vec![0.0],
            lambda: vec![],
            s: vec![1.0],
        };
        assert_eq!(g.kkt_residual(&exact), 0.0);
        let origin = KktPoint {
            x: vec![0.0],
            nu: vec![0.0],
            lambda: vec![],
            s: vec![0.0],
        };
        assert_eq!(g.kkt_residual(&origin), 1.0);
    }

    #[test]
    fn multiplier_recovery() {
        let (nu, s) = recover_multipliers(&[0.0, 0.0], 1.0);
        assert_eq!((nu, s), (vec![1.0; 2], vec![1.0; 2]));
        let (nu, s) = recover_multipliers(&[0.0; 3], 4.0);
        assert_eq!((nu, s), (vec![2.0; 3], vec![2.0; 3]));
    }

    #[test]
    fn psd_check() {
        assert!(PlayerBlock::new(SparseMatrix::identity(2), vec![0.0; 2]).is_psd(1e-8));
        let indefinite = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(!PlayerBlock::new(indefinite, vec![0.0; 2]).is_psd(1e-8));
    }
}
