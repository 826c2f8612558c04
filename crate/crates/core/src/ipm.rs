//! Log-domain interior point method.
//!
//! With `ν = √μ e^{v}` and `s = √μ e^{−v}` the complementarity condition
//! `ν ⊙ s = μ` holds for every `v`, so the central path at level `μ` is the
//! root of
//!
//! ```text
//! W x + f − √μ Aᵀe^{v} − Gᵀλ = 0,   A x + b = √μ e^{−v},   G x + h = 0.
//! ```
//!
//! Each Newton step eliminates `Δv` and solves the reduced, regularized system
//! `[[W + AᵀU(2v)A, −Gᵀ], [G, γI]]` whose matrix depends on `v` only. The
//! barrier parameter is pushed down by a line search that keeps the next
//! Newton step inside `‖Δv‖∞ <= 1`, then a final batch of Newton steps at fixed
//! `μ` drives the residual to zero.
//!
//! Steps are computed in increment form (the right-hand side is the current
//! residual) which is algebraically identical to solving for the new iterate
//! directly but does not lose digits once the residual is tiny. The `γI`
//! block then regularizes the step only, so converged iterates satisfy
//! `G x + h = 0` exactly rather than `G x + h = −γλ`.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::fbs::FbsTraceRow;
use crate::game::{recover_multipliers, KktPoint, QuadraticGame};
use crate::linalg::{all_finite, norm_inf};
use crate::sparse::{LuBackend, LuFactorization, LuOptions, LuPlan, SparseMatrix, Triplets};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineSearchMode {
    /// `Δv` is affine in `1/√μ`, so the smallest admissible `μ` has a closed
    /// form given two solves with the current factorization.
    #[default]
    Exact,
    /// Bisection on `log10 μ`.
    Bisection,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IpmConfig {
    /// Target barrier level, measured on the original (unscaled) game.
    pub eps: f64,
    /// Newton termination threshold on `‖Δv‖∞`.
    pub tau: f64,
    /// Regularization of the equality block.
    pub gamma: f64,
    /// Damping curvature constant: `α = 1 / max(1, ‖Δv‖∞² / (2β))`.
    pub beta: f64,
    /// Newton cap per outer iteration.
    pub eta1: usize,
    /// Newton cap of the terminal phase.
    pub eta2: usize,
    pub max_outer: usize,
    pub line_search: LineSearchMode,
    /// Bisection stops once consecutive brackets differ by this factor.
    pub ls_rel_tol: f64,
    pub ls_max_trials: usize,
    /// Outer iterations that start centred (`‖Δv‖∞ <= 1`) yet cannot lower
    /// `μ` before jumping to the terminal phase.
    pub stall_limit: usize,
    /// Components of `v` are kept in `[−v_clamp, v_clamp]`.
    pub v_clamp: f64,
    /// Reuse the line-search factorization for the first Newton step.
    pub reuse_factorization: bool,
    /// Row-equilibrate the game before solving.
    pub rescale: bool,
    pub lu: LuOptions,
}

impl Default for IpmConfig {
    fn default() -> Self {
        Self {
            eps: 1e-6,
            tau: 1e-6,
            gamma: 1e-9,
            beta: 0.25,
            eta1: 5,
            eta2: 50,
            max_outer: 200,
            line_search: LineSearchMode::Exact,
            ls_rel_tol: 1e-3,
            ls_max_trials: 40,
            stall_limit: 10,
            v_clamp: 40.0,
            reuse_factorization: true,
            rescale: true,
            lu: LuOptions::default(),
        }
    }
}

impl IpmConfig {
    pub fn with_tolerances(eps: f64, tau: f64) -> Self {
        Self {
            eps,
            tau,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps", self.eps),
            ("tau", self.tau),
            ("gamma", self.gamma),
            ("beta", self.beta),
            ("ls_rel_tol", self.ls_rel_tol),
            ("v_clamp", self.v_clamp),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        let caps = [
            ("eta1", self.eta1),
            ("eta2", self.eta2),
            ("max_outer", self.max_outer),
            ("ls_max_trials", self.ls_max_trials),
            ("stall_limit", self.stall_limit),
        ];
        for (name, v) in caps {
            if v == 0 {
                return Err(Error::InvalidParams(format!("{name} must be at least 1")));
            }
        }
        Ok(())
    }

    /// `α` for a direction of size `dv_inf`.
    pub fn step_size(&self, dv_inf: f64) -> f64 {
        1.0 / (dv_inf * dv_inf / (2.0 * self.beta)).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    /// Outer iteration in which the line search could not lower `μ`.
    Centering,
    /// Outer iteration that lowered `μ`.
    Reduction,
    /// Final Newton steps at fixed `μ`.
    Terminal,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Centering => "centering",
            Phase::Reduction => "reduction",
            Phase::Terminal => "terminal",
        }
    }
}

/// One row per Newton step. Quantities refer to the internally scaled game.
#[derive(Debug, Clone, PartialEq)]
pub struct IterTraceRow {
    pub outer: usize,
    pub phase: Phase,
    pub mu: f64,
    /// Central-path residual after the step.
    pub residual: f64,
    /// `‖Δv‖∞` of the step taken.
    pub dv_inf: f64,
    pub alpha: f64,
    pub reused: bool,
    pub clamped: bool,
    /// Smallest entry of `ν` and `s` after the step.
    pub min_multiplier: f64,
    /// `‖ν ⊙ s − μ‖∞` after the step.
    pub complementarity_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Trace {
    Ipm(Vec<IterTraceRow>),
    Fbs(Vec<FbsTraceRow>),
}

impl Trace {
    pub fn len(&self) -> usize {
        match self {
            Trace::Ipm(r) => r.len(),
            Trace::Fbs(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn ipm_rows(&self) -> &[IterTraceRow] {
        match self {
            Trace::Ipm(r) => r,
            Trace::Fbs(_) => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIterations,
    SingularSystem,
    Diverged,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIterations => "max_iterations",
            SolveStatus::SingularSystem => "singular_system",
            SolveStatus::Diverged => "diverged",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveResult {
    /// Solution in the original game's units.
    pub point: KktPoint,
    pub status: SolveStatus,
    /// KKT residual of `point` on the original game.
    pub final_residual: f64,
    /// Newton steps (IPM) or projection steps (FBS).
    pub iterations: usize,
    /// Outer iterations (IPM); equals `iterations` for FBS.
    pub outer_iterations: usize,
    pub factorizations: usize,
    /// Final barrier level on the scaled game (zero for FBS).
    pub mu: f64,
    pub trace: Trace,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// Newton matrix with a fixed pattern.
///
/// The reduced system is `[[W + AᵀU(2v)A, −Gᵀ], [G, γI]]`. A constraint row
/// touching many variables turns `AᵀU(2v)A` into a dense clique, so such rows
/// can instead be kept as extra unknowns `y = U(v)A_D δx`:
///
/// ```text
/// [[W + A_RᵀU(2v)A_R, −Gᵀ, (U(v)A_D)ᵀ],
///  [G,                 γI,  0         ],
///  [−U(v)A_D,          0,   I         ]]
/// ```
///
/// Eliminating `y` recovers the reduced matrix, and the symmetric part stays
/// block diagonal, so diagonal pivots remain admissible. Which rows to keep is
/// decided once per pattern by comparing predicted factorization work.
#[derive(Debug, Clone)]
pub struct KktSystem {
    n: usize,
    p: usize,
    gamma: f64,
    /// Indices of the constraint rows kept as extra unknowns.
    augmented: Vec<usize>,
    pattern: SparseMatrix,
    base: Vec<f64>,
    /// Per constraint row, positions receiving `e^{2v} a_i a_j` (reduced rows).
    pair_ptr: Vec<usize>,
    pair_pos: Vec<usize>,
    pair_val: Vec<f64>,
    /// Per augmented row, positions of `(j, extra)` and `(extra, j)`.
    aug_ptr: Vec<usize>,
    aug_upper: Vec<usize>,
    aug_lower: Vec<usize>,
    aug_val: Vec<f64>,
    plan: LuPlan,
    signature: [Vec<usize>; 6],
}

fn signature(game: &QuadraticGame) -> [Vec<usize>; 6] {
    [
        game.w().col_ptr().to_vec(),
        game.w().row_idx().to_vec(),
        game.a().col_ptr().to_vec(),
        game.a().row_idx().to_vec(),
        game.g().col_ptr().to_vec(),
        game.g().row_idx().to_vec(),
    ]
}

/// Candidate augmentation sets: rows with at least `t` entries, for the
/// largest few distinct row lengths `t >= 3`.
fn augmentation_candidates(at: &SparseMatrix) -> Vec<Vec<usize>> {
    let len = |r: usize| at.col_ptr()[r + 1] - at.col_ptr()[r];
    let mut lengths: Vec<usize> = (0..at.ncols()).map(len).filter(|&l| l >= 3).collect();
    lengths.sort_unstable_by(|a, b| b.cmp(a));
    lengths.dedup();
    let mut out = vec![Vec::new()];
    for &t in lengths.iter().take(6) {
        out.push((0..at.ncols()).filter(|&r| len(r) >= t).collect());
    }
    out
}

impl KktSystem {
    pub fn new(game: &QuadraticGame, gamma: f64, lu: LuOptions) -> Result<Self> {
        let at = game.a().transpose();
        let candidates = if lu.backend == LuBackend::Dense {
            vec![Vec::new()]
        } else {
            augmentation_candidates(&at)
        };
        let mut best: Option<Self> = None;
        for augmented in candidates {
            let sys = Self::with_rows(game, &at, gamma, lu, augmented)?;
            if best.as_ref().is_none_or(|b| sys.plan.cost() < b.plan.cost()) {
                best = Some(sys);
            }
        }
        Ok(best.expect("at least the plain candidate"))
    }

    /// Builds the system keeping exactly the rows in `augmented` as extra
    /// unknowns.
    pub fn with_augmented_rows(
        game: &QuadraticGame,
        gamma: f64,
        lu: LuOptions,
        augmented: Vec<usize>,
    ) -> Result<Self> {
        if augmented.iter().any(|&r| r >= game.m_ineq()) {
            return Err(Error::InvalidParams("augmented row index out of range".into()));
        }
        let mut augmented = augmented;
        augmented.sort_unstable();
        augmented.dedup();
        Self::with_rows(game, &game.a().transpose(), gamma, lu, augmented)
    }

    fn with_rows(
        game: &QuadraticGame,
        at: &SparseMatrix,
        gamma: f64,
        lu: LuOptions,
        augmented: Vec<usize>,
    ) -> Result<Self> {
        let (n, p) = (game.dim(), game.m_eq());
        let mut slot = vec![None; at.ncols()];
        for (k, &r) in augmented.iter().enumerate() {
            slot[r] = Some(n + p + k);
        }
        let (pattern, base) = Self::numeric_pattern(game, at, gamma, &slot)?;
        let mut pair_ptr = vec![0];
        let mut pair_pos = Vec::new();
        let mut aug_ptr = vec![0];
        let mut aug_upper = Vec::new();
        let mut aug_lower = Vec::new();
        for r in 0..at.ncols() {
            let rows = &at.row_idx()[at.col_ptr()[r]..at.col_ptr()[r + 1]];
            match slot[r] {
                None => {
                    for &i in rows {
                        for &j in rows {
                            pair_pos.push(pattern.position(i, j).expect("pair is in the pattern"));
                        }
                    }
                }
                Some(e) => {
                    for &j in rows {
                        aug_upper.push(pattern.position(j, e).expect("entry is in the pattern"));
                        aug_lower.push(pattern.position(e, j).expect("entry is in the pattern"));
                    }
                    aug_ptr.push(aug_upper.len());
                }
            }
            pair_ptr.push(pair_pos.len());
        }
        let plan = LuPlan::analyze(&pattern, lu)?;
        let (pair_val, aug_val) = Self::row_values(at, &slot);
        Ok(Self {
            n,
            p,
            gamma,
            augmented,
            pattern,
            base,
            pair_ptr,
            pair_pos,
            pair_val,
            aug_ptr,
            aug_upper,
            aug_lower,
            aug_val,
            plan,
            signature: signature(game),
        })
    }

    fn numeric_pattern(
        game: &QuadraticGame,
        at: &SparseMatrix,
        gamma: f64,
        slot: &[Option<usize>],
    ) -> Result<(SparseMatrix, Vec<f64>)> {
        let (n, p) = (game.dim(), game.m_eq());
        let q = slot.iter().flatten().count();
        let dim = n + p + q;
        let mut t = Triplets::new(dim, dim);
        t.add_block(0, 0, game.w());
        for r in 0..at.ncols() {
            let rows = &at.row_idx()[at.col_ptr()[r]..at.col_ptr()[r + 1]];
            match slot[r] {
                None => {
                    for &i in rows {
                        for &j in rows {
                            t.push(i, j, 0.0);
                        }
                    }
                }
                Some(e) => {
                    for &j in rows {
                        t.push(j, e, 0.0);
                        t.push(e, j, 0.0);
                    }
                    t.push(e, e, 1.0);
                }
            }
        }
        t.add_scaled_block(0, n, &game.g().transpose(), -1.0);
        t.add_block(n, 0, game.g());
        for j in 0..p {
            t.push(n + j, n + j, gamma);
        }
        let k = t.compress_named("Newton matrix")?;
        let base = k.values().to_vec();
        Ok((k, base))
    }

    fn row_values(at: &SparseMatrix, slot: &[Option<usize>]) -> (Vec<f64>, Vec<f64>) {
        let mut pairs = Vec::new();
        let mut aug = Vec::new();
        for r in 0..at.ncols() {
            let vals = &at.values()[at.col_ptr()[r]..at.col_ptr()[r + 1]];
            match slot[r] {
                None => {
                    for &a in vals {
                        for &b in vals {
                            pairs.push(a * b);
                        }
                    }
                }
                Some(_) => aug.extend_from_slice(vals),
            }
        }
        (pairs, aug)
    }

    fn slots(&self, m: usize) -> Vec<Option<usize>> {
        let mut slot = vec![None; m];
        for (k, &r) in self.augmented.iter().enumerate() {
            slot[r] = Some(self.n + self.p + k);
        }
        slot
    }

    /// True if `game` has the sparsity pattern this system was built for.
    pub fn matches(&self, game: &QuadraticGame) -> bool {
        self.signature == signature(game)
    }

    /// Loads the numeric data of `game`, which must share the pattern.
    pub fn refresh(&mut self, game: &QuadraticGame) -> Result<()> {
        if !self.matches(game) {
            return Err(Error::InvalidGame(
                "sparsity pattern differs from the analyzed system".into(),
            ));
        }
        let at = game.a().transpose();
        let slot = self.slots(at.ncols());
        let (k, base) = Self::numeric_pattern(game, &at, self.gamma, &slot)?;
        debug_assert_eq!(k.row_idx(), self.pattern.row_idx());
        self.base = base;
        (self.pair_val, self.aug_val) = Self::row_values(&at, &slot);
        Ok(())
    }

    pub fn uses_sparse_lu(&self) -> bool {
        self.plan.is_sparse()
    }

    /// Constraint rows kept as extra unknowns.
    pub fn augmented_rows(&self) -> &[usize] {
        &self.augmented
    }

    /// The factored matrix at `v`; its leading `n + p` block is the reduced
    /// matrix whenever no row is augmented.
    pub fn matrix(&self, v: &[f64]) -> SparseMatrix {
        let mut k = self.pattern.clone();
        let vals = k.values_mut();
        vals.copy_from_slice(&self.base);
        let mut next_aug = 0;
        for (r, vr) in v.iter().enumerate() {
            let (lo, hi) = (self.pair_ptr[r], self.pair_ptr[r + 1]);
            if lo < hi {
                let d = (2.0 * vr).exp();
                for q in lo..hi {
                    vals[self.pair_pos[q]] += d * self.pair_val[q];
                }
            } else if self.augmented.get(next_aug) == Some(&r) {
                let e = vr.exp();
                for q in self.aug_ptr[next_aug]..self.aug_ptr[next_aug + 1] {
                    vals[self.aug_upper[q]] = e * self.aug_val[q];
                    vals[self.aug_lower[q]] = -e * self.aug_val[q];
                }
                next_aug += 1;
            }
        }
        k
    }

    /// The reduced matrix `[[W + AᵀU(2v)A, −Gᵀ], [G, γI]]` at `v`, assembled
    /// directly (for checks; the solver never forms it when rows are
    /// augmented).
    pub fn reduced_matrix(game: &QuadraticGame, v: &[f64], gamma: f64) -> Result<SparseMatrix> {
        let sys = Self::with_rows(game, &game.a().transpose(), gamma, LuOptions::default(), Vec::new())?;
        Ok(sys.matrix(v))
    }

    pub fn factor(&self, v: &[f64]) -> Result<KktFactor> {
        Ok(KktFactor {
            lu: self.plan.factorize(&self.matrix(v))?,
            reduced: self.n + self.p,
        })
    }
}

/// Factorization of a [`KktSystem`] matrix. Solves act on the reduced
/// unknowns `(δx, δλ)`; the extra unknowns of augmented rows have a zero
/// right-hand side and are discarded.
#[derive(Debug, Clone)]
pub struct KktFactor {
    lu: LuFactorization,
    reduced: usize,
}

impl KktFactor {
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        assert_eq!(rhs.len(), self.reduced, "right-hand side length");
        if self.lu.dim() == self.reduced {
            self.lu.solve_in_place(rhs);
            return;
        }
        let mut full = vec![0.0; self.lu.dim()];
        full[..self.reduced].copy_from_slice(rhs);
        self.lu.solve_in_place(&mut full);
        rhs.copy_from_slice(&full[..self.reduced]);
    }
}

/// Primal-dual iterate. `factor` caches the reduced-system factorization for
/// the `v` it was computed at.
#[derive(Debug, Clone)]
pub struct IpmState {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub mu: f64,
    /// Last Newton direction in `v`.
    pub dv: Vec<f64>,
    /// See [`IpmState::dv_floor`].
    dv_floor: f64,
    factor: Option<(Vec<f64>, KktFactor)>,
}

impl IpmState {
    /// `x = 0`, `λ = 0`, `v = 1`, `μ = 1`.
    pub fn initial(game: &QuadraticGame) -> Self {
        Self::at(game, vec![1.0; game.m_ineq()], 1.0)
    }

    pub fn at(game: &QuadraticGame, v: Vec<f64>, mu: f64) -> Self {
        Self {
            x: vec![0.0; game.dim()],
            dv: vec![0.0; v.len()],
            v,
            lambda: vec![0.0; game.m_eq()],
            mu,
            dv_floor: 0.0,
            factor: None,
        }
    }

    pub fn dv_inf(&self) -> f64 {
        norm_inf(&self.dv)
    }

    /// Attainable level of `‖Δv‖∞`, or zero when Newton has not stagnated.
    /// `Δv` is a relative change of the slack, so near-active constraints
    /// amplify rounding in the residuals, and the `γI` block turns Newton's
    /// quadratic rate into a slow linear one along directions the equality
    /// constraints barely see. Once a small step stops shrinking, `‖Δv‖∞`
    /// is not certified below its current value.
    pub fn dv_floor(&self) -> f64 {
        self.dv_floor
    }

    pub fn multipliers(&self) -> (Vec<f64>, Vec<f64>) {
        recover_multipliers(&self.v, self.mu)
    }

    fn cached(&self) -> Option<&KktFactor> {
        match &self.factor {
            Some((key, lu)) if *key == self.v => Some(lu),
            _ => None,
        }
    }
}

struct Engine<'a> {
    game: &'a QuadraticGame,
    sys: &'a KktSystem,
    cfg: &'a IpmConfig,
    factorizations: usize,
}

/// Iterative refinement steps after each reduced solve.
const REFINEMENT_STEPS: usize = 2;

/// Below this `‖Δv‖∞`, a Newton step that fails to shrink it by
/// [`STAGNATION_RATIO`] is taken to have reached the attainable level.
const ROUNDING_CHECK: f64 = 1e-6;
const STAGNATION_RATIO: f64 = 0.5;

/// What one damped Newton step did.
struct StepInfo {
    dv_inf: f64,
    alpha: f64,
    reused: bool,
    clamped: bool,
}

impl<'a> Engine<'a> {
    fn ensure_factor(&mut self, st: &mut IpmState) -> Result<bool> {
        if self.cfg.reuse_factorization && st.cached().is_some() {
            return Ok(true);
        }
        let lu = self.sys.factor(&st.v)?;
        self.factorizations += 1;
        st.factor = Some((st.v.clone(), lu));
        Ok(false)
    }

    fn lu<'s>(&self, st: &'s IpmState) -> &'s KktFactor {
        &st.factor.as_ref().expect("factorization was prepared").1
    }

    /// Solves the reduced system in place, followed by a few steps of
    /// iterative refinement. The factorization is only normwise stable, and
    /// `Δv` divides `A δx` by the slack, so small slacks need componentwise
    /// accuracy in `δx`.
    fn solve_refined(&self, st: &IpmState, ev: &[f64], rhs: &mut [f64]) {
        let g = self.game;
        let n = g.dim();
        let lu = self.lu(st);
        let b = rhs.to_vec();
        lu.solve_in_place(rhs);
        let e2: Vec<f64> = ev.iter().map(|e| e * e).collect();
        let mut ax = vec![0.0; g.m_ineq()];
        for _ in 0..REFINEMENT_STEPS {
            let (dx, dl) = rhs.split_at(n);
            let mut r = b.clone();
            g.w().gaxpy(-1.0, dx, &mut r[..n]);
            ax.iter_mut().for_each(|t| *t = 0.0);
            g.a().gaxpy(1.0, dx, &mut ax);
            ax.iter_mut().zip(&e2).for_each(|(t, e)| *t *= e);
            g.a().tr_gaxpy(-1.0, &ax, &mut r[..n]);
            g.g().tr_gaxpy(1.0, dl, &mut r[..n]);
            g.g().gaxpy(-1.0, dx, &mut r[n..]);
            for (ri, li) in r[n..].iter_mut().zip(dl) {
                *ri -= self.sys.gamma * li;
            }
            lu.solve_in_place(&mut r);
            for (z, d) in rhs.iter_mut().zip(&r) {
                *z += d;
            }
        }
    }

    /// Newton increments `(δx, δλ, Δv)` at the current iterate.
    fn direction(&self, st: &IpmState) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let g = self.game;
        let (n, p) = (g.dim(), g.m_eq());
        let sq = st.mu.sqrt();
        let ev: Vec<f64> = st.v.iter().map(|t| t.exp()).collect();

        let mut r1 = g.pseudo_gradient(&st.x);
        g.a().tr_gaxpy(-sq, &ev, &mut r1);
        g.g().tr_gaxpy(-1.0, &st.lambda, &mut r1);
        let r2: Vec<f64> = g.slack(&st.x).iter().zip(&ev).map(|(s, e)| s - sq / e).collect();

        let mut rhs = vec![0.0; n + p];
        for (o, r) in rhs[..n].iter_mut().zip(&r1) {
            *o = -r;
        }
        let weighted: Vec<f64> = r2.iter().zip(&ev).map(|(r, e)| r * e * e).collect();
        g.a().tr_gaxpy(-1.0, &weighted, &mut rhs[..n]);
        let eqr = g.eq_residual(&st.x);
        for j in 0..p {
            rhs[n + j] = -eqr[j];
        }
        self.solve_refined(st, &ev, &mut rhs);
        let dlam = rhs.split_off(n);
        let dx = rhs;

        let mut adx = r2;
        g.a().gaxpy(1.0, &dx, &mut adx);
        let dv: Vec<f64> = adx.iter().zip(&ev).map(|(r, e)| -e * r / sq).collect();
        (dx, dlam, dv)
    }

    fn damped_step(&mut self, st: &mut IpmState) -> Result<StepInfo> {
        let reused = self.ensure_factor(st)?;
        let (dx, dlam, dv) = self.direction(st);
        if !(all_finite(&dx) && all_finite(&dlam) && all_finite(&dv)) {
            return Err(Error::NonFinite("Newton direction".into()));
        }
        let dv_inf = norm_inf(&dv);
        let alpha = self.cfg.step_size(dv_inf);
        for (x, d) in st.x.iter_mut().zip(&dx) {
            *x += d;
        }
        for (l, d) in st.lambda.iter_mut().zip(&dlam) {
            *l += d;
        }
        let c = self.cfg.v_clamp;
        let mut clamped = false;
        for (v, d) in st.v.iter_mut().zip(&dv) {
            let t = *v + alpha * d;
            if t.abs() > c {
                clamped = true;
            }
            *v = t.clamp(-c, c);
        }
        st.dv = dv;
        st.dv_floor = 0.0;
        Ok(StepInfo {
            dv_inf,
            alpha,
            reused,
            clamped,
        })
    }

    /// Up to `eta` damped steps, stopping early once `‖Δv‖∞` is below `τ` or
    /// its rounding level.
    fn newton(
        &mut self,
        st: &mut IpmState,
        eta: usize,
        mut record: impl FnMut(&IpmState, &StepInfo),
    ) -> Result<usize> {
        let mut prev = f64::INFINITY;
        for k in 1..=eta {
            let info = self.damped_step(st)?;
            record(st, &info);
            if info.dv_inf <= self.cfg.tau {
                return Ok(k);
            }
            if info.dv_inf < ROUNDING_CHECK && info.dv_inf > STAGNATION_RATIO * prev {
                st.dv_floor = info.dv_inf;
                return Ok(k);
            }
            prev = info.dv_inf;
        }
        Ok(eta)
    }

    /// Coefficients of `Δv(μ) = a − c/√μ` at the current iterate.
    fn affine_dv(&mut self, st: &mut IpmState) -> Result<(Vec<f64>, Vec<f64>)> {
        self.ensure_factor(st)?;
        let g = self.game;
        let (n, p) = (g.dim(), g.m_eq());
        let ev: Vec<f64> = st.v.iter().map(|t| t.exp()).collect();
        let slack = g.slack(&st.x);

        let mut rhs0 = vec![0.0; n + p];
        let mut r1c = g.pseudo_gradient(&st.x);
        g.g().tr_gaxpy(-1.0, &st.lambda, &mut r1c);
        for (o, r) in rhs0[..n].iter_mut().zip(&r1c) {
            *o = -r;
        }
        let weighted: Vec<f64> = slack.iter().zip(&ev).map(|(s, e)| s * e * e).collect();
        g.a().tr_gaxpy(-1.0, &weighted, &mut rhs0[..n]);
        let eqr = g.eq_residual(&st.x);
        for j in 0..p {
            rhs0[n + j] = -eqr[j];
        }
        let mut rhs1 = vec![0.0; n + p];
        g.a().tr_gaxpy(2.0, &ev, &mut rhs1[..n]);

        self.solve_refined(st, &ev, &mut rhs0);
        self.solve_refined(st, &ev, &mut rhs1);
        let mut ad0 = vec![0.0; g.m_ineq()];
        g.a().gaxpy(1.0, &rhs0[..n], &mut ad0);
        let mut ad1 = vec![0.0; g.m_ineq()];
        g.a().gaxpy(1.0, &rhs1[..n], &mut ad1);
        let a = ev.iter().zip(&ad1).map(|(e, d)| 1.0 - e * d).collect();
        let c = ev
            .iter()
            .zip(slack.iter().zip(&ad0))
            .map(|(e, (s, d))| e * (s + d))
            .collect();
        Ok((a, c))
    }

    /// Smallest `μ' ∈ [floor, μ]` with `‖Δv(v, μ')‖∞ <= 1`, or `μ` if none.
    fn line_search(&mut self, st: &mut IpmState, floor: f64) -> Result<f64> {
        let mu = st.mu;
        if floor >= mu {
            return Ok(mu);
        }
        let (a, c) = self.affine_dv(st)?;
        if !(all_finite(&a) && all_finite(&c)) {
            return Err(Error::NonFinite("line search".into()));
        }
        Ok(match self.cfg.line_search {
            LineSearchMode::Exact => exact_mu(&a, &c, mu, floor),
            LineSearchMode::Bisection => {
                bisect_mu(&a, &c, mu, floor, self.cfg.ls_rel_tol, self.cfg.ls_max_trials)
            }
        })
    }
}

fn dv_inf_at(a: &[f64], c: &[f64], mu: f64) -> f64 {
    let t = 1.0 / mu.sqrt();
    a.iter().zip(c).fold(0.0f64, |m, (ai, ci)| m.max((ai - t * ci).abs()))
}

/// Closed form: each `|a_i − t c_i| <= 1` is an interval in `t = 1/√μ`.
fn exact_mu(a: &[f64], c: &[f64], mu: f64, floor: f64) -> f64 {
    let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
    for (&ai, &ci) in a.iter().zip(c) {
        if ci == 0.0 {
            if ai.abs() > 1.0 {
                return mu;
            }
            continue;
        }
        let (t1, t2) = ((ai - 1.0) / ci, (ai + 1.0) / ci);
        lo = lo.max(t1.min(t2));
        hi = hi.min(t1.max(t2));
    }
    let (t_cur, t_floor) = (1.0 / mu.sqrt(), 1.0 / floor.sqrt());
    if lo > hi || hi < t_cur {
        mu
    } else if hi >= t_floor {
        if lo <= t_floor {
            floor
        } else {
            mu
        }
    } else {
        (1.0 / (hi * hi)).min(mu)
    }
}

/// Bisection on `log10 μ`, assuming admissibility is monotone in `μ`.
fn bisect_mu(a: &[f64], c: &[f64], mu: f64, floor: f64, rel_tol: f64, trials: usize) -> f64 {
    let ok = |m: f64| dv_inf_at(a, c, m) <= 1.0;
    if ok(floor) {
        return floor;
    }
    let (mut good, mut bad) = (mu.log10(), floor.log10());
    let stop = (1.0 + rel_tol).log10();
    for _ in 0..trials {
        if good - bad <= stop {
            break;
        }
        let mid = 0.5 * (good + bad);
        if ok(10f64.powf(mid)) {
            good = mid;
        } else {
            bad = mid;
        }
    }
    if good == mu.log10() {
        mu
    } else {
        10f64.powf(good).min(mu)
    }
}

fn trace_row(game: &QuadraticGame, st: &IpmState, outer: usize, phase: Phase, s: &StepInfo) -> IterTraceRow {
    let (nu, sl) = st.multipliers();
    let min_multiplier = nu.iter().chain(&sl).fold(f64::INFINITY, |m, v| m.min(*v));
    let complementarity_error = nu
        .iter()
        .zip(&sl)
        .fold(0.0f64, |m, (a, b)| m.max((a * b - st.mu).abs()));
    IterTraceRow {
        outer,
        phase,
        mu: st.mu,
        residual: game.vi_residual(&st.x, &st.v, &st.lambda, st.mu),
        dv_inf: s.dv_inf,
        alpha: s.alpha,
        reused: s.reused,
        clamped: s.clamped,
        min_multiplier,
        complementarity_error,
    }
}

/// Newton direction from the plain reduced system at `(v, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonDirection {
    pub x: Vec<f64>,
    pub dv: Vec<f64>,
    pub lambda: Vec<f64>,
    pub alpha: f64,
}

/// Solves `[[W + AᵀU(2v)A, −Gᵀ], [G, γI]] (x⁺, λ⁺) = (2√μAᵀe^{v} − f − AᵀU(2v)b, −h)`
/// and back-substitutes `Δv = 1 − e^{v} ⊙ (A x⁺ + b)/√μ`.
pub fn newton_direction(game: &QuadraticGame, mu: f64, v: &[f64], cfg: &IpmConfig) -> Result<NewtonDirection> {
    check_point(game, mu, v)?;
    let sys = KktSystem::new(game, cfg.gamma, cfg.lu)?;
    let mut eng = Engine {
        game,
        sys: &sys,
        cfg,
        factorizations: 0,
    };
    let mut st = IpmState::at(game, v.to_vec(), mu);
    eng.ensure_factor(&mut st)?;
    // From a zero base the increments are the new iterate itself.
    let (x, lambda, dv) = eng.direction(&st);
    if !(all_finite(&x) && all_finite(&dv) && all_finite(&lambda)) {
        return Err(Error::NonFinite("Newton direction".into()));
    }
    let alpha = cfg.step_size(norm_inf(&dv));
    Ok(NewtonDirection { x, dv, lambda, alpha })
}

/// Result of [`newton`].
#[derive(Debug, Clone, PartialEq)]
pub struct NewtonOutcome {
    pub x: Vec<f64>,
    pub v: Vec<f64>,
    pub lambda: Vec<f64>,
    pub steps: usize,
    pub dv_inf: f64,
}

/// Up to `eta` damped Newton steps at fixed `μ` starting from `v`.
pub fn newton(game: &QuadraticGame, mu: f64, v: &[f64], eta: usize, cfg: &IpmConfig) -> Result<NewtonOutcome> {
    check_point(game, mu, v)?;
    if eta == 0 {
        return Err(Error::InvalidParams("Newton cap must be at least 1".into()));
    }
    let sys = KktSystem::new(game, cfg.gamma, cfg.lu)?;
    let mut eng = Engine {
        game,
        sys: &sys,
        cfg,
        factorizations: 0,
    };
    let mut st = IpmState::at(game, v.to_vec(), mu);
    let steps = eng.newton(&mut st, eta, |_, _| {})?;
    Ok(NewtonOutcome {
        dv_inf: st.dv_inf(),
        x: st.x,
        v: st.v,
        lambda: st.lambda,
        steps,
    })
}

/// `min(μ, inf{μ' >= ε/100 : ‖Δv(v, μ')‖∞ <= 1})`, using one factorization
/// for every trial value.
pub fn line_search_mu(game: &QuadraticGame, mu: f64, v: &[f64], cfg: &IpmConfig) -> Result<f64> {
    check_point(game, mu, v)?;
    let sys = KktSystem::new(game, cfg.gamma, cfg.lu)?;
    let mut eng = Engine {
        game,
        sys: &sys,
        cfg,
        factorizations: 0,
    };
    let mut st = IpmState::at(game, v.to_vec(), mu);
    eng.line_search(&mut st, cfg.eps / 100.0)
}

fn check_point(game: &QuadraticGame, mu: f64, v: &[f64]) -> Result<()> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::InvalidParams(format!("barrier parameter must be positive, got {mu}")));
    }
    crate::error::dim_check("length of v", game.m_ineq(), v.len())?;
    if !all_finite(v) {
        return Err(Error::NonFinite("v".into()));
    }
    Ok(())
}

/// Solves a game, keeping the symbolic analysis of its Newton matrix so that
/// further games with the same sparsity pattern skip it.
#[derive(Debug, Clone)]
pub struct Solver {
    cfg: IpmConfig,
    sys: Option<KktSystem>,
}

impl Solver {
    pub fn new(cfg: IpmConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg, sys: None })
    }

    pub fn config(&self) -> &IpmConfig {
        &self.cfg
    }

    pub fn solve(&mut self, game: &QuadraticGame) -> Result<SolveResult> {
        let start = Instant::now();
        let cfg = &self.cfg;
        let (scaled, record) = if cfg.rescale {
            let (g, r) = game.rescale();
            (g, Some(r))
        } else {
            (game.clone(), None)
        };
        let omega = record.as_ref().map_or(1.0, |r| r.omega);
        // Complementarity on the original game is ω·μ.
        let mu_target = cfg.eps / omega;
        let mu_floor = mu_target / 100.0;

        let sys = match self.sys.take() {
            Some(mut s) if s.matches(&scaled) => {
                s.refresh(&scaled)?;
                s
            }
            _ => KktSystem::new(&scaled, cfg.gamma, cfg.lu)?,
        };
        let mut eng = Engine {
            game: &scaled,
            sys: &sys,
            cfg,
            factorizations: 0,
        };
        let mut st = IpmState::initial(&scaled);
        let mut rows = Vec::new();
        let mut dv_inf = f64::INFINITY;
        let mut outer = 0usize;
        let mut stall = 0usize;
        let mut run = |eng: &mut Engine, st: &mut IpmState, rows: &mut Vec<IterTraceRow>| -> Result<bool> {
            let mut stalled = false;
            while dv_inf > 1.0 || st.mu > mu_target {
                if outer >= cfg.max_outer {
                    return Ok(false);
                }
                outer += 1;
                let mu_new = eng.line_search(st, mu_floor)?;
                let phase = if mu_new < st.mu {
                    stall = 0;
                    Phase::Reduction
                } else {
                    // Recentering from far away is expected to hold μ fixed;
                    // only a centred iterate that cannot move counts.
                    if dv_inf <= 1.0 {
                        stall += 1;
                    }
                    Phase::Centering
                };
                st.mu = mu_new;
                let o = outer;
                eng.newton(st, cfg.eta1, |s, info| rows.push(trace_row(&scaled, s, o, phase, info)))?;
                dv_inf = st.dv_inf();
                if stall >= cfg.stall_limit && dv_inf <= 1.0 {
                    stalled = true;
                    break;
                }
            }
            let o = outer;
            eng.newton(st, cfg.eta2, |s, info| {
                rows.push(trace_row(&scaled, s, o, Phase::Terminal, info))
            })?;
            dv_inf = st.dv_inf();
            Ok(!stalled && dv_inf <= cfg.tau.max(st.dv_floor()) && st.mu <= mu_target)
        };

        let mut status = match run(&mut eng, &mut st, &mut rows) {
            Ok(true) => SolveStatus::Converged,
            Ok(false) => SolveStatus::MaxIterations,
            Err(Error::Singular { .. }) => SolveStatus::SingularSystem,
            Err(Error::NonFinite(_)) => SolveStatus::Diverged,
            Err(e) => {
                self.sys = Some(sys);
                return Err(e);
            }
        };
        if status == SolveStatus::Converged && !(all_finite(&st.x) && all_finite(&st.lambda)) {
            status = SolveStatus::Diverged;
        }
        let factorizations = eng.factorizations;

        let (nu, s) = st.multipliers();
        let scaled_point = KktPoint {
            x: st.x.clone(),
            nu,
            lambda: st.lambda.clone(),
            s,
        };
        let point = match &record {
            Some(r) => r.unscale(&scaled_point),
            None => scaled_point,
        };
        let final_residual = game.kkt_residual(&point);
        self.sys = Some(sys);
        Ok(SolveResult {
            point,
            status,
            final_residual,
            iterations: rows.len(),
            outer_iterations: outer,
            factorizations,
            mu: st.mu,
            trace: Trace::Ipm(rows),
            wall_time: start.elapsed(),
        })
    }
}

/// Runs the interior point method on `game`.
///
/// Invalid configurations are errors; numerical failures are reported through
/// [`SolveResult::status`].
pub fn solve(game: &QuadraticGame, cfg: &IpmConfig) -> Result<SolveResult> {
    Solver::new(cfg.clone())?.solve(game)
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

    fn central_v() -> f64 {
        -(0.5f64).asinh()
    }

    #[test]
    fn direction_at_central_point_is_zero() {
        let d = newton_direction(&scalar_qp(), 1.0, &[central_v()], &IpmConfig::default()).unwrap();
        assert!(d.dv[0].abs() <= 1e-6);
        assert_eq!(d.alpha, 1.0);
        assert!((d.x[0] - 1.618_033_988_749_895).abs() < 1e-9);
    }

    #[test]
    fn direction_from_v_zero() {
        let d = newton_direction(&scalar_qp(), 1.0, &[0.0], &IpmConfig::default()).unwrap();
        assert!((d.x[0] - 1.5).abs() < 1e-12);
        assert!((d.dv[0] + 0.5).abs() < 1e-12);
        assert_eq!(d.alpha, 1.0);
    }

    #[test]
    fn step_size_formula() {
        let cfg = IpmConfig::default();
        assert_eq!(cfg.step_size(2.0), 0.125);
        assert_eq!(cfg.step_size(0.7), 1.0);
    }

    #[test]
    fn newton_converges_on_scalar_path() {
        let cfg = IpmConfig::default();
        let out = newton(&scalar_qp(), 1.0, &[0.0], 10, &cfg).unwrap();
        assert!(out.steps <= 6, "{} steps", out.steps);
        assert!((out.v[0] - central_v()).abs() < 1e-6);
        assert!((out.x[0] - 1.618_033_988_749_895).abs() < 1e-6);

        let fixed = newton(&scalar_qp(), 1.0, &[central_v()], 10, &cfg).unwrap();
        assert_eq!(fixed.steps, 1);
        let capped = newton(&scalar_qp(), 1.0, &[3.0], 1, &cfg).unwrap();
        assert_eq!(capped.steps, 1);
        assert!(capped.dv_inf > cfg.tau);
    }

    #[test]
    fn line_search_modes_agree_on_scalar_path() {
        let g = scalar_qp();
        let v = [central_v()];
        let exact = line_search_mu(&g, 1.0, &v, &IpmConfig::default()).unwrap();
        let cfg = IpmConfig {
            line_search: LineSearchMode::Bisection,
            ..IpmConfig::default()
        };
        let bis = line_search_mu(&g, 1.0, &v, &cfg).unwrap();
        assert!(exact < 1.0 && bis < 1.0);
        assert!(bis >= exact * (1.0 - 1e-12));
        assert!(bis <= exact * 1.001 + 1e-15);
        let at = newton_direction(&g, bis, &v, &cfg).unwrap();
        let dv = norm_inf(&at.dv);
        assert!(dv <= 1.0 + 1e-9 && dv >= 1.0 - 1e-3, "{dv}");
    }

    #[test]
    fn exact_line_search_edge_cases() {
        // c = 0 with |a| > 1: nothing qualifies.
        assert_eq!(exact_mu(&[2.0], &[0.0], 0.5, 1e-8), 0.5);
        // a = 0.5, c = 0.1: admissible t in [-5, 15].
        let m = exact_mu(&[0.5], &[0.1], 1.0, 1e-8);
        assert!((m - 1.0 / 225.0).abs() < 1e-15);
        // The whole range qualifies.
        assert_eq!(exact_mu(&[0.0], &[0.0], 1.0, 1e-8), 1e-8);
    }

    #[test]
    fn scalar_qp_solves() {
        let r = solve(&scalar_qp(), &IpmConfig::default()).unwrap();
        assert!(r.converged(), "{:?}", r.status);
        assert!((r.point.x[0] - 1.0).abs() <= 1e-5);
        assert!(r.point.nu[0] <= 1e-5);
        assert!((r.point.s[0] - 1.0).abs() <= 1e-5);
        assert!(r.final_residual <= 1e-5);
    }

    #[test]
    fn invalid_config_is_an_error() {
        let cfg = IpmConfig {
            eta1: 0,
            ..IpmConfig::default()
        };
        assert!(matches!(solve(&scalar_qp(), &cfg), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn reuse_does_not_change_iterates() {
        let g = scalar_qp();
        let a = solve(&g, &IpmConfig::default()).unwrap();
        let b = solve(
            &g,
            &IpmConfig {
                reuse_factorization: false,
                ..IpmConfig::default()
            },
        )
        .unwrap();
        assert_eq!(a.point, b.point);
        assert!(b.factorizations > a.factorizations);
    }
}
