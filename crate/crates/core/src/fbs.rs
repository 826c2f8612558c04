//! Forward-backward splitting baseline: the projected pseudo-gradient
//! iteration `x⁺ = P_χ(x − γ_f (W x + f))`.
//!
//! The projection onto χ is itself a strongly monotone game (`W = I`,
//! `f = −z`) and is solved with the interior point method. Its sparsity
//! pattern never changes, so one symbolic analysis serves every projection.

use std::time::Instant;

use crate::error::{Error, Result};
use crate::game::{KktPoint, QuadraticGame};
use crate::ipm::{IpmConfig, SolveResult, SolveStatus, Solver, Trace};
use crate::linalg::{all_finite, norm2, sub};
use crate::sparse::SparseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct FbsConfig {
    /// Step size `γ_f`; defaults to `0.9 σ / L²` with `L ≈ ‖W‖₂`.
    pub step: Option<f64>,
    /// Relative stopping tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Reference solution; when present the stopping rule is
    /// `‖x − x*‖ / ‖x*‖ <= tol`, otherwise `‖x⁺ − x‖ / max(1, ‖x‖) <= tol`.
    pub reference: Option<Vec<f64>>,
    /// Starting point (defaults to zero).
    pub x0: Option<Vec<f64>>,
    /// Power iterations used to estimate `‖W‖₂`.
    pub power_iters: usize,
    /// Solver settings for the projection subproblems.
    pub projection: IpmConfig,
}

impl Default for FbsConfig {
    fn default() -> Self {
        Self {
            step: None,
            tol: 1e-6,
            max_iter: 100_000,
            reference: None,
            x0: None,
            power_iters: 50,
            projection: IpmConfig::with_tolerances(1e-10, 1e-10),
        }
    }
}

/// Per-iteration record.
#[derive(Debug, Clone, PartialEq)]
pub struct FbsTraceRow {
    pub iter: usize,
    /// Value compared against the stopping tolerance.
    pub error: f64,
    /// Newton steps spent in this iteration's projection.
    pub projection_steps: usize,
}

/// Fallback used when the game is not strongly monotone and no step is given.
/// Convergence is not guaranteed in that case.
const WEAK_STEP: f64 = 0.1;

/// Default step `0.9 σ / L²`.
pub fn default_step(game: &QuadraticGame, power_iters: usize) -> f64 {
    let sigma = game.monotonicity_constant();
    let l = game.w_spectral_norm(power_iters);
    if l == 0.0 {
        return 1.0;
    }
    if sigma > 0.0 {
        0.9 * sigma / (l * l)
    } else {
        WEAK_STEP / (l * l)
    }
}

/// Euclidean projection onto the feasible set of a fixed game.
#[derive(Debug, Clone)]
pub struct Projector {
    template: QuadraticGame,
    solver: Solver,
}

/// A projected point with the multipliers of its KKT system.
#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub x: Vec<f64>,
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub newton_steps: usize,
    pub factorizations: usize,
}

impl Projector {
    pub fn new(game: &QuadraticGame, cfg: IpmConfig) -> Result<Self> {
        let n = game.dim();
        let template = game.with_objective(SparseMatrix::identity(n), vec![0.0; n])?;
        Ok(Self {
            template,
            solver: Solver::new(cfg)?,
        })
    }

    pub fn project(&mut self, z: &[f64]) -> Result<Projection> {
        crate::error::dim_check("projected point", self.template.dim(), z.len())?;
        if !all_finite(z) {
            return Err(Error::NonFinite("projected point".into()));
        }
        let n = z.len();
        let game = self
            .template
            .with_objective(SparseMatrix::identity(n), z.iter().map(|v| -v).collect())?;
        let r = self.solver.solve(&game)?;
        if r.status != SolveStatus::Converged {
            return Err(Error::Projection(format!(
                "subproblem ended with status {} (residual {:e}); the feasible set may be empty",
                r.status.as_str(),
                r.final_residual
            )));
        }
        Ok(Projection {
            x: r.point.x,
            nu: r.point.nu,
            lambda: r.point.lambda,
            newton_steps: r.iterations,
            factorizations: r.factorizations,
        })
    }
}

/// `argmin ‖x − z‖²` over the feasible set of `game`.
pub fn project_chi(game: &QuadraticGame, z: &[f64]) -> Result<Vec<f64>> {
    Projector::new(game, FbsConfig::default().projection)?
        .project(z)
        .map(|p| p.x)
}

/// Runs forward-backward splitting.
pub fn fbs_solve(game: &QuadraticGame, cfg: &FbsConfig) -> Result<SolveResult> {
    let start = Instant::now();
    let n = game.dim();
    if !(cfg.tol > 0.0) {
        return Err(Error::InvalidParams("tolerance must be positive".into()));
    }
    if cfg.max_iter == 0 {
        return Err(Error::InvalidParams("max_iter must be at least 1".into()));
    }
    let step = match cfg.step {
        Some(s) if s > 0.0 && s.is_finite() => s,
        Some(s) => return Err(Error::InvalidParams(format!("step must be positive, got {s}"))),
        None => default_step(game, cfg.power_iters),
    };
    if let Some(r) = &cfg.reference {
        crate::error::dim_check("reference solution", n, r.len())?;
    }
    let mut x = match &cfg.x0 {
        Some(x0) => {
            crate::error::dim_check("starting point", n, x0.len())?;
            x0.clone()
        }
        None => vec![0.0; n],
    };
    let ref_norm = cfg.reference.as_ref().map(|r| norm2(r).max(f64::MIN_POSITIVE));

    let mut proj = Projector::new(game, cfg.projection.clone())?;
    let mut rows = Vec::new();
    let mut factorizations = 0;
    let mut last: Option<Projection> = None;
    let mut status = SolveStatus::MaxIterations;
    for k in 1..=cfg.max_iter {
        let grad = game.pseudo_gradient(&x);
        let z: Vec<f64> = x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
        if !all_finite(&z) {
            status = SolveStatus::Diverged;
            break;
        }
        let p = match proj.project(&z) {
            Ok(p) => p,
            Err(Error::Projection(_)) | Err(Error::NonFinite(_)) => {
                status = SolveStatus::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        factorizations += p.factorizations;
        let error = match (&cfg.reference, ref_norm) {
            (Some(r), Some(rn)) => norm2(&sub(&p.x, r)) / rn,
            _ => norm2(&sub(&p.x, &x)) / norm2(&x).max(1.0),
        };
        rows.push(FbsTraceRow {
            iter: k,
            error,
            projection_steps: p.newton_steps,
        });
        x.clone_from(&p.x);
        last = Some(p);
        if error <= cfg.tol {
            status = SolveStatus::Converged;
            break;
        }
    }

    // At a fixed point γ_f (W x + f) = Aᵀν_p + Gᵀλ_p, so the game's
    // multipliers are the projection's divided by the step.
    let (nu, lambda) = match &last {
        Some(p) => (
            p.nu.iter().map(|v| v / step).collect(),
            p.lambda.iter().map(|v| v / step).collect(),
        ),
        None => (vec![0.0; game.m_ineq()], vec![0.0; game.m_eq()]),
    };
    let point = KktPoint {
        s: game.slack(&x),
        x,
        nu,
        lambda,
    };
    let final_residual = game.kkt_residual(&point);
    Ok(SolveResult {
        point,
        status,
        final_residual,
        iterations: rows.len(),
        outer_iterations: rows.len(),
        factorizations,
        mu: 0.0,
        trace: Trace::Fbs(rows),
        wall_time: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn halfline(w: f64, f: f64) -> QuadraticGame {
        QuadraticGame::new(
            vec![1],
            SparseMatrix::diagonal(&[w]),
            vec![f],
            SparseMatrix::identity(1),
            vec![0.0],
            SparseMatrix::zeros(0, 1),
            vec![],
        )
        .unwrap()
    }

    #[test]
    fn projection_onto_halfline() {
        let g = halfline(1.0, 0.0);
        assert!(project_chi(&g, &[-3.0]).unwrap()[0].abs() < 1e-6);
        assert!((project_chi(&g, &[2.5]).unwrap()[0] - 2.5).abs() < 1e-6);
    }

    #[test]
    fn projection_onto_simplex() {
        let g = QuadraticGame::new(
            vec![2],
            SparseMatrix::identity(2),
            vec![0.0; 2],
            SparseMatrix::identity(2),
            vec![0.0; 2],
            SparseMatrix::from_dense(&[vec![1.0, 1.0]]).unwrap(),
            vec![-1.0],
        )
        .unwrap();
        let x = project_chi(&g, &[2.0, 0.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-6 && x[1].abs() < 1e-6, "{x:?}");
    }

    #[test]
    fn empty_set_is_reported() {
        // x >= 1 and -x >= 0.
        let g = QuadraticGame::new(
            vec![1],
            SparseMatrix::identity(1),
            vec![0.0],
            SparseMatrix::from_dense(&[vec![1.0], vec![-1.0]]).unwrap(),
            vec![-1.0, 0.0],
            SparseMatrix::zeros(0, 1),
            vec![],
        )
        .unwrap();
        assert!(matches!(project_chi(&g, &[0.5]), Err(Error::Projection(_))));
    }

    #[test]
    fn scalar_recurrence() {
        // x⁺ = max(0, 0.5 x + 0.5) → 1.
        let g = halfline(1.0, -1.0);
        let cfg = FbsConfig {
            step: Some(0.5),
            ..FbsConfig::default()
        };
        let r = fbs_solve(&g, &cfg).unwrap();
        assert!(r.converged());
        assert!((r.point.x[0] - 1.0).abs() < 1e-5);
        let errs: Vec<f64> = match &r.trace {
            Trace::Fbs(rows) => rows.iter().map(|r| r.error).collect(),
            _ => unreachable!(),
        };
        // x_k = 1 − 2^{−k}, so consecutive changes halve.
        assert!((errs[0] - 0.5).abs() < 1e-6);
        assert!((errs[1] - 0.25).abs() < 1e-6);
    }

    #[test]
    fn fixed_point_stops_after_one_iteration() {
        let g = halfline(1.0, -1.0);
        let cfg = FbsConfig {
            step: Some(0.5),
            x0: Some(vec![1.0]),
            reference: Some(vec![1.0]),
            ..FbsConfig::default()
        };
        let r = fbs_solve(&g, &cfg).unwrap();
        assert_eq!(r.iterations, 1);
        assert!((r.point.x[0] - 1.0).abs() < 1e-8);
    }
}
