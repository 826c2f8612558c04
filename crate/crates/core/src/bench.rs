//! Benchmark sweeps comparing the interior point method with forward-backward
//! splitting.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fbs::{default_step, fbs_solve, FbsConfig};
use crate::gamegen::SweepInstance;
use crate::ipm::{self, IpmConfig, SolveResult};
use crate::par::Execution;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub game: String,
    #[serde(rename = "N")]
    pub players: usize,
    pub k: f64,
    pub sigma: f64,
    pub solver: String,
    pub rep: usize,
    /// Newton steps for the IPM, iterations for FBS.
    pub iterations: usize,
    /// Outer iterations for the IPM; equal to `iterations` for FBS.
    pub outer_iterations: usize,
    pub wall_time_ms: f64,
    pub final_residual: f64,
    pub status: String,
}

impl BenchRow {
    pub const HEADER: [&'static str; 11] = [
        "game",
        "N",
        "k",
        "sigma",
        "solver",
        "rep",
        "iterations",
        "outer_iterations",
        "wall_time_ms",
        "final_residual",
        "status",
    ];
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub reps: usize,
    pub ipm: IpmConfig,
    /// Settings of the high-precision solve that provides the FBS reference.
    pub reference: IpmConfig,
    pub fbs: FbsConfig,
    pub run_ipm: bool,
    pub run_fbs: bool,
    pub execution: Execution,
}

impl Default for BenchOptions {
    fn default() -> Self {
        Self {
            reps: 1,
            ipm: IpmConfig::default(),
            reference: IpmConfig::with_tolerances(1e-9, 1e-9),
            fbs: FbsConfig::default(),
            run_ipm: true,
            run_fbs: true,
            execution: Execution::default(),
        }
    }
}

fn row(inst: &SweepInstance, sigma: f64, solver: &str, rep: usize, r: &SolveResult) -> BenchRow {
    BenchRow {
        game: inst.kind.as_str().into(),
        players: inst.players,
        k: inst.k,
        sigma,
        solver: solver.into(),
        rep,
        iterations: r.iterations,
        outer_iterations: r.outer_iterations,
        wall_time_ms: r.wall_time.as_secs_f64() * 1e3,
        final_residual: r.final_residual,
        status: r.status.as_str().into(),
    }
}

fn bench_instance(inst: &SweepInstance, opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    let game = &inst.game;
    let sigma = game.monotonicity_constant();
    let context = |e: Error| {
        Error::InvalidGame(format!("{} N={} k={}: {e}", inst.kind, inst.players, inst.k))
    };
    let mut rows = Vec::with_capacity(2 * opts.reps);
    let mut fbs_cfg = opts.fbs.clone();
    if opts.run_fbs {
        let reference = ipm::solve(game, &opts.reference).map_err(context)?;
        if !reference.converged() {
            return Err(context(Error::InvalidGame(format!(
                "reference solve ended with status {}",
                reference.status.as_str()
            ))));
        }
        fbs_cfg.reference = Some(reference.point.x);
    }
    for rep in 0..opts.reps {
        let ipm_result = if opts.run_ipm {
            Some(ipm::solve(game, &opts.ipm))
        } else {
            None
        };
        let fbs_result = if opts.run_fbs {
            Some(fbs_solve(game, &fbs_cfg))
        } else {
            None
        };
        let failed = |r: &Option<Result<SolveResult>>| {
            r.as_ref().is_some_and(|r| r.as_ref().map_or(true, |r| !r.converged()))
        };
        let all_failed = (opts.run_ipm || opts.run_fbs)
            && (!opts.run_ipm || failed(&ipm_result))
            && (!opts.run_fbs || failed(&fbs_result));
        if all_failed {
            let why = [&ipm_result, &fbs_result]
                .iter()
                .filter_map(|r| match r {
                    Some(Ok(r)) => Some(r.status.as_str().to_string()),
                    Some(Err(e)) => Some(e.to_string()),
                    None => None,
                })
                .collect::<Vec<_>>()
                .join("; ");
            return Err(context(Error::InvalidGame(format!("every solver failed ({why})"))));
        }
        for (name, r) in [("ipm", ipm_result), ("fbs", fbs_result)] {
            match r {
                Some(Ok(r)) => rows.push(row(inst, sigma, name, rep, &r)),
                Some(Err(e)) => rows.push(BenchRow {
                    game: inst.kind.as_str().into(),
                    players: inst.players,
                    k: inst.k,
                    sigma,
                    solver: name.into(),
                    rep,
                    iterations: 0,
                    outer_iterations: 0,
                    wall_time_ms: f64::NAN,
                    final_residual: f64::NAN,
                    status: format!("error: {e}"),
                }),
                None => {}
            }
        }
    }
    Ok(rows)
}

/// One FBS step for a whole sweep: `0.9 min σ / L²` over its members, the
/// largest step with guaranteed convergence on every instance. Keeping the
/// step fixed makes iteration counts reflect the games rather than a
/// per-instance tuning.
pub fn common_step(instances: &[SweepInstance], power_iters: usize) -> Result<f64> {
    let mut step = f64::INFINITY;
    for inst in instances {
        let sigma = inst.game.monotonicity_constant();
        if !(sigma > 0.0) {
            return Err(Error::InvalidGame(format!(
                "{} N={} k={} is not strongly monotone (σ = {sigma:e})",
                inst.kind, inst.players, inst.k
            )));
        }
        step = step.min(default_step(&inst.game, power_iters));
    }
    if step.is_finite() {
        Ok(step)
    } else {
        Err(Error::InvalidParams("sweep has no instances".into()))
    }
}

/// Runs every instance `reps` times with each enabled solver. Instances are
/// independent and may run concurrently; the rows come back in instance
/// order regardless.
pub fn run_sweep(instances: &[SweepInstance], opts: &BenchOptions) -> Result<Vec<BenchRow>> {
    if opts.reps == 0 {
        return Err(Error::InvalidParams("reps must be at least 1".into()));
    }
    let per = opts
        .execution
        .map(instances, |inst| bench_instance(inst, opts));
    let mut rows = Vec::new();
    for r in per {
        rows.extend(r?);
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub game: String,
    #[serde(rename = "N")]
    pub players: usize,
    pub k: f64,
    pub sigma: f64,
    pub solver: String,
    pub reps: usize,
    pub iterations_mean: f64,
    pub iterations_std: f64,
    pub wall_time_ms_mean: f64,
    pub wall_time_ms_std: f64,
}

/// Sample mean and standard deviation (zero for a single value).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

/// Groups rows by `(game, N, k, solver)` in first-seen order.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut groups: Vec<(&BenchRow, Vec<&BenchRow>)> = Vec::new();
    for r in rows {
        let key = |x: &BenchRow| (x.game.clone(), x.players, x.k.to_bits(), x.solver.clone());
        match groups.iter_mut().find(|(head, _)| key(head) == key(r)) {
            Some((_, members)) => members.push(r),
            None => groups.push((r, vec![r])),
        }
    }
    groups
        .into_iter()
        .map(|(head, members)| {
            let its: Vec<f64> = members.iter().map(|r| r.iterations as f64).collect();
            let times: Vec<f64> = members.iter().map(|r| r.wall_time_ms).collect();
            let (im, is) = mean_std(&its);
            let (tm, ts) = mean_std(&times);
            SummaryRow {
                game: head.game.clone(),
                players: head.players,
                k: head.k,
                sigma: head.sigma,
                solver: head.solver.clone(),
                reps: members.len(),
                iterations_mean: im,
                iterations_std: is,
                wall_time_ms_mean: tm,
                wall_time_ms_std: ts,
            }
        })
        .collect()
}

/// Average ranks, ties sharing the mean of their positions.
fn ranks(values: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut out = vec![0.0; values.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && values[idx[j + 1]] == values[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = r;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, _) = mean_std(&rx);
    let (my, _) = mean_std(&ry);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in rx.iter().zip(&ry) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return f64::NAN;
    }
    sxy / (sxx * syy).sqrt()
}
