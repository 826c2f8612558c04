//! `cqg`: solve, generate, inspect and benchmark convex quadratic games.
//!
//! Exit status: 0 on success, 1 when a check fails or an output cannot be
//! written, 2 for unreadable or invalid input, 3 when a solver fails.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use cqg::bench::{common_step, run_sweep, summarize, BenchOptions};
use cqg::fbs::{default_step, fbs_solve, FbsConfig};
use cqg::gamegen::{default_size, sweep_instances, GameKind, GameRecipe, TrafficParams};
use cqg::io::{write_bench, write_summary, write_trace, ProblemFile, SolutionFile};
use cqg::ipm::{self, IpmConfig};
use cqg::par::Execution;
use cqg::QuadraticGame;

#[derive(Parser)]
#[command(name = "cqg", version, about = "Variational equilibria of convex quadratic games")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and write the solution as JSON.
    Solve(SolveArgs),
    /// Write a benchmark game as a problem file.
    Generate(GenerateArgs),
    /// Print monotonicity, regularity and dimensions of a problem.
    Check(CheckArgs),
    /// Run a size or monotonicity sweep and write a CSV table.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Ipm,
    Fbs,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Kind {
    Ev,
    Market,
    Traffic,
}

impl From<Kind> for GameKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Ev => GameKind::Ev,
            Kind::Market => GameKind::Market,
            Kind::Traffic => GameKind::Traffic,
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    /// Problem file (JSON).
    input: PathBuf,
    #[arg(long, value_enum, default_value = "ipm")]
    method: Method,
    /// Target barrier level.
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    /// Newton termination threshold on the log-slack step.
    #[arg(long, default_value_t = 1e-6)]
    tau: f64,
    /// Solution file; standard output if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-iteration trace (CSV).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// FBS step size (default 0.9 σ / ‖W‖²).
    #[arg(long)]
    step: Option<f64>,
    /// FBS relative stopping tolerance.
    #[arg(long, default_value_t = 1e-6)]
    fbs_tol: f64,
    /// FBS iteration cap.
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
    /// Stop FBS against a high-precision IPM solution instead of on
    /// successive iterates.
    #[arg(long)]
    reference: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(value_enum)]
    kind: Kind,
    #[arg(long)]
    players: Option<usize>,
    /// EV charging horizon.
    #[arg(long)]
    horizon: Option<usize>,
    /// Market locations.
    #[arg(long)]
    locations: Option<usize>,
    /// Heterogeneity slope of the price factors `1 + k i` (default 0.01 for
    /// EV and market, 0.1 for traffic).
    #[arg(long)]
    k: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Problem file; standard output if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    input: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_enum)]
    game: Kind,
    /// Player counts as `lo:hi:step` (or a single count).
    #[arg(long, default_value = "5")]
    players: String,
    /// Slopes as `lo:hi` or `lo:hi:step` (or a single value). Without a step,
    /// eleven evenly spaced values are used.
    #[arg(long, default_value = "0.1")]
    k_range: String,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    /// Horizon (EV) or locations (market).
    #[arg(long)]
    size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Solvers to run.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "ipm,fbs")]
    solvers: Vec<Method>,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 1e-6)]
    tau: f64,
    /// FBS iteration cap.
    #[arg(long, default_value_t = 100_000)]
    fbs_max_iter: usize,
    /// FBS step: `auto` tunes `0.9 σ / ‖W‖²` per instance, `common` uses the
    /// smallest such step across the sweep, a number fixes it.
    #[arg(long, default_value = "auto")]
    fbs_step: String,
    /// Run instances one after another even when threads are available.
    #[arg(long)]
    sequential: bool,
    /// Benchmark table (CSV); standard output if omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-group mean and standard deviation (CSV).
    #[arg(long)]
    summary: Option<PathBuf>,
}

/// A failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

const EXIT_CHECK: u8 = 1;
const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(a) => solve(a),
        Command::Generate(a) => generate(a),
        Command::Check(a) => check(a),
        Command::Bench(a) => bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn load(path: &Path) -> Result<QuadraticGame, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))?;
    ProblemFile::parse(&text)
        .and_then(|p| p.to_game())
        .map_err(|e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display())))
}

/// Writes `text` to `path`, or to standard output.
fn emit(path: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CmdResult {
    let result = match path {
        Some(p) => File::create(p).and_then(|f| {
            let mut w = BufWriter::new(f);
            write(&mut w)?;
            w.flush()
        }),
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock).and_then(|_| lock.flush())
        }
    };
    result.map_err(|e| {
        let target = path.map_or("standard output".into(), |p| p.display().to_string());
        Failure::new(EXIT_CHECK, format!("cannot write {target}: {e}"))
    })
}

fn to_io(e: cqg::Error) -> io::Error {
    io::Error::other(e.to_string())
}

fn ipm_echo(cfg: &IpmConfig) -> serde_json::Value {
    json!({
        "eps": cfg.eps,
        "tau": cfg.tau,
        "gamma": cfg.gamma,
        "beta": cfg.beta,
        "eta1": cfg.eta1,
        "eta2": cfg.eta2,
        "max_outer": cfg.max_outer,
    })
}

fn solve(a: SolveArgs) -> CmdResult {
    let game = load(&a.input)?;
    let cfg = IpmConfig::with_tolerances(a.eps, a.tau);
    cfg.validate().map_err(|e| Failure::new(EXIT_INPUT, e.to_string()))?;
    let solver_error = |e: cqg::Error| Failure::new(EXIT_SOLVER, e.to_string());

    let (name, result, echo, fbs_step) = match a.method {
        Method::Ipm => {
            let r = ipm::solve(&game, &cfg).map_err(solver_error)?;
            ("ipm", r, ipm_echo(&cfg), None)
        }
        Method::Fbs => {
            let reference = if a.reference {
                let r = ipm::solve(&game, &IpmConfig::with_tolerances(1e-9, 1e-9))
                    .map_err(solver_error)?;
                if !r.converged() {
                    return Err(Failure::new(
                        EXIT_SOLVER,
                        format!("reference solve ended with status {}", r.status.as_str()),
                    ));
                }
                Some(r.point.x)
            } else {
                None
            };
            let fcfg = FbsConfig {
                step: a.step,
                tol: a.fbs_tol,
                max_iter: a.max_iter,
                reference,
                ..FbsConfig::default()
            };
            let step = a.step.unwrap_or_else(|| default_step(&game, fcfg.power_iters));
            let r = fbs_solve(&game, &fcfg).map_err(|e| match e {
                cqg::Error::InvalidParams(_) => Failure::new(EXIT_INPUT, e.to_string()),
                e => solver_error(e),
            })?;
            let echo = json!({
                "step": step,
                "tol": fcfg.tol,
                "max_iter": fcfg.max_iter,
                "reference": a.reference,
            });
            ("fbs", r, echo, Some(step))
        }
    };

    let file = SolutionFile::new(name, &result, echo);
    emit(a.output.as_deref(), |w| w.write_all(file.to_json().as_bytes()))?;
    if let Some(path) = &a.trace {
        emit(Some(path), |w| write_trace(w, &result.trace, fbs_step).map_err(to_io))?;
    }
    if result.converged() {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_SOLVER,
            format!(
                "{name} ended with status {} after {} iterations (KKT residual {:e})",
                result.status.as_str(),
                result.iterations,
                result.final_residual
            ),
        ))
    }
}

fn generate(a: GenerateArgs) -> CmdResult {
    let kind = GameKind::from(a.kind);
    let invalid = |m: String| Failure::new(EXIT_INPUT, m);
    let size = match kind {
        GameKind::Ev if a.locations.is_some() => {
            return Err(invalid("--locations applies to the market game".into()))
        }
        GameKind::Market if a.horizon.is_some() => {
            return Err(invalid("--horizon applies to the EV game".into()))
        }
        GameKind::Traffic if a.players.is_some() || a.horizon.is_some() || a.locations.is_some() => {
            return Err(invalid("the traffic instance is fixed and takes no size flags".into()))
        }
        GameKind::Ev => a.horizon.unwrap_or(default_size(kind)),
        GameKind::Market => a.locations.unwrap_or(default_size(kind)),
        GameKind::Traffic => default_size(kind),
    };
    let players = a.players.unwrap_or(10);
    let k = a.k.unwrap_or(match kind {
        GameKind::Traffic => TrafficParams::default().k,
        _ => 0.01,
    });
    let recipe = GameRecipe::random(kind, players, size, k, a.seed)
        .map_err(|e| invalid(e.to_string()))?;
    let game = recipe.build().map_err(|e| invalid(e.to_string()))?;
    let meta = json!({
        "kind": kind.as_str(),
        "players": game.num_players(),
        "size": size,
        "k": k,
        "seed": a.seed,
    });
    let text = ProblemFile::from_game(&game, Some(meta)).to_json();
    emit(a.output.as_deref(), |w| w.write_all(text.as_bytes()))
}

fn check(a: CheckArgs) -> CmdResult {
    let game = load(&a.input)?;
    let sigma = game.monotonicity_constant();
    let regularity = game.regularity();
    let dims: Vec<String> = game.block_dims().iter().map(|d| d.to_string()).collect();
    println!("players: {}", game.num_players());
    println!("block dimensions: [{}]", dims.join(", "));
    println!("variables: {}", game.dim());
    println!("inequality rows: {}", game.m_ineq());
    println!("equality rows: {}", game.m_eq());
    println!("monotonicity constant (sigma): {sigma:.6e}");
    println!("regularity: {regularity:.6e}");
    println!("potential game: {}", if game.is_potential() { "yes" } else { "no" });
    if sigma < 0.0 {
        println!("warning: the game is not monotone");
    }
    if regularity > 0.0 {
        Ok(())
    } else {
        Err(Failure::new(
            EXIT_CHECK,
            "regularity condition fails: the symmetric part of W plus AᵀA is not positive definite",
        ))
    }
}

fn parse_range_usize(text: &str) -> Result<Vec<usize>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<usize>().map_err(|e| format!("'{s}' in '{text}': {e}"));
    let (lo, hi, step) = match parts.as_slice() {
        [v] => (num(v)?, num(v)?, 1),
        [lo, hi] => (num(lo)?, num(hi)?, 1),
        [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
        _ => return Err(format!("expected lo:hi:step, got '{text}'")),
    };
    if step == 0 || lo == 0 || hi < lo {
        return Err(format!("range '{text}' needs 1 <= lo <= hi and a positive step"));
    }
    Ok((lo..=hi).step_by(step).collect())
}

fn parse_range_f64(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let num = |s: &str| s.trim().parse::<f64>().map_err(|e| format!("'{s}' in '{text}': {e}"));
    let (lo, hi, step) = match parts.as_slice() {
        [v] => return Ok(vec![num(v)?]),
        [lo, hi] => {
            let (lo, hi) = (num(lo)?, num(hi)?);
            (lo, hi, (hi - lo) / 10.0)
        }
        [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
        _ => return Err(format!("expected lo:hi[:step], got '{text}'")),
    };
    if !(lo.is_finite() && hi.is_finite()) || hi < lo {
        return Err(format!("range '{text}' needs finite lo <= hi"));
    }
    if hi == lo {
        return Ok(vec![lo]);
    }
    if !(step > 0.0) {
        return Err(format!("range '{text}' needs a positive step"));
    }
    // Counting steps avoids drift from repeated addition.
    let count = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=count).map(|i| lo + step * i as f64).collect())
}

fn bench(a: BenchArgs) -> CmdResult {
    let invalid = |m: String| Failure::new(EXIT_INPUT, m);
    let kind = GameKind::from(a.game);
    let players = parse_range_usize(&a.players).map_err(invalid)?;
    let ks = parse_range_f64(&a.k_range).map_err(invalid)?;
    let size = a.size.unwrap_or(default_size(kind));
    let instances = sweep_instances(kind, &players, size, &ks, a.seed).map_err(|e| invalid(e.to_string()))?;

    let ipm = IpmConfig::with_tolerances(a.eps, a.tau);
    ipm.validate().map_err(|e| invalid(e.to_string()))?;
    let mut fbs = FbsConfig {
        max_iter: a.fbs_max_iter,
        ..FbsConfig::default()
    };
    fbs.step = match a.fbs_step.as_str() {
        "auto" => None,
        "common" => Some(common_step(&instances, fbs.power_iters).map_err(|e| invalid(e.to_string()))?),
        v => match v.parse::<f64>() {
            Ok(s) if s > 0.0 && s.is_finite() => Some(s),
            _ => return Err(invalid(format!("--fbs-step expects auto, common or a positive number, got '{v}'"))),
        },
    };
    let opts = BenchOptions {
        reps: a.reps,
        ipm,
        fbs,
        run_ipm: a.solvers.contains(&Method::Ipm),
        run_fbs: a.solvers.contains(&Method::Fbs),
        execution: if a.sequential {
            Execution::Sequential
        } else {
            Execution::Parallel
        },
        ..BenchOptions::default()
    };
    if opts.reps == 0 {
        return Err(invalid("--reps must be at least 1".into()));
    }
    let rows = run_sweep(&instances, &opts).map_err(|e| Failure::new(EXIT_SOLVER, e.to_string()))?;
    emit(a.output.as_deref(), |w| write_bench(w, &rows).map_err(to_io))?;
    if let Some(path) = &a.summary {
        let summary = summarize(&rows);
        emit(Some(path), |w| write_summary(w, &summary).map_err(to_io))?;
    }
    Ok(())
}
