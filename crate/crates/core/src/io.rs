//! File formats: problems and solutions as JSON, traces and benchmark tables
//! as CSV.
//!
//! Numbers are written in the shortest decimal form that parses back to the
//! same binary64 value, so `parse(serialize(game)) == game` holds exactly and
//! re-serializing a parsed file reproduces it byte for byte.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bench::{BenchRow, SummaryRow};
use crate::error::{Error, Result};
use crate::game::QuadraticGame;
use crate::ipm::{SolveResult, Trace};
use crate::sparse::{SparseMatrix, Triplets};

pub const PROBLEM_FORMAT: &str = "cqg-problem";
pub const SOLUTION_FORMAT: &str = "cqg-solution";
pub const FORMAT_VERSION: u32 = 1;

/// `[row, col, value]`.
pub type Entry = (usize, usize, f64);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub format: String,
    pub version: u32,
    pub block_dims: Vec<usize>,
    #[serde(rename = "W")]
    pub w: Vec<Entry>,
    pub f: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Vec<Entry>,
    pub b: Vec<f64>,
    #[serde(rename = "G")]
    pub g: Vec<Entry>,
    pub h: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metadata: Option<serde_json::Value>,
}

impl ProblemFile {
    pub fn from_game(game: &QuadraticGame, metadata: Option<serde_json::Value>) -> Self {
        Self {
            format: PROBLEM_FORMAT.into(),
            version: FORMAT_VERSION,
            block_dims: game.block_dims().to_vec(),
            w: game.w().triplets(),
            f: game.f().to_vec(),
            a: game.a().triplets(),
            b: game.b().to_vec(),
            g: game.g().triplets(),
            h: game.h().to_vec(),
            metadata,
        }
    }

    /// Validates and builds the game. Structural errors name the matrix and
    /// the offending entry index.
    pub fn to_game(&self) -> Result<QuadraticGame> {
        if self.format != PROBLEM_FORMAT {
            return Err(Error::Format(format!(
                "expected format '{PROBLEM_FORMAT}', found '{}'",
                self.format
            )));
        }
        if self.version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported version {}", self.version)));
        }
        let n: usize = self.block_dims.iter().sum();
        let matrix = |name: &str, rows: usize, entries: &[Entry]| -> Result<SparseMatrix> {
            Triplets::from_entries(rows, n, entries.to_vec()).compress_named(name)
        };
        QuadraticGame::new(
            self.block_dims.clone(),
            matrix("W", n, &self.w)?,
            self.f.clone(),
            matrix("A", self.b.len(), &self.a)?,
            self.b.clone(),
            matrix("G", self.h.len(), &self.g)?,
            self.h.clone(),
        )
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("problem files always serialize");
        s.push('\n');
        s
    }
}

pub fn read_problem(path: &std::path::Path) -> Result<QuadraticGame> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Format(format!("cannot read {}: {e}", path.display())))?;
    ProblemFile::parse(&text)?.to_game()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionFile {
    pub format: String,
    pub version: u32,
    pub solver: String,
    pub status: String,
    pub x: Vec<f64>,
    pub nu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub s: Vec<f64>,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub wall_time_ms: f64,
    pub config: serde_json::Value,
}

impl SolutionFile {
    pub fn new(solver: &str, result: &SolveResult, config: serde_json::Value) -> Self {
        Self {
            format: SOLUTION_FORMAT.into(),
            version: FORMAT_VERSION,
            solver: solver.into(),
            status: result.status.as_str().into(),
            x: result.point.x.clone(),
            nu: result.point.nu.clone(),
            lambda: result.point.lambda.clone(),
            s: result.point.s.clone(),
            kkt_residual: result.final_residual,
            iterations: result.iterations,
            outer_iterations: result.outer_iterations,
            wall_time_ms: result.wall_time.as_secs_f64() * 1e3,
            config,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("solution files always serialize");
        s.push('\n');
        s
    }
}

#[derive(Serialize)]
struct TraceRecord<'a> {
    iter: usize,
    phase: &'a str,
    mu: Option<f64>,
    residual: f64,
    dv_inf: Option<f64>,
    alpha: Option<f64>,
}

fn csv_writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn csv_error(e: csv::Error) -> Error {
    Error::Format(format!("csv output: {e}"))
}

/// Per-iteration CSV. FBS rows leave `mu` and `dv_inf` empty and report the
/// stopping-rule error as the residual and the step size as `alpha`.
pub fn write_trace<W: Write>(out: W, trace: &Trace, fbs_step: Option<f64>) -> Result<()> {
    let mut w = csv_writer(out);
    match trace {
        Trace::Ipm(rows) => {
            for (k, r) in rows.iter().enumerate() {
                w.serialize(TraceRecord {
                    iter: k + 1,
                    phase: r.phase.as_str(),
                    mu: Some(r.mu),
                    residual: r.residual,
                    dv_inf: Some(r.dv_inf),
                    alpha: Some(r.alpha),
                })
                .map_err(csv_error)?;
            }
        }
        Trace::Fbs(rows) => {
            for r in rows {
                w.serialize(TraceRecord {
                    iter: r.iter,
                    phase: "fbs",
                    mu: None,
                    residual: r.error,
                    dv_inf: None,
                    alpha: fbs_step,
                })
                .map_err(csv_error)?;
            }
        }
    }
    if trace.is_empty() {
        w.write_record(["iter", "phase", "mu", "residual", "dv_inf", "alpha"])
            .map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

pub fn write_bench<W: Write>(out: W, rows: &[BenchRow]) -> Result<()> {
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    if rows.is_empty() {
        w.write_record(BenchRow::HEADER).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}

/// Per-group mean and standard deviation, one row per `(game, N, k, solver)`.
pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv_writer(out);
    for r in rows {
        w.serialize(r).map_err(csv_error)?;
    }
    w.flush().map_err(|e| Error::Format(e.to_string()))
}
