//! Variational equilibria of monotone convex quadratic games.
//!
//! A game is described by its pseudo-gradient `W x + f` and a shared feasible
//! set `{x : A x + b >= 0, G x + h = 0}`. The main solver follows the
//! log-domain central path of the KKT system with damped Newton steps; a
//! projected pseudo-gradient method is provided as a first-order baseline.
//!
//! ```
//! use cqg::{ipm, QuadraticGame, SparseMatrix};
//!
//! // min ½x² − x subject to x >= 0.
//! let game = QuadraticGame::new(
//!     vec![1],
//!     SparseMatrix::identity(1),
//!     vec![-1.0],
//!     SparseMatrix::identity(1),
//!     vec![0.0],
//!     SparseMatrix::zeros(0, 1),
//!     vec![],
//! )
//! .unwrap();
//! let sol = ipm::solve(&game, &ipm::IpmConfig::default()).unwrap();
//! assert!((sol.point.x[0] - 1.0).abs() < 1e-5);
//! ```

pub mod bench;
pub mod error;
pub mod fbs;
pub mod game;
pub mod gamegen;
pub mod io;
pub mod ipm;
pub mod linalg;
pub mod par;
pub mod sparse;

pub use error::{Error, Result};
pub use game::{KktPoint, PlayerBlock, QuadraticGame, ScalingRecord};
pub use ipm::{IpmConfig, SolveResult, SolveStatus};
pub use sparse::{LuFactorization, SparseMatrix, Triplets};
