//! Random games and independent dense oracles shared by the integration tests.

#![allow(dead_code)]

use cqg::{QuadraticGame, SparseMatrix, Triplets};
use nalgebra::{DMatrix, DVector};
use rand::Rng;

pub struct Shape {
    pub max_players: usize,
    pub max_block: usize,
    pub max_ineq: usize,
    pub max_eq: usize,
    pub symmetric: bool,
}

fn dense(rows: usize, cols: usize, vals: &[f64]) -> SparseMatrix {
    let mut t = Triplets::with_capacity(rows, cols, vals.len());
    for i in 0..rows {
        for j in 0..cols {
            let v = vals[i * cols + j];
            if v != 0.0 {
                t.push(i, j, v);
            }
        }
    }
    t.compress().unwrap()
}

/// A strongly monotone game whose feasible set has a strictly feasible point.
/// With `symmetric` the pseudo-gradient is a gradient (a potential game).
pub fn random_game<R: Rng>(rng: &mut R, shape: &Shape) -> QuadraticGame {
    let players = rng.random_range(1..=shape.max_players);
    let dims: Vec<usize> = (0..players).map(|_| rng.random_range(1..=shape.max_block)).collect();
    let n: usize = dims.iter().sum();
    let m = rng.random_range(1..=shape.max_ineq);
    let p = rng.random_range(0..=shape.max_eq.min(n.saturating_sub(1)));

    let b_mat = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let mut w = b_mat.transpose() * &b_mat + DMatrix::identity(n, n) * 0.2;
    if !shape.symmetric {
        let s = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        w += &s - s.transpose();
    }
    let w_vals: Vec<f64> = (0..n * n).map(|k| w[(k / n, k % n)]).collect();
    let f: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0..2.0)).collect();

    let x0: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let a_vals: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..m)
        .map(|i| {
            let ax: f64 = (0..n).map(|j| a_vals[i * n + j] * x0[j]).sum();
            rng.random_range(0.1..1.0) - ax
        })
        .collect();
    let g_vals: Vec<f64> = (0..p * n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let h: Vec<f64> = (0..p)
        .map(|i| -(0..n).map(|j| g_vals[i * n + j] * x0[j]).sum::<f64>())
        .collect();

    QuadraticGame::new(
        dims,
        dense(n, n, &w_vals),
        f,
        dense(m, n, &a_vals),
        b,
        dense(p, n, &g_vals),
        h,
    )
    .unwrap()
}

fn to_dense(m: &SparseMatrix) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, j, v) in m.triplets() {
        d[(i, j)] += v;
    }
    d
}

/// Minimizer of `½xᵀWx + fᵀx` over the feasible set for symmetric positive
/// definite `W`, by enumerating active sets of the inequality rows.
pub fn active_set_oracle(game: &QuadraticGame) -> Option<Vec<f64>> {
    let (n, m, p) = (game.dim(), game.m_ineq(), game.m_eq());
    let (w, a, g) = (to_dense(game.w()), to_dense(game.a()), to_dense(game.g()));
    let mut best: Option<(f64, Vec<f64>)> = None;
    for mask in 0u32..(1 << m) {
        let active: Vec<usize> = (0..m).filter(|i| mask & (1 << i) != 0).collect();
        let k = active.len() + p;
        let mut kkt = DMatrix::zeros(n + k, n + k);
        let mut rhs = DVector::zeros(n + k);
        kkt.view_mut((0, 0), (n, n)).copy_from(&w);
        for j in 0..n {
            rhs[j] = -game.f()[j];
        }
        let rows: Vec<(DVector<f64>, f64)> = active
            .iter()
            .map(|&i| (a.row(i).transpose(), -game.b()[i]))
            .chain((0..p).map(|i| (g.row(i).transpose(), -game.h()[i])))
            .collect();
        for (r, (row, val)) in rows.iter().enumerate() {
            for j in 0..n {
                kkt[(j, n + r)] = -row[j];
                kkt[(n + r, j)] = row[j];
            }
            rhs[n + r] = *val;
        }
        let Some(sol) = kkt.lu().solve(&rhs) else { continue };
        let x: Vec<f64> = (0..n).map(|j| sol[j]).collect();
        let feasible = game.slack(&x).iter().all(|s| *s >= -1e-9);
        let dual_ok = (0..active.len()).all(|r| sol[n + r] >= -1e-9);
        if feasible && dual_ok {
            let xv = DVector::from_vec(x.clone());
            let obj = 0.5 * xv.dot(&(&w * &xv)) + game.f().iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
            if best.as_ref().map_or(true, |(o, _)| obj < *o) {
                best = Some((obj, x));
            }
        }
    }
    best.map(|(_, x)| x)
}

/// Newton step from `(x, λ) = 0` at `(μ, v)` by a dense solve of the full
/// linearized central-path system in `(x, Δv, λ)`:
///
/// ```text
/// W x − √μ Aᵀ U(e^v) Δv − Gᵀ λ = √μ Aᵀ e^v − f
/// A x + √μ U(e^{−v}) Δv       = √μ e^{−v} − b
/// G x                         = −h
/// ```
pub fn full_newton(game: &QuadraticGame, mu: f64, v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (n, m, p) = (game.dim(), game.m_ineq(), game.m_eq());
    let (w, a, g) = (to_dense(game.w()), to_dense(game.a()), to_dense(game.g()));
    let sq = mu.sqrt();
    let size = n + m + p;
    let mut k = DMatrix::zeros(size, size);
    let mut rhs = DVector::zeros(size);
    k.view_mut((0, 0), (n, n)).copy_from(&w);
    for j in 0..n {
        let mut r = -game.f()[j];
        for i in 0..m {
            k[(j, n + i)] = -sq * a[(i, j)] * v[i].exp();
            r += sq * a[(i, j)] * v[i].exp();
        }
        for l in 0..p {
            k[(j, n + m + l)] = -g[(l, j)];
        }
        rhs[j] = r;
    }
    for i in 0..m {
        for j in 0..n {
            k[(n + i, j)] = a[(i, j)];
        }
        k[(n + i, n + i)] = sq * (-v[i]).exp();
        rhs[n + i] = sq * (-v[i]).exp() - game.b()[i];
    }
    for l in 0..p {
        for j in 0..n {
            k[(n + m + l, j)] = g[(l, j)];
        }
        rhs[n + m + l] = -game.h()[l];
    }
    let sol = k.lu().solve(&rhs).expect("full Newton system is nonsingular");
    let s = sol.as_slice();
    (s[..n].to_vec(), s[n..n + m].to_vec(), s[n + m..].to_vec())
}
