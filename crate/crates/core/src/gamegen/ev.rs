//! Electric-vehicle charging game.
//!
//! Player `i` chooses a charging profile `xᵢ ∈ ℝⁿ` and pays
//! `½ xᵢᵀQᵢxᵢ + pᵢᵀxᵢ + Cᵢ (x̄ + c)ᵀxᵢ`, where `x̄` is the average profile and
//! `c` the background demand. Constraints: `0 ≤ xᵢ ≤ x̃ᵢ`, `Σₜ xᵢ(t) ≥ lᵢ`,
//! and the shared grid cap `(1/N) Σᵢ xᵢ(t) ≤ K_t`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::price_factors;
use crate::error::{Error, Result};
use crate::game::QuadraticGame;
use crate::sparse::{SparseMatrix, Triplets};

#[derive(Debug, Clone, PartialEq)]
pub struct EvParams {
    pub players: usize,
    pub horizon: usize,
    /// Price heterogeneity slope: `Cᵢ = 1 + k·i`.
    pub k: f64,
    /// Degradation weights `q_i(t)`, one row per player.
    pub q: Vec<Vec<f64>>,
    pub p: Vec<Vec<f64>>,
    /// Charging caps `x̃ᵢ(t)`.
    pub x_cap: Vec<Vec<f64>>,
    /// Minimum energy per player.
    pub l: Vec<f64>,
    /// Grid cap per period on the average charging rate.
    pub k_cap: Vec<f64>,
    /// Background demand.
    pub c: Vec<f64>,
}

/// Base level plus a Gaussian spike of height 2 centered mid-horizon.
pub fn background_demand(horizon: usize) -> Vec<f64> {
    let mid = horizon as f64 / 2.0;
    (0..horizon)
        .map(|t| {
            let d = t as f64 - mid;
            1.0 + 2.0 * (-d * d / 8.0).exp()
        })
        .collect()
}

impl EvParams {
    pub fn random(players: usize, horizon: usize, k: f64, seed: u64) -> Result<Self> {
        if players == 0 || horizon == 0 {
            return Err(Error::InvalidParams("EV game needs at least one player and one period".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |lo: f64, hi: f64| -> Vec<Vec<f64>> {
            (0..players)
                .map(|_| (0..horizon).map(|_| rng.random_range(lo..=hi)).collect())
                .collect()
        };
        let q = draw(0.5, 1.5);
        let p = draw(0.0, 1.0);
        let x_cap = draw(1.0, 3.0);
        let l = x_cap
            .iter()
            .map(|row| rng.random_range(0.3..=0.8) * row.iter().sum::<f64>())
            .collect();
        let k_cap = (0..horizon)
            .map(|t| {
                let mean = x_cap.iter().map(|row| row[t]).sum::<f64>() / players as f64;
                rng.random_range(0.85..=1.0) * mean
            })
            .collect();
        let params = Self {
            players,
            horizon,
            k,
            q,
            p,
            x_cap,
            l,
            k_cap,
            c: background_demand(horizon),
        };
        params.validate()?;
        Ok(params)
    }

    pub fn price_factors(&self) -> Vec<f64> {
        price_factors(self.players, self.k)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, h) = (self.players, self.horizon);
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if n == 0 || h == 0 {
            return bad("EV game needs at least one player and one period".into());
        }
        let shaped = |v: &Vec<Vec<f64>>| v.len() == n && v.iter().all(|r| r.len() == h);
        if !(shaped(&self.q) && shaped(&self.p) && shaped(&self.x_cap))
            || self.l.len() != n
            || self.k_cap.len() != h
            || self.c.len() != h
        {
            return bad("EV parameter arrays do not match players × horizon".into());
        }
        if !self.k.is_finite() {
            return bad("price slope k must be finite".into());
        }
        if self.x_cap.iter().flatten().any(|&v| !(v > 0.0)) {
            return bad("charging caps must be positive".into());
        }
        if self.k_cap.iter().any(|&v| !(v > 0.0)) {
            return bad("grid caps K_t must be positive".into());
        }
        if self.q.iter().flatten().any(|&v| !(v >= 0.0)) {
            return bad("degradation weights q(t) must be nonnegative".into());
        }
        if self.c.iter().any(|&v| !(v >= 0.0)) || self.p.iter().flatten().any(|v| !v.is_finite()) {
            return bad("background demand must be nonnegative and prices finite".into());
        }
        for (i, (li, cap)) in self.l.iter().zip(&self.x_cap).enumerate() {
            let total: f64 = cap.iter().sum();
            if !(*li > 0.0) || *li > total {
                return bad(format!(
                    "player {i}: minimum charge l = {li} must lie in (0, Σ x̃ = {total}]"
                ));
            }
        }
        let deliverable: f64 = (0..h)
            .map(|t| {
                let caps: f64 = self.x_cap.iter().map(|r| r[t]).sum();
                caps.min(n as f64 * self.k_cap[t])
            })
            .sum();
        let required: f64 = self.l.iter().sum();
        if required > deliverable {
            return bad(format!(
                "total minimum charge {required} exceeds what the grid caps allow ({deliverable})"
            ));
        }
        Ok(())
    }
}

pub fn build_ev(params: &EvParams) -> Result<QuadraticGame> {
    params.validate()?;
    let (n, h) = (params.players, params.horizon);
    let dim = n * h;
    let c = params.price_factors();
    let nf = n as f64;

    let mut w = Triplets::with_capacity(dim, dim, n * n * h);
    let mut f = Vec::with_capacity(dim);
    for i in 0..n {
        for j in 0..n {
            for t in 0..h {
                let v = if i == j {
                    params.q[i][t] + 2.0 * c[i] / nf
                } else {
                    c[i] / nf
                };
                w.push(i * h + t, j * h + t, v);
            }
        }
        f.extend((0..h).map(|t| params.p[i][t] + c[i] * params.c[t]));
    }

    // Per player: x ≥ 0, x̃ − x ≥ 0, Σx − l ≥ 0. Then the shared rows.
    let rows_per = 2 * h + 1;
    let m = n * rows_per + h;
    let mut a = Triplets::with_capacity(m, dim, n * 4 * h);
    let mut b = Vec::with_capacity(m);
    for i in 0..n {
        let r0 = i * rows_per;
        let c0 = i * h;
        for t in 0..h {
            a.push(r0 + t, c0 + t, 1.0);
            a.push(r0 + h + t, c0 + t, -1.0);
            a.push(r0 + 2 * h, c0 + t, 1.0);
        }
        b.extend(std::iter::repeat_n(0.0, h));
        b.extend_from_slice(&params.x_cap[i]);
        b.push(-params.l[i]);
    }
    for t in 0..h {
        for i in 0..n {
            a.push(n * rows_per + t, i * h + t, -1.0);
        }
        b.push(nf * params.k_cap[t]);
    }

    QuadraticGame::new(
        vec![h; n],
        w.compress_named("W")?,
        f,
        a.compress_named("A")?,
        b,
        SparseMatrix::zeros(0, dim),
        vec![],
    )
}

/// Objective of player `i` at the joint profile `x`.
pub fn ev_cost(params: &EvParams, i: usize, x: &[f64]) -> f64 {
    let (n, h) = (params.players, params.horizon);
    let ci = 1.0 + params.k * (i + 1) as f64;
    let xi = &x[i * h..(i + 1) * h];
    (0..h)
        .map(|t| {
            let avg = (0..n).map(|j| x[j * h + t]).sum::<f64>() / n as f64;
            0.5 * params.q[i][t] * xi[t] * xi[t]
                + params.p[i][t] * xi[t]
                + ci * (avg + params.c[t]) * xi[t]
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{assemble, PlayerBlock};

    fn tiny(q: f64) -> EvParams {
        EvParams {
            players: 1,
            horizon: 1,
            k: 0.01,
            q: vec![vec![q]],
            p: vec![vec![0.2]],
            x_cap: vec![vec![2.0]],
            l: vec![1.0],
            k_cap: vec![5.0],
            c: vec![1.0],
        }
    }

    #[test]
    fn single_player_single_period() {
        let g = build_ev(&tiny(0.7)).unwrap();
        assert!((g.w().get(0, 0) - (0.7 + 2.0 * 1.01)).abs() < 1e-15);
        assert!((g.f()[0] - (0.2 + 1.01)).abs() < 1e-15);
    }

    #[test]
    fn off_diagonal_block() {
        let p = EvParams::random(2, 2, 0.01, 5).unwrap();
        let g = build_ev(&p).unwrap();
        let blk = g.w_block(0, 1).to_dense();
        assert_eq!(blk, vec![vec![1.01 / 2.0, 0.0], vec![0.0, 1.01 / 2.0]]);
    }

    #[test]
    fn matches_player_block_assembly() {
        let p = EvParams::random(2, 2, 0.3, 11).unwrap();
        let g = build_ev(&p).unwrap();
        let c = p.price_factors();
        let blocks: Vec<PlayerBlock> = (0..2)
            .map(|i| {
                let q: Vec<f64> = p.q[i].iter().map(|v| v + 2.0 * c[i] / 2.0).collect();
                let pi: Vec<f64> = (0..2).map(|t| p.p[i][t] + c[i] * p.c[t]).collect();
                PlayerBlock::new(SparseMatrix::diagonal(&q), pi)
                    .with_coupling(1 - i, SparseMatrix::identity(2).scaled(c[i] / 2.0))
            })
            .collect();
        let h = assemble(&blocks, g.a().clone(), g.b().to_vec(), g.g().clone(), vec![]).unwrap();
        assert_eq!(h.w().to_dense(), g.w().to_dense());
        assert_eq!(h.f(), g.f());
    }

    #[test]
    fn infeasible_minimum_charge_is_named() {
        let mut p = tiny(1.0);
        p.l = vec![3.0];
        let err = build_ev(&p).unwrap_err().to_string();
        assert!(err.contains("minimum charge"), "{err}");
        let mut p = tiny(1.0);
        p.x_cap = vec![vec![0.0]];
        assert!(build_ev(&p).unwrap_err().to_string().contains("charging caps"));
    }

    #[test]
    fn default_instance_is_strongly_monotone() {
        let p = EvParams::random(10, 24, 0.01, 1).unwrap();
        assert!(build_ev(&p).unwrap().monotonicity_constant() > 0.0);
    }

    #[test]
    fn spike_peaks_mid_horizon() {
        let c = background_demand(24);
        assert!((c[12] - 3.0).abs() < 1e-15);
        assert!(c[0] < 1.01);
    }
}
