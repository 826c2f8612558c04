//! Multi-location market game.
//!
//! Company `i` produces `g_{i,l}` and sells `s_{i,l}` at each location `l`.
//! Its cost is `Σ_l q g² + p g` of production minus revenue at the affine
//! price `d_l − Cᵢ s̄_l`, where `s̄` is the average amount sold. Production is
//! capped by `u`, sales cannot exceed production, and total production at
//! each location must lie in `[d_l, r_l]`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::price_factors;
use crate::error::{Error, Result};
use crate::game::QuadraticGame;
use crate::sparse::{SparseMatrix, Triplets};

#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    pub players: usize,
    pub locations: usize,
    pub k: f64,
    /// Quadratic production cost, one row per company.
    pub q: Vec<Vec<f64>>,
    /// Linear production cost.
    pub p: Vec<Vec<f64>>,
    /// Demand, which is also the price intercept.
    pub d: Vec<f64>,
    /// Production caps.
    pub u: Vec<Vec<f64>>,
    /// Capacity caps on total production.
    pub r: Vec<f64>,
}

impl MarketParams {
    pub fn random(players: usize, locations: usize, k: f64, seed: u64) -> Result<Self> {
        if players == 0 || locations == 0 {
            return Err(Error::InvalidParams(
                "market game needs at least one company and one location".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let matrix = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| -> Vec<Vec<f64>> {
            (0..players)
                .map(|_| (0..locations).map(|_| rng.random_range(lo..=hi)).collect())
                .collect()
        };
        let q = matrix(&mut rng, 0.5, 1.5);
        let p = matrix(&mut rng, 0.0, 1.0);
        let d: Vec<f64> = (0..locations).map(|_| rng.random_range(5.0..=15.0)).collect();
        let nf = players as f64;
        let u = (0..players)
            .map(|_| {
                d.iter()
                    .map(|&dl| rng.random_range(2.0 * dl / nf..=4.0 * dl / nf))
                    .collect()
            })
            .collect();
        let r = d.iter().map(|&dl| rng.random_range(1.2..=2.0) * dl).collect();
        let params = Self {
            players,
            locations,
            k,
            q,
            p,
            d,
            u,
            r,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn price_factors(&self) -> Vec<f64> {
        price_factors(self.players, self.k)
    }

    pub fn validate(&self) -> Result<()> {
        let (n, m) = (self.players, self.locations);
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if n == 0 || m == 0 {
            return bad("market game needs at least one company and one location".into());
        }
        let shaped = |v: &Vec<Vec<f64>>| v.len() == n && v.iter().all(|r| r.len() == m);
        if !(shaped(&self.q) && shaped(&self.p) && shaped(&self.u))
            || self.d.len() != m
            || self.r.len() != m
        {
            return bad("market parameter arrays do not match companies × locations".into());
        }
        if !self.k.is_finite() || self.p.iter().flatten().any(|v| !v.is_finite()) {
            return bad("price slope and linear costs must be finite".into());
        }
        if self.q.iter().flatten().any(|&v| !(v > 0.0)) {
            return bad("production cost coefficients q must be positive".into());
        }
        if self.u.iter().flatten().any(|&v| !(v > 0.0)) {
            return bad("production caps u must be positive".into());
        }
        for l in 0..m {
            let (dl, rl) = (self.d[l], self.r[l]);
            if !(dl > 0.0) {
                return bad(format!("location {l}: demand must be positive, got {dl}"));
            }
            if !(rl >= dl) {
                return bad(format!("location {l}: capacity cap r = {rl} is below demand d = {dl}"));
            }
            let total: f64 = self.u.iter().map(|row| row[l]).sum();
            if total < dl {
                return bad(format!(
                    "location {l}: production caps sum to {total}, below demand d = {dl}"
                ));
            }
        }
        Ok(())
    }
}

pub fn build_market(params: &MarketParams) -> Result<QuadraticGame> {
    params.validate()?;
    let (n, m) = (params.players, params.locations);
    let bd = 2 * m;
    let dim = n * bd;
    let c = params.price_factors();
    let nf = n as f64;

    let mut w = Triplets::with_capacity(dim, dim, n * m + n * n * m);
    let mut f = Vec::with_capacity(dim);
    for i in 0..n {
        for l in 0..m {
            w.push(i * bd + l, i * bd + l, 2.0 * params.q[i][l]);
        }
        for j in 0..n {
            let v = if i == j { 2.0 * c[i] / nf } else { c[i] / nf };
            for l in 0..m {
                w.push(i * bd + m + l, j * bd + m + l, v);
            }
        }
        f.extend_from_slice(&params.p[i]);
        f.extend(params.d.iter().map(|d| -d));
    }

    // Per company: g, s ≥ 0; u − g ≥ 0; Σg − Σs ≥ 0. Shared: Σᵢg − d ≥ 0, r − Σᵢg ≥ 0.
    let rows_per = 3 * m + 1;
    let rows = n * rows_per + 2 * m;
    let mut a = Triplets::with_capacity(rows, dim, n * (7 * m));
    let mut b = Vec::with_capacity(rows);
    for i in 0..n {
        let r0 = i * rows_per;
        let c0 = i * bd;
        for k in 0..bd {
            a.push(r0 + k, c0 + k, 1.0);
        }
        for l in 0..m {
            a.push(r0 + bd + l, c0 + l, -1.0);
            a.push(r0 + 3 * m, c0 + l, 1.0);
            a.push(r0 + 3 * m, c0 + m + l, -1.0);
        }
        b.extend(std::iter::repeat_n(0.0, bd));
        b.extend_from_slice(&params.u[i]);
        b.push(0.0);
    }
    let s0 = n * rows_per;
    for l in 0..m {
        for i in 0..n {
            a.push(s0 + l, i * bd + l, 1.0);
            a.push(s0 + m + l, i * bd + l, -1.0);
        }
    }
    b.extend(params.d.iter().map(|d| -d));
    b.extend_from_slice(&params.r);

    QuadraticGame::new(
        vec![bd; n],
        w.compress_named("W")?,
        f,
        a.compress_named("A")?,
        b,
        SparseMatrix::zeros(0, dim),
        vec![],
    )
}

/// Objective of company `i` at the joint strategy `x`.
pub fn market_cost(params: &MarketParams, i: usize, x: &[f64]) -> f64 {
    let (n, m) = (params.players, params.locations);
    let bd = 2 * m;
    let ci = 1.0 + params.k * (i + 1) as f64;
    let xi = &x[i * bd..(i + 1) * bd];
    (0..m)
        .map(|l| {
            let g = xi[l];
            let s = xi[m + l];
            let avg = (0..n).map(|j| x[j * bd + m + l]).sum::<f64>() / n as f64;
            params.q[i][l] * g * g + params.p[i][l] * g - (params.d[l] - ci * avg) * s
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_company_single_location() {
        let p = MarketParams {
            players: 1,
            locations: 1,
            k: 0.01,
            q: vec![vec![1.0]],
            p: vec![vec![0.5]],
            d: vec![10.0],
            u: vec![vec![20.0]],
            r: vec![15.0],
        };
        let g = build_market(&p).unwrap();
        let w = g.w().to_dense();
        assert_eq!(w[0][0], 2.0);
        assert_eq!(w[0][1], 0.0);
        assert_eq!(w[1][0], 0.0);
        assert!((w[1][1] - 2.02).abs() < 1e-15);
    }

    #[test]
    fn sales_column_of_f_is_minus_demand() {
        let p = MarketParams::random(4, 3, 0.01, 2).unwrap();
        let g = build_market(&p).unwrap();
        for i in 0..4 {
            for l in 0..3 {
                assert_eq!(g.f()[i * 6 + 3 + l], -p.d[l]);
            }
        }
    }

    #[test]
    fn production_block_has_no_coupling() {
        let p = MarketParams::random(3, 4, 0.5, 8).unwrap();
        let g = build_market(&p).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let blk = g.w_block(i, j).to_dense();
                for r in 0..8 {
                    for c in 0..8 {
                        let structural = if r < 4 || c < 4 {
                            i == j && r == c && r < 4
                        } else {
                            r == c
                        };
                        assert_eq!(blk[r][c] != 0.0, structural, "block ({i},{j}) entry ({r},{c})");
                    }
                }
            }
        }
    }

    #[test]
    fn demand_above_total_caps_is_named() {
        let mut p = MarketParams::random(2, 2, 0.01, 1).unwrap();
        p.u = vec![vec![0.1, 0.1]; 2];
        let err = build_market(&p).unwrap_err().to_string();
        assert!(err.contains("production caps sum"), "{err}");
        let mut p = MarketParams::random(2, 2, 0.01, 1).unwrap();
        p.r[1] = p.d[1] - 1.0;
        assert!(build_market(&p).unwrap_err().to_string().contains("capacity cap"));
    }

    #[test]
    fn default_instance_monotonicity_below_one() {
        let p = MarketParams::random(10, 10, 0.01, 1).unwrap();
        let s = build_market(&p).unwrap().monotonicity_constant();
        assert!(s > 0.0 && s < 1.0, "{s}");
    }
}
