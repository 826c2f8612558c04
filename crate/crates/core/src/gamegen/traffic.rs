//! Traffic routing game on a fixed six-node road network.
//!
//! Player `i` routes a demand from its origin to its destination and pays
//! `τᵢ Σ_e xᵢᵉ t_e (1 + 4 Xᵉ / c_e)`, where `Xᵉ` is the total flow on edge `e`,
//! `t_e` the free-flow travel time in minutes and `c_e` the capacity in cars
//! per minute. Flows are nonnegative and conserved at every node.

use super::price_factors;
use crate::error::{Error, Result};
use crate::game::QuadraticGame;
use crate::sparse::{SparseMatrix, Triplets};

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficParams {
    pub nodes: usize,
    /// Directed edges `(tail, head)`, 0-based node indices.
    pub edges: Vec<(usize, usize)>,
    /// Road lengths in km.
    pub lengths: Vec<f64>,
    /// Speed limits in km/h.
    pub speeds: Vec<f64>,
    /// `(origin, destination)` per player, 0-based.
    pub od_pairs: Vec<(usize, usize)>,
    /// Demand per player in cars per minute. The default of 4 keeps the
    /// network below the load at which detours back through an origin
    /// (edge 2 → 1) start to pay off, roughly 4.8 cars per minute.
    pub demands: Vec<f64>,
    /// Value-of-time slope: `τᵢ = 1 + k·i`.
    pub k: f64,
}

impl Default for TrafficParams {
    fn default() -> Self {
        let edges = [
            (1, 2),
            (2, 1),
            (3, 1),
            (1, 3),
            (2, 4),
            (4, 2),
            (4, 3),
            (3, 4),
            (3, 5),
            (5, 3),
            (4, 6),
            (6, 4),
            (6, 5),
            (5, 6),
        ];
        Self {
            nodes: 6,
            edges: edges.iter().map(|&(a, b)| (a - 1, b - 1)).collect(),
            lengths: vec![2.0, 2.5, 1.0, 5.0, 3.0, 5.0, 1.5, 6.0, 3.0, 5.0, 4.0, 2.0, 1.0, 2.0],
            speeds: vec![
                50.0, 50.0, 30.0, 50.0, 50.0, 80.0, 30.0, 80.0, 50.0, 50.0, 80.0, 50.0, 30.0, 50.0,
            ],
            od_pairs: vec![(0, 4), (0, 5), (1, 4), (1, 5)],
            demands: vec![4.0; 4],
            k: 0.1,
        }
    }
}

impl TrafficParams {
    /// Free-flow travel times in minutes.
    pub fn travel_times(&self) -> Vec<f64> {
        self.lengths
            .iter()
            .zip(&self.speeds)
            .map(|(l, s)| l / s * 60.0)
            .collect()
    }

    /// Capacities in cars per minute.
    pub fn capacities(&self) -> Vec<f64> {
        self.speeds.iter().map(|s| 80.0 * s / 60.0).collect()
    }

    pub fn time_values(&self) -> Vec<f64> {
        price_factors(self.od_pairs.len(), self.k)
    }

    /// Node-by-edge incidence: `+1` where the edge leaves, `−1` where it enters.
    pub fn incidence(&self) -> SparseMatrix {
        let mut t = Triplets::with_capacity(self.nodes, self.edges.len(), 2 * self.edges.len());
        for (e, &(from, to)) in self.edges.iter().enumerate() {
            t.push(from, e, 1.0);
            t.push(to, e, -1.0);
        }
        t.compress_named("incidence").expect("edges validated")
    }

    /// Weakly connected component label of every node.
    pub fn components(&self) -> Vec<usize> {
        let mut parent: Vec<usize> = (0..self.nodes).collect();
        fn root(parent: &mut [usize], mut a: usize) -> usize {
            while parent[a] != a {
                parent[a] = parent[parent[a]];
                a = parent[a];
            }
            a
        }
        for &(a, b) in &self.edges {
            let (ra, rb) = (root(&mut parent, a), root(&mut parent, b));
            parent[ra.max(rb)] = ra.min(rb);
        }
        (0..self.nodes).map(|a| root(&mut parent, a)).collect()
    }

    /// Nodes whose conservation rows are kept. Each component's rows sum to
    /// zero, so the last node of every component is dropped to leave the
    /// constraint matrix with full row rank.
    pub fn conservation_nodes(&self) -> Vec<usize> {
        let comp = self.components();
        let mut last = vec![usize::MAX; self.nodes];
        for (node, &c) in comp.iter().enumerate() {
            last[c] = node;
        }
        (0..self.nodes).filter(|&node| last[comp[node]] != node).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        let ne = self.edges.len();
        if ne == 0 || self.od_pairs.is_empty() {
            return bad("traffic game needs edges and at least one player".into());
        }
        if self.lengths.len() != ne || self.speeds.len() != ne {
            return bad(format!("expected {ne} lengths and speeds"));
        }
        if self.demands.len() != self.od_pairs.len() {
            return bad("one demand per origin-destination pair is required".into());
        }
        if !self.k.is_finite() {
            return bad("value-of-time slope k must be finite".into());
        }
        for (e, &(a, b)) in self.edges.iter().enumerate() {
            if a >= self.nodes || b >= self.nodes || a == b {
                return bad(format!("edge {e} ({a} -> {b}) is not a valid directed edge"));
            }
            if !(self.lengths[e] > 0.0) || !(self.speeds[e] > 0.0) {
                return bad(format!("edge {e}: length and speed must be positive"));
            }
        }
        for (i, (&(o, d), &s)) in self.od_pairs.iter().zip(&self.demands).enumerate() {
            if !(s > 0.0) {
                return bad(format!("player {i}: demand must be positive, got {s}"));
            }
            if o == d || o >= self.nodes || d >= self.nodes {
                return bad(format!("player {i}: invalid origin-destination pair ({o}, {d})"));
            }
            for node in [o, d] {
                if !self.edges.iter().any(|&(a, b)| a == node || b == node) {
                    return Err(Error::InvalidGame(format!(
                        "player {i}: node {node} carries demand but has no incident edges"
                    )));
                }
            }
        }
        let comp = self.components();
        for (i, &(o, d)) in self.od_pairs.iter().enumerate() {
            if comp[o] != comp[d] {
                return Err(Error::InvalidGame(format!(
                    "player {i}: no route from node {o} to node {d}"
                )));
            }
        }
        Ok(())
    }
}

pub fn build_traffic(params: &TrafficParams) -> Result<QuadraticGame> {
    params.validate()?;
    let ne = params.edges.len();
    let n = params.od_pairs.len();
    let dim = n * ne;
    let t = params.travel_times();
    let c = params.capacities();
    let tau = params.time_values();

    let mut w = Triplets::with_capacity(dim, dim, n * n * ne);
    let mut f = Vec::with_capacity(dim);
    for i in 0..n {
        for j in 0..n {
            let scale = if i == j { 8.0 } else { 4.0 };
            for e in 0..ne {
                w.push(i * ne + e, j * ne + e, tau[i] * scale * t[e] / c[e]);
            }
        }
        f.extend(t.iter().map(|te| tau[i] * te));
    }

    let kept = params.conservation_nodes();
    let nv = kept.len();
    let mut row_of = vec![None; params.nodes];
    for (r, &node) in kept.iter().enumerate() {
        row_of[node] = Some(r);
    }
    let mut t_inc = Triplets::with_capacity(nv, ne, 2 * ne);
    for (e, &(from, to)) in params.edges.iter().enumerate() {
        for (node, sign) in [(from, 1.0), (to, -1.0)] {
            if let Some(r) = row_of[node] {
                t_inc.push(r, e, sign);
            }
        }
    }
    let inc = t_inc.compress_named("incidence")?;
    let mut g = Triplets::with_capacity(n * nv, dim, n * inc.nnz());
    let mut h = vec![0.0; n * nv];
    for (i, (&(o, d), &s)) in params.od_pairs.iter().zip(&params.demands).enumerate() {
        g.add_block(i * nv, i * ne, &inc);
        if let Some(r) = row_of[o] {
            h[i * nv + r] = -s;
        }
        if let Some(r) = row_of[d] {
            h[i * nv + r] = s;
        }
    }

    QuadraticGame::new(
        vec![ne; n],
        w.compress_named("W")?,
        f,
        SparseMatrix::identity(dim),
        vec![0.0; dim],
        g.compress_named("G")?,
        h,
    )
}

/// Objective of player `i` at the joint flow `x`.
pub fn traffic_cost(params: &TrafficParams, i: usize, x: &[f64]) -> f64 {
    let ne = params.edges.len();
    let n = params.od_pairs.len();
    let t = params.travel_times();
    let c = params.capacities();
    let tau = 1.0 + params.k * (i + 1) as f64;
    (0..ne)
        .map(|e| {
            let total: f64 = (0..n).map(|j| x[j * ne + e]).sum();
            tau * x[i * ne + e] * t[e] * (1.0 + 4.0 * total / c[e])
        })
        .sum()
}
