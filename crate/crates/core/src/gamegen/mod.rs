//! Seeded generators for the electric-vehicle charging, market and traffic
//! routing benchmark games.
//!
//! Random parameters depend only on `(seed, players)`; the heterogeneity slope
//! `k` enters through the price factors alone, so a sweep over `k` varies one
//! thing at a time.

mod ev;
mod market;
mod traffic;

pub use ev::{build_ev, ev_cost, EvParams};
pub use market::{build_market, market_cost, MarketParams};
pub use traffic::{build_traffic, traffic_cost, TrafficParams};

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::QuadraticGame;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GameKind {
    Ev,
    Market,
    Traffic,
}

impl GameKind {
    pub fn as_str(self) -> &'static str {
        match self {
            GameKind::Ev => "ev",
            GameKind::Market => "market",
            GameKind::Traffic => "traffic",
        }
    }
}

impl fmt::Display for GameKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GameKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ev" => Ok(GameKind::Ev),
            "market" => Ok(GameKind::Market),
            "traffic" => Ok(GameKind::Traffic),
            other => Err(Error::InvalidParams(format!("unknown game kind '{other}'"))),
        }
    }
}

/// Parameters of any of the three generators.
#[derive(Debug, Clone, PartialEq)]
pub enum GameRecipe {
    Ev(EvParams),
    Market(MarketParams),
    Traffic(TrafficParams),
}

impl GameRecipe {
    /// Randomized recipe. `size` is the horizon (EV) or the number of
    /// locations (market); the traffic instance is fixed apart from `k`.
    pub fn random(kind: GameKind, players: usize, size: usize, k: f64, seed: u64) -> Result<Self> {
        Ok(match kind {
            GameKind::Ev => GameRecipe::Ev(EvParams::random(players, size, k, seed)?),
            GameKind::Market => GameRecipe::Market(MarketParams::random(players, size, k, seed)?),
            GameKind::Traffic => GameRecipe::Traffic(TrafficParams {
                k,
                ..TrafficParams::default()
            }),
        })
    }

    pub fn kind(&self) -> GameKind {
        match self {
            GameRecipe::Ev(_) => GameKind::Ev,
            GameRecipe::Market(_) => GameKind::Market,
            GameRecipe::Traffic(_) => GameKind::Traffic,
        }
    }

    pub fn build(&self) -> Result<QuadraticGame> {
        match self {
            GameRecipe::Ev(p) => build_ev(p),
            GameRecipe::Market(p) => build_market(p),
            GameRecipe::Traffic(p) => build_traffic(p),
        }
    }

    /// Objective of player `i` at the joint strategy `x`.
    pub fn player_cost(&self, i: usize, x: &[f64]) -> f64 {
        match self {
            GameRecipe::Ev(p) => ev_cost(p, i, x),
            GameRecipe::Market(p) => market_cost(p, i, x),
            GameRecipe::Traffic(p) => traffic_cost(p, i, x),
        }
    }
}

/// Default per-player size: horizon 24 for EV, 10 locations for the market.
pub fn default_size(kind: GameKind) -> usize {
    match kind {
        GameKind::Ev => 24,
        GameKind::Market => 10,
        GameKind::Traffic => 14,
    }
}

/// One member of a parameter sweep.
#[derive(Debug, Clone)]
pub struct SweepInstance {
    pub kind: GameKind,
    pub players: usize,
    pub k: f64,
    pub recipe: GameRecipe,
    pub game: QuadraticGame,
}

/// All combinations of `players × ks` for one game kind, player-major.
/// The traffic game has a fixed player count, so `players` is ignored for it.
pub fn sweep_instances(
    kind: GameKind,
    players: &[usize],
    size: usize,
    ks: &[f64],
    seed: u64,
) -> Result<Vec<SweepInstance>> {
    if ks.is_empty() || (kind != GameKind::Traffic && players.is_empty()) {
        return Err(Error::InvalidParams("sweep ranges must be nonempty".into()));
    }
    let traffic_players = [TrafficParams::default().od_pairs.len()];
    let players = if kind == GameKind::Traffic {
        &traffic_players[..]
    } else {
        players
    };
    let mut out = Vec::with_capacity(players.len() * ks.len());
    for &n in players {
        for &k in ks {
            let recipe = GameRecipe::random(kind, n, size, k, seed)?;
            let game = recipe.build()?;
            out.push(SweepInstance {
                kind,
                players: n,
                k,
                recipe,
                game,
            });
        }
    }
    Ok(out)
}

/// Price factors `1 + k·i` for players `i = 1..=n`.
pub(crate) fn price_factors(n: usize, k: f64) -> Vec<f64> {
    (1..=n).map(|i| 1.0 + k * i as f64).collect()
}
