//! The economic environment: WTP states, signals, price menus, demand and
//! the competitive / monopoly benchmarks used to normalize profits.

mod benchmark;
mod demand;
mod entropy;
mod equilibrium;
mod grid;
mod information;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use benchmark::{benchmark_profits, monopoly_price, Benchmarks};
pub use demand::{allocate_demand, allocate_into, DemandModel, StageResult, TieRule};
pub use entropy::shannon_entropy;
pub use equilibrium::{verify_bne, BneVerdict, Deviation};
pub use grid::ActionGrid;
pub use information::{
    build_partition, signal_of, InformationStructure, Partition, SignalSharing, StateSpace, World,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarketError {
    #[error("invalid state space: {0}")]
    InvalidStateSpace(String),
    #[error("invalid information structure: {states} states cannot be split into {signals} equal intervals")]
    InvalidStructure { states: usize, signals: usize },
    #[error("WTP {0} is not in the state space")]
    UnknownState(f64),
    #[error("invalid action grid: {0}")]
    InvalidGrid(String),
    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),
    #[error("a market needs at least one firm")]
    NoFirms,
    #[error("price {price} is not on firm {firm}'s grid at signal {signal}")]
    OffGrid { firm: usize, signal: usize, price: f64 },
    #[error("profile shape mismatch: {0}")]
    ProfileShape(String),
}

/// Per-firm, per-signal prices.
pub type PriceProfile = Vec<Vec<f64>>;

/// Analytic result of one world under a fixed price profile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldOutcome {
    pub state: usize,
    pub wtp: f64,
    pub weight: f64,
    /// Lowest quoted price.
    pub price: f64,
    pub sale: bool,
    pub shares: Vec<f64>,
    pub payoffs: Vec<f64>,
}

impl WorldOutcome {
    pub fn industry_profit(&self) -> f64 {
        self.payoffs.iter().sum()
    }

    pub fn consumer_surplus(&self) -> f64 {
        if self.sale {
            self.wtp - self.price
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileEvaluation {
    pub worlds: Vec<WorldOutcome>,
    pub firm_profits: Vec<f64>,
}

impl ProfileEvaluation {
    pub fn industry_profit(&self) -> f64 {
        self.firm_profits.iter().sum()
    }
}

/// Scores a pure strategy profile over every world, splitting ties evenly.
pub fn evaluate_profile(info: &InformationStructure, cost: f64, prices: &[Vec<f64>]) -> ProfileEvaluation {
    let n = info.firms();
    let mut quoted = vec![0.0; n];
    let mut firm_profits = vec![0.0; n];
    let worlds = info
        .worlds()
        .iter()
        .enumerate()
        .map(|(w, world)| {
            for (i, q) in quoted.iter_mut().enumerate() {
                *q = prices[i][info.signal(i, w)];
            }
            let wtp = info.wtp(w);
            let mut shares = vec![0.0; n];
            let mut payoffs = vec![0.0; n];
            allocate_into(&quoted, wtp, cost, TieRule::Expected, &mut shares, &mut payoffs);
            for (acc, p) in firm_profits.iter_mut().zip(&payoffs) {
                *acc += world.weight * p;
            }
            let price = quoted.iter().copied().fold(f64::INFINITY, f64::min);
            WorldOutcome { state: world.state, wtp, weight: world.weight, price, sale: price <= wtp, shares, payoffs }
        })
        .collect();
    ProfileEvaluation { worlds, firm_profits }
}

/// A fully specified stage game: information, price menus, demand and the
/// benchmarks derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Market {
    info: InformationStructure,
    /// `grids[firm][signal]`
    grids: Vec<Vec<ActionGrid>>,
    demand: DemandModel,
    cost: f64,
    benchmarks: Benchmarks,
}

impl Market {
    /// Grids of `l` points scaled to each signal's largest WTP, unit buyer,
    /// zero cost.
    pub fn interval_grids(info: InformationStructure, l: usize) -> Result<Self, MarketError> {
        let grids = (0..info.firms())
            .map(|i| {
                (0..info.signal_count(i))
                    .map(|s| ActionGrid::for_signal(info.signal_max(i, s), l))
                    .collect::<Result<Vec<_>, _>>()
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(info, grids, DemandModel::UnitBuyer, 0.0)
    }

    pub fn new(
        info: InformationStructure,
        grids: Vec<Vec<ActionGrid>>,
        demand: DemandModel,
        cost: f64,
    ) -> Result<Self, MarketError> {
        if info.firms() == 0 {
            return Err(MarketError::NoFirms);
        }
        if grids.len() != info.firms()
            || grids.iter().enumerate().any(|(i, g)| g.len() != info.signal_count(i))
        {
            return Err(MarketError::ProfileShape("one grid per firm and signal is required".into()));
        }
        let benchmarks = benchmark_profits(&info, &grids);
        Ok(Self { info, grids, demand, cost, benchmarks })
    }

    /// Replaces the aggregate competitive and monopoly profits, keeping the
    /// per-signal and per-state breakdowns consistent with them.
    pub fn with_aggregate_benchmarks(mut self, nash_profit: f64, monopoly_profit: f64) -> Self {
        let b = &mut self.benchmarks;
        b.nash_profit = nash_profit;
        b.monopoly_profit = monopoly_profit;
        b.signal_nash.fill(nash_profit);
        b.signal_monopoly.fill(monopoly_profit);
        b.state_nash.fill(nash_profit);
        b.state_monopoly.fill(monopoly_profit);
        b.firm_monopoly_profits.fill(monopoly_profit);
        self
    }

    pub fn info(&self) -> &InformationStructure {
        &self.info
    }

    pub fn firms(&self) -> usize {
        self.info.firms()
    }

    pub fn grid(&self, firm: usize, signal: usize) -> &ActionGrid {
        &self.grids[firm][signal]
    }

    pub fn grids(&self, firm: usize) -> &[ActionGrid] {
        &self.grids[firm]
    }

    pub fn demand(&self) -> DemandModel {
        self.demand
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    pub fn benchmarks(&self) -> &Benchmarks {
        &self.benchmarks
    }

    /// Largest number of actions at any signal of any firm.
    pub fn max_actions(&self) -> usize {
        self.grids.iter().flatten().map(ActionGrid::len).max().unwrap_or(0)
    }

    pub fn highest_price(&self) -> f64 {
        self.grids.iter().flatten().map(ActionGrid::max_price).fold(0.0, f64::max)
    }

    /// Prices of a profile given as grid indices.
    pub fn prices_of(&self, actions: &[Vec<usize>]) -> PriceProfile {
        actions
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(s, &a)| self.grids[i][s].price(a)).collect())
            .collect()
    }

    pub fn nash_profile(&self) -> PriceProfile {
        self.grids.iter().map(|g| g.iter().map(ActionGrid::nash_price).collect()).collect()
    }

    pub fn evaluate(&self, prices: &[Vec<f64>]) -> ProfileEvaluation {
        evaluate_profile(&self.info, self.cost, prices)
    }

    pub fn evaluate_actions(&self, actions: &[Vec<usize>]) -> ProfileEvaluation {
        self.evaluate(&self.prices_of(actions))
    }
}
