use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

/// How a tie at the lowest price is resolved.
pub enum TieRule<'a> {
    /// The unit buyer picks one of the tied firms uniformly at random.
    Random(&'a mut dyn RngCore),
    /// Each tied firm receives `1 / #ties` (expected shares, or a unit
    /// continuum of buyers).
    Expected,
}

/// Buyer side of the stage game.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DemandModel {
    /// One buyer per period; ties resolved at random while learning.
    UnitBuyer,
    /// A unit mass of identical buyers; ties split deterministically.
    Continuum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageResult {
    pub quantities: Vec<f64>,
    pub payoffs: Vec<f64>,
}

/// Allocates the buyer among firms at zero marginal cost.
pub fn allocate_demand(prices: &[f64], wtp: f64, ties: TieRule<'_>) -> StageResult {
    let mut quantities = vec![0.0; prices.len()];
    let mut payoffs = vec![0.0; prices.len()];
    allocate_into(prices, wtp, 0.0, ties, &mut quantities, &mut payoffs);
    StageResult { quantities, payoffs }
}

/// Non-allocating core of [`allocate_demand`] with a marginal cost.
pub fn allocate_into(
    prices: &[f64],
    wtp: f64,
    cost: f64,
    ties: TieRule<'_>,
    quantities: &mut [f64],
    payoffs: &mut [f64],
) {
    quantities.fill(0.0);
    payoffs.fill(0.0);
    let low = prices.iter().copied().fold(f64::INFINITY, f64::min);
    if !(low <= wtp) {
        return;
    }
    let tied = prices.iter().filter(|&&p| p == low).count();
    match ties {
        TieRule::Expected => {
            let share = 1.0 / tied as f64;
            for (i, &p) in prices.iter().enumerate() {
                if p == low {
                    quantities[i] = share;
                }
            }
        }
        TieRule::Random(rng) => {
            let pick = if tied == 1 { 0 } else { rng.random_range(0..tied) };
            let winner = prices
                .iter()
                .enumerate()
                .filter(|(_, &p)| p == low)
                .nth(pick)
                .map(|(i, _)| i)
                .expect("pick is below the tie count");
            quantities[winner] = 1.0;
        }
    }
    for i in 0..prices.len() {
        payoffs[i] = (prices[i] - cost) * quantities[i];
    }
}
