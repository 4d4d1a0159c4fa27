//! Exhaustive unilateral-deviation check on the discretized price grids.

use serde::{Deserialize, Serialize};

use super::{allocate_into, Market, MarketError, TieRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub firm: usize,
    pub signal: usize,
    pub from_price: f64,
    pub to_price: f64,
    /// Gain in expected per-period profit (unconditional on the signal).
    pub gain: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BneVerdict {
    /// Best profitable deviation at each (firm, signal) that has one.
    pub deviations: Vec<Deviation>,
}

impl BneVerdict {
    pub fn is_equilibrium(&self) -> bool {
        self.deviations.is_empty()
    }

    pub fn deviating_firms(&self) -> Vec<usize> {
        let mut firms: Vec<usize> = self.deviations.iter().map(|d| d.firm).collect();
        firms.dedup();
        firms
    }
}

const GAIN_TOLERANCE: f64 = 1e-12;

/// Scans every alternative grid price of every firm at every signal and
/// reports the strictly profitable ones.
pub fn verify_bne(market: &Market, prices: &[Vec<f64>]) -> Result<BneVerdict, MarketError> {
    let info = market.info();
    let n = market.firms();
    if prices.len() != n {
        return Err(MarketError::ProfileShape(format!("expected {n} firms, got {}", prices.len())));
    }
    for (i, row) in prices.iter().enumerate() {
        if row.len() != info.signal_count(i) {
            return Err(MarketError::ProfileShape(format!(
                "firm {i} has {} signals, profile lists {}",
                info.signal_count(i),
                row.len()
            )));
        }
        for (s, &p) in row.iter().enumerate() {
            if market.grid(i, s).index_of(p).is_none() {
                return Err(MarketError::OffGrid { firm: i, signal: s, price: p });
            }
        }
    }

    let mut quoted = vec![0.0; n];
    let mut shares = vec![0.0; n];
    let mut payoffs = vec![0.0; n];
    let mut deviations = Vec::new();
    for firm in 0..n {
        for signal in 0..info.signal_count(firm) {
            let worlds: Vec<usize> =
                (0..info.worlds().len()).filter(|&w| info.signal(firm, w) == signal).collect();
            let mut profit_at = |own: f64| -> f64 {
                let mut total = 0.0;
                for &w in &worlds {
                    for (j, q) in quoted.iter_mut().enumerate() {
                        *q = if j == firm { own } else { prices[j][info.signal(j, w)] };
                    }
                    allocate_into(&quoted, info.wtp(w), market.cost(), TieRule::Expected, &mut shares, &mut payoffs);
                    total += info.worlds()[w].weight * payoffs[firm];
                }
                total
            };
            let current_price = prices[firm][signal];
            let current = profit_at(current_price);
            let mut best = (current_price, current);
            for &alt in market.grid(firm, signal).prices() {
                let value = profit_at(alt);
                if value > best.1 {
                    best = (alt, value);
                }
            }
            let gain = best.1 - current;
            if gain > GAIN_TOLERANCE * (1.0 + current.abs()) {
                deviations.push(Deviation { firm, signal, from_price: current_price, to_price: best.0, gain });
            }
        }
    }
    Ok(BneVerdict { deviations })
}
