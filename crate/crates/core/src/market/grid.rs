use serde::{Deserialize, Serialize};

use super::MarketError;

/// The price menu available at one signal.
///
/// Grids built by [`ActionGrid::for_signal`] hold
/// `top * (j + 2) / l` for `j = 0..l`: the lowest point is the unique
/// Bertrand-Nash price, `top` itself sits at position `l - 2`, and a single
/// point lies above it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionGrid {
    prices: Vec<f64>,
    step: f64,
    nash_index: usize,
    signal_max: f64,
}

impl ActionGrid {
    pub fn for_signal(signal_max: f64, l: usize) -> Result<Self, MarketError> {
        Self::affine(0.0, signal_max, l)
    }

    /// `base + (top - base) * (j + 2) / l` for `j = 0..l`.
    pub fn affine(base: f64, top: f64, l: usize) -> Result<Self, MarketError> {
        if l < 2 {
            return Err(MarketError::InvalidGrid(format!("grid needs at least 2 points, got {l}")));
        }
        if !(top > base) || !top.is_finite() || !base.is_finite() {
            return Err(MarketError::InvalidGrid(format!("grid top {top} must exceed base {base}")));
        }
        let span = top - base;
        let lf = l as f64;
        let prices = (0..l).map(|j| base + span * (j + 2) as f64 / lf).collect();
        Ok(Self { prices, step: span / lf, nash_index: 0, signal_max: top })
    }

    /// `count` evenly spaced points on `[low, high]`.
    pub fn linspace(low: f64, high: f64, count: usize, signal_max: f64) -> Result<Self, MarketError> {
        if count < 2 || !(high > low) || !(low >= 0.0) {
            return Err(MarketError::InvalidGrid(format!("cannot space {count} points on [{low}, {high}]")));
        }
        let gaps = (count - 1) as f64;
        let prices = (0..count)
            .map(|j| if j + 1 == count { high } else { low + (high - low) * j as f64 / gaps })
            .collect();
        Ok(Self { prices, step: (high - low) / gaps, nash_index: 0, signal_max })
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn price(&self, index: usize) -> f64 {
        self.prices[index]
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn nash_index(&self) -> usize {
        self.nash_index
    }

    pub fn nash_price(&self) -> f64 {
        self.prices[self.nash_index]
    }

    pub fn signal_max(&self) -> f64 {
        self.signal_max
    }

    pub fn max_price(&self) -> f64 {
        *self.prices.last().expect("grids are nonempty")
    }

    pub fn index_of(&self, price: f64) -> Option<usize> {
        let tol = 1e-9 * self.step.abs().max(f64::MIN_POSITIVE);
        self.prices.iter().position(|&p| (p - price).abs() <= tol)
    }
}
