//! Tabular Q-learning with epsilon-greedy exploration.
//!
//! Agents are memoryless: the table is indexed by the firm's own signal and
//! its price index, and the continuation value comes from the signal received
//! in the following period.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::market::Market;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearningError {
    #[error("discount factor must lie in [0, 1), got {0}")]
    Discount(f64),
    #[error("learning rate must lie in (0, 1], got {0}")]
    LearningRate(f64),
    #[error("exploration decay must be finite and nonnegative, got {0}")]
    Decay(f64),
    #[error("firm {0} is not part of the market")]
    UnknownFirm(usize),
}

/// How the value table starts out.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum QInit {
    /// Discounted payoff against opponents pricing uniformly at random.
    #[default]
    UniformOpponent,
    Zeros,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExplorationSchedule {
    pub beta: f64,
}

impl ExplorationSchedule {
    pub fn new(beta: f64) -> Result<Self, LearningError> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(LearningError::Decay(beta));
        }
        Ok(Self { beta })
    }

    pub fn epsilon(&self, t: u64) -> f64 {
        epsilon(t, self.beta)
    }
}

/// `exp(-beta * t)`.
pub fn epsilon(t: u64, beta: f64) -> f64 {
    (-beta * t as f64).exp()
}

/// One agent's signal-by-action value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    values: Vec<f64>,
    signals: usize,
    actions: usize,
    alpha: f64,
    delta: f64,
}

impl QTable {
    pub fn new(signals: usize, actions: usize, alpha: f64, delta: f64, fill: f64) -> Result<Self, LearningError> {
        Self::from_values(vec![fill; signals * actions], signals, actions, alpha, delta)
    }

    pub fn from_values(
        values: Vec<f64>,
        signals: usize,
        actions: usize,
        alpha: f64,
        delta: f64,
    ) -> Result<Self, LearningError> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(LearningError::LearningRate(alpha));
        }
        if !(0.0..1.0).contains(&delta) {
            return Err(LearningError::Discount(delta));
        }
        assert_eq!(values.len(), signals * actions, "table dimensions");
        Ok(Self { values, signals, actions, alpha, delta })
    }

    pub fn signals(&self) -> usize {
        self.signals
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub fn row(&self, signal: usize) -> &[f64] {
        &self.values[signal * self.actions..(signal + 1) * self.actions]
    }

    #[inline]
    pub fn get(&self, signal: usize, action: usize) -> f64 {
        self.values[signal * self.actions + action]
    }

    pub fn set(&mut self, signal: usize, action: usize, value: f64) {
        self.values[signal * self.actions + action] = value;
    }

    #[inline]
    pub fn max_value(&self, signal: usize) -> f64 {
        self.row(signal).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// First maximizer of the row; never consumes randomness.
    pub fn first_greedy(&self, signal: usize) -> usize {
        let row = self.row(signal);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate().skip(1) {
            if v > row[best] {
                best = a;
            }
        }
        best
    }

    /// A maximizer of the row, uniform among ties.
    #[inline]
    pub fn greedy<R: Rng + ?Sized>(&self, signal: usize, rng: &mut R) -> usize {
        let row = self.row(signal);
        let mut best = f64::NEG_INFINITY;
        let mut first = 0;
        let mut ties = 0usize;
        for (a, &v) in row.iter().enumerate() {
            if v > best {
                best = v;
                first = a;
                ties = 1;
            } else if v == best {
                ties += 1;
            }
        }
        if ties == 1 {
            return first;
        }
        let pick = rng.random_range(0..ties);
        row.iter()
            .enumerate()
            .filter(|(_, &v)| v == best)
            .nth(pick)
            .map(|(a, _)| a)
            .expect("pick is below the tie count")
    }

    /// `Q(s,a) <- (1 - alpha) Q(s,a) + alpha [payoff + delta max_a' Q(s', a')]`
    #[inline]
    pub fn update(&mut self, signal: usize, action: usize, payoff: f64, next_signal: usize) {
        let continuation = self.max_value(next_signal);
        let cell = &mut self.values[signal * self.actions + action];
        *cell = (1.0 - self.alpha) * *cell + self.alpha * (payoff + self.delta * continuation);
    }
}

/// Epsilon-greedy choice: uniform over all actions with probability `eps`,
/// otherwise a (uniformly tie-broken) maximizer.
#[inline]
pub fn choose_action<R: Rng + ?Sized>(q: &QTable, signal: usize, eps: f64, rng: &mut R) -> usize {
    if eps > 0.0 && rng.random::<f64>() < eps {
        rng.random_range(0..q.actions)
    } else {
        q.greedy(signal, rng)
    }
}

/// Builds firm `firm`'s starting table for `market`.
pub fn init_q(market: &Market, firm: usize, alpha: f64, delta: f64, init: QInit) -> Result<QTable, LearningError> {
    if firm >= market.firms() {
        return Err(LearningError::UnknownFirm(firm));
    }
    let info = market.info();
    let signals = info.signal_count(firm);
    let actions = market.max_actions();
    match init {
        QInit::Zeros => QTable::new(signals, actions, alpha, delta, 0.0),
        QInit::Constant(c) => QTable::new(signals, actions, alpha, delta, c),
        QInit::UniformOpponent => {
            if !(0.0..1.0).contains(&delta) {
                return Err(LearningError::Discount(delta));
            }
            let mut values = vec![0.0; signals * actions];
            for s in 0..signals {
                let grid = market.grid(firm, s);
                let worlds: Vec<usize> =
                    (0..info.worlds().len()).filter(|&w| info.signal(firm, w) == s).collect();
                let mass: f64 = worlds.iter().map(|&w| info.worlds()[w].weight).sum();
                for (a, &price) in grid.prices().iter().enumerate() {
                    let mut expected = 0.0;
                    for &w in &worlds {
                        if price > info.wtp(w) {
                            continue;
                        }
                        let rivals: Vec<&[f64]> = (0..market.firms())
                            .filter(|&j| j != firm)
                            .map(|j| market.grid(j, info.signal(j, w)).prices())
                            .collect();
                        let share = expected_share(price, &rivals);
                        expected += info.worlds()[w].weight * (price - market.cost()) * share;
                    }
                    values[s * actions + a] = expected / mass / (1.0 - delta);
                }
            }
            QTable::from_values(values, signals, actions, alpha, delta)
        }
    }
}

/// Expected share of a firm quoting `price` when each rival draws uniformly
/// and independently from its own menu, ties split evenly.
fn expected_share(price: f64, rivals: &[&[f64]]) -> f64 {
    // tie_dist[t] = P(no rival strictly below and exactly t rivals tied)
    let mut tie_dist = vec![1.0];
    for menu in rivals {
        let n = menu.len() as f64;
        let above = menu.iter().filter(|&&p| p > price).count() as f64 / n;
        let equal = menu.iter().filter(|&&p| p == price).count() as f64 / n;
        let mut next = vec![0.0; tie_dist.len() + 1];
        for (t, &mass) in tie_dist.iter().enumerate() {
            next[t] += mass * above;
            next[t + 1] += mass * equal;
        }
        tie_dist = next;
    }
    tie_dist.iter().enumerate().map(|(t, &mass)| mass / (t + 1) as f64).sum()
}
