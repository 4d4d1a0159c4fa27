//! State spaces, interval partitions and the per-firm signal maps built on them.
//!
//! Every information structure the simulator supports is a deterministic
//! function from a finite set of *worlds* to one signal per firm. A world is
//! a WTP state, optionally paired with a draw of payoff-irrelevant signals.
//! Partitions map each state to exactly one world; payoff-irrelevant signal
//! experiments expand each state into one world per signal draw.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use super::entropy::shannon_entropy;
use super::MarketError;

const PRIOR_TOLERANCE: f64 = 1e-12;

/// Ordered WTP levels with a prior over them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateSpace {
    values: Vec<f64>,
    prior: Vec<f64>,
}

impl StateSpace {
    pub fn new(values: Vec<f64>, prior: Vec<f64>) -> Result<Self, MarketError> {
        if values.is_empty() || values.len() != prior.len() {
            return Err(MarketError::InvalidStateSpace(
                "values and prior must be nonempty and of equal length".into(),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(MarketError::InvalidStateSpace(
                "values must be finite and strictly increasing".into(),
            ));
        }
        if prior.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(MarketError::InvalidStateSpace(
                "prior probabilities must be strictly positive".into(),
            ));
        }
        let total: f64 = prior.iter().sum();
        if (total - 1.0).abs() > PRIOR_TOLERANCE {
            return Err(MarketError::InvalidStateSpace(format!(
                "prior sums to {total}, expected 1"
            )));
        }
        Ok(Self { values, prior })
    }

    pub fn uniform(values: Vec<f64>) -> Result<Self, MarketError> {
        let n = values.len().max(1);
        let prior = vec![1.0 / n as f64; values.len()];
        Self::new(values, prior)
    }

    /// `{lowest, lowest + 1, ..., lowest + m - 1}` with a uniform prior.
    pub fn contiguous(lowest: u32, m: usize) -> Result<Self, MarketError> {
        Self::uniform((0..m).map(|i| f64::from(lowest) + i as f64).collect())
    }

    /// `{5, 6, ..., 20}`, uniform.
    pub fn baseline() -> Self {
        Self::contiguous(5, 16).expect("baseline state space is valid")
    }

    /// A single certain state.
    pub fn degenerate(value: f64) -> Result<Self, MarketError> {
        Self::new(vec![value], vec![1.0])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn prior(&self) -> &[f64] {
        &self.prior
    }

    pub fn value(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn index_of(&self, wtp: f64) -> Option<usize> {
        self.values.iter().position(|&v| v == wtp)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().zip(&self.prior).map(|(v, p)| v * p).sum()
    }

    pub fn is_uniform(&self) -> bool {
        self.prior.windows(2).all(|w| w[0] == w[1])
    }
}

/// Contiguous, equal-size intervals of state indices, in state order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    ranges: Vec<Range<usize>>,
    state_signal: Vec<usize>,
}

/// Splits `m` ordered states into `k` consecutive blocks of `m / k` states.
pub fn build_partition(m: usize, k: usize) -> Result<Partition, MarketError> {
    if k == 0 || m == 0 || m % k != 0 {
        return Err(MarketError::InvalidStructure { states: m, signals: k });
    }
    let width = m / k;
    let ranges: Vec<Range<usize>> = (0..k).map(|s| s * width..(s + 1) * width).collect();
    let state_signal = (0..m).map(|i| i / width).collect();
    Ok(Partition { ranges, state_signal })
}

impl Partition {
    pub fn signal_count(&self) -> usize {
        self.ranges.len()
    }

    pub fn state_count(&self) -> usize {
        self.state_signal.len()
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn signal_of_index(&self, state: usize) -> usize {
        self.state_signal[state]
    }

    /// `log2(m / k)` bits: the uncertainty left about a uniformly drawn state
    /// after observing its block.
    pub fn entropy(&self) -> f64 {
        (self.state_count() as f64 / self.signal_count() as f64).log2()
    }
}

/// Signal index of the block containing WTP `wtp`.
pub fn signal_of(partition: &Partition, states: &StateSpace, wtp: f64) -> Result<usize, MarketError> {
    let index = states.index_of(wtp).ok_or(MarketError::UnknownState(wtp))?;
    if index >= partition.state_count() {
        return Err(MarketError::UnknownState(wtp));
    }
    Ok(partition.signal_of_index(index))
}

/// How payoff-irrelevant signals are shared between firms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignalSharing {
    /// One draw per period observed by every firm.
    Common,
    /// Independent draws per firm.
    Independent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct World {
    pub state: usize,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InformationStructure {
    states: StateSpace,
    worlds: Vec<World>,
    /// `firm_signals[firm][world]`
    firm_signals: Vec<Vec<usize>>,
    signal_counts: Vec<usize>,
}

impl InformationStructure {
    pub fn from_partitions(states: StateSpace, partitions: Vec<Partition>) -> Result<Self, MarketError> {
        if partitions.is_empty() {
            return Err(MarketError::NoFirms);
        }
        if let Some(p) = partitions.iter().find(|p| p.state_count() != states.len()) {
            return Err(MarketError::InvalidStructure {
                states: states.len(),
                signals: p.signal_count(),
            });
        }
        let worlds = states
            .prior()
            .iter()
            .enumerate()
            .map(|(state, &weight)| World { state, weight })
            .collect::<Vec<_>>();
        let firm_signals = partitions
            .iter()
            .map(|p| (0..states.len()).map(|i| p.signal_of_index(i)).collect())
            .collect();
        let signal_counts = partitions.iter().map(Partition::signal_count).collect();
        Ok(Self { states, worlds, firm_signals, signal_counts })
    }

    /// Interval partitions with `signal_counts[i]` blocks for firm `i`.
    pub fn interval(states: StateSpace, signal_counts: &[usize]) -> Result<Self, MarketError> {
        let partitions = signal_counts
            .iter()
            .map(|&k| build_partition(states.len(), k))
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_partitions(states, partitions)
    }

    /// Signals drawn uniformly from `count` labels independently of the state.
    pub fn payoff_irrelevant(
        states: StateSpace,
        count: usize,
        firms: usize,
        sharing: SignalSharing,
    ) -> Result<Self, MarketError> {
        if firms == 0 {
            return Err(MarketError::NoFirms);
        }
        if count == 0 {
            return Err(MarketError::InvalidStructure { states: states.len(), signals: 0 });
        }
        let draws_per_state = match sharing {
            SignalSharing::Common => count,
            SignalSharing::Independent => count.pow(firms as u32),
        };
        let mut worlds = Vec::with_capacity(states.len() * draws_per_state);
        let mut firm_signals = vec![Vec::with_capacity(worlds.capacity()); firms];
        for (state, &p) in states.prior().iter().enumerate() {
            for draw in 0..draws_per_state {
                worlds.push(World { state, weight: p / draws_per_state as f64 });
                for (firm, signals) in firm_signals.iter_mut().enumerate() {
                    let s = match sharing {
                        SignalSharing::Common => draw,
                        SignalSharing::Independent => (draw / count.pow(firm as u32)) % count,
                    };
                    signals.push(s);
                }
            }
        }
        Ok(Self { states, worlds, firm_signals, signal_counts: vec![count; firms] })
    }

    pub fn states(&self) -> &StateSpace {
        &self.states
    }

    pub fn worlds(&self) -> &[World] {
        &self.worlds
    }

    pub fn firms(&self) -> usize {
        self.firm_signals.len()
    }

    pub fn signal_counts(&self) -> &[usize] {
        &self.signal_counts
    }

    pub fn signal_count(&self, firm: usize) -> usize {
        self.signal_counts[firm]
    }

    pub fn signal(&self, firm: usize, world: usize) -> usize {
        self.firm_signals[firm][world]
    }

    pub fn signal_map(&self, firm: usize) -> &[usize] {
        &self.firm_signals[firm]
    }

    pub fn wtp(&self, world: usize) -> f64 {
        self.states.value(self.worlds[world].state)
    }

    pub fn signal_probability(&self, firm: usize, signal: usize) -> f64 {
        self.worlds
            .iter()
            .zip(&self.firm_signals[firm])
            .filter(|(_, &s)| s == signal)
            .map(|(w, _)| w.weight)
            .sum()
    }

    /// Posterior over states given `signal`, as `(state index, probability)`
    /// in state order.
    pub fn posterior(&self, firm: usize, signal: usize) -> Vec<(usize, f64)> {
        let mut mass = vec![0.0; self.states.len()];
        for (w, &s) in self.worlds.iter().zip(&self.firm_signals[firm]) {
            if s == signal {
                mass[w.state] += w.weight;
            }
        }
        let total: f64 = mass.iter().sum();
        mass.into_iter()
            .enumerate()
            .filter(|(_, m)| *m > 0.0)
            .map(|(i, m)| (i, m / total))
            .collect()
    }

    /// Largest WTP in the support of the posterior given `signal`.
    pub fn signal_max(&self, firm: usize, signal: usize) -> f64 {
        self.worlds
            .iter()
            .zip(&self.firm_signals[firm])
            .filter(|(_, &s)| s == signal)
            .map(|(w, _)| self.states.value(w.state))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Conditional entropy `H(state | signal)` of firm `firm`, in bits.
    pub fn entropy(&self, firm: usize) -> f64 {
        (0..self.signal_count(firm))
            .map(|s| {
                let ps = self.signal_probability(firm, s);
                let weights: Vec<f64> = self.posterior(firm, s).into_iter().map(|(_, p)| p).collect();
                ps * shannon_entropy(&weights).unwrap_or(0.0)
            })
            .sum()
    }

    /// Firm with the finest information (most signals); lowest index on ties.
    pub fn most_informed(&self) -> usize {
        let best = *self.signal_counts.iter().max().expect("at least one firm");
        self.signal_counts.iter().position(|&k| k == best).unwrap()
    }

    /// Firm with the coarsest information (fewest signals); lowest index on ties.
    pub fn least_informed(&self) -> usize {
        let worst = *self.signal_counts.iter().min().expect("at least one firm");
        self.signal_counts.iter().position(|&k| k == worst).unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_blocks_of_eight() {
        let p = build_partition(16, 2).unwrap();
        assert_eq!(p.ranges(), &[0..8, 8..16]);
        assert_eq!(p.entropy(), 3.0);
        let states = StateSpace::baseline();
        assert_eq!(signal_of(&p, &states, 12.0).unwrap(), 0);
        assert_eq!(signal_of(&p, &states, 13.0).unwrap(), 1);
    }

    #[test]
    fn perfect_and_quartile_partitions() {
        let p = build_partition(16, 16).unwrap();
        assert_eq!(p.signal_count(), 16);
        assert!(p.ranges().iter().all(|r| r.len() == 1));
        assert_eq!(p.entropy(), 0.0);

        let p = build_partition(16, 4).unwrap();
        assert_eq!(p.ranges(), &[0..4, 4..8, 8..12, 12..16]);
        assert_eq!(p.entropy(), 2.0);
    }

    #[test]
    fn rejects_non_dividing_counts() {
        assert!(matches!(build_partition(16, 3), Err(MarketError::InvalidStructure { .. })));
        assert!(build_partition(16, 0).is_err());
    }

    #[test]
    fn signal_lookup() {
        let states = StateSpace::baseline();
        assert_eq!(signal_of(&build_partition(16, 4).unwrap(), &states, 9.0).unwrap(), 1);
        assert_eq!(signal_of(&build_partition(16, 1).unwrap(), &states, 20.0).unwrap(), 0);
        assert_eq!(signal_of(&build_partition(16, 16).unwrap(), &states, 5.0).unwrap(), 0);
        assert!(matches!(
            signal_of(&build_partition(16, 4).unwrap(), &states, 21.0),
            Err(MarketError::UnknownState(_))
        ));
    }

    #[test]
    fn state_space_validation() {
        assert!(StateSpace::new(vec![1.0, 1.0], vec![0.5, 0.5]).is_err());
        assert!(StateSpace::new(vec![1.0, 2.0], vec![0.5, 0.6]).is_err());
        assert!(StateSpace::new(vec![1.0, 2.0], vec![1.0, 0.0]).is_err());
        let s = StateSpace::baseline();
        assert_eq!(s.len(), 16);
        assert_eq!(s.mean(), 12.5);
        assert!(s.prior().iter().all(|&p| p == 1.0 / 16.0));
    }

    #[test]
    fn irrelevant_signals_expand_worlds() {
        let states = StateSpace::degenerate(10.0).unwrap();
        let common = InformationStructure::payoff_irrelevant(states.clone(), 3, 2, SignalSharing::Common).unwrap();
        assert_eq!(common.worlds().len(), 3);
        assert!((0..3).all(|w| common.signal(0, w) == common.signal(1, w)));
        assert_eq!(common.entropy(0), 0.0);

        let indep = InformationStructure::payoff_irrelevant(states, 3, 2, SignalSharing::Independent).unwrap();
        assert_eq!(indep.worlds().len(), 9);
        let mut pairs: Vec<_> = (0..9).map(|w| (indep.signal(0, w), indep.signal(1, w))).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), 9);
        assert!((indep.signal_probability(1, 2) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn informedness_ordering() {
        let info = InformationStructure::interval(StateSpace::baseline(), &[16, 2]).unwrap();
        assert_eq!(info.most_informed(), 0);
        assert_eq!(info.least_informed(), 1);
        assert_eq!(info.signal_max(1, 0), 12.0);
        assert_eq!(info.posterior(1, 1).len(), 8);
    }
}
