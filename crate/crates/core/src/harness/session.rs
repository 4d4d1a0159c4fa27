use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, SessionConfig, SessionSeed};
use crate::learning::{choose_action, epsilon, init_q, QTable};
use crate::market::{allocate_into, DemandModel, Market, MarketError, PriceProfile, ProfileEvaluation, TieRule, World};

/// Which periods are recorded: all of `0..dense_until`, then every
/// `stride`-th one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSettings {
    pub dense_until: u64,
    pub stride: u64,
}

impl Default for TraceSettings {
    fn default() -> Self {
        Self { dense_until: 100_000, stride: 100 }
    }
}

impl TraceSettings {
    pub fn records(&self, period: u64) -> bool {
        period < self.dense_until || (self.stride > 0 && period % self.stride == 0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirmSample {
    pub signal: usize,
    pub chosen_price: f64,
    /// First maximizer of the row at the current signal.
    pub greedy_price: f64,
    pub max_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceSample {
    pub period: u64,
    pub firms: Vec<FirmSample>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trace {
    pub samples: Vec<TraceSample>,
}

/// Tracks how long each (firm, signal) choice has gone unchanged.
///
/// A cell's first visit counts as a change. Cells never visited count as
/// stable since period 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTracker {
    last: Vec<Vec<Option<usize>>>,
    latest_change: Option<u64>,
}

impl ConvergenceTracker {
    pub fn new(signal_counts: &[usize]) -> Self {
        Self { last: signal_counts.iter().map(|&k| vec![None; k]).collect(), latest_change: None }
    }

    #[inline]
    pub fn observe(&mut self, firm: usize, signal: usize, action: usize, period: u64) {
        let cell = &mut self.last[firm][signal];
        if *cell != Some(action) {
            *cell = Some(action);
            self.latest_change = Some(period);
        }
    }

    /// Whether every cell has been unchanged for `window` periods after
    /// `period`'s observations.
    #[inline]
    pub fn is_stable(&self, period: u64, window: u64) -> bool {
        match self.latest_change {
            Some(change) => period - change >= window,
            None => period + 1 >= window,
        }
    }

    pub fn last_action(&self, firm: usize, signal: usize) -> Option<usize> {
        self.last[firm][signal]
    }
}

enum WorldSampler {
    Single,
    Uniform(usize),
    Weighted(WeightedIndex<f64>),
}

impl WorldSampler {
    fn new(worlds: &[World]) -> Result<Self, MarketError> {
        if worlds.len() == 1 {
            return Ok(Self::Single);
        }
        let first = worlds[0].weight;
        if worlds.iter().all(|w| w.weight == first) {
            return Ok(Self::Uniform(worlds.len()));
        }
        WeightedIndex::new(worlds.iter().map(|w| w.weight))
            .map(Self::Weighted)
            .map_err(|e| MarketError::InvalidDistribution(e.to_string()))
    }

    #[inline]
    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        match self {
            Self::Single => 0,
            Self::Uniform(n) => rng.random_range(0..*n),
            Self::Weighted(dist) => dist.sample(rng),
        }
    }
}

/// Step-by-step learning dynamics of one session.
pub struct Simulation<'m> {
    market: &'m Market,
    tables: Vec<QTable>,
    beta: f64,
    env: ChaCha8Rng,
    firm_rngs: Vec<ChaCha8Rng>,
    sampler: WorldSampler,
    world: usize,
    period: u64,
    signals: Vec<usize>,
    actions: Vec<usize>,
    prices: Vec<f64>,
    quantities: Vec<f64>,
    payoffs: Vec<f64>,
    tracker: ConvergenceTracker,
}

impl<'m> Simulation<'m> {
    pub fn new(market: &'m Market, cfg: &SessionConfig, seed: SessionSeed) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let n = market.firms();
        if market.info().signal_counts().len() != n {
            return Err(MarketError::ProfileShape("firm count mismatch".into()).into());
        }
        let tables = (0..n)
            .map(|i| init_q(market, i, cfg.alpha, cfg.delta, cfg.init))
            .collect::<Result<Vec<_>, _>>()?;
        for (i, q) in tables.iter().enumerate() {
            if market.grids(i).iter().any(|g| g.len() != q.actions()) {
                return Err(MarketError::InvalidGrid(format!("firm {i} has menus of unequal length")).into());
            }
        }
        let mut env = seed.environment_rng();
        let sampler = WorldSampler::new(market.info().worlds())?;
        let world = sampler.sample(&mut env);
        Ok(Self {
            market,
            tables,
            beta: cfg.beta,
            env,
            firm_rngs: (0..n).map(|i| seed.firm_rng(i)).collect(),
            sampler,
            world,
            period: 0,
            signals: vec![0; n],
            actions: vec![0; n],
            prices: vec![0.0; n],
            quantities: vec![0.0; n],
            payoffs: vec![0.0; n],
            tracker: ConvergenceTracker::new(market.info().signal_counts()),
        })
    }

    /// Plays one period and updates every table.
    #[inline]
    pub fn step(&mut self) {
        let info = self.market.info();
        let t = self.period;
        let eps = epsilon(t, self.beta);
        for i in 0..self.tables.len() {
            let s = info.signal(i, self.world);
            let a = choose_action(&self.tables[i], s, eps, &mut self.firm_rngs[i]);
            self.signals[i] = s;
            self.actions[i] = a;
            self.prices[i] = self.market.grid(i, s).price(a);
            self.tracker.observe(i, s, a, t);
        }
        let ties = match self.market.demand() {
            DemandModel::UnitBuyer => TieRule::Random(&mut self.env),
            DemandModel::Continuum => TieRule::Expected,
        };
        allocate_into(
            &self.prices,
            info.wtp(self.world),
            self.market.cost(),
            ties,
            &mut self.quantities,
            &mut self.payoffs,
        );
        let next = self.sampler.sample(&mut self.env);
        for i in 0..self.tables.len() {
            let s_next = info.signal(i, next);
            self.tables[i].update(self.signals[i], self.actions[i], self.payoffs[i], s_next);
        }
        self.world = next;
        self.period += 1;
    }

    /// Periods played so far.
    pub fn period(&self) -> u64 {
        self.period
    }

    pub fn market(&self) -> &Market {
        self.market
    }

    pub fn tables(&self) -> &[QTable] {
        &self.tables
    }

    pub fn into_tables(self) -> Vec<QTable> {
        self.tables
    }

    pub fn tracker(&self) -> &ConvergenceTracker {
        &self.tracker
    }

    /// Signals, actions, prices and payoffs of the last period played.
    pub fn last_signals(&self) -> &[usize] {
        &self.signals
    }

    pub fn last_actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn last_prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn last_payoffs(&self) -> &[f64] {
        &self.payoffs
    }

    pub fn is_stable(&self, window: u64) -> bool {
        self.period > 0 && self.tracker.is_stable(self.period - 1, window)
    }

    /// Last chosen action at every (firm, signal); unvisited cells fall back
    /// to the greedy action.
    pub fn strategies(&self) -> Vec<Vec<usize>> {
        self.tables
            .iter()
            .enumerate()
            .map(|(i, q)| {
                (0..q.signals()).map(|s| self.tracker.last_action(i, s).unwrap_or_else(|| q.first_greedy(s))).collect()
            })
            .collect()
    }

    fn sample(&self) -> TraceSample {
        let firms = self
            .tables
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let s = self.signals[i];
                let grid = self.market.grid(i, s);
                FirmSample {
                    signal: s,
                    chosen_price: self.prices[i],
                    greedy_price: grid.price(q.first_greedy(s)),
                    max_q: q.max_value(s),
                }
            })
            .collect();
        TraceSample { period: self.period - 1, firms }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionOutcome {
    pub seed: SessionSeed,
    pub converged: bool,
    pub periods: u64,
    /// Grid index per firm and signal.
    pub strategies: Vec<Vec<usize>>,
    pub prices: PriceProfile,
    /// Expected-share scoring of the final profile.
    pub evaluation: ProfileEvaluation,
    pub tables: Vec<QTable>,
    pub trace: Option<Trace>,
}

pub fn run_session(cfg: &SessionConfig, seed: SessionSeed) -> Result<SessionOutcome, HarnessError> {
    let market = cfg.market.build()?;
    run_session_in(&market, cfg, seed)
}

/// Runs a session on an already built market, which must match
/// `cfg.market`.
pub fn run_session_in(market: &Market, cfg: &SessionConfig, seed: SessionSeed) -> Result<SessionOutcome, HarnessError> {
    let mut sim = Simulation::new(market, cfg, seed)?;
    let mut trace = cfg.trace.map(|_| Trace::default());
    let mut converged = false;
    while sim.period() < cfg.max_periods {
        sim.step();
        if let (Some(settings), Some(trace)) = (cfg.trace, trace.as_mut()) {
            if settings.records(sim.period() - 1) {
                trace.samples.push(sim.sample());
            }
        }
        if sim.is_stable(cfg.window) {
            converged = true;
            break;
        }
    }
    let strategies = sim.strategies();
    let prices = market.prices_of(&strategies);
    let evaluation = market.evaluate(&prices);
    Ok(SessionOutcome {
        seed,
        converged,
        periods: sim.period(),
        strategies,
        prices,
        evaluation,
        tables: sim.into_tables(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::MarketSpec;

    fn quick(k: &[usize]) -> SessionConfig {
        let mut cfg = SessionConfig::desk(k);
        cfg.beta = 2e-4;
        cfg.window = 2_000;
        cfg.max_periods = 300_000;
        cfg
    }

    #[test]
    fn tracker_counts_first_visit_as_change() {
        let mut t = ConvergenceTracker::new(&[2]);
        t.observe(0, 0, 3, 0);
        assert!(!t.is_stable(0, 1));
        t.observe(0, 0, 3, 1);
        assert!(t.is_stable(1, 1));
        assert!(!t.is_stable(1, 2));
        t.observe(0, 1, 0, 2);
        assert!(!t.is_stable(2, 1));
        assert!(t.is_stable(4, 2));
    }

    #[test]
    fn sessions_are_reproducible() {
        let cfg = quick(&[2, 2]);
        let a = run_session(&cfg, SessionSeed::new(7, 0)).unwrap();
        let b = run_session(&cfg, SessionSeed::new(7, 0)).unwrap();
        assert_eq!(a, b);
        let c = run_session(&cfg, SessionSeed::new(7, 1)).unwrap();
        assert_ne!(a.tables, c.tables);
    }

    #[test]
    fn outcome_shapes_and_grid_membership() {
        let cfg = quick(&[4, 1]);
        let market = cfg.market.build().unwrap();
        let out = run_session_in(&market, &cfg, SessionSeed::new(1, 2)).unwrap();
        assert_eq!(out.strategies[0].len(), 4);
        assert_eq!(out.strategies[1].len(), 1);
        for (i, row) in out.prices.iter().enumerate() {
            for (s, &p) in row.iter().enumerate() {
                assert!(market.grid(i, s).index_of(p).is_some());
            }
        }
        assert!(out.periods <= cfg.max_periods);
    }

    #[test]
    fn period_cap_is_respected() {
        let mut cfg = quick(&[1, 1]);
        cfg.beta = 0.0;
        cfg.window = 5_000;
        cfg.max_periods = 5_000;
        let out = run_session(&cfg, SessionSeed::new(3, 0)).unwrap();
        assert!(!out.converged);
        assert_eq!(out.periods, 5_000);
    }

    #[test]
    fn trace_is_recorded_without_changing_dynamics() {
        let mut cfg = quick(&[1, 1]);
        cfg.max_periods = 20_000;
        let plain = run_session(&cfg, SessionSeed::new(5, 0)).unwrap();
        cfg.trace = Some(TraceSettings { dense_until: 100, stride: 1000 });
        let traced = run_session(&cfg, SessionSeed::new(5, 0)).unwrap();
        assert_eq!(plain.tables, traced.tables);
        let trace = traced.trace.unwrap();
        assert_eq!(trace.samples[99].period, 99);
        assert_eq!(trace.samples[100].period, 1000);
    }

    #[test]
    fn note_environment_runs() {
        let mut cfg = SessionConfig::note();
        cfg.window = 1_000;
        cfg.max_periods = 100_000;
        let out = run_session(&cfg, SessionSeed::new(0, 0)).unwrap();
        assert!(matches!(cfg.market, MarketSpec::Note { .. }));
        assert_eq!(out.prices.len(), 2);
    }
}
