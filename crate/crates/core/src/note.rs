//! Single-state duopoly with a continuum of identical buyers, and the
//! diagnostics used to read its learning dynamics: sustainable and
//! stationary lines, the early Q-value bubble, event detection on traces
//! and the collusion threshold in the lowest price.
//!
//! The event detectors are heuristics over greedy-price traces:
//!
//! * **downward search**: a maximal run of samples over which the lowest
//!   greedy price never rises, containing at least two strict decreases
//!   made by different firms one after the other;
//! * **rebound**: the lowest greedy price rises from the trough of a spell
//!   below the stationary line to above the line within `rebound_window`
//!   periods;
//! * **alternating maintenance**: a run of at least `min_hold` periods in
//!   which exactly one firm's greedy price is the lowest grid price, held by
//!   a different firm than the previous such run.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::{HarnessError, SessionConfig, SessionSeed, Simulation, Trace};
use crate::market::{ActionGrid, DemandModel, InformationStructure, Market, MarketError, StateSpace};

#[derive(Debug, Error)]
pub enum NoteError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error("trace has {0} samples, at least 2 are needed")]
    TraceTooShort(usize),
    #[error("threshold needs at least 2 sweep points, got {0}")]
    TooFewPoints(usize),
    #[error("collusion index never crosses half its maximum")]
    NoCrossing,
    #[error("bubble probe needs a single-state market")]
    NotSingleState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoteEnvironment {
    /// Buyers' common reservation value `a`.
    pub reservation: f64,
    pub cost: f64,
    pub actions: usize,
    /// Lowest grid price; `None` keeps `c + 2 (a - c) / m`.
    pub min_action: Option<f64>,
}

impl Default for NoteEnvironment {
    fn default() -> Self {
        Self::baseline()
    }
}

impl NoteEnvironment {
    /// `a = 1`, `c = 0`, 20 actions.
    pub fn baseline() -> Self {
        Self { reservation: 1.0, cost: 0.0, actions: 20, min_action: None }
    }

    pub fn with_min_action(mut self, price: f64) -> Self {
        self.min_action = Some(price);
        self
    }

    pub fn with_actions(mut self, actions: usize) -> Self {
        self.actions = actions;
        self
    }

    /// `m` equally spaced prices ending at `a + (a - c) / m`.
    pub fn grid(&self) -> Result<ActionGrid, MarketError> {
        let (a, c, m) = (self.reservation, self.cost, self.actions);
        if !(a > c) {
            return Err(MarketError::InvalidGrid(format!("reservation value {a} must exceed cost {c}")));
        }
        match self.min_action {
            None => ActionGrid::affine(c, a, m),
            Some(low) => ActionGrid::linspace(low, a + (a - c) / m as f64, m, a),
        }
    }

    /// Competitive benchmark: both firms at the lowest grid price.
    pub fn nash_profit(&self) -> Result<f64, MarketError> {
        Ok(self.grid()?.price(0) - self.cost)
    }

    pub fn monopoly_profit(&self) -> f64 {
        self.reservation - self.cost
    }

    pub fn market(&self, firms: usize) -> Result<Market, MarketError> {
        let grid = self.grid()?;
        let states = StateSpace::degenerate(self.reservation)?;
        let info = InformationStructure::interval(states, &vec![1; firms])?;
        let grids = vec![vec![grid.clone()]; firms];
        let market = Market::new(info, grids, DemandModel::Continuum, self.cost)?;
        Ok(market.with_aggregate_benchmarks(grid.price(0) - self.cost, self.monopoly_profit()))
    }
}

/// Shares of a unit mass of buyers with reservation value `a`.
pub fn note_demand(prices: &[f64], a: f64) -> Vec<f64> {
    let low = prices.iter().copied().fold(f64::INFINITY, f64::min);
    if !(low <= a) {
        return vec![0.0; prices.len()];
    }
    let tied = prices.iter().filter(|&&p| p == low).count() as f64;
    prices.iter().map(|&p| if p == low { 1.0 / tied } else { 0.0 }).collect()
}

/// `(1 - delta) Q`: the lowest price that can keep value `q` while serving
/// the whole market.
pub fn sustainable_line(q: f64, delta: f64) -> f64 {
    (1.0 - delta) * q
}

/// `2 (1 - delta) Q`: the lowest common price that can keep value `q` with
/// the market split.
pub fn stationary_line(q: f64, delta: f64) -> f64 {
    2.0 * sustainable_line(q, delta)
}

/// Expected transaction price when two firms draw independently and
/// uniformly from `prices`.
pub fn random_transition_price(prices: &[f64]) -> f64 {
    let n = prices.len() as f64;
    let total: f64 = prices.iter().flat_map(|&a| prices.iter().map(move |&b| a.min(b))).sum();
    total / (n * n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BubbleStats {
    pub period: u64,
    pub mean_q: f64,
    pub min_q: f64,
    pub max_q: f64,
}

impl BubbleStats {
    pub fn range(&self) -> f64 {
        self.max_q - self.min_q
    }
}

/// End of the heavy-exploration phase: the period at which `epsilon`
/// falls to `1/e`.
pub fn exploration_horizon(beta: f64) -> u64 {
    if beta > 0.0 {
        (1.0 / beta).round() as u64
    } else {
        0
    }
}

/// Plays `cfg` for `periods` periods (default [`exploration_horizon`]) and
/// summarizes every firm's Q-values across actions.
pub fn bubble_probe(cfg: &SessionConfig, seed: SessionSeed, periods: Option<u64>) -> Result<BubbleStats, NoteError> {
    let market = cfg.market.build()?;
    if market.info().worlds().len() != 1 {
        return Err(NoteError::NotSingleState);
    }
    let horizon = periods.unwrap_or_else(|| exploration_horizon(cfg.beta));
    let mut sim = Simulation::new(&market, cfg, seed)?;
    while sim.period() < horizon {
        sim.step();
    }
    let values: Vec<f64> = sim.tables().iter().flat_map(|q| q.values().iter().copied()).collect();
    Ok(BubbleStats {
        period: horizon,
        mean_q: values.iter().sum::<f64>() / values.len() as f64,
        min_q: values.iter().copied().fold(f64::INFINITY, f64::min),
        max_q: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSample {
    pub period: u64,
    pub chosen: Vec<f64>,
    pub greedy: Vec<f64>,
    pub max_q: Vec<f64>,
    pub sustainable: Vec<f64>,
    pub stationary: Vec<f64>,
}

impl DiagnosticsSample {
    fn low(&self) -> f64 {
        self.greedy.iter().copied().fold(f64::INFINITY, f64::min)
    }

    fn line(&self) -> f64 {
        self.stationary.iter().sum::<f64>() / self.stationary.len() as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EventKind {
    DownwardSearch,
    Rebound,
    AlternatingMaintenance,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::DownwardSearch => "downward-search",
            Self::Rebound => "rebound",
            Self::AlternatingMaintenance => "alternating-maintenance",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub period: u64,
    pub kind: EventKind,
    pub firm: Option<usize>,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventSettings {
    pub rebound_window: u64,
    pub min_hold: u64,
}

impl Default for EventSettings {
    fn default() -> Self {
        Self { rebound_window: 1_000, min_hold: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsTrace {
    pub delta: f64,
    pub lowest_price: f64,
    pub samples: Vec<DiagnosticsSample>,
    /// Ordered by period, then kind.
    pub events: Vec<Event>,
}

impl DiagnosticsTrace {
    /// Derives the lines from each sample's own `max_q`.
    pub fn from_trace(trace: &Trace, delta: f64, lowest_price: f64) -> Self {
        let samples = trace
            .samples
            .iter()
            .map(|s| {
                let max_q: Vec<f64> = s.firms.iter().map(|f| f.max_q).collect();
                DiagnosticsSample {
                    period: s.period,
                    chosen: s.firms.iter().map(|f| f.chosen_price).collect(),
                    greedy: s.firms.iter().map(|f| f.greedy_price).collect(),
                    sustainable: max_q.iter().map(|&q| sustainable_line(q, delta)).collect(),
                    stationary: max_q.iter().map(|&q| stationary_line(q, delta)).collect(),
                    max_q,
                }
            })
            .collect();
        Self { delta, lowest_price, samples, events: Vec::new() }
    }

    pub fn with_events(mut self, settings: &EventSettings) -> Result<Self, NoteError> {
        self.events = detect_events(&self, settings)?;
        Ok(self)
    }
}

pub fn detect_events(trace: &DiagnosticsTrace, settings: &EventSettings) -> Result<Vec<Event>, NoteError> {
    let samples = &trace.samples;
    if samples.len() < 2 {
        return Err(NoteError::TraceTooShort(samples.len()));
    }
    let mut events = downward_searches(samples);
    events.extend(rebounds(samples, settings.rebound_window));
    events.extend(maintenance(samples, trace.lowest_price, settings.min_hold));
    events.sort_by_key(|e| (e.period, e.kind));
    Ok(events)
}

fn lowering_firm(prev: &DiagnosticsSample, next: &DiagnosticsSample) -> usize {
    let low = next.low();
    (0..next.greedy.len())
        .filter(|&i| next.greedy[i] == low)
        .min_by(|&i, &j| (next.greedy[i] - prev.greedy[i]).total_cmp(&(next.greedy[j] - prev.greedy[j])))
        .unwrap_or(0)
}

fn downward_searches(samples: &[DiagnosticsSample]) -> Vec<Event> {
    let mut events = Vec::new();
    let mut start = 0;
    let mut movers: Vec<usize> = Vec::new();
    let close = |start: usize, end: usize, movers: &[usize], events: &mut Vec<Event>| {
        let alternates = movers.windows(2).any(|w| w[0] != w[1]);
        if movers.len() >= 2 && alternates {
            events.push(Event {
                period: samples[start].period,
                kind: EventKind::DownwardSearch,
                firm: movers.first().copied(),
                detail: format!(
                    "end={};decreases={};from={};to={}",
                    samples[end].period,
                    movers.len(),
                    samples[start].low(),
                    samples[end].low()
                ),
            });
        }
    };
    for i in 1..samples.len() {
        let (prev, next) = (&samples[i - 1], &samples[i]);
        if next.low() > prev.low() {
            close(start, i - 1, &movers, &mut events);
            start = i;
            movers.clear();
        } else if next.low() < prev.low() {
            movers.push(lowering_firm(prev, next));
        }
    }
    close(start, samples.len() - 1, &movers, &mut events);
    events
}

fn rebounds(samples: &[DiagnosticsSample], window: u64) -> Vec<Event> {
    let mut events = Vec::new();
    // lowest sample of the current below-line episode
    let mut trough: Option<usize> = None;
    for (i, s) in samples.iter().enumerate() {
        if s.low() < s.line() {
            if trough.is_none_or(|t| s.low() <= samples[t].low()) {
                trough = Some(i);
            }
        } else if s.low() > s.line() {
            if let Some(b) = trough.take() {
                if s.period - samples[b].period <= window {
                    let raiser = (0..s.greedy.len())
                        .max_by(|&x, &y| {
                            (s.greedy[x] - samples[b].greedy[x]).total_cmp(&(s.greedy[y] - samples[b].greedy[y]))
                        })
                        .unwrap_or(0);
                    events.push(Event {
                        period: s.period,
                        kind: EventKind::Rebound,
                        firm: Some(raiser),
                        detail: format!("from={};to={};line={}", samples[b].low(), s.low(), s.line()),
                    });
                }
            }
        }
    }
    events
}

fn maintenance(samples: &[DiagnosticsSample], lowest: f64, min_hold: u64) -> Vec<Event> {
    let tolerance = 1e-9 * lowest.abs().max(1.0);
    let holder = |s: &DiagnosticsSample| -> Option<usize> {
        let at_floor: Vec<usize> = (0..s.greedy.len()).filter(|&i| (s.greedy[i] - lowest).abs() <= tolerance).collect();
        (at_floor.len() == 1).then(|| at_floor[0])
    };
    // maximal runs of a single holder: (holder, first sample, last sample)
    let mut runs: Vec<(usize, usize, usize)> = Vec::new();
    for (i, s) in samples.iter().enumerate() {
        match (holder(s), runs.last_mut()) {
            (Some(h), Some(last)) if last.0 == h && last.2 + 1 == i => last.2 = i,
            (Some(h), _) => runs.push((h, i, i)),
            (None, _) => {}
        }
    }
    let mut events = Vec::new();
    let mut previous: Option<usize> = None;
    for (h, first, last) in runs {
        let end = samples.get(last + 1).map_or(samples[last].period + 1, |s| s.period);
        let length = end - samples[first].period;
        if length < min_hold {
            continue;
        }
        if let Some(p) = previous {
            if p != h {
                events.push(Event {
                    period: samples[first].period,
                    kind: EventKind::AlternatingMaintenance,
                    firm: Some(h),
                    detail: format!("previous={p};length={length}"),
                });
            }
        }
        previous = Some(h);
    }
    events
}

/// Largest lowest-price value at which the piecewise-linear CI curve
/// crosses half its maximum. `points` are `(lowest price, CI)` pairs.
pub fn threshold_estimate(points: &[(f64, f64)]) -> Result<f64, NoteError> {
    if points.len() < 2 {
        return Err(NoteError::TooFewPoints(points.len()));
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let target = sorted.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) / 2.0;
    if !(target > 0.0) {
        return Err(NoteError::NoCrossing);
    }
    let mut crossing = None;
    for pair in sorted.windows(2) {
        let ((x0, y0), (x1, y1)) = (pair[0], pair[1]);
        if (y0 - target) * (y1 - target) > 0.0 {
            continue;
        }
        let x = if y1 == y0 { x1 } else { x0 + (target - y0) / (y1 - y0) * (x1 - x0) };
        crossing = Some(x);
    }
    crossing.ok_or(NoteError::NoCrossing)
}
