//! Seeded sessions, experiments and parameter sweeps.

mod experiment;
mod seed;
mod session;
pub mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::learning::{LearningError, QInit};
use crate::market::{InformationStructure, Market, MarketError, SignalSharing, StateSpace};
use crate::metrics::MetricsError;
use crate::note::NoteEnvironment;

pub use experiment::{fixed_state_experiment, run_experiment, score_outcome, ExperimentConfig, ExperimentSummary};
pub use seed::{derive_point_seed, stream_rng, SessionSeed};
pub use session::{
    run_session, run_session_in, ConvergenceTracker, FirmSample, SessionOutcome, Simulation, Trace, TraceSample,
    TraceSettings,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error(transparent)]
    Learning(#[from] LearningError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("invalid session configuration: {0}")]
    Config(String),
    #[error("exploration target nu * k * l = {0} must exceed 1")]
    Exploration(f64),
    #[error("unknown sweep preset `{0}`")]
    UnknownPreset(String),
    #[error("thread pool: {0}")]
    ThreadPool(String),
}

/// `beta = -ln(1 - 1 / (nu k l))`: the decay for which pure exploration
/// visits each of the `k * l` cells `nu` times in expectation.
pub fn beta_from_nu(nu: f64, k: usize, l: usize) -> Result<f64, HarnessError> {
    let cells = nu * k as f64 * l as f64;
    if !(cells > 1.0) || !cells.is_finite() {
        return Err(HarnessError::Exploration(cells));
    }
    Ok(-(-1.0 / cells).ln_1p())
}

/// `nu = 1 / (k l (1 - exp(-beta)))`.
pub fn nu_from_beta(beta: f64, k: usize, l: usize) -> f64 {
    1.0 / (k as f64 * l as f64 * -(-beta).exp_m1())
}

/// The stage game a session is played on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MarketSpec {
    /// Interval partitions of a WTP state space.
    Interval { states: StateSpace, signal_counts: Vec<usize>, actions: usize },
    /// A certain WTP with payoff-irrelevant signals.
    FixedState { wtp: f64, signals: usize, sharing: SignalSharing, firms: usize, actions: usize },
    /// Single-state continuum-demand environment.
    Note { env: NoteEnvironment, firms: usize },
}

impl MarketSpec {
    pub fn interval(signal_counts: &[usize], actions: usize) -> Self {
        Self::Interval { states: StateSpace::baseline(), signal_counts: signal_counts.to_vec(), actions }
    }

    pub fn build(&self) -> Result<Market, HarnessError> {
        Ok(match self {
            Self::Interval { states, signal_counts, actions } => {
                let info = InformationStructure::interval(states.clone(), signal_counts)?;
                Market::interval_grids(info, *actions)?
            }
            Self::FixedState { wtp, signals, sharing, firms, actions } => {
                let states = StateSpace::degenerate(*wtp)?;
                let info = InformationStructure::payoff_irrelevant(states, *signals, *firms, *sharing)?;
                Market::interval_grids(info, *actions)?
            }
            Self::Note { env, firms } => env.market(*firms)?,
        })
    }

    pub fn firms(&self) -> usize {
        match self {
            Self::Interval { signal_counts, .. } => signal_counts.len(),
            Self::FixedState { firms, .. } | Self::Note { firms, .. } => *firms,
        }
    }

    /// Largest per-firm signal count.
    pub fn max_signals(&self) -> usize {
        match self {
            Self::Interval { signal_counts, .. } => signal_counts.iter().copied().max().unwrap_or(1),
            Self::FixedState { signals, .. } => *signals,
            Self::Note { .. } => 1,
        }
    }

    pub fn actions(&self) -> usize {
        match self {
            Self::Interval { actions, .. } | Self::FixedState { actions, .. } => *actions,
            Self::Note { env, .. } => env.actions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub market: MarketSpec,
    pub alpha: f64,
    pub beta: f64,
    pub delta: f64,
    pub init: QInit,
    pub max_periods: u64,
    pub window: u64,
    pub trace: Option<TraceSettings>,
}

pub const BASELINE_WINDOW: u64 = 100_000;
pub const BASELINE_MAX_PERIODS: u64 = 1_000_000_000;
pub const DESK_MAX_PERIODS: u64 = 20_000_000;
pub const DESK_ACTIONS: usize = 20;
pub const DESK_SESSIONS: usize = 100;
pub const DESK_NU: f64 = 100.0;

impl SessionConfig {
    /// Two firms, `{5..20}`, `l = 200`, `alpha = 0.15`, `delta = 0.95`,
    /// `beta = 3e-6`.
    pub fn baseline(signal_counts: &[usize]) -> Self {
        Self {
            market: MarketSpec::interval(signal_counts, 200),
            alpha: 0.15,
            beta: 3e-6,
            delta: 0.95,
            init: QInit::UniformOpponent,
            max_periods: BASELINE_MAX_PERIODS,
            window: BASELINE_WINDOW,
            trace: None,
        }
    }

    /// The baseline with `l = 20`, a `2e7` period cap and `nu = 100` on the
    /// largest table.
    pub fn desk(signal_counts: &[usize]) -> Self {
        sweep::main_session(signal_counts, sweep::Scale::Desk)
    }

    /// Single-state environment: `alpha = 0.95`, `beta = 5e-4`,
    /// `delta = 0.95`, 20 actions on `[0.10, 1.05]`.
    pub fn note() -> Self {
        Self {
            market: MarketSpec::Note { env: NoteEnvironment::baseline(), firms: 2 },
            alpha: 0.95,
            beta: 5e-4,
            delta: 0.95,
            init: QInit::UniformOpponent,
            max_periods: BASELINE_MAX_PERIODS,
            window: BASELINE_WINDOW,
            trace: None,
        }
    }

    /// Decay giving `nu` expected exploration visits per cell of the largest
    /// table in the market.
    pub fn beta_for_nu(&self, nu: f64) -> Result<f64, HarnessError> {
        beta_from_nu(nu, self.market.max_signals(), self.market.actions())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearningError::LearningRate(self.alpha).into());
        }
        if !(0.0..1.0).contains(&self.delta) {
            return Err(LearningError::Discount(self.delta).into());
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(LearningError::Decay(self.beta).into());
        }
        if self.window < 1 {
            return Err(HarnessError::Config("convergence window must be at least 1".into()));
        }
        if self.max_periods < self.window {
            return Err(HarnessError::Config(format!(
                "period cap {} is below the convergence window {}",
                self.max_periods, self.window
            )));
        }
        if self.market.firms() == 0 {
            return Err(MarketError::NoFirms.into());
        }
        Ok(())
    }
}
