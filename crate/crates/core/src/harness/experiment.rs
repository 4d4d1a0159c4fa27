use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_session_in, HarnessError, MarketSpec, SessionConfig, SessionOutcome, SessionSeed, Trace};
use crate::market::{Benchmarks, Market, SignalSharing};
use crate::metrics::{aggregate, score_session, Aggregates, SessionRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub session: SessionConfig,
    pub sessions: usize,
    pub master_seed: u64,
    pub include_unconverged: bool,
    /// Weight on firm 0's monopoly profit in the weighted index.
    pub ci_weight: f64,
    /// Sessions `0..trace_sessions` keep their traces.
    pub trace_sessions: usize,
}

impl ExperimentConfig {
    pub fn new(session: SessionConfig, sessions: usize, master_seed: u64) -> Self {
        Self { session, sessions, master_seed, include_unconverged: true, ci_weight: 0.5, trace_sessions: 0 }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.session.validate()?;
        if self.sessions == 0 {
            return Err(HarnessError::Config("an experiment needs at least one session".into()));
        }
        if !(0.0..=1.0).contains(&self.ci_weight) {
            return Err(HarnessError::Config(format!("ci weight must lie in [0, 1], got {}", self.ci_weight)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub config: ExperimentConfig,
    pub benchmarks: Benchmarks,
    /// Ordered by session index.
    pub records: Vec<SessionRecord>,
    pub aggregates: Aggregates,
    pub traces: Vec<(u64, Trace)>,
}

pub fn score_outcome(market: &Market, outcome: &SessionOutcome, ci_weight: f64) -> Result<SessionRecord, HarnessError> {
    Ok(score_session(
        market,
        outcome.seed,
        outcome.converged,
        outcome.periods,
        outcome.strategies.clone(),
        ci_weight,
    )?)
}

/// Runs `cfg.sessions` independent sessions on `parallelism` threads.
/// Results do not depend on `parallelism`.
pub fn run_experiment(cfg: &ExperimentConfig, parallelism: usize) -> Result<ExperimentSummary, HarnessError> {
    cfg.validate()?;
    let market = cfg.session.market.build()?;
    let one = |index: usize| -> Result<(SessionRecord, Option<Trace>), HarnessError> {
        let mut session = cfg.session.clone();
        if index >= cfg.trace_sessions {
            session.trace = None;
        } else if session.trace.is_none() {
            session.trace = Some(Default::default());
        }
        let outcome = run_session_in(&market, &session, SessionSeed::new(cfg.master_seed, index as u64))?;
        let record = score_outcome(&market, &outcome, cfg.ci_weight)?;
        Ok((record, outcome.trace))
    };
    let results: Vec<(SessionRecord, Option<Trace>)> = if parallelism <= 1 {
        (0..cfg.sessions).map(one).collect::<Result<_, _>>()?
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(parallelism)
            .build()
            .map_err(|e| HarnessError::ThreadPool(e.to_string()))?;
        pool.install(|| (0..cfg.sessions).into_par_iter().map(one).collect::<Result<_, _>>())?
    };
    let mut records = Vec::with_capacity(results.len());
    let mut traces = Vec::new();
    for (record, trace) in results {
        if let Some(trace) = trace {
            traces.push((record.session, trace));
        }
        records.push(record);
    }
    let aggregates = aggregate(&records, cfg.include_unconverged);
    Ok(ExperimentSummary { config: cfg.clone(), benchmarks: market.benchmarks().clone(), records, aggregates, traces })
}

/// Certain WTP of 10 with `signals` payoff-irrelevant signals shared by
/// both firms; everything else is taken from `template`.
pub fn fixed_state_experiment(
    signals: usize,
    template: &ExperimentConfig,
    parallelism: usize,
) -> Result<ExperimentSummary, HarnessError> {
    let mut cfg = template.clone();
    cfg.session.market = fixed_state_spec(signals, cfg.session.market.actions());
    run_experiment(&cfg, parallelism)
}

pub(super) fn fixed_state_spec(signals: usize, actions: usize) -> MarketSpec {
    MarketSpec::FixedState { wtp: 10.0, signals, sharing: SignalSharing::Common, firms: 2, actions }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(k: &[usize], sessions: usize) -> ExperimentConfig {
        let mut s = SessionConfig::desk(k);
        s.beta = 2e-4;
        s.window = 2_000;
        s.max_periods = 200_000;
        ExperimentConfig::new(s, sessions, 99)
    }

    #[test]
    fn parallelism_does_not_change_results() {
        let cfg = quick(&[2, 2], 6);
        let serial = run_experiment(&cfg, 1).unwrap();
        let parallel = run_experiment(&cfg, 3).unwrap();
        assert_eq!(serial, parallel);
        assert_eq!(serial.records.len(), 6);
        assert!(serial.records.iter().enumerate().all(|(i, r)| r.session == i as u64));
    }

    #[test]
    fn single_session_summary_matches_record() {
        let cfg = quick(&[1, 1], 1);
        let s = run_experiment(&cfg, 1).unwrap();
        assert_eq!(s.aggregates.ci.unwrap().mean, s.records[0].ci);
        assert_eq!(s.aggregates.industry_profit, s.records[0].industry_profit);
    }

    #[test]
    fn fixed_state_has_one_state() {
        let cfg = quick(&[1, 1], 2);
        let s = fixed_state_experiment(3, &cfg, 1).unwrap();
        assert_eq!(s.records[0].state_ci.len(), 1);
        assert_eq!(s.records[0].strategies[0].len(), 3);
        assert_eq!(s.benchmarks.monopoly_profit, 10.0);
    }

    #[test]
    fn traces_kept_only_for_requested_sessions() {
        let mut cfg = quick(&[1, 1], 3);
        cfg.trace_sessions = 1;
        let s = run_experiment(&cfg, 1).unwrap();
        assert_eq!(s.traces.len(), 1);
        assert_eq!(s.traces[0].0, 0);
    }
}
