//! Q-learning pricing agents in a repeated Bertrand duopoly where firms
//! observe coarse or fine signals about each buyer's willingness to pay.
//!
//! * [`market`]: states, partitions, price grids, demand, benchmarks and the
//!   equilibrium check.
//! * [`learning`]: the tabular agent.
//! * [`harness`]: seeded sessions, experiments and sweeps.
//! * [`metrics`]: collusion indices, welfare and correlations.
//! * [`note`]: the single-state environment and its diagnostics.
//! * [`config`] and [`output`]: JSON configs and CSV/manifest results.

pub mod config;
pub mod harness;
pub mod learning;
pub mod market;
pub mod metrics;
pub mod note;
pub mod output;

pub use harness::{
    run_experiment, run_session, ExperimentConfig, ExperimentSummary, MarketSpec, SessionConfig, SessionOutcome,
    SessionSeed,
};
pub use learning::{QInit, QTable};
pub use market::{Benchmarks, InformationStructure, Market, StateSpace};
pub use metrics::SessionRecord;
