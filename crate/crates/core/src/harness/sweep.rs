//! Named parameter grids.

use serde::{Deserialize, Serialize};

use super::experiment::fixed_state_spec;
use super::{
    beta_from_nu, derive_point_seed, run_experiment, ExperimentConfig, ExperimentSummary, HarnessError, MarketSpec,
    SessionConfig, DESK_ACTIONS, DESK_MAX_PERIODS, DESK_NU, DESK_SESSIONS,
};
use crate::note::NoteEnvironment;

/// Full-size parameters or the reduced desk defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scale {
    Full,
    Desk,
}

pub const PRESETS: &[&str] = &[
    "symmetric-entropy",
    "asymmetric-entropy",
    "entropy-grid",
    "fixed-state",
    "robust-nu100",
    "robust-alpha",
    "note-alpha-beta",
    "note-delta",
    "note-min-action",
    "note-action-count",
    "note-action-count-fixed-beta",
];

pub const ENTROPY_LEVELS: [u32; 5] = [0, 1, 2, 3, 4];
const STATES: usize = 16;
const NOTE_DESK_SESSIONS: usize = 50;
const NOTE_FULL_SESSIONS: usize = 100;
const FULL_SESSIONS: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub label: String,
    pub coordinates: Vec<(String, f64)>,
    pub experiment: ExperimentConfig,
}

/// Signals per firm giving `entropy` bits over the 16 baseline states.
pub fn signals_for_entropy(entropy: u32) -> usize {
    STATES >> entropy
}

/// Main-environment session at the given scale.
pub fn main_session(signal_counts: &[usize], scale: Scale) -> SessionConfig {
    match scale {
        Scale::Full => SessionConfig::baseline(signal_counts),
        Scale::Desk => {
            let mut cfg = SessionConfig::baseline(signal_counts);
            cfg.market = MarketSpec::interval(signal_counts, DESK_ACTIONS);
            cfg.max_periods = DESK_MAX_PERIODS;
            cfg.beta = cfg.beta_for_nu(DESK_NU).expect("desk exploration target is valid");
            cfg
        }
    }
}

pub fn note_session(scale: Scale) -> SessionConfig {
    let mut cfg = SessionConfig::note();
    if scale == Scale::Desk {
        cfg.max_periods = DESK_MAX_PERIODS;
    }
    cfg
}

fn main_sessions(scale: Scale) -> usize {
    match scale {
        Scale::Full => FULL_SESSIONS,
        Scale::Desk => DESK_SESSIONS,
    }
}

fn note_sessions(scale: Scale) -> usize {
    match scale {
        Scale::Full => NOTE_FULL_SESSIONS,
        Scale::Desk => NOTE_DESK_SESSIONS,
    }
}

fn entropy_point(h1: u32, h2: u32, scale: Scale) -> (String, Vec<(String, f64)>, SessionConfig) {
    let k = [signals_for_entropy(h1), signals_for_entropy(h2)];
    (
        format!("h{h1}-h{h2}"),
        vec![("entropy1".into(), f64::from(h1)), ("entropy2".into(), f64::from(h2))],
        main_session(&k, scale),
    )
}

fn note_env_point(env: NoteEnvironment, delta: f64, beta: f64, alpha: f64, scale: Scale) -> SessionConfig {
    let mut cfg = note_session(scale);
    cfg.market = MarketSpec::Note { env, firms: 2 };
    cfg.delta = delta;
    cfg.beta = beta;
    cfg.alpha = alpha;
    cfg
}

/// Expands a preset into its grid points, each with its own master seed.
pub fn preset_points(name: &str, scale: Scale, master_seed: u64) -> Result<Vec<SweepPoint>, HarnessError> {
    let mut raw: Vec<(String, Vec<(String, f64)>, SessionConfig, usize)> = Vec::new();
    let main_n = main_sessions(scale);
    let note_n = note_sessions(scale);
    let base_note = SessionConfig::note();
    match name {
        "symmetric-entropy" => {
            for h in ENTROPY_LEVELS {
                let (l, c, s) = entropy_point(h, h, scale);
                raw.push((l, c, s, main_n));
            }
        }
        "asymmetric-entropy" => {
            for h in ENTROPY_LEVELS {
                let (l, c, s) = entropy_point(0, h, scale);
                raw.push((l, c, s, main_n));
            }
        }
        "entropy-grid" => {
            for h1 in ENTROPY_LEVELS {
                for h2 in ENTROPY_LEVELS {
                    let (l, c, s) = entropy_point(h1, h2, scale);
                    raw.push((l, c, s, main_n));
                }
            }
        }
        "fixed-state" => {
            for signals in 1..=4usize {
                let mut s = main_session(&[1, 1], scale);
                s.market = fixed_state_spec(signals, s.market.actions());
                if scale == Scale::Desk {
                    s.beta = s.beta_for_nu(DESK_NU)?;
                }
                raw.push((format!("signals{signals}"), vec![("signals".into(), signals as f64)], s, main_n));
            }
        }
        "robust-nu100" => {
            for h in ENTROPY_LEVELS {
                let (l, mut c, mut s) = entropy_point(h, h, scale);
                s.beta = s.beta_for_nu(100.0)?;
                c.push(("beta".into(), s.beta));
                raw.push((l, c, s, main_n));
            }
        }
        "robust-alpha" => {
            for alpha in [0.05, 0.1, 0.2] {
                for h in ENTROPY_LEVELS {
                    let (l, mut c, mut s) = entropy_point(h, h, scale);
                    s.alpha = alpha;
                    c.push(("alpha".into(), alpha));
                    raw.push((format!("alpha{alpha}-{l}"), c, s, main_n));
                }
            }
        }
        "note-alpha-beta" => {
            for i in 1..=20u32 {
                let alpha = f64::from(i) / 20.0;
                for j in 0..=20u32 {
                    let beta = 5e-5 + (5e-3 - 5e-5) * f64::from(j) / 20.0;
                    let s = note_env_point(NoteEnvironment::baseline(), base_note.delta, beta, alpha, scale);
                    raw.push((
                        format!("alpha{i}-beta{j}"),
                        vec![("alpha".into(), alpha), ("beta".into(), beta)],
                        s,
                        note_n,
                    ));
                }
            }
        }
        "note-delta" => {
            let deltas = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9, 0.95, 0.99];
            for delta in deltas {
                let s = note_env_point(NoteEnvironment::baseline(), delta, base_note.beta, base_note.alpha, scale);
                raw.push((format!("delta{delta}"), vec![("delta".into(), delta)], s, note_n));
            }
        }
        "note-min-action" => {
            for i in 10..=50u32 {
                let low = f64::from(i) / 100.0;
                let env = NoteEnvironment::baseline().with_min_action(low);
                let s = note_env_point(env, base_note.delta, base_note.beta, base_note.alpha, scale);
                raw.push((format!("min{i}"), vec![("minAction".into(), low)], s, note_n));
            }
        }
        "note-action-count" | "note-action-count-fixed-beta" => {
            let fixed = name.ends_with("fixed-beta");
            for m in (10..=100usize).step_by(10) {
                for i in [20u32, 25, 30, 35, 40] {
                    let low = f64::from(i) / 100.0;
                    let env = NoteEnvironment::baseline().with_actions(m).with_min_action(low);
                    let beta = if fixed { base_note.beta } else { beta_from_nu(100.0, 1, m)? };
                    let s = note_env_point(env, base_note.delta, beta, base_note.alpha, scale);
                    raw.push((
                        format!("m{m}-min{i}"),
                        vec![("actions".into(), m as f64), ("minAction".into(), low), ("beta".into(), beta)],
                        s,
                        note_n,
                    ));
                }
            }
        }
        other => return Err(HarnessError::UnknownPreset(other.to_string())),
    }
    Ok(raw
        .into_iter()
        .enumerate()
        .map(|(i, (label, coordinates, session, sessions))| SweepPoint {
            label,
            coordinates,
            experiment: ExperimentConfig::new(session, sessions, derive_point_seed(master_seed, i as u64)),
        })
        .collect())
}

/// Runs every point of a preset in order.
pub fn sweep(
    name: &str,
    scale: Scale,
    master_seed: u64,
    parallelism: usize,
) -> Result<Vec<(SweepPoint, ExperimentSummary)>, HarnessError> {
    preset_points(name, scale, master_seed)?
        .into_iter()
        .map(|point| {
            let summary = run_experiment(&point.experiment, parallelism)?;
            Ok((point, summary))
        })
        .collect()
}
