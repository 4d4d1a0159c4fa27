//! JSON experiment documents.
//!
//! Every key is optional; missing keys take the defaults of the chosen
//! environment and scale. Unknown keys are rejected. `beta` and `nu` are
//! mutually exclusive; `nu` is converted with the largest signal count and
//! the action count of the market.
//!
//! ```json
//! {"env": "main", "m": 16, "k": [1, 1], "l": 200, "alpha": 0.15,
//!  "delta": 0.95, "beta": 3e-6, "sessions": 1000}
//! ```

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::sweep::{main_session, note_session, Scale};
use crate::harness::{
    beta_from_nu, ExperimentConfig, HarnessError, MarketSpec, SessionConfig, TraceSettings, DESK_SESSIONS,
};
use crate::learning::QInit;
use crate::market::{SignalSharing, StateSpace};
use crate::note::NoteEnvironment;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("malformed config: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EnvKind {
    #[default]
    Main,
    FixedState,
    Note,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
pub struct ConfigDocument {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvKind>,
    /// Number of states (main) or actions (note).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lowest_wtp: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub l: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wtp: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signals: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sharing: Option<SignalSharing>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub firms: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reservation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_action: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<QInit>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_periods: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sessions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_unconverged: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace_sessions: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSettings>,
}

/// Parses with full-scale defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_at(text, Scale::Full)
}

pub fn parse_config_at(text: &str, scale: Scale) -> Result<ExperimentConfig, ConfigError> {
    let doc: ConfigDocument = serde_json::from_str(text)?;
    resolve(&doc, scale)
}

fn positive(name: &str, value: usize) -> Result<usize, ConfigError> {
    if value == 0 {
        return Err(ConfigError::Invalid(format!("{name} must be positive")));
    }
    Ok(value)
}

/// Applies defaults and validates.
pub fn resolve(doc: &ConfigDocument, scale: Scale) -> Result<ExperimentConfig, ConfigError> {
    if doc.beta.is_some() && doc.nu.is_some() {
        return Err(ConfigError::Invalid("beta and nu are mutually exclusive".into()));
    }
    let env = doc.env.unwrap_or_default();
    let mut session: SessionConfig;
    let sessions_default;
    match env {
        EnvKind::Main | EnvKind::FixedState => {
            session = main_session(&[1, 1], scale);
            sessions_default = if scale == Scale::Desk { DESK_SESSIONS } else { 1000 };
            let l = positive("l", doc.l.unwrap_or_else(|| session.market.actions()))?;
            session.market = if env == EnvKind::Main {
                for key in [("wtp", doc.wtp.is_some()), ("signals", doc.signals.is_some()), ("sharing", doc.sharing.is_some())] {
                    if key.1 {
                        return Err(ConfigError::Invalid(format!("`{}` applies to the fixed-state environment", key.0)));
                    }
                }
                let m = positive("m", doc.m.unwrap_or(16))?;
                let states = StateSpace::contiguous(doc.lowest_wtp.unwrap_or(5), m).map_err(HarnessError::from)?;
                let k = doc.k.clone().unwrap_or_else(|| vec![1, 1]);
                if let Some(firms) = doc.firms {
                    if firms != k.len() {
                        return Err(ConfigError::Invalid(format!("firms = {firms} but k lists {} firms", k.len())));
                    }
                }
                MarketSpec::Interval { states, signal_counts: k, actions: l }
            } else {
                MarketSpec::FixedState {
                    wtp: doc.wtp.unwrap_or(10.0),
                    signals: positive("signals", doc.signals.unwrap_or(1))?,
                    sharing: doc.sharing.unwrap_or(SignalSharing::Common),
                    firms: doc.firms.unwrap_or(2),
                    actions: l,
                }
            };
        }
        EnvKind::Note => {
            session = note_session(scale);
            sessions_default = if scale == Scale::Desk { 50 } else { 100 };
            if doc.k.is_some() || doc.l.is_some() {
                return Err(ConfigError::Invalid("the note environment takes `m` actions, not `k`/`l`".into()));
            }
            let base = NoteEnvironment::baseline();
            let env = NoteEnvironment {
                reservation: doc.reservation.unwrap_or(base.reservation),
                cost: doc.cost.unwrap_or(base.cost),
                actions: positive("m", doc.m.unwrap_or(base.actions))?,
                min_action: doc.min_action,
            };
            session.market = MarketSpec::Note { env, firms: doc.firms.unwrap_or(2) };
        }
    }
    if env != EnvKind::Note && (doc.reservation.is_some() || doc.cost.is_some() || doc.min_action.is_some()) {
        return Err(ConfigError::Invalid("`reservation`, `cost` and `minAction` apply to the note environment".into()));
    }
    if let Some(alpha) = doc.alpha {
        session.alpha = alpha;
    }
    if let Some(delta) = doc.delta {
        session.delta = delta;
    }
    if let Some(beta) = doc.beta {
        session.beta = beta;
    }
    if let Some(nu) = doc.nu {
        session.beta = beta_from_nu(nu, session.market.max_signals(), session.market.actions())?;
    }
    if let Some(init) = doc.init {
        session.init = init;
    }
    if let Some(cap) = doc.max_periods {
        session.max_periods = cap;
    }
    if let Some(window) = doc.window {
        session.window = window;
    }
    session.trace = doc.trace;
    let mut cfg = ExperimentConfig::new(session, doc.sessions.unwrap_or(sessions_default), doc.seed.unwrap_or(0));
    if let Some(flag) = doc.include_unconverged {
        cfg.include_unconverged = flag;
    }
    if let Some(w) = doc.ci_weight {
        cfg.ci_weight = w;
    }
    if let Some(n) = doc.trace_sessions {
        cfg.trace_sessions = n;
    }
    cfg.validate()?;
    cfg.session.market.build()?;
    Ok(cfg)
}

/// Fully explicit document for a validated config; parsing it yields the
/// same config.
pub fn to_document(cfg: &ExperimentConfig) -> ConfigDocument {
    let s = &cfg.session;
    let mut doc = ConfigDocument {
        alpha: Some(s.alpha),
        delta: Some(s.delta),
        beta: Some(s.beta),
        init: Some(s.init),
        max_periods: Some(s.max_periods),
        window: Some(s.window),
        sessions: Some(cfg.sessions),
        seed: Some(cfg.master_seed),
        include_unconverged: Some(cfg.include_unconverged),
        ci_weight: Some(cfg.ci_weight),
        trace_sessions: Some(cfg.trace_sessions),
        trace: s.trace,
        ..Default::default()
    };
    match &s.market {
        MarketSpec::Interval { states, signal_counts, actions } => {
            doc.env = Some(EnvKind::Main);
            doc.m = Some(states.len());
            doc.lowest_wtp = Some(states.value(0) as u32);
            doc.k = Some(signal_counts.clone());
            doc.l = Some(*actions);
        }
        MarketSpec::FixedState { wtp, signals, sharing, firms, actions } => {
            doc.env = Some(EnvKind::FixedState);
            doc.wtp = Some(*wtp);
            doc.signals = Some(*signals);
            doc.sharing = Some(*sharing);
            doc.firms = Some(*firms);
            doc.l = Some(*actions);
        }
        MarketSpec::Note { env, firms } => {
            doc.env = Some(EnvKind::Note);
            doc.m = Some(env.actions);
            doc.reservation = Some(env.reservation);
            doc.cost = Some(env.cost);
            doc.min_action = env.min_action;
            doc.firms = Some(*firms);
        }
    }
    doc
}

pub fn serialize_config(cfg: &ExperimentConfig) -> String {
    serde_json::to_string_pretty(&to_document(cfg)).expect("config documents serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn baseline_document_is_accepted() {
        let cfg = parse_config(
            r#"{"env":"main","m":16,"k":[1,1],"l":200,"alpha":0.15,"delta":0.95,"beta":3e-6,"sessions":1000}"#,
        )
        .unwrap();
        assert_eq!(cfg.sessions, 1000);
        assert_eq!(cfg.session, SessionConfig::baseline(&[1, 1]));
    }

    #[test]
    fn indivisible_partition_is_rejected() {
        assert!(parse_config(r#"{"k":[3,1],"m":16}"#).is_err());
    }

    #[test]
    fn beta_and_nu_are_exclusive() {
        let err = parse_config(r#"{"beta":3e-6,"nu":100}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
        let cfg = parse_config(r#"{"nu":100,"k":[16,16]}"#).unwrap();
        assert!((cfg.session.beta - 3.125_004_882_8e-6).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(parse_config(r#"{"colour":1}"#), Err(ConfigError::Syntax(_))));
        assert!(parse_config(r#"{"delta":1.0}"#).is_err());
        assert!(parse_config(r#"{"alpha":0}"#).is_err());
        assert!(parse_config(r#"{"nu":0.001}"#).is_err());
        assert!(parse_config(r#"{"env":"note","k":[1,1]}"#).is_err());
        assert!(parse_config(r#"{"minAction":0.2}"#).is_err());
    }

    #[test]
    fn desk_defaults() {
        let cfg = parse_config_at("{}", Scale::Desk).unwrap();
        assert_eq!(cfg.sessions, 100);
        assert_eq!(cfg.session.market.actions(), 20);
        let note = parse_config_at(r#"{"env":"note","minAction":0.3}"#, Scale::Desk).unwrap();
        assert_eq!(note.sessions, 50);
        assert_eq!(note.session.alpha, 0.95);
    }

    #[test]
    fn round_trip() {
        for text in [
            "{}",
            r#"{"env":"note","delta":0,"minAction":0.25,"traceSessions":2}"#,
            r#"{"env":"fixed-state","signals":3,"sharing":"independent","init":{"constant":2.5}}"#,
            r#"{"k":[16,4],"l":30,"nu":50,"ciWeight":1,"includeUnconverged":false}"#,
        ] {
            let cfg = parse_config(text).unwrap();
            let again = parse_config(&serialize_config(&cfg)).unwrap();
            assert_eq!(cfg, again, "{text}");
        }
    }
}
