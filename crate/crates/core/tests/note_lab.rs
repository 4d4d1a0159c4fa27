use collusion_core::harness::{run_session, SessionConfig, SessionSeed, TraceSettings};
use collusion_core::note::{
    bubble_probe, exploration_horizon, random_transition_price, DiagnosticsTrace, EventKind, EventSettings,
    NoteEnvironment,
};

const SEEDS: u64 = 50;

fn mean_bubble(cfg: &SessionConfig) -> f64 {
    (0..SEEDS).map(|s| bubble_probe(cfg, SessionSeed::new(3, s), None).unwrap().mean_q).sum::<f64>() / SEEDS as f64
}

#[test]
fn bubble_forms_at_baseline() {
    let cfg = SessionConfig::note();
    assert_eq!(exploration_horizon(cfg.beta), 2000);
    let mean = mean_bubble(&cfg);
    assert!((6.0..=7.5).contains(&mean), "mean post-exploration Q {mean}");
}

#[test]
fn random_pricing_closed_form() {
    let prices: Vec<f64> = (0..=2000).map(|i| i as f64 / 2000.0).collect();
    let p0 = random_transition_price(&prices);
    assert!((p0 - 1.0 / 3.0).abs() < 1e-3);
    assert!((p0 / (1.0 - 0.95) - 6.67).abs() < 0.02);
}

#[test]
fn no_bubble_without_discounting() {
    let mut cfg = SessionConfig::note();
    cfg.delta = 0.0;
    let mean = mean_bubble(&cfg);
    // one-shot payoffs never exceed the reservation value
    assert!(mean < 1.0, "mean post-exploration Q {mean}");
    let grid = NoteEnvironment::baseline().grid().unwrap();
    let one_shot: f64 = grid
        .prices()
        .iter()
        .map(|&p| {
            let shares: f64 = grid
                .prices()
                .iter()
                .map(|&r| if p > 1.0 { 0.0 } else if p < r { 1.0 } else if p == r { 0.5 } else { 0.0 })
                .sum();
            p * shares / grid.len() as f64
        })
        .sum::<f64>()
        / grid.len() as f64;
    assert!((mean - one_shot).abs() < 0.25, "mean {mean} vs one-shot {one_shot}");
}

#[test]
fn alternating_maintenance_without_discounting() {
    let mut cfg = SessionConfig::note();
    cfg.delta = 0.0;
    cfg.trace = Some(TraceSettings::default());
    let lowest = NoteEnvironment::baseline().grid().unwrap().price(0);
    let seeds = 20;
    let mut hits = 0;
    for s in 0..seeds {
        let outcome = run_session(&cfg, SessionSeed::new(9, s)).unwrap();
        let diag = DiagnosticsTrace::from_trace(&outcome.trace.unwrap(), cfg.delta, lowest)
            .with_events(&EventSettings::default())
            .unwrap();
        for pair in diag.events.windows(2) {
            assert!(pair[0].period <= pair[1].period);
        }
        if diag.events.iter().any(|e| e.kind == EventKind::AlternatingMaintenance) {
            hits += 1;
        }
    }
    assert!(hits * 2 > seeds, "{hits}/{seeds} sessions show alternating maintenance");
}
