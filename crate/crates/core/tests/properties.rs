use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use collusion_core::harness::{ConvergenceTracker, ExperimentConfig, SessionConfig, SessionSeed};
use collusion_core::learning::{epsilon, init_q, QInit, QTable};
use collusion_core::market::{
    allocate_demand, build_partition, signal_of, verify_bne, ActionGrid, InformationStructure, Market, StateSpace,
    TieRule,
};
use collusion_core::metrics::{collusion_index, pearson_matrix, per_signal_ci, signal_profits, welfare};
use collusion_core::note::{note_demand, stationary_line, sustainable_line, NoteEnvironment};
use collusion_core::{run_experiment, run_session};

const COUNTS: [usize; 5] = [1, 2, 4, 8, 16];

fn market(k1: usize, k2: usize, l: usize) -> Market {
    let info = InformationStructure::interval(StateSpace::baseline(), &[k1, k2]).unwrap();
    Market::interval_grids(info, l).unwrap()
}

fn profile(m: &Market, picks: &[usize]) -> Vec<Vec<f64>> {
    let mut it = picks.iter().cycle();
    (0..m.firms())
        .map(|f| {
            (0..m.info().signal_count(f))
                .map(|s| {
                    let g = m.grid(f, s);
                    g.price(it.next().unwrap() % g.len())
                })
                .collect()
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn update_touches_one_cell(
        values in prop::collection::vec(-50.0f64..50.0, 12),
        s in 0usize..3, a in 0usize..4, next in 0usize..3,
        payoff in 0.0f64..20.0, alpha in 0.01f64..1.0, delta in 0.0f64..0.99,
    ) {
        let mut q = QTable::from_values(values.clone(), 3, 4, alpha, delta).unwrap();
        q.update(s, a, payoff, next);
        for (i, (before, after)) in values.iter().zip(q.values()).enumerate() {
            if i != s * 4 + a {
                prop_assert_eq!(before.to_bits(), after.to_bits());
            }
        }
    }

    #[test]
    fn zero_discount_is_reduced_rule(
        init in prop::collection::vec(0.0f64..10.0, 6),
        stream in prop::collection::vec((0usize..6, 0.0f64..5.0), 1..200),
        alpha in 0.01f64..1.0,
    ) {
        let mut q = QTable::from_values(init.clone(), 1, 6, alpha, 0.0).unwrap();
        let mut reduced = init;
        for &(a, r) in &stream {
            q.update(0, a, r, 0);
            reduced[a] = (1.0 - alpha) * reduced[a] + alpha * r;
        }
        prop_assert_eq!(q.values(), &reduced[..]);
    }

    #[test]
    fn values_stay_bounded(
        init in prop::collection::vec(-30.0f64..30.0, 8),
        stream in prop::collection::vec((0usize..2, 0usize..4, 0usize..2, 0.0f64..1.0), 1..500),
        alpha in 0.01f64..1.0, delta in 0.0f64..0.99, p_max in 0.1f64..25.0,
    ) {
        let q0 = init.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bound = q0.max(p_max * (1.0 + delta / (1.0 - delta)));
        let mut q = QTable::from_values(init, 2, 4, alpha, delta).unwrap();
        for &(s, a, next, u) in &stream {
            q.update(s, a, u * p_max, next);
            prop_assert!(q.values().iter().all(|v| v.is_finite() && v.abs() <= bound * (1.0 + 1e-12)));
        }
    }

    #[test]
    fn epsilon_decays(beta in 0.0f64..0.01, t in 0u64..1_000_000) {
        let (now, later) = (epsilon(t, beta), epsilon(t + 1, beta));
        prop_assert!((0.0..=1.0).contains(&now));
        if beta * (t as f64) < 700.0 {
            prop_assert!(now > 0.0);
        }
        if beta > 0.0 && now > 1e-300 {
            prop_assert!(later < now);
        } else {
            prop_assert!(later <= now);
        }
    }

    #[test]
    fn collusion_index_is_affine(lambda in 0.0f64..=1.0, nash in 0.0f64..5.0, gap in 0.1f64..20.0) {
        let monopoly = nash + gap;
        let ci = collusion_index(lambda * monopoly + (1.0 - lambda) * nash, nash, monopoly).unwrap();
        prop_assert!((ci - lambda).abs() < 1e-9);
    }

    #[test]
    fn welfare_and_shares(
        k1 in prop::sample::select(&COUNTS[..]), k2 in prop::sample::select(&COUNTS[..]),
        picks in prop::collection::vec(0usize..20, 1..40),
    ) {
        let m = market(k1, k2, 20);
        let eval = m.evaluate(&profile(&m, &picks));
        let w = welfare(&eval);
        prop_assert!((w.industry_profit + w.consumer_surplus - w.social_welfare).abs() <= 1e-12 * w.social_welfare.max(1.0));
        for world in &eval.worlds {
            let total: f64 = world.shares.iter().sum();
            if world.sale {
                prop_assert!((total - 1.0).abs() < 1e-12);
            } else {
                prop_assert_eq!(total, 0.0);
            }
        }
    }

    #[test]
    fn per_signal_ci_aggregates(
        k in prop::sample::select(&COUNTS[..]),
        l in prop::sample::select(&[20usize, 200][..]),
        picks in prop::collection::vec(0usize..200, 1..40),
    ) {
        let m = market(k, k, l);
        let b = m.benchmarks();
        let eval = m.evaluate(&profile(&m, &picks));
        let ci = per_signal_ci(&eval, m.info(), b).unwrap();
        let overall = collusion_index(eval.industry_profit(), b.nash_profit, b.monopoly_profit).unwrap();
        let profit: f64 = (0..k)
            .map(|s| b.signal_probability[s] * ((b.signal_monopoly[s] - b.signal_nash[s]) * ci[s] + b.signal_nash[s]))
            .sum();
        let rebuilt = collusion_index(profit, b.nash_profit, b.monopoly_profit).unwrap();
        prop_assert!((rebuilt - overall).abs() < 1e-9);
        let direct: f64 = signal_profits(&eval, m.info(), b).iter().zip(&b.signal_probability).map(|(p, w)| p * w).sum();
        prop_assert!((direct - eval.industry_profit()).abs() < 1e-9);
    }

    #[test]
    fn pearson_matrix_affine_invariant(
        samples in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 3..30),
        scales in prop::collection::vec((0.1f64..10.0, -5.0f64..5.0), 4),
    ) {
        let base = pearson_matrix(&samples).unwrap();
        let moved: Vec<Vec<f64>> = samples
            .iter()
            .map(|row| row.iter().zip(&scales).map(|(x, (a, b))| a * x + b).collect())
            .collect();
        let other = pearson_matrix(&moved).unwrap();
        for i in 0..4 {
            for j in 0..4 {
                match (base.get(i, j), other.get(i, j)) {
                    (Some(x), Some(y)) => prop_assert!((x - y).abs() < 1e-9),
                    (None, None) => {}
                    pair => prop_assert!(false, "definedness differs at ({i},{j}): {pair:?}"),
                }
            }
        }
    }

    #[test]
    fn demand_conserves_mass(prices in prop::collection::vec(0.0f64..25.0, 1..5), wtp in 1.0f64..20.0, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for result in [allocate_demand(&prices, wtp, TieRule::Expected), allocate_demand(&prices, wtp, TieRule::Random(&mut rng))] {
            let total: f64 = result.quantities.iter().sum();
            let sale = prices.iter().copied().fold(f64::INFINITY, f64::min) <= wtp;
            let expected = if sale { 1.0 } else { 0.0 };
            prop_assert!((total - expected).abs() < 1e-12);
            for (i, p) in prices.iter().enumerate() {
                prop_assert_eq!(result.payoffs[i], p * result.quantities[i]);
            }
        }
        let shares = note_demand(&prices, 1.0);
        let total: f64 = shares.iter().sum();
        let expected = if prices.iter().copied().fold(f64::INFINITY, f64::min) <= 1.0 { 1.0 } else { 0.0 };
        prop_assert!((total - expected).abs() < 1e-12);
    }

    #[test]
    fn lines_relate(q in 0.0f64..50.0, delta in 0.0f64..0.99) {
        prop_assert_eq!(stationary_line(q, delta), 2.0 * sustainable_line(q, delta));
    }

    #[test]
    fn geometric_convergence(q0 in -20.0f64..20.0, p in 0.0f64..2.0, alpha in 0.01f64..1.0, delta in 0.0f64..0.99, steps in 1usize..200) {
        // a lone action is its own continuation, so the error contracts by 1 - alpha (1 - delta)
        let target = p / (1.0 - delta);
        let mut q = QTable::from_values(vec![q0], 1, 1, alpha, delta).unwrap();
        for _ in 0..steps {
            q.update(0, 0, p, 0);
        }
        let expected = (1.0 - alpha * (1.0 - delta)).powi(steps as i32) * (q0 - target).abs();
        prop_assert!(((q.get(0, 0) - target).abs() - expected).abs() <= 1e-9 * (1.0 + (q0 - target).abs()));
    }

    #[test]
    fn tracker_matches_counter_oracle(
        stream in prop::collection::vec((0usize..2, 0usize..3, 0usize..4), 1..300),
        window in 1u64..50,
    ) {
        let mut tracker = ConvergenceTracker::new(&[3, 3]);
        let mut last = [[None; 3]; 2];
        let mut counters = [[0u64; 3]; 2];
        for (t, &(f, s, a)) in stream.iter().enumerate() {
            for row in counters.iter_mut() {
                for c in row.iter_mut() {
                    *c += 1;
                }
            }
            if last[f][s] != Some(a) {
                counters[f][s] = 0;
                last[f][s] = Some(a);
            }
            tracker.observe(f, s, a, t as u64);
            // a cell is settled once its action has survived `window` more periods
            let oracle = counters.iter().flatten().zip(last.iter().flatten()).all(|(c, l)| l.is_none() || *c >= window);
            prop_assert_eq!(tracker.is_stable(t as u64, window), oracle);
            prop_assert_eq!(tracker.last_action(f, s), Some(a));
        }
    }
}

#[test]
fn grids_hold_their_invariants() {
    for l in [20usize, 200] {
        for top in 5..=20u32 {
            let top = f64::from(top);
            let g = ActionGrid::for_signal(top, l).unwrap();
            assert_eq!(g.len(), l);
            for (j, &p) in g.prices().iter().enumerate() {
                assert!((p - top * (j + 2) as f64 / l as f64).abs() < 1e-12);
            }
            assert_eq!(g.nash_index(), 0);
            assert_eq!(g.prices().iter().filter(|&&p| p == top).count(), 1);
            assert_eq!(g.prices().iter().position(|&p| p == top), Some(l - 2));
            assert_eq!(g.prices().iter().filter(|&&p| p > top).count(), 1);
            assert!((g.step() - top / l as f64).abs() < 1e-15);
        }
    }
    // at l = 200 the competitive price sits below every WTP
    let m = market(1, 1, 200);
    assert!(m.grid(0, 0).nash_price() < 5.0);
}

#[test]
fn partitions_cover_states() {
    let states = StateSpace::baseline();
    for k in COUNTS {
        let partition = build_partition(16, k).unwrap();
        let mut next = 0;
        for r in partition.ranges() {
            assert_eq!(r.start, next);
            assert_eq!(r.len(), 16 / k);
            next = r.end;
        }
        assert_eq!(next, 16);
        assert_eq!(partition.entropy(), (16.0 / k as f64).log2());
        for (i, &v) in states.values().iter().enumerate() {
            let s = signal_of(&partition, &states, v).unwrap();
            assert!(partition.ranges()[s].contains(&i));
        }
    }
    assert!(build_partition(16, 3).is_err());
}

#[test]
fn nash_profile_is_equilibrium_on_symmetric_family() {
    for l in [20, 200] {
        for k in COUNTS {
            let m = market(k, k, l);
            assert!(verify_bne(&m, &m.nash_profile()).unwrap().is_equilibrium(), "k={k} l={l}");
        }
    }
}

#[test]
fn random_ties_match_expected_shares() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let prices = [3.0, 3.0, 4.0, 3.0];
    let draws = 120_000;
    let mut wins = [0.0; 4];
    for _ in 0..draws {
        let r = allocate_demand(&prices, 10.0, TieRule::Random(&mut rng));
        for (w, q) in wins.iter_mut().zip(&r.quantities) {
            *w += q;
        }
    }
    let expected = allocate_demand(&prices, 10.0, TieRule::Expected).quantities;
    for (w, e) in wins.iter().zip(&expected) {
        let mean = w / draws as f64;
        let sigma = (e * (1.0 - e) / draws as f64).sqrt();
        assert!((mean - e).abs() <= 3.0 * sigma + 1e-12, "{mean} vs {e}");
    }
}

#[test]
fn note_grid_is_exact() {
    let grid = NoteEnvironment::baseline().grid().unwrap();
    let cents: Vec<i64> = grid.prices().iter().map(|p| (p * 100.0).round() as i64).collect();
    assert_eq!(cents, (0..20).map(|j| 10 + 5 * j).collect::<Vec<_>>());
    for (p, c) in grid.prices().iter().zip(&cents) {
        assert!((p - *c as f64 / 100.0).abs() < 1e-12);
    }
}

#[test]
fn initial_values_price_against_uniform_rival() {
    let m = market(1, 1, 20);
    let q = init_q(&m, 0, 0.15, 0.95, QInit::UniformOpponent).unwrap();
    let grid = m.grid(0, 0).prices();
    let wtp = StateSpace::baseline().values().to_vec();
    for (a, &p) in grid.iter().enumerate() {
        let mut expected = 0.0;
        for &v in &wtp {
            if p > v {
                continue;
            }
            for &r in grid {
                expected += p * if p < r { 1.0 } else if p == r { 0.5 } else { 0.0 };
            }
        }
        expected /= (wtp.len() * grid.len()) as f64 * 0.05;
        assert!((q.get(0, a) - expected).abs() < 1e-9 * expected.max(1.0), "action {a}");
    }
}

fn small(k: &[usize]) -> SessionConfig {
    let mut cfg = SessionConfig::desk(k);
    cfg.beta = 3e-4;
    cfg.window = 2_000;
    cfg.max_periods = 60_000;
    cfg
}

#[test]
fn sessions_are_deterministic_and_capped() {
    let cfg = small(&[4, 2]);
    for session in 0..3 {
        let seed = SessionSeed::new(21, session);
        let a = run_session(&cfg, seed).unwrap();
        let b = run_session(&cfg, seed).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(a.periods <= cfg.max_periods);
        let m = cfg.market.build().unwrap();
        assert_eq!(a.evaluation, m.evaluate(&a.prices));
    }
}

#[test]
fn parallel_equals_serial() {
    let cfg = ExperimentConfig::new(small(&[2, 2]), 5, 8);
    assert_eq!(run_experiment(&cfg, 1).unwrap(), run_experiment(&cfg, 4).unwrap());
}
