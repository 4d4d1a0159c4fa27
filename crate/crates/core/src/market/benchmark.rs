use serde::{Deserialize, Serialize};

use super::{evaluate_profile, ActionGrid, InformationStructure};

/// Competitive and monopoly reference profits.
///
/// Aggregates are expected per-period industry profits. Per-signal values are
/// indexed by the signals of `reference_firm` (the least informed firm) and
/// per-state values by state index. Monopoly values use the information of
/// `informed_firm`, the firm with the finest signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmarks {
    pub nash_profit: f64,
    pub monopoly_profit: f64,
    /// Each firm's monopoly profit using only its own signals.
    pub firm_monopoly_profits: Vec<f64>,
    /// `monopoly_prices[firm][signal]`, lowest maximizer.
    pub monopoly_prices: Vec<Vec<f64>>,
    pub informed_firm: usize,
    pub reference_firm: usize,
    pub signal_probability: Vec<f64>,
    pub signal_nash: Vec<f64>,
    pub signal_monopoly: Vec<f64>,
    pub state_probability: Vec<f64>,
    pub state_nash: Vec<f64>,
    pub state_monopoly: Vec<f64>,
}

const TIE_TOLERANCE: f64 = 1e-12;

/// Profit-maximizing grid price for a monopolist facing `posterior`
/// (`(wtp, weight)` pairs), breaking ties toward the lowest price.
pub fn monopoly_price(posterior: &[(f64, f64)], grid: &ActionGrid) -> (f64, f64) {
    let total: f64 = posterior.iter().map(|(_, w)| w).sum();
    let profit_at = |p: f64| p * posterior.iter().filter(|(v, _)| *v >= p).map(|(_, w)| w).sum::<f64>() / total;
    let mut best = (grid.price(0), profit_at(grid.price(0)));
    for &p in &grid.prices()[1..] {
        let profit = profit_at(p);
        if profit > best.1 + TIE_TOLERANCE * best.1.abs().max(1.0) {
            best = (p, profit);
        }
    }
    best
}

pub fn benchmark_profits(info: &InformationStructure, grids: &[Vec<ActionGrid>]) -> Benchmarks {
    let firms = info.firms();
    let informed = info.most_informed();
    let reference = info.least_informed();
    let states = info.states();

    let mut monopoly_prices = Vec::with_capacity(firms);
    let mut firm_monopoly_profits = Vec::with_capacity(firms);
    for (firm, firm_grids) in grids.iter().enumerate() {
        let mut prices = Vec::with_capacity(firm_grids.len());
        let mut total = 0.0;
        for (s, grid) in firm_grids.iter().enumerate() {
            let posterior: Vec<(f64, f64)> =
                info.posterior(firm, s).into_iter().map(|(i, p)| (states.value(i), p)).collect();
            let (price, profit) = monopoly_price(&posterior, grid);
            prices.push(price);
            total += info.signal_probability(firm, s) * profit;
        }
        monopoly_prices.push(prices);
        firm_monopoly_profits.push(total);
    }

    let nash: Vec<Vec<f64>> = grids.iter().map(|g| g.iter().map(ActionGrid::nash_price).collect()).collect();
    let nash_eval = evaluate_profile(info, 0.0, &nash);

    let k_ref = info.signal_count(reference);
    let mut signal_probability = vec![0.0; k_ref];
    let mut signal_nash = vec![0.0; k_ref];
    let mut signal_monopoly = vec![0.0; k_ref];
    let mut state_nash = vec![0.0; states.len()];
    let mut state_monopoly = vec![0.0; states.len()];
    let mut state_mass = vec![0.0; states.len()];
    for (w, world) in info.worlds().iter().enumerate() {
        let wtp = info.wtp(w);
        let p_m = monopoly_prices[informed][info.signal(informed, w)];
        let monopoly = if wtp >= p_m { p_m } else { 0.0 };
        let competitive = nash_eval.worlds[w].industry_profit();
        let s = info.signal(reference, w);
        signal_probability[s] += world.weight;
        signal_nash[s] += world.weight * competitive;
        signal_monopoly[s] += world.weight * monopoly;
        state_mass[world.state] += world.weight;
        state_nash[world.state] += world.weight * competitive;
        state_monopoly[world.state] += world.weight * monopoly;
    }
    for s in 0..k_ref {
        signal_nash[s] /= signal_probability[s];
        signal_monopoly[s] /= signal_probability[s];
    }
    for i in 0..states.len() {
        state_nash[i] /= state_mass[i];
        state_monopoly[i] /= state_mass[i];
    }

    Benchmarks {
        nash_profit: nash_eval.industry_profit(),
        monopoly_profit: firm_monopoly_profits[informed],
        firm_monopoly_profits,
        monopoly_prices,
        informed_firm: informed,
        reference_firm: reference,
        signal_probability,
        signal_nash,
        signal_monopoly,
        state_probability: state_mass,
        state_nash,
        state_monopoly,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{Market, StateSpace};

    fn bench(k: &[usize], l: usize) -> Benchmarks {
        let info = InformationStructure::interval(StateSpace::baseline(), k).unwrap();
        Market::interval_grids(info, l).unwrap().benchmarks().clone()
    }

    #[test]
    fn known_wtp_is_charged_exactly() {
        let grid = ActionGrid::for_signal(12.0, 200).unwrap();
        assert_eq!(monopoly_price(&[(12.0, 1.0)], &grid), (12.0, 12.0));
    }

    #[test]
    fn uninformed_monopoly_tie_goes_low() {
        let posterior: Vec<(f64, f64)> = (5..=20).map(|v| (f64::from(v), 1.0 / 16.0)).collect();
        let grid = ActionGrid::for_signal(20.0, 200).unwrap();
        assert_eq!(monopoly_price(&posterior, &grid), (10.0, 6.875));
    }

    #[test]
    fn top_quartile_block() {
        let posterior: Vec<(f64, f64)> = (17..=20).map(|v| (f64::from(v), 0.25)).collect();
        let grid = ActionGrid::for_signal(20.0, 200).unwrap();
        assert_eq!(monopoly_price(&posterior, &grid), (17.0, 17.0));
    }

    #[test]
    fn aggregate_benchmarks() {
        let b = bench(&[1, 1], 200);
        assert!((b.nash_profit - 0.2).abs() < 1e-15);
        assert_eq!(b.monopoly_profit, 6.875);
        let b = bench(&[16, 16], 200);
        assert_eq!(b.monopoly_profit, 12.5);
    }

    #[test]
    fn asymmetric_uses_informed_monopoly() {
        let b = bench(&[16, 1], 200);
        assert_eq!(b.informed_firm, 0);
        assert_eq!(b.reference_firm, 1);
        assert_eq!(b.monopoly_profit, 12.5);
        assert_eq!(b.firm_monopoly_profits[1], 6.875);
        assert_eq!(b.signal_monopoly, vec![12.5]);
        let states: Vec<f64> = (5..=20).map(f64::from).collect();
        assert_eq!(b.state_monopoly, states);
    }

    #[test]
    fn breakdowns_reaggregate() {
        for k in [[1, 1], [4, 4], [16, 2], [8, 4]] {
            let b = bench(&k, 20);
            let sig_n: f64 = b.signal_probability.iter().zip(&b.signal_nash).map(|(p, v)| p * v).sum();
            let sig_m: f64 = b.signal_probability.iter().zip(&b.signal_monopoly).map(|(p, v)| p * v).sum();
            let st_m: f64 = b.state_probability.iter().zip(&b.state_monopoly).map(|(p, v)| p * v).sum();
            assert!((sig_n - b.nash_profit).abs() < 1e-12);
            assert!((sig_m - b.monopoly_profit).abs() < 1e-12);
            assert!((st_m - b.monopoly_profit).abs() < 1e-12);
        }
    }
}
