//! Collusion indices, welfare, market division and correlation statistics
//! computed from analytically scored profiles.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harness::SessionSeed;
use crate::market::{Benchmarks, InformationStructure, Market, PriceProfile, ProfileEvaluation};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("degenerate benchmark: monopoly profit {monopoly} does not exceed competitive profit {nash}")]
    DegenerateBenchmark { nash: f64, monopoly: f64 },
    #[error("degenerate benchmark at signal {signal}")]
    DegenerateSignal { signal: usize },
    #[error("weight must lie in [0, 1], got {0}")]
    Weight(f64),
    #[error("need at least two samples per column, got {0}")]
    TooFewSamples(usize),
    #[error("sample columns have unequal lengths")]
    RaggedSamples,
}

pub fn collusion_index(mean_profit: f64, nash: f64, monopoly: f64) -> Result<f64, MetricsError> {
    if !(monopoly > nash) {
        return Err(MetricsError::DegenerateBenchmark { nash, monopoly });
    }
    Ok((mean_profit - nash) / (monopoly - nash))
}

/// Collusion index against `weight * pi1_m + (1 - weight) * pi2_m`.
pub fn weighted_collusion_index(
    mean_profit: f64,
    nash: f64,
    pi1_m: f64,
    pi2_m: f64,
    weight: f64,
) -> Result<f64, MetricsError> {
    if !(0.0..=1.0).contains(&weight) {
        return Err(MetricsError::Weight(weight));
    }
    collusion_index(mean_profit, nash, weight * pi1_m + (1.0 - weight) * pi2_m)
}

/// Expected industry profit conditional on each signal of the benchmark's
/// reference firm.
pub fn signal_profits(evaluation: &ProfileEvaluation, info: &InformationStructure, benchmarks: &Benchmarks) -> Vec<f64> {
    let r = benchmarks.reference_firm;
    let mut profit = vec![0.0; info.signal_count(r)];
    let mut mass = vec![0.0; info.signal_count(r)];
    for (w, outcome) in evaluation.worlds.iter().enumerate() {
        let s = info.signal(r, w);
        profit[s] += outcome.weight * outcome.industry_profit();
        mass[s] += outcome.weight;
    }
    profit.iter().zip(&mass).map(|(p, m)| p / m).collect()
}

pub fn per_signal_ci(
    evaluation: &ProfileEvaluation,
    info: &InformationStructure,
    benchmarks: &Benchmarks,
) -> Result<Vec<f64>, MetricsError> {
    signal_profits(evaluation, info, benchmarks)
        .iter()
        .enumerate()
        .map(|(s, &p)| {
            collusion_index(p, benchmarks.signal_nash[s], benchmarks.signal_monopoly[s])
                .map_err(|_| MetricsError::DegenerateSignal { signal: s })
        })
        .collect()
}

/// Expected industry profit conditional on each state.
pub fn state_profits(evaluation: &ProfileEvaluation, states: usize) -> Vec<f64> {
    let mut profit = vec![0.0; states];
    let mut mass = vec![0.0; states];
    for outcome in &evaluation.worlds {
        profit[outcome.state] += outcome.weight * outcome.industry_profit();
        mass[outcome.state] += outcome.weight;
    }
    profit.iter().zip(&mass).map(|(p, m)| if *m > 0.0 { p / m } else { 0.0 }).collect()
}

/// Per-state collusion index; `None` where the state's monopoly benchmark
/// does not exceed its competitive one.
pub fn per_state_ci(evaluation: &ProfileEvaluation, benchmarks: &Benchmarks) -> Vec<Option<f64>> {
    state_profits(evaluation, benchmarks.state_probability.len())
        .iter()
        .enumerate()
        .map(|(i, &p)| collusion_index(p, benchmarks.state_nash[i], benchmarks.state_monopoly[i]).ok())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WelfareReport {
    pub industry_profit: f64,
    pub consumer_surplus: f64,
    pub social_welfare: f64,
}

/// Expected per-period surplus split; `social_welfare` is computed
/// directly as `E[wtp * 1{sale}]`.
pub fn welfare(evaluation: &ProfileEvaluation) -> WelfareReport {
    let mut report = WelfareReport::default();
    for outcome in &evaluation.worlds {
        report.industry_profit += outcome.weight * outcome.industry_profit();
        report.consumer_surplus += outcome.weight * outcome.consumer_surplus();
        if outcome.sale {
            report.social_welfare += outcome.weight * outcome.wtp;
        }
    }
    report
}

/// `division[state][firm]`: expected share conditional on the state.
pub fn market_division(evaluation: &ProfileEvaluation, states: usize) -> Vec<Vec<f64>> {
    let firms = evaluation.firm_profits.len();
    let mut shares = vec![vec![0.0; firms]; states];
    let mut mass = vec![0.0; states];
    for outcome in &evaluation.worlds {
        for (acc, q) in shares[outcome.state].iter_mut().zip(&outcome.shares) {
            *acc += outcome.weight * q;
        }
        mass[outcome.state] += outcome.weight;
    }
    for (row, m) in shares.iter_mut().zip(&mass) {
        if *m > 0.0 {
            row.iter_mut().for_each(|q| *q /= m);
        }
    }
    shares
}

/// Mean of equally weighted division tables.
pub fn mean_division(tables: &[Vec<Vec<f64>>]) -> Vec<Vec<f64>> {
    let Some(first) = tables.first() else { return Vec::new() };
    let mut out = vec![vec![0.0; first.first().map_or(0, Vec::len)]; first.len()];
    for table in tables {
        for (acc_row, row) in out.iter_mut().zip(table) {
            for (acc, q) in acc_row.iter_mut().zip(row) {
                *acc += q;
            }
        }
    }
    let n = tables.len() as f64;
    out.iter_mut().flatten().for_each(|q| *q /= n);
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceExtremes {
    pub max: f64,
    pub min: f64,
}

pub fn price_extremes(prices: &PriceProfile) -> Vec<PriceExtremes> {
    prices
        .iter()
        .map(|row| PriceExtremes {
            max: row.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            min: row.iter().copied().fold(f64::INFINITY, f64::min),
        })
        .collect()
}

/// Population-normalized Pearson coefficient; `None` if either series is
/// constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / n / ((sxx / n).sqrt() * (syy / n).sqrt())).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    /// `None` where a column has zero variance.
    pub values: Vec<Vec<Option<f64>>>,
}

impl CorrelationMatrix {
    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.values[i][j]
    }

    /// Mean of the defined off-diagonal entries.
    pub fn mean_off_diagonal(&self) -> Option<f64> {
        let entries: Vec<f64> = (0..self.dim())
            .flat_map(|i| (0..self.dim()).filter(move |&j| j != i).map(move |j| (i, j)))
            .filter_map(|(i, j)| self.values[i][j])
            .collect();
        (!entries.is_empty()).then(|| entries.iter().sum::<f64>() / entries.len() as f64)
    }
}

/// Correlations between columns, where `samples[session][signal]`.
pub fn pearson_matrix(samples: &[Vec<f64>]) -> Result<CorrelationMatrix, MetricsError> {
    if samples.len() < 2 {
        return Err(MetricsError::TooFewSamples(samples.len()));
    }
    let k = samples[0].len();
    if samples.iter().any(|row| row.len() != k) {
        return Err(MetricsError::RaggedSamples);
    }
    let columns: Vec<Vec<f64>> = (0..k).map(|j| samples.iter().map(|row| row[j]).collect()).collect();
    let mut values = vec![vec![None; k]; k];
    for i in 0..k {
        for j in i..k {
            let r = if i == j {
                pearson(&columns[i], &columns[i]).map(|_| 1.0)
            } else {
                pearson(&columns[i], &columns[j])
            };
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { values })
}

/// Every statistic of one scored session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session: u64,
    pub seed: SessionSeed,
    pub converged: bool,
    pub periods: u64,
    pub strategies: Vec<Vec<usize>>,
    pub prices: PriceProfile,
    pub firm_profits: Vec<f64>,
    pub industry_profit: f64,
    pub ci: f64,
    /// Two-firm weighted variant; `None` for other firm counts.
    pub weighted_ci: Option<f64>,
    pub signal_profit: Vec<f64>,
    pub signal_ci: Vec<f64>,
    pub state_profit: Vec<f64>,
    pub state_ci: Vec<Option<f64>>,
    pub welfare: WelfareReport,
    /// `division[state][firm]`
    pub division: Vec<Vec<f64>>,
    pub extremes: Vec<PriceExtremes>,
}

/// Scores a final strategy profile (grid indices).
pub fn score_session(
    market: &Market,
    seed: SessionSeed,
    converged: bool,
    periods: u64,
    strategies: Vec<Vec<usize>>,
    ci_weight: f64,
) -> Result<SessionRecord, MetricsError> {
    let info = market.info();
    let b = market.benchmarks();
    let prices = market.prices_of(&strategies);
    let evaluation = market.evaluate(&prices);
    let industry_profit = evaluation.industry_profit();
    let ci = collusion_index(industry_profit, b.nash_profit, b.monopoly_profit)?;
    let weighted_ci = if market.firms() == 2 {
        Some(weighted_collusion_index(
            industry_profit,
            b.nash_profit,
            b.firm_monopoly_profits[0],
            b.firm_monopoly_profits[1],
            ci_weight,
        )?)
    } else {
        None
    };
    Ok(SessionRecord {
        session: seed.session,
        seed,
        converged,
        periods,
        signal_profit: signal_profits(&evaluation, info, b),
        signal_ci: per_signal_ci(&evaluation, info, b)?,
        state_profit: state_profits(&evaluation, info.states().len()),
        state_ci: per_state_ci(&evaluation, b),
        welfare: welfare(&evaluation),
        division: market_division(&evaluation, info.states().len()),
        extremes: price_extremes(&prices),
        firm_profits: evaluation.firm_profits,
        industry_profit,
        ci,
        weighted_ci,
        strategies,
        prices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub median: f64,
    pub max: f64,
}

impl Distribution {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 0 { (sorted[mid - 1] + sorted[mid]) / 2.0 } else { sorted[mid] };
        Some(Self { mean, std, min: sorted[0], median, max: sorted[sorted.len() - 1] })
    }
}

/// Means over the included sessions of an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub sessions: usize,
    pub converged: usize,
    pub included: usize,
    pub ci: Option<Distribution>,
    pub weighted_ci: Option<Distribution>,
    pub firm_profits: Vec<f64>,
    pub industry_profit: f64,
    pub signal_ci: Vec<f64>,
    /// `None` where the state's CI is undefined in every included session.
    pub state_ci: Vec<Option<f64>>,
    pub welfare: WelfareReport,
    pub division: Vec<Vec<f64>>,
    pub correlations: Option<CorrelationMatrix>,
}

fn mean_of<'a>(values: impl Iterator<Item = &'a f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

pub fn aggregate(records: &[SessionRecord], include_unconverged: bool) -> Aggregates {
    let used: Vec<&SessionRecord> = records.iter().filter(|r| include_unconverged || r.converged).collect();
    let firms = records.first().map_or(0, |r| r.firm_profits.len());
    let signals = records.first().map_or(0, |r| r.signal_ci.len());
    let states = records.first().map_or(0, |r| r.state_ci.len());
    let cis: Vec<f64> = used.iter().map(|r| r.ci).collect();
    let weighted: Vec<f64> = used.iter().filter_map(|r| r.weighted_ci).collect();
    let state_ci = (0..states)
        .map(|i| {
            let defined: Vec<f64> = used.iter().filter_map(|r| r.state_ci[i]).collect();
            (!defined.is_empty()).then(|| mean_of(defined.iter()))
        })
        .collect();
    let welfare_mean = WelfareReport {
        industry_profit: mean_of(used.iter().map(|r| &r.welfare.industry_profit)),
        consumer_surplus: mean_of(used.iter().map(|r| &r.welfare.consumer_surplus)),
        social_welfare: mean_of(used.iter().map(|r| &r.welfare.social_welfare)),
    };
    let divisions: Vec<Vec<Vec<f64>>> = used.iter().map(|r| r.division.clone()).collect();
    let samples: Vec<Vec<f64>> = used.iter().map(|r| r.signal_ci.clone()).collect();
    Aggregates {
        sessions: records.len(),
        converged: records.iter().filter(|r| r.converged).count(),
        included: used.len(),
        ci: Distribution::of(&cis),
        weighted_ci: Distribution::of(&weighted),
        firm_profits: (0..firms).map(|i| mean_of(used.iter().map(|r| &r.firm_profits[i]))).collect(),
        industry_profit: mean_of(used.iter().map(|r| &r.industry_profit)),
        signal_ci: (0..signals).map(|s| mean_of(used.iter().map(|r| &r.signal_ci[s]))).collect(),
        state_ci,
        welfare: welfare_mean,
        division: mean_division(&divisions),
        correlations: pearson_matrix(&samples).ok(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::StateSpace;

    fn market(k: &[usize], l: usize) -> Market {
        let info = InformationStructure::interval(StateSpace::baseline(), k).unwrap();
        Market::interval_grids(info, l).unwrap()
    }

    #[test]
    fn ci_examples() {
        assert_eq!(collusion_index(6.875, 0.2, 6.875).unwrap(), 1.0);
        assert_eq!(collusion_index(0.2, 0.2, 6.875).unwrap(), 0.0);
        assert!((collusion_index(3.5375, 0.2, 6.875).unwrap() - 0.5).abs() < 1e-15);
        assert!(collusion_index(1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn weighted_ci_examples() {
        assert_eq!(
            weighted_collusion_index(5.0, 0.2, 12.5, 6.875, 1.0).unwrap(),
            collusion_index(5.0, 0.2, 12.5).unwrap()
        );
        assert_eq!(
            weighted_collusion_index(5.0, 0.2, 12.5, 6.875, 0.0).unwrap(),
            collusion_index(5.0, 0.2, 6.875).unwrap()
        );
        assert_eq!(weighted_collusion_index(0.2, 0.2, 12.5, 6.875, 0.5).unwrap(), 0.0);
        assert!(weighted_collusion_index(0.2, 0.2, 12.5, 6.875, 1.5).is_err());
    }

    #[test]
    fn welfare_examples() {
        let m = market(&[1, 1], 200);
        let w = welfare(&m.evaluate(&m.nash_profile()));
        assert!((w.industry_profit - 0.2).abs() < 1e-12);
        assert!((w.consumer_surplus - 12.3).abs() < 1e-12);
        assert!((w.social_welfare - 12.5).abs() < 1e-12);

        let m = market(&[16], 200);
        let prices = vec![(5..=20).map(f64::from).collect()];
        let w = welfare(&m.evaluate(&prices));
        assert!(w.consumer_surplus.abs() < 1e-12);
        assert!((w.social_welfare - 12.5).abs() < 1e-12);
        assert!((w.industry_profit - 12.5).abs() < 1e-12);

        let m = market(&[1, 1], 20);
        let w = welfare(&m.evaluate(&[vec![21.0], vec![21.0]]));
        assert_eq!(w, WelfareReport::default());
    }

    #[test]
    fn division_examples() {
        let m = market(&[1, 1], 20);
        let d = market_division(&m.evaluate(&[vec![4.0], vec![4.0]]), 16);
        assert!(d.iter().all(|row| row == &[0.5, 0.5]));
        let d = market_division(&m.evaluate(&[vec![3.0], vec![4.0]]), 16);
        assert!(d.iter().all(|row| row == &[1.0, 0.0]));
    }

    #[test]
    fn extremes_examples() {
        let e = price_extremes(&vec![vec![3.0; 4], (5..=20).map(f64::from).collect()]);
        assert_eq!(e[0].max, e[0].min);
        assert_eq!((e[1].max, e[1].min), (20.0, 5.0));
    }

    #[test]
    fn pearson_examples() {
        let x = [0.0, 1.0, 2.0];
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        let y: Vec<f64> = x.iter().map(|v| 3.0 - v).collect();
        assert!((pearson(&x, &y).unwrap() + 1.0).abs() < 1e-15);
        // cov = 4/3, var_x = 2/3, var_y = 26/9
        let oracle = (4.0 / 3.0) / ((2.0f64 / 3.0).sqrt() * (26.0f64 / 9.0).sqrt());
        assert!((pearson(&x, &[0.0, 1.0, 4.0]).unwrap() - oracle).abs() < 1e-15);
        assert!((oracle - 0.960_768_922_8).abs() < 1e-10);
        assert_eq!(pearson(&x, &[1.0, 1.0, 1.0]), None);
    }

    #[test]
    fn matrix_flags_constant_columns() {
        let samples = vec![vec![0.0, 1.0, 5.0], vec![1.0, 1.0, 3.0], vec![2.0, 1.0, 4.0]];
        let m = pearson_matrix(&samples).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.get(1, 1), None);
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.get(0, 2), m.get(2, 0));
        assert!(pearson_matrix(&samples[..1]).is_err());
    }

    #[test]
    fn per_signal_ci_extremes() {
        let m = market(&[4, 4], 20);
        let b = m.benchmarks();
        let mono = m.evaluate(&b.monopoly_prices);
        for ci in per_signal_ci(&mono, m.info(), b).unwrap() {
            assert!((ci - 1.0).abs() < 1e-12);
        }
        let nash = m.evaluate(&m.nash_profile());
        for ci in per_signal_ci(&nash, m.info(), b).unwrap() {
            assert!(ci.abs() < 1e-12);
        }
    }

    #[test]
    fn single_session_aggregate() {
        let m = market(&[2, 2], 20);
        let strategies = vec![vec![5, 9], vec![7, 3]];
        let r = score_session(&m, SessionSeed::new(0, 0), true, 10, strategies, 0.5).unwrap();
        let a = aggregate(std::slice::from_ref(&r), true);
        assert_eq!(a.ci.unwrap().mean, r.ci);
        assert_eq!(a.signal_ci, r.signal_ci);
        assert_eq!(a.welfare, r.welfare);
        assert!(a.correlations.is_none());
    }
}
