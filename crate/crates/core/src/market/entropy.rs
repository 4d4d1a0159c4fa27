use super::MarketError;

const SUM_TOLERANCE: f64 = 1e-9;

/// Shannon entropy in bits, with `0 * log 0 = 0`.
pub fn shannon_entropy(weights: &[f64]) -> Result<f64, MarketError> {
    if weights.iter().any(|&w| w < 0.0 || !w.is_finite()) {
        return Err(MarketError::InvalidDistribution("negative or non-finite weight".into()));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(MarketError::InvalidDistribution(format!("weights sum to {total}")));
    }
    Ok(-weights
        .iter()
        .filter(|&&w| w > 0.0)
        .map(|&w| w * w.log2())
        .sum::<f64>())
}
