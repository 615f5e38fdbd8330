//! Weighted moving average and its changing rate.

use super::FeatureError;

/// Linearly weighted moving average of a window in chronological order:
/// the most recent value gets weight `P`, the oldest weight 1.
pub fn wma(window: &[f64]) -> Result<f64, FeatureError> {
    let p = window.len();
    if p == 0 {
        return Err(FeatureError::InsufficientHistory { needed: 1, got: 0 });
    }
    if window.iter().any(|v| !v.is_finite()) {
        return Err(FeatureError::NonFinite("wma window"));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, &value) in window.iter().enumerate() {
        let weight = (i + 1) as f64; // lag p - 1 - i gets weight P - lag
        num += weight * value;
        den += weight;
    }
    Ok(num / den)
}

/// Relative change of the weighted moving average between the two most
/// recent windows of length `p` in `history` (values strictly before the
/// day being predicted).
pub fn changing_rate(history: &[f64], p: usize) -> Result<f64, FeatureError> {
    if p == 0 {
        return Err(FeatureError::InsufficientHistory { needed: 1, got: 0 });
    }
    if history.len() < p + 1 {
        return Err(FeatureError::InsufficientHistory { needed: p + 1, got: history.len() });
    }
    let n = history.len();
    let m_last = wma(&history[n - p..])?;
    let m_prev = wma(&history[n - p - 1..n - 1])?;
    if m_prev == 0.0 {
        return Err(FeatureError::DegenerateBaseline);
    }
    Ok((m_last - m_prev) / m_prev)
}
