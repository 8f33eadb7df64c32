use rand::Rng;

use crate::error::{Error, Result};

/// `1 / Σ wᵢ²` for normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Stratified resampling: one uniform draw inside each of `N` equal strata of
/// the cumulative weight. Returns the selected parent indices, sorted.
pub fn stratified_resample<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Result<Vec<usize>> {
    let n = weights.len();
    let total: f64 = weights.iter().sum();
    if n == 0 || !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateWeights);
    }
    let mut out = Vec::with_capacity(n);
    let mut cumulative = weights[0] / total;
    let mut j = 0;
    for i in 0..n {
        let u = (i as f64 + rng.random::<f64>()) / n as f64;
        while u > cumulative && j + 1 < n {
            j += 1;
            cumulative += weights[j] / total;
        }
        out.push(j);
    }
    Ok(out)
}
