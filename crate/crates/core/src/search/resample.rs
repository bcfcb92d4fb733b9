/// Normalized exp(reward / temperature). Non-finite rewards get weight 0.
/// Returns `None` when every reward is non-finite.
pub fn softmax_weights(rewards: &[f64], temperature: f64) -> Option<Vec<f64>> {
    let max = rewards
        .iter()
        .copied()
        .filter(|r| r.is_finite())
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let raw: Vec<f64> = rewards
        .iter()
        .map(|&r| if r.is_finite() { ((r - max) / temperature).exp() } else { 0.0 })
        .collect();
    let total: f64 = raw.iter().sum();
    Some(raw.into_iter().map(|w| w / total).collect())
}

/// Systematic resampling: draws at positions (offset + i)/n over the
/// cumulative weights. Returns how many copies each index receives.
/// `offset` must lie in [0, 1).
pub fn systematic_resample(weights: &[f64], n: usize, offset: f64) -> Vec<usize> {
    let mut counts = vec![0; weights.len()];
    let last = match weights.iter().rposition(|&w| w > 0.0) {
        Some(i) => i,
        None => return counts,
    };
    let mut cum = 0.0;
    let mut j = 0;
    for i in 0..n {
        let pos = (offset + i as f64) / n as f64;
        while j < last && cum + weights[j] <= pos {
            cum += weights[j];
            j += 1;
        }
        counts[j] += 1;
    }
    counts
}
