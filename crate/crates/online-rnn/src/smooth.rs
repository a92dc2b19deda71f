//! Loss-curve post-processing.

/// Means over non-overlapping blocks of `window_down` samples (a trailing
/// partial block is dropped), followed by a `window_avg`-point running mean
/// in valid mode. A block wider than the sequence yields the overall mean as
/// a single point; a running window wider than the block series yields the
/// mean of the block series.
pub fn smooth_loss(raw: &[f64], window_down: usize, window_avg: usize) -> Vec<f64> {
    assert!(window_down >= 1 && window_avg >= 1, "smoothing windows must be positive");
    if raw.is_empty() {
        return Vec::new();
    }
    if window_down > raw.len() {
        return vec![mean(raw)];
    }
    let blocks: Vec<f64> = raw.chunks_exact(window_down).map(mean).collect();
    if window_avg > blocks.len() {
        return vec![mean(&blocks)];
    }
    blocks.windows(window_avg).map(mean).collect()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}
