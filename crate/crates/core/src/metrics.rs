//! Retrieval metrics over the 1-based ranks of each query's target image.

use crate::Error;

/// Cutoffs reported for every evaluation.
pub const RECALL_CUTOFFS: [usize; 4] = [1, 10, 100, 1000];

/// Percentage of ranks `<= k`.
pub fn recall_at_k(ranks: &[usize], k: usize) -> Result<f64, Error> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("ranks"));
    }
    let hits = ranks.iter().filter(|&&r| r <= k).count();
    Ok(100.0 * hits as f64 / ranks.len() as f64)
}

/// Mean rank (MNR).
pub fn mean_rank(ranks: &[usize]) -> Result<f64, Error> {
    if ranks.is_empty() {
        return Err(Error::EmptyInput("ranks"));
    }
    Ok(ranks.iter().map(|&r| r as f64).sum::<f64>() / ranks.len() as f64)
}
