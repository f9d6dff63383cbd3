//! Paired-sample statistics used to compare two rankers query by query.

use alloc::vec::Vec;

use crate::Error;

/// Below this many non-zero differences the Wilcoxon p-value is exact.
pub const WILCOXON_EXACT_BELOW: usize = 10;

/// Sample Pearson correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, Error> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::EmptyInput("pearson needs at least two pairs"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::DegenerateVariance);
    }
    Ok((sxy / libm::sqrt(sxx * syy)).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WilcoxonResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    /// Pairs left after dropping zero differences.
    pub n: usize,
    /// Two-sided.
    pub p_value: f64,
    pub exact: bool,
}

/// Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are discarded, tied magnitudes get average ranks. The
/// p-value is exact for fewer than ten pairs and otherwise uses the normal
/// approximation with tie and continuity corrections.
pub fn wilcoxon_signed_rank(x: &[f64], y: &[f64]) -> Result<WilcoxonResult, Error> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    let diffs: Vec<f64> = x
        .iter()
        .zip(y)
        .map(|(a, b)| a - b)
        .filter(|d| *d != 0.0)
        .collect();
    if diffs.is_empty() {
        return Err(Error::AllZeroDifferences);
    }
    let n = diffs.len();
    let ranks = average_ranks(&diffs);

    let (mut w_plus, mut w_minus) = (0.0, 0.0);
    for (d, r) in diffs.iter().zip(&ranks) {
        if *d > 0.0 {
            w_plus += r;
        } else {
            w_minus += r;
        }
    }
    let statistic = w_plus.min(w_minus);

    let (p_value, exact) = if n < WILCOXON_EXACT_BELOW {
        (exact_p_value(&ranks, statistic), true)
    } else {
        (normal_p_value(&diffs, n, statistic), false)
    };
    Ok(WilcoxonResult {
        statistic,
        w_plus,
        w_minus,
        n,
        p_value,
        exact,
    })
}

/// 1-based ranks of `|d|`, ties averaged.
fn average_ranks(diffs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..diffs.len()).collect();
    order.sort_by(|&a, &b| diffs[a].abs().total_cmp(&diffs[b].abs()));
    let mut ranks = alloc::vec![0.0; diffs.len()];
    let mut i = 0;
    while i < order.len() {
        let mag = diffs[order[i]].abs();
        let mut j = i + 1;
        while j < order.len() && diffs[order[j]].abs() == mag {
            j += 1;
        }
        // positions i..j hold ranks i+1..=j
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        i = j;
    }
    ranks
}

/// Share of the `2^n` sign assignments whose `min(W+, W-)` is at most the
/// observed statistic. Ranks are doubled so that half ranks become integers.
fn exact_p_value(ranks: &[f64], statistic: f64) -> f64 {
    let doubled: Vec<u64> = ranks.iter().map(|r| libm::round(r * 2.0) as u64).collect();
    let total: u64 = doubled.iter().sum();
    let observed = libm::round(statistic * 2.0) as u64;
    // counts[s] = number of subsets whose doubled rank sum is s
    let mut counts = alloc::vec![0u64; total as usize + 1];
    counts[0] = 1;
    for &r in &doubled {
        for s in (r as usize..=total as usize).rev() {
            counts[s] += counts[s - r as usize];
        }
    }
    let hits: u64 = counts
        .iter()
        .enumerate()
        .filter(|&(s, _)| (s as u64).min(total - s as u64) <= observed)
        .map(|(_, c)| c)
        .sum();
    (hits as f64 / libm::pow(2.0, ranks.len() as f64)).min(1.0)
}

fn normal_p_value(diffs: &[f64], n: usize, statistic: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut mags: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    mags.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < mags.len() {
        let mut j = i + 1;
        while j < mags.len() && mags[j] == mags[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (((statistic - mean).abs() - 0.5) / libm::sqrt(var)).max(0.0);
    libm::erfc(z / core::f64::consts::SQRT_2).min(1.0)
}
