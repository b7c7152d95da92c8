//! Dice overlap, percentile bootstrap and the Wilcoxon signed-rank test.

use crate::error::{Error, Result};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};

/// Dice overlap `2|A∩B| / (|A|+|B|)` between two binary masks.
///
/// Both masks empty is taken as perfect agreement (1.0).
pub fn dice(pred: &Array2<bool>, gt: &Array2<bool>) -> Result<f64> {
    if pred.dim() != gt.dim() {
        return Err(Error::Argument(format!(
            "dice: shape mismatch {:?} vs {:?}",
            pred.dim(),
            gt.dim()
        )));
    }
    let mut inter = 0usize;
    let mut a = 0usize;
    let mut b = 0usize;
    for (p, g) in pred.iter().zip(gt.iter()) {
        a += *p as usize;
        b += *g as usize;
        inter += (*p && *g) as usize;
    }
    if a + b == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (a + b) as f64)
}

/// Percentile with linear interpolation on a sorted slice, at position
/// `q·(len−1)`.
fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let frac = pos - lo as f64;
    if lo + 1 < sorted.len() {
        sorted[lo] * (1.0 - frac) + sorted[lo + 1] * frac
    } else {
        sorted[lo]
    }
}

/// Percentile bootstrap of the mean.
///
/// Draws `resamples` resamples of size `n` with replacement (indices from a
/// `ChaCha8Rng` seeded with `seed`, one `random_range(0..n)` per draw, in
/// row-major resample-then-draw order), takes each resample's mean (summed
/// in draw order), and returns `(mean, lo, hi)` where the bounds are the
/// `(1±coverage)/2` percentiles of the sorted resample means with linear
/// interpolation.
pub fn bootstrap_ci(values: &[f64], resamples: usize, coverage: f64, seed: u64) -> Result<(f64, f64, f64)> {
    if values.is_empty() {
        return Err(Error::Argument("bootstrap_ci: empty input".into()));
    }
    if !(coverage > 0.0 && coverage < 1.0) {
        return Err(Error::Argument(format!("bootstrap_ci: coverage {coverage} out of (0,1)")));
    }
    if resamples == 0 {
        return Err(Error::Argument("bootstrap_ci: need at least one resample".into()));
    }
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut means = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut acc = 0.0;
        for _ in 0..n {
            acc += values[rng.random_range(0..n)];
        }
        means.push(acc / n as f64);
    }
    means.sort_by(|a, b| a.partial_cmp(b).expect("bootstrap means are finite"));
    let alpha = (1.0 - coverage) / 2.0;
    let lo = percentile_sorted(&means, alpha);
    let hi = percentile_sorted(&means, 1.0 - alpha);
    Ok((mean, lo, hi))
}

/// Number of resamples used throughout the evaluation harness.
pub const BOOTSTRAP_RESAMPLES: usize = 999;
/// Confidence level of reported intervals.
pub const BOOTSTRAP_COVERAGE: f64 = 0.95;

/// Ranks of `|values|` in ascending order, with average ranks for ties.
/// Returned ranks are doubled so they stay integral (a tie of two averages
/// to a half-rank).
fn double_ranks(abs_diffs: &[f64]) -> Vec<u64> {
    let n = abs_diffs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| abs_diffs[i].partial_cmp(&abs_diffs[j]).expect("finite diffs"));
    let mut ranks2 = vec![0u64; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && abs_diffs[order[j + 1]] == abs_diffs[order[i]] {
            j += 1;
        }
        // Average rank over the tie group [i, j], doubled: (i+1 + j+1).
        let rank2 = (i + 1 + j + 1) as u64;
        for &idx in &order[i..=j] {
            ranks2[idx] = rank2;
        }
        i = j + 1;
    }
    ranks2
}

/// Largest `n` for which the exact null distribution is enumerated.
pub const WILCOXON_EXACT_LIMIT: usize = 12;

/// Two-sided Wilcoxon signed-rank test on paired samples.
///
/// Zero differences are dropped. For `n ≤ 12` nonzero differences the exact
/// null distribution over all 2ⁿ sign assignments is used; beyond that, the
/// normal approximation with tie correction. Errors with fewer than 5
/// nonzero differences.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "wilcoxon_signed_rank: length mismatch {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let diffs: Vec<f64> = a.iter().zip(b.iter()).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    let n = diffs.len();
    if n < 5 {
        return Err(Error::InsufficientData(format!(
            "wilcoxon_signed_rank: {n} nonzero differences, need at least 5"
        )));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks2 = double_ranks(&abs);
    let w_plus2: u64 = diffs
        .iter()
        .zip(ranks2.iter())
        .filter(|(d, _)| **d > 0.0)
        .map(|(_, r)| *r)
        .sum();
    let total2: u64 = ranks2.iter().sum();

    if n <= WILCOXON_EXACT_LIMIT {
        Ok(exact_two_sided_p(&ranks2, w_plus2, total2))
    } else {
        Ok(normal_two_sided_p(&abs, &ranks2, w_plus2))
    }
}

/// Exact two-sided p over all 2ⁿ sign assignments, computed by dynamic
/// programming over the (doubled, integral) rank sums.
fn exact_two_sided_p(ranks2: &[u64], w_plus2: u64, total2: u64) -> f64 {
    let n = ranks2.len();
    let max_sum = total2 as usize;
    let mut counts = vec![0u64; max_sum + 1];
    counts[0] = 1;
    for &r in ranks2 {
        let r = r as usize;
        for s in (r..=max_sum).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w_low2 = w_plus2.min(total2 - w_plus2);
    let lower: u64 = counts[..=(w_low2 as usize)].iter().sum();
    let upper: u64 = counts[((total2 - w_low2) as usize)..].iter().sum();
    let p = (lower + upper) as f64 / 2f64.powi(n as i32);
    p.min(1.0)
}

/// Normal approximation with tie correction (no continuity correction).
fn normal_two_sided_p(abs_diffs: &[f64], ranks2: &[u64], w_plus2: u64) -> f64 {
    let n = ranks2.len() as f64;
    let w = w_plus2 as f64 / 2.0;
    let mean = n * (n + 1.0) / 4.0;
    // Tie correction: Σ(t³−t)/48 over tie groups of |d|.
    let mut sorted = abs_diffs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite diffs"));
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i;
        while j + 1 < sorted.len() && sorted[j + 1] == sorted[i] {
            j += 1;
        }
        let t = (j - i + 1) as f64;
        tie_term += t * t * t - t;
        i = j + 1;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = (w - mean) / var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let p = 2.0 * (1.0 - normal.cdf(z.abs()));
    p.clamp(f64::MIN_POSITIVE, 1.0)
}
