use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample median with a distribution-free confidence interval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MedianCi {
    pub median: f64,
    pub lo: f64,
    pub hi: f64,
    pub level: f64,
    /// 1-based rank of the lower endpoint; the upper one is `n - rank + 1`.
    pub rank: usize,
}

pub fn median(samples: &[f64]) -> Result<f64> {
    let v = sorted_finite(samples)?;
    Ok(median_sorted(&v))
}

fn median_sorted(v: &[f64]) -> f64 {
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn sorted_finite(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::MetricUndefined("median of an empty sample".into()));
    }
    if samples.iter().any(|s| !s.is_finite()) {
        return Err(Error::MetricUndefined("sample contains non-finite values".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// P(B ≤ k) for B ~ Binomial(n, 1/2), for every k in 0..=n.
pub fn binomial_half_cdf(n: usize) -> Vec<f64> {
    let ln2 = std::f64::consts::LN_2;
    let mut log_term = -(n as f64) * ln2;
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(n + 1);
    for k in 0..=n {
        if k > 0 {
            log_term += ((n - k + 1) as f64).ln() - (k as f64).ln();
        }
        acc += log_term.exp();
        out.push(acc.min(1.0));
    }
    out
}

/// Median and order-statistic confidence interval `[x_(j), x_(n-j+1)]`,
/// where `j` is the largest rank with P(B ≤ j-1) ≤ (1-level)/2 for
/// B ~ Binomial(n, 1/2). Coverage is therefore at least `level`.
pub fn median_ci(samples: &[f64], level: f64) -> Result<MedianCi> {
    let n = samples.len();
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::Config(format!("ci level {level} not in (0, 1)")));
    }
    let v = sorted_finite(samples)?;
    let tail = (1.0 - level) / 2.0;
    let cdf = binomial_half_cdf(n);
    // Tolerance absorbs rounding in the accumulated cdf.
    let rank = (1..=n.div_ceil(2)).take_while(|&j| cdf[j - 1] <= tail * (1.0 + 1e-12)).last();
    let Some(rank) = rank else {
        return Err(Error::CIUndefined { n, level });
    };
    Ok(MedianCi {
        median: median_sorted(&v),
        lo: v[rank - 1],
        hi: v[n - rank],
        level,
        rank,
    })
}

/// Trailing-window mean of a Dice series. Early points average over the
/// values available so far.
pub fn rolling_dice(series: &[(usize, f64)], window: usize) -> Vec<(usize, f64)> {
    let window = window.max(1);
    let mut sum = 0.0;
    let mut out = Vec::with_capacity(series.len());
    for (k, &(idx, d)) in series.iter().enumerate() {
        sum += d;
        if k >= window {
            sum -= series[k - window].1;
        }
        let len = (k + 1).min(window);
        out.push((idx, sum / len as f64));
    }
    out
}
