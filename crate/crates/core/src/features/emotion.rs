//! Emotion intensity bins and the statistics derived from them.

use serde::{Deserialize, Serialize};

use crate::stats::{concentration, entropy, pearson};
use crate::{Error, Result, Scalar};

pub const EMOTION_BINS: usize = 5;
pub const EMOTION_BIN_NAMES: [&str; EMOTION_BINS] = ["absent", "low", "moderate", "high", "very_high"];
/// Interior bin edges; bins are [0,.2), [.2,.4), [.4,.6), [.6,.8), [.8,1].
const BIN_EDGES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
const BIN_MIDPOINTS: [f64; EMOTION_BINS] = [0.1, 0.3, 0.5, 0.7, 0.9];
pub const DEFAULT_CORRELATION_WINDOW: usize = 7;

/// Bin index 1..=5 for a score in [0, 1]; the top bin is closed.
pub fn assign_emotion_bin<T: Scalar>(score: T) -> Result<usize> {
    if !(score >= T::zero() && score <= T::one()) {
        return Err(Error::invalid(format!("emotion score {score} outside [0, 1]")));
    }
    Ok(1 + BIN_EDGES.iter().filter(|&&e| score >= T::c(e)).count())
}

/// Weighted share of mass in each intensity bin for one emotion and day.
/// `items` are (score, effective weight) pairs. `None` when the total weight
/// is zero.
pub fn emotion_bin_distribution<T: Scalar>(items: &[(T, T)]) -> Result<Option<[T; EMOTION_BINS]>> {
    let mut g = [T::zero(); EMOTION_BINS];
    let mut total = T::zero();
    for &(score, w) in items {
        if !(w >= T::zero()) {
            return Err(Error::invalid(format!("negative weight {w}")));
        }
        let b = assign_emotion_bin(score)?;
        g[b - 1] += w;
        total += w;
    }
    if !(total > T::zero()) {
        return Ok(None);
    }
    g.iter_mut().for_each(|v| *v /= total);
    Ok(Some(g))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmotionAggregates<T> {
    pub mean_intensity: T,
    pub variance: T,
    /// 1-based bin with the most mass, lowest on ties.
    pub peak_bin: usize,
}

pub fn emotion_aggregates<T: Scalar>(g: &[T; EMOTION_BINS]) -> EmotionAggregates<T> {
    let mids = BIN_MIDPOINTS.map(T::c);
    let mean: T = g.iter().zip(&mids).map(|(&p, &m)| p * m).sum();
    let variance: T = g.iter().zip(&mids).map(|(&p, &m)| p * (m - mean) * (m - mean)).sum();
    let mut peak = 0;
    for (i, &p) in g.iter().enumerate() {
        if p > g[peak] {
            peak = i;
        }
    }
    EmotionAggregates {
        mean_intensity: mean,
        variance,
        peak_bin: peak + 1,
    }
}

/// (concentration Σ G², entropy −Σ G ln G).
pub fn emotion_dispersion<T: Scalar>(g: &[T; EMOTION_BINS]) -> (T, T) {
    (concentration(g), entropy(g))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix<T> {
    pub values: Vec<Vec<T>>,
    pub degenerate: Vec<Vec<bool>>,
}

/// Pearson correlations between every pair of mean-intensity series over the
/// `window` days ending at `t` (inclusive). Pairs involving a constant series
/// are 0 and flagged; the diagonal is 1.
pub fn emotion_correlations<T: Scalar>(series: &[Vec<T>], window: usize, t: usize) -> Result<CorrelationMatrix<T>> {
    if window < 2 {
        return Err(Error::invalid("correlation window must be >= 2"));
    }
    let available = series.iter().map(Vec::len).min().unwrap_or(0).min(t + 1);
    if available < window || series.iter().any(|s| s.len() <= t) {
        return Err(Error::InsufficientHistory {
            required: window,
            available,
        });
    }
    let start = t + 1 - window;
    let k = series.len();
    let mut values = vec![vec![T::zero(); k]; k];
    let mut degenerate = vec![vec![false; k]; k];
    for i in 0..k {
        for j in i..k {
            let c = pearson(&series[i][start..=t], &series[j][start..=t]);
            let v = if i == j { T::one() } else { c.value };
            values[i][j] = v;
            values[j][i] = v;
            degenerate[i][j] = c.degenerate;
            degenerate[j][i] = c.degenerate;
        }
    }
    Ok(CorrelationMatrix { values, degenerate })
}
