//! Descriptive statistics and information measures over discrete distributions.
//!
//! All variances are population (divide by n). Logarithms are natural, and
//! `0 · ln 0` is taken as 0 everywhere.

use crate::Scalar;

pub fn mean<T: Scalar>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    Some(xs.iter().copied().sum::<T>() / T::from_count(xs.len()))
}

/// Population mean and standard deviation.
pub fn mean_std<T: Scalar>(xs: &[T]) -> Option<(T, T)> {
    let m = mean(xs)?;
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_count(xs.len());
    Some((m, var.sqrt()))
}

/// A Pearson coefficient. `degenerate` is set when either series is constant,
/// in which case `value` is 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlation<T> {
    pub value: T,
    pub degenerate: bool,
}

pub fn pearson<T: Scalar>(xs: &[T], ys: &[T]) -> Correlation<T> {
    assert_eq!(xs.len(), ys.len(), "pearson: length mismatch");
    let (Some(mx), Some(my)) = (mean(xs), mean(ys)) else {
        return Correlation {
            value: T::zero(),
            degenerate: true,
        };
    };
    let mut sxy = T::zero();
    let mut sxx = T::zero();
    let mut syy = T::zero();
    for (&x, &y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx <= T::zero() || syy <= T::zero() {
        return Correlation {
            value: T::zero(),
            degenerate: true,
        };
    }
    let r = sxy / (sxx * syy).sqrt();
    Correlation {
        value: r.max(-T::one()).min(T::one()),
        degenerate: false,
    }
}

/// Shannon entropy −Σ p ln p.
pub fn entropy<T: Scalar>(p: &[T]) -> T {
    p.iter().filter(|&&v| v > T::zero()).map(|&v| -v * v.ln()).sum()
}

/// Herfindahl-style concentration Σ p².
pub fn concentration<T: Scalar>(p: &[T]) -> T {
    p.iter().map(|&v| v * v).sum()
}

/// Mutual information Σ joint · ln(joint / (row_m ⊗ col_m)) of a joint table
/// `joint[h][z]` given its two marginals. Cells with zero joint mass add 0.
pub fn mutual_information<T: Scalar>(joint: &[Vec<T>], row_marginal: &[T], col_marginal: &[T]) -> T {
    let mut mi = T::zero();
    for (h, row) in joint.iter().enumerate() {
        for (z, &p) in row.iter().enumerate() {
            if p > T::zero() {
                mi += p * (p / (row_marginal[h] * col_marginal[z])).ln();
            }
        }
    }
    mi
}

/// Assigns each value to one of `bins` quantile bins.
///
/// Cut points are the nearest-rank quantiles at k/bins, k = 1..bins-1, and a
/// value's bin is the number of cut points strictly below it. Equal values
/// always share a bin, so a constant column collapses into bin 0.
pub fn quantile_bins<T: Scalar>(values: &[T], bins: usize) -> Vec<usize> {
    assert!(bins >= 1);
    if values.is_empty() {
        return Vec::new();
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("quantile_bins: NaN"));
    let n = sorted.len();
    let cuts: Vec<T> = (1..bins)
        .map(|k| {
            let rank = (k * n).div_ceil(bins).max(1);
            sorted[rank - 1]
        })
        .collect();
    values
        .iter()
        .map(|&v| cuts.iter().filter(|&&c| c < v).count())
        .collect()
}

/// Plug-in mutual information (nats) between two discrete label sequences.
pub fn plug_in_mi(xs: &[usize], ys: &[usize]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    let nx = xs.iter().max().map_or(0, |m| m + 1);
    let ny = ys.iter().max().map_or(0, |m| m + 1);
    let mut joint = vec![vec![0usize; ny]; nx];
    let mut px = vec![0usize; nx];
    let mut py = vec![0usize; ny];
    for (&x, &y) in xs.iter().zip(ys) {
        joint[x][y] += 1;
        px[x] += 1;
        py[y] += 1;
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for (x, row) in joint.iter().enumerate() {
        for (y, &c) in row.iter().enumerate() {
            if c > 0 {
                let pxy = c as f64 / nf;
                mi += pxy * (pxy * nf * nf / (px[x] as f64 * py[y] as f64)).ln();
            }
        }
    }
    mi.max(0.0)
}

/// Entropy (nats) of a discrete label sequence.
pub fn label_entropy(xs: &[usize]) -> f64 {
    let n = xs.len();
    if n == 0 {
        return 0.0;
    }
    let k = xs.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; k];
    for &x in xs {
        counts[x] += 1;
    }
    let p: Vec<f64> = counts.iter().map(|&c| c as f64 / n as f64).collect();
    entropy(&p)
}
