//! Platform volume, exponential smoothing, derivatives and the platform
//! distribution index.

use serde::{Deserialize, Serialize};

use crate::stats::{entropy, mean_std};
use crate::{Error, Result, Scalar};

pub const DEFAULT_SMOOTHING_WINDOW: usize = 7;
pub const DEFAULT_SMOOTHING_DECAY: f64 = 0.8;
pub const DEFAULT_BASELINE_WINDOW: usize = 28;

/// Engagement weight and layer relevance of one content item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedItem<T> {
    pub engagement: T,
    pub relevance: T,
}

impl<T: Scalar> WeightedItem<T> {
    pub fn effective_weight(&self) -> T {
        self.engagement * self.relevance
    }
}

/// Σ w·ρ over the platform's items for one day.
pub fn compute_platform_volume<T: Scalar>(items: &[WeightedItem<T>]) -> Result<T> {
    let mut total = T::zero();
    for item in items {
        if !(item.engagement >= T::zero()) {
            return Err(Error::invalid(format!("negative engagement {}", item.engagement)));
        }
        total += item.effective_weight();
    }
    Ok(total)
}

/// Normalized truncated exponential smoothing:
/// Ṽ_t = Σ_{τ<W} λ^τ V_{t−τ} (1−λ)/(1−λ^W).
///
/// Terms before the start of the series count as zero.
pub fn smooth_volume<T: Scalar>(series: &[T], window: usize, decay: T) -> Result<Vec<T>> {
    if window == 0 {
        return Err(Error::invalid("smoothing window must be >= 1"));
    }
    if !(decay > T::zero() && decay < T::one()) {
        return Err(Error::invalid(format!("decay {decay} outside (0, 1)")));
    }
    if series.is_empty() {
        return Err(Error::invalid("cannot smooth an empty series"));
    }
    let weights = smoothing_weights(window, decay);
    Ok((0..series.len())
        .map(|t| {
            weights
                .iter()
                .enumerate()
                .take(t + 1)
                .map(|(tau, &w)| w * series[t - tau])
                .sum()
        })
        .collect())
}

/// (1−λ)λ^τ/(1−λ^W) for τ = 0..W−1.
pub fn smoothing_weights<T: Scalar>(window: usize, decay: T) -> Vec<T> {
    let norm = (T::one() - decay) / (T::one() - decay.powi(window as i32));
    let mut w = Vec::with_capacity(window);
    let mut p = T::one();
    for _ in 0..window {
        w.push(p * norm);
        p *= decay;
    }
    w
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeDerivatives<T> {
    pub velocity: Vec<T>,
    pub acceleration: Vec<T>,
    pub standardized: Vec<T>,
    /// Days whose trailing baseline had zero spread (standardized set to 0).
    pub degenerate: Vec<bool>,
}

/// Velocity, acceleration and standardized volume per day.
///
/// The standardized value at t uses the population mean/std of the previous
/// `baseline_window` days (fewer during warm-up). Undefined warm-up values
/// (velocity at day 0, acceleration at days 0–1, standardized at day 0) are 0.
pub fn volume_derivatives<T: Scalar>(series: &[T], baseline_window: usize) -> Result<VolumeDerivatives<T>> {
    if series.len() < 2 {
        return Err(Error::InsufficientHistory {
            required: 2,
            available: series.len(),
        });
    }
    if baseline_window == 0 {
        return Err(Error::invalid("baseline window must be >= 1"));
    }
    let n = series.len();
    let mut velocity = vec![T::zero(); n];
    let mut acceleration = vec![T::zero(); n];
    let mut standardized = vec![T::zero(); n];
    let mut degenerate = vec![false; n];
    for t in 1..n {
        velocity[t] = series[t] - series[t - 1];
        if t >= 2 {
            acceleration[t] = velocity[t] - velocity[t - 1];
        }
    }
    for t in 0..n {
        let start = t.saturating_sub(baseline_window);
        match mean_std(&series[start..t]) {
            Some((mu, sigma)) if sigma > T::zero() => standardized[t] = (series[t] - mu) / sigma,
            _ => degenerate[t] = true,
        }
    }
    Ok(VolumeDerivatives {
        velocity,
        acceleration,
        standardized,
        degenerate,
    })
}

/// Shannon entropy of per-platform volume shares. `None` when every
/// platform is silent (no discourse that day).
pub fn platform_distribution_index<T: Scalar>(volumes: &[T]) -> Option<T> {
    let total: T = volumes.iter().copied().sum();
    if !(total > T::zero()) {
        return None;
    }
    let shares: Vec<T> = volumes.iter().map(|&v| v / total).collect();
    Some(entropy(&shares))
}
