use std::fmt;

use serde::{Deserialize, Serialize};

use crate::forecast::StudentTParams;
use crate::Scalar;

/// Three-class direction call relative to the rolling band mean ± 2σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Increase,
    Stable,
    Decrease,
}

pub const DIRECTIONS: [Direction; 3] = [Direction::Increase, Direction::Stable, Direction::Decrease];

impl Direction {
    pub fn index(self) -> usize {
        match self {
            Direction::Increase => 0,
            Direction::Stable => 1,
            Direction::Decrease => 2,
        }
    }

    pub fn arrow(self) -> &'static str {
        match self {
            Direction::Increase => "↑",
            Direction::Stable => "→",
            Direction::Decrease => "↓",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Increase => "increase",
            Direction::Stable => "stable",
            Direction::Decrease => "decrease",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Population mean and standard deviation of a trailing window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RollingStats<T = f64> {
    pub mean: T,
    pub std: T,
}

/// Mean and population standard deviation of `window`.
pub fn rolling_stats<T: Scalar>(window: &[T]) -> Option<RollingStats<T>> {
    if window.is_empty() {
        return None;
    }
    let n = T::from(window.len()).expect("length fits the scalar");
    let mean = window.iter().fold(T::zero(), |a, &b| a + b) / n;
    let var = window.iter().fold(T::zero(), |a, &b| a + (b - mean) * (b - mean)) / n;
    Some(RollingStats { mean, std: var.sqrt() })
}

/// Increase iff `y > mean + 2σ`, Decrease iff `y < mean - 2σ`, otherwise
/// Stable; values on a boundary are Stable.
pub fn classify_direction<T: Scalar>(y: T, stats: RollingStats<T>) -> Direction {
    let two = T::one() + T::one();
    if y > stats.mean + two * stats.std {
        Direction::Increase
    } else if y < stats.mean - two * stats.std {
        Direction::Decrease
    } else {
        Direction::Stable
    }
}

/// Forecast probability mass above, inside and below the band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub p_increase: f64,
    pub p_stable: f64,
    pub p_decrease: f64,
    /// The band had zero width (σ = 0), so Stable has no mass.
    pub degenerate_band: bool,
}

impl ClassScores {
    pub fn get(&self, d: Direction) -> f64 {
        match d {
            Direction::Increase => self.p_increase,
            Direction::Stable => self.p_stable,
            Direction::Decrease => self.p_decrease,
        }
    }

    /// Most probable class; any tie for the maximum resolves to Stable.
    pub fn label(&self) -> Direction {
        let (i, s, d) = (self.p_increase, self.p_stable, self.p_decrease);
        if s >= i && s >= d {
            Direction::Stable
        } else if i > d {
            Direction::Increase
        } else if d > i {
            Direction::Decrease
        } else {
            Direction::Stable
        }
    }
}

pub fn direction_probabilities(forecast: &StudentTParams, stats: RollingStats) -> ClassScores {
    let p_increase = 1.0 - forecast.cdf(stats.mean + 2.0 * stats.std);
    let p_decrease = forecast.cdf(stats.mean - 2.0 * stats.std);
    let p_stable = (1.0 - p_increase - p_decrease).max(0.0);
    ClassScores {
        p_increase,
        p_stable,
        p_decrease,
        degenerate_band: stats.std == 0.0,
    }
}
