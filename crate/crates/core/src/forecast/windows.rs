//! Supervised windows over a feature series.

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::tape::Matrix;
use crate::features::FeatureSeries;
use crate::{Error, Result};

/// Record index of each window's first context day. A window covers
/// `context_len + horizon` consecutive, present calendar days.
pub fn window_starts(series: &FeatureSeries, context_len: usize, horizon: usize) -> Result<Vec<usize>> {
    let span = context_len + horizon;
    let records = &series.records;
    let mut starts = Vec::new();
    let mut run_start = 0;
    let mut longest = 0;
    for i in 0..records.len() {
        let breaks =
            records[i].missing || (i > run_start && records[i].date != records[i - 1].date + chrono::Duration::days(1));
        if breaks {
            run_start = if records[i].missing { i + 1 } else { i };
            if records[i].missing {
                continue;
            }
        }
        let run = i + 1 - run_start;
        longest = longest.max(run);
        if run >= span {
            starts.push(i + 1 - span);
        }
    }
    if starts.is_empty() {
        return Err(Error::InsufficientHistory {
            required: span,
            available: longest,
        });
    }
    Ok(starts)
}

/// Per-column mean and standard deviation (population; 0 spread → 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(columns: &[Vec<f64>]) -> Self {
        let (mean, std) = columns
            .iter()
            .map(|c| match crate::stats::mean_std(c) {
                Some((m, s)) if s > 0.0 => (m, s),
                Some((m, _)) => (m, 1.0),
                None => (0.0, 1.0),
            })
            .unzip();
        Self { mean, std }
    }

    #[inline]
    pub fn apply(&self, j: usize, v: f64) -> f64 {
        (v - self.mean[j]) / self.std[j]
    }

    #[inline]
    pub fn invert(&self, j: usize, z: f64) -> f64 {
        z * self.std[j] + self.mean[j]
    }
}

/// Column indices into the feature store for each model input group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputColumns {
    pub selected: Vec<usize>,
    pub targets: Vec<usize>,
    pub covariates: Vec<usize>,
    pub lags: Vec<usize>,
}

/// Encoder rows for context days `start..start+context_len`: standardized
/// selected features, then for each target each lag. A lag reaching before
/// the window start contributes 0 (the standardized mean).
pub fn encoder_matrix(
    series: &FeatureSeries,
    start: usize,
    context_len: usize,
    cols: &InputColumns,
    features: &Standardizer,
    targets: &Standardizer,
) -> Matrix<f64> {
    let width = cols.selected.len() + cols.targets.len() * cols.lags.len();
    let mut m = Matrix::zeros(context_len, width);
    for i in 0..context_len {
        let values = &series.records[start + i].values;
        let row = &mut m.data[i * width..(i + 1) * width];
        for (j, &c) in cols.selected.iter().enumerate() {
            row[j] = features.apply(j, values[c]);
        }
        let mut k = cols.selected.len();
        for (j, &c) in cols.targets.iter().enumerate() {
            for &lag in &cols.lags {
                if i >= lag {
                    row[k] = targets.apply(j, series.records[start + i - lag].values[c]);
                }
                k += 1;
            }
        }
    }
    m
}

/// Known future covariates read from the store for `horizon` days after the
/// context.
pub fn stored_covariates(
    series: &FeatureSeries,
    first_future: usize,
    horizon: usize,
    cols: &InputColumns,
) -> Matrix<f64> {
    let w = cols.covariates.len();
    let mut m = Matrix::zeros(horizon, w);
    for s in 0..horizon {
        let values = &series.records[first_future + s].values;
        for (j, &c) in cols.covariates.iter().enumerate() {
            m.data[s * w + j] = values[c];
        }
    }
    m
}

/// Standardized targets for `horizon` days starting at `first_future`.
pub fn target_matrix(
    series: &FeatureSeries,
    first_future: usize,
    horizon: usize,
    cols: &InputColumns,
    targets: &Standardizer,
) -> Matrix<f64> {
    let t = cols.targets.len();
    let mut m = Matrix::zeros(horizon, t);
    for s in 0..horizon {
        let values = &series.records[first_future + s].values;
        for (j, &c) in cols.targets.iter().enumerate() {
            m.data[s * t + j] = targets.apply(j, values[c]);
        }
    }
    m
}

#[derive(Debug, Clone)]
pub struct Window {
    pub start: usize,
    /// Last context day.
    pub anchor: NaiveDate,
    pub encoder: Matrix<f64>,
    pub decoder: Matrix<f64>,
    pub target: Matrix<f64>,
}

#[allow(clippy::too_many_arguments)]
pub fn build_window(
    series: &FeatureSeries,
    start: usize,
    context_len: usize,
    horizon: usize,
    cols: &InputColumns,
    features: &Standardizer,
    targets: &Standardizer,
) -> Window {
    let first_future = start + context_len;
    Window {
        start,
        anchor: series.records[first_future - 1].date,
        encoder: encoder_matrix(series, start, context_len, cols, features, targets),
        decoder: stored_covariates(series, first_future, horizon, cols),
        target: target_matrix(series, first_future, horizon, cols, targets),
    }
}

/// Number of validation windows for a chronological split.
pub fn validation_count(windows: usize, fraction: f64) -> usize {
    ((windows as f64 * fraction).round() as usize).min(windows.saturating_sub(1))
}
