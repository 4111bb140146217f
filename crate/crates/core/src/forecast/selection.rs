//! Mutual-information feature ranking.

use serde::{Deserialize, Serialize};
use tracing::warn;

use crate::stats::{label_entropy, plug_in_mi, quantile_bins};
use crate::{Error, Result};

pub const MI_BINS: usize = 8;
pub const MIN_SELECTION_DAYS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureScore {
    pub index: usize,
    pub score: f64,
}

/// Scores every feature column by its maximum plug-in MI with any target
/// (both discretized into 8 quantile bins) and returns the top `k`, highest
/// first, ties to the lower index. Columns are day-aligned.
pub fn select_features_mi(features: &[Vec<f64>], targets: &[Vec<f64>], k: usize) -> Result<Vec<FeatureScore>> {
    let days = features.first().map_or(0, Vec::len);
    if days < MIN_SELECTION_DAYS {
        return Err(Error::InsufficientHistory {
            required: MIN_SELECTION_DAYS,
            available: days,
        });
    }
    if k > features.len() {
        return Err(Error::invalid(format!(
            "cannot select {k} of {} features",
            features.len()
        )));
    }
    if features.iter().chain(targets).any(|c| c.len() != days) {
        return Err(Error::invalid("feature and target columns must be day-aligned"));
    }
    let target_bins: Vec<Vec<usize>> = targets
        .iter()
        .enumerate()
        .filter_map(|(j, col)| {
            let bins = quantile_bins(col, MI_BINS);
            if label_entropy(&bins) == 0.0 {
                warn!(target = j, "constant target skipped in feature selection");
                None
            } else {
                Some(bins)
            }
        })
        .collect();
    let mut scores: Vec<FeatureScore> = features
        .iter()
        .enumerate()
        .map(|(index, col)| {
            let bins = quantile_bins(col, MI_BINS);
            let score = target_bins.iter().map(|t| plug_in_mi(&bins, t)).fold(0.0, f64::max);
            FeatureScore { index, score }
        })
        .collect();
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.index.cmp(&b.index)));
    scores.truncate(k);
    Ok(scores)
}
