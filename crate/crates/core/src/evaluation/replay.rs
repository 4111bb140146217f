use std::path::Path;

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use tracing::{info, warn};

use super::backtest::{rolling_stats_at, SkippedAnchor};
use super::direction::{classify_direction, Direction, RollingStats};
use crate::features::{FeatureSeries, KeyEvent};
use crate::forecast::{train, ModelConfig};
use crate::{Error, Result};

/// Direction of a week: the call on the day that strays furthest from the
/// band centre, in band widths.
pub fn window_direction(values: &[f64], stats: RollingStats) -> Option<Direction> {
    let scale = if stats.std > 0.0 { stats.std } else { 1.0 };
    let (_, &peak) = values.iter().enumerate().max_by(|a, b| {
        ((a.1 - stats.mean).abs() / scale)
            .total_cmp(&((b.1 - stats.mean).abs() / scale))
            .then(b.0.cmp(&a.0))
    })?;
    Some(classify_direction(peak, stats))
}

/// One line of the case-study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayRow {
    pub anchor: NaiveDate,
    pub platform: String,
    pub target: String,
    pub ground_truth: Direction,
    pub forecast: Direction,
    pub matched: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplaySummary {
    pub anchor: NaiveDate,
    pub platform: String,
    pub targets: usize,
    pub match_percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayTable {
    pub rows: Vec<ReplayRow>,
    pub summaries: Vec<ReplaySummary>,
    pub skipped: Vec<SkippedAnchor>,
}

/// Retrains on the history up to each anchor, forecasts the following Δ
/// days with the known events, and compares week directions with what
/// happened. `platforms` pairs a label with that platform's feature series.
pub fn case_study_replay(
    platforms: &[(String, FeatureSeries)],
    events: &[KeyEvent],
    anchors: &[NaiveDate],
    config: &ModelConfig,
    window: usize,
) -> Result<ReplayTable> {
    let mut table = ReplayTable {
        rows: Vec::new(),
        summaries: Vec::new(),
        skipped: Vec::new(),
    };
    let delta = config.horizon;
    for &anchor in anchors {
        for (platform, series) in platforms {
            let skip = |reason: String| SkippedAnchor {
                anchor,
                reason: format!("{platform}: {reason}"),
            };
            let last_truth = anchor + Duration::days(delta as i64);
            if series.position(last_truth).is_none() {
                table
                    .skipped
                    .push(skip(format!("needs ground truth through {last_truth}")));
                continue;
            }
            let forecaster = match train(series, config, Some(anchor)) {
                Ok((f, _)) => f,
                Err(e @ Error::InsufficientHistory { .. }) => {
                    table.skipped.push(skip(e.to_string()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let params = match forecaster.predict_params(series, anchor, events) {
                Ok(p) => p,
                Err(e @ Error::InsufficientHistory { .. }) => {
                    table.skipped.push(skip(e.to_string()));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut matched = 0;
            let mut scored = 0;
            for (j, target) in forecaster.targets.iter().enumerate() {
                let col = series.manifest.index_of(target).expect("trained on this manifest");
                let Some(stats) = rolling_stats_at(series, col, anchor, window) else {
                    warn!(%anchor, %target, "no band at anchor; target skipped");
                    continue;
                };
                let truth: Option<Vec<f64>> = (1..=delta)
                    .map(|s| {
                        let r = &series.records[series.position(anchor + Duration::days(s as i64))?];
                        (!r.missing).then(|| r.values[col])
                    })
                    .collect();
                let Some(truth) = truth else {
                    warn!(%anchor, %target, "missing ground-truth day; target skipped");
                    continue;
                };
                let forecast: Vec<f64> = params[j].iter().map(|p| p.mu).collect();
                let gt = window_direction(&truth, stats).expect("non-empty horizon");
                let fc = window_direction(&forecast, stats).expect("non-empty horizon");
                scored += 1;
                matched += usize::from(gt == fc);
                table.rows.push(ReplayRow {
                    anchor,
                    platform: platform.clone(),
                    target: target.clone(),
                    ground_truth: gt,
                    forecast: fc,
                    matched: gt == fc,
                });
            }
            if scored > 0 {
                info!(%anchor, %platform, matched, scored, "replayed anchor");
                table.summaries.push(ReplaySummary {
                    anchor,
                    platform: platform.clone(),
                    targets: scored,
                    match_percent: 100.0 * matched as f64 / scored as f64,
                });
            }
        }
    }
    Ok(table)
}

/// Case-study CSV: anchor, platform, target, arrows for truth and forecast,
/// and whether they agree.
pub fn write_replay_csv(path: &Path, table: &ReplayTable) -> Result<()> {
    let csv_err = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(["anchor", "platform", "target", "ground_truth", "forecast", "match"])
        .map_err(csv_err)?;
    for r in &table.rows {
        w.write_record([
            r.anchor.to_string(),
            r.platform.clone(),
            r.target.clone(),
            r.ground_truth.arrow().to_string(),
            r.forecast.arrow().to_string(),
            if r.matched { "yes" } else { "no" }.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
