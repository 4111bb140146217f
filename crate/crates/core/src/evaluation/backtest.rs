use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use tracing::info;

use super::direction::{
    classify_direction, direction_probabilities, rolling_stats, ClassScores, Direction, RollingStats, DIRECTIONS,
};
use super::metrics::{auc_ovr, compute_metrics, LabelMetrics};
use crate::features::{FeatureSeries, KeyEvent};
use crate::forecast::{Forecaster, StudentTParams};
use crate::parallel::parallel_map;
use crate::{Error, Result};

/// Band statistics over the `window` days ending at `at`, or `None`
/// (Unscored) when any of those days is absent or missing.
pub fn rolling_stats_at(series: &FeatureSeries, column: usize, at: NaiveDate, window: usize) -> Option<RollingStats> {
    if window == 0 {
        return None;
    }
    let mut values = Vec::with_capacity(window);
    for k in (0..window).rev() {
        let r = &series.records[series.position(at - Duration::days(k as i64))?];
        if r.missing {
            return None;
        }
        values.push(r.values[column]);
    }
    rolling_stats(&values)
}

fn value_at(series: &FeatureSeries, column: usize, day: NaiveDate) -> Option<f64> {
    let r = &series.records[series.position(day)?];
    (!r.missing).then(|| r.values[column])
}

/// Persistence calls: the value at each anchor, classified against that
/// anchor's band, stands in for the value `delta` days later. Returns
/// (target day, call) for every anchor with a band.
pub fn persistence_baseline(
    series: &FeatureSeries,
    target: &str,
    delta: usize,
    window: usize,
) -> Result<Vec<(NaiveDate, Direction)>> {
    let col = series
        .manifest
        .index_of(target)
        .ok_or_else(|| Error::ManifestMismatch(format!("target `{target}` not in manifest")))?;
    Ok(series
        .dates()
        .filter_map(|t| {
            let stats = rolling_stats_at(series, col, t, window)?;
            let today = value_at(series, col, t)?;
            Some((t + Duration::days(delta as i64), classify_direction(today, stats)))
        })
        .collect())
}

/// One forecast distribution: `target` at `anchor + step` days.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub anchor: NaiveDate,
    pub target: String,
    pub step: usize,
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
}

impl PredictionRecord {
    pub fn params(&self) -> StudentTParams {
        StudentTParams::new(self.mu, self.sigma, self.nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedAnchor {
    pub anchor: NaiveDate,
    pub reason: String,
}

/// Forecasts from every anchor whose context window is complete. Known
/// events condition the decoder exactly as they would have at the time.
pub fn forecast_anchors(
    forecaster: &Forecaster,
    series: &FeatureSeries,
    events: &[KeyEvent],
    anchors: &[NaiveDate],
) -> Result<(Vec<PredictionRecord>, Vec<SkippedAnchor>)> {
    let results = parallel_map(anchors, |&a| forecaster.predict_params(series, a, events));
    let mut out = Vec::new();
    let mut skipped = Vec::new();
    for (&anchor, r) in anchors.iter().zip(results) {
        match r {
            Ok(params) => {
                for (target, steps) in forecaster.targets.iter().zip(params) {
                    for (s, p) in steps.into_iter().enumerate() {
                        out.push(PredictionRecord {
                            anchor,
                            target: target.clone(),
                            step: s + 1,
                            mu: p.mu,
                            sigma: p.sigma,
                            nu: p.nu,
                        });
                    }
                }
            }
            Err(e @ (Error::InsufficientHistory { .. } | Error::InvalidInput(_))) => skipped.push(SkippedAnchor {
                anchor,
                reason: e.to_string(),
            }),
            Err(e) => return Err(e),
        }
    }
    Ok((out, skipped))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    let mut offset = 0u64;
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line).map_err(|e| Error::Corrupt {
                path: path.to_path_buf(),
                offset,
                reason: e.to_string(),
            })?);
        }
        offset += line.len() as u64 + 1;
    }
    Ok(out)
}

pub fn write_predictions(path: &Path, records: &[PredictionRecord]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    fn of(values: &[f64]) -> Option<Self> {
        rolling_stats(values).map(|s| Self {
            mean: s.mean,
            std: s.std,
        })
    }
}

/// One target at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetRow {
    pub target: String,
    pub scored: usize,
    pub unscored: usize,
    pub degenerate_bands: usize,
    /// Argmax of the class probabilities; the primary call.
    pub model: LabelMetrics,
    pub auc: Option<f64>,
    /// The forecast location classified against the band.
    pub location_call: LabelMetrics,
    pub persistence: LabelMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AverageRow {
    pub macro_precision: MeanStd,
    pub macro_recall: MeanStd,
    pub macro_f1: MeanStd,
    pub accuracy: MeanStd,
    pub auc: Option<MeanStd>,
    pub persistence_macro_f1: MeanStd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonReport {
    pub horizon: usize,
    pub rows: Vec<TargetRow>,
    /// Targets with no scored day at this horizon.
    pub unscored_targets: Vec<String>,
    pub average: Option<AverageRow>,
}

impl HorizonReport {
    pub fn row(&self, target: &str) -> Option<&TargetRow> {
        self.rows.iter().find(|r| r.target == target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model_hash: Option<String>,
    pub manifest_hash: String,
    pub rolling_window: usize,
    pub first_anchor: Option<NaiveDate>,
    pub last_anchor: Option<NaiveDate>,
    pub anchors: usize,
    pub skipped_anchors: Vec<SkippedAnchor>,
    pub horizons: Vec<HorizonReport>,
}

impl MetricsReport {
    pub fn horizon(&self, delta: usize) -> Option<&HorizonReport> {
        self.horizons.iter().find(|h| h.horizon == delta)
    }
}

/// One scored forecast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPoint {
    pub anchor: NaiveDate,
    pub target: String,
    pub step: usize,
    pub truth: Direction,
    pub scores: ClassScores,
    pub predicted: Direction,
    pub location_call: Direction,
    pub persistence: Direction,
}

/// Unscored forecasts per (target, step).
pub type UnscoredCounts = BTreeMap<(String, usize), usize>;

/// Labels every prediction whose truth and band are available; returns the
/// scored points and the unscored count per (target, step).
pub fn score_points(
    series: &FeatureSeries,
    predictions: &[PredictionRecord],
    window: usize,
) -> Result<(Vec<ScoredPoint>, UnscoredCounts)> {
    let mut columns: BTreeMap<&str, usize> = BTreeMap::new();
    for p in predictions {
        if !columns.contains_key(p.target.as_str()) {
            let idx = series
                .manifest
                .index_of(&p.target)
                .ok_or_else(|| Error::ManifestMismatch(format!("target `{}` not in manifest", p.target)))?;
            columns.insert(&p.target, idx);
        }
    }
    let mut points = Vec::new();
    let mut unscored = UnscoredCounts::new();
    for p in predictions {
        let col = columns[p.target.as_str()];
        let stats = rolling_stats_at(series, col, p.anchor, window);
        let truth = value_at(series, col, p.anchor + Duration::days(p.step as i64));
        let today = value_at(series, col, p.anchor);
        let (Some(stats), Some(truth), Some(today)) = (stats, truth, today) else {
            *unscored.entry((p.target.clone(), p.step)).or_default() += 1;
            continue;
        };
        let params = p.params();
        let scores = direction_probabilities(&params, stats);
        points.push(ScoredPoint {
            anchor: p.anchor,
            target: p.target.clone(),
            step: p.step,
            truth: classify_direction(truth, stats),
            predicted: scores.label(),
            scores,
            location_call: classify_direction(params.mu, stats),
            persistence: classify_direction(today, stats),
        });
    }
    Ok((points, unscored))
}

/// Per-horizon metrics over `predictions`, one row per target. Errors when a
/// requested horizon exceeds the steps present.
pub fn horizon_sweep(
    series: &FeatureSeries,
    predictions: &[PredictionRecord],
    horizons: &[usize],
    window: usize,
) -> Result<MetricsReport> {
    let max_step = predictions.iter().map(|p| p.step).max().unwrap_or(0);
    if let Some(&h) = horizons.iter().find(|&&h| h == 0 || h > max_step) {
        return Err(Error::invalid(format!(
            "horizon {h} outside the forecast steps 1..={max_step}"
        )));
    }
    let (points, unscored) = score_points(series, predictions, window)?;
    let mut targets: Vec<&str> = Vec::new();
    for p in predictions {
        if !targets.contains(&p.target.as_str()) {
            targets.push(&p.target);
        }
    }
    let mut anchors: Vec<NaiveDate> = predictions.iter().map(|p| p.anchor).collect();
    anchors.sort();
    anchors.dedup();

    let reports = parallel_map(horizons, |&h| -> Result<HorizonReport> {
        let mut rows = Vec::new();
        let mut unscored_targets = Vec::new();
        for &t in &targets {
            let pts: Vec<&ScoredPoint> = points.iter().filter(|p| p.step == h && p.target == t).collect();
            let skipped = unscored.get(&(t.to_string(), h)).copied().unwrap_or(0);
            if pts.is_empty() {
                unscored_targets.push(t.to_string());
                continue;
            }
            let truth: Vec<Direction> = pts.iter().map(|p| p.truth).collect();
            let labels = |f: fn(&ScoredPoint) -> Direction| pts.iter().map(|&p| f(p)).collect::<Vec<_>>();
            let scores: Vec<ClassScores> = pts.iter().map(|p| p.scores).collect();
            rows.push(TargetRow {
                target: t.to_string(),
                scored: pts.len(),
                unscored: skipped,
                degenerate_bands: pts.iter().filter(|p| p.scores.degenerate_band).count(),
                model: compute_metrics(&labels(|p| p.predicted), &truth)?,
                auc: auc_ovr(&scores, &truth).ok().map(|a| a.macro_auc),
                location_call: compute_metrics(&labels(|p| p.location_call), &truth)?,
                persistence: compute_metrics(&labels(|p| p.persistence), &truth)?,
            });
        }
        let col = |f: fn(&TargetRow) -> f64| MeanStd::of(&rows.iter().map(f).collect::<Vec<_>>());
        let aucs: Vec<f64> = rows.iter().filter_map(|r| r.auc).collect();
        let average = col(|r| r.model.macro_f1).map(|macro_f1| AverageRow {
            macro_precision: col(|r| r.model.macro_precision).expect("non-empty"),
            macro_recall: col(|r| r.model.macro_recall).expect("non-empty"),
            macro_f1,
            accuracy: col(|r| r.model.accuracy).expect("non-empty"),
            auc: MeanStd::of(&aucs),
            persistence_macro_f1: col(|r| r.persistence.macro_f1).expect("non-empty"),
        });
        Ok(HorizonReport {
            horizon: h,
            rows,
            unscored_targets,
            average,
        })
    });
    let horizons = reports.into_iter().collect::<Result<Vec<_>>>()?;
    info!(points = points.len(), horizons = horizons.len(), "scored forecasts");
    Ok(MetricsReport {
        model_hash: None,
        manifest_hash: series.manifest_hash(),
        rolling_window: window,
        first_anchor: anchors.first().copied(),
        last_anchor: anchors.last().copied(),
        anchors: anchors.len(),
        skipped_anchors: Vec::new(),
        horizons,
    })
}

/// Backtests `forecaster` from every day in `[first_anchor, last_anchor]` at
/// horizons 1..=Δ.
pub fn evaluate_forecaster(
    forecaster: &Forecaster,
    series: &FeatureSeries,
    events: &[KeyEvent],
    first_anchor: NaiveDate,
    last_anchor: NaiveDate,
    window: usize,
) -> Result<MetricsReport> {
    let anchors: Vec<NaiveDate> = first_anchor.iter_days().take_while(|d| *d <= last_anchor).collect();
    let (predictions, skipped) = forecast_anchors(forecaster, series, events, &anchors)?;
    if predictions.is_empty() {
        return Err(Error::InsufficientHistory {
            required: forecaster.config.context_len,
            available: 0,
        });
    }
    let horizons: Vec<usize> = (1..=forecaster.config.horizon).collect();
    let mut report = horizon_sweep(series, &predictions, &horizons, window)?;
    report.model_hash = Some(forecaster.model_hash().to_string());
    report.skipped_anchors = skipped;
    Ok(report)
}

/// Serializes `report` as pretty JSON with a trailing newline.
pub fn write_metrics_report(path: &Path, report: &MetricsReport) -> Result<()> {
    let text = serde_json::to_string_pretty(report)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Writes one CSV per class: precision by horizon (rows) and target
/// (columns), plus the persistence precision.
pub fn write_trend_tables(dir: &Path, report: &MetricsReport) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut targets: Vec<&str> = Vec::new();
    for h in &report.horizons {
        for r in &h.rows {
            if !targets.contains(&r.target.as_str()) {
                targets.push(&r.target);
            }
        }
    }
    let mut paths = Vec::new();
    for d in DIRECTIONS {
        let path = dir.join(format!("precision_{d}.csv"));
        let csv_err = |e: csv::Error| Error::invalid(format!("{}: {e}", path.display()));
        let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
        let mut header = vec!["horizon".to_string()];
        for t in &targets {
            header.push(t.to_string());
            header.push(format!("{t} (persistence)"));
        }
        w.write_record(&header).map_err(csv_err)?;
        for h in &report.horizons {
            let mut row = vec![h.horizon.to_string()];
            for t in &targets {
                match h.row(t) {
                    Some(r) => {
                        row.push(r.model.class(d).precision.to_string());
                        row.push(r.persistence.class(d).precision.to_string());
                    }
                    None => row.extend([String::new(), String::new()]),
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::io(&path, e))?;
        paths.push(path);
    }
    Ok(paths)
}
