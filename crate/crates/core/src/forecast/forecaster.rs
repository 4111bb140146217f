use std::sync::OnceLock;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::studentt::{StudentTParams, QUANTILE_LEVELS};
use super::tape::{head_transform, Matrix, Tape};
use super::windows::{encoder_matrix, InputColumns, Standardizer};
use super::{ModelConfig, ParamStore, Transformer};
use crate::adapters::emotion_labels;
use crate::features::{calendar_features, encode_key_events, FeatureBlock, FeatureManifest, FeatureSeries, KeyEvent};
use crate::{Error, Result};

pub const MODEL_VERSION: &str = "discourse-forecaster/1";

/// A trained model plus everything needed to feed it.
#[derive(Debug, Clone)]
pub struct Forecaster {
    pub config: ModelConfig,
    pub manifest_hash: String,
    pub selected_features: Vec<String>,
    pub targets: Vec<String>,
    /// Decoder covariate names: calendar then key-event columns.
    pub covariates: Vec<String>,
    /// Key-event categories (slugs) in encoding order.
    pub categories: Vec<String>,
    pub feature_scaler: Standardizer,
    pub target_scaler: Standardizer,
    pub net: Transformer,
    pub params: ParamStore<f64>,
    pub(crate) hash: OnceLock<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepForecast {
    pub step: usize,
    pub date: NaiveDate,
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    /// At levels 0.05, 0.25, 0.5, 0.75, 0.95.
    pub quantiles: Vec<f64>,
}

impl StepForecast {
    pub fn params(&self) -> StudentTParams {
        StudentTParams::new(self.mu, self.sigma, self.nu)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetForecast {
    pub target: String,
    pub steps: Vec<StepForecast>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub anchor_date: NaiveDate,
    pub horizon: usize,
    pub model_version: String,
    pub model_hash: String,
    pub manifest_hash: String,
    pub targets: Vec<TargetForecast>,
}

impl ForecastResult {
    pub fn target(&self, name: &str) -> Option<&TargetForecast> {
        self.targets.iter().find(|t| t.target == name)
    }
}

/// Emotion means and per-platform raw volumes.
pub fn default_targets(manifest: &FeatureManifest) -> Vec<String> {
    let mut t: Vec<String> = emotion_labels().iter().map(|l| format!("emotion:{l}:mean")).collect();
    t.extend(manifest.platforms().iter().map(|p| format!("volume:{p}:raw")));
    t
}

/// Calendar and key-event column names, in manifest order.
pub fn covariate_names(manifest: &FeatureManifest) -> Vec<String> {
    manifest
        .entries
        .iter()
        .filter(|e| matches!(e.block, FeatureBlock::Calendar | FeatureBlock::KeyEvent))
        .map(|e| e.name.clone())
        .collect()
}

/// Category slugs of the key-event block, in order.
pub fn event_categories(manifest: &FeatureManifest) -> Vec<String> {
    let mut cats: Vec<String> = Vec::new();
    for e in manifest.entries.iter().filter(|e| e.block == FeatureBlock::KeyEvent) {
        let slug = e.name.split(':').nth(1).unwrap_or_default().to_string();
        if cats.last() != Some(&slug) {
            cats.push(slug);
        }
    }
    cats
}

pub(crate) fn resolve(manifest: &FeatureManifest, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            manifest
                .index_of(n)
                .ok_or_else(|| Error::ManifestMismatch(format!("feature `{n}` not in manifest")))
        })
        .collect()
}

impl Forecaster {
    /// SHA-256 of the checkpoint encoding, hex.
    pub fn model_hash(&self) -> &str {
        self.hash
            .get_or_init(|| super::checkpoint::content_hash(&self.to_bytes()))
    }

    pub fn input_columns(&self, manifest: &FeatureManifest) -> Result<InputColumns> {
        Ok(InputColumns {
            selected: resolve(manifest, &self.selected_features)?,
            targets: resolve(manifest, &self.targets)?,
            covariates: resolve(manifest, &self.covariates)?,
            lags: self.config.lags.clone(),
        })
    }

    /// Calendar and key-event encodings for one future day.
    pub fn future_covariates(&self, date: NaiveDate, events: &[KeyEvent]) -> Result<Vec<f64>> {
        let mut v = calendar_features(date).encoded().to_vec();
        v.extend(encode_key_events(events, date, &self.categories)?.flatten());
        if v.len() != self.covariates.len() {
            return Err(Error::ManifestMismatch(format!(
                "{} covariates computed, model expects {}",
                v.len(),
                self.covariates.len()
            )));
        }
        Ok(v)
    }

    /// Record index of the first context day for a forecast made at `anchor`.
    pub fn context_start(&self, series: &FeatureSeries, anchor: NaiveDate) -> Result<usize> {
        let lc = self.config.context_len;
        let pos = series
            .position(anchor)
            .ok_or_else(|| Error::invalid(format!("anchor {anchor} is not in the series")))?;
        if pos + 1 < lc {
            return Err(Error::InsufficientHistory {
                required: lc,
                available: pos + 1,
            });
        }
        let start = pos + 1 - lc;
        for (i, r) in series.records[start..=pos].iter().enumerate() {
            let expected = anchor - chrono::Duration::days((lc - 1 - i) as i64);
            if r.missing || r.date != expected {
                return Err(Error::InsufficientHistory {
                    required: lc,
                    available: lc - 1 - i,
                });
            }
        }
        Ok(start)
    }

    /// Forecast for the `horizon` (≤ trained Δ) days after `anchor`, with
    /// `events` supplying the expected key events.
    pub fn predict(
        &self,
        series: &FeatureSeries,
        anchor: NaiveDate,
        events: &[KeyEvent],
        horizon: Option<usize>,
    ) -> Result<ForecastResult> {
        let delta = self.config.horizon;
        let horizon = horizon.unwrap_or(delta);
        if horizon == 0 || horizon > delta {
            return Err(Error::invalid(format!("horizon {horizon} outside 1..={delta}")));
        }
        let params = self.predict_params(series, anchor, events)?;
        let targets = self
            .targets
            .iter()
            .enumerate()
            .map(|(j, name)| TargetForecast {
                target: name.clone(),
                steps: (0..horizon)
                    .map(|s| {
                        let p = params[j][s];
                        StepForecast {
                            step: s + 1,
                            date: anchor + chrono::Duration::days(s as i64 + 1),
                            mu: p.mu,
                            sigma: p.sigma,
                            nu: p.nu,
                            quantiles: QUANTILE_LEVELS.iter().map(|&q| p.quantile(q)).collect(),
                        }
                    })
                    .collect(),
            })
            .collect();
        Ok(ForecastResult {
            anchor_date: anchor,
            horizon,
            model_version: MODEL_VERSION.into(),
            model_hash: self.model_hash().to_string(),
            manifest_hash: series.manifest_hash(),
            targets,
        })
    }

    /// Student-t parameters in original units for all Δ steps after
    /// `anchor`, `[target][step]`.
    pub fn predict_params(
        &self,
        series: &FeatureSeries,
        anchor: NaiveDate,
        events: &[KeyEvent],
    ) -> Result<Vec<Vec<StudentTParams>>> {
        let cols = self.input_columns(&series.manifest)?;
        let start = self.context_start(series, anchor)?;
        let encoder = encoder_matrix(
            series,
            start,
            self.config.context_len,
            &cols,
            &self.feature_scaler,
            &self.target_scaler,
        );
        let delta = self.config.horizon;
        let mut dec = Vec::with_capacity(delta * self.covariates.len());
        for s in 1..=delta {
            dec.extend(self.future_covariates(anchor + chrono::Duration::days(s as i64), events)?);
        }
        let decoder = Matrix::from_vec(delta, self.covariates.len(), dec);
        Ok(self.forecast_params(encoder, decoder))
    }

    /// Student-t parameters in original units, `[target][step]`.
    pub fn forecast_params(&self, encoder: Matrix<f64>, decoder: Matrix<f64>) -> Vec<Vec<StudentTParams>> {
        let mut tape = Tape::new();
        let out = self.net.forward(&mut tape, &self.params, encoder, decoder, None);
        let raw = tape.value(out);
        let head = self.net.head_spec::<f64>();
        let t = head.targets;
        (0..t)
            .map(|j| {
                (0..raw.rows)
                    .map(|s| {
                        let row = raw.row(s);
                        let (mu, sigma, nu) = head_transform(row[j], row[t + j], row[2 * t + j], &head);
                        StudentTParams::new(self.target_scaler.invert(j, mu), sigma * self.target_scaler.std[j], nu)
                    })
                    .collect()
            })
            .collect()
    }
}
