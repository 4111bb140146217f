//! Training loop: MI selection, standardization, AdamW with early stopping.

use std::sync::OnceLock;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use super::forecaster::{covariate_names, default_targets, event_categories, resolve, Forecaster};
use super::selection::select_features_mi;
use super::tape::{Matrix, Tape};
use super::windows::{build_window, validation_count, window_starts, InputColumns, Standardizer, Window};
use super::{DropoutStream, ModelConfig, ModelDims, ParamStore, Transformer};
use crate::features::FeatureSeries;
use crate::parallel::parallel_map;
use crate::{Error, Result};

pub const MIN_TRAINING_WINDOWS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    /// Mean NLL over the training windows, dropout off.
    pub train_nll: f64,
    pub validation_nll: Option<f64>,
    /// MSE of the step-1 location against truth, standardized units.
    pub train_mse_step1: f64,
    pub validation_mse_step1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectedFeature {
    pub name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub seed: u64,
    pub epochs: Vec<EpochMetrics>,
    /// Epoch whose parameters were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub train_windows: usize,
    pub validation_windows: usize,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub targets: Vec<String>,
    pub selected_features: Vec<SelectedFeature>,
    pub parameter_count: usize,
}

struct AdamW {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl AdamW {
    fn new(params: &ParamStore<f64>) -> Self {
        let zeros = || params.values.iter().map(|p| vec![0.0; p.data.len()]).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    fn update(&mut self, params: &mut ParamStore<f64>, grads: &[Option<Matrix<f64>>], cfg: &ModelConfig) {
        self.step += 1;
        let bc1 = 1.0 - cfg.beta1.powi(self.step);
        let bc2 = 1.0 - cfg.beta2.powi(self.step);
        for (i, p) in params.values.iter_mut().enumerate() {
            let g = grads[i].as_ref();
            for k in 0..p.data.len() {
                let gk = g.map_or(0.0, |g| g.data[k]);
                let m = &mut self.m[i][k];
                let v = &mut self.v[i][k];
                *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gk;
                *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gk * gk;
                let update = (*m / bc1) / ((*v / bc2).sqrt() + cfg.adam_eps) + cfg.weight_decay * p.data[k];
                p.data[k] -= cfg.learning_rate * update;
            }
        }
    }
}

fn window_loss(
    net: &Transformer,
    params: &ParamStore<f64>,
    w: &Window,
    dropout: Option<DropoutStream<'_>>,
) -> (Tape<f64>, super::tape::Var, super::tape::Var) {
    let mut tape = Tape::new();
    let out = net.forward(&mut tape, params, w.encoder.clone(), w.decoder.clone(), dropout);
    let loss = tape.student_nll(out, w.target.clone(), net.head_spec());
    (tape, out, loss)
}

/// (mean NLL, mean step-1 squared error) in eval mode.
fn evaluate(net: &Transformer, params: &ParamStore<f64>, windows: &[Window]) -> (f64, f64) {
    let results: Vec<(f64, f64)> = parallel_map(windows, |w| {
        let (tape, out, loss) = window_loss(net, params, w, None);
        let raw = tape.value(out).row(0);
        let t = w.target.cols;
        let se: f64 = (0..t).map(|j| (raw[j] - w.target.get(0, j)).powi(2)).sum::<f64>() / t as f64;
        (tape.value(loss).data[0], se)
    });
    let n = windows.len() as f64;
    let nll = results.iter().map(|r| r.0).sum::<f64>() / n;
    let mse = results.iter().map(|r| r.1).sum::<f64>() / n;
    (nll, mse)
}

/// Order-preserving map over scoped threads.
/// Trains on every window that ends on or before `last_day` (all windows
/// when `None`).
pub fn train(
    series: &FeatureSeries,
    config: &ModelConfig,
    last_day: Option<NaiveDate>,
) -> Result<(Forecaster, TrainReport)> {
    config.validate()?;
    let manifest = &series.manifest;
    let target_names = if config.targets.is_empty() {
        default_targets(manifest)
    } else {
        config.targets.clone()
    };
    let target_idx = resolve(manifest, &target_names)?;
    let covariates = covariate_names(manifest);
    let categories = event_categories(manifest);

    let span = config.context_len + config.horizon;
    let mut starts = window_starts(series, config.context_len, config.horizon)?;
    if let Some(day) = last_day {
        starts.retain(|&s| series.records[s + span - 1].date <= day);
    }
    let n_val = validation_count(starts.len(), config.validation_fraction);
    let n_train = starts.len() - n_val;
    if n_train < MIN_TRAINING_WINDOWS {
        return Err(Error::InsufficientHistory {
            required: MIN_TRAINING_WINDOWS + config.context_len + config.horizon - 1,
            available: n_train + span - 1,
        });
    }

    // Selection and scaling statistics come from days inside training windows.
    let train_lo = starts[0];
    let train_hi = starts[n_train - 1] + span;
    let train_days: Vec<&Vec<f64>> = series.records[train_lo..train_hi]
        .iter()
        .filter(|r| !r.missing)
        .map(|r| &r.values)
        .collect();
    let column = |c: usize| train_days.iter().map(|v| v[c]).collect::<Vec<f64>>();
    let feature_cols: Vec<Vec<f64>> = (0..manifest.len()).map(column).collect();
    let target_cols: Vec<Vec<f64>> = target_idx.iter().map(|&c| column(c)).collect();
    let k = config.selected_feature_count.min(manifest.len());
    let ranked = select_features_mi(&feature_cols, &target_cols, k)?;
    let selected_idx: Vec<usize> = ranked.iter().map(|s| s.index).collect();
    let selected_names: Vec<String> = selected_idx.iter().map(|&i| manifest.entries[i].name.clone()).collect();
    let feature_scaler = Standardizer::fit(
        &selected_idx
            .iter()
            .map(|&c| feature_cols[c].clone())
            .collect::<Vec<_>>(),
    );
    let target_scaler = Standardizer::fit(&target_cols);

    let cols = InputColumns {
        selected: selected_idx,
        targets: target_idx,
        covariates: resolve(manifest, &covariates)?,
        lags: config.lags.clone(),
    };
    let windows: Vec<Window> = starts
        .iter()
        .map(|&s| {
            build_window(
                series,
                s,
                config.context_len,
                config.horizon,
                &cols,
                &feature_scaler,
                &target_scaler,
            )
        })
        .collect();
    let (train_set, val_set) = windows.split_at(n_train);

    let dims = ModelDims {
        encoder_inputs: cols.selected.len() + cols.targets.len() * cols.lags.len(),
        decoder_inputs: cols.covariates.len(),
        targets: cols.targets.len(),
        context_len: config.context_len,
        horizon: config.horizon,
    };
    let (net, mut params) = Transformer::new::<f64>(dims, config, config.seed);
    let mut optimizer = AdamW::new(&params);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_da7a);
    info!(
        train = n_train,
        validation = n_val,
        parameters = params.scalar_count(),
        "training"
    );

    let mut order: Vec<usize> = (0..n_train).collect();
    let mut epochs = Vec::new();
    let mut best = (f64::INFINITY, 0usize, params.clone());
    let mut stopped_early = false;
    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            let mut acc: Vec<Option<Matrix<f64>>> = (0..params.len()).map(|_| None).collect();
            for &i in batch {
                let (tape, _, loss) = window_loss(&net, &params, &train_set[i], Some(DropoutStream { rng: &mut rng }));
                let value = tape.value(loss).data[0];
                if !value.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        detail: format!("non-finite loss {value} on window anchored {}", train_set[i].anchor),
                    });
                }
                for (a, g) in acc.iter_mut().zip(tape.backward(loss, params.len())) {
                    if let Some(mut g) = g {
                        let scale = 1.0 / batch.len() as f64;
                        g.data.iter_mut().for_each(|x| *x *= scale);
                        match a {
                            Some(existing) => existing.data.iter_mut().zip(&g.data).for_each(|(x, y)| *x += y),
                            None => *a = Some(g),
                        }
                    }
                }
            }
            optimizer.update(&mut params, &acc, config);
        }

        let (train_nll, train_mse) = evaluate(&net, &params, train_set);
        let (val_nll, val_mse) = if val_set.is_empty() {
            (None, None)
        } else {
            let (n, m) = evaluate(&net, &params, val_set);
            (Some(n), Some(m))
        };
        if !train_nll.is_finite() || val_nll.is_some_and(|v| !v.is_finite()) {
            return Err(Error::Diverged {
                epoch,
                detail: format!("train NLL {train_nll}, validation NLL {val_nll:?}"),
            });
        }
        debug!(epoch, train_nll, ?val_nll, train_mse, "epoch");
        epochs.push(EpochMetrics {
            epoch,
            train_nll,
            validation_nll: val_nll,
            train_mse_step1: train_mse,
            validation_mse_step1: val_mse,
        });
        let monitored = val_nll.unwrap_or(train_nll);
        if monitored < best.0 {
            best = (monitored, epoch, params.clone());
        } else if epoch - best.1 >= config.patience {
            stopped_early = true;
            break;
        }
    }
    let (_, best_epoch, best_params) = best;
    let params = if best_epoch == 0 { params } else { best_params };

    let report = TrainReport {
        seed: config.seed,
        epochs,
        best_epoch,
        stopped_early,
        train_windows: n_train,
        validation_windows: n_val,
        first_day: series.records[starts[0]].date,
        last_day: series.records[starts[starts.len() - 1] + span - 1].date,
        targets: target_names.clone(),
        selected_features: ranked
            .iter()
            .zip(&selected_names)
            .map(|(s, n)| SelectedFeature {
                name: n.clone(),
                score: s.score,
            })
            .collect(),
        parameter_count: params.scalar_count(),
    };
    let model = Forecaster {
        config: config.clone(),
        manifest_hash: manifest.hash(),
        selected_features: selected_names,
        targets: target_names,
        covariates,
        categories,
        feature_scaler,
        target_scaler,
        net,
        params,
        hash: OnceLock::new(),
    };
    Ok((model, report))
}
