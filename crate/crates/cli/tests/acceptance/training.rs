//! Training on the seeded 120-day synthetic corpus lowers train NLL and
//! step-1 MSE between the first and tenth epochs.

use std::time::Instant;

use discourse_core::config::FeatureConfig;
use discourse_core::forecast::{train, ModelConfig};
use discourse_core::synth::{generate, SynthConfig};

use crate::{secs, verdict};

const EPOCHS: usize = 10;
const BUDGET_SECS: f64 = 300.0;

#[test]
fn training_loss_decreases() {
    let timer = Instant::now();
    let synth = generate(&SynthConfig::default()).unwrap();
    let out = synth.featurize(&FeatureConfig::default()).unwrap();
    let cfg = ModelConfig {
        epochs: EPOCHS,
        ..ModelConfig::default()
    };
    let (_, report) = train(&out.series, &cfg, None).unwrap();
    let elapsed = timer.elapsed();

    let first = report.epochs.first().unwrap();
    let tenth = report.epochs.iter().find(|e| e.epoch == EPOCHS);
    let (passed, detail) = match tenth {
        Some(last) => (
            last.train_nll < first.train_nll
                && last.train_mse_step1 < first.train_mse_step1
                && elapsed.as_secs_f64() < BUDGET_SECS,
            format!(
                "{} days, {} events, {} targets, {} train windows: NLL {:.4} -> {:.4}, MSE@1 {:.4} -> {:.4} (epoch {} -> {EPOCHS}), {} [budget {BUDGET_SECS}s]",
                out.series.records.len(),
                synth.events.len(),
                report.targets.len(),
                report.train_windows,
                first.train_nll,
                last.train_nll,
                first.train_mse_step1,
                last.train_mse_step1,
                first.epoch,
                secs(elapsed)
            ),
        ),
        None => (false, format!("training stopped after {} epochs", report.epochs.len())),
    };
    verdict("training dynamics", passed, detail);
}
