//! Forecast skill on a held-out synthetic span: macro F1 at δ=1 against the
//! persistence baseline, and detection of injected post-event spikes.

use std::time::Instant;

use chrono::Duration;
use discourse_core::config::FeatureConfig;
use discourse_core::evaluation::{evaluate_forecaster, forecast_anchors, score_points, Direction};
use discourse_core::forecast::{train, ModelConfig};
use discourse_core::synth::{generate, SynthConfig};

use crate::{secs, verdict};

const DAYS: usize = 360;
const TRAIN_DAYS: i64 = 270;
const EPOCHS: usize = 80;
const SEED: u64 = 7;
const ROLLING_WINDOW: usize = 28;
const MIN_F1_GAIN: f64 = 0.05;
const MIN_DETECTION: f64 = 0.70;
const BUDGET_SECS: f64 = 300.0;

#[test]
fn forecast_beats_persistence_and_detects_events() {
    let timer = Instant::now();
    let sc = SynthConfig {
        days: DAYS,
        seed: SEED,
        ..SynthConfig::default()
    };
    let synth = generate(&sc).unwrap();
    let out = synth.featurize(&FeatureConfig::default()).unwrap();
    let series = &out.series;

    // Event-lifted emotions plus volume on both platforms.
    let mut targets: Vec<String> = sc
        .opposing_emotions
        .iter()
        .chain(&sc.supporting_emotions)
        .map(|e| format!("emotion:{e}:mean"))
        .collect();
    targets.extend(sc.platforms.iter().map(|p| format!("volume:{p}:raw")));
    let cfg = ModelConfig {
        epochs: EPOCHS,
        targets: targets.clone(),
        ..ModelConfig::default()
    };
    let split = synth.truth.first_day + Duration::days(TRAIN_DAYS);
    let last_anchor = synth.truth.last_day - Duration::days(1);
    let (forecaster, report) = train(series, &cfg, Some(split)).unwrap();

    let metrics = evaluate_forecaster(&forecaster, series, &synth.events, split, last_anchor, ROLLING_WINDOW).unwrap();
    let average = metrics.horizon(1).and_then(|h| h.average.clone()).unwrap();
    let model_f1 = average.macro_f1.mean;
    let persistence_f1 = average.persistence_macro_f1.mean;

    // A step-1 forecast anchored the day before a held-out event, on a target
    // the event lifts, whose truth is Increase.
    let anchors: Vec<_> = split.iter_days().take_while(|d| *d <= last_anchor).collect();
    let (predictions, _) = forecast_anchors(&forecaster, series, &synth.events, &anchors).unwrap();
    let (points, _) = score_points(series, &predictions, ROLLING_WINDOW).unwrap();
    let (mut detected, mut spikes) = (0usize, 0usize);
    let held_out: Vec<_> = synth.truth.events.iter().filter(|e| e.date > split).collect();
    for event in &held_out {
        let lifted = &synth.truth.lifted_emotions[&event.date];
        let sensitive = |target: &str| {
            target.starts_with("volume:") || lifted.iter().any(|l| target == format!("emotion:{l}:mean"))
        };
        for p in points.iter().filter(|p| {
            p.step == 1
                && p.anchor + Duration::days(1) == event.date
                && p.truth == Direction::Increase
                && sensitive(&p.target)
        }) {
            spikes += 1;
            if p.predicted == Direction::Increase {
                detected += 1;
            }
        }
    }
    let detection = if spikes == 0 {
        0.0
    } else {
        detected as f64 / spikes as f64
    };
    let elapsed = timer.elapsed();

    let passed =
        model_f1 >= persistence_f1 + MIN_F1_GAIN && detection >= MIN_DETECTION && elapsed.as_secs_f64() < BUDGET_SECS;
    verdict(
        "forecast skill",
        passed,
        format!(
            "{DAYS}-day corpus, train through {split} ({} epochs kept best {}), {} held-out anchors, {} targets: \
             macro F1@1 {model_f1:.3} vs persistence {persistence_f1:.3} (gain {:+.3}, need {MIN_F1_GAIN:+}); \
             detected {detected}/{spikes} post-event Increase days from {} held-out events = {:.0}% (need {:.0}%), {} [budget {BUDGET_SECS}s]",
            report.epochs.len(),
            report.best_epoch,
            metrics.anchors,
            targets.len(),
            model_f1 - persistence_f1,
            held_out.len(),
            100.0 * detection,
            100.0 * MIN_DETECTION,
            secs(elapsed)
        ),
    );
}
