use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use chrono::{Duration, NaiveDate};
use discourse_core::config::{Config, MovementConfig};
use discourse_core::corpus::{ingest_documents, write_documents, Corpus, IngestFormat};
use discourse_core::evaluation::{
    case_study_replay, evaluate_forecaster, horizon_sweep, read_predictions, write_metrics_report, write_replay_csv,
    write_trend_tables, MetricsReport,
};
use discourse_core::features::{read_event_table, FeatureSeries};
use discourse_core::forecast::{train, ModelConfig, TrainReport};
use discourse_core::pipeline::{featurize, layer_corpus, write_analysis, Adapters, LayeredCorpus};
use discourse_core::store::{write_atomic, MovementStore};
use discourse_core::synth::{generate, SynthConfig};
use serde_json::{json, Value};
use tracing::info;

use crate::exit::{CliError, CONFIG, DATA, NOT_READY};
use crate::{Command, EvalArgs, Global};

type CmdResult = Result<Value, CliError>;

struct Ctx {
    config: Config,
    movement: MovementConfig,
    store: MovementStore,
}

fn absolute(p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        std::env::current_dir()
            .map(|d| d.join(p))
            .unwrap_or_else(|_| p.to_path_buf())
    }
}

fn load_config(global: &Global) -> Result<Config, CliError> {
    let mut config = Config::load(&global.config)
        .with_context(|| format!("loading config {}", global.config.display()))
        .map_err(|e| CliError::new(CONFIG, e))?;
    if let Some(dir) = &global.data_dir {
        config.data_dir = absolute(dir);
    }
    Ok(config)
}

fn context(global: &Global) -> Result<Ctx, CliError> {
    let config = load_config(global)?;
    let movement = match &global.movement {
        Some(id) => config.movement(id).cloned(),
        None => config.movements.first().cloned(),
    }
    .ok_or_else(|| {
        CliError::new(
            CONFIG,
            anyhow!(
                "movement `{}` is not configured",
                global.movement.as_deref().unwrap_or("<first>")
            ),
        )
    })?;
    let store = MovementStore::new(&config.data_path(), &movement.id);
    Ok(Ctx {
        config,
        movement,
        store,
    })
}

fn not_ready(what: &str, stage: &str) -> CliError {
    CliError::new(NOT_READY, anyhow!("{what} missing; run `discourse {stage}` first"))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing {}", path.display()))
        .map_err(|e| CliError::new(DATA, e))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serializable") + "\n";
    Ok(write_atomic(path, text.as_bytes())?)
}

fn stored_corpus(store: &MovementStore) -> Result<Corpus, CliError> {
    let path = store.documents();
    if !path.exists() {
        return Err(not_ready("ingested corpus", "ingest"));
    }
    Ok(ingest_documents(&path, IngestFormat::JsonLines)?)
}

fn stored_series(store: &MovementStore) -> Result<FeatureSeries, CliError> {
    store
        .read_series()?
        .ok_or_else(|| not_ready("feature store", "featurize"))
}

pub fn run(global: &Global, command: Command) -> CmdResult {
    match command {
        Command::Ingest { input, format } => ingest(global, &input, &format),
        Command::Layer => layer(global),
        Command::Featurize { events } => featurize_cmd(global, events.as_deref()),
        Command::Train {
            seed,
            epochs,
            horizon,
            window,
            last_day,
        } => train_cmd(global, seed, epochs, horizon, window, last_day),
        Command::Evaluate(args) => evaluate(global, &args, false),
        Command::Sweep(args) => evaluate(global, &args, true),
        Command::Replay {
            anchors,
            platforms,
            window,
            seed,
            epochs,
        } => replay(global, &anchors, &platforms, window, seed, epochs),
        Command::Synth { out, days, seed, start } => synth(&out, days, seed, start),
        Command::Serve { host, port } => serve(global, host, port),
    }
}

fn ingest(global: &Global, input: &Path, format: &str) -> CmdResult {
    let ctx = context(global)?;
    let format: IngestFormat = format.parse()?;
    let corpus = ingest_documents(input, format)?;
    ctx.store.ensure()?;
    write_documents(&ctx.store.documents(), corpus.documents())?;
    Ok(json!({
        "command": "ingest",
        "movement": ctx.movement.id,
        "documents": corpus.len(),
        "platforms": corpus.platform_counts(),
        "issues": corpus.issues().len(),
        "first_issues": corpus.issues().iter().take(10).collect::<Vec<_>>(),
    }))
}

fn adapters(config: &Config) -> Result<Adapters, CliError> {
    Ok(Adapters::from_config(&config.features.adapters, &config.base_dir)?)
}

fn layer(global: &Global) -> CmdResult {
    let ctx = context(global)?;
    let corpus = stored_corpus(&ctx.store)?;
    let adapters = adapters(&ctx.config)?;
    let layered = layer_corpus(&corpus, &ctx.movement, adapters.extractor.as_ref())?;
    write_json(&ctx.store.layered(), &layered)?;
    let max_layer = ctx.movement.thresholds.len();
    Ok(json!({
        "command": "layer",
        "movement": ctx.movement.id,
        "documents": corpus.len(),
        "vocabulary": layered.vocabulary.iter().map(|k| &k.keyword).collect::<Vec<_>>(),
        "layer_counts": layered.layer_counts(max_layer),
        "excluded": corpus.len() - layered.assignments.len(),
    }))
}

fn featurize_cmd(global: &Global, events: Option<&Path>) -> CmdResult {
    let ctx = context(global)?;
    if let Some(path) = events {
        let table = read_event_table(path)?;
        for e in &table {
            e.validate(&ctx.movement.topic_names())?;
        }
        ctx.store.write_events(&table)?;
    }
    let corpus = stored_corpus(&ctx.store)?;
    if !ctx.store.layered().exists() {
        return Err(not_ready("layer assignments", "layer"));
    }
    let layered: LayeredCorpus = read_json(&ctx.store.layered())?;
    if layered.keyphrases.len() != corpus.len() {
        return Err(CliError::new(
            DATA,
            anyhow!(
                "layer assignments cover {} documents, corpus has {}; rerun `discourse layer`",
                layered.keyphrases.len(),
                corpus.len()
            ),
        ));
    }
    let events = ctx.store.read_events()?;
    let adapters = adapters(&ctx.config)?;
    let out = featurize(
        &corpus,
        &layered,
        &ctx.movement,
        &ctx.config.features,
        &adapters,
        &events,
    )?;
    out.series.write_jsonl(&ctx.store.features())?;
    out.series.manifest.write(&ctx.store.root().join("manifest.json"))?;
    write_analysis(&ctx.store.analysis(), &out.analysis)?;
    Ok(json!({
        "command": "featurize",
        "movement": ctx.movement.id,
        "events": events.len(),
        "summary": out.summary,
    }))
}

fn model_config(
    base: &ModelConfig,
    seed: Option<u64>,
    epochs: Option<usize>,
    horizon: Option<usize>,
    window: Option<usize>,
) -> ModelConfig {
    let mut cfg = base.clone();
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(e) = epochs {
        cfg.epochs = e;
    }
    if let Some(h) = horizon {
        cfg.horizon = h;
    }
    if let Some(w) = window {
        cfg.context_len = w;
    }
    cfg
}

fn train_cmd(
    global: &Global,
    seed: Option<u64>,
    epochs: Option<usize>,
    horizon: Option<usize>,
    window: Option<usize>,
    last_day: Option<NaiveDate>,
) -> CmdResult {
    let ctx = context(global)?;
    let series = stored_series(&ctx.store)?;
    let cfg = model_config(&ctx.config.model, seed, epochs, horizon, window);
    let (model, report) = train(&series, &cfg, last_day)?;
    let path = ctx.store.save_model(&model)?;
    std::fs::create_dir_all(ctx.store.reports_dir()).with_context(|| "creating reports directory")?;
    write_json(&ctx.store.train_report(), &report)?;
    let last = report.epochs.last();
    Ok(json!({
        "command": "train",
        "movement": ctx.movement.id,
        "model_hash": model.model_hash(),
        "checkpoint": path,
        "seed": report.seed,
        "epochs_run": report.epochs.len(),
        "best_epoch": report.best_epoch,
        "stopped_early": report.stopped_early,
        "train_windows": report.train_windows,
        "validation_windows": report.validation_windows,
        "final_train_nll": last.map(|e| e.train_nll),
        "final_validation_nll": last.and_then(|e| e.validation_nll),
        "selected_features": report.selected_features.len(),
        "parameter_count": report.parameter_count,
    }))
}

fn horizon_summary(report: &MetricsReport) -> Vec<Value> {
    report
        .horizons
        .iter()
        .map(|h| {
            json!({
                "horizon": h.horizon,
                "targets": h.rows.len(),
                "macro_f1": h.average.as_ref().map(|a| a.macro_f1.mean),
                "accuracy": h.average.as_ref().map(|a| a.accuracy.mean),
                "auc": h.average.as_ref().and_then(|a| a.auc.map(|x| x.mean)),
                "persistence_macro_f1": h.average.as_ref().map(|a| a.persistence_macro_f1.mean),
            })
        })
        .collect()
}

fn evaluate(global: &Global, args: &EvalArgs, sweep: bool) -> CmdResult {
    let ctx = context(global)?;
    let series = stored_series(&ctx.store)?;
    let window = args.window.unwrap_or(ctx.config.evaluation.rolling_window);
    let mut report = if let Some(path) = &args.predictions {
        let preds = read_predictions(path)?;
        let max_step = preds.iter().map(|p| p.step).max().unwrap_or(0);
        let horizons: Vec<usize> = match args.horizon {
            Some(h) => vec![h],
            None => (1..=max_step).collect(),
        };
        horizon_sweep(&series, &preds, &horizons, window)?
    } else {
        let model = ctx
            .store
            .load_model()?
            .ok_or_else(|| not_ready("trained model", "train"))?;
        if model.manifest_hash != series.manifest_hash() {
            return Err(discourse_core::Error::ManifestMismatch(
                "checkpoint and stored feature series were built from different manifests".into(),
            )
            .into());
        }
        let delta = model.config.horizon;
        if let Some(h) = args.horizon {
            if h == 0 || h > delta {
                return Err(CliError::new(
                    DATA,
                    anyhow!("horizon {h} outside the trained 1..={delta}"),
                ));
            }
        }
        let last_stored = series.records.last().expect("validated non-empty").date;
        let from = match args.from {
            Some(d) => d,
            None => {
                let trained: Option<TrainReport> = ctx
                    .store
                    .train_report()
                    .exists()
                    .then(|| read_json(&ctx.store.train_report()))
                    .transpose()?;
                match trained {
                    Some(r) if r.last_day < last_stored => r.last_day,
                    _ => series.records[0].date + Duration::days(model.config.context_len as i64 - 1),
                }
            }
        };
        let to = args.to.unwrap_or(last_stored - Duration::days(1));
        let events = ctx.store.read_events()?;
        let mut report = evaluate_forecaster(&model, &series, &events, from, to, window)?;
        if let Some(h) = args.horizon {
            report.horizons.retain(|r| r.horizon == h);
        }
        report
    };
    report.horizons.sort_by_key(|h| h.horizon);
    let out = args.out.clone().unwrap_or_else(|| ctx.store.metrics_report());
    if let Some(dir) = out.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    write_metrics_report(&out, &report)?;
    let trends = if sweep {
        write_trend_tables(&ctx.store.reports_dir().join("trends"), &report)?
    } else {
        Vec::new()
    };
    info!(report = %out.display(), "evaluation written");
    Ok(json!({
        "command": if sweep { "sweep" } else { "evaluate" },
        "movement": ctx.movement.id,
        "report": out,
        "trend_tables": trends,
        "model_hash": report.model_hash,
        "anchors": report.anchors,
        "skipped_anchors": report.skipped_anchors.len(),
        "horizons": horizon_summary(&report),
    }))
}

fn replay(
    global: &Global,
    anchors: &[NaiveDate],
    platforms: &[String],
    window: Option<usize>,
    seed: Option<u64>,
    epochs: Option<usize>,
) -> CmdResult {
    let ctx = context(global)?;
    let corpus = stored_corpus(&ctx.store)?;
    let adapters = adapters(&ctx.config)?;
    let events = ctx.store.read_events()?;
    let platforms: Vec<String> = if platforms.is_empty() {
        ctx.movement.platforms.clone()
    } else {
        platforms.to_vec()
    };
    let mut per_platform = Vec::new();
    for p in &platforms {
        if !ctx.movement.platforms.contains(p) {
            return Err(CliError::new(
                CONFIG,
                anyhow!("platform `{p}` is not configured for this movement"),
            ));
        }
        let filtered = corpus.filter_platform(p);
        let mut movement = ctx.movement.clone();
        movement.platforms = vec![p.clone()];
        let layered = layer_corpus(&filtered, &movement, adapters.extractor.as_ref())?;
        let out = featurize(&filtered, &layered, &movement, &ctx.config.features, &adapters, &events)?;
        per_platform.push((p.clone(), out.series));
    }
    let cfg = model_config(&ctx.config.model, seed, epochs, None, None);
    let window = window.unwrap_or(ctx.config.evaluation.rolling_window);
    let table = case_study_replay(&per_platform, &events, anchors, &cfg, window)?;
    std::fs::create_dir_all(ctx.store.reports_dir()).with_context(|| "creating reports directory")?;
    let csv = ctx.store.reports_dir().join("replay.csv");
    write_replay_csv(&csv, &table)?;
    write_json(&ctx.store.reports_dir().join("replay.json"), &table)?;
    Ok(json!({
        "command": "replay",
        "movement": ctx.movement.id,
        "table": csv,
        "summaries": table.summaries,
        "skipped": table.skipped,
    }))
}

fn synth(out: &Path, days: usize, seed: u64, start: Option<NaiveDate>) -> CmdResult {
    let mut cfg = SynthConfig {
        days,
        seed,
        ..SynthConfig::default()
    };
    if let Some(s) = start {
        cfg.start = s;
    }
    let corpus = generate(&cfg)?;
    corpus.write(out)?;
    Ok(json!({
        "command": "synth",
        "out": out,
        "seed": seed,
        "documents": corpus.documents.len(),
        "events": corpus.events.len(),
        "first_day": corpus.truth.first_day,
        "last_day": corpus.truth.last_day,
        "config": out.join(discourse_core::synth::CONFIG_FILE),
    }))
}

fn serve(global: &Global, host: Option<String>, port: Option<u16>) -> CmdResult {
    let mut config = load_config(global)?;
    discourse_service::apply_env_overrides(&mut config, |k| std::env::var(k).ok())
        .map_err(|e| CliError::new(CONFIG, anyhow!(e)))?;
    if let Some(dir) = &global.data_dir {
        config.data_dir = absolute(dir);
    }
    if let Some(h) = host {
        config.service.host = h;
    }
    if let Some(p) = port {
        config.service.port = p;
    }
    let runtime = tokio::runtime::Runtime::new().context("starting async runtime")?;
    runtime
        .block_on(discourse_service::serve(config.clone()))
        .context("serving HTTP")?;
    Ok(json!({
        "command": "serve",
        "host": config.service.host,
        "port": config.service.port,
    }))
}
