//! HTTP API over a data directory of featurized movements: series browsing,
//! key-event tables, forecasts with what-if events, and evaluation reports.
//!
//! Handlers are pure functions of the persisted state and the request: no
//! clocks, no randomness, no caching that could go stale.

mod error;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::routing::get;
use axum::{Json, Router};
use chrono::{Duration, NaiveDate};
use discourse_core::config::{Config, MovementConfig};
use discourse_core::evaluation::{
    classify_direction, direction_probabilities, rolling_stats_at, ClassScores, Direction, MetricsReport, RollingStats,
};
use discourse_core::features::{FeatureSeries, KeyEvent};
use discourse_core::forecast::{Forecaster, QUANTILE_LEVELS};
use discourse_core::store::MovementStore;
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;
use tracing::info;

pub use error::ApiError;

pub const ENV_PORT: &str = "DISCOURSE_PORT";
pub const ENV_HOST: &str = "DISCOURSE_HOST";
pub const ENV_DATA_DIR: &str = "DISCOURSE_DATA_DIR";

/// Applies `DISCOURSE_HOST`, `DISCOURSE_PORT` and `DISCOURSE_DATA_DIR`
/// overrides read through `lookup`.
pub fn apply_env_overrides(config: &mut Config, lookup: impl Fn(&str) -> Option<String>) -> Result<(), String> {
    if let Some(host) = lookup(ENV_HOST) {
        config.service.host = host;
    }
    if let Some(port) = lookup(ENV_PORT) {
        config.service.port = port
            .parse()
            .map_err(|_| format!("{ENV_PORT}=`{port}` is not a port number"))?;
    }
    if let Some(dir) = lookup(ENV_DATA_DIR) {
        config.data_dir = PathBuf::from(dir);
    }
    Ok(())
}

struct Inner {
    config: Config,
    data_dir: PathBuf,
    /// Serializes event-table rewrites.
    writer: Mutex<()>,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    pub fn new(config: Config) -> Self {
        let data_dir = config.data_path();
        Self(Arc::new(Inner {
            config,
            data_dir,
            writer: Mutex::new(()),
        }))
    }

    fn movement(&self, id: &str) -> Result<(&MovementConfig, MovementStore), ApiError> {
        let m = self
            .0
            .config
            .movement(id)
            .ok_or_else(|| ApiError::UnknownMovement(id.to_string()))?;
        Ok((m, MovementStore::new(&self.0.data_dir, &m.id)))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/movements", get(list_movements))
        .route("/movements/{id}/series", get(series))
        .route("/movements/{id}/events", get(list_events).post(add_event))
        .route("/movements/{id}/forecast", axum::routing::post(forecast))
        .route("/movements/{id}/evaluation", get(evaluation))
        .with_state(state)
}

/// Binds `host:port` from the config and serves until Ctrl-C.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let addr: SocketAddr = format!("{}:{}", config.service.host, config.service.port)
        .parse()
        .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidInput, format!("bad listen address: {e}")))?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!(%addr, data_dir = %config.data_path().display(), "serving");
    axum::serve(listener, router(AppState::new(config)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, ApiError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::Internal(format!("worker failed: {e}")))?
}

fn parse_json<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::Invalid(format!("malformed request body: {e}")))
}

fn load_series(store: &MovementStore) -> Result<FeatureSeries, ApiError> {
    store
        .read_series()?
        .ok_or_else(|| ApiError::NotReady("movement has not been featurized".into()))
}

fn load_model(store: &MovementStore) -> Result<Forecaster, ApiError> {
    store
        .load_model()
        .map_err(ApiError::from_model)?
        .ok_or_else(|| ApiError::NotReady("no trained model for this movement".into()))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
}

async fn health() -> Json<Health> {
    Json(Health { status: "ok" })
}

#[derive(Serialize)]
struct MovementsResponse<'a> {
    movements: &'a [MovementConfig],
}

async fn list_movements(State(state): State<AppState>) -> Json<serde_json::Value> {
    Json(
        serde_json::to_value(MovementsResponse {
            movements: &state.0.config.movements,
        })
        .expect("movement configs serialize"),
    )
}

#[derive(Debug, Deserialize)]
struct SeriesQuery {
    from: Option<String>,
    to: Option<String>,
    fields: Option<String>,
}

#[derive(Serialize)]
struct SeriesRecord {
    date: NaiveDate,
    missing: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    reason: Option<String>,
    values: Vec<f64>,
}

#[derive(Serialize)]
struct SeriesResponse {
    movement: String,
    manifest_hash: String,
    fields: Vec<String>,
    records: Vec<SeriesRecord>,
}

fn parse_date(name: &str, s: &str) -> Result<NaiveDate, ApiError> {
    s.parse()
        .map_err(|_| ApiError::BadRequest(format!("`{name}` must be an ISO-8601 date, got `{s}`")))
}

async fn series(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<SeriesQuery>,
) -> Result<Json<SeriesResponse>, ApiError> {
    let (m, store) = state.movement(&id)?;
    let from = q.from.as_deref().map(|s| parse_date("from", s)).transpose()?;
    let to = q.to.as_deref().map(|s| parse_date("to", s)).transpose()?;
    let movement = m.id.clone();
    blocking(move || {
        let series = load_series(&store)?;
        let fields: Vec<String> = match q.fields.as_deref() {
            Some(f) if !f.trim().is_empty() => f.split(',').map(|s| s.trim().to_string()).collect(),
            _ => series.manifest.names().map(str::to_string).collect(),
        };
        let idx = fields
            .iter()
            .map(|f| {
                series
                    .manifest
                    .index_of(f)
                    .ok_or_else(|| ApiError::BadRequest(format!("unknown field `{f}`")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let records = series
            .slice(from, to)
            .iter()
            .map(|r| SeriesRecord {
                date: r.date,
                missing: r.missing,
                reason: r.reason.clone(),
                values: if r.missing {
                    Vec::new()
                } else {
                    idx.iter().map(|&i| r.values[i]).collect()
                },
            })
            .collect();
        Ok(Json(SeriesResponse {
            movement,
            manifest_hash: series.manifest_hash(),
            fields,
            records,
        }))
    })
    .await
}

#[derive(Serialize)]
struct EventsResponse {
    movement: String,
    events: Vec<KeyEvent>,
}

async fn list_events(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<EventsResponse>, ApiError> {
    let (m, store) = state.movement(&id)?;
    let movement = m.id.clone();
    blocking(move || {
        Ok(Json(EventsResponse {
            movement,
            events: store.read_events()?,
        }))
    })
    .await
}

async fn add_event(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<EventsResponse>), ApiError> {
    let (m, store) = state.movement(&id)?;
    let event: KeyEvent = parse_json(&body)?;
    event
        .validate(&m.topic_names())
        .map_err(|e| ApiError::Invalid(e.to_string()))?;
    let movement = m.id.clone();
    let _guard = state.0.writer.lock().await;
    let events = blocking(move || Ok(store.append_event(event)?)).await?;
    Ok((StatusCode::CREATED, Json(EventsResponse { movement, events })))
}

/// A forecast request with optional hypothetical key events.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    /// Last observed day; defaults to the last present day in the series.
    #[serde(default)]
    pub anchor_date: Option<NaiveDate>,
    /// Steps to return, 1..=Δ; defaults to Δ.
    #[serde(default)]
    pub horizon: Option<usize>,
    /// Expected events, each dated in (anchor, anchor + Δ].
    #[serde(default)]
    pub events: Vec<KeyEvent>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TargetHistory {
    pub target: String,
    /// Context-window values, oldest first.
    pub values: Vec<f64>,
    /// Rolling band at the anchor, when the trailing window is complete.
    pub band: Option<RollingStats>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct History {
    pub from: NaiveDate,
    pub to: NaiveDate,
    pub targets: Vec<TargetHistory>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct Quantile {
    pub level: f64,
    pub value: f64,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ForecastStep {
    pub step: usize,
    pub date: NaiveDate,
    pub mu: f64,
    pub sigma: f64,
    pub nu: f64,
    pub quantiles: Vec<Quantile>,
    pub class_scores: Option<ClassScores>,
    /// Argmax of the class scores; the primary call.
    pub direction: Option<Direction>,
    /// The forecast location classified against the band.
    pub location_direction: Option<Direction>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct TargetForecast {
    pub target: String,
    pub steps: Vec<ForecastStep>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ForecastBlock {
    pub horizon: usize,
    pub hypothetical_events: Vec<KeyEvent>,
    pub targets: Vec<TargetForecast>,
}

#[derive(Debug, Serialize, Deserialize, PartialEq)]
pub struct ForecastResponse {
    pub movement: String,
    pub anchor_date: NaiveDate,
    pub model_version: String,
    pub model_hash: String,
    pub manifest_hash: String,
    pub rolling_window: usize,
    pub history: History,
    pub forecast: ForecastBlock,
}

fn run_forecast(
    movement: &MovementConfig,
    store: &MovementStore,
    req: WhatIfRequest,
    window: usize,
) -> Result<ForecastResponse, ApiError> {
    let series = load_series(store)?;
    let model = load_model(store)?;
    let manifest_hash = series.manifest_hash();
    if model.manifest_hash != manifest_hash {
        return Err(ApiError::Conflict(format!(
            "checkpoint was trained on manifest {} but the stored series has {}",
            model.manifest_hash, manifest_hash
        )));
    }
    let delta = model.config.horizon;
    let horizon = req.horizon.unwrap_or(delta);
    if horizon == 0 || horizon > delta {
        return Err(ApiError::Invalid(format!("horizon {horizon} outside 1..={delta}")));
    }
    let anchor = match req.anchor_date {
        Some(a) => a,
        None => series
            .records
            .iter()
            .rev()
            .find(|r| !r.missing)
            .map(|r| r.date)
            .ok_or_else(|| ApiError::NotReady("feature series has no present day".into()))?,
    };
    let last = anchor + Duration::days(delta as i64);
    for e in &req.events {
        e.validate(&model.categories)
            .map_err(|err| ApiError::Invalid(format!("event `{}`: {err}", e.label)))?;
        if e.date <= anchor || e.date > last {
            return Err(ApiError::Invalid(format!(
                "event `{}` dated {} is outside ({anchor}, {last}]",
                e.label, e.date
            )));
        }
    }
    let mut events = store.read_events()?;
    events.extend(req.events.iter().cloned());
    let params = model.predict_params(&series, anchor, &events)?;
    let start = model.context_start(&series, anchor)?;
    let context = &series.records[start..start + model.config.context_len];

    let mut history = Vec::new();
    let mut targets = Vec::new();
    for (j, target) in model.targets.iter().enumerate() {
        let col = series.manifest.index_of(target).expect("predict resolved the targets");
        let band = rolling_stats_at(&series, col, anchor, window);
        history.push(TargetHistory {
            target: target.clone(),
            values: context.iter().map(|r| r.values[col]).collect(),
            band,
        });
        let steps = params[j]
            .iter()
            .take(horizon)
            .enumerate()
            .map(|(s, p)| {
                let scores = band.map(|b| direction_probabilities(p, b));
                ForecastStep {
                    step: s + 1,
                    date: anchor + Duration::days(s as i64 + 1),
                    mu: p.mu,
                    sigma: p.sigma,
                    nu: p.nu,
                    quantiles: QUANTILE_LEVELS
                        .iter()
                        .map(|&level| Quantile {
                            level,
                            value: p.quantile(level),
                        })
                        .collect(),
                    class_scores: scores,
                    direction: scores.map(|c| c.label()),
                    location_direction: band.map(|b| classify_direction(p.mu, b)),
                }
            })
            .collect();
        targets.push(TargetForecast {
            target: target.clone(),
            steps,
        });
    }
    let mut hypothetical_events = req.events;
    hypothetical_events.sort_by_key(|e| e.date);
    Ok(ForecastResponse {
        movement: movement.id.clone(),
        anchor_date: anchor,
        model_version: discourse_core::forecast::MODEL_VERSION.to_string(),
        model_hash: model.model_hash().to_string(),
        manifest_hash,
        rolling_window: window,
        history: History {
            from: context[0].date,
            to: anchor,
            targets: history,
        },
        forecast: ForecastBlock {
            horizon,
            hypothetical_events,
            targets,
        },
    })
}

async fn forecast(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Json<ForecastResponse>, ApiError> {
    let (m, store) = state.movement(&id)?;
    let req: WhatIfRequest = if body.iter().all(u8::is_ascii_whitespace) {
        WhatIfRequest::default()
    } else {
        parse_json(&body)?
    };
    let movement = m.clone();
    let window = state.0.config.evaluation.rolling_window;
    blocking(move || run_forecast(&movement, &store, req, window).map(Json)).await
}

#[derive(Debug, Deserialize)]
struct EvaluationQuery {
    delta: Option<usize>,
}

async fn evaluation(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EvaluationQuery>,
) -> Result<Json<MetricsReport>, ApiError> {
    let (_, store) = state.movement(&id)?;
    blocking(move || {
        let model = load_model(&store)?;
        let path = store.metrics_report();
        if !path.exists() {
            return Err(ApiError::NotReady(
                "no evaluation report; run `discourse evaluate`".into(),
            ));
        }
        let text =
            std::fs::read_to_string(&path).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
        let mut report: MetricsReport =
            serde_json::from_str(&text).map_err(|e| ApiError::Internal(format!("{}: {e}", path.display())))?;
        if report.model_hash.as_deref().is_some_and(|h| h != model.model_hash()) {
            return Err(ApiError::Conflict(
                "evaluation report was computed for a different checkpoint".into(),
            ));
        }
        if let Some(d) = q.delta {
            let delta = model.config.horizon;
            if d == 0 || d > delta {
                return Err(ApiError::Invalid(format!("δ={d} outside 1..={delta}")));
            }
            report.horizons.retain(|h| h.horizon == d);
        }
        Ok(Json(report))
    })
    .await
}
