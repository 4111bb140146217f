//! HTTP contract of the forecast service, driven in-process against a store
//! the CLI built. No console is involved.

use std::path::Path;
use std::process::Command;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use chrono::{Duration, NaiveDate};
use discourse_core::config::Config;
use discourse_core::store::MovementStore;
use discourse_service::{router, AppState};
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tower::ServiceExt;

use crate::verdict;

const MOVEMENT: &str = "synthetic";
const FORECAST: &str = "/movements/synthetic/forecast";

fn run(dir: &Path, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_discourse"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

async fn call(config: &Config, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(serde_json::to_vec(&b).unwrap())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let resp = router(AppState::new(config.clone())).oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, serde_json::from_slice(&bytes).unwrap_or(Value::Null))
}

fn what_if(anchor: NaiveDate, impact: i8) -> Value {
    json!({
        "anchor_date": anchor,
        "events": [{
            "date": anchor + Duration::days(1),
            "category": "Violence",
            "impact": impact,
            "label": "hypothetical ruling"
        }]
    })
}

#[tokio::test]
async fn service_contract_holds() {
    let tmp = tempfile::tempdir().unwrap();
    run(
        tmp.path(),
        &["synth", "--out", "corpus", "--days", "100", "--seed", "3"],
    );
    let root = tmp.path().join("corpus");
    run(&root, &["ingest", "--input", "documents.jsonl"]);
    run(&root, &["layer"]);
    run(&root, &["featurize", "--events", "events.jsonl"]);
    run(&root, &["train", "--epochs", "2", "--seed", "1"]);
    run(&root, &["evaluate"]);
    let config = Config::load(&root.join("discourse.toml")).unwrap();
    let store = MovementStore::new(&config.data_path(), MOVEMENT);
    let mut failures: Vec<String> = Vec::new();
    let mut check = |ok: bool, what: String| {
        if !ok {
            failures.push(what);
        }
    };

    // Determinism: identical requests, identical bodies.
    let (_, latest) = call(&config, "POST", FORECAST, Some(json!({}))).await;
    let last: NaiveDate = serde_json::from_value(latest["anchor_date"].clone()).unwrap();
    let anchor = last - Duration::days(10);
    let (s1, a) = call(&config, "POST", FORECAST, Some(what_if(anchor, 1))).await;
    let (s2, b) = call(&config, "POST", FORECAST, Some(what_if(anchor, 1))).await;
    check(
        s1 == StatusCode::OK && s2 == StatusCode::OK,
        format!("forecast status {s1} {s2}"),
    );
    check(a == b, "identical forecast requests gave different bodies".into());

    // What-if: only the forecast block moves, and nothing is persisted.
    let events_before = std::fs::read(store.events()).unwrap();
    let (_, base) = call(&config, "POST", FORECAST, Some(json!({"anchor_date": anchor}))).await;
    let mut moved_targets = 0;
    for impact in [1, 2] {
        let (_, with) = call(&config, "POST", FORECAST, Some(what_if(anchor, impact))).await;
        let (base, with) = (base.as_object().unwrap(), with.as_object().unwrap());
        check(
            base.keys().eq(with.keys()),
            format!("impact {impact}: response shape changed"),
        );
        for key in base.keys().filter(|k| *k != "forecast") {
            check(base[key] == with[key], format!("impact {impact}: `{key}` changed"));
        }
        let (bf, wf) = (&base["forecast"], &with["forecast"]);
        check(
            bf["horizon"] == wf["horizon"],
            format!("impact {impact}: horizon changed"),
        );
        let (bt, wt) = (bf["targets"].as_array().unwrap(), wf["targets"].as_array().unwrap());
        for (x, y) in bt.iter().zip(wt) {
            check(
                x["target"] == y["target"],
                format!("impact {impact}: target order changed"),
            );
            for (sx, sy) in x["steps"]
                .as_array()
                .unwrap()
                .iter()
                .zip(y["steps"].as_array().unwrap())
            {
                check(
                    sx["step"] == sy["step"] && sx["date"] == sy["date"],
                    format!("impact {impact}: step index or date changed"),
                );
            }
            if x != y {
                moved_targets += 1;
            }
        }
        check(
            wf["hypothetical_events"].as_array().map(Vec::len) == Some(1),
            format!("impact {impact}: hypothetical event not echoed"),
        );
    }
    check(moved_targets > 0, "the hypothetical event moved no forecast".into());
    check(
        std::fs::read(store.events()).unwrap() == events_before,
        "a what-if request persisted its events".into(),
    );

    // Error codes.
    let mut bad_impact = what_if(anchor, 1);
    bad_impact["events"][0]["impact"] = json!(5);
    let cases: Vec<(&str, &str, Option<Value>, StatusCode)> = vec![
        (
            "POST",
            "/movements/nope/forecast",
            Some(json!({})),
            StatusCode::NOT_FOUND,
        ),
        (
            "GET",
            "/movements/synthetic/series?from=yesterday",
            None,
            StatusCode::BAD_REQUEST,
        ),
        ("POST", FORECAST, Some(bad_impact), StatusCode::UNPROCESSABLE_ENTITY),
        (
            "POST",
            FORECAST,
            Some(json!({"horizon": 8})),
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
        (
            "GET",
            "/movements/synthetic/evaluation?delta=0",
            None,
            StatusCode::UNPROCESSABLE_ENTITY,
        ),
    ];
    let mut codes = Vec::new();
    for (method, uri, body, want) in cases {
        let (got, _) = call(&config, method, uri, body).await;
        check(got == want, format!("{method} {uri}: {got}, want {want}"));
        codes.push(got.as_u16());
    }

    // A checkpoint that no longer matches its recorded hash is a conflict.
    let ckpt = store.current_model().unwrap().unwrap();
    let original = std::fs::read(&ckpt).unwrap();
    let mut tampered = original.clone();
    let n = tampered.len();
    tampered[n - 3] ^= 0x40;
    std::fs::write(&ckpt, &tampered).unwrap();
    let (got, body) = call(&config, "POST", FORECAST, Some(json!({}))).await;
    check(
        got == StatusCode::CONFLICT,
        format!("tampered checkpoint: {got} {body}"),
    );
    codes.push(got.as_u16());
    std::fs::write(&ckpt, &original).unwrap();

    // No trained model is not-ready.
    std::fs::remove_file(store.models_dir().join("CURRENT")).unwrap();
    let (got, _) = call(&config, "POST", FORECAST, Some(json!({}))).await;
    check(got == StatusCode::SERVICE_UNAVAILABLE, format!("untrained: {got}"));
    codes.push(got.as_u16());

    codes.sort_unstable();
    codes.dedup();
    verdict(
        "service contract",
        failures.is_empty(),
        format!(
            "identical forecast requests return equal bodies; what-if (impact 1 and 2) moved {moved_targets} target forecasts in total and nothing else; \
             error codes observed {codes:?}{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.join("; "))
            }
        ),
    );
}
