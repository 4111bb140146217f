//! The full CLI pipeline, run twice from scratch in separate directories with
//! the same seed, writes byte-identical metrics.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use sha2::{Digest, Sha256};

use crate::{secs, verdict};

const DAYS: &str = "120";
const SEED: &str = "7";
const EPOCHS: &str = "5";

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

/// synth → ingest → layer → featurize → train → evaluate; returns the metrics
/// and checkpoint pointer bytes.
fn pipeline(dir: &Path) -> (Vec<u8>, String) {
    run(dir, &["synth", "--out", "corpus", "--days", DAYS, "--seed", SEED]);
    let root = dir.join("corpus");
    run(&root, &["ingest", "--input", "documents.jsonl"]);
    run(&root, &["layer"]);
    run(&root, &["featurize", "--events", "events.jsonl"]);
    run(&root, &["train", "--epochs", EPOCHS, "--seed", SEED]);
    run(&root, &["evaluate"]);
    let store = root.join("data/movements/synthetic");
    let metrics = std::fs::read(store.join("reports/metrics.json")).unwrap();
    let current = std::fs::read_to_string(store.join("models/CURRENT")).unwrap();
    (metrics, current.trim().to_string())
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let timer = Instant::now();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (metrics_a, model_a) = pipeline(a.path());
    let (metrics_b, model_b) = pipeline(b.path());
    let digest = hex::encode(Sha256::digest(&metrics_a));
    verdict(
        "determinism",
        metrics_a == metrics_b && model_a == model_b,
        format!(
            "two runs of synth -> ingest -> layer -> featurize -> train ({EPOCHS} epochs) -> evaluate in separate directories \
             (seed {SEED}, {DAYS} days): metrics.json {} bytes, sha256 {} vs {}, checkpoint {} vs {}, {}",
            metrics_a.len(),
            &digest[..16],
            &hex::encode(Sha256::digest(&metrics_b))[..16],
            model_a,
            model_b,
            secs(timer.elapsed())
        ),
    );
}
