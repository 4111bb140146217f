//! Core vocabulary and layer assignment against an exhaustive per-document
//! check, plus the partition and monotonicity invariants.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{TimeZone, Utc};
use discourse_core::adapters::FrequencyExtractor;
use discourse_core::config::MovementConfig;
use discourse_core::corpus::{assign_layers, relevance, Corpus, Document};
use discourse_core::pipeline::layer_corpus;
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::verdict;

const DOCS: usize = 50;
const CORPORA: u64 = 40;
const THRESHOLDS: [f64; 3] = [0.30, 0.20, 0.10];
const TOKEN: &str = "#MeToo";
const WORDS: [&str; 30] = [
    "harassment",
    "consent",
    "survivor",
    "court",
    "verdict",
    "workplace",
    "silence",
    "justice",
    "rally",
    "policy",
    "campus",
    "film",
    "director",
    "coach",
    "senate",
    "report",
    "victim",
    "lawsuit",
    "apology",
    "union",
    "march",
    "media",
    "trial",
    "abuse",
    "pay",
    "equity",
    "ruling",
    "hearing",
    "network",
    "school",
];

struct Sample {
    corpus: Corpus,
    cut: f64,
}

fn sample(seed: u64) -> Sample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // 24 single-word keyphrases and 6 two-word ones: at most 30 keywords.
    let mut phrases: Vec<String> = WORDS[..24].iter().map(|w| w.to_string()).collect();
    for i in 0..6 {
        phrases.push(format!("{} {}", WORDS[24 + i], WORDS[i]));
    }
    let mut docs = Vec::with_capacity(DOCS);
    for i in 0..DOCS {
        let text = |rng: &mut ChaCha8Rng| {
            let n = rng.random_range(3..14);
            let mut parts: Vec<String> = Vec::with_capacity(n + 1);
            for _ in 0..n {
                let mut w = WORDS.choose(rng).unwrap().to_string();
                if rng.random_bool(0.2) {
                    w = w.to_uppercase();
                }
                if rng.random_bool(0.15) {
                    w.push([',', '.'][rng.random_range(0..2)]);
                }
                parts.push(w);
            }
            parts.join(" ")
        };
        let mut title = text(&mut rng);
        let mut body = text(&mut rng);
        match rng.random_range(0..6) {
            0 => title = format!("{TOKEN} {title}"),
            1 => body = format!("{body} {}", TOKEN.to_lowercase()),
            _ => {}
        }
        let k = rng.random_range(0..6);
        let keyphrases = (0..k).map(|_| phrases.choose(&mut rng).unwrap().clone()).collect();
        docs.push(Document {
            id: format!("doc-{i}"),
            platform: "reddit".into(),
            timestamp: Utc.with_ymd_and_hms(2024, 9, 1, 12, 0, 0).unwrap(),
            title,
            body,
            engagement: 1.0,
            keyphrases: Some(keyphrases),
        });
    }
    // Guarantee at least one direct mention with a keyphrase.
    docs[0].title = format!("{TOKEN} {}", docs[0].title);
    docs[0].keyphrases = Some(vec![phrases[0].clone()]);
    let cut = [50.0, 75.0, 90.0, 99.0, 100.0][rng.random_range(0..5)];
    Sample {
        corpus: Corpus::from_documents(docs).unwrap(),
        cut,
    }
}

fn words(text: &str) -> Vec<String> {
    text.split(|c: char| c.is_whitespace() || c == ',' || c == '.')
        .filter(|w| !w.is_empty())
        .map(str::to_lowercase)
        .collect()
}

/// Space-padded containment: the phrase's words appear as a contiguous run.
fn contains_run(text: &[String], phrase: &str) -> bool {
    let hay = format!(" {} ", text.join(" "));
    hay.contains(&format!(" {} ", words(phrase).join(" ")))
}

fn mentions(doc: &Document) -> bool {
    let token = TOKEN.to_lowercase();
    words(&doc.title).contains(&token) || words(&doc.body).contains(&token)
}

/// (keyword, count) ordered by count desc then keyword.
fn oracle_vocabulary(docs: &[Document], cut: f64) -> Vec<(String, usize)> {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for d in docs.iter().filter(|d| mentions(d)) {
        let unique: BTreeSet<String> = d
            .keyphrases
            .as_ref()
            .unwrap()
            .iter()
            .map(|p| words(p).join(" "))
            .collect();
        for k in unique {
            *counts.entry(k).or_insert(0) += 1;
        }
    }
    // Nearest rank: the smallest observed count c with #{x ≤ c} ≥ ⌈p·n/100⌉.
    let n = counts.len();
    let needed = ((cut / 100.0) * n as f64).ceil().max(1.0) as usize;
    let threshold = counts
        .values()
        .copied()
        .filter(|&c| counts.values().filter(|&&x| x <= c).count() >= needed)
        .min()
        .unwrap();
    let mut vocab: Vec<(String, usize)> = counts.into_iter().filter(|(_, c)| *c >= threshold).collect();
    vocab.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    vocab
}

/// (id, layer, hits) per assigned document, checking every layer in turn.
fn oracle_layers(docs: &[Document], vocab: &[String], thresholds: &[f64]) -> Vec<(String, u8, usize)> {
    let mut out = Vec::new();
    for d in docs {
        let (title, body) = (words(&d.title), words(&d.body));
        let hits = vocab
            .iter()
            .filter(|k| contains_run(&title, k) || contains_run(&body, k))
            .count();
        let fraction = hits as f64 / vocab.len() as f64;
        let layer = if mentions(d) {
            Some(0)
        } else {
            (1..=thresholds.len())
                .find(|&l| fraction >= thresholds[l - 1])
                .map(|l| l as u8)
        };
        if let Some(l) = layer {
            out.push((d.id.clone(), l, hits));
        }
    }
    out
}

#[test]
fn layering_matches_exhaustive_check() {
    let mut failures: Vec<String> = Vec::new();
    let mut assigned_total = 0;
    let mut layer_totals = [0usize; 4];
    for seed in 0..CORPORA {
        let s = sample(seed);
        let docs = s.corpus.documents();
        let mut movement = MovementConfig::new("layering", TOKEN);
        movement.percentile_cut = s.cut;
        let layered = layer_corpus(&s.corpus, &movement, &FrequencyExtractor::default()).unwrap();

        let want_vocab = oracle_vocabulary(docs, s.cut);
        let got_vocab: Vec<(String, usize)> = layered
            .vocabulary
            .iter()
            .map(|k| (k.keyword.clone(), k.cooccurrence_count))
            .collect();
        if got_vocab != want_vocab {
            failures.push(format!("seed {seed}: vocabulary {got_vocab:?} != {want_vocab:?}"));
            continue;
        }
        let vocab: Vec<String> = want_vocab.into_iter().map(|(k, _)| k).collect();
        let want = oracle_layers(docs, &vocab, &THRESHOLDS);
        let got: Vec<(String, u8, usize)> = layered
            .assignments
            .iter()
            .map(|a| {
                (
                    a.document_id.clone(),
                    a.layer,
                    (a.matched_fraction * vocab.len() as f64).round() as usize,
                )
            })
            .collect();
        if got != want {
            failures.push(format!("seed {seed}: assignments differ"));
            continue;
        }
        for a in &layered.assignments {
            let (_, _, hits) = want.iter().find(|w| w.0 == a.document_id).unwrap();
            if a.matched_fraction != *hits as f64 / vocab.len() as f64 {
                failures.push(format!(
                    "seed {seed}: {} fraction {}",
                    a.document_id, a.matched_fraction
                ));
            }
            if a.relevance != 1.0 - f64::from(a.layer) / 3.0 {
                failures.push(format!("seed {seed}: {} relevance {}", a.document_id, a.relevance));
            }
        }

        // Partition: each document at most once; layer counts sum to the total.
        let ids: BTreeSet<&str> = layered.assignments.iter().map(|a| a.document_id.as_str()).collect();
        let counts = layered.layer_counts(3);
        if ids.len() != layered.assignments.len() || counts.iter().sum::<usize>() != ids.len() {
            failures.push(format!("seed {seed}: layers are not a partition"));
        }
        assigned_total += ids.len();
        for (t, c) in layer_totals.iter_mut().zip(&counts) {
            *t += c;
        }

        // Raising any threshold never moves a document to a stricter layer.
        for i in 0..THRESHOLDS.len() {
            let mut raised = THRESHOLDS;
            raised[i] += 0.05;
            if i > 0 && raised[i] >= raised[i - 1] {
                continue;
            }
            let after = assign_layers(docs, &layered.vocabulary, TOKEN, &raised).unwrap();
            for a in &layered.assignments {
                if let Some(b) = after.iter().find(|b| b.document_id == a.document_id) {
                    if b.layer < a.layer {
                        failures.push(format!(
                            "seed {seed}: raising threshold {i} moved {} to L{}",
                            a.document_id, b.layer
                        ));
                    }
                }
            }
            if after.iter().any(|b| !ids.contains(b.document_id.as_str())) {
                failures.push(format!("seed {seed}: raising threshold {i} admitted a new document"));
            }
        }
    }
    let monotone = (0..3u8).all(|l| relevance(l, 3) > relevance(l + 1, 3));
    if !monotone {
        failures.push("relevance is not strictly decreasing in layer".into());
    }
    let every_layer_seen = layer_totals.iter().all(|&c| c > 0);
    if !every_layer_seen {
        failures.push(format!("fixtures never exercised some layer: {layer_totals:?}"));
    }
    verdict(
        "layering suite",
        failures.is_empty(),
        format!(
            "{CORPORA} corpora x {DOCS} docs, {assigned_total} assignments (per layer {layer_totals:?}) match the exhaustive check; partition, relevance and threshold monotonicity hold{}",
            if failures.is_empty() {
                String::new()
            } else {
                format!("; failures: {}", failures.iter().take(5).cloned().collect::<Vec<_>>().join("; "))
            }
        ),
    );
}
