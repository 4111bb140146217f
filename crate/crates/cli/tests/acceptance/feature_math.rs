//! Every stored feature and analysis output of `featurize`, recomputed from
//! the raw per-document inputs with naive formulas.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::time::Instant;

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use discourse_core::adapters::{
    emotion_labels, EmotionScores, FileEmbedder, FileScorer, FrequencyExtractor, PhraseEmbedding, EMOTION_COUNT,
};
use discourse_core::config::{FeatureConfig, MovementConfig};
use discourse_core::corpus::{Corpus, Document, LayerAssignment};
use discourse_core::features::{default_taxonomy, topic_slug, EmotionLayout, KeyEvent, TopicSpec};
use discourse_core::pipeline::{featurize, Adapters, LayeredCorpus};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::{secs, verdict};

const DAYS: usize = 200;
const MAX_DOCS: usize = 20;
const DIM: usize = 6;
const POOL: usize = 40;
const TOL: f64 = 1e-9;
const PLATFORMS: [&str; 2] = ["reddit", "news"];
/// Present in the corpus but not configured; must be ignored.
const STRAY_PLATFORM: &str = "forum";
const W: usize = 7;
const LAMBDA: f64 = 0.8;
const BASELINE: usize = 28;
const CORR_WINDOW: usize = 7;
const EMOTION_EDGES: [f64; 4] = [0.2, 0.4, 0.6, 0.8];
const EMOTION_MIDS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];
const EMOTION_BIN_NAMES: [&str; 5] = ["absent", "low", "moderate", "high", "very_high"];
const DISTANCE_EDGES: [f64; 5] = [0.1, 0.2, 0.4, 0.6, 0.8];
const DISTANCE_BIN_NAMES: [&str; 6] = ["core", "close", "related", "peripheral", "distant", "unrelated"];
const EVENT_COLUMNS: [&str; 5] = ["unrelated", "neutral", "supports", "opposes", "na"];

struct MiniDoc {
    day: usize,
    /// Index into PLATFORMS, or None for the stray platform.
    platform: Option<usize>,
    engagement: f64,
    /// None: below every layer threshold.
    layer: Option<u8>,
    scores: Vec<f64>,
    phrases: Vec<usize>,
}

impl MiniDoc {
    fn counted(&self) -> bool {
        self.platform.is_some() && self.layer.is_some()
    }

    fn weight(&self) -> f64 {
        self.engagement * (1.0 - f64::from(self.layer.unwrap()) / 3.0)
    }
}

struct Fixture {
    start: NaiveDate,
    topics: Vec<TopicSpec>,
    topic_vectors: Vec<[Vec<f64>; 2]>,
    pool: Vec<Vec<f64>>,
    docs: Vec<MiniDoc>,
    events: Vec<KeyEvent>,
}

fn gaussian(rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..DIM).map(|_| StandardNormal.sample(rng)).collect()
}

fn fixture(seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let start = NaiveDate::from_ymd_opt(2024, 3, 1).unwrap();
    let topics: Vec<TopicSpec> = default_taxonomy()
        .into_iter()
        .enumerate()
        .map(|(l, t)| TopicSpec {
            name: t.name,
            keyphrases: vec![format!("topic {l} a"), format!("topic {l} b")],
        })
        .collect();
    let topic_vectors = topics
        .iter()
        .map(|_| [gaussian(&mut rng), gaussian(&mut rng)])
        .collect();
    let pool = (0..POOL).map(|_| gaussian(&mut rng)).collect();

    let mut docs = Vec::new();
    for day in 0..DAYS {
        let edge_day = day == 0 || day == DAYS - 1;
        let n = if !edge_day && rng.random_bool(0.04) {
            0
        } else {
            rng.random_range(1..=MAX_DOCS)
        };
        for _ in 0..n {
            let r: f64 = rng.random();
            let platform = if r < 0.55 {
                Some(0)
            } else if r < 0.95 {
                Some(1)
            } else {
                None
            };
            let engagement = if rng.random_bool(0.03) {
                0.0
            } else {
                rng.random_range(0.0..40.0)
            };
            let layer = match rng.random_range(0..5u8) {
                4 => None,
                l => Some(l),
            };
            let scores = (0..EMOTION_COUNT)
                .map(|_| {
                    if rng.random_bool(0.1) {
                        [0.0, 0.2, 0.4, 0.6, 0.8, 1.0][rng.random_range(0..6)]
                    } else {
                        rng.random()
                    }
                })
                .collect();
            let k = if rng.random_bool(0.15) {
                0
            } else {
                rng.random_range(1..=4)
            };
            let phrases = (0..k).map(|_| rng.random_range(0..POOL)).collect();
            docs.push(MiniDoc {
                day,
                platform,
                engagement,
                layer,
                scores,
                phrases,
            });
        }
    }

    let events = (0..40)
        .map(|i| KeyEvent {
            date: start + Duration::days(rng.random_range(0..DAYS as i64)),
            category: topics[rng.random_range(0..topics.len())].name.clone(),
            impact: [-1, 0, 1, 2][rng.random_range(0..4)],
            magnitude: 1.0,
            label: format!("event {i}"),
        })
        .collect();
    Fixture {
        start,
        topics,
        topic_vectors,
        pool,
        docs,
        events,
    }
}

fn phrase(i: usize) -> String {
    format!("phrase {i}")
}

/// Runs the real pipeline over the fixture.
fn run_pipeline(f: &Fixture) -> discourse_core::pipeline::FeaturizeOutput {
    let mut documents = Vec::new();
    let mut scores = Vec::new();
    let mut assignments = Vec::new();
    let mut keyphrases = Vec::new();
    for (i, d) in f.docs.iter().enumerate() {
        let id = format!("d{i}");
        let date = f.start + Duration::days(d.day as i64);
        let second = (i * 7919) % 86_400;
        let ts = Utc.from_utc_datetime(&date.and_hms_opt(0, 0, 0).unwrap()) + Duration::seconds(second as i64);
        documents.push(Document {
            id: id.clone(),
            platform: d.platform.map_or(STRAY_PLATFORM, |p| PLATFORMS[p]).to_string(),
            timestamp: ts,
            title: String::new(),
            body: "text".into(),
            engagement: d.engagement,
            keyphrases: None,
        });
        scores.push(EmotionScores {
            document_id: id.clone(),
            scores: d.scores.clone(),
        });
        if let Some(layer) = d.layer {
            assignments.push(LayerAssignment {
                document_id: id,
                layer,
                matched_fraction: 0.0,
                relevance: 1.0 - f64::from(layer) / 3.0,
            });
        }
        keyphrases.push(d.phrases.iter().map(|&p| phrase(p)).collect());
    }
    let mut embeddings: Vec<PhraseEmbedding> = f
        .pool
        .iter()
        .enumerate()
        .map(|(i, v)| PhraseEmbedding {
            phrase: phrase(i),
            vector: v.clone(),
        })
        .collect();
    for (t, vs) in f.topics.iter().zip(&f.topic_vectors) {
        for (p, v) in t.keyphrases.iter().zip(vs) {
            embeddings.push(PhraseEmbedding {
                phrase: p.clone(),
                vector: v.clone(),
            });
        }
    }
    let adapters = Adapters {
        scorer: Box::new(FileScorer::from_records(scores).unwrap()),
        extractor: Box::new(FrequencyExtractor::default()),
        embedder: Box::new(FileEmbedder::from_records(embeddings).unwrap()),
    };
    let mut movement = MovementConfig::new("oracle", "#MeToo");
    movement.topics = f.topics.clone();
    movement.platforms = PLATFORMS.iter().map(|p| p.to_string()).collect();
    let features = FeatureConfig {
        emotion_layout: EmotionLayout::Extended,
        ..FeatureConfig::default()
    };
    let layered = LayeredCorpus {
        vocabulary: Vec::new(),
        assignments,
        keyphrases,
    };
    let corpus = Corpus::from_documents(documents).unwrap();
    featurize(&corpus, &layered, &movement, &features, &adapters, &f.events).unwrap()
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, (xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt())
}

fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let (mx, sx) = mean_std(x);
    let (my, sy) = mean_std(y);
    if sx == 0.0 || sy == 0.0 {
        return 0.0;
    }
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / x.len() as f64;
    cov / (sx * sy)
}

fn emotion_bin(s: f64) -> usize {
    EMOTION_EDGES.iter().filter(|&&e| s >= e).count()
}

fn distance_bin(d: f64) -> usize {
    DISTANCE_EDGES.iter().filter(|&&e| d >= e).count()
}

fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}

fn first_argmax(xs: &[f64]) -> usize {
    (0..xs.len()).fold(0, |best, i| if xs[i] > xs[best] { i } else { best })
}

/// What the oracle expects for one calendar day.
struct DayExpect {
    /// `Some(columns)` on a present day, keyed by manifest name.
    columns: Option<BTreeMap<String, f64>>,
    variance: Vec<f64>,
    peak: Vec<usize>,
    concentration: Vec<f64>,
    emotion_means: Option<Vec<f64>>,
    topic_mi: Option<Vec<Vec<f64>>>,
    topic_marginal: Option<Vec<f64>>,
}

fn oracle(f: &Fixture) -> Vec<DayExpect> {
    let labels = emotion_labels();
    let topics = f.topics.len();
    let centroids: Vec<Vec<f64>> = f
        .topic_vectors
        .iter()
        .map(|[a, b]| a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect())
        .collect();
    let profile = |d: &MiniDoc| -> Option<Vec<[f64; 6]>> {
        if d.phrases.is_empty() {
            return None;
        }
        Some(
            centroids
                .iter()
                .map(|c| {
                    let mut row = [0.0; 6];
                    let mut counts = [0usize; 6];
                    for &p in &d.phrases {
                        counts[distance_bin(cosine_distance(&f.pool[p], c))] += 1;
                    }
                    for b in 0..6 {
                        row[b] = counts[b] as f64 / d.phrases.len() as f64;
                    }
                    row
                })
                .collect(),
        )
    };

    let mut raw = vec![vec![0.0; DAYS]; PLATFORMS.len()];
    for d in f.docs.iter().filter(|d| d.counted()) {
        raw[d.platform.unwrap()][d.day] += d.weight();
    }

    let norm = (1.0 - LAMBDA) / (1.0 - LAMBDA.powi(W as i32));
    let mut out: Vec<DayExpect> = Vec::with_capacity(DAYS);
    for day in 0..DAYS {
        let date = f.start + Duration::days(day as i64);
        let items: Vec<&MiniDoc> = f.docs.iter().filter(|d| d.day == day && d.counted()).collect();
        let total_w: f64 = items.iter().map(|d| d.weight()).sum();
        let mut expect = DayExpect {
            columns: None,
            variance: Vec::new(),
            peak: Vec::new(),
            concentration: Vec::new(),
            emotion_means: None,
            topic_mi: None,
            topic_marginal: None,
        };
        if total_w <= 0.0 {
            out.push(expect);
            continue;
        }
        let mut cols = BTreeMap::new();
        let day_raw: Vec<f64> = (0..PLATFORMS.len()).map(|p| raw[p][day]).collect();
        for (p, name) in PLATFORMS.iter().enumerate() {
            let s = &raw[p];
            let smoothed: f64 = (0..W)
                .filter(|&tau| tau <= day)
                .map(|tau| LAMBDA.powi(tau as i32) * s[day - tau])
                .sum::<f64>()
                * norm;
            let velocity = if day >= 1 { s[day] - s[day - 1] } else { 0.0 };
            let acceleration = if day >= 2 {
                s[day] - 2.0 * s[day - 1] + s[day - 2]
            } else {
                0.0
            };
            let standardized = if day == 0 {
                0.0
            } else {
                let (m, sd) = mean_std(&s[day.saturating_sub(BASELINE)..day]);
                if sd > 0.0 {
                    (s[day] - m) / sd
                } else {
                    0.0
                }
            };
            cols.insert(format!("volume:{name}:raw"), s[day]);
            cols.insert(format!("volume:{name}:smoothed"), smoothed);
            cols.insert(format!("volume:{name}:velocity"), velocity);
            cols.insert(format!("volume:{name}:acceleration"), acceleration);
            cols.insert(format!("volume:{name}:standardized"), standardized);
        }
        let sum_raw: f64 = day_raw.iter().sum();
        let shares: Vec<f64> = day_raw.iter().map(|v| v / sum_raw).collect();
        cols.insert("volume:pdi".into(), entropy(&shares));

        let mut means = Vec::with_capacity(EMOTION_COUNT);
        for (e, label) in labels.iter().enumerate() {
            let mut g = [0.0; 5];
            for d in &items {
                g[emotion_bin(d.scores[e])] += d.weight();
            }
            g.iter_mut().for_each(|x| *x /= total_w);
            let mean: f64 = g.iter().zip(EMOTION_MIDS).map(|(p, m)| p * m).sum();
            expect
                .variance
                .push(g.iter().zip(EMOTION_MIDS).map(|(p, m)| p * (m - mean).powi(2)).sum());
            expect.peak.push(first_argmax(&g) + 1);
            expect.concentration.push(g.iter().map(|p| p * p).sum());
            means.push(mean);
            cols.insert(format!("emotion:{label}:mean"), mean);
            for (b, bin) in EMOTION_BIN_NAMES.iter().enumerate() {
                cols.insert(format!("emotion:{label}:bin:{bin}"), g[b]);
            }
            cols.insert(format!("emotion:{label}:entropy"), entropy(&g));
        }
        expect.emotion_means = Some(means);

        let profiled: Vec<(Vec<[f64; 6]>, f64)> = items
            .iter()
            .filter_map(|d| profile(d).map(|m| (m, d.weight())))
            .collect();
        let profiled_w: f64 = profiled.iter().map(|(_, w)| w).sum();
        if profiled_w <= 0.0 {
            out.push(expect);
            continue;
        }
        let mut theta = vec![[0.0; 6]; topics];
        for (m, w) in &profiled {
            for l in 0..topics {
                for b in 0..6 {
                    theta[l][b] += w * m[l][b] / profiled_w;
                }
            }
        }
        for (l, t) in f.topics.iter().enumerate() {
            for (b, bin) in DISTANCE_BIN_NAMES.iter().enumerate() {
                cols.insert(format!("theme:{}:{bin}", topic_slug(&t.name)), theta[l][b]);
            }
        }
        expect.topic_marginal = Some(theta.iter().map(|r| r[0] + r[1]).collect());

        let dominant: Vec<(Vec<usize>, f64)> = profiled
            .iter()
            .map(|(m, w)| (m.iter().map(|r| first_argmax(r)).collect(), *w))
            .collect();
        let mut mi = vec![vec![0.0; topics]; topics];
        for a in 0..topics {
            for b in 0..topics {
                let mut joint = [[0.0; 6]; 6];
                for (bins, w) in &dominant {
                    joint[bins[a]][bins[b]] += w / profiled_w;
                }
                let pa: Vec<f64> = (0..6).map(|h| joint[h].iter().sum()).collect();
                let pb: Vec<f64> = (0..6).map(|z| (0..6).map(|h| joint[h][z]).sum()).collect();
                let mut v = 0.0;
                for h in 0..6 {
                    for z in 0..6 {
                        if joint[h][z] > 0.0 {
                            v += joint[h][z] * (joint[h][z] / (pa[h] * pb[z])).ln();
                        }
                    }
                }
                mi[a][b] = v;
            }
        }
        expect.topic_mi = Some(mi);

        let dow = f64::from(date.weekday().num_days_from_monday());
        let month0 = f64::from(date.month() - 1);
        cols.insert("calendar:dow_sin".into(), (TAU * dow / 7.0).sin());
        cols.insert("calendar:dow_cos".into(), (TAU * dow / 7.0).cos());
        cols.insert("calendar:month_sin".into(), (TAU * month0 / 12.0).sin());
        cols.insert("calendar:month_cos".into(), (TAU * month0 / 12.0).cos());

        for t in &f.topics {
            let slug = topic_slug(&t.name);
            let todays: Vec<i8> = f
                .events
                .iter()
                .filter(|e| e.date == date && e.category == t.name)
                .map(|e| e.impact)
                .collect();
            for (i, col) in EVENT_COLUMNS.iter().enumerate() {
                let v = if i < 4 {
                    todays.contains(&[-1, 0, 1, 2][i])
                } else {
                    todays.is_empty()
                };
                cols.insert(format!("event:{slug}:{col}"), if v { 1.0 } else { 0.0 });
            }
        }
        expect.columns = Some(cols);
        out.push(expect);
    }
    out
}

#[derive(Default)]
struct Tally {
    checked: usize,
    mismatches: Vec<String>,
    max_err: f64,
}

impl Tally {
    fn check(&mut self, what: impl FnOnce() -> String, got: f64, want: f64) {
        self.checked += 1;
        let err = (got - want).abs();
        if err.is_nan() || err > TOL {
            if self.mismatches.len() < 10 {
                self.mismatches.push(format!("{}: got {got}, want {want}", what()));
            }
            self.max_err = f64::INFINITY;
        } else {
            self.max_err = self.max_err.max(err);
        }
    }

    fn fail(&mut self, msg: String) {
        if self.mismatches.len() < 10 {
            self.mismatches.push(msg);
        }
        self.max_err = f64::INFINITY;
    }
}

#[test]
fn feature_math_matches_naive_recomputation() {
    let timer = Instant::now();
    let f = fixture(20_240_917);
    let out = run_pipeline(&f);
    let expect = oracle(&f);
    let mut tally = Tally::default();

    let series = &out.series;
    if series.records.len() != DAYS {
        tally.fail(format!("{} records for {DAYS} days", series.records.len()));
    }
    let mut states = out.states.iter();
    let mut present = 0;
    for (day, (rec, exp)) in series.records.iter().zip(&expect).enumerate() {
        let Some(cols) = &exp.columns else {
            if !rec.missing {
                tally.fail(format!("day {day} should be missing"));
            }
            continue;
        };
        present += 1;
        if rec.missing {
            tally.fail(format!("day {day} unexpectedly missing ({:?})", rec.reason));
            continue;
        }
        let names: Vec<&str> = series.manifest.names().collect();
        if names.len() != cols.len() || !names.iter().all(|n| cols.contains_key(*n)) {
            tally.fail(format!("manifest has {} columns, oracle {}", names.len(), cols.len()));
            break;
        }
        for (name, &want) in cols {
            let got = rec.values[series.manifest.index_of(name).unwrap()];
            tally.check(|| format!("day {day} {name}"), got, want);
        }
        let state = states.next().expect("one state per present day");
        for (e, em) in state.emotions.iter().enumerate() {
            tally.check(|| format!("day {day} variance {e}"), em.variance, exp.variance[e]);
            tally.check(
                || format!("day {day} concentration {e}"),
                em.concentration,
                exp.concentration[e],
            );
            tally.check(|| format!("day {day} peak {e}"), em.peak_bin as f64, exp.peak[e] as f64);
        }
    }

    for (day, (a, exp)) in out.analysis.iter().zip(&expect).enumerate() {
        let window_ok = day + 1 >= CORR_WINDOW
            && expect[day + 1 - CORR_WINDOW..=day]
                .iter()
                .all(|e| e.emotion_means.is_some());
        match (&a.emotion_correlations, window_ok) {
            (Some(corr), true) => {
                let series: Vec<Vec<f64>> = (0..EMOTION_COUNT)
                    .map(|e| {
                        expect[day + 1 - CORR_WINDOW..=day]
                            .iter()
                            .map(|x| x.emotion_means.as_ref().unwrap()[e])
                            .collect()
                    })
                    .collect();
                for i in 0..EMOTION_COUNT {
                    for j in 0..EMOTION_COUNT {
                        let want = if i == j { 1.0 } else { pearson(&series[i], &series[j]) };
                        tally.check(|| format!("day {day} corr {i},{j}"), corr[i][j], want);
                    }
                }
            }
            (None, false) => {}
            (got, _) => tally.fail(format!(
                "day {day}: correlations present={} expected={window_ok}",
                got.is_some()
            )),
        }
        match (&a.topic_mi, &exp.topic_mi) {
            (Some(got), Some(want)) => {
                for (i, (gr, wr)) in got.iter().zip(want).enumerate() {
                    for (j, (g, w)) in gr.iter().zip(wr).enumerate() {
                        tally.check(|| format!("day {day} mi {i},{j}"), *g, *w);
                    }
                }
            }
            (None, None) => {}
            _ => tally.fail(format!("day {day}: topic MI presence differs")),
        }
        match (&a.topic_marginal, &exp.topic_marginal) {
            (Some(got), Some(want)) => {
                for (l, (g, w)) in got.iter().zip(want).enumerate() {
                    tally.check(|| format!("day {day} marginal {l}"), *g, *w);
                }
            }
            (None, None) => {}
            _ => tally.fail(format!("day {day}: topic marginal presence differs")),
        }
    }

    let elapsed = timer.elapsed();
    let passed = tally.mismatches.is_empty() && elapsed.as_secs_f64() < 10.0 && present > DAYS / 2;
    verdict(
        "feature-math oracle",
        passed,
        format!(
            "{DAYS} mini-days ({present} present, {} docs), {} values checked, max |err| {:.2e} (tol {TOL:e}), {} [budget 10s]{}",
            f.docs.len(),
            tally.checked,
            tally.max_err,
            secs(elapsed),
            if tally.mismatches.is_empty() {
                String::new()
            } else {
                format!("; first mismatches: {}", tally.mismatches.join("; "))
            }
        ),
    );
}
