//! Seeded synthetic corpora with weekly seasonality, drifting emotion
//! baselines and key events that trigger volume and emotion spikes.
//!
//! Every generated day, event and spike is known, so forecasts can be scored
//! against ground truth.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, TimeZone, Utc};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::adapters::FileScorer;
use crate::adapters::{emotion_index, emotion_labels, write_emotion_scores, EmotionScores, EMOTION_COUNT};
use crate::config::{Config, EmotionSource, FeatureConfig, MovementConfig};
use crate::corpus::Corpus;
use crate::corpus::{write_documents, Document};
use crate::features::{default_taxonomy, write_event_table, KeyEvent, TopicSpec};
use crate::pipeline::{featurize, layer_corpus, Adapters, FeaturizeOutput};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub days: usize,
    pub start: NaiveDate,
    pub seed: u64,
    pub movement_token: String,
    pub platforms: Vec<String>,
    /// Mean movement documents per day on each platform.
    pub docs_per_day: Vec<f64>,
    /// Mean off-topic documents per day on each platform.
    pub noise_docs_per_day: f64,
    /// Relative amplitude of the weekly cycle.
    pub weekly_amplitude: f64,
    /// Inclusive range of days between consecutive events.
    pub event_gap: (usize, usize),
    /// Volume multiple on an event day.
    pub spike_factor: f64,
    /// Volume multiple on the day after an event.
    pub aftershock_factor: f64,
    pub event_categories: Vec<String>,
    /// Emotions lifted by events opposing the movement (impact 2).
    pub opposing_emotions: Vec<String>,
    /// Emotions lifted by events supporting the movement (impact 1).
    pub supporting_emotions: Vec<String>,
    /// Standard deviation of per-document emotion noise.
    pub emotion_noise: f64,
    /// Amplitude of the slow drift in baseline emotion levels.
    pub regime_amplitude: f64,
    pub regime_period_days: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            days: 120,
            start: NaiveDate::from_ymd_opt(2024, 9, 1).expect("valid date"),
            seed: 7,
            movement_token: "#MeToo".into(),
            platforms: vec!["reddit".into(), "news".into()],
            docs_per_day: vec![24.0, 8.0],
            noise_docs_per_day: 4.0,
            weekly_amplitude: 0.3,
            event_gap: (10, 16),
            spike_factor: 4.0,
            aftershock_factor: 1.5,
            event_categories: vec!["Gender Equality".into(), "Violence".into(), "Human Rights".into()],
            opposing_emotions: vec!["anger".into(), "fear".into(), "sadness".into()],
            supporting_emotions: vec!["admiration".into(), "joy".into(), "optimism".into()],
            emotion_noise: 0.08,
            regime_amplitude: 0.04,
            regime_period_days: 56.0,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.days < 2 {
            return Err(Error::invalid("synthetic corpus needs at least 2 days"));
        }
        if self.platforms.is_empty() || self.platforms.len() != self.docs_per_day.len() {
            return Err(Error::invalid("docs_per_day must list one rate per platform"));
        }
        if self.event_categories.is_empty() {
            return Err(Error::invalid("at least one event category is required"));
        }
        if self.event_gap.0 == 0 || self.event_gap.0 > self.event_gap.1 {
            return Err(Error::invalid("event_gap must be a non-empty range of positive days"));
        }
        if self.spike_factor < 1.0 || self.aftershock_factor < 1.0 {
            return Err(Error::invalid("spike factors must be >= 1"));
        }
        let taxonomy = default_taxonomy();
        for c in &self.event_categories {
            if !taxonomy.iter().any(|t| &t.name == c) {
                return Err(Error::invalid(format!("unknown event category `{c}`")));
            }
        }
        for e in self.opposing_emotions.iter().chain(&self.supporting_emotions) {
            if emotion_index(e).is_none() {
                return Err(Error::invalid(format!("unknown emotion `{e}`")));
            }
        }
        Ok(())
    }

    /// Emotions an event of the given impact lifts.
    pub fn sensitive_emotions(&self, impact: i8) -> &[String] {
        match impact {
            2 => &self.opposing_emotions,
            1 => &self.supporting_emotions,
            _ => &[],
        }
    }
}

/// Keywords that co-occur with the movement token.
const MOVEMENT_TERMS: [&str; 8] = [
    "harassment",
    "consent",
    "survivors",
    "accountability",
    "workplace abuse",
    "speak out",
    "assault",
    "predator",
];

const FILLER: [&str; 24] = [
    "city", "council", "weather", "market", "school", "report", "meeting", "season", "traffic", "budget", "music",
    "festival", "river", "airport", "library", "recipe", "league", "garden", "museum", "bridge", "harbor", "village",
    "train", "bakery",
];

/// What was injected, for scoring forecasts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub events: Vec<KeyEvent>,
    /// Emotion labels each event lifts, keyed by event date.
    pub lifted_emotions: BTreeMap<NaiveDate, Vec<String>>,
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
}

impl SynthTruth {
    pub fn event_days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.lifted_emotions.keys().copied()
    }
}

pub struct SynthCorpus {
    pub documents: Vec<Document>,
    pub scores: Vec<EmotionScores>,
    pub events: Vec<KeyEvent>,
    pub truth: SynthTruth,
    pub movement: MovementConfig,
}

fn movement_config(cfg: &SynthConfig) -> MovementConfig {
    let mut m = MovementConfig::new("synthetic", &cfg.movement_token);
    m.platforms = cfg.platforms.clone();
    m.keywords = MOVEMENT_TERMS.iter().map(|s| s.to_string()).collect();
    // Eight movement terms dominate the co-occurrence distribution; this cut
    // keeps roughly them.
    m.percentile_cut = 85.0;
    m
}

struct DocSpec<'a> {
    platform: usize,
    day: NaiveDate,
    mention: bool,
    topic: &'a TopicSpec,
    lifted: &'a [usize],
}

struct Generator<'a> {
    cfg: &'a SynthConfig,
    rng: ChaCha8Rng,
    base_levels: Vec<f64>,
    phases: Vec<f64>,
    docs: Vec<Document>,
    scores: Vec<EmotionScores>,
}

impl Generator<'_> {
    fn emotion_level(&self, e: usize, t: usize) -> f64 {
        let angle = std::f64::consts::TAU * t as f64 / self.cfg.regime_period_days + self.phases[e];
        self.base_levels[e] + self.cfg.regime_amplitude * angle.sin()
    }

    fn document(&mut self, spec: DocSpec<'_>, t: usize) {
        let id = format!("{}-{:06}", self.cfg.platforms[spec.platform], self.docs.len());
        let hour = self.rng.random_range(0..24);
        let minute = self.rng.random_range(0..60);
        let timestamp = Utc
            .with_ymd_and_hms(spec.day.year(), spec.day.month(), spec.day.day(), hour, minute, 0)
            .single()
            .expect("valid timestamp");
        let filler: Vec<&str> = FILLER.choose_multiple(&mut self.rng, 6).copied().collect();
        let n_terms = if spec.mention {
            self.rng.random_range(2..=4)
        } else {
            self.rng.random_range(1..=4)
        };
        let terms: Vec<&str> = MOVEMENT_TERMS
            .choose_multiple(&mut self.rng, n_terms)
            .copied()
            .collect();
        let topic_phrases: Vec<String> = spec
            .topic
            .keyphrases
            .choose_multiple(&mut self.rng, 2)
            .cloned()
            .collect();
        let title = if spec.mention {
            format!("{} {} {}", self.cfg.movement_token, filler[0], filler[1])
        } else {
            format!("{} {}", filler[0], filler[1])
        };
        let body = format!(
            "{} {} {}. {} {}",
            filler[2..].join(" "),
            terms.join(" and "),
            "today",
            topic_phrases.join(", "),
            filler[5]
        );
        let mut keyphrases: Vec<String> = terms.iter().map(|s| s.to_string()).collect();
        keyphrases.extend(topic_phrases);
        let engagement = if spec.platform == 0 {
            LogNormal::<f64>::new(2.0, 0.3)
                .expect("valid")
                .sample(&mut self.rng)
                .round()
                .max(1.0)
        } else {
            1.0
        };
        let noise = Normal::new(0.0, self.cfg.emotion_noise).expect("valid");
        let scores = (0..EMOTION_COUNT)
            .map(|e| {
                let v = if spec.lifted.contains(&e) {
                    self.rng.random_range(0.7..0.95)
                } else {
                    self.emotion_level(e, t) + noise.sample(&mut self.rng)
                };
                v.clamp(0.0, 1.0)
            })
            .collect();
        self.scores.push(EmotionScores {
            document_id: id.clone(),
            scores,
        });
        self.docs.push(Document {
            id,
            platform: self.cfg.platforms[spec.platform].clone(),
            timestamp,
            title,
            body,
            engagement,
            keyphrases: Some(keyphrases),
        });
    }

    fn noise_document(&mut self, platform: usize, day: NaiveDate) {
        let id = format!("{}-{:06}", self.cfg.platforms[platform], self.docs.len());
        let words: Vec<&str> = FILLER.choose_multiple(&mut self.rng, 8).copied().collect();
        let timestamp = Utc
            .with_ymd_and_hms(day.year(), day.month(), day.day(), 12, 0, 0)
            .single()
            .expect("valid timestamp");
        self.scores.push(EmotionScores {
            document_id: id.clone(),
            scores: vec![0.1; EMOTION_COUNT],
        });
        self.docs.push(Document {
            id,
            platform: self.cfg.platforms[platform].clone(),
            timestamp,
            title: words[..2].join(" "),
            body: words[2..].join(" "),
            engagement: 1.0,
            keyphrases: Some(words[2..5].iter().map(|s| s.to_string()).collect()),
        });
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).expect("positive mean").sample(rng) as usize
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let neutral = emotion_index("neutral").expect("neutral label");
    let base_levels: Vec<f64> = (0..EMOTION_COUNT)
        .map(|e| if e == neutral { 0.4 } else { rng.random_range(0.05..0.3) })
        .collect();
    let phases: Vec<f64> = (0..EMOTION_COUNT)
        .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
        .collect();
    let taxonomy = default_taxonomy();
    let lifted_for = |impact: i8| -> Vec<usize> {
        cfg.sensitive_emotions(impact)
            .iter()
            .map(|l| emotion_index(l).expect("validated"))
            .collect()
    };

    // Event schedule: the first event lands after one full gap. Category and
    // impact cycle through shuffled blocks of every combination so each one
    // recurs regularly.
    let combos: Vec<(usize, i8)> = (0..cfg.event_categories.len()).flat_map(|c| [(c, 1), (c, 2)]).collect();
    let mut block: Vec<(usize, i8)> = Vec::new();
    let mut events = Vec::new();
    let mut day = rng.random_range(cfg.event_gap.0..=cfg.event_gap.1);
    while day < cfg.days {
        if block.is_empty() {
            block = combos.clone();
            block.shuffle(&mut rng);
        }
        let (c, impact) = block.pop().expect("refilled");
        let category = cfg.event_categories[c].clone();
        events.push(KeyEvent {
            date: cfg.start + Duration::days(day as i64),
            category,
            impact,
            magnitude: 1.0,
            label: format!("synthetic event {}", events.len() + 1),
        });
        day += rng.random_range(cfg.event_gap.0..=cfg.event_gap.1);
    }
    let mut by_day: BTreeMap<NaiveDate, &KeyEvent> = BTreeMap::new();
    for e in &events {
        by_day.insert(e.date, e);
    }

    let mut g = Generator {
        cfg,
        rng,
        base_levels,
        phases,
        docs: Vec::new(),
        scores: Vec::new(),
    };
    for t in 0..cfg.days {
        let date = cfg.start + Duration::days(t as i64);
        let dow = date.weekday().num_days_from_monday() as f64;
        let season = 1.0 + cfg.weekly_amplitude * (std::f64::consts::TAU * dow / 7.0).sin();
        let today = by_day.get(&date).copied();
        let yesterday = by_day.get(&(date - Duration::days(1))).copied();
        for p in 0..cfg.platforms.len() {
            let base = poisson(&mut g.rng, cfg.docs_per_day[p] * season);
            for _ in 0..base {
                let topic = taxonomy.choose(&mut g.rng).expect("taxonomy");
                let mention = g.rng.random_bool(0.4);
                g.document(
                    DocSpec {
                        platform: p,
                        day: date,
                        mention,
                        topic,
                        lifted: &[],
                    },
                    t,
                );
            }
            let mut extra = Vec::new();
            if let Some(e) = today {
                extra.push((e, (cfg.spike_factor - 1.0) * cfg.docs_per_day[p]));
            }
            if let Some(e) = yesterday {
                extra.push((e, (cfg.aftershock_factor - 1.0) * cfg.docs_per_day[p]));
            }
            for (event, rate) in extra {
                let topic = taxonomy.iter().find(|tp| tp.name == event.category).expect("validated");
                let lifted = lifted_for(event.impact);
                for _ in 0..rate.round() as usize {
                    let mention = g.rng.random_bool(0.6);
                    g.document(
                        DocSpec {
                            platform: p,
                            day: date,
                            mention,
                            topic,
                            lifted: &lifted,
                        },
                        t,
                    );
                }
            }
            for _ in 0..poisson(&mut g.rng, cfg.noise_docs_per_day) {
                g.noise_document(p, date);
            }
        }
    }

    let truth = SynthTruth {
        lifted_emotions: events
            .iter()
            .map(|e| (e.date, cfg.sensitive_emotions(e.impact).to_vec()))
            .collect(),
        events: events.clone(),
        first_day: cfg.start,
        last_day: cfg.start + Duration::days(cfg.days as i64 - 1),
    };
    debug_assert_eq!(emotion_labels().len(), EMOTION_COUNT);
    Ok(SynthCorpus {
        documents: g.docs,
        scores: g.scores,
        events,
        truth,
        movement: movement_config(cfg),
    })
}

pub const DOCUMENTS_FILE: &str = "documents.jsonl";
pub const SCORES_FILE: &str = "emotion_scores.jsonl";
pub const EVENTS_FILE: &str = "events.jsonl";
pub const TRUTH_FILE: &str = "truth.json";
pub const CONFIG_FILE: &str = "discourse.toml";

impl SynthCorpus {
    /// A pipeline config for this corpus: data under `data/`, emotion scores
    /// read from the generated score file.
    pub fn config(&self) -> Config {
        let mut cfg = Config {
            movements: vec![self.movement.clone()],
            ..Config::default()
        };
        cfg.features.adapters.emotion = EmotionSource::File {
            path: SCORES_FILE.into(),
        };
        cfg
    }

    /// Layers and featurizes the corpus with its own emotion scores and the
    /// configured embedder.
    pub fn featurize(&self, features: &FeatureConfig) -> Result<FeaturizeOutput> {
        let corpus = Corpus::from_documents(self.documents.clone())?;
        let mut adapter_cfg = features.adapters.clone();
        adapter_cfg.emotion = EmotionSource::Lexicon;
        let mut adapters = Adapters::from_config(&adapter_cfg, Path::new("."))?;
        adapters.scorer = Box::new(FileScorer::from_records(self.scores.clone())?);
        let layered = layer_corpus(&corpus, &self.movement, adapters.extractor.as_ref())?;
        featurize(&corpus, &layered, &self.movement, features, &adapters, &self.events)
    }

    /// Writes documents, emotion scores, events, ground truth and a config
    /// into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_documents(&dir.join(DOCUMENTS_FILE), &self.documents)?;
        write_emotion_scores(&dir.join(SCORES_FILE), &self.scores)?;
        write_event_table(&dir.join(EVENTS_FILE), &self.events)?;
        let truth = serde_json::to_string_pretty(&self.truth)?;
        let p = dir.join(TRUTH_FILE);
        std::fs::write(&p, truth + "\n").map_err(|e| Error::io(&p, e))?;
        let text = self.config().to_toml();
        let p = dir.join(CONFIG_FILE);
        std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
    }
}
