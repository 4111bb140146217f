//! End-to-end featurization: keyphrases → core vocabulary → layers → daily
//! discourse states.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use tracing::{debug, info};

use crate::adapters::{
    EmotionScorer, FileEmbedder, FileScorer, FrequencyExtractor, HashEmbedder, KeyphraseExtractor, LexiconScorer,
    PhraseEmbedder, EMOTION_COUNT,
};
use crate::config::{AdapterConfig, EmbeddingSource, EmotionSource, FeatureConfig, MovementConfig};
use crate::corpus::{assign_layers, build_core_vocabulary, Corpus, KeywordStats, LayerAssignment};
use crate::features::{
    aggregate_thematic_distribution, assemble_discourse_state, calendar_features, compute_topic_centroids,
    content_thematic_profile, dominant_bins, emotion_aggregates, emotion_bin_distribution, emotion_correlations,
    emotion_dispersion, encode_key_events, platform_distribution_index, smooth_volume, topic_mi_matrix,
    volume_derivatives, DayComponents, DiscourseState, EmotionDay, FeatureManifest, FeatureRecord, FeatureSeries,
    KeyEvent, PlatformVolume, ThemeMatrix, VolumeFeatures,
};
use crate::{Error, Result};

pub const NO_DISCOURSE: &str = "no-discourse";
pub const NO_THEME: &str = "no-theme";

/// The three pluggable scorers.
pub struct Adapters {
    pub scorer: Box<dyn EmotionScorer>,
    pub extractor: Box<dyn KeyphraseExtractor>,
    pub embedder: Box<dyn PhraseEmbedder>,
}

impl Adapters {
    /// Builds adapters from config; relative file paths resolve against `base_dir`.
    pub fn from_config(cfg: &AdapterConfig, base_dir: &Path) -> Result<Self> {
        let scorer: Box<dyn EmotionScorer> = match &cfg.emotion {
            EmotionSource::Lexicon => Box::new(LexiconScorer::builtin()),
            EmotionSource::File { path } => Box::new(FileScorer::load(&base_dir.join(path))?),
        };
        let embedder: Box<dyn PhraseEmbedder> = match &cfg.embedding {
            EmbeddingSource::Hash { dim, seed } => Box::new(HashEmbedder::new(*dim, *seed)),
            EmbeddingSource::File { path } => Box::new(FileEmbedder::load(&base_dir.join(path))?),
        };
        Ok(Self {
            scorer,
            extractor: Box::new(FrequencyExtractor { k: cfg.keyphrase_count }),
            embedder,
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayeredCorpus {
    pub vocabulary: Vec<KeywordStats>,
    pub assignments: Vec<LayerAssignment>,
    /// Extracted keyphrases, aligned with the corpus documents.
    pub keyphrases: Vec<Vec<String>>,
}

impl LayeredCorpus {
    /// Document count per layer, index = layer.
    pub fn layer_counts(&self, max_layer: usize) -> Vec<usize> {
        let mut counts = vec![0; max_layer + 1];
        for a in &self.assignments {
            counts[a.layer as usize] += 1;
        }
        counts
    }
}

pub fn layer_corpus(
    corpus: &Corpus,
    movement: &MovementConfig,
    extractor: &dyn KeyphraseExtractor,
) -> Result<LayeredCorpus> {
    let docs = corpus.documents();
    let keyphrases: Vec<Vec<String>> = docs.iter().map(|d| extractor.extract(d)).collect();
    let vocabulary = build_core_vocabulary(docs, &keyphrases, &movement.token, movement.percentile_cut)?;
    let assignments = assign_layers(docs, &vocabulary, &movement.token, &movement.thresholds)?;
    info!(
        documents = docs.len(),
        vocabulary = vocabulary.len(),
        layered = assignments.len(),
        "layered corpus"
    );
    Ok(LayeredCorpus {
        vocabulary,
        assignments,
        keyphrases,
    })
}

/// Per-day analysis outputs kept out of the model layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayAnalysis {
    pub date: NaiveDate,
    /// Pearson correlations of the emotion means over the trailing window,
    /// when every day in it has discourse.
    pub emotion_correlations: Option<Vec<Vec<f64>>>,
    pub topic_mi: Option<Vec<Vec<f64>>>,
    /// Core + Close mass per topic.
    pub topic_marginal: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeaturizeSummary {
    pub first_day: NaiveDate,
    pub last_day: NaiveDate,
    pub days: usize,
    pub present_days: usize,
    pub missing_days: usize,
    pub layered_documents: usize,
    pub skipped_documents: usize,
    pub feature_count: usize,
    pub manifest_hash: String,
}

pub struct FeaturizeOutput {
    pub series: FeatureSeries,
    pub states: Vec<DiscourseState>,
    pub analysis: Vec<DayAnalysis>,
    pub summary: FeaturizeSummary,
}

struct Item {
    day: usize,
    platform: usize,
    weight: f64,
    scores: Vec<f64>,
    profile: Option<ThemeMatrix<f64>>,
}

pub fn manifest_for(movement: &MovementConfig, features: &FeatureConfig) -> FeatureManifest {
    let topics = movement.topic_names();
    FeatureManifest::build(&movement.platforms, &topics, &topics, features.emotion_layout)
}

/// Computes one record per calendar day between the first and last document.
pub fn featurize(
    corpus: &Corpus,
    layered: &LayeredCorpus,
    movement: &MovementConfig,
    features: &FeatureConfig,
    adapters: &Adapters,
    events: &[KeyEvent],
) -> Result<FeaturizeOutput> {
    let docs = corpus.documents();
    let first_day = docs
        .iter()
        .map(|d| d.day())
        .min()
        .ok_or_else(|| Error::invalid("corpus is empty"))?;
    let last_day = docs.iter().map(|d| d.day()).max().expect("non-empty");
    let n_days = (last_day - first_day).num_days() as usize + 1;
    let topics = movement.topic_names();
    let manifest = manifest_for(movement, features);
    let centroids = compute_topic_centroids(&movement.topics, adapters.embedder.as_ref())?;
    let n_platforms = movement.platforms.len();

    let relevance: HashMap<&str, f64> = layered
        .assignments
        .iter()
        .map(|a| (a.document_id.as_str(), a.relevance))
        .collect();
    let mut embedding_cache: HashMap<String, Vec<f64>> = HashMap::new();
    let mut items = Vec::new();
    let mut skipped = 0usize;
    for (doc, phrases) in docs.iter().zip(&layered.keyphrases) {
        let Some(&rho) = relevance.get(doc.id.as_str()) else {
            continue;
        };
        let Some(platform) = movement.platforms.iter().position(|p| *p == doc.platform) else {
            skipped += 1;
            continue;
        };
        let scores = adapters.scorer.score(doc)?.scores;
        let mut vectors = Vec::with_capacity(phrases.len());
        for p in phrases {
            if !embedding_cache.contains_key(p) {
                embedding_cache.insert(p.clone(), adapters.embedder.embed(p)?.vector);
            }
            vectors.push(embedding_cache[p].clone());
        }
        items.push(Item {
            day: (doc.day() - first_day).num_days() as usize,
            platform,
            weight: doc.engagement * rho,
            scores,
            profile: content_thematic_profile(&vectors, &centroids)?,
        });
    }
    if skipped > 0 {
        debug!(skipped, "documents on platforms outside the movement config");
    }

    let mut by_day: Vec<Vec<&Item>> = vec![Vec::new(); n_days];
    for it in &items {
        by_day[it.day].push(it);
    }

    let mut raw = vec![vec![0.0; n_days]; n_platforms];
    for it in &items {
        raw[it.platform][it.day] += it.weight;
    }
    let mut smoothed = Vec::with_capacity(n_platforms);
    let mut derivs = Vec::with_capacity(n_platforms);
    for series in &raw {
        smoothed.push(smooth_volume(
            series,
            features.smoothing_window,
            features.smoothing_decay,
        )?);
        derivs.push(volume_derivatives(series, features.baseline_window)?);
    }

    let mut records = Vec::with_capacity(n_days);
    let mut states = Vec::new();
    let mut analysis = Vec::with_capacity(n_days);
    let mut emotion_means: Vec<Option<Vec<f64>>> = Vec::with_capacity(n_days);
    for (d, day_items) in by_day.iter().enumerate() {
        let date = first_day + chrono::Duration::days(d as i64);
        let day_raw: Vec<f64> = (0..n_platforms).map(|p| raw[p][d]).collect();
        let mut day_analysis = DayAnalysis {
            date,
            emotion_correlations: None,
            topic_mi: None,
            topic_marginal: None,
        };
        let Some(pdi) = platform_distribution_index(&day_raw) else {
            records.push(FeatureRecord::missing(date, NO_DISCOURSE));
            emotion_means.push(None);
            analysis.push(day_analysis);
            continue;
        };
        let volume = VolumeFeatures {
            platforms: (0..n_platforms)
                .map(|p| PlatformVolume {
                    platform: movement.platforms[p].clone(),
                    raw: raw[p][d],
                    smoothed: smoothed[p][d],
                    velocity: derivs[p].velocity[d],
                    acceleration: derivs[p].acceleration[d],
                    standardized: derivs[p].standardized[d],
                })
                .collect(),
            pdi,
        };

        let mut emotions = Vec::with_capacity(EMOTION_COUNT);
        for e in 0..EMOTION_COUNT {
            let pairs: Vec<(f64, f64)> = day_items.iter().map(|it| (it.scores[e], it.weight)).collect();
            let g =
                emotion_bin_distribution(&pairs)?.ok_or_else(|| Error::invalid("zero weight on a day with volume"))?;
            let agg = emotion_aggregates(&g);
            let (concentration, entropy) = emotion_dispersion(&g);
            emotions.push(EmotionDay {
                bins: g,
                mean_intensity: agg.mean_intensity,
                variance: agg.variance,
                peak_bin: agg.peak_bin,
                concentration,
                entropy,
            });
        }
        emotion_means.push(Some(emotions.iter().map(|e| e.mean_intensity).collect()));
        day_analysis.emotion_correlations = trailing_correlations(&emotion_means, features.correlation_window)?;

        let profiled: Vec<(&ThemeMatrix<f64>, f64)> = day_items
            .iter()
            .filter_map(|it| it.profile.as_ref().map(|m| (m, it.weight)))
            .collect();
        let Some(themes) = aggregate_thematic_distribution(&profiled)? else {
            records.push(FeatureRecord::missing(date, NO_THEME));
            analysis.push(day_analysis);
            continue;
        };
        let dominant: Vec<(Vec<usize>, f64)> = profiled.iter().map(|(m, w)| (dominant_bins(m), *w)).collect();
        day_analysis.topic_mi = topic_mi_matrix(&dominant, topics.len());
        day_analysis.topic_marginal = Some(themes.iter().map(|row| row[0] + row[1]).collect());

        let parts = DayComponents {
            volume: Some(volume),
            emotions: Some(emotions),
            themes: Some(themes),
            calendar: Some(calendar_features(date)),
            key_events: Some(encode_key_events(events, date, &topics)?),
        };
        let (state, values) = assemble_discourse_state(date, parts, &manifest)?;
        records.push(FeatureRecord::present(date, values));
        states.push(state);
        analysis.push(day_analysis);
    }

    let present_days = states.len();
    let summary = FeaturizeSummary {
        first_day,
        last_day,
        days: n_days,
        present_days,
        missing_days: n_days - present_days,
        layered_documents: items.len(),
        skipped_documents: skipped,
        feature_count: manifest.len(),
        manifest_hash: manifest.hash(),
    };
    info!(days = n_days, present = present_days, "featurized");
    Ok(FeaturizeOutput {
        series: FeatureSeries::new(manifest, records)?,
        states,
        analysis,
        summary,
    })
}

fn trailing_correlations(means: &[Option<Vec<f64>>], window: usize) -> Result<Option<Vec<Vec<f64>>>> {
    if means.len() < window || window < 2 {
        return Ok(None);
    }
    let tail = &means[means.len() - window..];
    if tail.iter().any(Option::is_none) {
        return Ok(None);
    }
    let series: Vec<Vec<f64>> = (0..EMOTION_COUNT)
        .map(|e| tail.iter().map(|m| m.as_ref().expect("checked")[e]).collect())
        .collect();
    Ok(Some(emotion_correlations(&series, window, window - 1)?.values))
}

pub fn write_analysis(path: &Path, analysis: &[DayAnalysis]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for a in analysis {
        serde_json::to_writer(&mut w, a)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
