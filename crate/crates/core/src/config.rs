//! Run configuration: one TOML file drives every stage.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{validate_thresholds, DEFAULT_THRESHOLDS};
use crate::features::{
    default_taxonomy, EmotionLayout, TopicSpec, DEFAULT_BASELINE_WINDOW, DEFAULT_CORRELATION_WINDOW,
    DEFAULT_SMOOTHING_DECAY, DEFAULT_SMOOTHING_WINDOW,
};
use crate::forecast::ModelConfig;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MovementConfig {
    pub id: String,
    /// Movement token searched for in titles and bodies, e.g. "#MeToo".
    pub token: String,
    /// Search keywords used when collecting the corpus.
    #[serde(default)]
    pub keywords: Vec<String>,
    #[serde(default = "default_taxonomy")]
    pub topics: Vec<TopicSpec>,
    #[serde(default = "default_platforms")]
    pub platforms: Vec<String>,
    #[serde(default = "default_thresholds")]
    pub thresholds: Vec<f64>,
    /// Percentile of the co-occurrence distribution a keyword must reach to
    /// enter the core vocabulary.
    #[serde(default = "default_percentile_cut")]
    pub percentile_cut: f64,
}

fn default_platforms() -> Vec<String> {
    vec!["reddit".into(), "news".into()]
}

fn default_thresholds() -> Vec<f64> {
    DEFAULT_THRESHOLDS.to_vec()
}

fn default_percentile_cut() -> f64 {
    99.0
}

impl MovementConfig {
    pub fn new(id: &str, token: &str) -> Self {
        Self {
            id: id.into(),
            token: token.into(),
            keywords: Vec::new(),
            topics: default_taxonomy(),
            platforms: default_platforms(),
            thresholds: default_thresholds(),
            percentile_cut: default_percentile_cut(),
        }
    }

    pub fn topic_names(&self) -> Vec<String> {
        self.topics.iter().map(|t| t.name.clone()).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.trim().is_empty() || self.token.trim().is_empty() {
            return Err(Error::invalid("movement id and token must be non-empty"));
        }
        if self.topics.is_empty() {
            return Err(Error::invalid(format!("movement `{}` has an empty taxonomy", self.id)));
        }
        if self.platforms.is_empty() {
            return Err(Error::invalid(format!("movement `{}` lists no platforms", self.id)));
        }
        validate_thresholds(&self.thresholds)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmotionSource {
    /// Built-in word-list scorer.
    Lexicon,
    /// Precomputed `{id, scores}` JSON-lines.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EmbeddingSource {
    Hash {
        dim: usize,
        seed: u64,
    },
    /// Precomputed `{phrase, vector}` JSON-lines.
    File {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdapterConfig {
    pub emotion: EmotionSource,
    pub embedding: EmbeddingSource,
    pub keyphrase_count: usize,
    /// Text passed to the emotion scorer. Only "title_body" is supported.
    pub emotion_text: String,
}

impl Default for AdapterConfig {
    fn default() -> Self {
        Self {
            emotion: EmotionSource::Lexicon,
            embedding: EmbeddingSource::Hash {
                dim: crate::adapters::DEFAULT_EMBEDDING_DIM,
                seed: 0,
            },
            keyphrase_count: crate::adapters::DEFAULT_KEYPHRASE_COUNT,
            emotion_text: "title_body".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub smoothing_window: usize,
    pub smoothing_decay: f64,
    pub baseline_window: usize,
    pub correlation_window: usize,
    pub emotion_layout: EmotionLayout,
    pub adapters: AdapterConfig,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            smoothing_window: DEFAULT_SMOOTHING_WINDOW,
            smoothing_decay: DEFAULT_SMOOTHING_DECAY,
            baseline_window: DEFAULT_BASELINE_WINDOW,
            correlation_window: DEFAULT_CORRELATION_WINDOW,
            emotion_layout: EmotionLayout::Base,
            adapters: AdapterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Days of history behind the ±2σ direction band.
    pub rolling_window: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { rolling_window: 28 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub data_dir: PathBuf,
    pub movements: Vec<MovementConfig>,
    pub features: FeatureConfig,
    pub model: ModelConfig,
    pub evaluation: EvaluationConfig,
    pub service: ServiceConfig,
    /// Directory relative paths resolve against: the config file's directory.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("data"),
            movements: vec![MovementConfig::new("metoo", "#MeToo")],
            features: FeatureConfig::default(),
            model: ModelConfig::default(),
            evaluation: EvaluationConfig::default(),
            service: ServiceConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg: Config = toml::from_str(&text).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    /// The data directory, resolved against `base_dir` when relative.
    pub fn data_path(&self) -> PathBuf {
        self.base_dir.join(&self.data_dir)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        for m in &self.movements {
            m.validate()?;
        }
        let mut ids: Vec<&str> = self.movements.iter().map(|m| m.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate movement id"));
        }
        if self.features.adapters.emotion_text != "title_body" {
            return Err(Error::invalid(format!(
                "unsupported emotion_text `{}`",
                self.features.adapters.emotion_text
            )));
        }
        self.model.validate()
    }

    pub fn movement(&self, id: &str) -> Option<&MovementConfig> {
        self.movements.iter().find(|m| m.id == id)
    }
}
