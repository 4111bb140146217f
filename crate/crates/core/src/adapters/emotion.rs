use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::corpus::text::tokenize;
use crate::corpus::Document;
use crate::{Error, Result};

/// Number of emotion dimensions.
pub const EMOTION_COUNT: usize = 28;

const LABELS_FILE: &str = include_str!("../../data/goemotions.txt");
const LEXICON_FILE: &str = include_str!("../../data/emotion_lexicon.json");

/// The 28 emotion labels in canonical order. Every emotion array indexes
/// against this list.
pub fn emotion_labels() -> &'static [String] {
    static LABELS: OnceLock<Vec<String>> = OnceLock::new();
    LABELS.get_or_init(|| {
        let labels: Vec<String> = LABELS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(String::from)
            .collect();
        assert_eq!(labels.len(), EMOTION_COUNT, "goemotions.txt must list 28 labels");
        labels
    })
}

pub fn emotion_index(label: &str) -> Option<usize> {
    emotion_labels().iter().position(|l| l.eq_ignore_ascii_case(label))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionScores {
    #[serde(rename = "id")]
    pub document_id: String,
    pub scores: Vec<f64>,
}

impl EmotionScores {
    pub fn validate(&self) -> Result<()> {
        if self.scores.len() != EMOTION_COUNT {
            return Err(Error::invalid(format!(
                "document `{}`: expected {EMOTION_COUNT} emotion scores, got {}",
                self.document_id,
                self.scores.len()
            )));
        }
        if let Some(bad) = self.scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::invalid(format!(
                "document `{}`: emotion score {bad} outside [0, 1]",
                self.document_id
            )));
        }
        Ok(())
    }
}

pub trait EmotionScorer: Send + Sync {
    fn score(&self, doc: &Document) -> Result<EmotionScores>;
}

/// Scores each emotion by the share of document tokens found in that
/// emotion's lexicon.
#[derive(Debug, Clone)]
pub struct LexiconScorer {
    token_to_emotion: HashMap<String, usize>,
}

impl LexiconScorer {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Self {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(LEXICON_FILE).expect("shipped lexicon parses");
        Self::from_lexicon(&raw).expect("shipped lexicon is valid")
    }

    pub fn from_lexicon(lexicon: &BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut token_to_emotion = HashMap::new();
        for (label, words) in lexicon {
            let idx = emotion_index(label).ok_or_else(|| Error::invalid(format!("unknown emotion label `{label}`")))?;
            for w in words {
                token_to_emotion.insert(w.to_lowercase(), idx);
            }
        }
        Ok(Self { token_to_emotion })
    }
}

impl EmotionScorer for LexiconScorer {
    fn score(&self, doc: &Document) -> Result<EmotionScores> {
        let tokens = tokenize(&doc.full_text());
        let mut hits = [0usize; EMOTION_COUNT];
        for t in &tokens {
            if let Some(&i) = self.token_to_emotion.get(t) {
                hits[i] += 1;
            }
        }
        let total = tokens.len().max(1) as f64;
        Ok(EmotionScores {
            document_id: doc.id.clone(),
            scores: hits.iter().map(|&h| (h as f64 / total).clamp(0.0, 1.0)).collect(),
        })
    }
}

/// Serves scores precomputed by an external model, keyed by document id.
#[derive(Debug, Clone, Default)]
pub struct FileScorer {
    scores: HashMap<String, Vec<f64>>,
}

impl FileScorer {
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut scores = HashMap::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EmotionScores = serde_json::from_str(&line)
                .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?;
            rec.validate()?;
            scores.insert(rec.document_id, rec.scores);
        }
        Ok(Self { scores })
    }

    pub fn from_records(records: impl IntoIterator<Item = EmotionScores>) -> Result<Self> {
        let mut scores = HashMap::new();
        for r in records {
            r.validate()?;
            scores.insert(r.document_id, r.scores);
        }
        Ok(Self { scores })
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl EmotionScorer for FileScorer {
    fn score(&self, doc: &Document) -> Result<EmotionScores> {
        self.scores
            .get(&doc.id)
            .map(|s| EmotionScores {
                document_id: doc.id.clone(),
                scores: s.clone(),
            })
            .ok_or_else(|| Error::MissingScores(doc.id.clone()))
    }
}

pub fn write_emotion_scores(path: &Path, records: &[EmotionScores]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
