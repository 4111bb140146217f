use std::collections::{HashMap, HashSet};
use std::sync::OnceLock;

use crate::corpus::text::tokenize;
use crate::corpus::Document;

const STOPWORDS_FILE: &str = include_str!("../../data/stopwords.txt");

pub const DEFAULT_KEYPHRASE_COUNT: usize = 10;

pub fn stopwords() -> &'static HashSet<String> {
    static WORDS: OnceLock<HashSet<String>> = OnceLock::new();
    WORDS.get_or_init(|| {
        STOPWORDS_FILE
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(String::from)
            .collect()
    })
}

pub trait KeyphraseExtractor: Send + Sync {
    fn extract(&self, doc: &Document) -> Vec<String>;
}

/// Ingest-provided keyphrases win; otherwise the `k` most frequent
/// non-stopword tokens of title and body, ties broken lexicographically.
#[derive(Debug, Clone)]
pub struct FrequencyExtractor {
    pub k: usize,
}

impl Default for FrequencyExtractor {
    fn default() -> Self {
        Self {
            k: DEFAULT_KEYPHRASE_COUNT,
        }
    }
}

impl KeyphraseExtractor for FrequencyExtractor {
    fn extract(&self, doc: &Document) -> Vec<String> {
        if let Some(kp) = &doc.keyphrases {
            return kp.clone();
        }
        let stop = stopwords();
        let mut counts: HashMap<String, usize> = HashMap::new();
        for t in tokenize(&doc.full_text()) {
            if !stop.contains(&t) {
                *counts.entry(t).or_insert(0) += 1;
            }
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        ranked.into_iter().take(self.k).map(|(t, _)| t).collect()
    }
}
