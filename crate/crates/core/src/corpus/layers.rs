use serde::{Deserialize, Serialize};

use super::text::{contains_sequence, tokenize};
use super::vocabulary::{mentions_movement, KeywordStats};
use super::Document;
use crate::{Error, Result};

pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.30, 0.20, 0.10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerAssignment {
    pub document_id: String,
    pub layer: u8,
    pub matched_fraction: f64,
    pub relevance: f64,
}

/// Relevance of a layer: 1 − ℓ / L_max.
pub fn relevance(layer: u8, max_layer: usize) -> f64 {
    1.0 - layer as f64 / max_layer as f64
}

/// Fraction of the core vocabulary present (as contiguous token runs) in the
/// document's title or body.
pub fn matched_fraction(doc: &Document, vocab_tokens: &[Vec<String>]) -> f64 {
    if vocab_tokens.is_empty() {
        return 0.0;
    }
    let title = tokenize(&doc.title);
    let body = tokenize(&doc.body);
    let hits = vocab_tokens
        .iter()
        .filter(|k| contains_sequence(&title, k) || contains_sequence(&body, k))
        .count();
    hits as f64 / vocab_tokens.len() as f64
}

/// Layer for a single document given its direct-mention flag and matched
/// fraction; `None` when it falls below the last threshold.
pub fn layer_for(direct_mention: bool, fraction: f64, thresholds: &[f64]) -> Option<u8> {
    if direct_mention {
        return Some(0);
    }
    thresholds.iter().position(|&t| fraction >= t).map(|i| (i + 1) as u8)
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::invalid("at least one layer threshold is required"));
    }
    if thresholds.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::invalid("layer thresholds must lie in (0, 1)"));
    }
    if thresholds.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::invalid("layer thresholds must be strictly decreasing"));
    }
    Ok(())
}

/// Assigns each document to the strictest layer it qualifies for. Documents
/// below the last threshold get no assignment. With `n` thresholds the
/// layers are 0..=n and relevance is 1 − ℓ/n.
pub fn assign_layers(
    docs: &[Document],
    core_vocab: &[KeywordStats],
    movement_token: &str,
    thresholds: &[f64],
) -> Result<Vec<LayerAssignment>> {
    if core_vocab.is_empty() {
        return Err(Error::EmptyVocabulary(
            "cannot layer against an empty vocabulary".into(),
        ));
    }
    validate_thresholds(thresholds)?;
    let token = tokenize(movement_token);
    let vocab_tokens: Vec<Vec<String>> = core_vocab.iter().map(|k| tokenize(&k.keyword)).collect();
    let max_layer = thresholds.len();

    Ok(docs
        .iter()
        .filter_map(|doc| {
            let fraction = matched_fraction(doc, &vocab_tokens);
            let layer = layer_for(mentions_movement(doc, &token), fraction, thresholds)?;
            Some(LayerAssignment {
                document_id: doc.id.clone(),
                layer,
                matched_fraction: fraction,
                relevance: relevance(layer, max_layer),
            })
        })
        .collect())
}
