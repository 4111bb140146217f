use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::text::{contains_sequence, normalize_phrase, tokenize};
use super::Document;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeywordStats {
    pub keyword: String,
    pub cooccurrence_count: usize,
    /// Empirical CDF of the co-occurrence distribution at this keyword's count, in percent.
    pub percentile: f64,
}

/// True when the document's title or body mentions the movement token.
pub fn mentions_movement(doc: &Document, movement_tokens: &[String]) -> bool {
    contains_sequence(&tokenize(&doc.title), movement_tokens)
        || contains_sequence(&tokenize(&doc.body), movement_tokens)
}

/// Nearest-rank percentile: the smallest sample value whose rank is at least
/// `ceil(p/100 · n)` in ascending order.
pub fn nearest_rank(sorted_ascending: &[usize], percentile: f64) -> usize {
    let n = sorted_ascending.len();
    let rank = ((percentile / 100.0) * n as f64).ceil() as usize;
    sorted_ascending[rank.clamp(1, n) - 1]
}

/// Keywords whose co-occurrence with the movement token sits at or above the
/// `percentile_cut` of the co-occurrence distribution.
///
/// `keyphrases[i]` are the extracted keyphrases of `docs[i]`. A keyword
/// co-occurs once per document that mentions the movement and lists it.
/// Output is ordered by count (desc) then keyword.
pub fn build_core_vocabulary(
    docs: &[Document],
    keyphrases: &[Vec<String>],
    movement_token: &str,
    percentile_cut: f64,
) -> Result<Vec<KeywordStats>> {
    if docs.is_empty() {
        return Err(Error::invalid("corpus is empty"));
    }
    if docs.len() != keyphrases.len() {
        return Err(Error::invalid("keyphrase lists must align with documents"));
    }
    if !(percentile_cut > 0.0 && percentile_cut <= 100.0) {
        return Err(Error::invalid(format!(
            "percentile_cut {percentile_cut} outside (0, 100]"
        )));
    }
    let token = tokenize(movement_token);
    if token.is_empty() {
        return Err(Error::invalid("movement token has no tokens"));
    }
    let token_norm = token.join(" ");

    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut any_mention = false;
    for (doc, phrases) in docs.iter().zip(keyphrases) {
        if !mentions_movement(doc, &token) {
            continue;
        }
        any_mention = true;
        let unique: BTreeSet<String> = phrases
            .iter()
            .map(|p| normalize_phrase(p))
            .filter(|p| !p.is_empty() && *p != token_norm)
            .collect();
        for k in unique {
            *counts.entry(k).or_insert(0) += 1;
        }
    }
    if !any_mention {
        return Err(Error::EmptyVocabulary(format!(
            "no document mentions `{movement_token}`"
        )));
    }
    if counts.is_empty() {
        return Err(Error::EmptyVocabulary(format!(
            "documents mentioning `{movement_token}` carry no other keyphrases"
        )));
    }

    let mut sorted: Vec<usize> = counts.values().copied().collect();
    sorted.sort_unstable();
    let cut = nearest_rank(&sorted, percentile_cut);
    let n = sorted.len() as f64;

    let mut selected: Vec<KeywordStats> = counts
        .into_iter()
        .filter(|&(_, c)| c >= cut)
        .map(|(keyword, c)| KeywordStats {
            keyword,
            cooccurrence_count: c,
            percentile: 100.0 * sorted.partition_point(|&x| x <= c) as f64 / n,
        })
        .collect();
    selected.sort_by(|a, b| {
        b.cooccurrence_count
            .cmp(&a.cooccurrence_count)
            .then_with(|| a.keyword.cmp(&b.keyword))
    });
    Ok(selected)
}
