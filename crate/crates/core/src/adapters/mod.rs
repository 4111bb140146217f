//! Pluggable emotion scoring, keyphrase extraction and phrase embedding.
//!
//! Neural scorers run out of process; their outputs enter through the
//! file-backed adapters. The stub adapters are deterministic and need no
//! external model, so every stage can run hermetically.

mod embedding;
mod emotion;
mod keyphrase;

pub use embedding::{FileEmbedder, HashEmbedder, PhraseEmbedder, PhraseEmbedding, DEFAULT_EMBEDDING_DIM};
pub use emotion::{
    emotion_index, emotion_labels, write_emotion_scores, EmotionScorer, EmotionScores, FileScorer, LexiconScorer,
    EMOTION_COUNT,
};
pub use keyphrase::{stopwords, FrequencyExtractor, KeyphraseExtractor, DEFAULT_KEYPHRASE_COUNT};
