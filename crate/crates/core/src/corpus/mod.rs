//! Document ingest and multi-layer relevance assignment.
//!
//! Layer 0 holds documents that mention the movement token directly. Layers
//! 1..=n hold documents containing at least the i-th threshold's fraction of
//! the core vocabulary, the keywords that co-occur most with the token.

mod document;
mod layers;
pub mod text;
mod vocabulary;

pub use document::{
    ingest_documents, parse_timestamp, write_documents, Corpus, Document, IngestFormat, IngestIssue, IssueKind,
};
pub use layers::{
    assign_layers, layer_for, matched_fraction, relevance, validate_thresholds, LayerAssignment, DEFAULT_THRESHOLDS,
};
pub use vocabulary::{build_core_vocabulary, mentions_movement, nearest_rank, KeywordStats};
