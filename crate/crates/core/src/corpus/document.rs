use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize};
use tracing::warn;

use crate::{Error, Result};

/// One post or article.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub platform: String,
    #[serde(deserialize_with = "de_timestamp")]
    pub timestamp: DateTime<Utc>,
    #[serde(default)]
    pub title: String,
    #[serde(default)]
    pub body: String,
    /// Likes + shares + comments for social posts, a readership proxy for news.
    /// Articles without readership data default to 1.
    #[serde(default = "default_engagement")]
    pub engagement: f64,
    /// Keyphrases supplied at ingest; `None` lets the extraction adapter decide.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub keyphrases: Option<Vec<String>>,
}

fn default_engagement() -> f64 {
    1.0
}

impl Document {
    pub fn day(&self) -> NaiveDate {
        self.timestamp.date_naive()
    }

    /// Title and body joined, the text every adapter scores.
    pub fn full_text(&self) -> String {
        match (self.title.is_empty(), self.body.is_empty()) {
            (true, _) => self.body.clone(),
            (_, true) => self.title.clone(),
            _ => format!("{}\n{}", self.title, self.body),
        }
    }

    fn validate(&self) -> std::result::Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.platform.trim().is_empty() {
            return Err("empty platform".into());
        }
        if !self.engagement.is_finite() || self.engagement < 0.0 {
            return Err(format!("engagement must be finite and >= 0, got {}", self.engagement));
        }
        Ok(())
    }
}

/// Accepts RFC 3339, a naive `YYYY-MM-DDTHH:MM:SS` (read as UTC) or a bare date.
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Some(dt.with_timezone(&Utc));
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(s, fmt) {
            return Some(dt.and_utc());
        }
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .map(|d| d.and_hms_opt(0, 0, 0).expect("midnight").and_utc())
}

fn de_timestamp<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<DateTime<Utc>, D::Error> {
    let s = String::deserialize(d)?;
    parse_timestamp(&s).ok_or_else(|| serde::de::Error::custom(format!("unparseable timestamp `{s}`")))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IngestFormat {
    JsonLines,
}

impl FromStr for IngestFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json-lines" | "ndjson" => Ok(IngestFormat::JsonLines),
            other => Err(Error::invalid(format!("unknown ingest format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IssueKind {
    Malformed,
    Duplicate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestIssue {
    pub line: usize,
    pub kind: IssueKind,
    pub message: String,
}

/// An immutable, id-unique document collection.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    documents: Vec<Document>,
    issues: Vec<IngestIssue>,
}

impl Corpus {
    /// Builds a corpus from in-memory documents; later duplicates are dropped.
    pub fn from_documents(docs: impl IntoIterator<Item = Document>) -> Result<Self> {
        let mut corpus = Corpus::default();
        let mut seen = HashMap::new();
        for (i, doc) in docs.into_iter().enumerate() {
            doc.validate()
                .map_err(|m| Error::invalid(format!("document {i}: {m}")))?;
            corpus.push(doc, i + 1, &mut seen);
        }
        Ok(corpus)
    }

    fn push(&mut self, doc: Document, line: usize, seen: &mut HashMap<String, usize>) {
        if let Some(first) = seen.get(&doc.id) {
            warn!(id = %doc.id, line, first, "duplicate document id skipped");
            self.issues.push(IngestIssue {
                line,
                kind: IssueKind::Duplicate,
                message: format!("duplicate id `{}` (first seen on line {first})", doc.id),
            });
            return;
        }
        seen.insert(doc.id.clone(), line);
        self.documents.push(doc);
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn issues(&self) -> &[IngestIssue] {
        &self.issues
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn platform_counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for d in &self.documents {
            *counts.entry(d.platform.clone()).or_insert(0) += 1;
        }
        counts
    }

    /// Documents on a single platform, preserving order.
    pub fn filter_platform(&self, platform: &str) -> Corpus {
        Corpus {
            documents: self
                .documents
                .iter()
                .filter(|d| d.platform == platform)
                .cloned()
                .collect(),
            issues: Vec::new(),
        }
    }
}

/// Writes documents as JSON-lines, the format [`ingest_documents`] reads.
pub fn write_documents(path: &Path, docs: &[Document]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for d in docs {
        serde_json::to_writer(&mut w, d)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Loads documents from `path`. Malformed lines and duplicate ids are recorded
/// as issues and skipped; ingest continues past them.
pub fn ingest_documents(path: &Path, format: IngestFormat) -> Result<Corpus> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    match format {
        IngestFormat::JsonLines => read_jsonl(BufReader::new(file), path),
    }
}

fn read_jsonl(reader: impl BufRead, path: &Path) -> Result<Corpus> {
    let mut corpus = Corpus::default();
    let mut seen = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<Document>(&line)
            .map_err(|e| e.to_string())
            .and_then(|d| d.validate().map(|_| d));
        match parsed {
            Ok(doc) => corpus.push(doc, line_no, &mut seen),
            Err(message) => {
                warn!(line = line_no, %message, "malformed record skipped");
                corpus.issues.push(IngestIssue {
                    line: line_no,
                    kind: IssueKind::Malformed,
                    message,
                });
            }
        }
    }
    Ok(corpus)
}
