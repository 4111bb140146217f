//! Per-day discourse state, the flat feature layout and the feature store.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::calendar::CalendarFeatures;
use super::emotion::{EMOTION_BINS, EMOTION_BIN_NAMES};
use super::events::{KeyEventEncoding, EVENT_COLUMNS, EVENT_COLUMN_NAMES};
use super::thematic::{topic_slug, ThemeMatrix, DISTANCE_BINS, DISTANCE_BIN_NAMES};
use crate::adapters::emotion_labels;
use crate::{Error, Result};

pub const STORE_FORMAT: &str = "discourse-feature-store";
pub const STORE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureBlock {
    Volume,
    Emotion,
    Theme,
    Calendar,
    KeyEvent,
}

impl FeatureBlock {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureBlock::Volume => "volume",
            FeatureBlock::Emotion => "emotion",
            FeatureBlock::Theme => "theme",
            FeatureBlock::Calendar => "calendar",
            FeatureBlock::KeyEvent => "key_event",
        }
    }
}

/// Base: 28 mean intensities. Extended: also the 28×5 bin distributions and
/// 28 bin entropies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmotionLayout {
    #[default]
    Base,
    Extended,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub block: FeatureBlock,
    pub offset: usize,
}

/// Ordered names and offsets of every column in the flat feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub entries: Vec<ManifestEntry>,
}

pub const VOLUME_FIELDS: [&str; 5] = ["raw", "smoothed", "velocity", "acceleration", "standardized"];
pub const CALENDAR_FIELDS: [&str; 4] = ["dow_sin", "dow_cos", "month_sin", "month_cos"];

impl FeatureManifest {
    pub fn build(platforms: &[String], topics: &[String], categories: &[String], layout: EmotionLayout) -> Self {
        let mut entries = Vec::new();
        let mut push = |block: FeatureBlock, name: String| {
            let offset = entries.len();
            entries.push(ManifestEntry { name, block, offset });
        };
        for p in platforms {
            for f in VOLUME_FIELDS {
                push(FeatureBlock::Volume, format!("volume:{p}:{f}"));
            }
        }
        push(FeatureBlock::Volume, "volume:pdi".into());
        let labels = emotion_labels();
        for l in labels {
            push(FeatureBlock::Emotion, format!("emotion:{l}:mean"));
        }
        if layout == EmotionLayout::Extended {
            for l in labels {
                for b in EMOTION_BIN_NAMES {
                    push(FeatureBlock::Emotion, format!("emotion:{l}:bin:{b}"));
                }
            }
            for l in labels {
                push(FeatureBlock::Emotion, format!("emotion:{l}:entropy"));
            }
        }
        for t in topics {
            let slug = topic_slug(t);
            for b in DISTANCE_BIN_NAMES {
                push(FeatureBlock::Theme, format!("theme:{slug}:{b}"));
            }
        }
        for f in CALENDAR_FIELDS {
            push(FeatureBlock::Calendar, format!("calendar:{f}"));
        }
        for c in categories {
            let slug = topic_slug(c);
            for col in EVENT_COLUMN_NAMES {
                push(FeatureBlock::KeyEvent, format!("event:{slug}:{col}"));
            }
        }
        Self { entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn block_indices(&self, block: FeatureBlock) -> Vec<usize> {
        self.entries
            .iter()
            .filter(|e| e.block == block)
            .map(|e| e.offset)
            .collect()
    }

    /// Platforms named in the volume block, in layout order.
    pub fn platforms(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter_map(|e| e.name.strip_prefix("volume:")?.strip_suffix(":raw"))
            .map(String::from)
            .collect()
    }

    /// Consistency checks: offsets are positions, names are unique.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for (i, e) in self.entries.iter().enumerate() {
            if e.offset != i {
                return Err(Error::ManifestMismatch(format!(
                    "entry `{}` has offset {} at position {i}",
                    e.name, e.offset
                )));
            }
            if !seen.insert(e.name.as_str()) {
                return Err(Error::ManifestMismatch(format!("duplicate feature name `{}`", e.name)));
            }
        }
        Ok(())
    }

    /// SHA-256 of the compact JSON encoding, hex.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let m: Self = serde_json::from_str(&text).map_err(|e| Error::Corrupt {
            path: path.into(),
            offset: 0,
            reason: e.to_string(),
        })?;
        m.validate()?;
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlatformVolume {
    pub platform: String,
    pub raw: f64,
    pub smoothed: f64,
    pub velocity: f64,
    pub acceleration: f64,
    pub standardized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VolumeFeatures {
    pub platforms: Vec<PlatformVolume>,
    pub pdi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmotionDay {
    pub bins: [f64; EMOTION_BINS],
    pub mean_intensity: f64,
    pub variance: f64,
    pub peak_bin: usize,
    pub concentration: f64,
    pub entropy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscourseState {
    pub date: NaiveDate,
    pub volume: VolumeFeatures,
    /// One entry per emotion label, in canonical order.
    pub emotions: Vec<EmotionDay>,
    pub themes: ThemeMatrix<f64>,
    pub calendar: CalendarFeatures,
    pub key_events: KeyEventEncoding,
}

/// Per-day components before assembly; `None` marks a block that could not
/// be computed.
#[derive(Debug, Clone, Default)]
pub struct DayComponents {
    pub volume: Option<VolumeFeatures>,
    pub emotions: Option<Vec<EmotionDay>>,
    pub themes: Option<ThemeMatrix<f64>>,
    pub calendar: Option<CalendarFeatures>,
    pub key_events: Option<KeyEventEncoding>,
}

/// Builds the state and its flat vector in `manifest` order.
pub fn assemble_discourse_state(
    date: NaiveDate,
    parts: DayComponents,
    manifest: &FeatureManifest,
) -> Result<(DiscourseState, Vec<f64>)> {
    let missing = |b: FeatureBlock| Error::MissingBlock(b.as_str().to_string());
    let state = DiscourseState {
        date,
        volume: parts.volume.ok_or_else(|| missing(FeatureBlock::Volume))?,
        emotions: parts.emotions.ok_or_else(|| missing(FeatureBlock::Emotion))?,
        themes: parts.themes.ok_or_else(|| missing(FeatureBlock::Theme))?,
        calendar: parts.calendar.ok_or_else(|| missing(FeatureBlock::Calendar))?,
        key_events: parts.key_events.ok_or_else(|| missing(FeatureBlock::KeyEvent))?,
    };
    let values = flatten_state(&state, manifest)?;
    Ok((state, values))
}

pub fn flatten_state(state: &DiscourseState, manifest: &FeatureManifest) -> Result<Vec<f64>> {
    let mut v = Vec::with_capacity(manifest.len());
    for p in &state.volume.platforms {
        v.extend([p.raw, p.smoothed, p.velocity, p.acceleration, p.standardized]);
    }
    v.push(state.volume.pdi);
    v.extend(state.emotions.iter().map(|e| e.mean_intensity));
    let emotion_cols = manifest.block_indices(FeatureBlock::Emotion).len();
    if emotion_cols > state.emotions.len() {
        v.extend(state.emotions.iter().flat_map(|e| e.bins));
        v.extend(state.emotions.iter().map(|e| e.entropy));
    }
    v.extend(state.themes.iter().flatten());
    v.extend(state.calendar.encoded());
    v.extend(state.key_events.flatten());

    let width = |b: FeatureBlock| manifest.block_indices(b).len();
    let expected_volume = state.volume.platforms.len() * VOLUME_FIELDS.len() + 1;
    let expected_themes = state.themes.len() * DISTANCE_BINS;
    let expected_events = state.key_events.indicators.len() * EVENT_COLUMNS;
    if width(FeatureBlock::Volume) != expected_volume
        || width(FeatureBlock::Theme) != expected_themes
        || width(FeatureBlock::KeyEvent) != expected_events
        || v.len() != manifest.len()
    {
        return Err(Error::ManifestMismatch(format!(
            "state flattens to {} values, manifest has {}",
            v.len(),
            manifest.len()
        )));
    }
    Ok(v)
}

/// One stored day. Missing days carry a reason and no values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub date: NaiveDate,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub missing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default)]
    pub values: Vec<f64>,
}

impl FeatureRecord {
    pub fn present(date: NaiveDate, values: Vec<f64>) -> Self {
        Self {
            date,
            missing: false,
            reason: None,
            values,
        }
    }

    pub fn missing(date: NaiveDate, reason: impl Into<String>) -> Self {
        Self {
            date,
            missing: true,
            reason: Some(reason.into()),
            values: Vec::new(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct StoreHeader {
    format: String,
    version: u32,
    manifest_hash: String,
    manifest: FeatureManifest,
}

/// An immutable, date-ordered daily feature series.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    pub manifest: FeatureManifest,
    pub records: Vec<FeatureRecord>,
}

impl FeatureSeries {
    pub fn new(manifest: FeatureManifest, records: Vec<FeatureRecord>) -> Result<Self> {
        manifest.validate()?;
        for pair in records.windows(2) {
            if pair[1].date <= pair[0].date {
                return Err(Error::invalid(format!("records out of order at {}", pair[1].date)));
            }
        }
        for r in &records {
            if !r.missing && r.values.len() != manifest.len() {
                return Err(Error::ManifestMismatch(format!(
                    "record {} has {} values, manifest has {}",
                    r.date,
                    r.values.len(),
                    manifest.len()
                )));
            }
        }
        Ok(Self { manifest, records })
    }

    pub fn manifest_hash(&self) -> String {
        self.manifest.hash()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn dates(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        self.records.iter().map(|r| r.date)
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.records.binary_search_by_key(&date, |r| r.date).ok()
    }

    /// Values of one column; `None` on missing days.
    pub fn column(&self, index: usize) -> Vec<Option<f64>> {
        self.records
            .iter()
            .map(|r| (!r.missing).then(|| r.values[index]))
            .collect()
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<Option<f64>>> {
        let idx = self
            .manifest
            .index_of(name)
            .ok_or_else(|| Error::invalid(format!("unknown feature `{name}`")))?;
        Ok(self.column(idx))
    }

    /// Records dated within `[from, to]`, either bound optional.
    pub fn slice(&self, from: Option<NaiveDate>, to: Option<NaiveDate>) -> &[FeatureRecord] {
        let lo = from.map_or(0, |d| self.records.partition_point(|r| r.date < d));
        let hi = to.map_or(self.records.len(), |d| self.records.partition_point(|r| r.date <= d));
        &self.records[lo..hi.max(lo)]
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let header = StoreHeader {
            format: STORE_FORMAT.into(),
            version: STORE_VERSION,
            manifest_hash: self.manifest.hash(),
            manifest: self.manifest.clone(),
        };
        serde_json::to_writer(&mut w, &header)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_jsonl(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let corrupt = |offset: u64, reason: String| Error::Corrupt {
            path: path.into(),
            offset,
            reason,
        };
        let mut reader = BufReader::new(file);
        let mut offset = 0u64;
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        let header: StoreHeader = serde_json::from_str(&line).map_err(|e| corrupt(0, format!("bad header: {e}")))?;
        if header.format != STORE_FORMAT || header.version != STORE_VERSION {
            return Err(corrupt(
                0,
                format!("unsupported format {} v{}", header.format, header.version),
            ));
        }
        if header.manifest.hash() != header.manifest_hash {
            return Err(corrupt(0, "manifest hash does not match embedded manifest".into()));
        }
        offset += n as u64;
        let mut records = Vec::new();
        loop {
            line.clear();
            let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
            if n == 0 {
                break;
            }
            if !line.trim().is_empty() {
                let r: FeatureRecord = serde_json::from_str(&line).map_err(|e| corrupt(offset, e.to_string()))?;
                records.push(r);
            }
            offset += n as u64;
        }
        Self::new(header.manifest, records)
    }

    /// Loads a store and checks it against an expected manifest hash.
    pub fn read_expecting(path: &Path, manifest_hash: &str) -> Result<Self> {
        let s = Self::read_jsonl(path)?;
        if s.manifest_hash() != manifest_hash {
            return Err(Error::ManifestMismatch(format!(
                "{} was built with manifest {}, expected {manifest_hash}",
                path.display(),
                s.manifest_hash()
            )));
        }
        Ok(s)
    }
}
