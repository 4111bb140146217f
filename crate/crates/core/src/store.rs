//! On-disk layout of a movement's artifacts under the data directory.
//!
//! ```text
//! <data>/movements/<id>/documents.jsonl   ingested corpus
//!                      layered.json       vocabulary and layer assignments
//!                      features.jsonl     feature store (manifest in header)
//!                      analysis.jsonl     correlations and topic MI per day
//!                      events.jsonl       key-event table
//!                      models/<sha256>.ckpt, models/CURRENT
//!                      reports/...        train, metrics, trend and replay outputs
//! ```

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::features::{read_event_table, write_event_table, FeatureSeries, KeyEvent};
use crate::forecast::Forecaster;
use crate::{Error, Result};

pub const CURRENT_MODEL: &str = "CURRENT";

/// Writes `bytes` to a sibling temp file, syncs it and renames it over
/// `path`, so readers see either the old or the new content.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("file");
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MovementStore {
    root: PathBuf,
}

impl MovementStore {
    pub fn new(data_dir: &Path, movement_id: &str) -> Self {
        Self {
            root: data_dir.join("movements").join(movement_id),
        }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn documents(&self) -> PathBuf {
        self.root.join("documents.jsonl")
    }

    pub fn layered(&self) -> PathBuf {
        self.root.join("layered.json")
    }

    pub fn features(&self) -> PathBuf {
        self.root.join("features.jsonl")
    }

    pub fn analysis(&self) -> PathBuf {
        self.root.join("analysis.jsonl")
    }

    pub fn events(&self) -> PathBuf {
        self.root.join("events.jsonl")
    }

    pub fn models_dir(&self) -> PathBuf {
        self.root.join("models")
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn train_report(&self) -> PathBuf {
        self.reports_dir().join("train.json")
    }

    pub fn metrics_report(&self) -> PathBuf {
        self.reports_dir().join("metrics.json")
    }

    pub fn ensure(&self) -> Result<()> {
        std::fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))
    }

    /// The stored key events; an absent table is empty.
    pub fn read_events(&self) -> Result<Vec<KeyEvent>> {
        let path = self.events();
        if !path.exists() {
            return Ok(Vec::new());
        }
        read_event_table(&path)
    }

    /// Replaces the event table atomically, ordered by date (stable).
    pub fn write_events(&self, events: &[KeyEvent]) -> Result<()> {
        let mut sorted = events.to_vec();
        sorted.sort_by_key(|e| e.date);
        let dir = self.root.clone();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let tmp = dir.join(".events.jsonl.tmp");
        write_event_table(&tmp, &sorted)?;
        let path = self.events();
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(&path, e))
    }

    /// Adds one event and rewrites the table atomically; returns the new table.
    pub fn append_event(&self, event: KeyEvent) -> Result<Vec<KeyEvent>> {
        let mut events = self.read_events()?;
        events.push(event);
        self.write_events(&events)?;
        self.read_events()
    }

    pub fn read_series(&self) -> Result<Option<FeatureSeries>> {
        let path = self.features();
        if !path.exists() {
            return Ok(None);
        }
        FeatureSeries::read_jsonl(&path).map(Some)
    }

    /// Saves the checkpoint under its content hash and points CURRENT at it.
    pub fn save_model(&self, model: &Forecaster) -> Result<PathBuf> {
        let path = model.save(&self.models_dir())?;
        let name = path.file_name().and_then(|n| n.to_str()).expect("hash file name");
        write_atomic(&self.models_dir().join(CURRENT_MODEL), format!("{name}\n").as_bytes())?;
        Ok(path)
    }

    /// Path of the current checkpoint, if a model has been trained.
    pub fn current_model(&self) -> Result<Option<PathBuf>> {
        let pointer = self.models_dir().join(CURRENT_MODEL);
        if !pointer.exists() {
            return Ok(None);
        }
        let name = std::fs::read_to_string(&pointer).map_err(|e| Error::io(&pointer, e))?;
        let name = name.trim();
        if name.is_empty() || name.contains(['/', '\\']) {
            return Err(Error::Corrupt {
                path: pointer,
                offset: 0,
                reason: "CURRENT must name a checkpoint file".into(),
            });
        }
        Ok(Some(self.models_dir().join(name)))
    }

    pub fn load_model(&self) -> Result<Option<Forecaster>> {
        match self.current_model()? {
            Some(path) => Forecaster::load(&path).map(Some),
            None => Ok(None),
        }
    }
}
