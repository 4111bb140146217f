//! Journalist-annotated key events and their daily indicator encoding.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::thematic::topic_slug;
use crate::{Error, Result};

/// Impact levels in encoding order.
pub const IMPACT_LEVELS: [i8; 4] = [-1, 0, 1, 2];
/// Columns per category: the four impact levels plus "not available".
pub const EVENT_COLUMNS: usize = IMPACT_LEVELS.len() + 1;
pub const EVENT_COLUMN_NAMES: [&str; EVENT_COLUMNS] = ["unrelated", "neutral", "supports", "opposes", "na"];

/// A dated external occurrence. `impact`: 2 opposes the movement's objectives,
/// 1 supports them, 0 neutral, −1 unrelated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyEvent {
    pub date: NaiveDate,
    pub category: String,
    pub impact: i8,
    /// Journalist-assessed magnitude; carried through but not encoded.
    #[serde(default = "default_magnitude")]
    pub magnitude: f64,
    #[serde(default)]
    pub label: String,
}

fn default_magnitude() -> f64 {
    1.0
}

impl KeyEvent {
    pub fn validate(&self, categories: &[String]) -> Result<usize> {
        if !IMPACT_LEVELS.contains(&self.impact) {
            return Err(Error::invalid(format!("impact {} not in {{-1, 0, 1, 2}}", self.impact)));
        }
        if !(self.magnitude > 0.0 && self.magnitude.is_finite()) {
            return Err(Error::invalid(format!("magnitude {} must be > 0", self.magnitude)));
        }
        category_index(&self.category, categories)
    }
}

/// Matches a category by exact name (case-insensitive) or slug.
pub fn category_index(category: &str, categories: &[String]) -> Result<usize> {
    let slug = topic_slug(category);
    categories
        .iter()
        .position(|c| c.eq_ignore_ascii_case(category) || topic_slug(c) == slug)
        .ok_or_else(|| Error::invalid(format!("unknown event category `{category}`")))
}

/// Per category: [−1, 0, 1, 2, NA] indicators for one day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeyEventEncoding {
    pub indicators: Vec<[u8; EVENT_COLUMNS]>,
}

impl KeyEventEncoding {
    pub fn flatten(&self) -> impl Iterator<Item = f64> + '_ {
        self.indicators.iter().flatten().map(|&b| f64::from(b))
    }
}

pub fn encode_key_events(events: &[KeyEvent], day: NaiveDate, categories: &[String]) -> Result<KeyEventEncoding> {
    let mut indicators = vec![[0u8; EVENT_COLUMNS]; categories.len()];
    for e in events {
        let q = e.validate(categories)?;
        if e.date == day {
            let col = IMPACT_LEVELS.iter().position(|&i| i == e.impact).expect("validated");
            indicators[q][col] = 1;
        }
    }
    for row in indicators.iter_mut() {
        row[EVENT_COLUMNS - 1] = u8::from(row[..EVENT_COLUMNS - 1].iter().all(|&b| b == 0));
    }
    Ok(KeyEventEncoding { indicators })
}

/// Reads a key-event table: `.csv` with a header row, anything else as
/// JSON-lines.
pub fn read_event_table(path: &Path) -> Result<Vec<KeyEvent>> {
    let is_csv = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        let mut reader =
            csv::Reader::from_path(path).map_err(|e| Error::invalid(format!("{}: {e}", path.display())))?;
        reader
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 2))))
            .collect()
    } else {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(
                serde_json::from_str(&line)
                    .map_err(|e| Error::invalid(format!("{}:{}: {e}", path.display(), i + 1)))?,
            );
        }
        Ok(out)
    }
}

pub fn write_event_table(path: &Path, events: &[KeyEvent]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for e in events {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
