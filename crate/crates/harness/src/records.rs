//! Run records: one JSON object per line, appended and synced one at a time.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use jabber_core::Mode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const RECORD_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Transform,
    Translate,
    Embed,
    Score,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordError {
    pub stage: Stage,
    pub kind: String,
    pub message: String,
    /// A translation that arrived but could not be scored.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unscored_translation: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub original_chars: usize,
    pub original_words: usize,
    pub transformed_chars: usize,
    pub prompt_chars: usize,
    pub translation_chars: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub v: u32,
    pub id: String,
    pub passage_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub condition: String,
    pub mode: Mode,
    pub template_name: String,
    pub model_id: String,
    pub embedding_model_id: String,
    pub original_text: String,
    pub transformed_text: String,
    pub prompt: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub translation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub similarity: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<RecordError>,
    pub seed: u64,
    pub config_hash: String,
    pub cache_key: String,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub counts: Counts,
}

impl RunRecord {
    pub fn is_scored(&self) -> bool {
        self.similarity.is_some()
    }

    /// Translation and similarity are present together or not at all.
    pub fn is_consistent(&self) -> bool {
        self.translation.is_some() == self.similarity.is_some()
    }
}

/// Hash of the request content: same transformed text, template and model
/// means the same request.
pub fn cache_key(transformed_text: &str, template_body: &str, model_id: &str) -> String {
    let mut h = Sha256::new();
    for part in [transformed_text, template_body, model_id] {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part.as_bytes());
    }
    hex(&h.finalize())
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Reads a records file. A final line without a terminating newline is the
/// remnant of an interrupted write and is ignored.
pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
    parse_records(&text, path)
}

fn parse_records(text: &str, path: &Path) -> Result<Vec<RunRecord>> {
    let complete = match text.rfind('\n') {
        Some(i) => &text[..=i],
        None => "",
    };
    complete
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Input(format!("{}:{}: bad record: {e}", path.display(), i + 1)))
        })
        .collect()
}

/// Append-only writer. Each record is flushed and synced before
/// [`append`](Self::append) returns.
pub struct RecordWriter {
    path: PathBuf,
    file: File,
}

impl RecordWriter {
    /// Creates a new records file; fails if it exists.
    pub fn create(path: &Path) -> Result<Self> {
        let file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(path)
            .map_err(Error::io(format!("creating {}", path.display())))?;
        Ok(RecordWriter {
            path: path.to_path_buf(),
            file,
        })
    }

    /// Opens an existing file for appending, first cutting off any partial
    /// last line. Returns the complete records already present.
    pub fn resume(path: &Path) -> Result<(Self, Vec<RunRecord>)> {
        if !path.exists() {
            return Ok((Self::create(path)?, Vec::new()));
        }
        let text = std::fs::read_to_string(path).map_err(Error::io(format!("reading {}", path.display())))?;
        let records = parse_records(&text, path)?;
        let keep = text.rfind('\n').map_or(0, |i| i + 1);
        let file = OpenOptions::new()
            .write(true)
            .open(path)
            .map_err(Error::io(format!("opening {}", path.display())))?;
        file.set_len(keep as u64)
            .map_err(Error::io(format!("truncating {}", path.display())))?;
        let mut writer = RecordWriter {
            path: path.to_path_buf(),
            file,
        };
        use std::io::Seek;
        writer
            .file
            .seek(std::io::SeekFrom::End(0))
            .map_err(Error::io(format!("seeking {}", path.display())))?;
        Ok((writer, records))
    }

    pub fn append(&mut self, record: &RunRecord) -> Result<()> {
        let mut line = serde_json::to_string(record).expect("records serialize");
        line.push('\n');
        let ctx = || format!("appending to {}", self.path.display());
        self.file.write_all(line.as_bytes()).map_err(Error::io(ctx()))?;
        self.file.flush().map_err(Error::io(ctx()))?;
        self.file.sync_data().map_err(Error::io(ctx()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(passage: &str, similarity: Option<f64>) -> RunRecord {
        let now = Utc::now();
        RunRecord {
            v: RECORD_VERSION,
            id: "id".into(),
            passage_id: passage.into(),
            label: None,
            condition: "c".into(),
            mode: Mode::Blank,
            template_name: "blank".into(),
            model_id: "m".into(),
            embedding_model_id: "e".into(),
            original_text: "o".into(),
            transformed_text: "t".into(),
            prompt: "p".into(),
            translation: similarity.map(|_| "x".into()),
            similarity,
            error: None,
            seed: 0,
            config_hash: "h".into(),
            cache_key: cache_key("t", passage, "m"),
            started_at: now,
            finished_at: now,
            counts: Counts::default(),
        }
    }

    #[test]
    fn cache_key_separates_fields() {
        assert_ne!(cache_key("ab", "c", "m"), cache_key("a", "bc", "m"));
        assert_eq!(cache_key("a", "b", "c").len(), 64);
    }

    #[test]
    fn resume_drops_partial_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.jsonl");
        let mut w = RecordWriter::create(&path).unwrap();
        w.append(&sample("a", Some(1.0))).unwrap();
        drop(w);
        assert!(RecordWriter::create(&path).is_err());

        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(b"{\"v\":1,\"id\":\"trunc").unwrap();
        drop(f);
        assert_eq!(read_records(&path).unwrap().len(), 1);

        let (mut w, existing) = RecordWriter::resume(&path).unwrap();
        assert_eq!(existing.len(), 1);
        w.append(&sample("b", None)).unwrap();
        let all = read_records(&path).unwrap();
        assert_eq!(
            all.iter().map(|r| r.passage_id.as_str()).collect::<Vec<_>>(),
            ["a", "b"]
        );
    }
}
