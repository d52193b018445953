//! Record and replay of chat exchanges, keyed by a hash of the rendered prompt.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::remote::{ChatTransport, TransportError};
use super::RequestKind;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub prompt_hash: String,
    pub kind: RequestKind,
    pub rendered_prompt: String,
    pub raw_text: String,
}

pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error("fixture io: {0}")]
    Io(#[from] std::io::Error),
    #[error("fixture line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
}

pub fn load_fixtures(path: &Path) -> Result<Vec<FixtureEntry>, FixtureError> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| FixtureError::Json { line: i + 1, source })?);
    }
    Ok(out)
}

/// Answers from recorded fixtures only. Repeated prompts replay their
/// recordings in order and then keep returning the last one.
#[derive(Debug, Clone, Default)]
pub struct ReplayTransport {
    entries: BTreeMap<String, Vec<String>>,
    cursors: BTreeMap<String, usize>,
    served: usize,
}

impl ReplayTransport {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for e in entries {
            map.entry(e.prompt_hash).or_default().push(e.raw_text);
        }
        Self { entries: map, cursors: BTreeMap::new(), served: 0 }
    }

    pub fn open(path: &Path) -> Result<Self, FixtureError> {
        Ok(Self::new(load_fixtures(path)?))
    }

    pub fn served(&self) -> usize {
        self.served
    }
}

impl ChatTransport for ReplayTransport {
    fn complete(&mut self, kind: RequestKind, prompt: &str) -> Result<String, TransportError> {
        let hash = prompt_hash(prompt);
        let Some(replies) = self.entries.get(&hash) else {
            return Err(TransportError::FixtureMiss { kind, hash });
        };
        let cursor = self.cursors.entry(hash).or_insert(0);
        let raw = replies[(*cursor).min(replies.len() - 1)].clone();
        *cursor += 1;
        self.served += 1;
        Ok(raw)
    }
}

/// Appends fixture lines to a file; shareable across threads.
#[derive(Debug, Clone)]
pub struct FixtureSink {
    path: PathBuf,
    writer: Arc<Mutex<BufWriter<File>>>,
}

impl FixtureSink {
    pub fn create(path: &Path) -> Result<Self, FixtureError> {
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self { path: path.to_path_buf(), writer: Arc::new(Mutex::new(BufWriter::new(file))) })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn write(&self, entry: &FixtureEntry) -> std::io::Result<()> {
        let mut w = self.writer.lock().unwrap_or_else(|p| p.into_inner());
        serde_json::to_writer(&mut *w, entry)?;
        w.write_all(b"\n")?;
        w.flush()
    }
}

/// Passes calls through to `inner` and records every exchange.
pub struct RecordingTransport<T: ChatTransport> {
    inner: T,
    sink: FixtureSink,
}

impl<T: ChatTransport> RecordingTransport<T> {
    pub fn new(inner: T, sink: FixtureSink) -> Self {
        Self { inner, sink }
    }

    pub fn into_inner(self) -> T {
        self.inner
    }
}

impl<T: ChatTransport> ChatTransport for RecordingTransport<T> {
    fn complete(&mut self, kind: RequestKind, prompt: &str) -> Result<String, TransportError> {
        let raw = self.inner.complete(kind, prompt)?;
        let entry = FixtureEntry {
            prompt_hash: prompt_hash(prompt),
            kind,
            rendered_prompt: prompt.to_string(),
            raw_text: raw.clone(),
        };
        self.sink.write(&entry).map_err(|e| TransportError::Unavailable(format!("fixture write failed: {e}")))?;
        Ok(raw)
    }
}
