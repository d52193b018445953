//! JSON-lines episode transcripts: one header, one line per step, one end line.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::AgentEvent;
use crate::config::AgentConfig;
use crate::geometry::Cell;
use crate::map::MapSpec;
use crate::world::{ActionRequest, AgentBody, AgentId, DoneReason, EpisodeMetrics, Goal, KernelEvent, ObjectEntity, ObjectId, Step};

pub const SCHEMA_VERSION: u32 = 1;

/// Everything needed to rebuild the initial world without re-running the
/// scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub schema_version: u32,
    pub task: String,
    pub seed: u64,
    pub dummy_count: usize,
    pub horizon: Step,
    pub label: String,
    pub backend: String,
    pub agent_config: AgentConfig,
    pub goal: Goal,
    pub map: MapSpec,
    pub objects: Vec<ObjectEntity>,
    pub agents: Vec<AgentBody>,
    /// How travel distance is aggregated.
    pub td_note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentStep {
    pub agent_id: AgentId,
    pub request: ActionRequest,
    /// Position and hands after the kernel applied the joint action.
    pub position_after: Cell,
    pub held_after: Vec<ObjectId>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<AgentEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: Step,
    pub agents: Vec<AgentStep>,
    pub kernel_events: Vec<KernelEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndRecord {
    pub success: bool,
    pub reason: Option<DoneReason>,
    /// Set when the episode aborted on a reasoner failure.
    pub error: Option<String>,
    pub metrics: EpisodeMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub enum TranscriptRecord {
    Header(Box<Header>),
    Step(StepRecord),
    End(EndRecord),
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub records: Vec<TranscriptRecord>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("transcript io: {0}")]
    Io(#[from] std::io::Error),
    #[error("transcript line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("transcript has no header")]
    MissingHeader,
    #[error("schema version {found}, expected {SCHEMA_VERSION}")]
    SchemaVersion { found: u32 },
}

impl Transcript {
    pub fn header(&self) -> Option<&Header> {
        self.records.iter().find_map(|r| match r {
            TranscriptRecord::Header(h) => Some(h.as_ref()),
            _ => None,
        })
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> {
        self.records.iter().filter_map(|r| match r {
            TranscriptRecord::Step(s) => Some(s),
            _ => None,
        })
    }

    pub fn end(&self) -> Option<&EndRecord> {
        self.records.iter().find_map(|r| match r {
            TranscriptRecord::End(e) => Some(e),
            _ => None,
        })
    }

    /// Agent events of every step, in order, tagged with step and agent.
    pub fn agent_events(&self) -> impl Iterator<Item = (Step, AgentId, &AgentEvent)> {
        self.steps().flat_map(|s| s.agents.iter().flat_map(move |a| a.events.iter().map(move |e| (s.step, a.agent_id, e))))
    }

    pub fn write_jsonl(&self, mut w: impl Write) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()
    }

    pub fn to_jsonl(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("json is utf-8")
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Self, TranscriptError> {
        let mut records = Vec::new();
        for (i, line) in r.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            records.push(serde_json::from_str(&line).map_err(|source| TranscriptError::Json { line: i + 1, source })?);
        }
        let t = Self { records };
        let h = t.header().ok_or(TranscriptError::MissingHeader)?;
        if h.schema_version != SCHEMA_VERSION {
            return Err(TranscriptError::SchemaVersion { found: h.schema_version });
        }
        Ok(t)
    }
}
