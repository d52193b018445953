//! Pluggable reasoning backends.
//!
//! Every judgement an agent delegates (relevance, plan choice, trajectory
//! likelihood, message wording) goes through [`Reasoner`]. The [`oracle`]
//! backend is a deterministic rubric; [`remote`] talks to an
//! OpenAI-compatible chat-completions endpoint through a [`remote::ChatTransport`],
//! which [`fixture`] can record and replay.

pub mod fixture;
pub mod oracle;
pub mod prompt;
pub mod remote;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::RoomId;
use crate::memory::{Ladder, LogEntry, Relevance};
use crate::message::MessageKind;
use crate::planning::PlanContext;
use crate::validation::Likelihood;
use crate::world::{AgentId, ObjectId, ObjectSnapshot, Step};

pub use oracle::OracleReasoner;
pub use remote::{LlmReasoner, RemoteConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RequestKind {
    Relevance,
    Plan,
    Trajectory,
    Refine,
}

impl fmt::Display for RequestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RequestKind::Relevance => "relevance",
            RequestKind::Plan => "plan",
            RequestKind::Trajectory => "trajectory",
            RequestKind::Refine => "refine",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevanceRequest {
    pub goal_text: String,
    pub goal_location: ObjectId,
    /// Units per goal name still to deliver.
    pub remaining: BTreeMap<String, u32>,
    /// Goal names with no usable record yet.
    pub unfound: BTreeSet<String>,
    pub object: ObjectSnapshot,
    /// What such a container usually holds, from the agent's prior knowledge.
    pub container_hints: Vec<String>,
    pub ladder: Ladder,
    pub cot: bool,
}

/// A dated piece of evidence about where a collaborator was.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvidencePoint {
    pub step: Step,
    pub room: RoomId,
    pub room_name: String,
    pub observed: bool,
    pub in_window: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryRequest {
    pub collaborator_id: AgentId,
    pub collaborator_name: String,
    pub target_object: ObjectId,
    pub target_name: String,
    pub target_room: RoomId,
    pub target_room_name: String,
    pub adjacent_rooms: BTreeSet<RoomId>,
    pub alpha: Step,
    pub beta: Step,
    pub evidence: Vec<EvidencePoint>,
    /// Whether some step in the window is consistent with every evidence
    /// point and with walking distance to the target room.
    pub reachable: bool,
    pub observed_holding_target: bool,
    pub plans_mention_target: bool,
    pub conversation: Vec<LogEntry>,
    pub cot: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineRequest {
    pub kind: MessageKind,
    pub sender_name: String,
    /// Rule-based draft without the payload block.
    pub draft: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reply<T> {
    pub value: T,
    pub raw_text: String,
    /// Wall-clock latency in milliseconds; zero for the oracle.
    #[serde(skip)]
    pub latency_ms: f64,
}

impl<T> Reply<T> {
    pub fn instant(value: T, raw_text: impl Into<String>) -> Self {
        Self { value, raw_text: raw_text.into(), latency_ms: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReasonerError {
    #[error("reasoner unavailable: {0}")]
    Unavailable(String),
    #[error("could not parse {kind} reply: {raw:?}")]
    ParseFailure { kind: RequestKind, raw: String },
    #[error("no fixture for {kind} prompt {hash}")]
    FixtureMiss { kind: RequestKind, hash: String },
}

pub trait Reasoner: Send {
    fn backend(&self) -> &'static str;

    fn relevance(&mut self, req: &RelevanceRequest) -> Result<Reply<Relevance>, ReasonerError>;

    /// Picks one of `ctx.options` by index. `repair` explains why the previous
    /// answer was rejected.
    fn plan(&mut self, ctx: &PlanContext, repair: Option<&str>) -> Result<Reply<usize>, ReasonerError>;

    fn trajectory(&mut self, req: &TrajectoryRequest) -> Result<Reply<Likelihood>, ReasonerError>;

    fn refine(&mut self, req: &RefineRequest) -> Result<Reply<String>, ReasonerError>;
}

impl<R: Reasoner + ?Sized> Reasoner for Box<R> {
    fn backend(&self) -> &'static str {
        (**self).backend()
    }

    fn relevance(&mut self, req: &RelevanceRequest) -> Result<Reply<Relevance>, ReasonerError> {
        (**self).relevance(req)
    }

    fn plan(&mut self, ctx: &PlanContext, repair: Option<&str>) -> Result<Reply<usize>, ReasonerError> {
        (**self).plan(ctx, repair)
    }

    fn trajectory(&mut self, req: &TrajectoryRequest) -> Result<Reply<Likelihood>, ReasonerError> {
        (**self).trajectory(req)
    }

    fn refine(&mut self, req: &RefineRequest) -> Result<Reply<String>, ReasonerError> {
        (**self).refine(req)
    }
}
