//! Run configuration, accepted as JSON and mirrored by CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{Ablations, AgentConfig, TopK};
use crate::memory::Ladder;
use crate::reasoner::fixture::{FixtureError, FixtureSink, RecordingTransport, ReplayTransport};
use crate::reasoner::remote::HttpTransport;
use crate::reasoner::{LlmReasoner, OracleReasoner, Reasoner, RemoteConfig};
use crate::scenario::{TaskSpec, AGENT_NAMES};
use crate::world::Step;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config file {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error(transparent)]
    Fixture(#[from] FixtureError),
}

/// Which reasoner answers the agents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendConfig {
    #[default]
    Oracle,
    /// Live chat-completions endpoint; `record` appends every exchange to a
    /// fixture file.
    Remote {
        #[serde(default)]
        remote: RemoteConfig,
        #[serde(default)]
        record: Option<PathBuf>,
    },
    /// Answers only from a fixture file.
    Replay { fixtures: PathBuf },
}

impl BackendConfig {
    pub fn label(&self) -> &'static str {
        match self {
            BackendConfig::Oracle => "oracle",
            BackendConfig::Remote { .. } => "remote",
            BackendConfig::Replay { .. } => "replay",
        }
    }

    pub fn build(&self) -> Result<Box<dyn Reasoner>, ConfigError> {
        Ok(match self {
            BackendConfig::Oracle => Box::new(OracleReasoner::new()),
            BackendConfig::Remote { remote, record: None } => Box::new(LlmReasoner::new(HttpTransport::new(remote.clone()))),
            BackendConfig::Remote { remote, record: Some(path) } => {
                let sink = FixtureSink::create(path)?;
                Box::new(LlmReasoner::new(RecordingTransport::new(HttpTransport::new(remote.clone()), sink)))
            }
            BackendConfig::Replay { fixtures } => Box::new(LlmReasoner::new(ReplayTransport::open(fixtures)?)),
        })
    }
}

/// One matrix row: an agent configuration under a label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    #[serde(default)]
    pub ablations: Ablations,
    #[serde(default)]
    pub k: Option<TopK>,
    #[serde(default)]
    pub ladder: Option<Ladder>,
}

impl Variant {
    pub fn ablation(name: &str) -> Result<Self, String> {
        Ok(Self { label: name.to_string(), ablations: Ablations::only(name)?, k: None, ladder: None })
    }

    pub fn default_row() -> Self {
        Self { label: "default".into(), ablations: Ablations::default(), k: None, ladder: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct OutputPaths {
    /// Directory receiving one JSONL transcript per episode.
    pub transcript_dir: Option<PathBuf>,
    /// Matrix report (JSON).
    pub report: Option<PathBuf>,
    /// Per-step memory dumps (JSONL).
    pub memory_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub tasks: Vec<String>,
    pub seeds: Vec<u64>,
    pub agents: usize,
    pub horizon: Step,
    pub k: TopK,
    pub ladder: Ladder,
    pub dummy_count: usize,
    pub ablations: Ablations,
    pub refine_messages: bool,
    pub log_prompts: bool,
    pub backend: BackendConfig,
    pub output: OutputPaths,
    /// Matrix rows; empty means default plus each single ablation.
    pub variants: Vec<Variant>,
    /// Worker threads for the matrix; 0 lets the pool decide.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tasks: TaskSpec::builtin_names(),
            seeds: (0..10).collect(),
            agents: 2,
            horizon: 250,
            k: TopK::default(),
            ladder: Ladder::R4,
            dummy_count: 0,
            ablations: Ablations::default(),
            refine_messages: false,
            log_prompts: false,
            backend: BackendConfig::Oracle,
            output: OutputPaths::default(),
            variants: Vec::new(),
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.tasks.is_empty() {
            return Err(ConfigError::Invalid("no tasks".into()));
        }
        for t in &self.tasks {
            if TaskSpec::by_name(t).is_none() {
                return Err(ConfigError::Invalid(format!("unknown task `{t}`")));
            }
        }
        if self.seeds.is_empty() {
            return Err(ConfigError::Invalid("no seeds".into()));
        }
        if self.agents == 0 || self.agents > AGENT_NAMES.len() {
            return Err(ConfigError::Invalid(format!("agents must be 1..={}", AGENT_NAMES.len())));
        }
        if self.horizon == 0 {
            return Err(ConfigError::Invalid("horizon must be positive".into()));
        }
        Ok(())
    }

    pub fn agent_config(&self) -> AgentConfig {
        AgentConfig {
            k: self.k,
            ladder: self.ladder,
            ablations: self.ablations,
            refine_messages: self.refine_messages,
            log_prompts: self.log_prompts,
        }
    }

    /// Agent configuration for a matrix row: the row's flags replace the
    /// run's, its K and ladder override when given.
    pub fn variant_config(&self, v: &Variant) -> AgentConfig {
        AgentConfig { k: v.k.unwrap_or(self.k), ladder: v.ladder.unwrap_or(self.ladder), ablations: v.ablations, ..self.agent_config() }
    }

    pub fn matrix_variants(&self) -> Vec<Variant> {
        if !self.variants.is_empty() {
            return self.variants.clone();
        }
        std::iter::once(Variant::default_row())
            .chain(Ablations::NAMES.iter().map(|n| Variant::ablation(n).expect("known ablation")))
            .collect()
    }
}
