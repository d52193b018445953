//! Runs one episode: agents decide in ascending id order, then the kernel
//! applies the joint action.

use std::collections::BTreeMap;
use std::sync::Arc;

use thiserror::Error;

use super::transcript::{AgentStep, EndRecord, Header, StepRecord, Transcript, TranscriptRecord, SCHEMA_VERSION};
use crate::agent::RevecaAgent;
use crate::config::AgentConfig;
use crate::map::{Layout, MapSpec};
use crate::reasoner::{Reasoner, ReasonerError};
use crate::scenario::{spawn_scenario, ScenarioError, ScenarioRequest};
use crate::world::{AgentId, DoneReason, EpisodeMetrics, Goal, Step, Termination, WorldState};

pub const TD_NOTE: &str = "travel distance is the mean over agents of cells walked (1 cell = 1 m)";

/// Identity of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeSpec {
    pub task: String,
    pub seed: u64,
    pub agents: usize,
    pub horizon: Step,
    pub dummy_count: usize,
    pub agent_config: AgentConfig,
    pub label: String,
    pub map: MapSpec,
}

impl EpisodeSpec {
    pub fn new(task: &str, seed: u64) -> Self {
        Self {
            task: task.to_string(),
            seed,
            agents: 2,
            horizon: 250,
            dummy_count: 0,
            agent_config: AgentConfig::default(),
            label: "default".into(),
            map: MapSpec::house(),
        }
    }

    pub fn scenario_request(&self) -> ScenarioRequest {
        ScenarioRequest {
            task: self.task.clone(),
            seed: self.seed,
            dummy_count: self.dummy_count,
            agents: self.agents,
            horizon: self.horizon,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EpisodeOutcome {
    pub metrics: EpisodeMetrics,
    pub reason: DoneReason,
    pub transcript: Transcript,
    /// `(step, agent, dump)` rows, filled when memory dumps were requested.
    pub memory_dumps: Vec<(Step, AgentId, serde_json::Value)>,
}

#[derive(Debug, Error)]
pub enum EpisodeError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("episode aborted at step {step}: {source}")]
    Reasoner {
        step: Step,
        source: ReasonerError,
        /// Transcript up to the failing step, ending with an error record.
        partial: Box<Transcript>,
    },
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EpisodeOptions {
    pub dump_memory: bool,
}

/// Builds the default team for a world: one agent per body.
pub fn default_agents(state: &WorldState, goal: &Goal, config: AgentConfig) -> Vec<RevecaAgent> {
    let roster: BTreeMap<AgentId, String> = state.agents().iter().map(|a| (a.agent_id, a.name.clone())).collect();
    let dummies: Vec<_> = state.objects().iter().filter(|o| o.is_dummy).map(|o| o.object_id).collect();
    state
        .agents()
        .iter()
        .map(|a| {
            let mut agent = RevecaAgent::new(a.agent_id, &a.name, goal.clone(), state.layout_arc(), config, &roster);
            agent.set_audit_dummies(dummies.iter().copied());
            agent
        })
        .collect()
}

/// Spawns the scenario for `spec` and runs it with the default team.
pub fn run_episode(
    spec: &EpisodeSpec,
    reasoner: &mut dyn Reasoner,
    options: EpisodeOptions,
) -> Result<EpisodeOutcome, EpisodeError> {
    let scenario = spawn_scenario(&spec.scenario_request(), &spec.map)?;
    let agents = default_agents(&scenario.state, &scenario.goal, spec.agent_config);
    run_world(spec, scenario.state, scenario.goal, agents, reasoner, options)
}

fn header(spec: &EpisodeSpec, state: &WorldState, goal: &Goal, backend: &str) -> Header {
    Header {
        schema_version: SCHEMA_VERSION,
        task: spec.task.clone(),
        seed: spec.seed,
        dummy_count: spec.dummy_count,
        horizon: state.horizon,
        label: spec.label.clone(),
        backend: backend.to_string(),
        agent_config: spec.agent_config,
        goal: goal.clone(),
        map: state.layout().spec.clone(),
        objects: state.objects().to_vec(),
        agents: state.agents().to_vec(),
        td_note: TD_NOTE.into(),
    }
}

/// Runs a prepared world with a prepared team until termination.
pub fn run_world(
    spec: &EpisodeSpec,
    mut state: WorldState,
    goal: Goal,
    mut agents: Vec<RevecaAgent>,
    reasoner: &mut dyn Reasoner,
    options: EpisodeOptions,
) -> Result<EpisodeOutcome, EpisodeError> {
    agents.sort_by_key(|a| a.id);
    let mut transcript = Transcript { records: vec![TranscriptRecord::Header(Box::new(header(spec, &state, &goal, reasoner.backend())))] };
    let mut memory_dumps = Vec::new();
    loop {
        if let Termination::Done { success, reason } = state.check_termination(&goal) {
            let metrics = state.metrics(success);
            transcript.records.push(TranscriptRecord::End(EndRecord {
                success,
                reason: Some(reason),
                error: None,
                metrics: metrics.clone(),
            }));
            return Ok(EpisodeOutcome { metrics, reason, transcript, memory_dumps });
        }
        let step = state.step_index;
        let mut requests = BTreeMap::new();
        let mut events = BTreeMap::new();
        for agent in agents.iter_mut() {
            let obs = state.observe(agent.id).expect("agents match bodies");
            let inbox: Vec<_> = state.inbox_for(agent.id).cloned().collect();
            match agent.act(&obs, &inbox, reasoner) {
                Ok(turn) => {
                    requests.insert(agent.id, turn.request);
                    events.insert(agent.id, turn.events);
                }
                Err(source) => {
                    transcript.records.push(TranscriptRecord::End(EndRecord {
                        success: false,
                        reason: None,
                        error: Some(source.to_string()),
                        metrics: state.metrics(false),
                    }));
                    return Err(EpisodeError::Reasoner { step, source, partial: Box::new(transcript) });
                }
            }
            if options.dump_memory {
                memory_dumps.push((step, agent.id, agent.dump()));
            }
        }
        let report = state.step(&requests);
        let agent_steps = state
            .agents()
            .iter()
            .map(|body| AgentStep {
                agent_id: body.agent_id,
                request: requests.remove(&body.agent_id).unwrap_or_else(crate::world::ActionRequest::noop),
                position_after: body.position,
                held_after: body.held_object_ids.clone(),
                events: events.remove(&body.agent_id).unwrap_or_default(),
            })
            .collect();
        transcript.records.push(TranscriptRecord::Step(StepRecord { step, agents: agent_steps, kernel_events: report.events }));
    }
}

/// Rebuilds the world recorded in a transcript header.
pub fn world_from_header(h: &Header) -> Result<WorldState, crate::map::MapError> {
    let layout = Arc::new(Layout::compile(h.map.clone())?);
    Ok(WorldState::new(layout, h.objects.clone(), h.agents.clone(), h.horizon, h.seed))
}
