//! One live episode with a human-controlled agent. Synchronous; the server
//! wraps each session in its own lock.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use reveca::agent::{CommMode, RevecaAgent};
use reveca::comms::{init_payload_within_budget, verbatim_message, CommsError};
use reveca::config::AgentConfig;
use reveca::geometry::Cell;
use reveca::harness::default_agents;
use reveca::map::{MapSpec, RoomId};
use reveca::message::{InitPayload, Message, Payload, QueryPayload, Recipients};
use reveca::reasoner::OracleReasoner;
use reveca::scenario::{spawn_scenario, ScenarioError, ScenarioRequest};
use reveca::world::{
    Action, ActionRequest, AgentId, DoneReason, Goal, IllegalReason, KernelEvent, ObjectId, ObjectSnapshot,
    Observation, Step, Termination, WorldState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub task: String,
    pub seed: u64,
    pub agents: usize,
    pub horizon: Step,
    pub dummy_count: usize,
    /// Which agent the human drives.
    pub human_agent: AgentId,
    pub mode: CommMode,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            task: "prepare_afternoon_tea".into(),
            seed: 0,
            agents: 2,
            horizon: 250,
            dummy_count: 0,
            human_agent: AgentId(1),
            mode: CommMode::Reveca,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionPhase {
    AwaitingHumanAction,
    Advancing,
    Ended,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("human agent {0} is not part of the team")]
    UnknownHuman(AgentId),
}

/// Why a submission was refused. No step is consumed.
#[derive(Debug, Clone, PartialEq, Error, Serialize)]
#[serde(tag = "error", rename_all = "snake_case")]
pub enum SubmitError {
    #[error("illegal action: {reason}")]
    IllegalAction { reason: IllegalReason, legal_actions: Vec<Action> },
    #[error("chat message too long: {reason}")]
    ChatTooLong { reason: String },
    #[error("submission carries neither an action nor chat text")]
    Empty,
    #[error("episode has ended")]
    Ended,
    #[error("reasoner failed: {reason}")]
    Reasoner { reason: String },
}

/// What the human sends: a primitive, a chat line, or both.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct HumanInput {
    pub action: Option<Action>,
    pub chat: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnownRoom {
    pub room_id: RoomId,
    pub room_name: String,
    pub cells: Vec<Cell>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Outcome {
    pub success: bool,
    pub reason: DoneReason,
}

/// Everything the human may see. Built only from the human's own
/// observations and the messages addressed to them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub session_id: String,
    pub step: Step,
    pub phase: SessionPhase,
    pub mode: CommMode,
    pub human_agent: AgentId,
    pub goal_text: String,
    pub observation: Observation,
    pub held_objects: Vec<ObjectSnapshot>,
    /// Last sighting of every object the human has seen.
    pub remembered_objects: Vec<ObjectSnapshot>,
    /// Rooms the human has stood in; every other cell is fogged.
    pub known_rooms: Vec<KnownRoom>,
    pub map_width: i32,
    pub map_height: i32,
    pub chat: Vec<Message>,
    pub legal_actions: Vec<Action>,
    pub outcome: Option<Outcome>,
}

/// Broadcast after every accepted submission.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    pub snapshot: Snapshot,
    /// Chat lines that became visible with this step.
    pub chat: Vec<Message>,
    /// Kernel events caused by the human.
    pub events: Vec<KernelEvent>,
}

pub struct Session {
    pub id: String,
    config: SessionConfig,
    world: WorldState,
    goal: Goal,
    agents: Vec<RevecaAgent>,
    reasoner: OracleReasoner,
    phase: SessionPhase,
    outcome: Option<Outcome>,
    chat: Vec<Message>,
    visited: BTreeSet<RoomId>,
    seen: BTreeMap<ObjectId, ObjectSnapshot>,
}

impl Session {
    pub fn new(id: String, config: SessionConfig) -> Result<Self, SessionError> {
        let req = ScenarioRequest {
            task: config.task.clone(),
            seed: config.seed,
            dummy_count: config.dummy_count,
            agents: config.agents,
            horizon: config.horizon,
        };
        let scenario = spawn_scenario(&req, &MapSpec::house())?;
        if scenario.state.agent(config.human_agent).is_none() {
            return Err(SessionError::UnknownHuman(config.human_agent));
        }
        let agents = default_agents(&scenario.state, &scenario.goal, AgentConfig::default())
            .into_iter()
            .filter(|a| a.id != config.human_agent)
            .map(|mut a| {
                a.set_comm_mode(config.mode);
                a
            })
            .collect();
        let mut s = Self {
            id,
            config,
            world: scenario.state,
            goal: scenario.goal,
            agents,
            reasoner: OracleReasoner::new(),
            phase: SessionPhase::AwaitingHumanAction,
            outcome: None,
            chat: Vec::new(),
            visited: BTreeSet::new(),
            seen: BTreeMap::new(),
        };
        s.remember();
        s.check_end();
        Ok(s)
    }

    pub fn phase(&self) -> SessionPhase {
        self.phase
    }

    pub fn step_index(&self) -> Step {
        self.world.step_index
    }

    pub fn human(&self) -> AgentId {
        self.config.human_agent
    }

    /// Ground truth, for tests and audits. Never sent to clients.
    pub fn world(&self) -> &WorldState {
        &self.world
    }

    fn observation(&self) -> Observation {
        self.world.observe(self.config.human_agent).expect("human agent exists")
    }

    fn remember(&mut self) {
        let obs = self.observation();
        self.visited.insert(obs.room_id);
        for o in obs.visible_objects {
            self.seen.insert(o.object_id, o);
        }
    }

    fn check_end(&mut self) {
        if let Termination::Done { success, reason } = self.world.check_termination(&self.goal) {
            self.phase = SessionPhase::Ended;
            self.outcome = Some(Outcome { success, reason });
        }
    }

    /// Legal primitives restricted to objects the human knows about.
    fn legal_actions(&self) -> Vec<Action> {
        let known = |id: &ObjectId| self.seen.contains_key(id);
        self.world
            .legal_actions(self.config.human_agent)
            .into_iter()
            .filter(|a| match a {
                Action::Open { object } | Action::Close { object } | Action::Grasp { object } => known(object),
                Action::Put { target, .. } => known(target),
                Action::Move { .. } | Action::NoOp => true,
            })
            .collect()
    }

    pub fn snapshot(&self) -> Snapshot {
        let obs = self.observation();
        let layout = self.world.layout();
        let held_objects = obs.held_object_ids.iter().filter_map(|id| obs.object(*id).cloned()).collect();
        let known_rooms = self
            .visited
            .iter()
            .filter_map(|r| layout.room(*r))
            .map(|room| KnownRoom {
                room_id: room.room_id,
                room_name: room.room_name.clone(),
                cells: room.cells.iter().copied().collect(),
            })
            .collect();
        Snapshot {
            session_id: self.id.clone(),
            step: self.world.step_index,
            phase: self.phase,
            mode: self.config.mode,
            human_agent: self.config.human_agent,
            goal_text: self.goal.text.clone(),
            held_objects,
            remembered_objects: self.seen.values().cloned().collect(),
            known_rooms,
            map_width: layout.spec.width,
            map_height: layout.spec.height,
            chat: self.chat.clone(),
            legal_actions: if self.phase == SessionPhase::Ended { Vec::new() } else { self.legal_actions() },
            outcome: self.outcome.clone(),
            observation: obs,
        }
    }

    /// Turns chat text into a message. A question naming a known object is a
    /// validation query; anything else shares what the human currently sees.
    fn chat_message(&self, text: &str) -> Result<Message, SubmitError> {
        let obs = self.observation();
        let lower = text.to_lowercase();
        let mut named: Vec<ObjectId> = self
            .seen
            .values()
            .filter(|o| lower.contains(&o.object_name.to_lowercase()))
            .map(|o| o.object_id)
            .collect();
        named.sort();
        let payload = if text.contains('?') && !named.is_empty() {
            Payload::Query(QueryPayload { room: obs.room_id, object_ids: named })
        } else {
            Payload::Init(init_payload_within_budget(InitPayload {
                room: obs.room_id,
                position: obs.position,
                objects: obs.visible_objects.clone(),
            }))
        };
        verbatim_message(payload, self.config.human_agent, Recipients::All, text).map_err(|e: CommsError| SubmitError::ChatTooLong { reason: e.to_string() })
    }

    /// Validates the submission, lets the AI agents take their turns and steps
    /// the kernel once.
    pub fn submit(&mut self, input: HumanInput) -> Result<StepResult, SubmitError> {
        if self.phase == SessionPhase::Ended {
            return Err(SubmitError::Ended);
        }
        let chat = input.chat.as_deref().map(str::trim).filter(|t| !t.is_empty());
        if input.action.is_none() && chat.is_none() {
            return Err(SubmitError::Empty);
        }
        let action = input.action.unwrap_or(Action::NoOp);
        if !action.is_noop() {
            let known = match &action {
                Action::Open { object } | Action::Close { object } | Action::Grasp { object } => self.seen.contains_key(object),
                Action::Put { target, .. } => self.seen.contains_key(target),
                _ => true,
            };
            let check = if known { self.world.check_action(self.config.human_agent, &action) } else { Err(IllegalReason::UnknownObject) };
            if let Err(reason) = check {
                return Err(SubmitError::IllegalAction { reason, legal_actions: self.legal_actions() });
            }
        }
        let message = chat.map(|t| self.chat_message(t)).transpose()?;

        self.phase = SessionPhase::Advancing;
        let human = self.config.human_agent;
        let mut requests = BTreeMap::new();
        requests.insert(human, ActionRequest { action, message });
        for agent in self.agents.iter_mut() {
            let obs = self.world.observe(agent.id).expect("agent exists");
            let inbox: Vec<Message> = self.world.inbox_for(agent.id).cloned().collect();
            match agent.act(&obs, &inbox, &mut self.reasoner) {
                Ok(turn) => {
                    requests.insert(agent.id, turn.request);
                }
                Err(e) => {
                    self.phase = SessionPhase::AwaitingHumanAction;
                    return Err(SubmitError::Reasoner { reason: e.to_string() });
                }
            }
        }
        let report = self.world.step(&requests);
        let visible: Vec<Message> = report
            .messages
            .into_iter()
            .filter(|m| m.sender == human || m.recipients.includes(human))
            .collect();
        self.chat.extend(visible.iter().cloned());
        let events = report.events.into_iter().filter(|e| event_agent(e) == human).collect();
        self.remember();
        self.phase = SessionPhase::AwaitingHumanAction;
        self.check_end();
        Ok(StepResult { snapshot: self.snapshot(), chat: visible, events })
    }
}

fn event_agent(e: &KernelEvent) -> AgentId {
    match e {
        KernelEvent::IllegalAction { agent, .. }
        | KernelEvent::Moved { agent, .. }
        | KernelEvent::Opened { agent, .. }
        | KernelEvent::Closed { agent, .. }
        | KernelEvent::Grasped { agent, .. }
        | KernelEvent::Put { agent, .. }
        | KernelEvent::MessageRejected { agent, .. } => *agent,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use reveca::geometry::Direction;

    fn session(mode: CommMode) -> Session {
        Session::new("t".into(), SessionConfig { mode, ..Default::default() }).unwrap()
    }

    #[test]
    fn illegal_action_consumes_no_step() {
        let mut s = session(CommMode::Reveca);
        let before = s.step_index();
        let err = s.submit(HumanInput { action: Some(Action::Grasp { object: ObjectId(9999) }), chat: None }).unwrap_err();
        assert!(matches!(err, SubmitError::IllegalAction { .. }));
        assert_eq!(s.step_index(), before);
        assert_eq!(s.phase(), SessionPhase::AwaitingHumanAction);
    }

    #[test]
    fn legal_move_advances_one_step() {
        let mut s = session(CommMode::Reveca);
        let snap = s.snapshot();
        let dir = snap
            .legal_actions
            .iter()
            .find_map(|a| match a {
                Action::Move { dir } => Some(*dir),
                _ => None,
            })
            .unwrap_or(Direction::North);
        let before = snap.observation.position;
        let r = s.submit(HumanInput { action: Some(Action::Move { dir }), chat: None }).unwrap();
        assert_eq!(r.snapshot.step, snap.step + 1);
        assert_eq!(r.snapshot.observation.position, before.step(dir));
    }

    #[test]
    fn fog_covers_unvisited_rooms() {
        let s = session(CommMode::Reveca);
        let snap = s.snapshot();
        assert_eq!(snap.known_rooms.len(), 1);
        assert_eq!(snap.known_rooms[0].room_id, snap.observation.room_id);
        assert!(snap.remembered_objects.iter().all(|o| o.room_id == snap.observation.room_id));
    }

    #[test]
    fn snapshot_is_stable() {
        let a = serde_json::to_string(&session(CommMode::Reveca).snapshot()).unwrap();
        let b = serde_json::to_string(&session(CommMode::Reveca).snapshot()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn no_comm_agents_stay_silent() {
        let mut s = session(CommMode::NoComm);
        for _ in 0..20 {
            let r = s.submit(HumanInput { action: Some(Action::NoOp), chat: None }).unwrap();
            assert!(r.chat.is_empty());
        }
        assert!(s.snapshot().chat.is_empty());
    }

    #[test]
    fn overlong_chat_is_refused() {
        let mut s = session(CommMode::Reveca);
        let before = s.step_index();
        let err = s.submit(HumanInput { action: None, chat: Some("x".repeat(600)) }).unwrap_err();
        assert!(matches!(err, SubmitError::ChatTooLong { .. }));
        assert_eq!(s.step_index(), before);
    }
}
