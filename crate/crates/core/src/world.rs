//! The environment kernel: ground-truth state, room-scoped observation,
//! the joint-action transition and termination.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Cell, Direction};
use crate::map::{Layout, Room, RoomId};
use crate::message::{Message, MESSAGE_BUDGET};

pub type Step = u32;

/// Objects an agent may hold at once.
pub const HAND_CAPACITY: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObjectId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub u32);

impl std::fmt::Display for ObjectId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::fmt::Display for AgentId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObjectKind {
    Item,
    Container,
    Surface,
    Decor,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContainerState {
    Open,
    Closed,
    NotApplicable,
}

/// Where an item currently is. Furniture is always `Floor`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Floor,
    Inside(ObjectId),
    HeldBy(AgentId),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectEntity {
    pub object_id: ObjectId,
    pub object_name: String,
    pub kind: ObjectKind,
    pub position: Cell,
    pub container_state: ContainerState,
    pub contents: Vec<ObjectId>,
    pub placement: Placement,
    pub is_dummy: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub affinity: Vec<String>,
}

impl ObjectEntity {
    pub fn is_container(&self) -> bool {
        matches!(self.kind, ObjectKind::Container | ObjectKind::Surface)
    }

    pub fn is_grabbable(&self) -> bool {
        self.kind == ObjectKind::Item
    }

    /// State labels as exposed to agents.
    pub fn states(&self) -> Vec<String> {
        let labels: &[&str] = match (self.kind, self.container_state) {
            (ObjectKind::Item, _) => &["GRABBABLE"],
            (ObjectKind::Container, ContainerState::Closed) => &["CONTAINER", "CLOSED"],
            (ObjectKind::Container, _) => &["CONTAINER", "OPEN"],
            (ObjectKind::Surface, _) => &["SURFACE"],
            (ObjectKind::Decor, _) => &["DECOR"],
        };
        labels.iter().map(|s| s.to_string()).collect()
    }

    /// Receptacle that currently accepts items.
    pub fn accepts_items(&self) -> bool {
        match self.kind {
            ObjectKind::Surface => true,
            ObjectKind::Container => self.container_state == ContainerState::Open,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentBody {
    pub agent_id: AgentId,
    pub name: String,
    pub position: Cell,
    pub held_object_ids: Vec<ObjectId>,
    pub distance_traveled: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalRelation {
    On,
    Inside,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoal {
    pub object_name: String,
    pub count: u32,
    pub location_id: ObjectId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub sub_goals: Vec<SubGoal>,
    pub location_id: ObjectId,
    pub location_name: String,
    pub relation: GoalRelation,
    pub text: String,
}

impl Goal {
    pub fn new(sub_goals: Vec<SubGoal>, location_id: ObjectId, location_name: &str, relation: GoalRelation) -> Self {
        let parts: Vec<String> = sub_goals
            .iter()
            .map(|g| {
                let plural = if g.count > 1 { "s" } else { "" };
                format!("{} {}{}", g.count, g.object_name, plural)
            })
            .collect();
        let prep = match relation {
            GoalRelation::On => "onto",
            GoalRelation::Inside => "into",
        };
        let text = format!(
            "Find and put target objects {} {} the goal location <{}> ({}).",
            parts.join(", "),
            prep,
            location_name,
            location_id
        );
        Self { sub_goals, location_id, location_name: location_name.to_string(), relation, text }
    }

    pub fn total_count(&self) -> u32 {
        self.sub_goals.iter().map(|g| g.count).sum()
    }

    pub fn required(&self, name: &str) -> u32 {
        self.sub_goals.iter().filter(|g| g.object_name == name).map(|g| g.count).sum()
    }

    pub fn mentions(&self, name: &str) -> bool {
        self.sub_goals.iter().any(|g| g.object_name == name)
    }
}

/// One visible object as reported by [`WorldState::observe`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectSnapshot {
    pub object_id: ObjectId,
    pub object_name: String,
    pub kind: ObjectKind,
    pub position: Cell,
    pub room_id: RoomId,
    pub room_name: String,
    pub states: Vec<String>,
    pub container_id: Option<ObjectId>,
    pub holder: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaboratorSighting {
    pub agent_id: AgentId,
    pub name: String,
    pub position: Cell,
    pub held_object_ids: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub observer_id: AgentId,
    pub step: Step,
    pub position: Cell,
    pub room_id: RoomId,
    pub held_object_ids: Vec<ObjectId>,
    pub visible_objects: Vec<ObjectSnapshot>,
    pub visible_collaborators: Vec<CollaboratorSighting>,
}

impl Observation {
    pub fn object(&self, id: ObjectId) -> Option<&ObjectSnapshot> {
        self.visible_objects.iter().find(|o| o.object_id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Action {
    Move { dir: Direction },
    Open { object: ObjectId },
    Close { object: ObjectId },
    Grasp { object: ObjectId },
    Put { object: ObjectId, target: ObjectId },
    NoOp,
}

impl Action {
    pub fn is_noop(&self) -> bool {
        matches!(self, Action::NoOp)
    }
}

/// One agent's contribution to a joint action: a primitive plus at most one message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionRequest {
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<Message>,
}

impl ActionRequest {
    pub fn noop() -> Self {
        Self { action: Action::NoOp, message: None }
    }
}

impl From<Action> for ActionRequest {
    fn from(action: Action) -> Self {
        Self { action, message: None }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IllegalReason {
    #[error("target cell is blocked")]
    Blocked,
    #[error("unknown object")]
    UnknownObject,
    #[error("object is out of reach")]
    OutOfReach,
    #[error("object is not a container")]
    NotAContainer,
    #[error("container is already open")]
    AlreadyOpen,
    #[error("container is already closed")]
    AlreadyClosed,
    #[error("object cannot be grasped")]
    NotGrabbable,
    #[error("object is already held")]
    AlreadyHeld,
    #[error("object is inside a closed container")]
    InsideClosedContainer,
    #[error("hands are full")]
    HandsFull,
    #[error("object is not held by this agent")]
    NotHeld,
    #[error("receptacle does not accept items")]
    NotAReceptacle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum KernelEvent {
    IllegalAction { agent: AgentId, action: Action, reason: IllegalReason },
    Moved { agent: AgentId, from: Cell, to: Cell },
    Opened { agent: AgentId, container: ObjectId },
    Closed { agent: AgentId, container: ObjectId },
    Grasped { agent: AgentId, object: ObjectId },
    Put { agent: AgentId, object: ObjectId, target: ObjectId },
    MessageRejected { agent: AgentId, reason: String },
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepReport {
    /// Step index at which the joint action was applied.
    pub step: Step,
    pub events: Vec<KernelEvent>,
    pub messages: Vec<Message>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DoneReason {
    GoalReached,
    Horizon,
    Stuck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum Termination {
    Running,
    Done { success: bool, reason: DoneReason },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum WorldError {
    #[error("unknown agent {0}")]
    UnknownAgent(AgentId),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub simulation_steps: Step,
    /// Mean over agents of the distance each one walked, in meters.
    pub travel_distance: f64,
    pub success: bool,
    pub messages_sent: u32,
}

/// Ground-truth world. Value-typed: cloning yields an independent episode.
#[derive(Debug, Clone)]
pub struct WorldState {
    pub step_index: Step,
    pub horizon: Step,
    pub rng_seed: u64,
    layout: Arc<Layout>,
    objects: Vec<ObjectEntity>,
    agents: Vec<AgentBody>,
    inbox: Vec<Message>,
    messages_sent: u32,
}

#[derive(Serialize)]
struct WorldSnapshot<'a> {
    map: &'a str,
    step_index: Step,
    horizon: Step,
    rng_seed: u64,
    rooms: &'a [Room],
    objects: &'a [ObjectEntity],
    agents: &'a [AgentBody],
    inbox: &'a [Message],
}

impl WorldState {
    /// Builds a state at step 1. Objects and agents are sorted by id.
    pub fn new(
        layout: Arc<Layout>,
        mut objects: Vec<ObjectEntity>,
        mut agents: Vec<AgentBody>,
        horizon: Step,
        rng_seed: u64,
    ) -> Self {
        objects.sort_by_key(|o| o.object_id);
        agents.sort_by_key(|a| a.agent_id);
        Self { step_index: 1, horizon, rng_seed, layout, objects, agents, inbox: Vec::new(), messages_sent: 0 }
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn layout_arc(&self) -> Arc<Layout> {
        Arc::clone(&self.layout)
    }

    pub fn rooms(&self) -> &[Room] {
        &self.layout.rooms
    }

    pub fn objects(&self) -> &[ObjectEntity] {
        &self.objects
    }

    pub fn agents(&self) -> &[AgentBody] {
        &self.agents
    }

    pub fn object(&self, id: ObjectId) -> Option<&ObjectEntity> {
        self.objects.binary_search_by_key(&id, |o| o.object_id).ok().map(|i| &self.objects[i])
    }

    fn object_mut(&mut self, id: ObjectId) -> Option<&mut ObjectEntity> {
        self.objects.binary_search_by_key(&id, |o| o.object_id).ok().map(|i| &mut self.objects[i])
    }

    pub fn agent(&self, id: AgentId) -> Option<&AgentBody> {
        self.agents.iter().find(|a| a.agent_id == id)
    }

    fn agent_index(&self, id: AgentId) -> Option<usize> {
        self.agents.iter().position(|a| a.agent_id == id)
    }

    pub fn messages_sent(&self) -> u32 {
        self.messages_sent
    }

    /// Messages readable during the current step (sent during the previous one).
    pub fn inbox(&self) -> &[Message] {
        &self.inbox
    }

    pub fn inbox_for(&self, agent: AgentId) -> impl Iterator<Item = &Message> {
        self.inbox.iter().filter(move |m| m.sender != agent && m.recipients.includes(agent))
    }

    /// Serialized ground truth; identical states produce identical strings.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&WorldSnapshot {
            map: &self.layout.spec.name,
            step_index: self.step_index,
            horizon: self.horizon,
            rng_seed: self.rng_seed,
            rooms: &self.layout.rooms,
            objects: &self.objects,
            agents: &self.agents,
            inbox: &self.inbox,
        })
        .expect("world state serializes")
    }

    pub fn room_of_object(&self, obj: &ObjectEntity) -> Option<RoomId> {
        self.layout.room_of(obj.position)
    }

    fn snapshot(&self, obj: &ObjectEntity) -> Option<ObjectSnapshot> {
        let room_id = self.layout.room_of(obj.position)?;
        let (container_id, holder) = match obj.placement {
            Placement::Floor => (None, None),
            Placement::Inside(c) => (Some(c), None),
            Placement::HeldBy(a) => (None, Some(a)),
        };
        Some(ObjectSnapshot {
            object_id: obj.object_id,
            object_name: obj.object_name.clone(),
            kind: obj.kind,
            position: obj.position,
            room_id,
            room_name: self.layout.room_name(room_id).to_string(),
            states: obj.states(),
            container_id,
            holder,
        })
    }

    fn hidden_in_closed_container(&self, obj: &ObjectEntity) -> bool {
        match obj.placement {
            Placement::Inside(c) => self.object(c).is_some_and(|c| c.container_state == ContainerState::Closed),
            _ => false,
        }
    }

    /// Room-scoped partial observation. Items inside closed containers stay hidden.
    pub fn observe(&self, agent_id: AgentId) -> Result<Observation, WorldError> {
        let me = self.agent(agent_id).ok_or(WorldError::UnknownAgent(agent_id))?;
        let room_id = self.layout.room_of(me.position).expect("agents stand on floor cells");
        let visible_objects = self
            .objects
            .iter()
            .filter(|o| self.layout.room_of(o.position) == Some(room_id))
            .filter(|o| !self.hidden_in_closed_container(o))
            .filter_map(|o| self.snapshot(o))
            .collect();
        let visible_collaborators = self
            .agents
            .iter()
            .filter(|a| a.agent_id != agent_id && self.layout.room_of(a.position) == Some(room_id))
            .map(|a| CollaboratorSighting {
                agent_id: a.agent_id,
                name: a.name.clone(),
                position: a.position,
                held_object_ids: a.held_object_ids.clone(),
            })
            .collect();
        Ok(Observation {
            observer_id: agent_id,
            step: self.step_index,
            position: me.position,
            room_id,
            held_object_ids: me.held_object_ids.clone(),
            visible_objects,
            visible_collaborators,
        })
    }

    fn in_reach(&self, agent: &AgentBody, obj: &ObjectEntity) -> bool {
        agent.position.manhattan(obj.position) <= 1
            && self.layout.room_of(agent.position) == self.layout.room_of(obj.position)
    }

    /// Checks an action's preconditions against the current state.
    pub fn check_action(&self, agent_id: AgentId, action: &Action) -> Result<(), IllegalReason> {
        let agent = self.agent(agent_id).ok_or(IllegalReason::UnknownObject)?;
        let reachable = |id: ObjectId| -> Result<&ObjectEntity, IllegalReason> {
            let obj = self.object(id).ok_or(IllegalReason::UnknownObject)?;
            if self.in_reach(agent, obj) {
                Ok(obj)
            } else {
                Err(IllegalReason::OutOfReach)
            }
        };
        match action {
            Action::NoOp => Ok(()),
            Action::Move { dir } => {
                if self.layout.walkable().is_open(agent.position.step(*dir)) {
                    Ok(())
                } else {
                    Err(IllegalReason::Blocked)
                }
            }
            Action::Open { object } | Action::Close { object } => {
                let obj = self.object(*object).ok_or(IllegalReason::UnknownObject)?;
                if obj.kind != ObjectKind::Container {
                    return Err(IllegalReason::NotAContainer);
                }
                reachable(*object)?;
                match (action, obj.container_state) {
                    (Action::Open { .. }, ContainerState::Open) => Err(IllegalReason::AlreadyOpen),
                    (Action::Close { .. }, ContainerState::Closed) => Err(IllegalReason::AlreadyClosed),
                    _ => Ok(()),
                }
            }
            Action::Grasp { object } => {
                let obj = self.object(*object).ok_or(IllegalReason::UnknownObject)?;
                if !obj.is_grabbable() {
                    return Err(IllegalReason::NotGrabbable);
                }
                if matches!(obj.placement, Placement::HeldBy(_)) {
                    return Err(IllegalReason::AlreadyHeld);
                }
                if agent.held_object_ids.len() >= HAND_CAPACITY {
                    return Err(IllegalReason::HandsFull);
                }
                reachable(*object)?;
                if self.hidden_in_closed_container(obj) {
                    return Err(IllegalReason::InsideClosedContainer);
                }
                Ok(())
            }
            Action::Put { object, target } => {
                if !agent.held_object_ids.contains(object) {
                    return Err(IllegalReason::NotHeld);
                }
                let tgt = reachable(*target)?;
                if !tgt.accepts_items() {
                    return Err(IllegalReason::NotAReceptacle);
                }
                Ok(())
            }
        }
    }

    /// Every primitive the agent could legally take right now, `NoOp` last.
    pub fn legal_actions(&self, agent_id: AgentId) -> Vec<Action> {
        let Some(agent) = self.agent(agent_id) else { return Vec::new() };
        let mut out = Vec::new();
        for dir in Direction::ALL {
            out.push(Action::Move { dir });
        }
        for obj in &self.objects {
            if !self.in_reach(agent, obj) {
                continue;
            }
            out.push(Action::Open { object: obj.object_id });
            out.push(Action::Close { object: obj.object_id });
            out.push(Action::Grasp { object: obj.object_id });
            for held in &agent.held_object_ids {
                out.push(Action::Put { object: *held, target: obj.object_id });
            }
        }
        out.retain(|a| self.check_action(agent_id, a).is_ok());
        out.push(Action::NoOp);
        out
    }

    /// Applies one joint action. Agents act in ascending id order; an illegal
    /// action degrades to a no-op and is reported. Messages become readable at
    /// the next step.
    pub fn step(&mut self, actions: &BTreeMap<AgentId, ActionRequest>) -> StepReport {
        let mut report = StepReport { step: self.step_index, ..Default::default() };
        let ids: Vec<AgentId> = self.agents.iter().map(|a| a.agent_id).collect();
        let mut outgoing = Vec::new();
        for id in ids {
            let Some(req) = actions.get(&id) else { continue };
            match self.check_action(id, &req.action) {
                Ok(()) => self.apply(id, &req.action, &mut report.events),
                Err(reason) => report.events.push(KernelEvent::IllegalAction {
                    agent: id,
                    action: req.action.clone(),
                    reason,
                }),
            }
            if let Some(msg) = &req.message {
                let len = msg.text.chars().count();
                if msg.sender != id {
                    report.events.push(KernelEvent::MessageRejected { agent: id, reason: "sender mismatch".into() });
                } else if len > MESSAGE_BUDGET {
                    report.events.push(KernelEvent::MessageRejected {
                        agent: id,
                        reason: format!("{len} characters exceeds the {MESSAGE_BUDGET}-character budget"),
                    });
                } else {
                    let mut msg = msg.clone();
                    msg.step = self.step_index;
                    outgoing.push(msg);
                }
            }
        }
        self.messages_sent += outgoing.len() as u32;
        self.inbox = outgoing.clone();
        report.messages = outgoing;
        self.step_index += 1;
        report
    }

    fn apply(&mut self, id: AgentId, action: &Action, events: &mut Vec<KernelEvent>) {
        let idx = self.agent_index(id).expect("checked agent");
        match action {
            Action::NoOp => {}
            Action::Move { dir } => {
                let from = self.agents[idx].position;
                let to = from.step(*dir);
                let agent = &mut self.agents[idx];
                agent.position = to;
                agent.distance_traveled += from.euclidean(to);
                let held = agent.held_object_ids.clone();
                for h in held {
                    if let Some(o) = self.object_mut(h) {
                        o.position = to;
                    }
                }
                events.push(KernelEvent::Moved { agent: id, from, to });
            }
            Action::Open { object } => {
                self.object_mut(*object).expect("checked").container_state = ContainerState::Open;
                events.push(KernelEvent::Opened { agent: id, container: *object });
            }
            Action::Close { object } => {
                self.object_mut(*object).expect("checked").container_state = ContainerState::Closed;
                events.push(KernelEvent::Closed { agent: id, container: *object });
            }
            Action::Grasp { object } => {
                let pos = self.agents[idx].position;
                let previous = self.object(*object).expect("checked").placement;
                if let Placement::Inside(c) = previous {
                    if let Some(c) = self.object_mut(c) {
                        c.contents.retain(|x| x != object);
                    }
                }
                let obj = self.object_mut(*object).expect("checked");
                obj.placement = Placement::HeldBy(id);
                obj.position = pos;
                self.agents[idx].held_object_ids.push(*object);
                events.push(KernelEvent::Grasped { agent: id, object: *object });
            }
            Action::Put { object, target } => {
                let tpos = self.object(*target).expect("checked").position;
                self.agents[idx].held_object_ids.retain(|x| x != object);
                let obj = self.object_mut(*object).expect("checked");
                obj.placement = Placement::Inside(*target);
                obj.position = tpos;
                self.object_mut(*target).expect("checked").contents.push(*object);
                events.push(KernelEvent::Put { agent: id, object: *object, target: *target });
            }
        }
    }

    /// Count of objects named `name` currently placed in `location`.
    pub fn placed_count(&self, name: &str, location: ObjectId) -> u32 {
        self.objects
            .iter()
            .filter(|o| o.object_name == name && o.placement == Placement::Inside(location))
            .count() as u32
    }

    pub fn goal_satisfied(&self, goal: &Goal) -> bool {
        goal.sub_goals.iter().all(|g| self.placed_count(&g.object_name, g.location_id) >= g.count)
    }

    /// Success takes precedence over the horizon and stuck conditions.
    pub fn check_termination(&self, goal: &Goal) -> Termination {
        if self.goal_satisfied(goal) {
            return Termination::Done { success: true, reason: DoneReason::GoalReached };
        }
        if self.step_index >= self.horizon {
            return Termination::Done { success: false, reason: DoneReason::Horizon };
        }
        let stuck = self
            .agents
            .iter()
            .all(|a| self.legal_actions(a.agent_id).iter().all(Action::is_noop));
        if stuck {
            return Termination::Done { success: false, reason: DoneReason::Stuck };
        }
        Termination::Running
    }

    pub fn metrics(&self, success: bool) -> EpisodeMetrics {
        let n = self.agents.len().max(1) as f64;
        EpisodeMetrics {
            simulation_steps: self.step_index,
            travel_distance: self.agents.iter().map(|a| a.distance_traveled).sum::<f64>() / n,
            success,
            messages_sent: self.messages_sent,
        }
    }

    /// Every object is in exactly one place and containers/hands agree with it.
    pub fn placement_consistent(&self) -> bool {
        let mut seen = BTreeSet::new();
        for o in &self.objects {
            if !seen.insert(o.object_id) {
                return false;
            }
            if !o.contents.is_empty() && !o.is_container() {
                return false;
            }
            let ok = match o.placement {
                Placement::Floor => true,
                Placement::Inside(c) => self.object(c).is_some_and(|c| c.contents.contains(&o.object_id)),
                Placement::HeldBy(a) => self.agent(a).is_some_and(|a| a.held_object_ids.contains(&o.object_id)),
            };
            if !ok {
                return false;
            }
        }
        let listed_in_containers = self.objects.iter().flat_map(|o| o.contents.iter()).count();
        let inside = self.objects.iter().filter(|o| matches!(o.placement, Placement::Inside(_))).count();
        let held_listed = self.agents.iter().flat_map(|a| a.held_object_ids.iter()).count();
        let held = self.objects.iter().filter(|o| matches!(o.placement, Placement::HeldBy(_))).count();
        listed_in_containers == inside && held_listed == held && self.agents.iter().all(|a| a.held_object_ids.len() <= HAND_CAPACITY)
    }
}
