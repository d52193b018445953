//! Per-agent memory: the common goal, observation memory, collaborator
//! memory and the skill book.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::geometry::Cell;
use crate::map::{Layout, RoomId};
use crate::planning::Plan;
use crate::world::{AgentId, CollaboratorSighting, Goal, ObjectId, ObjectKind, ObjectSnapshot, Observation, Step};

/// Ordinal priority of a piece of information with respect to the goal.
/// Declaration order is the total order (`None` lowest, `Strong` highest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relevance {
    None,
    Low,
    Medium,
    High,
    Strong,
}

impl Relevance {
    pub fn label(self) -> &'static str {
        match self {
            Relevance::None => "None",
            Relevance::Low => "Low",
            Relevance::Medium => "Medium",
            Relevance::High => "High",
            Relevance::Strong => "Strong",
        }
    }
}

impl fmt::Display for Relevance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Relevance {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Relevance::None),
            "low" => Ok(Relevance::Low),
            "medium" => Ok(Relevance::Medium),
            "high" => Ok(Relevance::High),
            "strong" => Ok(Relevance::Strong),
            other => Err(format!("unknown relevance `{other}`")),
        }
    }
}

/// The set of relevance levels in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Ladder {
    /// None < Medium < Strong
    R3,
    /// None < Low < Medium < Strong
    #[default]
    R4,
    /// None < Low < Medium < High < Strong
    R5,
}

impl Ladder {
    pub fn levels(self) -> &'static [Relevance] {
        match self {
            Ladder::R3 => &[Relevance::None, Relevance::Medium, Relevance::Strong],
            Ladder::R4 => &[Relevance::None, Relevance::Low, Relevance::Medium, Relevance::Strong],
            Ladder::R5 => &[Relevance::None, Relevance::Low, Relevance::Medium, Relevance::High, Relevance::Strong],
        }
    }

    pub fn size(self) -> u8 {
        self.levels().len() as u8
    }

    pub fn contains(self, r: Relevance) -> bool {
        self.levels().contains(&r)
    }
}

impl TryFrom<u8> for Ladder {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            3 => Ok(Ladder::R3),
            4 => Ok(Ladder::R4),
            5 => Ok(Ladder::R5),
            other => Err(format!("relevance ladder size must be 3, 4 or 5, got {other}")),
        }
    }
}

impl From<Ladder> for u8 {
    fn from(l: Ladder) -> u8 {
        l.size()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SkillKind {
    GoExplore,
    GoCheck,
    GoGrab,
    GoPut,
}

impl SkillKind {
    pub const ALL: [SkillKind; 4] = [SkillKind::GoExplore, SkillKind::GoCheck, SkillKind::GoGrab, SkillKind::GoPut];

    pub fn name(self) -> &'static str {
        match self {
            SkillKind::GoExplore => "goexplore",
            SkillKind::GoCheck => "gocheck",
            SkillKind::GoGrab => "gograb",
            SkillKind::GoPut => "goput",
        }
    }
}

impl fmt::Display for SkillKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkillParameter {
    Room,
    Container,
    Item,
    GoalLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkillDescriptor {
    pub name: &'static str,
    pub parameter: SkillParameter,
    pub precondition: &'static str,
    pub description: &'static str,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SkillBook {
    pub skills: BTreeMap<SkillKind, SkillDescriptor>,
}

impl Default for SkillBook {
    fn default() -> Self {
        let skills = BTreeMap::from([
            (
                SkillKind::GoExplore,
                SkillDescriptor {
                    name: "goexplore",
                    parameter: SkillParameter::Room,
                    precondition: "current room differs from the target room",
                    description: "walk into the target room",
                },
            ),
            (
                SkillKind::GoCheck,
                SkillDescriptor {
                    name: "gocheck",
                    parameter: SkillParameter::Container,
                    precondition: "target container is not yet open",
                    description: "walk to a container and open it",
                },
            ),
            (
                SkillKind::GoGrab,
                SkillDescriptor {
                    name: "gograb",
                    parameter: SkillParameter::Item,
                    precondition: "target is among the reachable objects and a hand is free",
                    description: "walk to an object and grasp it",
                },
            ),
            (
                SkillKind::GoPut,
                SkillDescriptor {
                    name: "goput",
                    parameter: SkillParameter::GoalLocation,
                    precondition: "at least one object is held",
                    description: "walk to the goal location and put a held object there",
                },
            ),
        ]);
        Self { skills }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RecordId(pub u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub record_id: RecordId,
    pub object_id: ObjectId,
    pub object_name: String,
    pub kind: ObjectKind,
    pub position: Cell,
    pub room_id: RoomId,
    pub room_name: String,
    pub available_action: Option<SkillKind>,
    pub states: Vec<String>,
    pub container_id: Option<ObjectId>,
    pub holder: Option<AgentId>,
    pub relevance: Relevance,
    pub acquired_step: Step,
    pub discarded: bool,
}

impl ObservationRecord {
    pub fn is_closed_container(&self) -> bool {
        self.kind == ObjectKind::Container && self.states.iter().any(|s| s == "CLOSED")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", content = "step", rename_all = "snake_case")]
pub enum EstimateSource {
    Observed(Step),
    RoomCenter(Step),
}

impl EstimateSource {
    pub fn step(self) -> Step {
        match self {
            EstimateSource::Observed(s) | EstimateSource::RoomCenter(s) => s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PositionEstimate {
    pub cell: Cell,
    pub room: RoomId,
    pub provenance: EstimateSource,
}

/// A dated fact placing a collaborator somewhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomEvidence {
    pub step: Step,
    pub room: RoomId,
    /// Exact cell when seen directly.
    pub cell: Option<Cell>,
    pub observed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogEntry {
    pub step: Step,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaboratorRecord {
    pub collaborator_id: AgentId,
    pub name: String,
    pub held_object_ids: Vec<ObjectId>,
    /// Step the held list was last confirmed; it may be stale afterwards.
    pub held_seen_step: Option<Step>,
    pub position_estimate: Option<PositionEstimate>,
    pub evidence: Vec<RoomEvidence>,
    pub conversation_log: Vec<LogEntry>,
    pub completed_plans: Vec<String>,
}

impl CollaboratorRecord {
    fn new(id: AgentId, name: &str) -> Self {
        Self {
            collaborator_id: id,
            name: name.to_string(),
            held_object_ids: Vec::new(),
            held_seen_step: None,
            position_estimate: None,
            evidence: Vec::new(),
            conversation_log: Vec::new(),
            completed_plans: Vec::new(),
        }
    }

    pub fn last_conversation_step(&self) -> Option<Step> {
        self.conversation_log.last().map(|e| e.step)
    }
}

/// Information extracted from one inbound message.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CollaboratorUpdate {
    pub text: String,
    /// Step the message was said.
    pub said_at: Step,
    pub room: Option<RoomId>,
    pub plans: Vec<String>,
}

/// The agent's view of goal progress.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoalView {
    pub goal: Goal,
    /// Objects known to already sit at the goal location.
    pub delivered: BTreeMap<ObjectId, String>,
}

impl GoalView {
    pub fn new(goal: Goal) -> Self {
        Self { goal, delivered: BTreeMap::new() }
    }

    pub fn delivered_count(&self, name: &str) -> u32 {
        self.delivered.values().filter(|n| *n == name).count() as u32
    }

    /// Units of `name` still to be delivered.
    pub fn remaining(&self, name: &str) -> u32 {
        self.goal.required(name).saturating_sub(self.delivered_count(name))
    }

    pub fn remaining_all(&self) -> BTreeMap<String, u32> {
        self.goal
            .sub_goals
            .iter()
            .map(|g| (g.object_name.clone(), self.remaining(&g.object_name)))
            .filter(|(_, n)| *n > 0)
            .collect()
    }

    pub fn complete(&self) -> bool {
        self.remaining_all().is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct Memory {
    pub owner: AgentId,
    pub goal: GoalView,
    pub ladder: Ladder,
    observations: Vec<ObservationRecord>,
    collaborators: BTreeMap<AgentId, CollaboratorRecord>,
    pub skill_book: SkillBook,
    /// This agent's own completed plans.
    pub completed_plans: Vec<String>,
    next_record: u32,
}

impl Memory {
    pub fn new(owner: AgentId, goal: Goal, ladder: Ladder) -> Self {
        Self {
            owner,
            goal: GoalView::new(goal),
            ladder,
            observations: Vec::new(),
            collaborators: BTreeMap::new(),
            skill_book: SkillBook::default(),
            completed_plans: Vec::new(),
            next_record: 1,
        }
    }

    pub fn records(&self) -> &[ObservationRecord] {
        &self.observations
    }

    /// Undiscarded records, the only ones retrieval may see.
    pub fn retrievable(&self) -> impl Iterator<Item = &ObservationRecord> {
        self.observations.iter().filter(|r| !r.discarded)
    }

    pub fn record(&self, id: RecordId) -> Option<&ObservationRecord> {
        self.observations.iter().find(|r| r.record_id == id)
    }

    pub fn live_record_for(&self, object: ObjectId) -> Option<&ObservationRecord> {
        self.observations.iter().find(|r| r.object_id == object && !r.discarded)
    }

    fn live_index(&self, object: ObjectId) -> Option<usize> {
        self.observations.iter().position(|r| r.object_id == object && !r.discarded)
    }

    pub fn collaborators(&self) -> impl Iterator<Item = &CollaboratorRecord> {
        self.collaborators.values()
    }

    pub fn collaborator(&self, id: AgentId) -> Option<&CollaboratorRecord> {
        self.collaborators.get(&id)
    }

    pub fn ensure_collaborator(&mut self, id: AgentId, name: &str) -> &mut CollaboratorRecord {
        self.collaborators.entry(id).or_insert_with(|| CollaboratorRecord::new(id, name))
    }

    /// Skill an agent could apply to the object, given the goal.
    pub fn available_action(&self, snap: &ObjectSnapshot) -> Option<SkillKind> {
        let goal_loc = self.goal.goal.location_id;
        if snap.object_id == goal_loc {
            return Some(SkillKind::GoPut);
        }
        match snap.kind {
            ObjectKind::Item if snap.holder.is_none() && snap.container_id != Some(goal_loc) => Some(SkillKind::GoGrab),
            ObjectKind::Container if snap.states.iter().any(|s| s == "CLOSED") => Some(SkillKind::GoCheck),
            _ => None,
        }
    }

    /// Whether storing `snap` would create or re-score a record, i.e. whether a
    /// relevance estimate is needed. Re-scoring happens when the object changed
    /// room, receptacle, holder or state labels.
    pub fn needs_relevance(&self, snap: &ObjectSnapshot) -> bool {
        match self.live_record_for(snap.object_id) {
            None => true,
            Some(r) => {
                r.room_id != snap.room_id
                    || r.container_id != snap.container_id
                    || r.holder != snap.holder
                    || r.states != snap.states
            }
        }
    }

    /// Inserts or refreshes the record for a sighted object. `relevance` is only
    /// applied when [`Memory::needs_relevance`] would return true.
    pub fn upsert_observation(&mut self, snap: &ObjectSnapshot, relevance: Relevance, step: Step) -> RecordId {
        let rescore = self.needs_relevance(snap);
        let action = self.available_action(snap);
        if let Some(i) = self.live_index(snap.object_id) {
            let r = &mut self.observations[i];
            r.position = snap.position;
            r.room_id = snap.room_id;
            r.room_name = snap.room_name.clone();
            r.states = snap.states.clone();
            r.container_id = snap.container_id;
            r.holder = snap.holder;
            r.available_action = action;
            r.acquired_step = step;
            if rescore {
                r.relevance = relevance;
            }
            return r.record_id;
        }
        let id = RecordId(self.next_record);
        self.next_record += 1;
        self.observations.push(ObservationRecord {
            record_id: id,
            object_id: snap.object_id,
            object_name: snap.object_name.clone(),
            kind: snap.kind,
            position: snap.position,
            room_id: snap.room_id,
            room_name: snap.room_name.clone(),
            available_action: action,
            states: snap.states.clone(),
            container_id: snap.container_id,
            holder: snap.holder,
            relevance,
            acquired_step: step,
            discarded: false,
        });
        id
    }

    /// Marks records discarded; returns how many were newly discarded.
    pub fn discard_records(&mut self, ids: &[RecordId]) -> usize {
        let mut n = 0;
        for r in self.observations.iter_mut() {
            if !r.discarded && ids.contains(&r.record_id) {
                r.discarded = true;
                n += 1;
            }
        }
        n
    }

    pub fn discard_plan_provenance(&mut self, plan: &Plan) -> usize {
        self.discard_records(&plan.provenance)
    }

    pub fn discard_object(&mut self, object: ObjectId) -> usize {
        match self.live_record_for(object) {
            Some(r) => {
                let id = r.record_id;
                self.discard_records(&[id])
            }
            None => 0,
        }
    }

    /// Discards records the observation proves stale: the object was expected
    /// in the observer's room but is not visible, and it cannot be hiding in a
    /// container that is still closed.
    pub fn discard_absent(&mut self, obs: &Observation) -> Vec<RecordId> {
        let visible: BTreeSet<ObjectId> = obs.visible_objects.iter().map(|o| o.object_id).collect();
        let closed: BTreeSet<ObjectId> = obs
            .visible_objects
            .iter()
            .filter(|o| o.states.iter().any(|s| s == "CLOSED"))
            .map(|o| o.object_id)
            .collect();
        let mut gone = Vec::new();
        for r in self.observations.iter_mut() {
            if r.discarded || r.room_id != obs.room_id || visible.contains(&r.object_id) {
                continue;
            }
            if r.container_id.is_some_and(|c| closed.contains(&c)) {
                continue;
            }
            r.discarded = true;
            gone.push(r.record_id);
        }
        gone
    }

    /// Direct sighting of a collaborator.
    pub fn observe_collaborator(&mut self, sighting: &CollaboratorSighting, room: RoomId, step: Step) {
        let rec = self.ensure_collaborator(sighting.agent_id, &sighting.name);
        rec.held_object_ids = sighting.held_object_ids.clone();
        rec.held_seen_step = Some(step);
        rec.position_estimate =
            Some(PositionEstimate { cell: sighting.position, room, provenance: EstimateSource::Observed(step) });
        rec.evidence.push(RoomEvidence { step, room, cell: Some(sighting.position), observed: true });
    }

    /// Folds an inbound message into the sender's record. A named room moves the
    /// position estimate to that room's centre unless a newer estimate exists.
    pub fn update_collaborator_from_message(
        &mut self,
        sender: AgentId,
        sender_name: &str,
        update: &CollaboratorUpdate,
        layout: &Layout,
    ) -> &CollaboratorRecord {
        let rec = self.ensure_collaborator(sender, sender_name);
        rec.conversation_log.push(LogEntry { step: update.said_at, message: update.text.clone() });
        if let Some(room) = update.room.and_then(|r| layout.room(r)) {
            let newer = rec.position_estimate.is_none_or(|e| e.provenance.step() < update.said_at);
            if newer {
                rec.position_estimate = Some(PositionEstimate {
                    cell: room.center,
                    room: room.room_id,
                    provenance: EstimateSource::RoomCenter(update.said_at),
                });
            }
            rec.evidence.push(RoomEvidence { step: update.said_at, room: room.room_id, cell: None, observed: false });
        }
        for p in &update.plans {
            if !rec.completed_plans.contains(p) {
                rec.completed_plans.push(p.clone());
            }
        }
        rec
    }

    /// Object ids that collaborators are believed to hold.
    pub fn held_by_collaborators(&self) -> BTreeSet<ObjectId> {
        self.collaborators.values().flat_map(|c| c.held_object_ids.iter().copied()).collect()
    }

    /// Goal item names for which no usable record is known yet.
    pub fn unfound_names(&self, held_by_me: &[String]) -> BTreeSet<String> {
        let others = self.held_by_collaborators();
        self.goal
            .remaining_all()
            .into_iter()
            .filter(|(name, need)| {
                let mine = held_by_me.iter().filter(|h| *h == name).count() as u32;
                let known = self
                    .retrievable()
                    .filter(|r| {
                        r.object_name == *name
                            && r.available_action == Some(SkillKind::GoGrab)
                            && !others.contains(&r.object_id)
                    })
                    .count() as u32;
                mine + known < *need
            })
            .map(|(n, _)| n)
            .collect()
    }

    /// Memory dump following the goal / object list / collaborator list layout.
    pub fn to_json(&self) -> serde_json::Value {
        let objects: Vec<_> = self
            .observations
            .iter()
            .map(|r| {
                json!({
                    "object_id": r.object_id,
                    "object_name": r.object_name,
                    "position": r.position,
                    "available_action": r.available_action.map(|a| a.name()),
                    "room_name": r.room_name,
                    "room_id": r.room_id,
                    "states": r.states,
                    "relevance": r.relevance.label(),
                    "acquired_step": r.acquired_step,
                    "discarded": r.discarded,
                })
            })
            .collect();
        let collaborators: Vec<_> = self
            .collaborators
            .values()
            .map(|c| {
                json!({
                    "agent_id": c.collaborator_id,
                    "name": c.name,
                    "held_object_ids": c.held_object_ids,
                    "position": c.position_estimate.map(|p| p.cell),
                    "position_source": c.position_estimate.map(|p| p.provenance),
                    "conversation_log": c.conversation_log,
                    "completed_plans": c.completed_plans,
                })
            })
            .collect();
        json!({
            "agent_id": self.owner,
            "common_goal": self.goal.goal.text,
            "delivered": self.goal.delivered.keys().collect::<Vec<_>>(),
            "object_information_list": objects,
            "collaborator_information_list": collaborators,
            "completed_plans": self.completed_plans,
            "skill_book": self.skill_book.skills.values().map(|s| s.name).collect::<Vec<_>>(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{GoalRelation, SubGoal};

    fn goal() -> Goal {
        Goal::new(
            vec![SubGoal { object_name: "apple".into(), count: 1, location_id: ObjectId(268) }],
            ObjectId(268),
            "coffeetable",
            GoalRelation::On,
        )
    }

    fn apple(pos: Cell, room: u32) -> ObjectSnapshot {
        ObjectSnapshot {
            object_id: ObjectId(21),
            object_name: "apple".into(),
            kind: ObjectKind::Item,
            position: pos,
            room_id: RoomId(room),
            room_name: format!("room{room}"),
            states: vec!["GRABBABLE".into()],
            container_id: Some(ObjectId(7)),
            holder: None,
        }
    }

    #[test]
    fn ladders_are_ordered() {
        for ladder in [Ladder::R3, Ladder::R4, Ladder::R5] {
            let levels = ladder.levels();
            assert!(levels.windows(2).all(|w| w[0] < w[1]));
            assert_eq!(levels.first(), Some(&Relevance::None));
            assert_eq!(levels.last(), Some(&Relevance::Strong));
        }
        assert!(!Ladder::R3.contains(Relevance::Low));
        assert_eq!(Ladder::try_from(6).unwrap_err(), "relevance ladder size must be 3, 4 or 5, got 6");
    }

    #[test]
    fn first_sight_inserts() {
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let id = m.upsert_observation(&apple(Cell::new(1, 1), 1), Relevance::Strong, 3);
        let r = m.record(id).unwrap();
        assert_eq!(r.relevance, Relevance::Strong);
        assert_eq!(r.acquired_step, 3);
        assert_eq!(r.available_action, Some(SkillKind::GoGrab));
    }

    #[test]
    fn resight_same_room_keeps_relevance() {
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let id = m.upsert_observation(&apple(Cell::new(1, 1), 1), Relevance::Strong, 3);
        let before = m.record(id).unwrap().clone();
        let moved = apple(Cell::new(2, 1), 1);
        assert!(!m.needs_relevance(&moved));
        let id2 = m.upsert_observation(&moved, Relevance::None, 9);
        assert_eq!(id, id2);
        let after = m.record(id).unwrap();
        assert_eq!(after.position, Cell::new(2, 1));
        assert_eq!(after.acquired_step, 9);
        assert_eq!(after.relevance, before.relevance);
        assert_eq!(after.object_name, before.object_name);
    }

    #[test]
    fn room_change_rescores() {
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let id = m.upsert_observation(&apple(Cell::new(1, 1), 1), Relevance::Strong, 3);
        let moved = apple(Cell::new(9, 9), 2);
        assert!(m.needs_relevance(&moved));
        m.upsert_observation(&moved, Relevance::Low, 4);
        assert_eq!(m.record(id).unwrap().relevance, Relevance::Low);
    }

    #[test]
    fn discarded_object_gets_new_record() {
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let id = m.upsert_observation(&apple(Cell::new(1, 1), 1), Relevance::Strong, 3);
        assert_eq!(m.discard_records(&[id]), 1);
        assert_eq!(m.discard_records(&[id]), 0, "idempotent");
        let id2 = m.upsert_observation(&apple(Cell::new(1, 1), 1), Relevance::Strong, 5);
        assert_ne!(id, id2);
        assert_eq!(m.retrievable().count(), 1);
        assert_eq!(m.records().len(), 2);
    }

    #[test]
    fn message_room_moves_estimate_to_center() {
        let layout = Layout::house();
        let kitchen = layout.room_by_name("kitchen").unwrap().clone();
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let upd = CollaboratorUpdate {
            text: "I am searching the kitchen".into(),
            said_at: 20,
            room: Some(kitchen.room_id),
            plans: vec![],
        };
        let rec = m.update_collaborator_from_message(AgentId(2), "Bob", &upd, &layout);
        let est = rec.position_estimate.unwrap();
        assert_eq!(est.cell, kitchen.center);
        assert_eq!(est.provenance, EstimateSource::RoomCenter(20));
    }

    #[test]
    fn announcement_extends_completed_plans() {
        let layout = Layout::house();
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let upd = CollaboratorUpdate {
            text: "done".into(),
            said_at: 22,
            room: None,
            plans: vec!["[gograb] <cupcake> (368)".into(), "[goput] <coffeetable> (268)".into()],
        };
        let rec = m.update_collaborator_from_message(AgentId(2), "Bob", &upd, &layout);
        assert_eq!(rec.completed_plans[0], "[gograb] <cupcake> (368)");
    }

    #[test]
    fn empty_message_only_logs() {
        let layout = Layout::house();
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        m.ensure_collaborator(AgentId(2), "Bob");
        let before = m.collaborator(AgentId(2)).unwrap().clone();
        let rec = m.update_collaborator_from_message(AgentId(2), "Bob", &CollaboratorUpdate::default(), &layout);
        assert_eq!(rec.conversation_log.len(), 1);
        assert_eq!(rec.position_estimate, before.position_estimate);
        assert_eq!(rec.completed_plans, before.completed_plans);
    }

    #[test]
    fn stale_message_does_not_override_newer_observation() {
        let layout = Layout::house();
        let kitchen = layout.room_by_name("kitchen").unwrap().room_id;
        let living = layout.room_by_name("livingroom").unwrap().room_id;
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let sighting =
            CollaboratorSighting { agent_id: AgentId(2), name: "Bob".into(), position: Cell::new(14, 2), held_object_ids: vec![] };
        m.observe_collaborator(&sighting, living, 10);
        let upd = CollaboratorUpdate { text: "kitchen".into(), said_at: 8, room: Some(kitchen), plans: vec![] };
        let rec = m.update_collaborator_from_message(AgentId(2), "Bob", &upd, &layout);
        assert_eq!(rec.position_estimate.unwrap().provenance, EstimateSource::Observed(10));
    }

    #[test]
    fn absent_objects_are_discarded() {
        let mut m = Memory::new(AgentId(1), goal(), Ladder::R4);
        let mut snap = apple(Cell::new(1, 1), 1);
        snap.container_id = None;
        m.upsert_observation(&snap, Relevance::Strong, 1);
        let obs = Observation {
            observer_id: AgentId(1),
            step: 5,
            position: Cell::new(2, 2),
            room_id: RoomId(1),
            held_object_ids: vec![],
            visible_objects: vec![],
            visible_collaborators: vec![],
        };
        assert_eq!(m.discard_absent(&obs).len(), 1);
        assert_eq!(m.retrievable().count(), 0);
    }
}
