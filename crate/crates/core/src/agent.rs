//! The cooperative agent: one decision turn per step.
//!
//! A turn reads the inbox, folds the observation into memory, settles any
//! running validation, plans when no skill is active, ticks the skill and
//! attaches at most one outgoing message.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::comms::{init_payload_within_budget, parse_inbound, render_message, InboundCommand};
use crate::config::AgentConfig;
use crate::executor::{a_star, path_len, FailReason, Phase, SkillExecution};
use crate::geometry::Cell;
use crate::map::{Grid, Layout, RoomId};
use crate::memory::{CollaboratorUpdate, Memory, ObservationRecord, RecordId, Relevance, SkillKind};
use crate::message::{
    InitPayload, Message, MessageKind, Payload, QueryPayload, Recipients, ResponsePayload,
    SubGoalPayload,
};
use crate::planning::{
    build_plan_context, plan as choose_plan, relative_proximity, retrieve_top_k, CollaboratorView, Plan,
    PlanInputs, PlanTarget, Proximity, ProximityBucket, RoomInfo,
};
use crate::reasoner::{prompt, Reasoner, ReasonerError, RelevanceRequest, RequestKind};
use crate::scenario::FURNITURE_ID_BASE;
use crate::validation::{answer_validation_query, infer_trajectory, Likelihood, ValidationEvent, ValidationSession, Verdict};
use crate::world::{Action, ActionRequest, AgentId, Goal, ObjectId, ObjectKind, Observation, ObjectSnapshot, Step};

/// Bound on plan/validate/tick rounds inside a single turn.
const MAX_ROUNDS_PER_TURN: usize = 4;

/// How much an agent talks to its teammates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommMode {
    /// The four message cases, querying only likely interferers.
    #[default]
    Reveca,
    /// Confirm every object-targeted plan with every teammate before acting.
    AlwaysAsk,
    /// Send nothing and never validate.
    NoComm,
}

/// A plan imposed from outside the reasoner, used by scripted collaborators.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScriptedPlan {
    /// Earliest step at which the plan may start.
    pub not_before: Step,
    pub skill: SkillKind,
    pub target: PlanTarget,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum AgentEvent {
    Relevance { object_id: ObjectId, object_name: String, relevance: Relevance },
    Discarded { records: Vec<RecordId>, reason: String },
    Retrieval { top_k: Vec<(ObjectId, Relevance)>, non_none_records: usize, dummy_none_in_top_k: bool },
    PlanChosen { plan: String, fallback: bool, scripted: bool, options: usize },
    Validation { detail: ValidationEvent },
    SkillFinished { plan: String, phase: Phase },
    ParseWarning { sender: AgentId, detail: String },
    Prompt { kind: RequestKind, text: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentTurn {
    pub request: ActionRequest,
    pub events: Vec<AgentEvent>,
}

#[derive(Debug, Clone)]
struct Outgoing {
    payload: Payload,
    recipients: Recipients,
}

pub struct RevecaAgent {
    pub id: AgentId,
    pub name: String,
    config: AgentConfig,
    layout: Arc<Layout>,
    memory: Memory,
    /// Floor with furniture seen so far removed.
    known: Grid,
    explored: BTreeSet<RoomId>,
    last_visit: BTreeMap<RoomId, Step>,
    roster: BTreeMap<AgentId, String>,
    skill: Option<SkillExecution>,
    validation: Option<ValidationSession>,
    outbox: VecDeque<Outgoing>,
    script: VecDeque<ScriptedPlan>,
    idle_after_script: bool,
    started: bool,
    /// Distractor ids, known only to the harness. Feeds the noise-immunity
    /// audit and nothing else.
    audit_dummies: BTreeSet<ObjectId>,
    held_names: BTreeMap<ObjectId, String>,
    /// Queries received this turn, answered after the skill tick so the
    /// reply covers a skill that finished this very turn.
    pending_queries: Vec<(AgentId, Vec<ObjectId>)>,
    comm_mode: CommMode,
}

impl RevecaAgent {
    /// `roster` lists every agent in the team, this one included.
    pub fn new(
        id: AgentId,
        name: &str,
        goal: Goal,
        layout: Arc<Layout>,
        config: AgentConfig,
        roster: &BTreeMap<AgentId, String>,
    ) -> Self {
        let mut memory = Memory::new(id, goal, config.ladder);
        for (other, n) in roster {
            if *other != id {
                memory.ensure_collaborator(*other, n);
            }
        }
        Self {
            id,
            name: name.to_string(),
            known: layout.floor().clone(),
            layout,
            memory,
            config,
            explored: BTreeSet::new(),
            last_visit: BTreeMap::new(),
            roster: roster.clone(),
            skill: None,
            validation: None,
            outbox: VecDeque::new(),
            script: VecDeque::new(),
            idle_after_script: false,
            started: false,
            audit_dummies: BTreeSet::new(),
            held_names: BTreeMap::new(),
            pending_queries: Vec::new(),
            comm_mode: CommMode::Reveca,
        }
    }

    /// Forces the given plans, in order, instead of asking the reasoner. With
    /// `idle_after`, the agent stands still once the script is used up.
    pub fn with_script(mut self, plans: impl IntoIterator<Item = ScriptedPlan>, idle_after: bool) -> Self {
        self.script = plans.into_iter().collect();
        self.idle_after_script = idle_after;
        self
    }

    /// Tells the audit which object ids are distractors. Never used for decisions.
    pub fn set_audit_dummies(&mut self, ids: impl IntoIterator<Item = ObjectId>) {
        self.audit_dummies = ids.into_iter().collect();
    }

    pub fn set_comm_mode(&mut self, mode: CommMode) {
        self.comm_mode = mode;
    }

    pub fn comm_mode(&self) -> CommMode {
        self.comm_mode
    }

    pub fn memory(&self) -> &Memory {
        &self.memory
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn current_skill(&self) -> Option<&SkillExecution> {
        self.skill.as_ref()
    }

    pub fn validation(&self) -> Option<&ValidationSession> {
        self.validation.as_ref()
    }

    pub fn explored_rooms(&self) -> &BTreeSet<RoomId> {
        &self.explored
    }

    fn object_name(&self, id: ObjectId) -> String {
        self.memory
            .records()
            .iter()
            .rev()
            .find(|r| r.object_id == id)
            .map(|r| r.object_name.clone())
            .or_else(|| self.held_names.get(&id).cloned())
            .unwrap_or_else(|| "object".into())
    }

    fn container_hints(&self, snap: &ObjectSnapshot) -> Vec<String> {
        if snap.kind != ObjectKind::Container {
            return Vec::new();
        }
        let idx = snap.object_id.0.checked_sub(FURNITURE_ID_BASE).map(|i| i as usize);
        idx.and_then(|i| self.layout.spec.placements.get(i))
            .filter(|p| p.name == snap.object_name)
            .map(|p| p.affinity.clone())
            .unwrap_or_default()
    }

    fn held_by_me(&self, obs: &Observation) -> Vec<String> {
        obs.held_object_ids.iter().map(|id| self.object_name(*id)).collect()
    }

    /// Units per goal name still to be fetched by someone: remaining minus
    /// what this agent holds and what collaborators are believed to hold.
    fn needed(&self, obs: &Observation) -> BTreeMap<String, u32> {
        let mut held: Vec<String> = self.held_by_me(obs);
        for id in self.memory.held_by_collaborators() {
            held.push(self.object_name(id));
        }
        self.memory
            .goal
            .remaining_all()
            .into_iter()
            .map(|(name, n)| {
                let h = held.iter().filter(|x| **x == name).count() as u32;
                (name, n.saturating_sub(h))
            })
            .collect()
    }

    fn estimate_relevance(
        &self,
        snap: &ObjectSnapshot,
        obs: &Observation,
        reasoner: &mut dyn Reasoner,
        events: &mut Vec<AgentEvent>,
    ) -> Result<Relevance, ReasonerError> {
        if self.config.ablations.no_relevance {
            return Ok(Relevance::Strong);
        }
        let req = RelevanceRequest {
            goal_text: self.memory.goal.goal.text.clone(),
            goal_location: self.memory.goal.goal.location_id,
            remaining: self.needed(obs),
            unfound: self.memory.unfound_names(&self.held_by_me(obs)),
            object: snap.clone(),
            container_hints: self.container_hints(snap),
            ladder: self.config.ladder,
            cot: !self.config.ablations.no_cot,
        };
        if self.config.log_prompts {
            events.push(AgentEvent::Prompt { kind: RequestKind::Relevance, text: prompt::render_relevance(&req) });
        }
        match reasoner.relevance(&req) {
            Ok(r) => Ok(r.value),
            // An unreadable score falls back to the middle of every ladder.
            Err(ReasonerError::ParseFailure { .. }) => Ok(Relevance::Medium),
            Err(e) => Err(e),
        }
    }

    fn store(
        &mut self,
        snap: &ObjectSnapshot,
        obs: &Observation,
        step: Step,
        reasoner: &mut dyn Reasoner,
        events: &mut Vec<AgentEvent>,
    ) -> Result<(), ReasonerError> {
        let relevance = if self.memory.needs_relevance(snap) {
            let r = self.estimate_relevance(snap, obs, reasoner, events)?;
            events.push(AgentEvent::Relevance {
                object_id: snap.object_id,
                object_name: snap.object_name.clone(),
                relevance: r,
            });
            r
        } else {
            Relevance::None
        };
        self.memory.upsert_observation(snap, relevance, step);
        Ok(())
    }

    fn abort_skill_on(&mut self, object: ObjectId) {
        if self.skill.as_ref().is_some_and(|s| s.plan.target.object_id() == Some(object)) {
            self.skill = None;
        }
    }

    fn deliver(
        &mut self,
        inbox: &[Message],
        obs: &Observation,
        reasoner: &mut dyn Reasoner,
        events: &mut Vec<AgentEvent>,
    ) -> Result<(), ReasonerError> {
        let me = self.id;
        for msg in inbox.iter().filter(|m| m.sender != me && m.recipients.includes(me)) {
            for cmd in parse_inbound(msg) {
                match cmd {
                    InboundCommand::Collaborator { sender, update } => {
                        let name = self.roster.get(&sender).cloned().unwrap_or_else(|| format!("agent{}", sender.0));
                        let update: CollaboratorUpdate = update.into();
                        self.memory.update_collaborator_from_message(sender, &name, &update, &self.layout);
                        if msg.kind == MessageKind::InitBroadcast {
                            if let Some(room) = update.room {
                                self.explored.insert(room);
                            }
                        }
                    }
                    InboundCommand::ObserveObjects { objects } => {
                        for snap in &objects {
                            let newer = self.memory.live_record_for(snap.object_id).is_some_and(|r| r.acquired_step >= msg.step);
                            if !newer {
                                self.store(snap, obs, msg.step, reasoner, events)?;
                            }
                        }
                    }
                    InboundCommand::SubGoalDone { object_id, object_name, location_id } => {
                        if location_id == self.memory.goal.goal.location_id {
                            self.memory.goal.delivered.insert(object_id, object_name);
                        }
                        let n = self.memory.discard_object(object_id);
                        if n > 0 {
                            let rec = self.memory.records().iter().rev().find(|r| r.object_id == object_id);
                            events.push(AgentEvent::Discarded {
                                records: rec.map(|r| vec![r.record_id]).unwrap_or_default(),
                                reason: "announced by collaborator".into(),
                            });
                        }
                        if let Some(c) = self.memory.collaborator(msg.sender).cloned() {
                            let rec = self.memory.ensure_collaborator(msg.sender, &c.name);
                            rec.held_object_ids.retain(|h| *h != object_id);
                        }
                        self.abort_skill_on(object_id);
                    }
                    InboundCommand::AnswerQuery { from, object_ids } => self.pending_queries.push((from, object_ids)),
                    InboundCommand::QueryAnswered { from, answer } => {
                        if let Some(v) = self.validation.as_mut() {
                            if v.receive(from, answer) {
                                events.push(AgentEvent::Validation { detail: ValidationEvent::Answer { from, answer } });
                            }
                        }
                    }
                    InboundCommand::ParseWarning { sender, detail } => {
                        events.push(AgentEvent::ParseWarning { sender, detail })
                    }
                }
            }
        }
        Ok(())
    }

    fn absorb_observation(
        &mut self,
        obs: &Observation,
        reasoner: &mut dyn Reasoner,
        events: &mut Vec<AgentEvent>,
    ) -> Result<(), ReasonerError> {
        let step = obs.step;
        self.explored.insert(obs.room_id);
        self.last_visit.insert(obs.room_id, step);
        for o in &obs.visible_objects {
            if o.kind != ObjectKind::Item {
                self.known.set_open(o.position, false);
            }
            if o.holder == Some(self.id) {
                self.held_names.insert(o.object_id, o.object_name.clone());
            }
        }
        let gone = self.memory.discard_absent(obs);
        if !gone.is_empty() {
            events.push(AgentEvent::Discarded { records: gone, reason: "not where it was last seen".into() });
        }
        let goal_loc = self.memory.goal.goal.location_id;
        for snap in &obs.visible_objects {
            if snap.container_id == Some(goal_loc) && self.memory.goal.goal.mentions(&snap.object_name) {
                self.memory.goal.delivered.insert(snap.object_id, snap.object_name.clone());
            }
        }
        for snap in &obs.visible_objects {
            self.store(snap, obs, step, reasoner, events)?;
        }
        for s in &obs.visible_collaborators {
            self.memory.observe_collaborator(s, obs.room_id, step);
        }
        Ok(())
    }

    fn finish_skill(&mut self, exec: SkillExecution, obs: &Observation, events: &mut Vec<AgentEvent>) {
        events.push(AgentEvent::SkillFinished { plan: exec.plan.plan_string(), phase: exec.phase });
        match exec.phase {
            Phase::Done => {
                self.memory.completed_plans.push(exec.plan.plan_string());
                if exec.plan.skill == SkillKind::GoPut {
                    if let (Some(obj), Some(loc)) = (exec.put_object(), exec.plan.target.object_id()) {
                        let name = self.object_name(obj);
                        if loc == self.memory.goal.goal.location_id {
                            self.memory.goal.delivered.insert(obj, name.clone());
                            self.outbox.push_back(Outgoing {
                                payload: Payload::SubGoal(SubGoalPayload {
                                    room: obs.room_id,
                                    object_id: obj,
                                    object_name: name,
                                    location_id: loc,
                                    location_name: exec.plan.target.name().to_string(),
                                }),
                                recipients: Recipients::All,
                            });
                        }
                    }
                }
            }
            Phase::Failed(FailReason::TargetMissing) => {
                let ids = exec.plan.provenance.clone();
                if self.memory.discard_plan_provenance(&exec.plan) > 0 {
                    events.push(AgentEvent::Discarded { records: ids, reason: "target missing".into() });
                }
            }
            _ => {}
        }
    }

    fn collaborator_positions(&self) -> Vec<(String, Option<Cell>)> {
        self.memory.collaborators().map(|c| (c.name.clone(), c.position_estimate.map(|e| e.cell))).collect()
    }

    fn proximity(&self, me: Cell, target: Cell, collabs: &[(String, Option<Cell>)]) -> Proximity {
        if self.config.ablations.no_proximity {
            return Proximity { bucket: ProximityBucket::Unknown, rendered: String::new() };
        }
        relative_proximity(me, target, collabs)
    }

    fn build_plan(
        &mut self,
        obs: &Observation,
        reasoner: &mut dyn Reasoner,
        events: &mut Vec<AgentEvent>,
    ) -> Result<Option<(Plan, bool)>, ReasonerError> {
        if let Some(front) = self.script.front() {
            if front.not_before > obs.step {
                return Ok(None);
            }
            let s = self.script.pop_front().expect("front exists");
            let provenance: Vec<RecordId> = s
                .target
                .object_id()
                .and_then(|o| self.memory.live_record_for(o))
                .map(|r| vec![r.record_id])
                .unwrap_or_default();
            let plan = Plan { skill: s.skill, target: s.target, provenance, rationale: "scripted".into(), created_step: obs.step };
            events.push(AgentEvent::PlanChosen { plan: plan.plan_string(), fallback: false, scripted: true, options: 0 });
            return Ok(Some((plan, true)));
        }
        if self.idle_after_script {
            return Ok(None);
        }
        let me = obs.position;
        let collabs = self.collaborator_positions();
        // Without relevance scores every record ties at Strong; the greedy
        // search only considers records it can still act on.
        let greedy = self.config.ablations.no_relevance;
        let candidates = || self.memory.retrievable().filter(move |r| !greedy || r.available_action.is_some());
        let buckets: BTreeMap<RecordId, ProximityBucket> =
            candidates().map(|r| (r.record_id, self.proximity(me, r.position, &collabs).bucket)).collect();
        let top: Vec<&ObservationRecord> = retrieve_top_k(candidates(), &buckets, self.config.k);
        let non_none = self.memory.retrievable().filter(|r| r.relevance > Relevance::None).count();
        events.push(AgentEvent::Retrieval {
            top_k: top.iter().map(|r| (r.object_id, r.relevance)).collect(),
            non_none_records: non_none,
            dummy_none_in_top_k: top
                .iter()
                .any(|r| r.relevance == Relevance::None && self.audit_dummies.contains(&r.object_id)),
        });
        let top_k: Vec<(&ObservationRecord, Proximity)> =
            top.into_iter().map(|r| (r, self.proximity(me, r.position, &collabs))).collect();
        let goal_loc = self.memory.goal.goal.location_id;
        let goal_record = self.memory.live_record_for(goal_loc);
        let rooms: Vec<RoomInfo> = self
            .layout
            .rooms
            .iter()
            .map(|room| {
                let cells: Vec<Cell> = room.cells.iter().copied().collect();
                let distance = a_star(&self.known, me, &cells)
                    .map(|p| path_len(&p) as f64)
                    .unwrap_or_else(|_| me.euclidean(room.center));
                RoomInfo {
                    room_id: room.room_id,
                    room_name: room.room_name.clone(),
                    explored: self.explored.contains(&room.room_id),
                    last_visit: self.last_visit.get(&room.room_id).copied(),
                    distance,
                    proximity: Some(self.proximity(me, room.center, &collabs)),
                }
            })
            .collect();
        let collaborators: Vec<CollaboratorView> = self
            .memory
            .collaborators()
            .map(|c| CollaboratorView {
                agent_id: c.collaborator_id,
                name: c.name.clone(),
                room: c.position_estimate.map(|e| self.layout.room_name(e.room).to_string()),
                held_object_ids: c.held_object_ids.clone(),
                completed_plans: c.completed_plans.clone(),
            })
            .collect();
        let held: Vec<(ObjectId, String)> = obs.held_object_ids.iter().map(|id| (*id, self.object_name(*id))).collect();
        let held_names: Vec<String> = held.iter().map(|(_, n)| n.clone()).collect();
        let inputs = PlanInputs {
            agent_id: self.id,
            agent_name: &self.name,
            step: obs.step,
            goal_text: &self.memory.goal.goal.text,
            goal_location: goal_loc,
            needed: self.needed(obs),
            unfound: self.memory.unfound_names(&held_names),
            position: me,
            room_id: obs.room_id,
            room_name: self.layout.room_name(obs.room_id),
            held,
            completed_plans: &self.memory.completed_plans,
            top_k,
            goal_record,
            rooms,
            collaborators,
        };
        let ctx = build_plan_context(inputs, &self.config.ablations);
        if self.config.log_prompts {
            events.push(AgentEvent::Prompt { kind: RequestKind::Plan, text: prompt::render_plan(&ctx, None) });
        }
        let Some(outcome) = choose_plan(&ctx, reasoner)? else {
            return Ok(None);
        };
        events.push(AgentEvent::PlanChosen {
            plan: outcome.plan.plan_string(),
            fallback: outcome.fallback,
            scripted: false,
            options: ctx.options.len(),
        });
        Ok(Some((outcome.plan, false)))
    }

    fn target_cell(&self, plan: &Plan) -> Option<Cell> {
        plan.target.object_id().and_then(|o| {
            self.memory
                .live_record_for(o)
                .map(|r| r.position)
                .or_else(|| self.memory.records().iter().rev().find(|r| r.object_id == o).map(|r| r.position))
        })
    }

    fn start_skill(&mut self, plan: Plan, obs: &Observation) {
        let cell = self.target_cell(&plan);
        self.skill = Some(SkillExecution::start(plan, obs.position, cell, &self.layout, &self.known));
    }

    fn open_validation(
        &mut self,
        plan: Plan,
        obs: &Observation,
        reasoner: &mut dyn Reasoner,
        events: &mut Vec<AgentEvent>,
    ) {
        let target_room = plan
            .target
            .object_id()
            .and_then(|o| self.memory.live_record_for(o))
            .map(|r| r.room_id)
            .unwrap_or(obs.room_id);
        let cot = !self.config.ablations.no_cot;
        let collabs: Vec<_> = self.memory.collaborators().cloned().collect();
        let mut hyps = Vec::new();
        for c in &collabs {
            let (h, req) = infer_trajectory(&plan, c, &self.memory, &self.layout, target_room, reasoner, cot);
            if self.config.log_prompts && req.alpha != req.beta {
                events.push(AgentEvent::Prompt { kind: RequestKind::Trajectory, text: prompt::render_trajectory(&req) });
            }
            hyps.push(h);
        }
        if self.comm_mode == CommMode::AlwaysAsk {
            for h in &mut hyps {
                h.interaction_likelihood = h.interaction_likelihood.max(Likelihood::Low);
            }
        }
        let session = ValidationSession::new(plan, hyps);
        events.push(AgentEvent::Validation {
            detail: ValidationEvent::Hypotheses {
                plan: session.plan.plan_string(),
                ranked: session.hypotheses.iter().map(|h| (h.collaborator_id, h.interaction_likelihood)).collect(),
            },
        });
        self.validation = Some(session);
    }

    /// Drives the open validation. Returns the plan once it settles as valid;
    /// a false plan is discarded. `Err(())` means the agent must wait.
    fn drive_validation(&mut self, obs: &Observation, events: &mut Vec<AgentEvent>) -> Result<Option<Plan>, ()> {
        let Some(v) = self.validation.as_mut() else { return Ok(None) };
        if let Some(who) = v.check_timeout(obs.step) {
            events.push(AgentEvent::Validation { detail: ValidationEvent::Timeout { from: who } });
        }
        if v.verdict().is_none() {
            if let Some(q) = v.advance(obs.step) {
                events.push(AgentEvent::Validation { detail: ValidationEvent::Query { to: q.to, object_ids: q.object_ids.clone() } });
                self.outbox.push_back(Outgoing {
                    payload: Payload::Query(QueryPayload { room: obs.room_id, object_ids: q.object_ids }),
                    recipients: Recipients::Agent(q.to),
                });
            }
        }
        let Some(verdict) = v.verdict() else { return Err(()) };
        let session = self.validation.take().expect("checked above");
        events.push(AgentEvent::Validation {
            detail: ValidationEvent::Outcome {
                plan: session.plan.plan_string(),
                verdict,
                queries_sent: session.queries_sent,
            },
        });
        match verdict {
            Verdict::Valid => Ok(Some(session.plan)),
            Verdict::FalsePlan => {
                let ids = session.plan.provenance.clone();
                self.memory.discard_plan_provenance(&session.plan);
                events.push(AgentEvent::Discarded { records: ids, reason: "false plan".into() });
                Ok(None)
            }
        }
    }

    fn needs_validation(&self, plan: &Plan) -> bool {
        if self.memory.collaborators().next().is_none() {
            return false;
        }
        match self.comm_mode {
            CommMode::NoComm => false,
            CommMode::AlwaysAsk => plan.target.object_id().is_some(),
            CommMode::Reveca => !self.config.ablations.no_validation && plan.skill == SkillKind::GoGrab,
        }
    }

    fn choose_action(
        &mut self,
        obs: &Observation,
        reasoner: &mut dyn Reasoner,
        events: &mut Vec<AgentEvent>,
    ) -> Result<Action, ReasonerError> {
        for _ in 0..MAX_ROUNDS_PER_TURN {
            if self.validation.is_some() {
                match self.drive_validation(obs, events) {
                    Err(()) => return Ok(Action::NoOp),
                    Ok(Some(plan)) => self.start_skill(plan, obs),
                    Ok(None) => {}
                }
            }
            if self.skill.is_none() {
                let Some((plan, scripted)) = self.build_plan(obs, reasoner, events)? else {
                    return Ok(Action::NoOp);
                };
                if !scripted && self.needs_validation(&plan) {
                    self.open_validation(plan, obs, reasoner, events);
                    continue;
                }
                self.start_skill(plan, obs);
            }
            let exec = self.skill.as_mut().expect("skill set above");
            if let Some(a) = exec.tick(obs, &self.layout, &self.known) {
                return Ok(a);
            }
            let done = self.skill.take().expect("skill set above");
            self.finish_skill(done, obs, events);
        }
        Ok(Action::NoOp)
    }

    fn share_observation(&self, obs: &Observation) -> Outgoing {
        let mut objects = obs.visible_objects.clone();
        objects.sort_by_key(|o| {
            let rel = self.memory.live_record_for(o.object_id).map(|r| r.relevance).unwrap_or(Relevance::None);
            (std::cmp::Reverse(rel), o.object_id)
        });
        let payload = init_payload_within_budget(InitPayload { room: obs.room_id, position: obs.position, objects });
        Outgoing { payload: Payload::Init(payload), recipients: Recipients::All }
    }

    fn pick_message(&mut self, obs: &Observation, reasoner: &mut dyn Reasoner) -> Option<Message> {
        if self.comm_mode == CommMode::NoComm {
            self.outbox.clear();
            return None;
        }
        let rank = |o: &Outgoing| match o.payload.kind() {
            MessageKind::ValidationResponse => 0,
            MessageKind::ValidationQuery => 1,
            MessageKind::InitBroadcast => 2,
            MessageKind::SubGoalAnnouncement => 3,
        };
        let best = (0..self.outbox.len()).min_by_key(|&i| (rank(&self.outbox[i]), i));
        let out = match best {
            Some(i) => self.outbox.remove(i).expect("index in range"),
            None if self.config.ablations.full_observation => self.share_observation(obs),
            None => return None,
        };
        let names = |id: ObjectId| self.object_name(id);
        let refine: Option<&mut dyn Reasoner> = if self.config.refine_messages { Some(reasoner) } else { None };
        render_message(out.payload, self.id, &self.name, out.recipients, &self.layout, &names, refine).ok()
    }

    /// One decision turn. `inbox` holds the messages delivered this step.
    pub fn act(
        &mut self,
        obs: &Observation,
        inbox: &[Message],
        reasoner: &mut dyn Reasoner,
    ) -> Result<AgentTurn, ReasonerError> {
        let mut events = Vec::new();
        self.deliver(inbox, obs, reasoner, &mut events)?;
        self.absorb_observation(obs, reasoner, &mut events)?;
        if !self.started {
            self.started = true;
            let init = self.share_observation(obs);
            self.outbox.push_front(init);
        }
        let action = self.choose_action(obs, reasoner, &mut events)?;
        for (from, object_ids) in std::mem::take(&mut self.pending_queries) {
            let (answer, history) = answer_validation_query(&object_ids, &self.memory.completed_plans);
            self.outbox.push_back(Outgoing {
                payload: Payload::Response(ResponsePayload { room: obs.room_id, object_ids, answer, history }),
                recipients: Recipients::Agent(from),
            });
        }
        let message = self.pick_message(obs, reasoner);
        Ok(AgentTurn { request: ActionRequest { action, message }, events })
    }

    /// Hypothesis likelihoods of the open validation, for inspection.
    pub fn open_hypotheses(&self) -> Vec<(AgentId, Likelihood)> {
        self.validation
            .as_ref()
            .map(|v| v.hypotheses.iter().map(|h| (h.collaborator_id, h.interaction_likelihood)).collect())
            .unwrap_or_default()
    }

    /// Memory dump plus agent-side bookkeeping.
    pub fn dump(&self) -> serde_json::Value {
        let mut v = self.memory.to_json();
        if let Some(obj) = v.as_object_mut() {
            obj.insert("agent_id".into(), serde_json::json!(self.id));
            obj.insert("explored_rooms".into(), serde_json::json!(self.explored));
            obj.insert(
                "current_plan".into(),
                serde_json::json!(self.skill.as_ref().map(|s| s.plan.plan_string())),
            );
        }
        v
    }
}
