//! Trajectory inference over [α, β], interaction-likelihood ranking and the
//! query/confirm/deny protocol.

use std::collections::{BTreeSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::geometry::Cell;
use crate::map::{Layout, RoomId};
use crate::memory::{CollaboratorRecord, Memory};
use crate::message::Answer;
use crate::planning::Plan;
use crate::reasoner::{EvidencePoint, Reasoner, TrajectoryRequest};
use crate::world::{AgentId, ObjectId, Step};

/// Steps to wait for an answer before counting it as a denial.
pub const QUERY_TIMEOUT: Step = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Likelihood {
    None,
    Low,
    Medium,
    High,
}

impl Likelihood {
    pub fn label(self) -> &'static str {
        match self {
            Likelihood::None => "None",
            Likelihood::Low => "Low",
            Likelihood::Medium => "Medium",
            Likelihood::High => "High",
        }
    }
}

impl fmt::Display for Likelihood {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Likelihood {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "none" => Ok(Likelihood::None),
            "low" => Ok(Likelihood::Low),
            "medium" => Ok(Likelihood::Medium),
            "high" => Ok(Likelihood::High),
            other => Err(format!("unknown likelihood `{other}`")),
        }
    }
}

/// A stretch of the window attributed to one room (`None` when unknown).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoomSpan {
    pub from: Step,
    pub to: Step,
    pub room: Option<RoomId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrajectoryHypothesis {
    pub collaborator_id: AgentId,
    pub alpha: Step,
    pub beta: Step,
    pub inferred_rooms: Vec<RoomSpan>,
    pub interaction_likelihood: Likelihood,
    pub rationale_text: String,
    /// The reasoner failed; likelihood was forced to None.
    pub inference_failed: bool,
    /// Ranking key: step of the collaborator's latest message.
    pub last_conversation: Option<Step>,
    pub discarded: bool,
}

/// α for a plan: the earliest acquisition step among its provenance records.
pub fn plan_alpha(plan: &Plan, memory: &Memory) -> Step {
    plan.provenance
        .iter()
        .filter_map(|id| memory.record(*id))
        .map(|r| r.acquired_step)
        .min()
        .unwrap_or(plan.created_step)
        .min(plan.created_step)
}

/// Multi-source BFS distances over the static floor from every cell of `room`.
fn distances_to_room(layout: &Layout, room: RoomId) -> Vec<Option<u32>> {
    let floor = layout.floor();
    let w = layout.width();
    let idx = |c: Cell| (c.y * w + c.x) as usize;
    let mut dist = vec![None; (layout.width() * layout.height()) as usize];
    let mut queue = VecDeque::new();
    if let Some(r) = layout.room(room) {
        for &c in &r.cells {
            dist[idx(c)] = Some(0);
            queue.push_back(c);
        }
    }
    while let Some(c) = queue.pop_front() {
        let d = dist[idx(c)].expect("queued cells have a distance");
        for n in c.neighbors() {
            if floor.is_open(n) && dist[idx(n)].is_none() {
                dist[idx(n)] = Some(d + 1);
                queue.push_back(n);
            }
        }
    }
    dist
}

/// Collects evidence in the window plus the latest point before it and
/// decides whether the target room was reachable in time.
pub fn build_trajectory_request(
    plan: &Plan,
    collaborator: &CollaboratorRecord,
    memory: &Memory,
    layout: &Layout,
    target_room: RoomId,
    cot: bool,
) -> TrajectoryRequest {
    let alpha = plan_alpha(plan, memory);
    let beta = plan.created_step;
    let target = plan.target.object_id().unwrap_or(ObjectId(0));
    let mut points: Vec<EvidencePoint> = Vec::new();
    let mut cells: Vec<Option<Cell>> = Vec::new();
    let before = collaborator.evidence.iter().filter(|e| e.step < alpha).max_by_key(|e| e.step);
    for e in before.into_iter().chain(collaborator.evidence.iter().filter(|e| e.step >= alpha && e.step <= beta)) {
        points.push(EvidencePoint {
            step: e.step,
            room: e.room,
            room_name: layout.room_name(e.room).to_string(),
            observed: e.observed,
            in_window: e.step >= alpha,
        });
        cells.push(e.cell);
    }

    let dist = distances_to_room(layout, target_room);
    let w = layout.width();
    let lower_bound = |p: &EvidencePoint, cell: Option<Cell>| -> Option<u32> {
        match cell {
            Some(c) => dist[(c.y * w + c.x) as usize],
            None => layout.room(p.room)?.cells.iter().filter_map(|c| dist[(c.y * w + c.x) as usize]).min(),
        }
    };
    let bounds: Vec<(Step, Option<u32>)> = points.iter().zip(&cells).map(|(p, c)| (p.step, lower_bound(p, *c))).collect();
    let reachable = (alpha..=beta).any(|t| {
        bounds.iter().all(|(s, d)| match d {
            Some(d) => t.abs_diff(*s) >= *d,
            None => false,
        })
    });

    let conversation = collaborator
        .conversation_log
        .iter()
        .filter(|l| l.step >= alpha && l.step <= beta)
        .cloned()
        .collect();
    TrajectoryRequest {
        collaborator_id: collaborator.collaborator_id,
        collaborator_name: collaborator.name.clone(),
        target_object: target,
        target_name: plan.target.name().to_string(),
        target_room,
        target_room_name: layout.room_name(target_room).to_string(),
        adjacent_rooms: layout.adjacent_rooms(target_room),
        alpha,
        beta,
        evidence: points,
        reachable,
        observed_holding_target: collaborator.held_object_ids.contains(&target),
        plans_mention_target: mentions_object(&collaborator.completed_plans, target),
        conversation,
        cot,
    }
}

/// Likelihood rubric shared by the oracle reasoner:
/// empty window → None; seen holding the target or reported handling it →
/// High; target room unreachable in time → None; evidence in the target room
/// → High; in an adjacent room → Medium; any evidence inside the window → Low;
/// otherwise None.
pub fn evidence_rubric(req: &TrajectoryRequest) -> Likelihood {
    if req.alpha == req.beta {
        return Likelihood::None;
    }
    if req.observed_holding_target || req.plans_mention_target {
        return Likelihood::High;
    }
    if !req.reachable {
        return Likelihood::None;
    }
    if req.evidence.iter().any(|e| e.room == req.target_room) {
        Likelihood::High
    } else if req.evidence.iter().any(|e| req.adjacent_rooms.contains(&e.room)) {
        Likelihood::Medium
    } else if req.evidence.iter().any(|e| e.in_window) {
        Likelihood::Low
    } else {
        Likelihood::None
    }
}

fn tile_window(req: &TrajectoryRequest) -> Vec<RoomSpan> {
    let mut spans = Vec::new();
    let mut current = req.evidence.iter().find(|e| !e.in_window).map(|e| e.room);
    let mut from = req.alpha;
    for e in req.evidence.iter().filter(|e| e.in_window) {
        if e.step > from && Some(e.room) != current {
            spans.push(RoomSpan { from, to: e.step - 1, room: current });
            from = e.step;
        }
        current = Some(e.room);
    }
    spans.push(RoomSpan { from, to: req.beta, room: current });
    spans
}

/// Builds one collaborator's hypothesis. Reasoner failure fails open to None.
pub fn infer_trajectory(
    plan: &Plan,
    collaborator: &CollaboratorRecord,
    memory: &Memory,
    layout: &Layout,
    target_room: RoomId,
    reasoner: &mut dyn Reasoner,
    cot: bool,
) -> (TrajectoryHypothesis, TrajectoryRequest) {
    let req = build_trajectory_request(plan, collaborator, memory, layout, target_room, cot);
    let (likelihood, rationale, failed) = if req.alpha == req.beta {
        (Likelihood::None, "empty window".to_string(), false)
    } else {
        match reasoner.trajectory(&req) {
            Ok(r) => (r.value, r.raw_text, false),
            Err(e) => (Likelihood::None, e.to_string(), true),
        }
    };
    let hyp = TrajectoryHypothesis {
        collaborator_id: collaborator.collaborator_id,
        alpha: req.alpha,
        beta: req.beta,
        inferred_rooms: tile_window(&req),
        interaction_likelihood: likelihood,
        rationale_text: rationale,
        inference_failed: failed,
        last_conversation: collaborator.last_conversation_step(),
        discarded: false,
    };
    (hyp, req)
}

/// Likelihood desc, then most recent conversation first, then agent id asc.
pub fn rank_hypotheses(hyps: &mut [TrajectoryHypothesis]) {
    hyps.sort_by(|a, b| {
        b.interaction_likelihood
            .cmp(&a.interaction_likelihood)
            .then(b.last_conversation.cmp(&a.last_conversation))
            .then(a.collaborator_id.cmp(&b.collaborator_id))
    });
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "index", rename_all = "snake_case")]
pub enum ValidationState {
    Ranking,
    Querying(usize),
    Confirmed,
    AllDenied,
    NoCandidates,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Valid,
    FalsePlan,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryRequest {
    pub to: AgentId,
    pub object_ids: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum ValidationEvent {
    Hypotheses { plan: String, ranked: Vec<(AgentId, Likelihood)> },
    Query { to: AgentId, object_ids: Vec<ObjectId> },
    Answer { from: AgentId, answer: Answer },
    Timeout { from: AgentId },
    Outcome { plan: String, verdict: Verdict, queries_sent: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationSession {
    pub plan: Plan,
    pub hypotheses: Vec<TrajectoryHypothesis>,
    pub state: ValidationState,
    pub queries_sent: usize,
    pub query_sent_at: Option<Step>,
}

impl ValidationSession {
    pub fn new(plan: Plan, mut hypotheses: Vec<TrajectoryHypothesis>) -> Self {
        rank_hypotheses(&mut hypotheses);
        Self { plan, hypotheses, state: ValidationState::Ranking, queries_sent: 0, query_sent_at: None }
    }

    pub fn verdict(&self) -> Option<Verdict> {
        match self.state {
            ValidationState::Confirmed => Some(Verdict::FalsePlan),
            ValidationState::AllDenied | ValidationState::NoCandidates => Some(Verdict::Valid),
            _ => None,
        }
    }

    pub fn awaiting(&self) -> Option<AgentId> {
        match self.state {
            ValidationState::Querying(i) => Some(self.hypotheses[i].collaborator_id),
            _ => None,
        }
    }

    /// From `Ranking`, moves to the next candidate with likelihood above None
    /// and returns the query to send, or settles the session.
    pub fn advance(&mut self, now: Step) -> Option<QueryRequest> {
        if self.state != ValidationState::Ranking {
            return None;
        }
        let next = self
            .hypotheses
            .iter()
            .position(|h| !h.discarded && h.interaction_likelihood > Likelihood::None);
        match next {
            Some(i) => {
                self.state = ValidationState::Querying(i);
                self.queries_sent += 1;
                self.query_sent_at = Some(now);
                Some(QueryRequest {
                    to: self.hypotheses[i].collaborator_id,
                    object_ids: self.plan.target.object_id().into_iter().collect(),
                })
            }
            None => {
                self.state =
                    if self.queries_sent == 0 { ValidationState::NoCandidates } else { ValidationState::AllDenied };
                None
            }
        }
    }

    /// Applies an answer from the collaborator currently queried. Answers from
    /// anyone else are ignored. Returns whether it was consumed.
    pub fn receive(&mut self, from: AgentId, answer: Answer) -> bool {
        let ValidationState::Querying(i) = self.state else { return false };
        if self.hypotheses[i].collaborator_id != from {
            return false;
        }
        match answer {
            Answer::Confirm => self.state = ValidationState::Confirmed,
            Answer::Deny => {
                self.hypotheses[i].discarded = true;
                self.state = ValidationState::Ranking;
            }
        }
        self.query_sent_at = None;
        true
    }

    /// Counts an overdue answer as a denial. Returns the silent collaborator.
    pub fn check_timeout(&mut self, now: Step) -> Option<AgentId> {
        let ValidationState::Querying(i) = self.state else { return None };
        let sent = self.query_sent_at?;
        if now.saturating_sub(sent) < QUERY_TIMEOUT {
            return None;
        }
        let who = self.hypotheses[i].collaborator_id;
        self.receive(who, Answer::Deny);
        Some(who)
    }
}

/// Runs a session to completion with an answer oracle (`None` = no reply).
/// Synchronous form of the protocol; agents drive the same state machine
/// across steps.
pub fn run_validation(
    session: &mut ValidationSession,
    mut answer: impl FnMut(&QueryRequest) -> Option<Answer>,
) -> Verdict {
    let mut now = session.plan.created_step;
    loop {
        if let Some(v) = session.verdict() {
            return v;
        }
        match session.advance(now) {
            Some(q) => match answer(&q) {
                Some(a) => {
                    session.receive(q.to, a);
                }
                None => {
                    now += QUERY_TIMEOUT;
                    session.check_timeout(now);
                }
            },
            None => continue,
        }
    }
}

fn plan_object_id(plan: &str) -> Option<(&str, ObjectId)> {
    let skill = plan.strip_prefix('[')?.split(']').next()?;
    let open = plan.rfind('(')?;
    let close = plan.rfind(')')?;
    let id = plan.get(open + 1..close)?.trim().parse().ok()?;
    Some((skill, ObjectId(id)))
}

/// Whether any gograb/goput plan string names `object`.
pub fn mentions_object(plans: &[String], object: ObjectId) -> bool {
    plans
        .iter()
        .filter_map(|p| plan_object_id(p))
        .any(|(skill, id)| id == object && (skill == "gograb" || skill == "goput"))
}

/// Truthful reply to a validation query, with the supporting history.
pub fn answer_validation_query(object_ids: &[ObjectId], completed_plans: &[String]) -> (Answer, Vec<String>) {
    let ids: BTreeSet<ObjectId> = object_ids.iter().copied().collect();
    let history: Vec<String> = completed_plans
        .iter()
        .filter(|p| {
            plan_object_id(p).is_some_and(|(skill, id)| ids.contains(&id) && (skill == "gograb" || skill == "goput"))
        })
        .cloned()
        .collect();
    let answer = if history.is_empty() { Answer::Deny } else { Answer::Confirm };
    (answer, history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::memory::{CollaboratorUpdate, Ladder, Relevance, SkillKind};
    use crate::planning::PlanTarget;
    use crate::reasoner::OracleReasoner;
    use crate::world::{Goal, GoalRelation, ObjectKind, ObjectSnapshot, SubGoal};

    fn hyp(id: u32, l: Likelihood, conv: Option<Step>) -> TrajectoryHypothesis {
        TrajectoryHypothesis {
            collaborator_id: AgentId(id),
            alpha: 1,
            beta: 5,
            inferred_rooms: vec![],
            interaction_likelihood: l,
            rationale_text: String::new(),
            inference_failed: false,
            last_conversation: conv,
            discarded: false,
        }
    }

    fn cupcake_plan(step: Step) -> Plan {
        Plan {
            skill: SkillKind::GoGrab,
            target: PlanTarget::Object { object_id: ObjectId(368), object_name: "cupcake".into() },
            provenance: vec![],
            rationale: String::new(),
            created_step: step,
        }
    }

    #[test]
    fn answers_follow_history() {
        let plans = vec!["[gograb] <cupcake> (368)".to_string(), "[goput] <coffeetable> (268)".to_string()];
        assert_eq!(answer_validation_query(&[ObjectId(368)], &plans).0, Answer::Confirm);
        assert_eq!(answer_validation_query(&[ObjectId(368)], &[]).0, Answer::Deny);
        assert_eq!(answer_validation_query(&[ObjectId(999)], &plans).0, Answer::Deny);
        assert_eq!(answer_validation_query(&[ObjectId(368)], &["[goexplore] <kitchen> (368)".into()]).0, Answer::Deny);
    }

    #[test]
    fn single_confirm_is_false_plan() {
        let mut s = ValidationSession::new(cupcake_plan(24), vec![hyp(2, Likelihood::High, Some(20))]);
        assert_eq!(run_validation(&mut s, |_| Some(Answer::Confirm)), Verdict::FalsePlan);
        assert_eq!(s.queries_sent, 1);
    }

    #[test]
    fn all_none_is_valid_without_queries() {
        let mut s = ValidationSession::new(cupcake_plan(24), vec![hyp(2, Likelihood::None, None), hyp(3, Likelihood::None, None)]);
        assert_eq!(run_validation(&mut s, |_| panic!("no query expected")), Verdict::Valid);
        assert_eq!(s.queries_sent, 0);
        assert_eq!(s.state, ValidationState::NoCandidates);
    }

    #[test]
    fn deny_then_confirm() {
        let mut s = ValidationSession::new(
            cupcake_plan(24),
            vec![hyp(3, Likelihood::Medium, None), hyp(2, Likelihood::High, Some(20))],
        );
        let mut asked = Vec::new();
        let v = run_validation(&mut s, |q| {
            asked.push(q.to);
            Some(if q.to == AgentId(2) { Answer::Deny } else { Answer::Confirm })
        });
        assert_eq!(v, Verdict::FalsePlan);
        assert_eq!(asked, vec![AgentId(2), AgentId(3)]);
        assert_eq!(s.queries_sent, 2);
        assert!(s.hypotheses[0].discarded);
    }

    #[test]
    fn ties_prefer_recent_conversation_then_low_id() {
        let mut h = vec![
            hyp(4, Likelihood::High, Some(3)),
            hyp(3, Likelihood::High, Some(9)),
            hyp(2, Likelihood::High, Some(3)),
        ];
        rank_hypotheses(&mut h);
        let order: Vec<u32> = h.iter().map(|h| h.collaborator_id.0).collect();
        assert_eq!(order, vec![3, 2, 4]);
    }

    #[test]
    fn silence_times_out_as_deny() {
        let mut s = ValidationSession::new(cupcake_plan(10), vec![hyp(2, Likelihood::Low, None)]);
        assert!(s.advance(10).is_some());
        assert_eq!(s.check_timeout(12), None);
        assert_eq!(s.check_timeout(13), Some(AgentId(2)));
        assert!(s.advance(13).is_none());
        assert_eq!(s.verdict(), Some(Verdict::Valid));
    }

    fn memory_with_cupcake(acquired: Step) -> (Memory, crate::memory::RecordId) {
        let goal = Goal::new(
            vec![SubGoal { object_name: "cupcake".into(), count: 1, location_id: ObjectId(268) }],
            ObjectId(268),
            "coffeetable",
            GoalRelation::On,
        );
        let layout = Layout::house();
        let kitchen = layout.room_by_name("kitchen").unwrap();
        let mut m = Memory::new(AgentId(1), goal, Ladder::R4);
        let snap = ObjectSnapshot {
            object_id: ObjectId(368),
            object_name: "cupcake".into(),
            kind: ObjectKind::Item,
            position: Cell::new(2, 4),
            room_id: kitchen.room_id,
            room_name: "kitchen".into(),
            states: vec!["GRABBABLE".into()],
            container_id: None,
            holder: None,
        };
        let id = m.upsert_observation(&snap, Relevance::Strong, acquired);
        (m, id)
    }

    #[test]
    fn bob_in_kitchen_is_high() {
        let layout = Layout::house();
        let kitchen = layout.room_by_name("kitchen").unwrap().room_id;
        let (mut m, rid) = memory_with_cupcake(5);
        let upd = CollaboratorUpdate { text: "I am searching the kitchen".into(), said_at: 20, room: Some(kitchen), plans: vec![] };
        m.update_collaborator_from_message(AgentId(2), "Bob", &upd, &layout);
        let mut plan = cupcake_plan(24);
        plan.provenance = vec![rid];
        let bob = m.collaborator(AgentId(2)).unwrap().clone();
        let (h, req) = infer_trajectory(&plan, &bob, &m, &layout, kitchen, &mut OracleReasoner::new(), true);
        assert_eq!((req.alpha, req.beta), (5, 24));
        assert_eq!(h.interaction_likelihood, Likelihood::High);
        assert_eq!(h.inferred_rooms.first().unwrap().from, 5);
        assert_eq!(h.inferred_rooms.last().unwrap().to, 24);
    }

    #[test]
    fn empty_window_is_none() {
        let layout = Layout::house();
        let kitchen = layout.room_by_name("kitchen").unwrap().room_id;
        let (mut m, rid) = memory_with_cupcake(24);
        let upd = CollaboratorUpdate { text: "kitchen".into(), said_at: 20, room: Some(kitchen), plans: vec![] };
        m.update_collaborator_from_message(AgentId(2), "Bob", &upd, &layout);
        let mut plan = cupcake_plan(24);
        plan.provenance = vec![rid];
        let bob = m.collaborator(AgentId(2)).unwrap().clone();
        let (h, _) = infer_trajectory(&plan, &bob, &m, &layout, kitchen, &mut OracleReasoner::new(), true);
        assert_eq!(h.interaction_likelihood, Likelihood::None);
    }

    #[test]
    fn too_far_in_too_short_a_window_is_none() {
        let layout = Layout::house();
        let kitchen = layout.room_by_name("kitchen").unwrap().room_id;
        let bathroom = layout.room_by_name("bathroom").unwrap().room_id;
        let (mut m, rid) = memory_with_cupcake(20);
        let upd = CollaboratorUpdate { text: "bathroom".into(), said_at: 21, room: Some(bathroom), plans: vec![] };
        m.update_collaborator_from_message(AgentId(2), "Bob", &upd, &layout);
        let mut plan = cupcake_plan(22);
        plan.provenance = vec![rid];
        let bob = m.collaborator(AgentId(2)).unwrap().clone();
        let (h, req) = infer_trajectory(&plan, &bob, &m, &layout, kitchen, &mut OracleReasoner::new(), true);
        assert!(!req.reachable);
        assert_eq!(h.interaction_likelihood, Likelihood::None);
    }
}
