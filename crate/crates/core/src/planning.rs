//! Relative proximity, top-K retrieval, plan context assembly and plan choice.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{Ablations, TopK};
use crate::geometry::Cell;
use crate::map::RoomId;
use crate::memory::{ObservationRecord, RecordId, SkillKind};
use crate::message::plan_string;
use crate::reasoner::{Reasoner, ReasonerError};
use crate::world::{AgentId, ObjectId, Step};

/// Similarity band for proximity comparisons, in metres.
pub const PROXIMITY_EPSILON: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityBucket {
    CloserThanAll,
    FartherThanSome,
    Similar,
    Unknown,
}

impl ProximityBucket {
    /// Retrieval rank, higher first: CloserThanAll > Similar > Unknown > FartherThanSome.
    pub fn rank(self) -> u8 {
        match self {
            ProximityBucket::CloserThanAll => 3,
            ProximityBucket::Similar => 2,
            ProximityBucket::Unknown => 1,
            ProximityBucket::FartherThanSome => 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Proximity {
    pub bucket: ProximityBucket,
    pub rendered: String,
}

fn name_list(names: &[&str]) -> String {
    match names {
        [] => String::new(),
        [one] => one.to_string(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

/// Compares this agent's distance to `object` with each collaborator's
/// last known distance.
pub fn relative_proximity(agent: Cell, object: Cell, collaborators: &[(String, Option<Cell>)]) -> Proximity {
    let d_self = agent.euclidean(object);
    let known: Vec<(&str, f64)> =
        collaborators.iter().filter_map(|(n, p)| p.map(|p| (n.as_str(), p.euclidean(object)))).collect();
    if known.is_empty() {
        return Proximity { bucket: ProximityBucket::Unknown, rendered: "No collaborator position is known".into() };
    }
    if known.iter().all(|(_, d)| d_self <= d - PROXIMITY_EPSILON) {
        let names: Vec<&str> = known.iter().map(|(n, _)| *n).collect();
        return Proximity { bucket: ProximityBucket::CloserThanAll, rendered: format!("I'm closer than {}", name_list(&names)) };
    }
    let nearest = known.iter().map(|(_, d)| *d).fold(f64::INFINITY, f64::min);
    if (d_self - nearest).abs() <= PROXIMITY_EPSILON {
        let names: Vec<&str> =
            known.iter().filter(|(_, d)| (d_self - d).abs() <= PROXIMITY_EPSILON).map(|(n, _)| *n).collect();
        return Proximity { bucket: ProximityBucket::Similar, rendered: format!("I'm about as close as {}", name_list(&names)) };
    }
    let names: Vec<&str> = known.iter().filter(|(_, d)| *d < d_self - PROXIMITY_EPSILON).map(|(n, _)| *n).collect();
    Proximity { bucket: ProximityBucket::FartherThanSome, rendered: format!("I'm farther than {}", name_list(&names)) }
}

/// Total retrieval order: relevance desc, proximity desc, acquired_step desc, object_id asc.
pub fn retrieval_order(
    a: &ObservationRecord,
    pa: ProximityBucket,
    b: &ObservationRecord,
    pb: ProximityBucket,
) -> Ordering {
    b.relevance
        .cmp(&a.relevance)
        .then(pb.rank().cmp(&pa.rank()))
        .then(b.acquired_step.cmp(&a.acquired_step))
        .then(a.object_id.cmp(&b.object_id))
}

/// Algorithm-1 style retrieval. Records without a bucket count as `Unknown`.
/// Discarded records are never returned.
pub fn retrieve_top_k<'a>(
    records: impl IntoIterator<Item = &'a ObservationRecord>,
    proximities: &BTreeMap<RecordId, ProximityBucket>,
    k: TopK,
) -> Vec<&'a ObservationRecord> {
    let bucket = |r: &ObservationRecord| proximities.get(&r.record_id).copied().unwrap_or(ProximityBucket::Unknown);
    let mut pool: Vec<&ObservationRecord> = records.into_iter().filter(|r| !r.discarded).collect();
    let n = k.limit(pool.len());
    let cmp = |a: &&ObservationRecord, b: &&ObservationRecord| retrieval_order(a, bucket(a), b, bucket(b));
    if n == 0 {
        return Vec::new();
    }
    if n < pool.len() {
        pool.select_nth_unstable_by(n - 1, cmp);
        pool.truncate(n);
    }
    pool.sort_unstable_by(cmp);
    pool
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PlanTarget {
    Object { object_id: ObjectId, object_name: String },
    Room { room_id: RoomId, room_name: String },
}

impl PlanTarget {
    pub fn object_id(&self) -> Option<ObjectId> {
        match self {
            PlanTarget::Object { object_id, .. } => Some(*object_id),
            PlanTarget::Room { .. } => None,
        }
    }

    pub fn room_id(&self) -> Option<RoomId> {
        match self {
            PlanTarget::Room { room_id, .. } => Some(*room_id),
            PlanTarget::Object { .. } => None,
        }
    }

    pub fn name(&self) -> &str {
        match self {
            PlanTarget::Object { object_name, .. } => object_name,
            PlanTarget::Room { room_name, .. } => room_name,
        }
    }

    fn id_number(&self) -> u32 {
        match self {
            PlanTarget::Object { object_id, .. } => object_id.0,
            PlanTarget::Room { room_id, .. } => room_id.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub skill: SkillKind,
    pub target: PlanTarget,
    pub provenance: Vec<RecordId>,
    pub rationale: String,
    pub created_step: Step,
}

impl Plan {
    /// `[skill] <name> (id)`.
    pub fn plan_string(&self) -> String {
        plan_string(self.skill.name(), self.target.name(), ObjectId(self.target.id_number()))
    }

    /// Skill parameters match the skill book schema.
    pub fn schema_valid(&self) -> bool {
        matches!(
            (self.skill, &self.target),
            (SkillKind::GoExplore, PlanTarget::Room { .. })
                | (SkillKind::GoCheck | SkillKind::GoGrab | SkillKind::GoPut, PlanTarget::Object { .. })
        )
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.plan_string())
    }
}

/// One retrieved record as shown to the reasoner.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextRecord {
    pub record: ObservationRecord,
    /// Absent under the no-proximity ablation.
    pub proximity: Option<Proximity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomInfo {
    pub room_id: RoomId,
    pub room_name: String,
    pub explored: bool,
    pub last_visit: Option<Step>,
    /// Euclidean distance from this agent to the room centre.
    pub distance: f64,
    pub proximity: Option<Proximity>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaboratorView {
    pub agent_id: AgentId,
    pub name: String,
    pub room: Option<String>,
    pub held_object_ids: Vec<ObjectId>,
    pub completed_plans: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanOption {
    /// 1-based choice token.
    pub index: usize,
    pub skill: SkillKind,
    pub target: PlanTarget,
    pub provenance: Vec<RecordId>,
}

impl PlanOption {
    pub fn label(&self) -> String {
        plan_string(self.skill.name(), self.target.name(), ObjectId(self.target.id_number()))
    }
}

/// Everything the planner may look at for one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanContext {
    pub agent_id: AgentId,
    pub agent_name: String,
    pub step: Step,
    pub goal_text: String,
    pub goal_location: ObjectId,
    /// Units per name still to fetch, net of what this agent holds.
    pub needed: BTreeMap<String, u32>,
    /// Goal names with no usable record yet.
    pub unfound: BTreeSet<String>,
    pub position: Cell,
    pub room_id: RoomId,
    pub room_name: String,
    pub held: Vec<(ObjectId, String)>,
    pub completed_plans: Vec<String>,
    pub records: Vec<ContextRecord>,
    pub rooms: Vec<RoomInfo>,
    /// Empty under the no-other-info ablation.
    pub collaborators: Vec<CollaboratorView>,
    pub options: Vec<PlanOption>,
    pub show_proximity: bool,
    pub show_other_info: bool,
    pub cot: bool,
}

impl PlanContext {
    pub fn option(&self, index: usize) -> Option<&PlanOption> {
        self.options.iter().find(|o| o.index == index)
    }

    pub fn held_by_collaborators(&self) -> BTreeSet<ObjectId> {
        self.collaborators.iter().flat_map(|c| c.held_object_ids.iter().copied()).collect()
    }

    /// Deterministic fallback: the highest-ranked record's available action,
    /// else the nearest unexplored room, else any exploration.
    pub fn rule_choice(&self) -> Option<&PlanOption> {
        if self.held.len() >= crate::world::HAND_CAPACITY {
            if let Some(o) = self.options.iter().find(|o| o.skill == SkillKind::GoPut) {
                return Some(o);
            }
        }
        for r in &self.records {
            let hit = self
                .options
                .iter()
                .find(|o| o.skill != SkillKind::GoExplore && o.target.object_id() == Some(r.record.object_id));
            if hit.is_some() {
                return hit;
            }
        }
        let explore = |unexplored: bool| {
            self.rooms
                .iter()
                .filter(|r| r.explored != unexplored)
                .filter_map(|r| {
                    self.options
                        .iter()
                        .find(|o| o.skill == SkillKind::GoExplore && o.target.room_id() == Some(r.room_id))
                        .map(|o| (r, o))
                })
                .min_by(|(a, _), (b, _)| a.distance.total_cmp(&b.distance).then(a.room_id.cmp(&b.room_id)))
                .map(|(_, o)| o)
        };
        explore(true).or_else(|| explore(false))
    }

    pub fn instantiate(&self, option: &PlanOption, rationale: String) -> Plan {
        Plan {
            skill: option.skill,
            target: option.target.clone(),
            provenance: option.provenance.clone(),
            rationale,
            created_step: self.step,
        }
    }
}

/// Inputs for [`build_plan_context`] gathered by the agent.
#[derive(Debug, Clone)]
pub struct PlanInputs<'a> {
    pub agent_id: AgentId,
    pub agent_name: &'a str,
    pub step: Step,
    pub goal_text: &'a str,
    pub goal_location: ObjectId,
    pub needed: BTreeMap<String, u32>,
    pub unfound: BTreeSet<String>,
    pub position: Cell,
    pub room_id: RoomId,
    pub room_name: &'a str,
    pub held: Vec<(ObjectId, String)>,
    pub completed_plans: &'a [String],
    pub top_k: Vec<(&'a ObservationRecord, Proximity)>,
    /// Record for the goal location if it has been seen.
    pub goal_record: Option<&'a ObservationRecord>,
    pub rooms: Vec<RoomInfo>,
    pub collaborators: Vec<CollaboratorView>,
}

/// Assembles the planning context and enumerates the admissible options.
pub fn build_plan_context(inputs: PlanInputs<'_>, ablations: &Ablations) -> PlanContext {
    let show_proximity = !ablations.no_proximity;
    let records: Vec<ContextRecord> = inputs
        .top_k
        .iter()
        .map(|(r, p)| ContextRecord { record: (*r).clone(), proximity: show_proximity.then(|| p.clone()) })
        .collect();
    let mut options = Vec::new();
    let mut push = |skill: SkillKind, target: PlanTarget, provenance: Vec<RecordId>| {
        if options.iter().any(|o: &PlanOption| o.skill == skill && o.target == target) {
            return;
        }
        options.push(PlanOption { index: options.len() + 1, skill, target, provenance });
    };
    let hands_free = inputs.held.len() < crate::world::HAND_CAPACITY;
    for r in &records {
        let rec = &r.record;
        let target = PlanTarget::Object { object_id: rec.object_id, object_name: rec.object_name.clone() };
        match rec.available_action {
            Some(SkillKind::GoGrab) if hands_free => push(SkillKind::GoGrab, target, vec![rec.record_id]),
            Some(SkillKind::GoCheck) => push(SkillKind::GoCheck, target, vec![rec.record_id]),
            Some(SkillKind::GoPut) if !inputs.held.is_empty() => push(SkillKind::GoPut, target, vec![rec.record_id]),
            _ => {}
        }
    }
    if !inputs.held.is_empty() {
        if let Some(g) = inputs.goal_record {
            push(
                SkillKind::GoPut,
                PlanTarget::Object { object_id: g.object_id, object_name: g.object_name.clone() },
                vec![g.record_id],
            );
        }
    }
    for room in &inputs.rooms {
        if room.room_id != inputs.room_id {
            push(
                SkillKind::GoExplore,
                PlanTarget::Room { room_id: room.room_id, room_name: room.room_name.clone() },
                Vec::new(),
            );
        }
    }
    let rooms = inputs
        .rooms
        .into_iter()
        .map(|mut r| {
            if !show_proximity {
                r.proximity = None;
            }
            r
        })
        .collect();
    PlanContext {
        agent_id: inputs.agent_id,
        agent_name: inputs.agent_name.to_string(),
        step: inputs.step,
        goal_text: inputs.goal_text.to_string(),
        goal_location: inputs.goal_location,
        needed: inputs.needed,
        unfound: inputs.unfound,
        position: inputs.position,
        room_id: inputs.room_id,
        room_name: inputs.room_name.to_string(),
        held: inputs.held,
        completed_plans: inputs.completed_plans.to_vec(),
        records,
        rooms,
        collaborators: if ablations.no_other_info { Vec::new() } else { inputs.collaborators },
        options,
        show_proximity,
        show_other_info: !ablations.no_other_info,
        cot: !ablations.no_cot,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutcome {
    pub plan: Plan,
    /// The reasoner failed twice and the rule-based choice was used.
    pub fallback: bool,
    pub raw_replies: Vec<String>,
}

/// Asks the reasoner for a plan; one repair retry, then the rule-based choice.
/// Returns `Ok(None)` only when the context admits no option at all.
pub fn plan(ctx: &PlanContext, reasoner: &mut dyn Reasoner) -> Result<Option<PlanOutcome>, ReasonerError> {
    if ctx.options.is_empty() {
        return Ok(None);
    }
    let mut raw_replies = Vec::new();
    let mut repair: Option<String> = None;
    for _ in 0..2 {
        match reasoner.plan(ctx, repair.as_deref()) {
            Ok(reply) => {
                raw_replies.push(reply.raw_text.clone());
                match ctx.option(reply.value) {
                    Some(opt) => {
                        return Ok(Some(PlanOutcome { plan: ctx.instantiate(opt, reply.raw_text), fallback: false, raw_replies }));
                    }
                    None => repair = Some(format!("option [{}] is not in the list", reply.value)),
                }
            }
            Err(ReasonerError::ParseFailure { raw, .. }) => {
                raw_replies.push(raw);
                repair = Some("the reply did not contain a bracketed option number".into());
            }
            Err(e) => return Err(e),
        }
    }
    let opt = ctx.rule_choice().expect("nonempty options");
    Ok(Some(PlanOutcome { plan: ctx.instantiate(opt, "rule-based fallback".into()), fallback: true, raw_replies }))
}
