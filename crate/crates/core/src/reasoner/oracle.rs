//! Deterministic rule-based reasoner.
//!
//! Relevance rubric, first match wins:
//! 1. the goal location, or an item whose name still has units to deliver and
//!    which is neither at the goal location nor in someone's hands: Strong;
//! 2. a closed container while some goal name is unlocated: Medium, raised to
//!    High on the five-level ladder when the container usually holds one of
//!    the unlocated names;
//! 3. any other household item: Low (None on the three-level ladder);
//! 4. everything else (unknown items, open containers, surfaces, decor): None.
//!
//! Plan rubric: see [`OracleReasoner::choose`].

use std::collections::BTreeSet;

use super::{Reasoner, ReasonerError, RefineRequest, RelevanceRequest, Reply, TrajectoryRequest};
use crate::memory::{Ladder, Relevance, SkillKind};
use crate::planning::{PlanContext, PlanOption, ProximityBucket};
use crate::scenario::household_vocabulary;
use crate::validation::{evidence_rubric, Likelihood};
use crate::world::{ObjectKind, HAND_CAPACITY};

#[derive(Debug, Clone)]
pub struct OracleReasoner {
    vocabulary: BTreeSet<String>,
}

impl Default for OracleReasoner {
    fn default() -> Self {
        Self { vocabulary: household_vocabulary() }
    }
}

impl OracleReasoner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn judge_relevance(&self, req: &RelevanceRequest) -> Relevance {
        let o = &req.object;
        let level = if o.object_id == req.goal_location {
            Relevance::Strong
        } else {
            match o.kind {
                ObjectKind::Item => {
                    let wanted = req.remaining.get(&o.object_name).copied().unwrap_or(0) > 0;
                    let free = o.holder.is_none() && o.container_id != Some(req.goal_location);
                    if wanted && free {
                        Relevance::Strong
                    } else if self.vocabulary.contains(&o.object_name) {
                        Relevance::Low
                    } else {
                        Relevance::None
                    }
                }
                ObjectKind::Container if o.states.iter().any(|s| s == "CLOSED") && !req.unfound.is_empty() => {
                    let hinted = req.container_hints.iter().any(|h| req.unfound.contains(h));
                    if hinted && req.ladder == Ladder::R5 {
                        Relevance::High
                    } else {
                        Relevance::Medium
                    }
                }
                _ => Relevance::None,
            }
        };
        clamp_to_ladder(level, req.ladder)
    }

    /// Plan rubric:
    /// 1. both hands full: put;
    /// 2. otherwise walk the retrieved records in rank order and take the first
    ///    useful one (a grab of a still-needed item nobody else is known to
    ///    hold, or a check while names are unlocated). With proximity shown,
    ///    records a collaborator is closer to are deferred while unexplored
    ///    rooms remain;
    /// 3. holding something and the pick is not a grab: put instead;
    /// 4. nothing useful: put if holding, else explore the nearest unexplored
    ///    room (skipping rooms a collaborator is closer to when proximity is
    ///    shown), else a deferred record, else the least recently visited room.
    pub fn choose<'a>(&self, ctx: &'a PlanContext) -> Option<&'a PlanOption> {
        let put = ctx.options.iter().find(|o| o.skill == SkillKind::GoPut);
        if ctx.held.len() >= HAND_CAPACITY {
            if let Some(p) = put {
                return Some(p);
            }
            return self.explore(ctx, None);
        }
        let others = ctx.held_by_collaborators();
        let any_unexplored = ctx.rooms.iter().any(|r| !r.explored && r.room_id != ctx.room_id);
        let mut deferred = None;
        for r in &ctx.records {
            let rec = &r.record;
            let Some(opt) = ctx.options.iter().find(|o| {
                o.skill != SkillKind::GoExplore && o.skill != SkillKind::GoPut && o.target.object_id() == Some(rec.object_id)
            }) else {
                continue;
            };
            let useful = match opt.skill {
                SkillKind::GoGrab => {
                    ctx.needed.get(&rec.object_name).copied().unwrap_or(0) > 0 && !others.contains(&rec.object_id)
                }
                SkillKind::GoCheck => !ctx.unfound.is_empty(),
                _ => false,
            };
            if !useful {
                continue;
            }
            let contested = r.proximity.as_ref().is_some_and(|p| p.bucket == ProximityBucket::FartherThanSome);
            if ctx.show_proximity && contested && any_unexplored {
                deferred.get_or_insert(opt);
                continue;
            }
            if !ctx.held.is_empty() && opt.skill != SkillKind::GoGrab {
                if let Some(p) = put {
                    return Some(p);
                }
            }
            return Some(opt);
        }
        if !ctx.held.is_empty() {
            if let Some(p) = put {
                return Some(p);
            }
        }
        self.explore(ctx, deferred)
    }

    fn explore<'a>(&self, ctx: &'a PlanContext, deferred: Option<&'a PlanOption>) -> Option<&'a PlanOption> {
        let explore_opt = |room: crate::map::RoomId| {
            ctx.options.iter().find(|o| o.skill == SkillKind::GoExplore && o.target.room_id() == Some(room))
        };
        let mut unexplored: Vec<_> = ctx.rooms.iter().filter(|r| !r.explored && r.room_id != ctx.room_id).collect();
        unexplored.sort_by(|a, b| a.distance.total_cmp(&b.distance).then(a.room_id.cmp(&b.room_id)));
        if ctx.show_proximity {
            let uncontested = unexplored
                .iter()
                .find(|r| r.proximity.as_ref().is_none_or(|p| p.bucket != ProximityBucket::FartherThanSome));
            if let Some(o) = uncontested.and_then(|r| explore_opt(r.room_id)) {
                return Some(o);
            }
        }
        if let Some(o) = unexplored.first().and_then(|r| explore_opt(r.room_id)) {
            return Some(o);
        }
        if deferred.is_some() {
            return deferred;
        }
        let mut visited: Vec<_> = ctx.rooms.iter().filter(|r| r.room_id != ctx.room_id).collect();
        visited.sort_by(|a, b| {
            a.last_visit
                .unwrap_or(0)
                .cmp(&b.last_visit.unwrap_or(0))
                .then(a.distance.total_cmp(&b.distance))
                .then(a.room_id.cmp(&b.room_id))
        });
        visited.first().and_then(|r| explore_opt(r.room_id)).or_else(|| ctx.rule_choice())
    }
}

fn clamp_to_ladder(level: Relevance, ladder: Ladder) -> Relevance {
    if ladder.contains(level) {
        return level;
    }
    match (level, ladder) {
        (Relevance::High, _) => Relevance::Medium,
        (Relevance::Low, Ladder::R3) => Relevance::None,
        _ => level,
    }
}

impl Reasoner for OracleReasoner {
    fn backend(&self) -> &'static str {
        "oracle"
    }

    fn relevance(&mut self, req: &RelevanceRequest) -> Result<Reply<Relevance>, ReasonerError> {
        let r = self.judge_relevance(req);
        Ok(Reply::instant(r, format!("Answer: [{}]", r.label())))
    }

    fn plan(&mut self, ctx: &PlanContext, _repair: Option<&str>) -> Result<Reply<usize>, ReasonerError> {
        let opt = self.choose(ctx).or_else(|| ctx.options.first());
        match opt {
            Some(o) => Ok(Reply::instant(o.index, format!("{} Answer: [{}]", o.label(), o.index))),
            None => Err(ReasonerError::ParseFailure { kind: super::RequestKind::Plan, raw: "no options".into() }),
        }
    }

    fn trajectory(&mut self, req: &TrajectoryRequest) -> Result<Reply<Likelihood>, ReasonerError> {
        let l = evidence_rubric(req);
        Ok(Reply::instant(l, format!("Answer: [{}]", l.label())))
    }

    fn refine(&mut self, req: &RefineRequest) -> Result<Reply<String>, ReasonerError> {
        Ok(Reply::instant(req.draft.clone(), req.draft.clone()))
    }
}
