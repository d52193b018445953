//! The four skills, compiled into one primitive action per step.

use serde::{Deserialize, Serialize};

use super::astar::a_star;
use crate::geometry::Cell;
use crate::map::{Grid, Layout};
use crate::memory::SkillKind;
use crate::planning::{Plan, PlanTarget};
use crate::world::{Action, ObjectId, Observation, HAND_CAPACITY};

/// Interaction attempts before a skill gives up on a rejected primitive.
const MAX_INTERACT_ATTEMPTS: u32 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailReason {
    TargetMissing,
    PathBlocked,
    NoPath,
    NothingHeld,
    HandsFull,
    Rejected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", content = "reason", rename_all = "snake_case")]
pub enum Phase {
    Navigating,
    Interacting,
    Done,
    Failed(FailReason),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkillExecution {
    pub plan: Plan,
    pub path: Vec<Cell>,
    pub cursor: usize,
    pub phase: Phase,
    /// Last known cell of the target object.
    pub target_cell: Option<Cell>,
    pub repairs: u32,
    attempts: u32,
    /// Object handed over by an issued put, checked on the next tick.
    put_object: Option<ObjectId>,
}

/// Cells from which an agent can act on an object at `target`.
pub fn reach_region(layout: &Layout, known: &Grid, target: Cell) -> Vec<Cell> {
    let room = layout.room_of(target);
    std::iter::once(target)
        .chain(target.neighbors())
        .filter(|c| known.is_open(*c) && layout.room_of(*c) == room && room.is_some())
        .collect()
}

fn region_for(plan: &Plan, layout: &Layout, known: &Grid, target_cell: Option<Cell>) -> Vec<Cell> {
    match &plan.target {
        PlanTarget::Room { room_id, .. } => layout
            .room(*room_id)
            .map(|r| r.cells.iter().copied().filter(|c| known.is_open(*c)).collect())
            .unwrap_or_default(),
        PlanTarget::Object { .. } => target_cell.map(|t| reach_region(layout, known, t)).unwrap_or_default(),
    }
}

impl SkillExecution {
    /// Starts a skill from the agent's current cell. `target_cell` is the
    /// remembered position of the target object (unused for exploration).
    pub fn start(plan: Plan, from: Cell, target_cell: Option<Cell>, layout: &Layout, known: &Grid) -> Self {
        let mut exec = Self {
            plan,
            path: vec![from],
            cursor: 0,
            phase: Phase::Navigating,
            target_cell,
            repairs: 0,
            attempts: 0,
            put_object: None,
        };
        let region = region_for(&exec.plan, layout, known, target_cell);
        match a_star(known, from, &region) {
            Ok(p) => exec.path = p,
            Err(_) => exec.phase = Phase::Failed(FailReason::NoPath),
        }
        exec
    }

    pub fn is_finished(&self) -> bool {
        matches!(self.phase, Phase::Done | Phase::Failed(_))
    }

    /// Item handed over by the last put primitive.
    pub fn put_object(&self) -> Option<ObjectId> {
        self.put_object
    }

    fn target_object(&self) -> Option<ObjectId> {
        self.plan.target.object_id()
    }

    fn replan_path(&mut self, from: Cell, layout: &Layout, known: &Grid, count_repair: bool) -> bool {
        if count_repair {
            self.repairs += 1;
            if self.repairs > 1 {
                self.phase = Phase::Failed(FailReason::PathBlocked);
                return false;
            }
        }
        let region = region_for(&self.plan, layout, known, self.target_cell);
        match a_star(known, from, &region) {
            Ok(p) => {
                self.path = p;
                self.cursor = 0;
                true
            }
            Err(_) => {
                self.phase =
                    Phase::Failed(if count_repair { FailReason::PathBlocked } else { FailReason::TargetMissing });
                false
            }
        }
    }

    /// Advances the skill by one step and returns the primitive to emit, or
    /// `None` once the skill is done or has failed.
    pub fn tick(&mut self, obs: &Observation, layout: &Layout, known: &Grid) -> Option<Action> {
        if self.is_finished() {
            return None;
        }
        let here = obs.position;

        // Results of the previous interaction.
        match self.plan.skill {
            SkillKind::GoGrab => {
                if self.target_object().is_some_and(|t| obs.held_object_ids.contains(&t)) {
                    self.phase = Phase::Done;
                    return None;
                }
            }
            SkillKind::GoPut => {
                if let Some(o) = self.put_object {
                    if !obs.held_object_ids.contains(&o) {
                        self.phase = Phase::Done;
                        return None;
                    }
                }
            }
            _ => {}
        }
        if let PlanTarget::Room { room_id, .. } = &self.plan.target {
            if obs.room_id == *room_id {
                self.phase = Phase::Done;
                return None;
            }
        }

        // Track a visible target that moved.
        if let Some(t) = self.target_object() {
            if let Some(seen) = obs.object(t) {
                if Some(seen.position) != self.target_cell {
                    self.target_cell = Some(seen.position);
                    if seen.holder.is_none() && !self.replan_path(here, layout, known, false) {
                        return None;
                    }
                }
            }
        }

        if self.phase == Phase::Navigating {
            let region = region_for(&self.plan, layout, known, self.target_cell);
            if region.contains(&here) && self.plan.skill != SkillKind::GoExplore {
                self.phase = Phase::Interacting;
            } else {
                if self.path.get(self.cursor) != Some(&here) {
                    match self.path.iter().position(|c| *c == here) {
                        Some(i) => self.cursor = i,
                        None => {
                            if !self.replan_path(here, layout, known, false) {
                                return None;
                            }
                        }
                    }
                }
                let blocked = self.path[self.cursor + 1..].iter().any(|c| !known.is_open(*c));
                let arrived_without_reach = self.cursor + 1 >= self.path.len();
                if (blocked || arrived_without_reach) && !self.replan_path(here, layout, known, true) {
                    return None;
                }
                let next = self.path.get(self.cursor + 1).copied()?;
                let dir = here.direction_to(next)?;
                return Some(Action::Move { dir });
            }
        }

        // Interacting.
        self.attempts += 1;
        if self.attempts > MAX_INTERACT_ATTEMPTS {
            self.phase = Phase::Failed(FailReason::Rejected);
            return None;
        }
        let target = self.target_object()?;
        match self.plan.skill {
            SkillKind::GoCheck => match obs.object(target) {
                Some(c) if c.states.iter().any(|s| s == "OPEN") => {
                    self.phase = Phase::Done;
                    None
                }
                Some(_) => Some(Action::Open { object: target }),
                None => {
                    self.phase = Phase::Failed(FailReason::TargetMissing);
                    None
                }
            },
            SkillKind::GoGrab => {
                if obs.held_object_ids.len() >= HAND_CAPACITY {
                    self.phase = Phase::Failed(FailReason::HandsFull);
                    return None;
                }
                match obs.object(target) {
                    Some(o) if o.holder.is_none() && o.position.manhattan(here) <= 1 => Some(Action::Grasp { object: target }),
                    _ => {
                        self.phase = Phase::Failed(FailReason::TargetMissing);
                        None
                    }
                }
            }
            SkillKind::GoPut => {
                let Some(&held) = obs.held_object_ids.first() else {
                    self.phase = Phase::Failed(FailReason::NothingHeld);
                    return None;
                };
                let Some(t) = obs.object(target) else {
                    self.phase = Phase::Failed(FailReason::TargetMissing);
                    return None;
                };
                if t.states.iter().any(|s| s == "CLOSED") {
                    return Some(Action::Open { object: target });
                }
                self.put_object = Some(held);
                Some(Action::Put { object: held, target })
            }
            SkillKind::GoExplore => {
                self.phase = Phase::Done;
                None
            }
        }
    }
}
