//! Re-simulates a transcript's recorded actions through the kernel.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::episode::world_from_header;
use super::transcript::Transcript;
use crate::map::MapError;
use crate::world::{AgentId, EpisodeMetrics, Step, Termination};

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("transcript has no header")]
    MissingHeader,
    #[error("transcript has no end record")]
    MissingEnd,
    #[error("recorded map is invalid: {0}")]
    Map(#[from] MapError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub step: Step,
    pub agent: Option<AgentId>,
    pub field: String,
    pub recorded: String,
    pub replayed: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayReport {
    pub recorded: EpisodeMetrics,
    pub replayed: EpisodeMetrics,
    pub divergences: Vec<Divergence>,
}

impl ReplayReport {
    pub fn first_divergence(&self) -> Option<&Divergence> {
        self.divergences.first()
    }

    pub fn is_clean(&self) -> bool {
        self.divergences.is_empty()
    }
}

/// Tolerance for travel distance, which is a float sum.
pub const TD_TOLERANCE: f64 = 1e-9;

pub fn replay(t: &Transcript) -> Result<ReplayReport, ReplayError> {
    let header = t.header().ok_or(ReplayError::MissingHeader)?;
    let end = t.end().ok_or(ReplayError::MissingEnd)?;
    let mut state = world_from_header(header)?;
    let mut divergences = Vec::new();
    for rec in t.steps() {
        if rec.step != state.step_index {
            divergences.push(Divergence {
                step: rec.step,
                agent: None,
                field: "step".into(),
                recorded: rec.step.to_string(),
                replayed: state.step_index.to_string(),
            });
        }
        let actions: BTreeMap<_, _> = rec.agents.iter().map(|a| (a.agent_id, a.request.clone())).collect();
        let report = state.step(&actions);
        if report.events != rec.kernel_events {
            divergences.push(Divergence {
                step: rec.step,
                agent: None,
                field: "kernel_events".into(),
                recorded: serde_json::to_string(&rec.kernel_events).unwrap_or_default(),
                replayed: serde_json::to_string(&report.events).unwrap_or_default(),
            });
        }
        for a in &rec.agents {
            let Some(body) = state.agent(a.agent_id) else {
                divergences.push(Divergence {
                    step: rec.step,
                    agent: Some(a.agent_id),
                    field: "agent".into(),
                    recorded: "present".into(),
                    replayed: "missing".into(),
                });
                continue;
            };
            if body.position != a.position_after {
                divergences.push(Divergence {
                    step: rec.step,
                    agent: Some(a.agent_id),
                    field: "position".into(),
                    recorded: a.position_after.to_string(),
                    replayed: body.position.to_string(),
                });
            }
            if body.held_object_ids != a.held_after {
                divergences.push(Divergence {
                    step: rec.step,
                    agent: Some(a.agent_id),
                    field: "held".into(),
                    recorded: format!("{:?}", a.held_after),
                    replayed: format!("{:?}", body.held_object_ids),
                });
            }
        }
    }
    let success = match state.check_termination(&header.goal) {
        Termination::Done { success, .. } => success,
        Termination::Running => false,
    };
    let replayed = state.metrics(success);
    let recorded = end.metrics.clone();
    let last = t.steps().last().map(|s| s.step).unwrap_or(0);
    if replayed.simulation_steps != recorded.simulation_steps {
        divergences.push(Divergence {
            step: last,
            agent: None,
            field: "simulation_steps".into(),
            recorded: recorded.simulation_steps.to_string(),
            replayed: replayed.simulation_steps.to_string(),
        });
    }
    if (replayed.travel_distance - recorded.travel_distance).abs() > TD_TOLERANCE {
        divergences.push(Divergence {
            step: last,
            agent: None,
            field: "travel_distance".into(),
            recorded: recorded.travel_distance.to_string(),
            replayed: replayed.travel_distance.to_string(),
        });
    }
    if replayed.success != recorded.success && end.error.is_none() {
        divergences.push(Divergence {
            step: last,
            agent: None,
            field: "success".into(),
            recorded: recorded.success.to_string(),
            replayed: replayed.success.to_string(),
        });
    }
    divergences.sort_by_key(|d| d.step);
    Ok(ReplayReport { recorded, replayed, divergences })
}
