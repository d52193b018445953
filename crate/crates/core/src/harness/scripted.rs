//! Hand-built episode in which a collaborator quietly takes the object an
//! agent is about to fetch.
//!
//! Alice starts in the kitchen holding both apples; a cupcake lies on the
//! kitchen floor and another is somewhere in the bathroom. Bob is scripted to
//! grab the kitchen cupcake and deliver it. By the time Alice has dropped the
//! apples on the coffee table her memory of the kitchen cupcake is stale.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::episode::{run_world, EpisodeError, EpisodeOptions, EpisodeOutcome, EpisodeSpec};
use crate::agent::{RevecaAgent, ScriptedPlan};
use crate::config::AgentConfig;
use crate::geometry::Cell;
use crate::map::{Layout, MapSpec};
use crate::memory::SkillKind;
use crate::planning::PlanTarget;
use crate::reasoner::Reasoner;
use crate::scenario::{furniture_objects, ITEM_ID_BASE};
use crate::world::{
    AgentBody, AgentId, ContainerState, Goal, GoalRelation, ObjectEntity, ObjectId, ObjectKind, Placement, SubGoal,
    WorldState,
};

pub const TASK_NAME: &str = "stale_cupcake";

pub const ALICE: AgentId = AgentId(1);
pub const BOB: AgentId = AgentId(2);
/// The cupcake Bob takes.
pub const CONTESTED: ObjectId = ObjectId(ITEM_ID_BASE + 2);
/// The cupcake only Alice can deliver.
pub const REMOTE: ObjectId = ObjectId(ITEM_ID_BASE + 3);

/// A ready-to-run world with its team.
pub struct Prepared {
    pub spec: EpisodeSpec,
    pub state: WorldState,
    pub goal: Goal,
    pub agents: Vec<RevecaAgent>,
}

fn item(id: ObjectId, name: &str, position: Cell, placement: Placement) -> ObjectEntity {
    ObjectEntity {
        object_id: id,
        object_name: name.into(),
        kind: ObjectKind::Item,
        position,
        container_state: ContainerState::NotApplicable,
        contents: Vec::new(),
        placement,
        is_dummy: false,
        affinity: Vec::new(),
    }
}

/// Builds the scenario; `seed` varies where the second cupcake hides and when
/// Bob starts moving.
pub fn prepare(seed: u64, config: AgentConfig) -> Prepared {
    let layout = Arc::new(Layout::house());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut objects = furniture_objects(&layout);
    let table = objects.iter().find(|o| o.object_name == "coffeetable").map(|o| o.object_id).expect("house has a coffeetable");

    let alice_at = Cell::new(10, 3);
    let apples = [ObjectId(ITEM_ID_BASE), ObjectId(ITEM_ID_BASE + 1)];
    for id in apples {
        objects.push(item(id, "apple", alice_at, Placement::HeldBy(ALICE)));
    }
    objects.push(item(CONTESTED, "cupcake", Cell::new(10, 6), Placement::Floor));

    let bathroom = layout.room_by_name("bathroom").expect("house has a bathroom");
    let cabinet_idx = objects.iter().position(|o| o.object_name == "bathroomcabinet").expect("house has a bathroomcabinet");
    if rng.gen_bool(0.5) {
        let cabinet = &mut objects[cabinet_idx];
        cabinet.contents.push(REMOTE);
        let (pos, cid) = (cabinet.position, cabinet.object_id);
        objects.push(item(REMOTE, "cupcake", pos, Placement::Inside(cid)));
    } else {
        let cells: Vec<Cell> = bathroom
            .cells
            .iter()
            .copied()
            .filter(|c| layout.walkable().is_open(*c) && !layout.is_door(*c))
            .collect();
        let cell = *cells.choose(&mut rng).expect("bathroom has floor");
        objects.push(item(REMOTE, "cupcake", cell, Placement::Floor));
    }

    let agents = vec![
        AgentBody {
            agent_id: ALICE,
            name: "Alice".into(),
            position: alice_at,
            held_object_ids: apples.to_vec(),
            distance_traveled: 0.0,
        },
        AgentBody {
            agent_id: BOB,
            name: "Bob".into(),
            position: Cell::new(5, 6),
            held_object_ids: Vec::new(),
            distance_traveled: 0.0,
        },
    ];
    let goal = Goal::new(
        vec![
            SubGoal { object_name: "apple".into(), count: 2, location_id: table },
            SubGoal { object_name: "cupcake".into(), count: 2, location_id: table },
        ],
        table,
        "coffeetable",
        GoalRelation::On,
    );
    let horizon = 250;
    let state = WorldState::new(layout.clone(), objects, agents, horizon, seed);

    let roster: BTreeMap<AgentId, String> = state.agents().iter().map(|a| (a.agent_id, a.name.clone())).collect();
    let alice = RevecaAgent::new(ALICE, "Alice", goal.clone(), layout.clone(), config, &roster);
    let livingroom = layout.room_by_name("livingroom").expect("house has a livingroom");
    let bob_script = vec![
        ScriptedPlan {
            not_before: rng.gen_range(1..=2),
            skill: SkillKind::GoGrab,
            target: PlanTarget::Object { object_id: CONTESTED, object_name: "cupcake".into() },
        },
        ScriptedPlan {
            not_before: 0,
            skill: SkillKind::GoExplore,
            target: PlanTarget::Room { room_id: livingroom.room_id, room_name: livingroom.room_name.clone() },
        },
        ScriptedPlan {
            not_before: 0,
            skill: SkillKind::GoPut,
            target: PlanTarget::Object { object_id: table, object_name: "coffeetable".into() },
        },
    ];
    let bob = RevecaAgent::new(BOB, "Bob", goal.clone(), layout.clone(), config, &roster).with_script(bob_script, true);

    let spec = EpisodeSpec {
        task: TASK_NAME.into(),
        seed,
        agents: 2,
        horizon,
        dummy_count: 0,
        agent_config: config,
        label: config.ablations.label(),
        map: MapSpec::house(),
    };
    Prepared { spec, state, goal, agents: vec![alice, bob] }
}

pub fn run(seed: u64, config: AgentConfig, reasoner: &mut dyn Reasoner) -> Result<EpisodeOutcome, EpisodeError> {
    let p = prepare(seed, config);
    run_world(&p.spec, p.state, p.goal, p.agents, reasoner, EpisodeOptions::default())
}
