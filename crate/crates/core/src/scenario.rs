//! Household task definitions and seeded scenario generation.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Cell;
use crate::map::{FurnitureKind, InitialState, Layout, MapError, MapSpec};
use crate::world::{
    AgentBody, AgentId, ContainerState, Goal, GoalRelation, ObjectEntity, ObjectId, ObjectKind, Placement, Step,
    SubGoal, WorldState,
};

pub const AGENT_NAMES: [&str; 6] = ["Alice", "Bob", "Charlie", "Dana", "Evan", "Fiona"];

/// Interactable clutter that belongs to no household task.
pub const DUMMY_NAMES: [&str; 16] = [
    "book", "pillow", "towel", "toy", "candle", "remote", "magazine", "teddybear", "shoe", "clock", "vase",
    "soap", "toothbrush", "comb", "cellphone", "keyboard",
];

pub const FURNITURE_ID_BASE: u32 = 100;
pub const ITEM_ID_BASE: u32 = 300;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub name: String,
    pub title: String,
    pub objects: Vec<String>,
    pub location: String,
    pub relation: GoalRelation,
}

impl TaskSpec {
    /// The five built-in household tasks.
    pub fn builtin() -> Vec<TaskSpec> {
        [
            include_str!("../data/tasks/prepare_afternoon_tea.json"),
            include_str!("../data/tasks/wash_dishes.json"),
            include_str!("../data/tasks/prepare_a_meal.json"),
            include_str!("../data/tasks/put_groceries.json"),
            include_str!("../data/tasks/set_up_dinner_table.json"),
        ]
        .iter()
        .map(|s| serde_json::from_str(s).expect("bundled task spec is valid"))
        .collect()
    }

    pub fn by_name(name: &str) -> Option<TaskSpec> {
        Self::builtin().into_iter().find(|t| t.name == name)
    }

    pub fn builtin_names() -> Vec<String> {
        Self::builtin().into_iter().map(|t| t.name).collect()
    }
}

/// Every item name that some built-in task asks for.
pub fn household_vocabulary() -> BTreeSet<String> {
    TaskSpec::builtin().into_iter().flat_map(|t| t.objects).collect()
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("unknown task `{0}`")]
    UnknownTask(String),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error("map has no `{0}` to use as goal location")]
    MissingGoalLocation(String),
    #[error("map too small: {0}")]
    MapTooSmall(String),
    #[error("agent count must be between 1 and {max}", max = AGENT_NAMES.len())]
    AgentCount,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScenarioRequest {
    pub task: String,
    pub seed: u64,
    pub dummy_count: usize,
    pub agents: usize,
    pub horizon: Step,
}

impl ScenarioRequest {
    pub fn new(task: &str, seed: u64) -> Self {
        Self { task: task.to_string(), seed, dummy_count: 0, agents: 2, horizon: 250 }
    }

    pub fn dummies(mut self, n: usize) -> Self {
        self.dummy_count = n;
        self
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub state: WorldState,
    pub goal: Goal,
}

fn task_salt(name: &str) -> u64 {
    // FNV-1a; stable across platforms and releases.
    name.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

/// One entity per map placement, with ids from [`FURNITURE_ID_BASE`].
pub fn furniture_objects(layout: &Layout) -> Vec<ObjectEntity> {
    layout
        .spec
        .placements
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (kind, state) = match p.kind {
                FurnitureKind::Container => (
                    ObjectKind::Container,
                    match p.state {
                        InitialState::Open => ContainerState::Open,
                        InitialState::Closed => ContainerState::Closed,
                    },
                ),
                FurnitureKind::Surface => (ObjectKind::Surface, ContainerState::NotApplicable),
                FurnitureKind::Decor => (ObjectKind::Decor, ContainerState::NotApplicable),
            };
            ObjectEntity {
                object_id: ObjectId(FURNITURE_ID_BASE + i as u32),
                object_name: p.name.clone(),
                kind,
                position: p.cell,
                container_state: state,
                contents: Vec::new(),
                placement: Placement::Floor,
                is_dummy: false,
                affinity: p.affinity.clone(),
            }
        })
        .collect()
}

/// Builds the world for one task instance. Identical inputs give identical worlds.
pub fn spawn_scenario(req: &ScenarioRequest, map: &MapSpec) -> Result<Scenario, ScenarioError> {
    let task = TaskSpec::by_name(&req.task).ok_or_else(|| ScenarioError::UnknownTask(req.task.clone()))?;
    if req.agents == 0 || req.agents > AGENT_NAMES.len() {
        return Err(ScenarioError::AgentCount);
    }
    let layout = Arc::new(Layout::compile(map.clone())?);
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed ^ task_salt(&task.name));

    let mut objects = furniture_objects(&layout);

    let goal_loc = objects
        .iter()
        .find(|o| o.object_name == task.location && o.is_container())
        .map(|o| (o.object_id, o.object_name.clone()))
        .ok_or_else(|| ScenarioError::MissingGoalLocation(task.location.clone()))?;

    let receptacles: Vec<usize> =
        (0..objects.len()).filter(|&i| objects[i].is_container() && objects[i].object_id != goal_loc.0).collect();
    let closed: Vec<usize> = receptacles
        .iter()
        .copied()
        .filter(|&i| objects[i].container_state == ContainerState::Closed)
        .collect();
    if receptacles.is_empty() {
        return Err(ScenarioError::MapTooSmall("no receptacle besides the goal location".into()));
    }
    let floor_cells: Vec<Cell> = layout.walkable().open_cells().filter(|c| !layout.is_door(*c)).collect();
    if floor_cells.len() < req.agents {
        return Err(ScenarioError::MapTooSmall("not enough floor cells".into()));
    }

    // Goal: 3..=5 units spread over the task's object names.
    let total: u32 = rng.gen_range(3..=5);
    let mut names = task.objects.clone();
    names.shuffle(&mut rng);
    names.truncate((total as usize).min(names.len()));
    let mut counts = vec![1u32; names.len()];
    for _ in names.len() as u32..total {
        let i = rng.gen_range(0..counts.len());
        counts[i] += 1;
    }
    let mut sub_goals: Vec<SubGoal> = names
        .iter()
        .zip(&counts)
        .map(|(n, c)| SubGoal { object_name: n.clone(), count: *c, location_id: goal_loc.0 })
        .collect();
    sub_goals.sort_by_key(|g| task.objects.iter().position(|n| *n == g.object_name));
    let goal = Goal::new(sub_goals, goal_loc.0, &goal_loc.1, task.relation);

    let mut next_id = ITEM_ID_BASE;
    let mut place_item = |objects: &mut Vec<ObjectEntity>, name: &str, at: Result<usize, Cell>, dummy: bool| {
        let id = ObjectId(next_id);
        next_id += 1;
        let (position, placement) = match at {
            Ok(r) => {
                objects[r].contents.push(id);
                (objects[r].position, Placement::Inside(objects[r].object_id))
            }
            Err(cell) => (cell, Placement::Floor),
        };
        objects.push(ObjectEntity {
            object_id: id,
            object_name: name.to_string(),
            kind: ObjectKind::Item,
            position,
            container_state: ContainerState::NotApplicable,
            contents: Vec::new(),
            placement,
            is_dummy: dummy,
            affinity: Vec::new(),
        });
    };

    let mut first = true;
    for g in &goal.sub_goals {
        for _ in 0..g.count {
            let pool = if first && !closed.is_empty() { &closed } else { &receptacles };
            first = false;
            let r = *pool.choose(&mut rng).expect("nonempty");
            place_item(&mut objects, &g.object_name, Ok(r), false);
        }
    }

    let mut others: Vec<String> = household_vocabulary().into_iter().filter(|n| !goal.mentions(n)).collect();
    others.shuffle(&mut rng);
    let extra = rng.gen_range(2..=4).min(others.len());
    for name in others.iter().take(extra) {
        let r = *receptacles.choose(&mut rng).expect("nonempty");
        place_item(&mut objects, name, Ok(r), false);
    }

    for _ in 0..req.dummy_count {
        let name = *DUMMY_NAMES.choose(&mut rng).expect("nonempty");
        let at = if rng.gen_bool(0.5) {
            Ok(*receptacles.choose(&mut rng).expect("nonempty"))
        } else {
            Err(*floor_cells.choose(&mut rng).expect("nonempty"))
        };
        place_item(&mut objects, name, at, true);
    }

    let agents = (0..req.agents)
        .map(|i| AgentBody {
            agent_id: AgentId(i as u32 + 1),
            name: AGENT_NAMES[i].to_string(),
            position: *floor_cells.choose(&mut rng).expect("nonempty"),
            held_object_ids: Vec::new(),
            distance_traveled: 0.0,
        })
        .collect();

    let state = WorldState::new(layout, objects, agents, req.horizon, req.seed);
    Ok(Scenario { state, goal })
}
