//! Scores what Alice sees at the start of an episode, then retrieves the top-K
//! records with her proximity to each object relative to Bob.
//!
//! `cargo run --example retrieval -- [task] [seed] [dummy_count]`

use std::collections::{BTreeMap, BTreeSet};

use reveca::config::TopK;
use reveca::map::MapSpec;
use reveca::memory::{Ladder, Memory};
use reveca::planning::{relative_proximity, retrieve_top_k};
use reveca::reasoner::{OracleReasoner, RelevanceRequest};
use reveca::scenario::{spawn_scenario, ScenarioRequest};
use reveca::world::AgentId;

fn main() {
    let mut args = std::env::args().skip(1);
    let task = args.next().unwrap_or_else(|| "prepare_a_meal".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let dummy_count = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let req = ScenarioRequest { task, seed, dummy_count, agents: 2, horizon: 250 };
    let sc = spawn_scenario(&req, &MapSpec::house()).expect("known task");
    let (alice, bob) = (AgentId(1), AgentId(2));
    let obs = sc.state.observe(alice).unwrap();
    let bob_at = sc.state.agent(bob).unwrap().position;
    println!("goal: {}", sc.goal.text);
    println!("Alice at {} in the {}, Bob at {}", obs.position, sc.state.layout().room_name(obs.room_id), bob_at);

    let oracle = OracleReasoner::new();
    let mut memory = Memory::new(alice, sc.goal.clone(), Ladder::R4);
    let remaining: BTreeMap<String, u32> = sc.goal.sub_goals.iter().map(|g| (g.object_name.clone(), g.count)).collect();
    let unfound: BTreeSet<String> = remaining.keys().cloned().collect();
    for snap in &obs.visible_objects {
        let req = RelevanceRequest {
            goal_text: sc.goal.text.clone(),
            goal_location: sc.goal.location_id,
            remaining: remaining.clone(),
            unfound: unfound.clone(),
            object: snap.clone(),
            container_hints: Vec::new(),
            ladder: Ladder::R4,
            cot: true,
        };
        let relevance = oracle.judge_relevance(&req);
        memory.upsert_observation(snap, relevance, obs.step);
    }

    let others = vec![("Bob".to_string(), Some(bob_at))];
    let mut buckets = BTreeMap::new();
    println!("\n{} records:", memory.records().len());
    for r in memory.retrievable() {
        let p = relative_proximity(obs.position, r.position, &others);
        println!("  {:<16} ({}) {:<7} {}", r.object_name, r.object_id, r.relevance.label(), p.rendered);
        buckets.insert(r.record_id, p.bucket);
    }
    for k in [TopK::Finite(1), TopK::Finite(3), TopK::Inf] {
        let top: Vec<String> = retrieve_top_k(memory.retrievable(), &buckets, k)
            .iter()
            .map(|r| format!("{}({})", r.object_name, r.relevance.label()))
            .collect();
        println!("top {k:?}: {}", top.join(", "));
    }
}
