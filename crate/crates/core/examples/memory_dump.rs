//! Prints an agent's memory partway through an episode: scored observations
//! and what it believes about its collaborator.
//!
//! `cargo run --example memory_dump -- [task] [seed] [step] [agent_id]`

use reveca::harness::{run_episode, EpisodeOptions, EpisodeSpec};
use reveca::reasoner::OracleReasoner;
use reveca::world::AgentId;

fn main() {
    let mut args = std::env::args().skip(1);
    let task = args.next().unwrap_or_else(|| "prepare_afternoon_tea".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let step: u32 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let agent = AgentId(args.next().and_then(|s| s.parse().ok()).unwrap_or(1));
    let spec = EpisodeSpec::new(&task, seed);
    let out = run_episode(&spec, &mut OracleReasoner::new(), EpisodeOptions { dump_memory: true }).expect("episode runs");
    let dump = out
        .memory_dumps
        .iter()
        .rfind(|(s, a, _)| *a == agent && *s <= step)
        .map(|(_, _, d)| d)
        .expect("agent has a dump at or before that step");
    println!("{}", serde_json::to_string_pretty(dump).unwrap());
}
