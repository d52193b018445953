//! Runs one oracle episode and prints what each agent did per step.
//!
//! `cargo run --example trace -- <task> <seed> [dummy_count] [ablation]`

use reveca::harness::{run_episode, EpisodeOptions, EpisodeSpec, TranscriptRecord};
use reveca::reasoner::OracleReasoner;

fn main() {
    let mut args = std::env::args().skip(1);
    let task = args.next().unwrap_or_else(|| "prepare_afternoon_tea".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut spec = EpisodeSpec::new(&task, seed);
    spec.dummy_count = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    if let Some(a) = args.next() {
        spec.agent_config.ablations.set(&a).expect("known ablation");
    }
    let out = run_episode(&spec, &mut OracleReasoner::new(), EpisodeOptions::default()).expect("episode runs");
    for rec in &out.transcript.records {
        match rec {
            TranscriptRecord::Header(h) => println!("goal: {}", h.goal.text),
            TranscriptRecord::Step(s) => {
                for a in &s.agents {
                    let events: Vec<String> = a
                        .events
                        .iter()
                        .filter(|e| !matches!(e, reveca::agent::AgentEvent::Relevance { .. } | reveca::agent::AgentEvent::Retrieval { .. }))
                        .map(|e| serde_json::to_string(e).unwrap())
                        .collect();
                    println!("{:>3} {} {:?} @{} held {:?} {}", s.step, a.agent_id, a.request.action, a.position_after, a.held_after, events.join(" "));
                }
                for e in &s.kernel_events {
                    println!("    kernel {}", serde_json::to_string(e).unwrap());
                }
            }
            TranscriptRecord::End(e) => println!("end: {:?}", e),
        }
    }
}
