//! Scripted episode where Bob takes the cupcake Alice remembers. With
//! validation Alice asks Bob, learns the plan is stale and heads for the
//! other cupcake; without it she walks to the empty spot first.
//!
//! `cargo run --example stale_plan -- [seed]`

use reveca::agent::AgentEvent;
use reveca::config::AgentConfig;
use reveca::harness::scripted;
use reveca::reasoner::OracleReasoner;

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    for no_validation in [false, true] {
        let mut config = AgentConfig::default();
        config.ablations.no_validation = no_validation;
        let out = scripted::run(seed, config, &mut OracleReasoner::new()).expect("episode runs");
        println!("== {} ==", if no_validation { "no_validation" } else { "validation" });
        for (step, agent, e) in out.transcript.agent_events() {
            if matches!(e, AgentEvent::PlanChosen { .. } | AgentEvent::Validation { .. } | AgentEvent::SkillFinished { .. }) {
                println!("{step:>3} {agent} {}", serde_json::to_string(e).unwrap());
            }
        }
        println!("success={} SS={} TD={:.2}", out.metrics.success, out.metrics.simulation_steps, out.metrics.travel_distance);
    }
}
