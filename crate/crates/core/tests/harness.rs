//! Episode runner, transcripts, replay and matrix reports.

use std::collections::BTreeMap;

use reveca::agent::{AgentEvent, CommMode};
use reveca::config::{Ablations, AgentConfig, TopK};
use reveca::harness::transcript::SCHEMA_VERSION;
use reveca::harness::{
    default_agents, replay, run_episode, run_matrix, run_world, EpisodeOptions, EpisodeSpec, MatrixReport, RunConfig,
    Transcript, TranscriptError, TranscriptRecord, Variant,
};
use reveca::reasoner::OracleReasoner;
use reveca::scenario::spawn_scenario;
use reveca::validation::ValidationEvent;
use reveca::world::{AgentId, KernelEvent};

fn run(spec: &EpisodeSpec) -> Transcript {
    run_episode(spec, &mut OracleReasoner::new(), EpisodeOptions::default()).unwrap().transcript
}

fn with_config(task: &str, seed: u64, config: AgentConfig) -> EpisodeSpec {
    let mut spec = EpisodeSpec::new(task, seed);
    spec.agent_config = config;
    spec.label = config.ablations.label();
    spec
}

#[test]
fn metrics_are_conserved_by_the_transcript() {
    for task in ["wash_dishes", "prepare_a_meal", "put_groceries"] {
        for seed in 0..4 {
            let t = run(&EpisodeSpec::new(task, seed));
            let end = t.end().unwrap();
            let steps: Vec<_> = t.steps().collect();
            // Steps are numbered from 1; SS is the index the episode stopped at.
            assert_eq!(steps.first().map(|s| s.step), Some(1));
            assert_eq!(steps.last().unwrap().step + 1, end.metrics.simulation_steps);
            assert!(steps.windows(2).all(|w| w[1].step == w[0].step + 1));

            let n = t.header().unwrap().agents.len() as f64;
            let mut walked: BTreeMap<AgentId, f64> = BTreeMap::new();
            for s in &steps {
                for e in &s.kernel_events {
                    if let KernelEvent::Moved { agent, from, to } = e {
                        *walked.entry(*agent).or_default() += from.euclidean(*to);
                    }
                }
            }
            let td = walked.values().sum::<f64>() / n;
            assert!((td - end.metrics.travel_distance).abs() < 1e-9, "{task} {seed}: {td} vs {}", end.metrics.travel_distance);

            let sent = steps.iter().flat_map(|s| &s.agents).filter(|a| a.request.message.is_some()).count();
            let rejected = steps
                .iter()
                .flat_map(|s| &s.kernel_events)
                .filter(|e| matches!(e, KernelEvent::MessageRejected { .. }))
                .count();
            assert_eq!((sent - rejected) as u32, end.metrics.messages_sent);
        }
    }
}

#[test]
fn transcripts_round_trip_through_jsonl() {
    let t = run(&EpisodeSpec::new("set_up_dinner_table", 1));
    let text = t.to_jsonl();
    assert!(text.lines().count() >= 3);
    let back = Transcript::read_jsonl(text.as_bytes()).unwrap();
    assert_eq!(back, t);
    assert_eq!(back.to_jsonl(), text);

    let bumped = text.replacen(
        &format!("\"schema_version\":{SCHEMA_VERSION}"),
        &format!("\"schema_version\":{}", SCHEMA_VERSION + 1),
        1,
    );
    assert!(matches!(Transcript::read_jsonl(bumped.as_bytes()), Err(TranscriptError::SchemaVersion { .. })));
    let headless: String = text.lines().skip(1).map(|l| format!("{l}\n")).collect();
    assert!(matches!(Transcript::read_jsonl(headless.as_bytes()), Err(TranscriptError::MissingHeader)));
}

#[test]
fn replay_detects_tampering() {
    let t = run(&EpisodeSpec::new("prepare_afternoon_tea", 3));
    assert!(replay(&t).unwrap().is_clean());

    // Move an agent somewhere it never went.
    let mut moved = t.clone();
    let target = moved
        .records
        .iter_mut()
        .filter_map(|r| match r {
            TranscriptRecord::Step(s) => Some(s),
            _ => None,
        })
        .nth(5)
        .unwrap();
    let at = target.step;
    target.agents[0].position_after.x += 1;
    let report = replay(&moved).unwrap();
    let first = report.first_divergence().expect("tampered position is caught");
    assert_eq!(first.step, at);

    // Claim a different travel distance.
    let mut td = t.clone();
    for r in &mut td.records {
        if let TranscriptRecord::End(e) = r {
            e.metrics.travel_distance += 0.5;
        }
    }
    assert!(!replay(&td).unwrap().is_clean());

    // A tiny float wobble is within tolerance.
    let mut wobble = t.clone();
    for r in &mut wobble.records {
        if let TranscriptRecord::End(e) = r {
            e.metrics.travel_distance += 1e-12;
        }
    }
    assert!(replay(&wobble).unwrap().is_clean());
}

#[test]
fn no_cot_changes_only_prompt_text() {
    let base = AgentConfig { log_prompts: true, ..AgentConfig::default() };
    let ablated = AgentConfig { ablations: Ablations::only("no_cot").unwrap(), ..base };
    for seed in 0..3 {
        let a = run(&with_config("prepare_a_meal", seed, base));
        let b = run(&with_config("prepare_a_meal", seed, ablated));
        let prompts = |t: &Transcript| -> Vec<String> {
            t.agent_events()
                .filter_map(|(_, _, e)| match e {
                    AgentEvent::Prompt { text, .. } => Some(text.clone()),
                    _ => None,
                })
                .collect()
        };
        let (pa, pb) = (prompts(&a), prompts(&b));
        assert_eq!(pa.len(), pb.len());
        assert!(!pa.is_empty());
        assert!(pa.iter().zip(&pb).any(|(x, y)| x != y), "no_cot left every prompt unchanged");

        // With prompts stripped, the two runs are the same episode.
        let strip = |t: &Transcript| {
            let mut t = t.clone();
            for r in &mut t.records {
                match r {
                    TranscriptRecord::Step(s) => {
                        for ag in &mut s.agents {
                            ag.events.retain(|e| !matches!(e, AgentEvent::Prompt { .. }));
                        }
                    }
                    TranscriptRecord::Header(h) => {
                        h.agent_config.ablations = Ablations::default();
                        h.label = String::new();
                    }
                    TranscriptRecord::End(_) => {}
                }
            }
            t.to_jsonl()
        };
        assert_eq!(strip(&a), strip(&b));
    }
}

#[test]
fn unbounded_k_passes_every_record() {
    let config = AgentConfig { k: TopK::Inf, ..AgentConfig::default() };
    let t = run(&with_config("prepare_a_meal", 2, config));
    assert!(t.end().unwrap().success);
    let widest = t
        .agent_events()
        .filter_map(|(_, _, e)| match e {
            AgentEvent::Retrieval { top_k, .. } => Some(top_k.len()),
            _ => None,
        })
        .max()
        .unwrap();
    assert!(widest > 3, "K=Inf never exceeded three records");
}

fn comm_run(task: &str, seed: u64, mode: CommMode) -> Transcript {
    let spec = EpisodeSpec::new(task, seed);
    let sc = spawn_scenario(&spec.scenario_request(), &spec.map).unwrap();
    let mut agents = default_agents(&sc.state, &sc.goal, spec.agent_config);
    for a in &mut agents {
        a.set_comm_mode(mode);
    }
    run_world(&spec, sc.state, sc.goal, agents, &mut OracleReasoner::new(), EpisodeOptions::default()).unwrap().transcript
}

fn queries(t: &Transcript) -> usize {
    t.agent_events()
        .filter(|(_, _, e)| matches!(e, AgentEvent::Validation { detail: ValidationEvent::Query { .. } }))
        .count()
}

#[test]
fn comm_modes() {
    let ss = |t: &Transcript| t.end().unwrap().metrics.simulation_steps;
    let (mut q_reveca, mut q_always, mut ss_reveca, mut ss_always) = (0, 0, 0, 0);
    for seed in 0..5 {
        let t = comm_run("prepare_a_meal", seed, CommMode::Reveca);
        q_reveca += queries(&t);
        ss_reveca += ss(&t);
        // Asking before every object plan costs two idle steps each time.
        let t = comm_run("prepare_a_meal", seed, CommMode::AlwaysAsk);
        q_always += queries(&t);
        ss_always += ss(&t);
        assert!(t.end().unwrap().reason.is_some());

        let silent = comm_run("prepare_a_meal", seed, CommMode::NoComm);
        assert!(silent.end().unwrap().success);
        assert_eq!(silent.end().unwrap().metrics.messages_sent, 0);
        assert_eq!(queries(&silent), 0);
    }
    assert!(q_always > q_reveca, "always_ask sent {q_always} queries, reveca {q_reveca}");
    assert!(ss_always > ss_reveca, "always_ask took {ss_always} steps, reveca {ss_reveca}");
}

#[test]
fn validation_queries_stay_below_team_size() {
    for agents in 2..=4 {
        for seed in 0..4 {
            let mut spec = EpisodeSpec::new("put_groceries", seed);
            spec.agents = agents;
            let t = run(&spec);
            for (_, _, e) in t.agent_events() {
                if let AgentEvent::Validation { detail: ValidationEvent::Outcome { queries_sent, .. } } = e {
                    assert!(*queries_sent < agents, "{queries_sent} queries with {agents} agents");
                }
            }
            assert!(t.end().unwrap().success, "{agents} agents, seed {seed}");
        }
    }
}

#[test]
fn matrix_report_round_trips() {
    let cfg = RunConfig {
        tasks: vec!["wash_dishes".into(), "set_up_dinner_table".into()],
        seeds: vec![0, 1, 2],
        variants: vec![Variant::default_row(), Variant::ablation("no_proximity").unwrap()],
        workers: 2,
        ..RunConfig::default()
    };
    let run = run_matrix(&cfg).unwrap();
    assert_eq!(run.episodes.len(), 12);
    let labels: Vec<&str> = run.episodes.iter().map(|e| e.label.as_str()).collect();
    assert!(labels[..6].iter().all(|l| *l == "default") && labels[6..].iter().all(|l| *l == "no_proximity"));

    let json = serde_json::to_string_pretty(&run.report).unwrap();
    let back: MatrixReport = serde_json::from_str(&json).unwrap();
    assert_eq!(back, run.report);
    let row = back.row("default").unwrap();
    assert_eq!(row.episodes, 6);
    assert_eq!(row.successes, 6);
    let table = back.to_table();
    assert!(table.contains("default") && table.contains("no_proximity"));

    // Thread count does not change results.
    let serial = run_matrix(&RunConfig { workers: 1, ..cfg }).unwrap();
    assert_eq!(serial.report, run.report);
}
