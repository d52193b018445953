//! Runs one episode, writes its transcript, reads it back and replays it.
//!
//! `cargo run --example episode -- [task] [seed]`

use std::io::BufReader;

use reveca::harness::{replay, run_episode, EpisodeOptions, EpisodeSpec, Transcript};
use reveca::reasoner::OracleReasoner;

fn main() {
    let mut args = std::env::args().skip(1);
    let task = args.next().unwrap_or_else(|| "wash_dishes".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let spec = EpisodeSpec::new(&task, seed);
    let out = run_episode(&spec, &mut OracleReasoner::new(), EpisodeOptions::default()).expect("episode runs");
    let m = &out.metrics;
    println!("{task} seed {seed}: {:?}, SS {} TD {:.2}, {} messages", out.reason, m.simulation_steps, m.travel_distance, m.messages_sent);

    let path = std::env::temp_dir().join(format!("reveca_{task}_{seed}.jsonl"));
    out.transcript.write_jsonl(std::fs::File::create(&path).unwrap()).unwrap();
    let loaded = Transcript::read_jsonl(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    println!("transcript: {} ({} records)", path.display(), loaded.records.len());

    let report = replay(&loaded).expect("transcript is complete");
    match report.first_divergence() {
        None => println!("replay: clean, SS {} TD {:.2}", report.replayed.simulation_steps, report.replayed.travel_distance),
        Some(d) => println!("replay: diverged at step {} on {}", d.step, d.field),
    }
}
