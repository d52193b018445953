//! Runs the experiment matrix with the oracle reasoner and prints the table.
//!
//! `cargo run --release --example matrix -- [dummy_count]`

use reveca::harness::{run_matrix, RunConfig};

fn main() {
    let dummy_count = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let cfg = RunConfig { dummy_count, ..RunConfig::default() };
    let run = run_matrix(&cfg).expect("valid config");
    print!("{}", run.report.to_table());
    for e in run.episodes.iter().filter(|e| e.metrics.as_ref().is_none_or(|m| !m.success)) {
        println!("unsuccessful: {} {} seed {} {:?}", e.label, e.task, e.seed, e.error);
    }
}
