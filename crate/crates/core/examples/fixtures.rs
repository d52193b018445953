//! Records the chat exchanges of an episode to a fixture file, then replays
//! the episode from the file alone. The "model" here is a local stand-in, so
//! no network is needed.

use reveca::harness::{run_episode, EpisodeOptions, EpisodeSpec};
use reveca::reasoner::fixture::{load_fixtures, FixtureSink, RecordingTransport, ReplayTransport};
use reveca::reasoner::remote::{ChatTransport, TransportError};
use reveca::reasoner::{LlmReasoner, RequestKind};

/// Picks the first listed option, rates everything Medium and guesses Low.
struct Canned;

impl ChatTransport for Canned {
    fn complete(&mut self, kind: RequestKind, _prompt: &str) -> Result<String, TransportError> {
        Ok(match kind {
            RequestKind::Plan => "Answer: [1]",
            RequestKind::Relevance => "Answer: [Medium]",
            RequestKind::Trajectory => "Answer: [Low]",
            RequestKind::Refine => "On my way.",
        }
        .into())
    }
}

fn main() {
    let mut spec = EpisodeSpec::new("set_up_dinner_table", 1);
    spec.horizon = 80;
    let path = std::env::temp_dir().join("reveca_fixtures_example.jsonl");
    let _ = std::fs::remove_file(&path);

    let sink = FixtureSink::create(&path).unwrap();
    let mut recording = LlmReasoner::new(RecordingTransport::new(Canned, sink));
    let first = run_episode(&spec, &mut recording, EpisodeOptions::default()).expect("recorded run");
    let recorded = load_fixtures(&path).unwrap().len();
    println!("recorded {recorded} exchanges to {}", path.display());

    let mut replaying = LlmReasoner::new(ReplayTransport::open(&path).unwrap());
    let second = run_episode(&spec, &mut replaying, EpisodeOptions::default()).expect("replayed run");
    println!("replayed {} answers from the file", replaying.transport().served());
    println!("identical transcripts: {}", first.transcript.to_jsonl() == second.transcript.to_jsonl());
}
