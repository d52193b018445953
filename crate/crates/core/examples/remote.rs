//! Runs one episode against a live chat-completions endpoint.
//!
//! Needs `REVECA_API_KEY`; `REVECA_ENDPOINT` and `REVECA_MODEL` override the
//! defaults. Pass a path to also record the exchanges as fixtures.
//!
//! `cargo run --example remote -- [task] [seed] [fixtures.jsonl]`

use std::path::PathBuf;

use reveca::harness::{BackendConfig, EpisodeOptions, EpisodeSpec};
use reveca::reasoner::remote::API_KEY_ENV;
use reveca::reasoner::RemoteConfig;

fn main() {
    if std::env::var(API_KEY_ENV).map_or(true, |k| k.is_empty()) {
        eprintln!("set {API_KEY_ENV} to run against a live endpoint");
        return;
    }
    let mut args = std::env::args().skip(1);
    let task = args.next().unwrap_or_else(|| "prepare_afternoon_tea".into());
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);
    let record = args.next().map(PathBuf::from);

    let mut remote = RemoteConfig::default();
    if let Ok(e) = std::env::var("REVECA_ENDPOINT") {
        remote.endpoint = e;
    }
    if let Ok(m) = std::env::var("REVECA_MODEL") {
        remote.model = m;
    }
    let backend = BackendConfig::Remote { remote, record };
    let mut reasoner = backend.build().expect("backend builds");
    let spec = EpisodeSpec::new(&task, seed);
    match reveca::harness::run_episode(&spec, reasoner.as_mut(), EpisodeOptions::default()) {
        Ok(out) => println!("{:?} {:?}", out.reason, out.metrics),
        Err(e) => eprintln!("episode failed: {e}"),
    }
}
