use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reveca::config::TopK;
use reveca::harness::{
    replay, run_episode, run_matrix, BackendConfig, ConfigError, EpisodeError, EpisodeOptions, EpisodeSpec, RunConfig,
    Transcript, Variant,
};
use reveca::map::MapSpec;
use reveca::memory::Ladder;
use reveca::reasoner::RemoteConfig;

const EXIT_CONFIG: u8 = 2;
const EXIT_REASONER: u8 = 3;
/// Replay found divergences, or an output file could not be written.
const EXIT_FAILURE: u8 = 1;

#[derive(Parser)]
#[command(name = "reveca", version, about = "Cooperative household agents: episodes, ablation matrices, replay, live sessions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one episode and print its metrics.
    Run(RunArgs),
    /// Run every variant on every task and seed and print the SS/TD table.
    /// With `--ablation`, the rows are the default plus each named ablation.
    Matrix(MatrixArgs),
    /// Re-simulate a transcript and report divergences.
    Replay {
        transcript: PathBuf,
        /// Print the full report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Serve live sessions with one human-driven agent.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

/// Flags mirroring the run configuration; they override `--config`.
#[derive(Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "task")]
    tasks: Vec<String>,
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    #[arg(long)]
    agents: Option<usize>,
    #[arg(long)]
    horizon: Option<u32>,
    /// Top-K retrieval size, or `inf`.
    #[arg(long)]
    k: Option<TopK>,
    /// Relevance ladder size: 3, 4 or 5.
    #[arg(long)]
    ladder: Option<u8>,
    #[arg(long)]
    dummies: Option<usize>,
    /// Ablation flag to switch on; repeatable.
    #[arg(long = "ablation")]
    ablations: Vec<String>,
    #[arg(long)]
    refine_messages: bool,
    /// Put rendered prompts in the transcript.
    #[arg(long)]
    log_prompts: bool,
    /// oracle, remote or replay.
    #[arg(long)]
    backend: Option<String>,
    /// Fixture file for `--backend replay`.
    #[arg(long)]
    fixtures: Option<PathBuf>,
    /// Record remote exchanges to this fixture file.
    #[arg(long)]
    record: Option<PathBuf>,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: Common,
    /// Write the JSONL transcript here.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Write per-step memory dumps (JSONL) here.
    #[arg(long)]
    dump_memory: Option<PathBuf>,
}

#[derive(Args)]
struct MatrixArgs {
    #[command(flatten)]
    common: Common,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write one transcript per episode into this directory.
    #[arg(long)]
    transcript_dir: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn build_config(c: &Common) -> Result<RunConfig, ConfigError> {
    let mut cfg = match &c.config {
        Some(path) => RunConfig::from_file(path)?,
        None => RunConfig::default(),
    };
    if !c.tasks.is_empty() {
        cfg.tasks = c.tasks.clone();
    }
    if !c.seeds.is_empty() {
        cfg.seeds = c.seeds.clone();
    }
    if let Some(n) = c.agents {
        cfg.agents = n;
    }
    if let Some(h) = c.horizon {
        cfg.horizon = h;
    }
    if let Some(k) = c.k {
        cfg.k = k;
    }
    if let Some(r) = c.ladder {
        cfg.ladder = Ladder::try_from(r).map_err(|_| ConfigError::Invalid(format!("ladder must be 3, 4 or 5, got {r}")))?;
    }
    if let Some(d) = c.dummies {
        cfg.dummy_count = d;
    }
    for a in &c.ablations {
        cfg.ablations.set(a).map_err(ConfigError::Invalid)?;
    }
    cfg.refine_messages |= c.refine_messages;
    cfg.log_prompts |= c.log_prompts;
    if let Some(kind) = &c.backend {
        cfg.backend = match kind.as_str() {
            "oracle" => BackendConfig::Oracle,
            "remote" => BackendConfig::Remote { remote: RemoteConfig::default(), record: None },
            "replay" => {
                let fixtures = c.fixtures.clone().ok_or_else(|| ConfigError::Invalid("--backend replay needs --fixtures".into()))?;
                BackendConfig::Replay { fixtures }
            }
            other => return Err(ConfigError::Invalid(format!("unknown backend `{other}`"))),
        };
    }
    if let BackendConfig::Remote { remote, record } = &mut cfg.backend {
        if let Some(e) = &c.endpoint {
            remote.endpoint = e.clone();
        }
        if let Some(m) = &c.model {
            remote.model = m.clone();
        }
        if c.record.is_some() {
            record.clone_from(&c.record);
        }
    } else if c.endpoint.is_some() || c.model.is_some() || c.record.is_some() {
        return Err(ConfigError::Invalid("--endpoint, --model and --record need --backend remote".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn config_error(e: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {e}");
    ExitCode::from(EXIT_CONFIG)
}

fn write_transcript(path: &Path, t: &Transcript) -> std::io::Result<()> {
    t.write_jsonl(BufWriter::new(File::create(path)?))
}

fn cmd_run(args: RunArgs) -> ExitCode {
    let cfg = match build_config(&args.common) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if cfg.tasks.len() != 1 || cfg.seeds.len() != 1 {
        return config_error("run takes exactly one --task and one --seed");
    }
    let spec = EpisodeSpec {
        task: cfg.tasks[0].clone(),
        seed: cfg.seeds[0],
        agents: cfg.agents,
        horizon: cfg.horizon,
        dummy_count: cfg.dummy_count,
        agent_config: cfg.agent_config(),
        label: cfg.ablations.label(),
        map: MapSpec::house(),
    };
    let mut reasoner = match cfg.backend.build() {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    let options = EpisodeOptions { dump_memory: args.dump_memory.is_some() };
    let transcript_path = args.transcript.or_else(|| {
        cfg.output.transcript_dir.as_ref().map(|d| d.join(format!("{}_{}_{}.jsonl", spec.task, spec.seed, spec.label)))
    });
    let dump_path = args.dump_memory.or(cfg.output.memory_dump.clone());
    match run_episode(&spec, reasoner.as_mut(), options) {
        Ok(out) => {
            if let Some(p) = &transcript_path {
                if let Err(e) = write_transcript(p, &out.transcript) {
                    eprintln!("cannot write transcript {}: {e}", p.display());
                    return ExitCode::from(EXIT_FAILURE);
                }
            }
            if let Some(p) = &dump_path {
                let written = File::create(p).and_then(|f| {
                    let mut w = BufWriter::new(f);
                    for (step, agent, dump) in &out.memory_dumps {
                        serde_json::to_writer(&mut w, &serde_json::json!({ "step": step, "agent_id": agent, "memory": dump }))?;
                        w.write_all(b"\n")?;
                    }
                    w.flush()
                });
                if let Err(e) = written {
                    eprintln!("cannot write memory dump {}: {e}", p.display());
                    return ExitCode::from(EXIT_FAILURE);
                }
            }
            let summary = serde_json::json!({ "task": spec.task, "seed": spec.seed, "reason": out.reason, "metrics": out.metrics });
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            ExitCode::SUCCESS
        }
        Err(EpisodeError::Reasoner { step, source, partial }) => {
            if let Some(p) = &transcript_path {
                let _ = write_transcript(p, &partial);
            }
            eprintln!("reasoner error at step {step}: {source}");
            ExitCode::from(EXIT_REASONER)
        }
        Err(e) => config_error(e),
    }
}

fn cmd_matrix(args: MatrixArgs) -> ExitCode {
    let mut cfg = match build_config(&args.common) {
        Ok(c) => c,
        Err(e) => return config_error(e),
    };
    if let Some(w) = args.workers {
        cfg.workers = w;
    }
    // Here `--ablation` picks rows: the default plus one row per flag.
    if !args.common.ablations.is_empty() && cfg.variants.is_empty() {
        cfg.variants = std::iter::once(Variant::default_row())
            .chain(args.common.ablations.iter().map(|a| Variant::ablation(a).expect("validated in build_config")))
            .collect();
        cfg.ablations = Default::default();
    }
    let run = match run_matrix(&cfg) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    print!("{}", run.report.to_table());
    let report_path = args.report.or(cfg.output.report.clone());
    if let Some(p) = &report_path {
        let text = serde_json::to_string_pretty(&run.report).expect("report serializes");
        if let Err(e) = std::fs::write(p, text) {
            eprintln!("cannot write report {}: {e}", p.display());
            return ExitCode::from(EXIT_FAILURE);
        }
    }
    if let Some(dir) = args.transcript_dir.or(cfg.output.transcript_dir.clone()) {
        if let Err(e) = std::fs::create_dir_all(&dir) {
            eprintln!("cannot create {}: {e}", dir.display());
            return ExitCode::from(EXIT_FAILURE);
        }
        for ep in &run.episodes {
            let p = dir.join(format!("{}_{}_{}.jsonl", ep.label, ep.task, ep.seed));
            if let Err(e) = write_transcript(&p, &ep.transcript) {
                eprintln!("cannot write transcript {}: {e}", p.display());
                return ExitCode::from(EXIT_FAILURE);
            }
        }
    }
    let failed: Vec<_> = run.episodes.iter().filter(|e| e.error.is_some()).collect();
    for e in &failed {
        eprintln!("{} {} seed {}: {}", e.label, e.task, e.seed, e.error.as_deref().unwrap_or_default());
    }
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_REASONER)
    }
}

fn cmd_replay(path: &Path, json: bool) -> ExitCode {
    let transcript = match File::open(path).map_err(|e| e.to_string()).and_then(|f| {
        Transcript::read_jsonl(BufReader::new(f)).map_err(|e| e.to_string())
    }) {
        Ok(t) => t,
        Err(e) => return config_error(e),
    };
    let report = match replay(&transcript) {
        Ok(r) => r,
        Err(e) => return config_error(e),
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        println!(
            "recorded SS {} TD {:.3}; replayed SS {} TD {:.3}",
            report.recorded.simulation_steps,
            report.recorded.travel_distance,
            report.replayed.simulation_steps,
            report.replayed.travel_distance
        );
        match report.first_divergence() {
            None => println!("no divergence"),
            Some(d) => println!(
                "{} divergence(s); first at step {} agent {} field {}: recorded {} replayed {}",
                report.divergences.len(),
                d.step,
                d.agent.map(|a| a.to_string()).unwrap_or_else(|| "-".into()),
                d.field,
                d.recorded,
                d.replayed
            ),
        }
    }
    if report.is_clean() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_FAILURE)
    }
}

fn cmd_serve(addr: SocketAddr) -> ExitCode {
    let rt = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("cannot start runtime: {e}");
            return ExitCode::from(EXIT_FAILURE);
        }
    };
    eprintln!("serving sessions on http://{addr}");
    match rt.block_on(reveca_session::serve(addr)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("server error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Matrix(a) => cmd_matrix(a),
        Command::Replay { transcript, json } => cmd_replay(&transcript, json),
        Command::Serve { addr } => cmd_serve(addr),
    }
}
