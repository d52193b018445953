//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails. Everything runs on the oracle reasoner or
//! a loopback stub server; no network access is needed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use reveca::agent::AgentEvent;
use reveca::config::{Ablations, AgentConfig, TopK};
use reveca::executor::astar::{a_star, path_len};
use reveca::geometry::Cell;
use reveca::harness::scripted::{self, ALICE, CONTESTED};
use reveca::harness::{
    replay, run_episode, run_matrix, EpisodeOptions, EpisodeSpec, MatrixRun, RunConfig, Transcript, Variant,
};
use reveca::map::{Grid, RoomId};
use reveca::memory::{Ladder, ObservationRecord, RecordId, SkillKind};
use reveca::message::{MessageKind, MESSAGE_BUDGET};
use reveca::planning::{retrieve_top_k, ProximityBucket};
use reveca::reasoner::fixture::{load_fixtures, FixtureSink, RecordingTransport, ReplayTransport};
use reveca::reasoner::remote::{HttpTransport, RemoteConfig};
use reveca::reasoner::{LlmReasoner, OracleReasoner};
use reveca::scenario::TaskSpec;
use reveca::validation::{ValidationEvent, Verdict};
use reveca::world::{ObjectId, ObjectKind};

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<Duration, String> {
    let took = start.elapsed();
    ensure(took <= limit, || format!("took {took:.2?}, limit {limit:?}"))?;
    Ok(took)
}

// ---------------------------------------------------------------- retrieval

fn proximity_rank(b: ProximityBucket) -> u8 {
    match b {
        ProximityBucket::CloserThanAll => 3,
        ProximityBucket::Similar => 2,
        ProximityBucket::Unknown => 1,
        ProximityBucket::FartherThanSome => 0,
    }
}

fn random_record(rng: &mut ChaCha8Rng, id: u32, object: u32, ladder: Ladder) -> ObservationRecord {
    ObservationRecord {
        record_id: RecordId(id),
        object_id: ObjectId(object),
        object_name: format!("thing{object}"),
        kind: ObjectKind::Item,
        position: Cell::new(rng.gen_range(0..20), rng.gen_range(0..15)),
        room_id: RoomId(rng.gen_range(0..4)),
        room_name: "room".into(),
        available_action: Some(SkillKind::GoGrab),
        states: vec!["GRABBABLE".into()],
        container_id: None,
        holder: None,
        relevance: *ladder.levels().choose(rng).expect("ladder is nonempty"),
        // A narrow step range forces ties down to the object id.
        acquired_step: rng.gen_range(0..12),
        discarded: rng.gen_bool(0.1),
    }
}

fn retrieval_oracle() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let buckets = [
        ProximityBucket::CloserThanAll,
        ProximityBucket::Similar,
        ProximityBucket::Unknown,
        ProximityBucket::FartherThanSome,
    ];
    let mut cases = 0;
    for ladder in [Ladder::R3, Ladder::R4, Ladder::R5] {
        for k in 1..=4usize {
            for _ in 0..100 {
                let size = rng.gen_range(0..=200u32);
                let mut objects: Vec<u32> = (0..size * 2).collect();
                objects.shuffle(&mut rng);
                let records: Vec<ObservationRecord> =
                    (0..size).map(|i| random_record(&mut rng, i, objects[i as usize], ladder)).collect();
                let mut prox = BTreeMap::new();
                for r in &records {
                    // Leave some records without a bucket.
                    if rng.gen_bool(0.8) {
                        prox.insert(r.record_id, *buckets.choose(&mut rng).expect("nonempty"));
                    }
                }
                let got: Vec<ObjectId> = retrieve_top_k(&records, &prox, TopK::Finite(k)).iter().map(|r| r.object_id).collect();

                let bucket = |r: &ObservationRecord| prox.get(&r.record_id).copied().unwrap_or(ProximityBucket::Unknown);
                let mut all: Vec<&ObservationRecord> = records.iter().filter(|r| !r.discarded).collect();
                all.sort_by_key(|r| {
                    (
                        std::cmp::Reverse(r.relevance as u8),
                        std::cmp::Reverse(proximity_rank(bucket(r))),
                        std::cmp::Reverse(r.acquired_step),
                        r.object_id,
                    )
                });
                let want: Vec<ObjectId> = all.iter().take(k).map(|r| r.object_id).collect();
                ensure(got == want, || format!("ladder {ladder:?} k {k} size {size}: got {got:?}, want {want:?}"))?;
                cases += 1;
            }
        }
    }
    let took = within(start, Duration::from_secs(5))?;
    Ok(format!("{cases} random memories matched the full-sort prefix in {took:.2?}"))
}

// ---------------------------------------------------------------- A*

fn bfs(grid: &Grid, from: Cell, goal: Cell) -> Option<usize> {
    if !grid.is_open(from) || !grid.is_open(goal) {
        return None;
    }
    let mut dist = BTreeMap::from([(from, 0usize)]);
    let mut queue = VecDeque::from([from]);
    while let Some(c) = queue.pop_front() {
        if c == goal {
            return Some(dist[&c]);
        }
        let d = dist[&c];
        for n in c.neighbors() {
            if grid.is_open(n) && !dist.contains_key(&n) {
                dist.insert(n, d + 1);
                queue.push_back(n);
            }
        }
    }
    None
}

fn check_path(grid: &Grid, from: Cell, goal: Cell) -> Result<(), String> {
    let want = bfs(grid, from, goal);
    match (a_star(grid, from, &[goal]), want) {
        (Ok(path), Some(d)) => {
            ensure(path.first() == Some(&from) && path.last() == Some(&goal), || format!("{from}->{goal}: bad endpoints"))?;
            ensure(path.iter().all(|c| grid.is_open(*c)), || format!("{from}->{goal}: path crosses a wall"))?;
            ensure(path.windows(2).all(|w| w[0].manhattan(w[1]) == 1), || format!("{from}->{goal}: path jumps"))?;
            ensure(path_len(&path) == d, || format!("{from}->{goal}: a* {} vs bfs {d}", path_len(&path)))
        }
        (Err(_), None) => Ok(()),
        (Ok(p), None) => Err(format!("{from}->{goal}: a* found {} moves, bfs says unreachable", path_len(&p))),
        (Err(_), Some(d)) => Err(format!("{from}->{goal}: a* found nothing, bfs found {d}")),
    }
}

fn grid_from_mask(w: i32, h: i32, walls: impl Fn(Cell) -> bool) -> Grid {
    let mut g = Grid::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let c = Cell::new(x, y);
            g.set_open(c, !walls(c));
        }
    }
    g
}

fn astar_optimality() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut queries = 0usize;
    for _ in 0..100 {
        let density: f64 = rng.gen_range(0.0..=0.4);
        let walls: BTreeSet<Cell> =
            (0..20).flat_map(|y| (0..20).map(move |x| Cell::new(x, y))).filter(|_| rng.gen_bool(density)).collect();
        let grid = grid_from_mask(20, 20, |c| walls.contains(&c));
        let open: Vec<Cell> = grid.open_cells().collect();
        for _ in 0..20 {
            let (Some(a), Some(b)) = (open.choose(&mut rng), open.choose(&mut rng)) else { continue };
            check_path(&grid, *a, *b)?;
            queries += 1;
        }
    }
    // Every 5x5 map with at most two walls, plus 300 random 5x5 maps, each
    // over all ordered pairs of cells.
    let cells: Vec<Cell> = (0..5).flat_map(|y| (0..5).map(move |x| Cell::new(x, y))).collect();
    let mut maps: Vec<BTreeSet<Cell>> = vec![BTreeSet::new()];
    for (i, a) in cells.iter().enumerate() {
        maps.push(BTreeSet::from([*a]));
        for b in &cells[i + 1..] {
            maps.push(BTreeSet::from([*a, *b]));
        }
    }
    for _ in 0..300 {
        let density: f64 = rng.gen_range(0.0..=0.5);
        maps.push(cells.iter().copied().filter(|_| rng.gen_bool(density)).collect());
    }
    let small = maps.len();
    for walls in maps {
        let grid = grid_from_mask(5, 5, |c| walls.contains(&c));
        for a in &cells {
            for b in &cells {
                check_path(&grid, *a, *b)?;
                queries += 1;
            }
        }
    }
    let took = within(start, Duration::from_secs(10))?;
    Ok(format!("100 random 20x20 maps and {small} 5x5 maps, {queries} queries equal to BFS in {took:.2?}"))
}

// ---------------------------------------------------------------- validation

fn validation_soundness() -> Check {
    let start = Instant::now();
    let with = AgentConfig::default();
    let without = AgentConfig { ablations: Ablations::only("no_validation").map_err(|e| e.to_string())?, ..AgentConfig::default() };
    let target = format!("({})", CONTESTED);
    let (mut ss_with, mut ss_without) = (0.0, 0.0);
    let seeds = 50u64;
    for seed in 0..seeds {
        let a = scripted::run(seed, with, &mut OracleReasoner::new()).map_err(|e| format!("seed {seed}: {e}"))?;
        let verdicts: Vec<Verdict> = a
            .transcript
            .agent_events()
            .filter(|(_, agent, _)| *agent == ALICE)
            .filter_map(|(_, _, e)| match e {
                AgentEvent::Validation { detail: ValidationEvent::Outcome { plan, verdict, .. } } if plan.contains(&target) => {
                    Some(*verdict)
                }
                _ => None,
            })
            .collect();
        ensure(!verdicts.is_empty(), || format!("seed {seed}: no validation of the stale plan"))?;
        ensure(verdicts.iter().all(|v| *v == Verdict::FalsePlan), || format!("seed {seed}: verdicts {verdicts:?}"))?;
        ensure(a.metrics.success, || format!("seed {seed}: validated run failed"))?;
        let b = scripted::run(seed, without, &mut OracleReasoner::new()).map_err(|e| format!("seed {seed}: {e}"))?;
        ss_with += a.metrics.simulation_steps as f64;
        ss_without += b.metrics.simulation_steps as f64;
    }
    let (ss_with, ss_without) = (ss_with / seeds as f64, ss_without / seeds as f64);
    ensure(ss_without > ss_with, || format!("mean SS no_validation {ss_without:.2} not above default {ss_with:.2}"))?;
    let took = within(start, Duration::from_secs(60))?;
    Ok(format!("50/50 FalsePlan; mean SS default {ss_with:.2} < no_validation {ss_without:.2} in {took:.2?}"))
}

// ---------------------------------------------------------------- matrices

fn matrix(dummy_count: usize, variants: Vec<Variant>) -> Result<MatrixRun, String> {
    let cfg = RunConfig { dummy_count, variants, ..RunConfig::default() };
    run_matrix(&cfg).map_err(|e| e.to_string())
}

fn all_variants() -> Vec<Variant> {
    RunConfig::default().matrix_variants()
}

fn mean_ss(run: &MatrixRun, label: &str) -> Result<f64, String> {
    run.report.row(label).map(|r| r.mean_ss).ok_or_else(|| format!("no row {label}"))
}

fn ablation_directionality(noisy: &MatrixRun) -> Check {
    let d = mean_ss(noisy, "default")?;
    let p = mean_ss(noisy, "no_proximity")?;
    let r = mean_ss(noisy, "no_relevance")?;
    ensure(d < p, || format!("SS default {d:.2} not below no_proximity {p:.2}"))?;
    ensure(d < r, || format!("SS default {d:.2} not below no_relevance {r:.2}"))?;
    Ok(format!("mean SS default {d:.2} < no_proximity {p:.2}, default < no_relevance {r:.2}"))
}

fn noise_immunity(noisy: &MatrixRun) -> Check {
    let k = 3;
    let (mut calls, mut violations) = (0usize, 0usize);
    for ep in &noisy.episodes {
        for (_, _, e) in ep.transcript.agent_events() {
            if let AgentEvent::Retrieval { non_none_records, dummy_none_in_top_k, .. } = e {
                if *non_none_records >= k {
                    calls += 1;
                    if *dummy_none_in_top_k {
                        violations += 1;
                    }
                }
            }
        }
    }
    ensure(calls > 0, || "no retrieval call had K non-None records".into())?;
    ensure(violations == 0, || format!("{violations} of {calls} retrievals surfaced a None dummy"))?;
    Ok(format!("0 violations over {calls} retrievals with >= K non-None records"))
}

fn success_regression() -> Check {
    let start = Instant::now();
    let run = matrix(0, vec![Variant::default_row()])?;
    let n = run.episodes.len();
    ensure(n == 50, || format!("{n} episodes, expected 50"))?;
    for ep in &run.episodes {
        let m = ep.metrics.as_ref().ok_or_else(|| format!("{} seed {}: {:?}", ep.task, ep.seed, ep.error))?;
        ensure(m.success, || format!("{} seed {} failed", ep.task, ep.seed))?;
        ensure(m.simulation_steps <= 250, || format!("{} seed {}: SS {}", ep.task, ep.seed, m.simulation_steps))?;
    }
    let max = run.episodes.iter().filter_map(|e| e.metrics.as_ref()).map(|m| m.simulation_steps).max().unwrap_or(0);
    let took = within(start, Duration::from_secs(180))?;
    Ok(format!("50/50 succeeded, max SS {max}, in {took:.2?}"))
}

fn protocol(runs: &[&MatrixRun]) -> Check {
    let mut kinds = BTreeSet::new();
    let (mut episodes, mut messages, mut validations) = (0usize, 0usize, 0usize);
    for run in runs {
        for ep in &run.episodes {
            let t = &ep.transcript;
            let tag = || format!("{} {} seed {}", ep.label, ep.task, ep.seed);
            let n = t.header().ok_or_else(|| format!("{}: no header", tag()))?.agents.len();
            let ends = t.records.iter().filter(|r| matches!(r, reveca::harness::TranscriptRecord::End(_))).count();
            ensure(ends == 1, || format!("{}: {ends} end records", tag()))?;
            let end = t.end().expect("counted above");
            ensure(end.reason.is_some() && end.error.is_none(), || format!("{}: end {:?} {:?}", tag(), end.reason, end.error))?;
            for step in t.steps() {
                for a in &step.agents {
                    if let Some(m) = &a.request.message {
                        ensure(m.char_len() <= MESSAGE_BUDGET, || format!("{}: {}-char message", tag(), m.char_len()))?;
                        kinds.insert(m.kind);
                        messages += 1;
                    }
                }
            }
            for (_, _, e) in t.agent_events() {
                if let AgentEvent::Validation { detail: ValidationEvent::Outcome { queries_sent, .. } } = e {
                    ensure(*queries_sent < n, || format!("{}: {queries_sent} queries with {n} agents", tag()))?;
                    validations += 1;
                }
            }
            let report = replay(t).map_err(|e| format!("{}: replay {e}", tag()))?;
            ensure(report.is_clean(), || format!("{}: replay diverged at {:?}", tag(), report.first_divergence()))?;
            let (rec, rep) = (&report.recorded, &report.replayed);
            ensure(rec.simulation_steps == rep.simulation_steps, || format!("{}: SS differs on replay", tag()))?;
            ensure((rec.travel_distance - rep.travel_distance).abs() <= 1e-9, || format!("{}: TD differs on replay", tag()))?;
            episodes += 1;
        }
    }
    let all: BTreeSet<MessageKind> = MessageKind::ALL.into_iter().collect();
    ensure(kinds == all, || format!("message kinds seen {kinds:?}"))?;
    Ok(format!("{episodes} episodes, {messages} messages, {validations} validations; replay clean"))
}

fn determinism(first: &MatrixRun) -> Check {
    let second = matrix(0, all_variants())?;
    ensure(first.episodes.len() == second.episodes.len(), || "episode counts differ".into())?;
    let mut bytes = 0usize;
    for (a, b) in first.episodes.iter().zip(&second.episodes) {
        let (ta, tb) = (a.transcript.to_jsonl(), b.transcript.to_jsonl());
        ensure(ta == tb, || format!("{} {} seed {}: transcripts differ", a.label, a.task, a.seed))?;
        bytes += ta.len();
    }
    Ok(format!("{} transcripts ({bytes} bytes) identical across two runs", first.episodes.len()))
}

// ---------------------------------------------------------------- remote stub

type Responder = fn(&str) -> String;

/// Loopback chat-completions server: answers every request with the text
/// `respond` derives from the user prompt and keeps every request body.
struct Stub {
    addr: SocketAddr,
    hits: Arc<AtomicUsize>,
    bodies: Arc<Mutex<Vec<Value>>>,
}

impl Stub {
    fn start(respond: Responder) -> std::io::Result<Self> {
        let listener = TcpListener::bind("127.0.0.1:0")?;
        let addr = listener.local_addr()?;
        let hits = Arc::new(AtomicUsize::new(0));
        let bodies = Arc::new(Mutex::new(Vec::new()));
        let (h, b) = (hits.clone(), bodies.clone());
        std::thread::spawn(move || {
            for stream in listener.incoming().flatten() {
                if let Ok(body) = Self::serve(stream, respond) {
                    h.fetch_add(1, Ordering::SeqCst);
                    b.lock().unwrap().push(body);
                }
            }
        });
        Ok(Self { addr, hits, bodies })
    }

    fn serve(stream: TcpStream, respond: Responder) -> std::io::Result<Value> {
        let mut reader = BufReader::new(stream.try_clone()?);
        let mut len = 0usize;
        loop {
            let mut line = String::new();
            reader.read_line(&mut line)?;
            let line = line.trim_end();
            if line.is_empty() {
                break;
            }
            if let Some((k, v)) = line.split_once(':') {
                if k.eq_ignore_ascii_case("content-length") {
                    len = v.trim().parse().unwrap_or(0);
                }
            }
        }
        let mut raw = vec![0u8; len];
        reader.read_exact(&mut raw)?;
        let body: Value = serde_json::from_slice(&raw).unwrap_or(Value::Null);
        let prompt = body.pointer("/messages/1/content").and_then(Value::as_str).unwrap_or("");
        let reply = serde_json::json!({
            "id": "stub",
            "object": "chat.completion",
            "choices": [{"index": 0, "message": {"role": "assistant", "content": respond(prompt)}, "finish_reason": "stop"}],
        })
        .to_string();
        let mut out = stream;
        write!(
            out,
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{reply}",
            reply.len()
        )?;
        out.flush()?;
        Ok(body)
    }

    fn config(&self) -> RemoteConfig {
        RemoteConfig {
            endpoint: format!("http://{}/v1/chat/completions", self.addr),
            retries: 0,
            timeout_secs: 10,
            ..RemoteConfig::default()
        }
    }

    fn hits(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }

    fn bodies(&self) -> Vec<Value> {
        self.bodies.lock().unwrap().clone()
    }
}

/// A plausible model: delivers, then grabs, then checks, then explores; rates
/// wanted objects Strong.
fn sensible(prompt: &str) -> String {
    if let Some(opts) = prompt.split("Options:").nth(1) {
        let options: Vec<(&str, &str)> = opts
            .lines()
            .filter_map(|l| l.strip_prefix('['))
            .filter_map(|l| l.split_once(']'))
            .collect();
        let pick = ["[goput]", "[gograb]", "[gocheck]", "[goexplore]"]
            .iter()
            .find_map(|skill| options.iter().find(|(_, label)| label.contains(skill)))
            .or(options.first())
            .map_or("1", |(i, _)| *i);
        return format!("Reasoning: stub.\nAnswer: [{pick}]");
    }
    if prompt.contains("How likely") {
        return "Answer: [Low]".into();
    }
    let wanted = prompt.lines().find_map(|l| l.strip_prefix("Still to deliver:")).unwrap_or("");
    let name = prompt
        .lines()
        .find_map(|l| l.strip_prefix("Observed object: <"))
        .and_then(|l| l.split_once('>'))
        .map_or("", |(n, _)| n);
    if !name.is_empty() && wanted.contains(name) {
        "Answer: [Strong]".into()
    } else {
        "Answer: [None]".into()
    }
}

fn garbage(_: &str) -> String {
    "I would rather not say.".into()
}

/// Malformed on the first try, well-formed once reminded of the format.
fn needs_reminder(prompt: &str) -> String {
    if prompt.contains("FORMAT REMINDER") {
        sensible(prompt)
    } else {
        garbage(prompt)
    }
}

fn remote_spec() -> EpisodeSpec {
    let mut spec = EpisodeSpec::new("prepare_afternoon_tea", 4);
    spec.horizon = 60;
    spec.label = "remote".into();
    spec
}

fn plan_choices(t: &Transcript) -> Vec<bool> {
    t.agent_events()
        .filter_map(|(_, _, e)| match e {
            AgentEvent::PlanChosen { fallback, scripted: false, .. } => Some(*fallback),
            _ => None,
        })
        .collect()
}

fn remote_contract() -> Check {
    let start = Instant::now();
    let spec = remote_spec();

    // Request shape.
    let stub = Stub::start(sensible).map_err(|e| e.to_string())?;
    let cfg = stub.config();
    let mut live = LlmReasoner::new(HttpTransport::new(cfg.clone()));
    let first = run_episode(&spec, &mut live, EpisodeOptions::default()).map_err(|e| format!("live run: {e}"))?;
    let bodies = stub.bodies();
    ensure(!bodies.is_empty(), || "stub saw no requests".into())?;
    for b in &bodies {
        ensure(b["temperature"].as_f64() == Some(0.7), || format!("temperature {}", b["temperature"]))?;
        ensure(b["top_p"].as_f64() == Some(1.0), || format!("top_p {}", b["top_p"]))?;
        ensure(b["max_tokens"].as_u64() == Some(1024), || format!("max_tokens {}", b["max_tokens"]))?;
        ensure(b["messages"][0]["role"] == "system" && b["messages"][1]["role"] == "user", || "message roles".into())?;
        let prompt = b["messages"][1]["content"].as_str().unwrap_or("");
        ensure(prompt.contains("Goal:") || prompt.contains("How likely"), || format!("unrendered prompt {prompt:?}"))?;
    }
    ensure(live.transport().calls() == bodies.len(), || "transport and stub disagree on call count".into())?;
    ensure(plan_choices(&first.transcript).iter().all(|f| !f), || "fallback with well-formed replies".into())?;

    // Malformed once, then well-formed after the reminder: no fallback.
    let stub = Stub::start(needs_reminder).map_err(|e| e.to_string())?;
    let mut r = LlmReasoner::new(HttpTransport::new(stub.config()));
    let out = run_episode(&spec, &mut r, EpisodeOptions::default()).map_err(|e| format!("reminder run: {e}"))?;
    let bodies = stub.bodies();
    let reminded = bodies.iter().filter(|b| b["messages"][1]["content"].as_str().unwrap_or("").contains("FORMAT REMINDER")).count();
    ensure(reminded * 2 == bodies.len(), || format!("{reminded} reprompts for {} requests", bodies.len()))?;
    let choices = plan_choices(&out.transcript);
    ensure(!choices.is_empty() && choices.iter().all(|f| !f), || "reprompt did not recover the plan".into())?;

    // Always malformed: reprompt, then the rule-based fallback.
    let stub = Stub::start(garbage).map_err(|e| e.to_string())?;
    let mut r = LlmReasoner::new(HttpTransport::new(stub.config()));
    let out = run_episode(&spec, &mut r, EpisodeOptions::default()).map_err(|e| format!("garbage run: {e}"))?;
    let choices = plan_choices(&out.transcript);
    ensure(!choices.is_empty() && choices.iter().all(|f| *f), || "garbage replies did not fall back".into())?;
    let fallbacks = choices.len();

    // Record, then replay with the server unreachable in principle.
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("fixtures.jsonl");
    let stub = Stub::start(sensible).map_err(|e| e.to_string())?;
    let sink = FixtureSink::create(&path).map_err(|e| e.to_string())?;
    let mut rec = LlmReasoner::new(RecordingTransport::new(HttpTransport::new(stub.config()), sink));
    let recorded = run_episode(&spec, &mut rec, EpisodeOptions::default()).map_err(|e| format!("record run: {e}"))?;
    let live_calls = stub.hits();
    let entries = load_fixtures(&path).map_err(|e| e.to_string())?.len();
    ensure(entries == live_calls, || format!("{entries} fixtures for {live_calls} live calls"))?;
    let mut rep = LlmReasoner::new(ReplayTransport::open(&path).map_err(|e| e.to_string())?);
    let replayed = run_episode(&spec, &mut rep, EpisodeOptions::default()).map_err(|e| format!("replay run: {e}"))?;
    ensure(stub.hits() == live_calls, || format!("{} live calls during replay", stub.hits() - live_calls))?;
    ensure(rep.transport().served() == entries, || format!("served {} of {entries}", rep.transport().served()))?;
    ensure(recorded.transcript.to_jsonl() == replayed.transcript.to_jsonl(), || "replayed transcript differs".into())?;

    Ok(format!(
        "defaults 0.7/1/1024 on every request; reprompt recovers; {fallbacks} fallbacks on garbage; \
         {entries} fixtures replayed with 0 live calls in {:.2?}",
        start.elapsed()
    ))
}

// ---------------------------------------------------------------- main

fn report(name: &str, result: Check, failures: &mut usize) {
    match result {
        Ok(detail) => println!("PASS {name}: {detail}"),
        Err(why) => {
            *failures += 1;
            println!("FAIL {name}: {why}");
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters come through here too.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return;
    }
    assert_eq!(TaskSpec::builtin_names().len(), 5);
    let mut failures = 0;
    report("retrieval_oracle", retrieval_oracle(), &mut failures);
    report("astar_optimality", astar_optimality(), &mut failures);
    report("validation_soundness", validation_soundness(), &mut failures);

    let start = Instant::now();
    let noisy = matrix(20, all_variants());
    let noisy_took = start.elapsed();
    let clean = matrix(0, all_variants());
    match &noisy {
        Ok(run) => {
            let r = ablation_directionality(run).and_then(|d| {
                ensure(noisy_took <= Duration::from_secs(300), || format!("took {noisy_took:.2?}"))?;
                Ok(format!("{d} in {noisy_took:.2?}"))
            });
            report("ablation_directionality", r, &mut failures);
            report("noise_immunity", noise_immunity(run), &mut failures);
        }
        Err(e) => {
            report("ablation_directionality", Err(e.clone()), &mut failures);
            report("noise_immunity", Err(e.clone()), &mut failures);
        }
    }
    report("success_regression", success_regression(), &mut failures);
    match (&noisy, &clean) {
        (Ok(a), Ok(b)) => report("protocol_termination", protocol(&[a, b]), &mut failures),
        (Err(e), _) | (_, Err(e)) => report("protocol_termination", Err(e.clone()), &mut failures),
    }
    match &clean {
        Ok(run) => report("determinism", determinism(run), &mut failures),
        Err(e) => report("determinism", Err(e.clone()), &mut failures),
    }
    report("remote_contract", remote_contract(), &mut failures);

    if failures > 0 {
        println!("{failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
