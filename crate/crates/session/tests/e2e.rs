//! Drives the session service over real HTTP and WebSocket connections.

use std::collections::{BTreeMap, BTreeSet};
use std::net::SocketAddr;

use futures::StreamExt;
use serde_json::{json, Value};
use tokio_tungstenite::tungstenite::Message as WsMessage;

use reveca::agent::RevecaAgent;
use reveca::config::AgentConfig;
use reveca::map::{MapSpec, RoomId};
use reveca::message::Message;
use reveca::reasoner::OracleReasoner;
use reveca::scenario::{spawn_scenario, Scenario, ScenarioRequest};
use reveca::world::{Action, AgentId, ObjectId};
use reveca_session::{router, AppState, HumanInput, SessionConfig, SessionPhase, Snapshot, StepResult};

const TASK: &str = "prepare_afternoon_tea";

async fn start() -> SocketAddr {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, router(AppState::default())).await.unwrap() });
    addr
}

fn scenario(seed: u64) -> Scenario {
    let req = ScenarioRequest { task: TASK.into(), seed, dummy_count: 0, agents: 2, horizon: 250 };
    spawn_scenario(&req, &MapSpec::house()).unwrap()
}

/// First seed whose goal has exactly three sub-goals.
fn three_subgoal_seed() -> u64 {
    (0..200).find(|s| scenario(*s).goal.total_count() == 3).expect("some seed has three sub-goals")
}

async fn create(client: &reqwest::Client, addr: SocketAddr, config: Value) -> String {
    let resp = client.post(format!("http://{addr}/sessions")).json(&config).send().await.unwrap();
    assert_eq!(resp.status(), 201);
    resp.json::<Value>().await.unwrap()["session_id"].as_str().unwrap().to_string()
}

async fn state(client: &reqwest::Client, addr: SocketAddr, id: &str) -> Snapshot {
    client.get(format!("http://{addr}/sessions/{id}/state")).send().await.unwrap().json().await.unwrap()
}

async fn submit(client: &reqwest::Client, addr: SocketAddr, id: &str, input: &HumanInput) -> reqwest::Response {
    client.post(format!("http://{addr}/sessions/{id}/action")).json(input).send().await.unwrap()
}

/// Keys that exist only in ground truth.
const HIDDEN_KEYS: [&str; 5] = ["is_dummy", "affinity", "distance_traveled", "rng_seed", "contents"];

fn keys(v: &Value, out: &mut BTreeSet<String>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                out.insert(k.clone());
                keys(v, out);
            }
        }
        Value::Array(a) => a.iter().for_each(|v| keys(v, out)),
        _ => {}
    }
}

/// What a client can check on its own: nothing appears that it was never shown.
#[derive(Default)]
struct ClientAudit {
    seen: BTreeSet<ObjectId>,
    rooms: BTreeSet<RoomId>,
}

impl ClientAudit {
    fn check(&mut self, snap: &Snapshot, human: AgentId) {
        let mut k = BTreeSet::new();
        keys(&serde_json::to_value(snap).unwrap(), &mut k);
        for hidden in HIDDEN_KEYS {
            assert!(!k.contains(hidden), "snapshot exposes `{hidden}`");
        }
        let obs = &snap.observation;
        assert_eq!(obs.observer_id, human);
        self.rooms.insert(obs.room_id);
        self.seen.extend(obs.visible_objects.iter().map(|o| o.object_id));
        for o in &obs.visible_objects {
            assert_eq!(o.room_id, obs.room_id, "object {} outside the current room", o.object_id);
        }
        for o in &snap.remembered_objects {
            assert!(self.seen.contains(&o.object_id), "remembered object {} was never visible", o.object_id);
        }
        for r in &snap.known_rooms {
            assert!(self.rooms.contains(&r.room_id), "room {} was never visited", r.room_name);
        }
        for m in &snap.chat {
            assert!(m.sender == human || m.recipients.includes(human), "chat not addressed to the human");
        }
    }
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn scripted_client_completes_three_subgoal_task() {
    let addr = start().await;
    let client = reqwest::Client::new();
    let seed = three_subgoal_seed();
    let id = create(&client, addr, json!({ "task": TASK, "seed": seed })).await;

    let (mut ws, _) = tokio_tungstenite::connect_async(format!("ws://{addr}/sessions/{id}/stream")).await.unwrap();
    let first: Value = match ws.next().await.unwrap().unwrap() {
        WsMessage::Text(t) => serde_json::from_str(&t).unwrap(),
        other => panic!("unexpected frame {other:?}"),
    };
    assert_eq!(first["type"], "snapshot");

    // The client plays the human seat with the same agent the team uses, fed
    // only what the service returns.
    let sc = scenario(seed);
    let human = AgentId(1);
    let roster: BTreeMap<AgentId, String> = sc.state.agents().iter().map(|a| (a.agent_id, a.name.clone())).collect();
    let mut me = RevecaAgent::new(human, &roster[&human], sc.goal.clone(), sc.state.layout_arc(), AgentConfig::default(), &roster);
    let mut reasoner = OracleReasoner::new();
    let mut audit = ClientAudit::default();

    let mut snap = state(&client, addr, &id).await;
    assert_eq!(first["snapshot"]["step"], snap.step);
    let mut inbox: Vec<Message> = Vec::new();
    let mut steps = 0;
    while snap.phase != SessionPhase::Ended {
        audit.check(&snap, human);
        let turn = me.act(&snap.observation, &inbox, &mut reasoner).unwrap();
        let mut action = turn.request.action;
        if !action.is_noop() && !snap.legal_actions.contains(&action) {
            action = Action::NoOp;
        }
        let resp = submit(&client, addr, &id, &HumanInput { action: Some(action), chat: None }).await;
        assert_eq!(resp.status(), 200);
        let result: StepResult = resp.json().await.unwrap();
        assert_eq!(result.snapshot.step, snap.step + 1);

        let frame: Value = match ws.next().await.unwrap().unwrap() {
            WsMessage::Text(t) => serde_json::from_str(&t).unwrap(),
            other => panic!("unexpected frame {other:?}"),
        };
        assert_eq!(frame["type"], "step_result");
        assert_eq!(frame["snapshot"]["step"], result.snapshot.step);

        inbox = result.chat.iter().filter(|m| m.sender != human).cloned().collect();
        snap = result.snapshot;
        steps += 1;
        assert!(steps <= 250, "session did not end within the horizon");
    }
    audit.check(&snap, human);
    let outcome = snap.outcome.expect("ended sessions report an outcome");
    assert!(outcome.success, "task failed: {outcome:?}");
    assert!(snap.legal_actions.is_empty());

    let resp = submit(&client, addr, &id, &HumanInput { action: Some(Action::NoOp), chat: None }).await;
    assert_eq!(resp.status(), 409);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn illegal_actions_never_advance() {
    let addr = start().await;
    let client = reqwest::Client::new();
    let id = create(&client, addr, json!({ "task": TASK, "seed": 2 })).await;
    let before = state(&client, addr, &id).await;

    let unknown = Action::Grasp { object: ObjectId(99_999) };
    let resp = submit(&client, addr, &id, &HumanInput { action: Some(unknown), chat: None }).await;
    assert_eq!(resp.status(), 422);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["error"], "illegal_action");
    assert!(body["legal_actions"].as_array().is_some_and(|a| !a.is_empty()));

    // A real object the human has not seen yet is refused the same way.
    let hidden = scenario(2)
        .state
        .objects()
        .iter()
        .map(|o| o.object_id)
        .find(|id| !before.remembered_objects.iter().any(|o| o.object_id == *id))
        .unwrap();
    let resp = submit(&client, addr, &id, &HumanInput { action: Some(Action::Open { object: hidden }), chat: None }).await;
    assert_eq!(resp.status(), 422);

    let resp = submit(&client, addr, &id, &HumanInput { action: None, chat: None }).await;
    assert_eq!(resp.status(), 422);

    let after = state(&client, addr, &id).await;
    assert_eq!(after.step, before.step);
    assert_eq!(after.observation, before.observation);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn chat_budget_blocks_501_chars() {
    let addr = start().await;
    let client = reqwest::Client::new();
    let id = create(&client, addr, json!({})).await;
    let before = state(&client, addr, &id).await;

    let long = "a".repeat(501);
    let resp = submit(&client, addr, &id, &HumanInput { action: None, chat: Some(long) }).await;
    assert_eq!(resp.status(), 422);
    let body: Value = resp.json().await.unwrap();
    assert_eq!(body["error"], "chat_too_long");
    assert_eq!(state(&client, addr, &id).await.step, before.step);

    let resp = submit(&client, addr, &id, &HumanInput { action: None, chat: Some("I'll check the kitchen.".into()) }).await;
    assert_eq!(resp.status(), 200);
    let result: StepResult = resp.json().await.unwrap();
    assert_eq!(result.snapshot.step, before.step + 1);
    let mine: Vec<&Message> = result.chat.iter().filter(|m| m.sender == before.human_agent).collect();
    assert_eq!(mine.len(), 1);
    assert!(mine[0].text.starts_with("I'll check the kitchen."));
    assert!(mine[0].char_len() <= 500);
}

#[tokio::test(flavor = "multi_thread", worker_threads = 2)]
async fn routing_errors() {
    let addr = start().await;
    let client = reqwest::Client::new();
    let resp = client.get(format!("http://{addr}/sessions/nope/state")).send().await.unwrap();
    assert_eq!(resp.status(), 404);
    let resp = submit(&client, addr, "nope", &HumanInput { action: Some(Action::NoOp), chat: None }).await;
    assert_eq!(resp.status(), 404);
    let resp = client.post(format!("http://{addr}/sessions")).json(&json!({ "task": "juggling" })).send().await.unwrap();
    assert_eq!(resp.status(), 400);
    let resp = client.post(format!("http://{addr}/sessions")).json(&json!({ "human_agent": 7 })).send().await.unwrap();
    assert_eq!(resp.status(), 400);

    let a = create(&client, addr, json!({})).await;
    let b = create(&client, addr, json!({})).await;
    assert_ne!(a, b);
}

/// Ground-truth audit: every snapshot field is derivable from what the human
/// has observed so far.
#[test]
fn information_parity_against_ground_truth() {
    use reveca_session::Session;
    for seed in 0..4 {
        let config = SessionConfig { seed, dummy_count: 10, ..SessionConfig::default() };
        let mut s = Session::new("audit".into(), config).unwrap();
        let human = s.human();
        let mut ever_visible: BTreeSet<ObjectId> = BTreeSet::new();
        let mut visited: BTreeSet<RoomId> = BTreeSet::new();
        let mut leaks = Vec::new();
        for step in 0..120u32 {
            let snap = s.snapshot();
            let world = s.world();
            let me = world.agent(human).unwrap();
            let room = world.layout().room_of(me.position).unwrap();
            visited.insert(room);
            assert_eq!(snap.observation.position, me.position);
            assert_eq!(snap.observation.held_object_ids, me.held_object_ids);
            for o in &snap.observation.visible_objects {
                let truth = world.object(o.object_id).unwrap();
                if world.room_of_object(truth) != Some(room) {
                    leaks.push(format!("step {step}: {} is not in the human's room", o.object_id));
                }
                let hidden = world
                    .objects()
                    .iter()
                    .any(|c| c.contents.contains(&o.object_id) && c.states().iter().any(|st| st == "CLOSED"));
                if hidden {
                    leaks.push(format!("step {step}: {} is inside a closed container", o.object_id));
                }
                ever_visible.insert(o.object_id);
            }
            for c in &snap.observation.visible_collaborators {
                let pos = world.agent(c.agent_id).unwrap().position;
                if world.layout().room_of(pos) != Some(room) {
                    leaks.push(format!("step {step}: agent {} seen from another room", c.agent_id));
                }
            }
            for o in &snap.remembered_objects {
                if !ever_visible.contains(&o.object_id) {
                    leaks.push(format!("step {step}: remembers unseen {}", o.object_id));
                }
            }
            for r in &snap.known_rooms {
                if !visited.contains(&r.room_id) {
                    leaks.push(format!("step {step}: knows unvisited room {}", r.room_name));
                }
            }
            for a in &snap.legal_actions {
                if let Action::Open { object } | Action::Close { object } | Action::Grasp { object } | Action::Put { target: object, .. } = a {
                    if !ever_visible.contains(object) {
                        leaks.push(format!("step {step}: legal action names unseen {object}"));
                    }
                }
            }
            if s.phase() == SessionPhase::Ended {
                break;
            }
            // Wander: cycle through legal moves so several rooms get visited.
            let moves: Vec<Action> = snap.legal_actions.iter().filter(|a| matches!(a, Action::Move { .. })).cloned().collect();
            let action = moves.get((step as usize / 6) % moves.len().max(1)).cloned().unwrap_or(Action::NoOp);
            s.submit(HumanInput { action: Some(action), chat: None }).unwrap();
        }
        assert!(leaks.is_empty(), "seed {seed}: {leaks:#?}");
    }
}
