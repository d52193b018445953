//! Plays a session in-process: the human seat wanders, says hello, and
//! watches what its teammate shares.
//!
//! `cargo run -p reveca-session --example session -- [seed]`

use reveca::world::Action;
use reveca_session::{HumanInput, Session, SessionConfig, SessionPhase};

fn main() {
    let seed = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(0);
    let mut s = Session::new("demo".into(), SessionConfig { seed, ..SessionConfig::default() }).expect("valid config");
    let snap = s.snapshot();
    println!("goal: {}", snap.goal_text);
    println!("I see {} objects in room {}", snap.observation.visible_objects.len(), snap.observation.room_id);

    let hello = s.submit(HumanInput { action: None, chat: Some("Hi, I'll look around here.".into()) }).unwrap();
    println!("step {}: sent {:?}", hello.snapshot.step, hello.chat.iter().map(|m| &m.text).collect::<Vec<_>>());

    // Oversized chat is refused without using a step.
    let err = s.submit(HumanInput { action: None, chat: Some("x".repeat(501)) }).unwrap_err();
    println!("501 chars: {err}");

    for i in 0..60 {
        if s.phase() == SessionPhase::Ended {
            break;
        }
        let snap = s.snapshot();
        let moves: Vec<&Action> = snap.legal_actions.iter().filter(|a| matches!(a, Action::Move { .. })).collect();
        let action = moves.get((i / 8) % moves.len().max(1)).map(|a| (*a).clone()).unwrap_or(Action::NoOp);
        let r = s.submit(HumanInput { action: Some(action), chat: None }).unwrap();
        for m in &r.chat {
            println!("step {}: {} says: {}", r.snapshot.step, m.sender, m.text);
        }
    }
    let snap = s.snapshot();
    println!(
        "after step {}: {} rooms known, {} objects remembered, outcome {:?}",
        snap.step,
        snap.known_rooms.len(),
        snap.remembered_objects.len(),
        snap.outcome
    );
}
