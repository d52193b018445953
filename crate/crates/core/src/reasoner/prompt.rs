//! Prompt templates and the bracketed choice-token reply grammar.
//!
//! Rendering is a pure function of the request: no clocks, no randomness.

use std::fmt::Write;

use super::{RefineRequest, RelevanceRequest, RequestKind, TrajectoryRequest};
use crate::memory::{Ladder, Relevance};
use crate::planning::PlanContext;
use crate::validation::Likelihood;

pub const COT_INSTRUCTION: &str = "Let's think step by step.";

fn cot_tail(out: &mut String, cot: bool, answer_hint: &str) {
    if cot {
        let _ = writeln!(out, "Reason briefly, then finish with a line of the form `Answer: {answer_hint}`.");
        out.push_str(COT_INSTRUCTION);
    } else {
        let _ = write!(out, "Reply with a single line of the form `Answer: {answer_hint}`.");
    }
}

fn ladder_tokens(ladder: Ladder) -> String {
    ladder.levels().iter().rev().map(|r| format!("[{}]", r.label())).collect::<Vec<_>>().join(", ")
}

pub fn render_relevance(req: &RelevanceRequest) -> String {
    let o = &req.object;
    let mut out = String::new();
    let _ = writeln!(out, "You are a household agent estimating how relevant an object is to a shared goal.");
    let _ = writeln!(out, "Goal: {}", req.goal_text);
    let remaining: Vec<String> = req.remaining.iter().map(|(n, c)| format!("{c} {n}")).collect();
    let _ = writeln!(out, "Still to deliver: {}", if remaining.is_empty() { "nothing".into() } else { remaining.join(", ") });
    let unfound: Vec<&str> = req.unfound.iter().map(String::as_str).collect();
    let _ = writeln!(out, "Not yet located: {}", if unfound.is_empty() { "nothing".into() } else { unfound.join(", ") });
    let _ = writeln!(out, "Observed object: <{}> ({}) in the {}", o.object_name, o.object_id, o.room_name);
    let _ = writeln!(out, "  states: {}", o.states.join(", "));
    if let Some(c) = o.container_id {
        let _ = writeln!(out, "  inside or on: ({c})");
    }
    if let Some(h) = o.holder {
        let _ = writeln!(out, "  held by agent {h}");
    }
    if !req.container_hints.is_empty() {
        let _ = writeln!(out, "  usually holds: {}", req.container_hints.join(", "));
    }
    let _ = writeln!(out, "Choose one relevance level from {}.", ladder_tokens(req.ladder));
    cot_tail(&mut out, req.cot, "[Level]");
    out
}

pub fn render_plan(ctx: &PlanContext, repair: Option<&str>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "You are {}, a household agent cooperating with others.", ctx.agent_name);
    let _ = writeln!(out, "Goal: {}", ctx.goal_text);
    let _ = writeln!(out, "Current step: {}", ctx.step);
    let _ = writeln!(out, "I am at {} in the {}.", ctx.position, ctx.room_name);
    if ctx.held.is_empty() {
        let _ = writeln!(out, "I am holding nothing.");
    } else {
        let held: Vec<String> = ctx.held.iter().map(|(id, n)| format!("<{n}> ({id})")).collect();
        let _ = writeln!(out, "I am holding {}.", held.join(" and "));
    }
    let _ = writeln!(
        out,
        "My completed plans: {}",
        if ctx.completed_plans.is_empty() { "none".into() } else { ctx.completed_plans.join(", ") }
    );
    let needed: Vec<String> = ctx.needed.iter().map(|(n, c)| format!("{c} {n}")).collect();
    let _ = writeln!(out, "Still needed: {}", if needed.is_empty() { "nothing".into() } else { needed.join(", ") });
    if ctx.records.is_empty() {
        let _ = writeln!(out, "I have no useful information yet; choose a [goexplore] option.");
    } else {
        let _ = writeln!(out, "Most relevant information:");
        for r in &ctx.records {
            let rec = &r.record;
            let _ = write!(
                out,
                "- <{}> ({}) in the {} at {}, relevance {}",
                rec.object_name, rec.object_id, rec.room_name, rec.position, rec.relevance
            );
            if let Some(p) = &r.proximity {
                let _ = write!(out, ". {}", p.rendered);
            }
            out.push('\n');
        }
    }
    let _ = writeln!(out, "Rooms:");
    for room in &ctx.rooms {
        let _ = write!(
            out,
            "- {} ({}): {}",
            room.room_name,
            room.room_id,
            if room.explored { "explored" } else { "unexplored" }
        );
        if let Some(p) = &room.proximity {
            let _ = write!(out, ". {}", p.rendered);
        }
        out.push('\n');
    }
    if ctx.show_other_info && !ctx.collaborators.is_empty() {
        let _ = writeln!(out, "Collaborators:");
        for c in &ctx.collaborators {
            let _ = writeln!(
                out,
                "- {} last known in the {}, holding {:?}, completed {}",
                c.name,
                c.room.as_deref().unwrap_or("unknown room"),
                c.held_object_ids.iter().map(|i| i.0).collect::<Vec<_>>(),
                if c.completed_plans.is_empty() { "nothing".into() } else { c.completed_plans.join(", ") }
            );
        }
    }
    let _ = writeln!(out, "Options:");
    for o in &ctx.options {
        let _ = writeln!(out, "[{}] {}", o.index, o.label());
    }
    if let Some(why) = repair {
        let _ = writeln!(out, "Your previous answer was rejected: {why}. Pick a number from the list above.");
    }
    cot_tail(&mut out, ctx.cot, "[number]");
    out
}

pub fn render_trajectory(req: &TrajectoryRequest) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "Between step {} and step {} I did not see <{}> ({}) in the {}.",
        req.alpha, req.beta, req.target_name, req.target_object, req.target_room_name
    );
    let _ = writeln!(out, "Infer where {} went during that window.", req.collaborator_name);
    if req.evidence.is_empty() {
        let _ = writeln!(out, "I have no evidence of {}'s whereabouts.", req.collaborator_name);
    }
    for e in &req.evidence {
        let _ = writeln!(
            out,
            "- step {}: {} in the {} ({})",
            e.step,
            if e.observed { "seen" } else { "said they were" },
            e.room_name,
            if e.in_window { "inside the window" } else { "before the window" }
        );
    }
    for l in &req.conversation {
        let _ = writeln!(out, "- step {} said: {}", l.step, l.message);
    }
    if req.observed_holding_target {
        let _ = writeln!(out, "{} was seen holding <{}>.", req.collaborator_name, req.target_name);
    }
    let _ = writeln!(
        out,
        "How likely is it that {} already interacted with <{}> ({})? Choose from [High], [Medium], [Low], [None].",
        req.collaborator_name, req.target_name, req.target_object
    );
    cot_tail(&mut out, req.cot, "[Level]");
    out
}

pub fn render_refine(req: &RefineRequest) -> String {
    format!(
        "You are {}. Rewrite this message to your teammates so it reads naturally. Keep every object name, id and room. \
         Stay under 300 characters and reply with the message only.\nMessage: {}",
        req.sender_name, req.draft
    )
}

pub fn format_reminder(kind: RequestKind) -> &'static str {
    match kind {
        RequestKind::Relevance | RequestKind::Trajectory => {
            "FORMAT REMINDER: end your reply with `Answer: [Level]` using one of the bracketed levels offered."
        }
        RequestKind::Plan => "FORMAT REMINDER: end your reply with `Answer: [number]` using one of the listed option numbers.",
        RequestKind::Refine => "FORMAT REMINDER: reply with the rewritten message text only.",
    }
}

/// Bracketed tokens in order of appearance.
pub fn bracket_tokens(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find('[') {
        let after = &rest[start + 1..];
        match after.find(']') {
            Some(end) => {
                out.push(after[..end].trim());
                rest = &after[end + 1..];
            }
            None => break,
        }
    }
    out
}

/// Tokens after the last `Answer:` marker, or all tokens if there is none.
fn answer_tokens(text: &str) -> Vec<&str> {
    let tail = text.rfind("Answer:").map_or(text, |i| &text[i..]);
    let toks = bracket_tokens(tail);
    if toks.is_empty() {
        bracket_tokens(text)
    } else {
        toks
    }
}

pub fn parse_relevance(text: &str, ladder: Ladder) -> Option<Relevance> {
    answer_tokens(text).into_iter().rev().find_map(|t| t.parse::<Relevance>().ok().filter(|r| ladder.contains(*r)))
}

pub fn parse_choice(text: &str) -> Option<usize> {
    answer_tokens(text).into_iter().rev().find_map(|t| t.parse::<usize>().ok())
}

pub fn parse_likelihood(text: &str) -> Option<Likelihood> {
    answer_tokens(text).into_iter().rev().find_map(|t| t.parse::<Likelihood>().ok())
}

pub fn parse_refined(text: &str) -> Option<String> {
    let t = text.trim();
    let t = t.strip_prefix("Message:").map_or(t, str::trim);
    (!t.is_empty()).then(|| t.to_string())
}
