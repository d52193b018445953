//! The four communication cases: trigger mapping, rendering under the
//! character budget, and inbound parsing into memory commands.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::map::Layout;
use crate::memory::CollaboratorUpdate;
use crate::message::{
    Answer, InitPayload, Message, MessageKind, Payload, QueryPayload, Recipients, ResponsePayload, MESSAGE_BUDGET,
};
use crate::reasoner::{Reasoner, RefineRequest};
use crate::world::{AgentId, ObjectId, ObjectSnapshot};

/// Upper bound on the encoded block of an initiation broadcast, leaving room
/// for the natural-language part.
pub const INIT_BLOCK_BUDGET: usize = 380;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommEvent {
    EpisodeStart,
    ValidationNeeded,
    ValidationQueryReceived,
    SubGoalCompleted,
    Moved,
    Observed,
    PlanChosen,
}

/// Maps an event to the message kind it triggers, if any.
pub fn should_communicate(event: &CommEvent) -> Option<(MessageKind, RecipientRule)> {
    match event {
        CommEvent::EpisodeStart => Some((MessageKind::InitBroadcast, RecipientRule::All)),
        CommEvent::ValidationNeeded => Some((MessageKind::ValidationQuery, RecipientRule::Single)),
        CommEvent::ValidationQueryReceived => Some((MessageKind::ValidationResponse, RecipientRule::Single)),
        CommEvent::SubGoalCompleted => Some((MessageKind::SubGoalAnnouncement, RecipientRule::All)),
        CommEvent::Moved | CommEvent::Observed | CommEvent::PlanChosen => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipientRule {
    All,
    Single,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommsError {
    #[error("payload needs {0} characters, over the {MESSAGE_BUDGET}-character budget")]
    MessageOverflow(usize),
}

fn object_ref(name: &str, id: ObjectId) -> String {
    format!("<{name}> ({id})")
}

/// Rule-based wording for a payload, without the trailing block.
pub fn draft_text(payload: &Payload, sender_name: &str, layout: &Layout, names: &dyn Fn(ObjectId) -> String) -> String {
    match payload {
        Payload::Init(p) => {
            let mut s = format!("Hi, I'm {sender_name}. I'm in the {} at {}.", layout.room_name(p.room), p.position);
            if !p.objects.is_empty() {
                let seen: Vec<String> = p.objects.iter().map(|o| object_ref(&o.object_name, o.object_id)).collect();
                s.push_str(&format!(" I see {}.", seen.join(", ")));
            }
            s
        }
        Payload::Query(p) => {
            let objs: Vec<String> = p.object_ids.iter().map(|id| object_ref(&names(*id), *id)).collect();
            format!(
                "I'm in the {} and about to go for {}. Did you already take it?",
                layout.room_name(p.room),
                objs.join(", ")
            )
        }
        Payload::Response(p) => {
            let objs: Vec<String> = p.object_ids.iter().map(|id| object_ref(&names(*id), *id)).collect();
            match p.answer {
                Answer::Confirm => format!("Yes, I already handled {}: {}.", objs.join(", "), p.history.join(", ")),
                Answer::Deny => format!("No, I have not touched {}.", objs.join(", ")),
            }
        }
        Payload::SubGoal(p) => format!(
            "I completed one of our subgoals, {} is now on {}.",
            object_ref(&p.object_name, p.object_id),
            object_ref(&p.location_name, p.location_id)
        ),
    }
}

fn assemble(natural: &str, block: &str) -> String {
    if natural.is_empty() {
        block.to_string()
    } else {
        format!("{natural} {block}")
    }
}

/// Renders a message. With `refine`, the reasoner paraphrases the draft; a
/// paraphrase that breaks the budget (or fails) falls back to the draft, and a
/// draft that still breaks it has only its natural-language part truncated.
pub fn render_message(
    payload: Payload,
    sender: AgentId,
    sender_name: &str,
    recipients: Recipients,
    layout: &Layout,
    names: &dyn Fn(ObjectId) -> String,
    refine: Option<&mut dyn Reasoner>,
) -> Result<Message, CommsError> {
    let block = payload.encode();
    let block_len = block.chars().count();
    if block_len > MESSAGE_BUDGET {
        return Err(CommsError::MessageOverflow(block_len));
    }
    let draft = draft_text(&payload, sender_name, layout, names);
    let mut text = assemble(&draft, &block);
    if let Some(r) = refine {
        let req = RefineRequest { kind: payload.kind(), sender_name: sender_name.to_string(), draft: draft.clone() };
        if let Ok(reply) = r.refine(&req) {
            let refined = assemble(reply.value.trim(), &block);
            if refined.chars().count() <= MESSAGE_BUDGET {
                text = refined;
            }
        }
    }
    if text.chars().count() > MESSAGE_BUDGET {
        let room = MESSAGE_BUDGET.saturating_sub(block_len + 1);
        let natural: String = draft.chars().take(room).collect();
        text = assemble(natural.trim_end(), &block);
    }
    Ok(Message { kind: payload.kind(), sender, recipients, text, payload, step: 0 })
}

/// Wraps caller-written text around a payload block, as a human teammate's
/// chat line. Unlike [`render_message`] nothing is truncated: text that
/// breaks the budget is an error.
pub fn verbatim_message(
    payload: Payload,
    sender: AgentId,
    recipients: Recipients,
    text: &str,
) -> Result<Message, CommsError> {
    let text = assemble(text.trim(), &payload.encode());
    let len = text.chars().count();
    if len > MESSAGE_BUDGET {
        return Err(CommsError::MessageOverflow(len));
    }
    Ok(Message { kind: payload.kind(), sender, recipients, text, payload, step: 0 })
}

/// Builds an initiation payload whose block fits [`INIT_BLOCK_BUDGET`],
/// keeping objects in the given priority order.
pub fn init_payload_within_budget(base: InitPayload) -> InitPayload {
    let InitPayload { room, position, objects } = base;
    let mut kept: Vec<ObjectSnapshot> = Vec::new();
    for o in objects {
        kept.push(o);
        let probe = Payload::Init(InitPayload { room, position, objects: kept.clone() });
        if probe.encode().chars().count() > INIT_BLOCK_BUDGET {
            kept.pop();
        }
    }
    InitPayload { room, position, objects: kept }
}

/// What a receiver should do with an inbound message.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum InboundCommand {
    Collaborator { sender: AgentId, update: CollaboratorUpdateWire },
    ObserveObjects { objects: Vec<ObjectSnapshot> },
    SubGoalDone { object_id: ObjectId, object_name: String, location_id: ObjectId },
    AnswerQuery { from: AgentId, object_ids: Vec<ObjectId> },
    QueryAnswered { from: AgentId, answer: Answer },
    ParseWarning { sender: AgentId, detail: String },
}

/// Serializable mirror of [`CollaboratorUpdate`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CollaboratorUpdateWire {
    pub text: String,
    pub said_at: u32,
    pub room: Option<crate::map::RoomId>,
    pub plans: Vec<String>,
}

impl From<CollaboratorUpdateWire> for CollaboratorUpdate {
    fn from(w: CollaboratorUpdateWire) -> Self {
        CollaboratorUpdate { text: w.text, said_at: w.said_at, room: w.room, plans: w.plans }
    }
}

/// Turns a delivered message into memory and protocol commands. The
/// structured payload is authoritative; a text block that disagrees with it
/// only produces a warning.
pub fn parse_inbound(message: &Message) -> Vec<InboundCommand> {
    let mut out = Vec::new();
    match message.payload_from_text() {
        Ok(p) if p == message.payload => {}
        Ok(_) => out.push(InboundCommand::ParseWarning {
            sender: message.sender,
            detail: "text block disagrees with payload".into(),
        }),
        Err(e) => out.push(InboundCommand::ParseWarning { sender: message.sender, detail: e.to_string() }),
    }
    let mut plans = Vec::new();
    match &message.payload {
        Payload::Init(p) => out.push(InboundCommand::ObserveObjects { objects: p.objects.clone() }),
        Payload::Query(QueryPayload { object_ids, .. }) => {
            out.push(InboundCommand::AnswerQuery { from: message.sender, object_ids: object_ids.clone() })
        }
        Payload::Response(ResponsePayload { answer, history, .. }) => {
            plans.extend(history.iter().cloned());
            out.push(InboundCommand::QueryAnswered { from: message.sender, answer: *answer });
        }
        Payload::SubGoal(p) => {
            plans.extend(p.plan_strings());
            out.push(InboundCommand::SubGoalDone {
                object_id: p.object_id,
                object_name: p.object_name.clone(),
                location_id: p.location_id,
            });
        }
    }
    out.insert(
        0,
        InboundCommand::Collaborator {
            sender: message.sender,
            update: CollaboratorUpdateWire {
                text: message.text.clone(),
                said_at: message.step,
                room: Some(message.payload.sender_room()),
                plans,
            },
        },
    );
    out
}
