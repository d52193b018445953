//! Message wire schema shared by agents, the kernel queue and the session
//! service.
//!
//! Every message carries natural-language text plus a structured payload.
//! The payload is also embedded at the end of the text as a compact
//! `[[...]]` block so that a reader holding only the text can recover it.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Cell;
use crate::map::RoomId;
use crate::world::{AgentId, ObjectId, ObjectKind, ObjectSnapshot, Step};

/// Maximum characters of message text.
pub const MESSAGE_BUDGET: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MessageKind {
    InitBroadcast,
    ValidationQuery,
    ValidationResponse,
    SubGoalAnnouncement,
}

impl MessageKind {
    pub const ALL: [MessageKind; 4] = [
        MessageKind::InitBroadcast,
        MessageKind::ValidationQuery,
        MessageKind::ValidationResponse,
        MessageKind::SubGoalAnnouncement,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipients {
    All,
    Agent(AgentId),
}

impl Recipients {
    pub fn includes(&self, id: AgentId) -> bool {
        match self {
            Recipients::All => true,
            Recipients::Agent(a) => *a == id,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Answer {
    Confirm,
    Deny,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InitPayload {
    pub room: RoomId,
    pub position: Cell,
    pub objects: Vec<ObjectSnapshot>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryPayload {
    pub room: RoomId,
    pub object_ids: Vec<ObjectId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResponsePayload {
    pub room: RoomId,
    pub object_ids: Vec<ObjectId>,
    pub answer: Answer,
    /// Completed-plan strings backing the answer.
    pub history: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubGoalPayload {
    pub room: RoomId,
    pub object_id: ObjectId,
    pub object_name: String,
    pub location_id: ObjectId,
    pub location_name: String,
}

impl SubGoalPayload {
    /// The plan strings this achievement stands for.
    pub fn plan_strings(&self) -> [String; 2] {
        [
            plan_string("gograb", &self.object_name, self.object_id),
            plan_string("goput", &self.location_name, self.location_id),
        ]
    }
}

/// `[skill] <name> (id)`, the completed-plan notation.
pub fn plan_string(skill: &str, name: &str, id: ObjectId) -> String {
    format!("[{skill}] <{name}> ({id})")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Init(InitPayload),
    Query(QueryPayload),
    Response(ResponsePayload),
    SubGoal(SubGoalPayload),
}

impl Payload {
    pub fn kind(&self) -> MessageKind {
        match self {
            Payload::Init(_) => MessageKind::InitBroadcast,
            Payload::Query(_) => MessageKind::ValidationQuery,
            Payload::Response(_) => MessageKind::ValidationResponse,
            Payload::SubGoal(_) => MessageKind::SubGoalAnnouncement,
        }
    }

    /// Room the sender reports being in.
    pub fn sender_room(&self) -> RoomId {
        match self {
            Payload::Init(p) => p.room,
            Payload::Query(p) => p.room,
            Payload::Response(p) => p.room,
            Payload::SubGoal(p) => p.room,
        }
    }

    /// Compact block embedded in message text.
    pub fn encode(&self) -> String {
        let body = match self {
            Payload::Init(p) => {
                let mut rooms: Vec<(RoomId, &str)> = p.objects.iter().map(|o| (o.room_id, o.room_name.as_str())).collect();
                rooms.sort();
                rooms.dedup();
                let names = rooms.iter().map(|(id, n)| format!("{id}:{n}")).collect::<Vec<_>>().join("+");
                let objs = p.objects.iter().map(encode_object).collect::<Vec<_>>().join(";");
                format!("I|r={}|p={},{}|n={}|o={}", p.room, p.position.x, p.position.y, names, objs)
            }
            Payload::Query(p) => format!("Q|r={}|o={}", p.room, join_ids(&p.object_ids)),
            Payload::Response(p) => format!(
                "R|r={}|o={}|a={}|h={}",
                p.room,
                join_ids(&p.object_ids),
                match p.answer {
                    Answer::Confirm => "C",
                    Answer::Deny => "D",
                },
                p.history.join("~")
            ),
            Payload::SubGoal(p) => format!(
                "S|r={}|o={},{}|g={},{}",
                p.room, p.object_id, p.object_name, p.location_id, p.location_name
            ),
        };
        format!("[[{body}]]")
    }

    /// Inverse of [`Payload::encode`]; accepts the block with or without brackets.
    pub fn decode(block: &str) -> Result<Payload, CodecError> {
        let body = block.strip_prefix("[[").and_then(|b| b.strip_suffix("]]")).unwrap_or(block);
        let mut parts = body.split('|');
        let tag = parts.next().ok_or(CodecError::Empty)?;
        let fields: Vec<(&str, &str)> = parts
            .map(|p| p.split_once('=').ok_or(CodecError::Field(p.to_string())))
            .collect::<Result<_, _>>()?;
        let get = |k: &str| -> Result<&str, CodecError> {
            fields.iter().find(|(key, _)| *key == k).map(|(_, v)| *v).ok_or(CodecError::Missing(k.to_string()))
        };
        let room = RoomId(parse_num(get("r")?)?);
        match tag {
            "I" => {
                let (x, y) = get("p")?.split_once(',').ok_or(CodecError::Field("p".into()))?;
                let mut names = Vec::new();
                for entry in get("n")?.split('+').filter(|s| !s.is_empty()) {
                    let (id, name) = entry.split_once(':').ok_or(CodecError::Field(entry.into()))?;
                    names.push((RoomId(parse_num(id)?), name.to_string()));
                }
                let objects = get("o")?
                    .split(';')
                    .filter(|s| !s.is_empty())
                    .map(|s| decode_object(s, &names))
                    .collect::<Result<_, _>>()?;
                Ok(Payload::Init(InitPayload { room, position: Cell::new(parse_int(x)?, parse_int(y)?), objects }))
            }
            "Q" => Ok(Payload::Query(QueryPayload { room, object_ids: split_ids(get("o")?)? })),
            "R" => {
                let answer = match get("a")? {
                    "C" => Answer::Confirm,
                    "D" => Answer::Deny,
                    other => return Err(CodecError::Field(other.into())),
                };
                let h = get("h")?;
                let history = if h.is_empty() { Vec::new() } else { h.split('~').map(str::to_string).collect() };
                Ok(Payload::Response(ResponsePayload { room, object_ids: split_ids(get("o")?)?, answer, history }))
            }
            "S" => {
                let (oid, oname) = get("o")?.split_once(',').ok_or(CodecError::Field("o".into()))?;
                let (gid, gname) = get("g")?.split_once(',').ok_or(CodecError::Field("g".into()))?;
                Ok(Payload::SubGoal(SubGoalPayload {
                    room,
                    object_id: ObjectId(parse_num(oid)?),
                    object_name: oname.to_string(),
                    location_id: ObjectId(parse_num(gid)?),
                    location_name: gname.to_string(),
                }))
            }
            other => Err(CodecError::UnknownTag(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("empty payload block")]
    Empty,
    #[error("no payload block in text")]
    NoBlock,
    #[error("unknown payload tag `{0}`")]
    UnknownTag(String),
    #[error("missing field `{0}`")]
    Missing(String),
    #[error("malformed field `{0}`")]
    Field(String),
}

fn parse_num(s: &str) -> Result<u32, CodecError> {
    s.parse().map_err(|_| CodecError::Field(s.to_string()))
}

fn parse_int(s: &str) -> Result<i32, CodecError> {
    s.parse().map_err(|_| CodecError::Field(s.to_string()))
}

fn join_ids(ids: &[ObjectId]) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join("+")
}

fn split_ids(s: &str) -> Result<Vec<ObjectId>, CodecError> {
    s.split('+').filter(|x| !x.is_empty()).map(|x| parse_num(x).map(ObjectId)).collect()
}

fn kind_code(kind: ObjectKind) -> char {
    match kind {
        ObjectKind::Item => 'i',
        ObjectKind::Container => 'c',
        ObjectKind::Surface => 's',
        ObjectKind::Decor => 'd',
    }
}

fn opt_id<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn encode_object(o: &ObjectSnapshot) -> String {
    format!(
        "{},{},{},{},{},{},{},{},{}",
        o.object_id,
        o.object_name,
        kind_code(o.kind),
        o.position.x,
        o.position.y,
        o.room_id,
        o.states.join("+"),
        opt_id(o.container_id),
        opt_id(o.holder)
    )
}

fn decode_object(s: &str, rooms: &[(RoomId, String)]) -> Result<ObjectSnapshot, CodecError> {
    let f: Vec<&str> = s.split(',').collect();
    let [id, name, kind, x, y, room, states, container, holder] = f[..] else {
        return Err(CodecError::Field(s.to_string()));
    };
    let kind = match kind {
        "i" => ObjectKind::Item,
        "c" => ObjectKind::Container,
        "s" => ObjectKind::Surface,
        "d" => ObjectKind::Decor,
        other => return Err(CodecError::Field(other.into())),
    };
    let room_id = RoomId(parse_num(room)?);
    let room_name = rooms
        .iter()
        .find(|(r, _)| *r == room_id)
        .map(|(_, n)| n.clone())
        .ok_or(CodecError::Missing(format!("room {room_id}")))?;
    let opt = |v: &str| -> Result<Option<u32>, CodecError> { if v == "-" { Ok(None) } else { parse_num(v).map(Some) } };
    Ok(ObjectSnapshot {
        object_id: ObjectId(parse_num(id)?),
        object_name: name.to_string(),
        kind,
        position: Cell::new(parse_int(x)?, parse_int(y)?),
        room_id,
        room_name,
        states: if states.is_empty() { Vec::new() } else { states.split('+').map(str::to_string).collect() },
        container_id: opt(container)?.map(ObjectId),
        holder: opt(holder)?.map(AgentId),
    })
}

/// Extracts the trailing payload block from message text.
pub fn extract_block(text: &str) -> Result<&str, CodecError> {
    let start = text.rfind("[[").ok_or(CodecError::NoBlock)?;
    let rest = &text[start..];
    let end = rest.find("]]").ok_or(CodecError::NoBlock)?;
    Ok(&rest[..end + 2])
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub kind: MessageKind,
    pub sender: AgentId,
    pub recipients: Recipients,
    pub text: String,
    pub payload: Payload,
    /// Step the message was sent; set by the kernel on enqueue.
    pub step: Step,
}

impl Message {
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    /// Payload recovered from the text block, for consistency checks.
    pub fn payload_from_text(&self) -> Result<Payload, CodecError> {
        Payload::decode(extract_block(&self.text)?)
    }
}
