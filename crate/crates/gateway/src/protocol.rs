//! WebSocket messages. Each text frame carries one JSON object with a
//! `type` field; see `docs/protocol.md` for the full grammar.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::trace::TraceEvent;
use harmonic_core::kb::Addressee;
use harmonic_core::types::AgentId;

/// Client to server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Utterance { sender: String, text: String },
    Pause {},
    Resume {},
    Step { n: u64 },
    SetSpeed { speed: f64 },
}

impl ClientMessage {
    pub fn name(&self) -> &'static str {
        match self {
            ClientMessage::Utterance { .. } => "utterance",
            ClientMessage::Pause {} => "pause",
            ClientMessage::Resume {} => "resume",
            ClientMessage::Step { .. } => "step",
            ClientMessage::SetSpeed { .. } => "set_speed",
        }
    }
}

/// Server to client.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Snapshot(Snapshot),
    Delta(Delta),
    TraceEvent {
        event: TraceEvent,
    },
    Ack {
        request: String,
        tick: u64,
    },
    Error {
        request: Option<String>,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatLine {
    pub utterance_id: String,
    pub tick: u64,
    pub speaker: AgentId,
    pub addressee: Addressee,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoomView {
    pub name: String,
    /// Inclusive cell bounds `[col, row]`.
    pub min: [i32; 2],
    pub max: [i32; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotView {
    pub id: AgentId,
    pub kind: String,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub altitude: f64,
    pub battery: f64,
    pub holding: Option<String>,
    pub active_command: Option<String>,
    pub safety_active: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectView {
    pub id: String,
    pub label: String,
    pub concept: String,
    pub x: f64,
    pub y: f64,
    pub held_by: Option<AgentId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanView {
    pub id: AgentId,
    pub name: String,
    pub x: f64,
    pub y: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalView {
    pub goal_id: String,
    pub concept: String,
    pub status: String,
    pub priority: f64,
    pub plan: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub scenario: String,
    pub seed: u64,
    pub tick: u64,
    pub paused: bool,
    pub speed: f64,
    pub finished: bool,
    pub cell_size: f64,
    /// Map rows, `.` free, `#` wall, `f` furniture.
    pub map: Vec<String>,
    pub rooms: Vec<RoomView>,
    pub robots: Vec<RobotView>,
    pub objects: Vec<ObjectView>,
    pub humans: Vec<HumanView>,
    pub chat: Vec<ChatLine>,
    pub agendas: BTreeMap<String, Vec<GoalView>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Delta {
    pub tick: u64,
    pub finished: bool,
    pub robots: Vec<RobotView>,
    pub objects: Vec<ObjectView>,
    /// Chat lines added this tick.
    pub chat: Vec<ChatLine>,
    pub agendas: BTreeMap<String, Vec<GoalView>>,
}
