//! Run traces: one JSON header line, then one event per line.
//!
//! ```text
//! {"format":"harmonic-trace","version":1,"scenario":"lost_keys","seed":42,"robots":["drone-1","ugv-1"]}
//! {"tick":12,"robot":null,"kind":"chat","data":{...}}
//! ```
//!
//! The body (every line after the header) depends only on the scenario and
//! the seed.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use harmonic_core::types::AgentId;

pub const TRACE_FORMAT: &str = "harmonic-trace";
pub const TRACE_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceHeader {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
    pub robots: Vec<AgentId>,
}

impl TraceHeader {
    pub fn new(scenario: &str, seed: u64, robots: Vec<AgentId>) -> TraceHeader {
        TraceHeader {
            format: TRACE_FORMAT.into(),
            version: TRACE_VERSION,
            scenario: scenario.into(),
            seed,
            robots,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Something said on the team chat.
    Chat,
    /// Meaning of a chat utterance.
    Tmr,
    /// A chat utterance the analyzer could not read.
    AnalysisError,
    Vmr,
    Thought,
    Command,
    Report,
    Collision,
    Fault,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Chat => "chat",
            EventKind::Tmr => "tmr",
            EventKind::AnalysisError => "analysis_error",
            EventKind::Vmr => "vmr",
            EventKind::Thought => "thought",
            EventKind::Command => "command",
            EventKind::Report => "report",
            EventKind::Collision => "collision",
            EventKind::Fault => "fault",
        }
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EventKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        serde_json::from_value(serde_json::Value::String(s.into()))
            .map_err(|_| format!("unknown event kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub tick: u64,
    /// Robot the event belongs to; null for chat and world events.
    pub robot: Option<AgentId>,
    pub kind: EventKind,
    pub data: serde_json::Value,
}

impl TraceEvent {
    pub fn new(
        tick: u64,
        robot: Option<&AgentId>,
        kind: EventKind,
        data: impl Serialize,
    ) -> TraceEvent {
        TraceEvent {
            tick,
            robot: robot.cloned(),
            kind,
            data: serde_json::to_value(data).expect("trace data serializes"),
        }
    }

    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("trace event serializes")
    }
}

#[derive(Debug, Error)]
pub enum TraceParseError {
    #[error("trace line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("trace has no header")]
    MissingHeader,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: TraceHeader,
    pub events: Vec<TraceEvent>,
}

impl Trace {
    pub fn body(&self) -> String {
        self.events.iter().map(|e| e.to_line() + "\n").collect()
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(&self.header).expect("header serializes") + "\n" + &self.body()
    }

    /// Hex SHA-256 of the body.
    pub fn body_digest(&self) -> String {
        digest_hex(self.body().as_bytes())
    }

    pub fn parse(text: &str) -> Result<Trace, TraceParseError> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(TraceParseError::MissingHeader)?;
        let header: TraceHeader =
            serde_json::from_str(first).map_err(|e| TraceParseError::Line {
                line: 1,
                message: format!("bad header: {e}"),
            })?;
        let mut events = Vec::new();
        for (i, l) in lines {
            let e = serde_json::from_str(l).map_err(|e| TraceParseError::Line {
                line: i + 1,
                message: e.to_string(),
            })?;
            events.push(e);
        }
        Ok(Trace { header, events })
    }
}

pub fn digest_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let t = Trace {
            header: TraceHeader::new("s", 1, vec![AgentId::new("r")]),
            events: vec![TraceEvent::new(
                3,
                None,
                EventKind::AnalysisError,
                serde_json::json!({"x": 1}),
            )],
        };
        let text = t.to_text();
        assert!(text
            .lines()
            .nth(1)
            .unwrap()
            .contains("\"kind\":\"analysis_error\""));
        assert_eq!(Trace::parse(&text).unwrap(), t);
        assert_eq!(t.body_digest().len(), 64);
        assert!(Trace::parse("").is_err());
    }
}
