//! Knowledge substrate and language processing: ontology, lexicon, team
//! profiles, utterance analysis into TMRs, percept interpretation into VMRs,
//! and template generation.
//!
//! A [`Kb`] is immutable once loaded and is shared by every robot.

mod analyze;
mod generate;
pub mod lexicon;
pub mod ontology;
mod percept;
pub mod profiles;
pub(crate) mod text;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::{AgentId, Point};

pub use analyze::{analyze, AnalysisError};
pub use generate::{generate, generate_thought, GenerateError};
pub use lexicon::{LexEntry, Lexicon, Pos, Slot, SlotPos, Template};
pub use ontology::{Concept, FillerType, Ontology, ROOT};
pub use percept::{interpret_percept, Frame, PerceptOutcome, CONFIDENCE_FLOOR};
pub use profiles::{AgentKind, AgentProfile};

/// A KB file failed to parse or cross-validate.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{file}:{line}: `{entry}`: {message}")]
pub struct KbValidationError {
    /// Which file: `ontology`, `lexicon` or `profiles` (or a path on I/O failure).
    pub file: String,
    /// 1-based; 0 when the problem is not tied to one line.
    pub line: usize,
    pub entry: String,
    pub message: String,
}

impl KbValidationError {
    pub fn new(file: &str, line: usize, entry: &str, message: impl Into<String>) -> Self {
        KbValidationError {
            file: file.to_string(),
            line,
            entry: entry.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpeechAct {
    #[serde(rename = "REQUEST-ACTION")]
    RequestAction,
    #[serde(rename = "REQUEST-INFO")]
    RequestInfo,
    #[serde(rename = "INFORM")]
    Inform,
    #[serde(rename = "ACK")]
    Ack,
}

impl SpeechAct {
    pub fn as_str(&self) -> &'static str {
        match self {
            SpeechAct::RequestAction => "REQUEST-ACTION",
            SpeechAct::RequestInfo => "REQUEST-INFO",
            SpeechAct::Inform => "INFORM",
            SpeechAct::Ack => "ACK",
        }
    }
}

impl fmt::Display for SpeechAct {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SpeechAct {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "REQUEST-ACTION" => SpeechAct::RequestAction,
            "REQUEST-INFO" => SpeechAct::RequestInfo,
            "INFORM" => SpeechAct::Inform,
            "ACK" => SpeechAct::Ack,
            other => return Err(format!("unknown speech act `{other}`")),
        })
    }
}

/// Value bound to a TMR role.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Filler {
    Concept(String),
    Agent(AgentId),
    /// The whole team.
    Team,
}

impl Filler {
    pub fn concept(&self) -> Option<&str> {
        match self {
            Filler::Concept(c) => Some(c),
            _ => None,
        }
    }
}

/// Who an utterance is for. Serialized as the agent id, or `TEAM`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", from = "String")]
pub enum Addressee {
    Team,
    Agent(AgentId),
}

impl From<Addressee> for String {
    fn from(a: Addressee) -> String {
        match a {
            Addressee::Team => "TEAM".to_string(),
            Addressee::Agent(id) => id.0,
        }
    }
}

impl From<String> for Addressee {
    fn from(s: String) -> Addressee {
        if s == "TEAM" {
            Addressee::Team
        } else {
            Addressee::Agent(AgentId(s))
        }
    }
}

impl Addressee {
    pub fn includes(&self, agent: &AgentId) -> bool {
        match self {
            Addressee::Team => true,
            Addressee::Agent(a) => a == agent,
        }
    }
}

/// Text meaning representation of one utterance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tmr {
    pub tmr_id: String,
    pub speech_act: SpeechAct,
    pub head: String,
    pub bindings: BTreeMap<String, Filler>,
    pub speaker: AgentId,
    pub addressee: Addressee,
    pub source_text: String,
    pub tick: u64,
}

impl Tmr {
    /// A TMR with no id, text or tick yet; the gateway stamps those.
    pub fn new(
        speech_act: SpeechAct,
        head: impl Into<String>,
        speaker: AgentId,
        addressee: Addressee,
    ) -> Tmr {
        Tmr {
            tmr_id: String::new(),
            speech_act,
            head: head.into(),
            bindings: BTreeMap::new(),
            speaker,
            addressee,
            source_text: String::new(),
            tick: 0,
        }
    }

    pub fn with(mut self, role: &str, filler: Filler) -> Tmr {
        self.bindings.insert(role.to_string(), filler);
        self
    }

    pub fn theme(&self) -> Option<&Filler> {
        self.bindings.get("theme")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmrObject {
    pub instance_id: String,
    pub concept: String,
    pub position: Point,
    pub confidence: f64,
}

/// Visual meaning representation: what one robot saw on one tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Vmr {
    pub vmr_id: String,
    pub robot_id: AgentId,
    pub objects: Vec<VmrObject>,
    pub tick: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Kb {
    pub ontology: Ontology,
    pub lexicon: Lexicon,
    profiles: BTreeMap<AgentId, AgentProfile>,
}

/// Load and cross-validate the three KB files.
pub fn load_kb(
    ontology: impl AsRef<Path>,
    lexicon: impl AsRef<Path>,
    profiles: impl AsRef<Path>,
) -> Result<Kb, KbValidationError> {
    let read = |p: &Path| {
        std::fs::read_to_string(p)
            .map_err(|e| KbValidationError::new(&p.display().to_string(), 0, "", e.to_string()))
    };
    Kb::from_texts(
        &read(ontology.as_ref())?,
        &read(lexicon.as_ref())?,
        &read(profiles.as_ref())?,
    )
}

impl Kb {
    pub fn from_texts(
        ontology: &str,
        lexicon: &str,
        profiles: &str,
    ) -> Result<Kb, KbValidationError> {
        let ontology = Ontology::parse(ontology)?;
        let lexicon = Lexicon::parse(lexicon, &ontology)?;
        let profiles = profiles::parse(profiles, &ontology)?;
        Ok(Kb {
            ontology,
            lexicon,
            profiles,
        })
    }

    pub fn profile(&self, id: &AgentId) -> Option<&AgentProfile> {
        self.profiles.get(id)
    }

    pub fn profiles(&self) -> impl Iterator<Item = &AgentProfile> {
        self.profiles.values()
    }

    /// Agent whose id or display name is `word`, case-insensitively.
    pub fn agent_named(&self, word: &str) -> Option<&AgentProfile> {
        self.profiles.values().find(|p| {
            p.agent_id.as_str().eq_ignore_ascii_case(word) || p.name.eq_ignore_ascii_case(word)
        })
    }

    /// Name used when talking about `id`; the id itself for strangers.
    pub fn display_name(&self, id: &AgentId) -> String {
        self.profile(id)
            .map(|p| p.name.clone())
            .unwrap_or_else(|| id.to_string())
    }

    /// Check a TMR against the ontology: known head, every role declared on
    /// it, concept fillers satisfying the role's constraint.
    pub fn validate_tmr(&self, tmr: &Tmr) -> Result<(), String> {
        if !self.ontology.contains(&tmr.head) {
            return Err(format!("unknown head concept {}", tmr.head));
        }
        for (role, filler) in &tmr.bindings {
            let Some(constraint) = self.ontology.property(&tmr.head, role) else {
                return Err(format!("{role} is not a role of {}", tmr.head));
            };
            if !self.filler_fits(filler, constraint) {
                return Err(format!("{role} of {} cannot be {filler:?}", tmr.head));
            }
        }
        Ok(())
    }

    /// Ontology concept standing for an agent: its kind concept.
    pub fn agent_concept(&self, id: &AgentId) -> Option<&'static str> {
        self.profile(id).map(|p| p.kind.concept())
    }

    pub fn filler_fits(&self, filler: &Filler, constraint: &FillerType) -> bool {
        match (filler, constraint) {
            (Filler::Concept(c), FillerType::Concept(want)) => self.ontology.is_a(c, want),
            (Filler::Agent(_) | Filler::Team, FillerType::Agent) => true,
            (Filler::Agent(a), FillerType::Concept(want)) => self
                .agent_concept(a)
                .is_some_and(|c| self.ontology.is_a(c, want)),
            (Filler::Team, FillerType::Concept(want)) => self.ontology.is_a("TEAM-GROUP", want),
            _ => false,
        }
    }

    /// Ontology concept for a room name: upper case, spaces and underscores
    /// become dashes.
    pub fn room_concept(room: &str) -> String {
        room.to_ascii_uppercase().replace([' ', '_'], "-")
    }
}
