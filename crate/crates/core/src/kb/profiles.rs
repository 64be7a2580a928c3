//! Team member profiles.
//!
//! ```text
//! agent danny
//!   kind human
//!   name Danny
//!   role requester
//!   pref priority 0.8
//!   state location living-room
//! agent ugv-1
//!   kind ugv
//!   skills MOVE-TO SEARCH-AREA PICK-UP
//! ```

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::ontology::Ontology;
use super::text::blocks;
use super::KbValidationError;
use crate::types::AgentId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AgentKind {
    Human,
    #[serde(rename = "UGV")]
    Ugv,
    Drone,
}

impl AgentKind {
    /// Ontology concept for this kind of agent.
    pub fn concept(&self) -> &'static str {
        match self {
            AgentKind::Human => "HUMAN",
            AgentKind::Ugv => "UGV",
            AgentKind::Drone => "DRONE",
        }
    }

    pub fn is_robot(&self) -> bool {
        !matches!(self, AgentKind::Human)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AgentKind::Human => "human",
            AgentKind::Ugv => "ugv",
            AgentKind::Drone => "drone",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentProfile {
    pub agent_id: AgentId,
    pub kind: AgentKind,
    /// Display name; defaults to the id.
    pub name: String,
    pub team_role: String,
    pub skills: Vec<String>,
    /// Weights in [0, 1], e.g. `priority`.
    pub preferences: BTreeMap<String, f64>,
    pub state: BTreeMap<String, String>,
}

impl AgentProfile {
    /// Requester priority weight; 0.5 when the profile does not say.
    pub fn priority(&self) -> f64 {
        self.preferences.get("priority").copied().unwrap_or(0.5)
    }

    pub fn has_skill(&self, concept: &str) -> bool {
        self.skills.iter().any(|s| s == concept)
    }
}

fn err(line: usize, entry: &str, message: impl Into<String>) -> KbValidationError {
    KbValidationError::new("profiles", line, entry, message)
}

pub(crate) fn parse(
    text: &str,
    onto: &Ontology,
) -> Result<BTreeMap<AgentId, AgentProfile>, KbValidationError> {
    let mut out = BTreeMap::new();
    for b in blocks(text).map_err(|(l, m)| err(l, "", m))? {
        let h = &b.head;
        let (Some("agent"), Some(id), 2) = (h.word(0), h.word(1), h.words.len()) else {
            return Err(err(h.no, h.word(1).unwrap_or(""), "expected `agent ID`"));
        };
        let mut kind = None;
        let mut p = AgentProfile {
            agent_id: AgentId::new(id),
            kind: AgentKind::Human,
            name: id.to_string(),
            team_role: String::new(),
            skills: Vec::new(),
            preferences: BTreeMap::new(),
            state: BTreeMap::new(),
        };
        for l in &b.body {
            match (l.word(0), l.words.len()) {
                (Some("kind"), 2) => {
                    kind = Some(match l.words[1].as_str() {
                        "human" => AgentKind::Human,
                        "ugv" => AgentKind::Ugv,
                        "drone" => AgentKind::Drone,
                        other => return Err(err(l.no, id, format!("unknown kind `{other}`"))),
                    })
                }
                (Some("name"), 2) => p.name = l.words[1].clone(),
                (Some("role"), 2) => p.team_role = l.words[1].clone(),
                (Some("skills"), _) => {
                    for s in &l.words[1..] {
                        if !onto.contains(s) {
                            return Err(err(l.no, id, format!("skill `{s}` is not a concept")));
                        }
                        if !onto.is_a(s, "EVENT") {
                            return Err(err(l.no, id, format!("skill `{s}` is not an event")));
                        }
                        p.skills.push(s.clone());
                    }
                }
                (Some("pref"), 3) => {
                    let v: f64 = l.words[2]
                        .parse()
                        .map_err(|_| err(l.no, id, "preference must be a number"))?;
                    if !(0.0..=1.0).contains(&v) {
                        return Err(err(
                            l.no,
                            id,
                            format!("preference `{}` outside [0, 1]", l.words[1]),
                        ));
                    }
                    p.preferences.insert(l.words[1].clone(), v);
                }
                (Some("state"), 3) => {
                    p.state.insert(l.words[1].clone(), l.words[2].clone());
                }
                _ => {
                    return Err(err(
                        l.no,
                        id,
                        "expected kind, name, role, skills, pref or state",
                    ))
                }
            }
        }
        p.kind = kind.ok_or_else(|| err(h.no, id, "missing `kind`"))?;
        if out.insert(p.agent_id.clone(), p).is_some() {
            return Err(err(h.no, id, "duplicate agent"));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onto() -> Ontology {
        Ontology::parse("concept ALL\nconcept EVENT is-a ALL\nconcept MOVE-TO is-a EVENT\nconcept ROOM is-a ALL\n")
            .unwrap()
    }

    #[test]
    fn parses_profile() {
        let p = parse(
            "agent danny\n  kind human\n  name Danny\n  pref priority 0.8\n",
            &onto(),
        )
        .unwrap();
        let d = &p[&AgentId::new("danny")];
        assert_eq!(d.name, "Danny");
        assert_eq!(d.priority(), 0.8);
    }

    #[test]
    fn rejects_bad_skill_and_weight() {
        let e = parse("agent r\n  kind ugv\n  skills ROOM\n", &onto()).unwrap_err();
        assert_eq!(e.entry, "r");
        assert!(parse("agent r\n  kind ugv\n  pref priority 1.5\n", &onto()).is_err());
        assert!(parse("agent r\n  name R\n", &onto()).is_err());
    }
}
