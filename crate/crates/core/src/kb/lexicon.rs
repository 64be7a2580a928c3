//! Word senses and generation templates.
//!
//! ```text
//! sense find-v1 verb "find" FIND-OBJECT
//!   frame obj=theme in=location
//! sense keys-n1 noun "keys" KEY-SET
//!   plural
//! sense okay-p1 phrase "okay" ACKNOWLEDGE
//!   act ACK
//! template INFORM FOUND "I found {theme}[ in {location}]."
//! thought PlanSelected "I chose {plan} ..."
//! ```
//!
//! A frame maps syntactic positions onto roles of the sense's concept:
//! `subj` (the clause subject), `obj` and `obj2` (bare noun phrases after
//! the verb, in order) or a preposition (`in`, `to`, ...) introducing a
//! phrase. Template text uses `{role}` placeholders, `[...]` for a part that
//! is dropped when a placeholder inside it is unbound, and `{be}` for the
//! copula agreeing with the theme.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ontology::Ontology;
use super::text::blocks;
use super::{KbValidationError, SpeechAct};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pos {
    Verb,
    Noun,
    Adj,
    Prep,
    Det,
    /// Possessive determiner: `my`, `your`, `our`.
    Poss,
    Pron,
    Wh,
    Aux,
    /// Fixed multi-word expression that is a whole utterance.
    Phrase,
    /// Skipped wherever it occurs (`please`, `now`).
    Particle,
}

impl FromStr for Pos {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "verb" => Pos::Verb,
            "noun" => Pos::Noun,
            "adj" => Pos::Adj,
            "prep" => Pos::Prep,
            "det" => Pos::Det,
            "poss" => Pos::Poss,
            "pron" => Pos::Pron,
            "wh" => Pos::Wh,
            "aux" => Pos::Aux,
            "phrase" => Pos::Phrase,
            "particle" => Pos::Particle,
            other => return Err(format!("unknown part of speech `{other}`")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SlotPos {
    Subj,
    Obj,
    Obj2,
    Prep(String),
}

impl fmt::Display for SlotPos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SlotPos::Subj => f.write_str("subj"),
            SlotPos::Obj => f.write_str("obj"),
            SlotPos::Obj2 => f.write_str("obj2"),
            SlotPos::Prep(p) => f.write_str(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Slot {
    pub position: SlotPos,
    pub role: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexEntry {
    pub lemma: String,
    pub sense_id: String,
    pub pos: Pos,
    pub concept: String,
    pub frame: Vec<Slot>,
    /// Speech act forced by a phrase.
    pub act: Option<SpeechAct>,
    pub plural: bool,
}

impl LexEntry {
    pub fn tokens(&self) -> Vec<&str> {
        self.lemma.split_whitespace().collect()
    }

    pub fn slot_role(&self, pos: &SlotPos) -> Option<&str> {
        self.frame
            .iter()
            .find(|s| &s.position == pos)
            .map(|s| s.role.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Template {
    pub act: SpeechAct,
    pub head: String,
    pub text: String,
}

impl Template {
    /// Placeholder names in order of appearance.
    pub fn placeholders(&self) -> Vec<&str> {
        placeholders(&self.text)
    }
}

pub(crate) fn placeholders(text: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        let Some(close) = rest[open..].find('}') else {
            break;
        };
        out.push(&rest[open + 1..open + close]);
        rest = &rest[open + close + 1..];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Lexicon {
    entries: Vec<LexEntry>,
    templates: Vec<Template>,
    thoughts: BTreeMap<String, String>,
}

fn err(line: usize, entry: &str, message: impl Into<String>) -> KbValidationError {
    KbValidationError::new("lexicon", line, entry, message)
}

fn check_brackets(text: &str) -> Result<(), String> {
    let mut depth = 0i32;
    let mut brace = false;
    for ch in text.chars() {
        match ch {
            '[' if !brace => depth += 1,
            ']' if !brace => depth -= 1,
            '{' if !brace => brace = true,
            '}' if brace => brace = false,
            '{' | '}' => return Err("unbalanced braces".into()),
            _ => {}
        }
        if !(0..=1).contains(&depth) {
            return Err("optional parts must not nest".into());
        }
    }
    if depth != 0 || brace {
        return Err("unbalanced brackets".into());
    }
    Ok(())
}

impl Lexicon {
    /// Parse and validate against `onto`.
    pub fn parse(text: &str, onto: &Ontology) -> Result<Lexicon, KbValidationError> {
        let mut lex = Lexicon::default();
        let mut ids = BTreeSet::new();
        for b in blocks(text).map_err(|(l, m)| err(l, "", m))? {
            let h = &b.head;
            match h.word(0) {
                Some("sense") => {
                    let [_, id, pos, lemma, concept] = h.words.as_slice() else {
                        return Err(err(
                            h.no,
                            h.word(1).unwrap_or(""),
                            "expected `sense ID POS \"LEMMA\" CONCEPT`",
                        ));
                    };
                    if !ids.insert(id.clone()) {
                        return Err(err(h.no, id, "duplicate sense id"));
                    }
                    let pos: Pos = pos.parse().map_err(|m: String| err(h.no, id, m))?;
                    if !onto.contains(concept) {
                        return Err(err(h.no, id, format!("unknown concept `{concept}`")));
                    }
                    if lemma.trim().is_empty() || lemma.chars().any(|c| c.is_uppercase()) {
                        return Err(err(h.no, id, "lemmas are non-empty and lowercase"));
                    }
                    let mut e = LexEntry {
                        lemma: lemma.split_whitespace().collect::<Vec<_>>().join(" "),
                        sense_id: id.clone(),
                        pos,
                        concept: concept.clone(),
                        frame: Vec::new(),
                        act: None,
                        plural: false,
                    };
                    for l in &b.body {
                        match l.word(0) {
                            Some("frame") => {
                                for w in &l.words[1..] {
                                    let (p, role) = w
                                        .split_once('=')
                                        .ok_or_else(|| err(l.no, id, format!("bad slot `{w}`")))?;
                                    let position = match p {
                                        "subj" => SlotPos::Subj,
                                        "obj" => SlotPos::Obj,
                                        "obj2" => SlotPos::Obj2,
                                        prep => SlotPos::Prep(prep.to_string()),
                                    };
                                    if onto.property(concept, role).is_none() {
                                        return Err(err(
                                            l.no,
                                            id,
                                            format!("`{role}` is not a role of {concept}"),
                                        ));
                                    }
                                    if e.frame.iter().any(|s| s.position == position) {
                                        return Err(err(
                                            l.no,
                                            id,
                                            format!("slot `{p}` used twice"),
                                        ));
                                    }
                                    e.frame.push(Slot {
                                        position,
                                        role: role.to_string(),
                                    });
                                }
                            }
                            Some("act") if l.words.len() == 2 => {
                                e.act =
                                    Some(l.words[1].parse().map_err(|m: String| err(l.no, id, m))?);
                            }
                            Some("plural") if l.words.len() == 1 => e.plural = true,
                            _ => return Err(err(l.no, id, "expected `frame`, `act` or `plural`")),
                        }
                    }
                    lex.entries.push(e);
                }
                Some("template") => {
                    let [_, act, head, text] = h.words.as_slice() else {
                        return Err(err(
                            h.no,
                            "template",
                            "expected `template ACT HEAD \"TEXT\"`",
                        ));
                    };
                    let act: SpeechAct = act.parse().map_err(|m: String| err(h.no, head, m))?;
                    if !onto.contains(head) {
                        return Err(err(h.no, head, "template head is not a concept"));
                    }
                    check_brackets(text).map_err(|m| err(h.no, head, m))?;
                    for p in placeholders(text) {
                        if p != "be" && onto.property(head, p).is_none() {
                            return Err(err(
                                h.no,
                                head,
                                format!("placeholder `{p}` is not a role of {head}"),
                            ));
                        }
                    }
                    if lex
                        .templates
                        .iter()
                        .any(|t| t.act == act && &t.head == head)
                    {
                        return Err(err(h.no, head, format!("second template for {act} {head}")));
                    }
                    lex.templates.push(Template {
                        act,
                        head: head.clone(),
                        text: text.clone(),
                    });
                }
                Some("thought") => {
                    let [_, kind, text] = h.words.as_slice() else {
                        return Err(err(h.no, "thought", "expected `thought KIND \"TEXT\"`"));
                    };
                    check_brackets(text).map_err(|m| err(h.no, kind, m))?;
                    lex.thoughts.insert(kind.clone(), text.clone());
                }
                other => {
                    return Err(err(
                        h.no,
                        other.unwrap_or(""),
                        "expected `sense`, `template` or `thought`",
                    ))
                }
            }
        }
        Ok(lex)
    }

    pub fn entries(&self) -> &[LexEntry] {
        &self.entries
    }

    pub fn templates(&self) -> &[Template] {
        &self.templates
    }

    pub fn template(&self, act: SpeechAct, head: &str) -> Option<&Template> {
        self.templates
            .iter()
            .find(|t| t.act == act && t.head == head)
    }

    pub fn thought_template(&self, kind: &str) -> Option<&str> {
        self.thoughts.get(kind).map(String::as_str)
    }

    pub fn sense(&self, id: &str) -> Option<&LexEntry> {
        self.entries.iter().find(|e| e.sense_id == id)
    }

    /// First noun sense for `concept`, in file order.
    pub fn noun_for(&self, concept: &str) -> Option<&LexEntry> {
        self.entries
            .iter()
            .find(|e| e.pos == Pos::Noun && e.concept == concept)
    }
}
