//! Pattern-grammar analyzer: utterance text to TMR.
//!
//! The input is lower-cased and split into words; a leading or trailing
//! `Name,` is a vocative that picks the addressee. Words are matched
//! longest-first against lexicon lemmas and agent names (`Danny`, `Danny's`).
//! Particles are dropped. What remains is either a single phrase sense or a
//! clause of one of three shapes:
//!
//! ```text
//! imperative   VERB ARG*                      REQUEST-ACTION
//! question     WH AUX* [NP] VERB ARG*          REQUEST-INFO
//! statement    NP AUX* VERB ARG*               INFORM
//! ARG          NP | PREP NP
//! NP           PRON | AGENT | (DET | POSS | AGENT's | ADJ)* NOUN+
//! ```
//!
//! Bare NPs after the verb fill the `obj` then `obj2` slots of the verb's
//! frame, a PP fills the slot named by its preposition and the subject fills
//! `subj`. A question without a subject before its verb takes the first NP
//! after the verb as subject (`where are the keys`). Every filler must
//! satisfy the ontology's constraint for its role. A possessor on the theme
//! becomes an `owner` binding.
//!
//! When a word has several senses every combination is tried; if more than
//! one yields a distinct reading the result is [`AnalysisError::AmbiguousSense`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use super::lexicon::{LexEntry, Pos, SlotPos};
use super::{Addressee, Filler, Kb, SpeechAct, Tmr};
use crate::types::AgentId;

/// Upper bound on sense combinations tried for one utterance.
const MAX_READINGS: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("empty utterance")]
    Empty,
    #[error("unknown speaker `{0}`")]
    UnknownSpeaker(AgentId),
    #[error("could not understand: {reason}")]
    Unparsed { reason: String },
    #[error("`{lemma}` could mean {}", candidates.join(" or "))]
    AmbiguousSense {
        lemma: String,
        candidates: Vec<String>,
    },
}

fn unparsed(reason: impl Into<String>) -> AnalysisError {
    AnalysisError::Unparsed {
        reason: reason.into(),
    }
}

#[derive(Debug, Clone)]
enum Item<'k> {
    Word {
        lemma: String,
        senses: Vec<&'k LexEntry>,
    },
    Agent {
        id: AgentId,
        possessive: bool,
    },
    Comma,
}

#[derive(Debug, Clone, Copy)]
enum Tok<'k, 'a> {
    W(&'k LexEntry),
    Agent(&'a AgentId, bool),
}

fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        let ch = if ch == '\u{2019}' { '\'' } else { ch };
        if ch.is_alphanumeric() || ch == '\'' || ch == '-' {
            cur.extend(ch.to_lowercase());
        } else {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
            if ch == ',' {
                out.push(",".to_string());
            }
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

fn lex_items<'k>(tokens: &[String], kb: &'k Kb) -> Result<Vec<Item<'k>>, AnalysisError> {
    let mut by_lemma: HashMap<&str, Vec<&LexEntry>> = HashMap::new();
    let mut longest = 1;
    for e in kb.lexicon.entries() {
        longest = longest.max(e.tokens().len());
        by_lemma.entry(e.lemma.as_str()).or_default().push(e);
    }
    let mut items = Vec::new();
    let mut i = 0;
    'outer: while i < tokens.len() {
        if tokens[i] == "," {
            items.push(Item::Comma);
            i += 1;
            continue;
        }
        for n in (1..=longest.min(tokens.len() - i)).rev() {
            if n == 1 {
                let t = &tokens[i];
                let (base, possessive) = match t.strip_suffix("'s") {
                    Some(b) => (b, true),
                    None => (t.as_str(), false),
                };
                if let Some(p) = kb.agent_named(base) {
                    items.push(Item::Agent {
                        id: p.agent_id.clone(),
                        possessive,
                    });
                    i += 1;
                    continue 'outer;
                }
            }
            let phrase = tokens[i..i + n].join(" ");
            if phrase.contains(',') {
                continue;
            }
            if let Some(senses) = by_lemma.get(phrase.as_str()) {
                if senses.iter().all(|s| s.pos == Pos::Particle) {
                    // Dropped entirely.
                } else {
                    let senses = senses
                        .iter()
                        .copied()
                        .filter(|s| s.pos != Pos::Particle)
                        .collect();
                    items.push(Item::Word {
                        lemma: phrase,
                        senses,
                    });
                }
                i += n;
                continue 'outer;
            }
        }
        return Err(unparsed(format!("unknown word `{}`", tokens[i])));
    }
    Ok(items)
}

/// Analyze `text` spoken by `speaker`. The TMR comes back with an empty id
/// and tick zero; the caller stamps both.
pub fn analyze(text: &str, speaker: &AgentId, kb: &Kb) -> Result<Tmr, AnalysisError> {
    let tokens = tokenize(text);
    if tokens.iter().all(|t| t == ",") {
        return Err(AnalysisError::Empty);
    }
    if kb.profile(speaker).is_none() {
        return Err(AnalysisError::UnknownSpeaker(speaker.clone()));
    }
    let mut items = lex_items(&tokens, kb)?;

    let mut addressee = Addressee::Team;
    if let [Item::Agent {
        id,
        possessive: false,
    }, Item::Comma, ..] = items.as_slice()
    {
        addressee = Addressee::Agent(id.clone());
        items.drain(..2);
    } else if let [.., Item::Comma, Item::Agent {
        id,
        possessive: false,
    }] = items.as_slice()
    {
        addressee = Addressee::Agent(id.clone());
        items.truncate(items.len() - 2);
    }
    items.retain(|i| !matches!(i, Item::Comma));
    if items.is_empty() {
        return Err(unparsed("nothing left after dropping fillers"));
    }

    let ctx = Ctx {
        kb,
        speaker,
        addressee: &addressee,
    };
    // A discourse phrase opening a longer utterance ("okay, ...") carries nothing.
    if items.len() > 1 {
        items.retain(|i| !matches!(i, Item::Word { senses, .. } if senses.iter().all(|s| s.pos == Pos::Phrase)));
    }

    // Whole-utterance phrase.
    if let [Item::Word { lemma, senses }] = items.as_slice() {
        let phrases: Vec<&LexEntry> = senses
            .iter()
            .copied()
            .filter(|s| s.pos == Pos::Phrase)
            .collect();
        let concepts: BTreeSet<&str> = phrases.iter().map(|s| s.concept.as_str()).collect();
        if concepts.len() > 1 {
            return Err(AnalysisError::AmbiguousSense {
                lemma: lemma.clone(),
                candidates: concepts.into_iter().map(str::to_string).collect(),
            });
        }
        if let Some(p) = phrases.first() {
            let act = p.act.unwrap_or(SpeechAct::Inform);
            let mut tmr = Tmr::new(act, p.concept.clone(), speaker.clone(), addressee.clone());
            tmr.source_text = text.to_string();
            return Ok(tmr);
        }
    }

    // Enumerate sense combinations.
    let choices: Vec<Vec<Tok>> = items
        .iter()
        .map(|it| match it {
            Item::Word { senses, .. } => senses
                .iter()
                .filter(|s| s.pos != Pos::Phrase)
                .map(|s| Tok::W(s))
                .collect(),
            Item::Agent { id, possessive } => vec![Tok::Agent(id, *possessive)],
            Item::Comma => unreachable!(),
        })
        .collect();
    if let Some(pos) = choices.iter().position(|c| c.is_empty()) {
        let Item::Word { lemma, .. } = &items[pos] else {
            unreachable!()
        };
        return Err(unparsed(format!(
            "`{lemma}` cannot be used inside a sentence"
        )));
    }
    let total: usize = choices.iter().map(Vec::len).product();
    if total > MAX_READINGS {
        return Err(unparsed("too many possible readings"));
    }

    let mut readings: Vec<(Vec<usize>, Tmr)> = Vec::new();
    let mut first_error = None;
    let mut idx = vec![0usize; choices.len()];
    loop {
        let toks: Vec<Tok> = idx.iter().zip(&choices).map(|(i, c)| c[*i]).collect();
        match ctx.clause(&toks) {
            Ok(mut tmr) => {
                tmr.source_text = text.to_string();
                if !readings.iter().any(|(_, t)| *t == tmr) {
                    readings.push((idx.clone(), tmr));
                }
            }
            Err(e) => {
                first_error.get_or_insert(e);
            }
        }
        let mut k = 0;
        while k < idx.len() {
            idx[k] += 1;
            if idx[k] < choices[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        if k == idx.len() {
            break;
        }
    }

    match readings.len() {
        0 => Err(unparsed(first_error.unwrap_or_else(|| "no reading".into()))),
        1 => Ok(readings.pop().expect("one reading").1),
        _ => {
            let pos = (0..items.len())
                .find(|&p| readings.iter().any(|(ix, _)| ix[p] != readings[0].0[p]))
                .expect("distinct readings differ in some sense choice");
            let Item::Word { lemma, senses } = &items[pos] else {
                unreachable!()
            };
            let candidates: BTreeSet<String> = readings
                .iter()
                .map(|(ix, _)| {
                    senses
                        .iter()
                        .filter(|s| s.pos != Pos::Phrase)
                        .nth(ix[pos])
                        .expect("index")
                        .concept
                        .clone()
                })
                .collect();
            Err(AnalysisError::AmbiguousSense {
                lemma: lemma.clone(),
                candidates: candidates.into_iter().collect(),
            })
        }
    }
}

struct Ctx<'a> {
    kb: &'a Kb,
    speaker: &'a AgentId,
    addressee: &'a Addressee,
}

struct Np {
    filler: Filler,
    possessor: Option<Filler>,
}

impl Ctx<'_> {
    fn deictic(&self, concept: &str) -> Result<Filler, String> {
        match concept {
            "SPEAKER" => Ok(Filler::Agent(self.speaker.clone())),
            "ADDRESSEE" => Ok(match self.addressee {
                Addressee::Team => Filler::Team,
                Addressee::Agent(a) => Filler::Agent(a.clone()),
            }),
            "TEAM-GROUP" => Ok(Filler::Team),
            other => Err(format!("cannot resolve {other}")),
        }
    }

    fn np(&self, toks: &[Tok], i: &mut usize) -> Result<Np, String> {
        match toks.get(*i) {
            Some(Tok::W(e)) if e.pos == Pos::Pron => {
                *i += 1;
                return Ok(Np {
                    filler: self.deictic(&e.concept)?,
                    possessor: None,
                });
            }
            Some(Tok::Agent(id, false)) => {
                *i += 1;
                return Ok(Np {
                    filler: Filler::Agent((*id).clone()),
                    possessor: None,
                });
            }
            _ => {}
        }
        let start = *i;
        let mut possessor = None;
        while let Some(t) = toks.get(*i) {
            match t {
                Tok::W(e) if matches!(e.pos, Pos::Det | Pos::Adj) => {}
                Tok::W(e) if e.pos == Pos::Poss => possessor = Some(self.deictic(&e.concept)?),
                Tok::Agent(id, true) => possessor = Some(Filler::Agent((*id).clone())),
                _ => break,
            }
            *i += 1;
        }
        let mut head = None;
        while let Some(Tok::W(e)) = toks.get(*i) {
            if e.pos != Pos::Noun {
                break;
            }
            head = Some(e.concept.clone());
            *i += 1;
        }
        match head {
            Some(c) => Ok(Np {
                filler: Filler::Concept(c),
                possessor,
            }),
            None if *i == start => Err("expected a noun phrase".into()),
            None => Err("noun phrase without a noun".into()),
        }
    }

    fn clause(&self, toks: &[Tok]) -> Result<Tmr, String> {
        let is = |i: usize, pos: Pos| matches!(toks.get(i), Some(Tok::W(e)) if e.pos == pos);
        let mut i = 0;
        let mut subject = None;
        let act;
        if is(0, Pos::Verb) {
            act = SpeechAct::RequestAction;
        } else if is(0, Pos::Wh) {
            act = SpeechAct::RequestInfo;
            i = 1;
            while is(i, Pos::Aux) {
                i += 1;
            }
            if !is(i, Pos::Verb) {
                subject = Some(self.np(toks, &mut i)?);
                while is(i, Pos::Aux) {
                    i += 1;
                }
            }
        } else {
            act = SpeechAct::Inform;
            subject = Some(self.np(toks, &mut i)?);
            while is(i, Pos::Aux) {
                i += 1;
            }
        }
        let Some(Tok::W(verb)) = toks.get(i).filter(|_| is(i, Pos::Verb)) else {
            return Err("expected a verb".into());
        };
        i += 1;

        let mut args: Vec<(SlotPos, Np)> = Vec::new();
        let mut bare = 0;
        let invert = act == SpeechAct::RequestInfo && subject.is_none();
        while i < toks.len() {
            if let Tok::W(e) = toks[i] {
                if e.pos == Pos::Prep {
                    i += 1;
                    let np = self.np(toks, &mut i)?;
                    args.push((SlotPos::Prep(e.lemma.clone()), np));
                    continue;
                }
            }
            let np = self.np(toks, &mut i)?;
            if invert && subject.is_none() {
                subject = Some(np);
                continue;
            }
            let pos = match bare {
                0 => SlotPos::Obj,
                1 => SlotPos::Obj2,
                _ => return Err("too many objects".into()),
            };
            bare += 1;
            args.push((pos, np));
        }
        if let Some(s) = subject {
            args.insert(0, (SlotPos::Subj, s));
        }

        let onto = &self.kb.ontology;
        let mut bindings = BTreeMap::new();
        let mut owner = None;
        for (pos, np) in args {
            let role = verb
                .slot_role(&pos)
                .ok_or_else(|| format!("`{}` takes no {pos} argument", verb.lemma))?;
            let constraint = onto
                .property(&verb.concept, role)
                .expect("frame roles validated at load");
            if !self.kb.filler_fits(&np.filler, constraint) {
                return Err(format!(
                    "{:?} cannot be the {role} of {}",
                    np.filler, verb.concept
                ));
            }
            if role == "theme" {
                owner = np.possessor;
            }
            if bindings.insert(role.to_string(), np.filler).is_some() {
                return Err(format!("{role} given twice"));
            }
        }
        if let Some(o) = owner {
            if onto.property(&verb.concept, "owner").is_some() {
                bindings.insert("owner".to_string(), o);
            }
        }
        let mut tmr = Tmr::new(
            act,
            verb.concept.clone(),
            self.speaker.clone(),
            self.addressee.clone(),
        );
        tmr.bindings = bindings;
        Ok(tmr)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer_splits_punctuation_and_keeps_possessives() {
        assert_eq!(
            tokenize("Drone, find Danny's keys!"),
            ["drone", ",", "find", "danny's", "keys"]
        );
        assert_eq!(tokenize("  ?? "), Vec::<String>::new());
    }
}
