//! Template realization of TMRs and thoughts.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{Addressee, Filler, Kb, Tmr};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    /// No template for this head concept (or thought kind) and speech act.
    #[error("no template for {0}")]
    NoTemplate(String),
    #[error("template for {head} needs `{role}`")]
    MissingRole { head: String, role: String },
    /// A filler concept has no noun to say it with.
    #[error("no word for {0}")]
    NoLexeme(String),
}

/// Fill `text`: `{name}` placeholders via `lookup`, and `[...]` groups
/// dropped when any placeholder inside is unbound.
fn fill(
    text: &str,
    head: &str,
    mut lookup: impl FnMut(&str) -> Result<Option<String>, GenerateError>,
) -> Result<String, GenerateError> {
    let mut out = String::new();
    let mut group: Option<(String, bool)> = None;
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '[' => group = Some((String::new(), true)),
            ']' => {
                if let Some((g, complete)) = group.take() {
                    if complete {
                        out.push_str(&g);
                    }
                }
            }
            '{' => {
                let name: String = chars.by_ref().take_while(|c| *c != '}').collect();
                let value = lookup(&name)?;
                match (&mut group, value) {
                    (Some((g, _)), Some(v)) => g.push_str(&v),
                    (Some((_, complete)), None) => *complete = false,
                    (None, Some(v)) => out.push_str(&v),
                    (None, None) => {
                        return Err(GenerateError::MissingRole {
                            head: head.to_string(),
                            role: name,
                        })
                    }
                }
            }
            c => match &mut group {
                Some((g, _)) => g.push(c),
                None => out.push(c),
            },
        }
    }
    Ok(out)
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Realize a TMR through the template for its speech act and head.
pub fn generate(tmr: &Tmr, kb: &Kb) -> Result<String, GenerateError> {
    let template = kb
        .lexicon
        .template(tmr.speech_act, &tmr.head)
        .ok_or_else(|| GenerateError::NoTemplate(format!("{} {}", tmr.speech_act, tmr.head)))?;
    let text = fill(&template.text, &tmr.head, |name| {
        if name == "be" {
            let plural = match tmr.theme() {
                Some(Filler::Concept(c)) => kb.lexicon.noun_for(c).is_some_and(|n| n.plural),
                Some(Filler::Team) => true,
                _ => false,
            };
            return Ok(Some(if plural { "are" } else { "is" }.to_string()));
        }
        tmr.bindings
            .get(name)
            .map(|f| noun_phrase(f, name, tmr, kb))
            .transpose()
    })?;
    Ok(capitalize(&text))
}

fn noun_phrase(filler: &Filler, role: &str, tmr: &Tmr, kb: &Kb) -> Result<String, GenerateError> {
    match filler {
        Filler::Agent(a) if *a == tmr.speaker => Ok("me".to_string()),
        Filler::Agent(a) => Ok(kb.display_name(a)),
        Filler::Team => Ok("us".to_string()),
        Filler::Concept(c) => {
            let noun = kb
                .lexicon
                .noun_for(c)
                .ok_or_else(|| GenerateError::NoLexeme(c.clone()))?;
            let det = match (role, tmr.bindings.get("owner")) {
                ("theme", Some(Filler::Agent(o))) if *o == tmr.speaker => "my".to_string(),
                ("theme", Some(Filler::Agent(o)))
                    if tmr.addressee == Addressee::Agent(o.clone()) =>
                {
                    "your".to_string()
                }
                ("theme", Some(Filler::Agent(o))) => format!("{}'s", kb.display_name(o)),
                ("theme", Some(Filler::Team)) => "our".to_string(),
                _ => "the".to_string(),
            };
            Ok(format!("{det} {}", noun.lemma))
        }
    }
}

/// Realize a thought of `kind` with named `slots`.
pub fn generate_thought(
    kind: &str,
    slots: &BTreeMap<String, String>,
    kb: &Kb,
) -> Result<String, GenerateError> {
    let text = kb
        .lexicon
        .thought_template(kind)
        .ok_or_else(|| GenerateError::NoTemplate(kind.to_string()))?;
    fill(text, kind, |name| Ok(slots.get(name).cloned()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn optional_groups_drop_when_unbound() {
        let look = |n: &str| {
            Ok(if n == "a" {
                Some("x".to_string())
            } else {
                None
            })
        };
        assert_eq!(fill("got {a}[ in {b}].", "H", look).unwrap(), "got x.");
        assert_eq!(
            fill("got {a}[ and {a}].", "H", look).unwrap(),
            "got x and x."
        );
        assert!(matches!(
            fill("got {b}.", "H", look),
            Err(GenerateError::MissingRole { .. })
        ));
    }
}
