//! Concept hierarchy.
//!
//! ```text
//! concept KEY-SET is-a ARTIFACT
//!   property owner agent
//!   label keys
//! ```
//!
//! `ALL` is the single root. Property fillers are a concept name or one of
//! the literal types `number`, `text`, `agent`. A `label` line maps a
//! detector class label onto the concept.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::text::{blocks, is_concept_name};
use super::KbValidationError;

pub const ROOT: &str = "ALL";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FillerType {
    Concept(String),
    Number,
    Text,
    Agent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub name: String,
    pub parents: Vec<String>,
    pub properties: BTreeMap<String, FillerType>,
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Ontology {
    concepts: BTreeMap<String, Concept>,
    labels: BTreeMap<String, String>,
}

fn err(line: usize, entry: &str, message: impl Into<String>) -> KbValidationError {
    KbValidationError::new("ontology", line, entry, message)
}

impl Ontology {
    pub fn parse(text: &str) -> Result<Ontology, KbValidationError> {
        let blocks = blocks(text).map_err(|(l, m)| err(l, "", m))?;
        let mut concepts = BTreeMap::new();
        let mut lines = BTreeMap::new();
        for b in blocks {
            let h = &b.head;
            if h.word(0) != Some("concept") {
                return Err(err(h.no, h.word(0).unwrap_or(""), "expected `concept`"));
            }
            let name = h
                .word(1)
                .ok_or_else(|| err(h.no, "", "missing concept name"))?
                .to_string();
            if !is_concept_name(&name) {
                return Err(err(
                    h.no,
                    &name,
                    "concept names are uppercase letters, digits and dashes",
                ));
            }
            let parents: Vec<String> = match h.word(2) {
                None => Vec::new(),
                Some("is-a") if h.words.len() > 3 => h.words[3..].to_vec(),
                Some(_) => return Err(err(h.no, &name, "expected `is-a PARENT..`")),
            };
            let mut c = Concept {
                name: name.clone(),
                parents,
                properties: BTreeMap::new(),
                labels: Vec::new(),
            };
            for l in &b.body {
                match (l.word(0), l.words.len()) {
                    (Some("property"), 3) => {
                        let filler = match l.words[2].as_str() {
                            "number" => FillerType::Number,
                            "text" => FillerType::Text,
                            "agent" => FillerType::Agent,
                            other => FillerType::Concept(other.to_string()),
                        };
                        if c.properties.insert(l.words[1].clone(), filler).is_some() {
                            return Err(err(
                                l.no,
                                &name,
                                format!("property `{}` declared twice", l.words[1]),
                            ));
                        }
                    }
                    (Some("label"), 2) => c.labels.push(l.words[1].clone()),
                    _ => {
                        return Err(err(
                            l.no,
                            &name,
                            "expected `property ROLE FILLER` or `label WORD`",
                        ))
                    }
                }
            }
            lines.insert(name.clone(), h.no);
            if concepts.insert(name.clone(), c).is_some() {
                return Err(err(h.no, &name, "duplicate concept"));
            }
        }
        Ontology::from_concepts_with_lines(concepts, &lines)
    }

    pub fn from_concepts(concepts: Vec<Concept>) -> Result<Ontology, KbValidationError> {
        let mut map = BTreeMap::new();
        for c in concepts {
            let name = c.name.clone();
            if map.insert(name.clone(), c).is_some() {
                return Err(err(0, &name, "duplicate concept"));
            }
        }
        Ontology::from_concepts_with_lines(map, &BTreeMap::new())
    }

    fn from_concepts_with_lines(
        concepts: BTreeMap<String, Concept>,
        lines: &BTreeMap<String, usize>,
    ) -> Result<Ontology, KbValidationError> {
        let at = |n: &str| lines.get(n).copied().unwrap_or(0);
        match concepts.get(ROOT) {
            None => return Err(err(0, ROOT, "the root concept is missing")),
            Some(r) if !r.parents.is_empty() => {
                return Err(err(at(ROOT), ROOT, "the root has no parents"))
            }
            _ => {}
        }
        let mut labels = BTreeMap::new();
        for c in concepts.values() {
            if c.name != ROOT && c.parents.is_empty() {
                return Err(err(
                    at(&c.name),
                    &c.name,
                    "every concept except the root needs a parent",
                ));
            }
            for p in &c.parents {
                if !concepts.contains_key(p) {
                    return Err(err(at(&c.name), &c.name, format!("unknown parent `{p}`")));
                }
            }
            for (role, f) in &c.properties {
                if let FillerType::Concept(f) = f {
                    if !concepts.contains_key(f) {
                        return Err(err(
                            at(&c.name),
                            &c.name,
                            format!("property `{role}` names unknown concept `{f}`"),
                        ));
                    }
                }
            }
            for l in &c.labels {
                if let Some(prev) = labels.insert(l.clone(), c.name.clone()) {
                    return Err(err(
                        at(&c.name),
                        &c.name,
                        format!("label `{l}` already maps to {prev}"),
                    ));
                }
            }
        }
        // Cycle check: depth-first with an on-stack set.
        let mut done = BTreeSet::new();
        for start in concepts.keys() {
            let mut stack = vec![(start.as_str(), 0usize)];
            let mut path: Vec<&str> = Vec::new();
            while let Some((n, i)) = stack.pop() {
                if i == 0 {
                    if done.contains(n) {
                        continue;
                    }
                    if path.contains(&n) {
                        return Err(err(at(n), n, "concept is its own ancestor"));
                    }
                    path.push(n);
                }
                let parents = &concepts[n].parents;
                if i < parents.len() {
                    stack.push((n, i + 1));
                    stack.push((parents[i].as_str(), 0));
                } else {
                    path.pop();
                    done.insert(n);
                }
            }
        }
        Ok(Ontology { concepts, labels })
    }

    pub fn len(&self) -> usize {
        self.concepts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.concepts.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.concepts.contains_key(name)
    }

    pub fn get(&self, name: &str) -> Option<&Concept> {
        self.concepts.get(name)
    }

    pub fn concepts(&self) -> impl Iterator<Item = &Concept> {
        self.concepts.values()
    }

    /// Every ancestor of `name`, including itself.
    pub fn ancestors(&self, name: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut todo = vec![name.to_string()];
        while let Some(n) = todo.pop() {
            if let Some(c) = self.concepts.get(&n) {
                if out.insert(n) {
                    todo.extend(c.parents.iter().cloned());
                }
            }
        }
        out
    }

    pub fn is_a(&self, name: &str, ancestor: &str) -> bool {
        self.ancestors(name).contains(ancestor)
    }

    /// Filler constraint for `role` on `concept`, searching ancestors
    /// nearest first (breadth-first, parents in declaration order).
    pub fn property(&self, concept: &str, role: &str) -> Option<&FillerType> {
        let mut queue = std::collections::VecDeque::from([concept.to_string()]);
        let mut seen = BTreeSet::new();
        while let Some(n) = queue.pop_front() {
            let Some(c) = self.concepts.get(&n) else {
                continue;
            };
            if let Some(f) = c.properties.get(role) {
                return Some(f);
            }
            for p in &c.parents {
                if seen.insert(p.clone()) {
                    queue.push_back(p.clone());
                }
            }
        }
        None
    }

    pub fn concept_for_label(&self, label: &str) -> Option<&str> {
        self.labels.get(label).map(String::as_str)
    }

    pub fn label_for_concept(&self, concept: &str) -> Option<&str> {
        self.concepts
            .get(concept)
            .and_then(|c| c.labels.first())
            .map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ontology_loads() {
        let o = Ontology::parse("concept ALL\nconcept OBJECT is-a ALL\n").unwrap();
        assert_eq!(o.len(), 2);
        assert!(o.is_a("OBJECT", "ALL"));
    }

    #[test]
    fn properties_inherit() {
        let o = Ontology::parse(
            "concept ALL\nconcept EVENT is-a ALL\n  property agent agent\nconcept FIND is-a EVENT\n  label find\n",
        )
        .unwrap();
        assert_eq!(o.property("FIND", "agent"), Some(&FillerType::Agent));
        assert_eq!(o.property("FIND", "theme"), None);
        assert_eq!(o.concept_for_label("find"), Some("FIND"));
    }

    #[test]
    fn cycles_and_dangling_parents_fail() {
        let cyc = Ontology::parse("concept ALL\nconcept A is-a B\nconcept B is-a A\n").unwrap_err();
        assert!(cyc.message.contains("own ancestor"), "{cyc}");
        let dangling = Ontology::parse("concept ALL\nconcept A is-a NOPE\n").unwrap_err();
        assert_eq!(dangling.entry, "A");
        assert_eq!(dangling.line, 2);
        assert!(Ontology::parse("concept OBJECT\n").is_err());
    }
}
