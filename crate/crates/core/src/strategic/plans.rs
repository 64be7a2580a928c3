//! Plan templates.
//!
//! ```text
//! plan drone-overview-then-ugv-check
//!   goal FIND-OBJECT
//!   success 0.9
//!   cost 0.5
//!   step drone SEARCH-AREA rooms=?all_rooms label=?label
//!   step drone REPORT content=FOUND theme=?theme location=?found_room
//! ```
//!
//! A step is `step ROLE CONCEPT [concurrent] [optional] KEY=VALUE...`.
//! ROLE is `drone`, `ugv`, `any` (the addressed robot if it can, else the
//! first robot by id that can) or an agent id; the robot must list the
//! step concept among its skills. VALUE is a literal or a `?variable`:
//! a role of the goal (`?theme`, `?destination`, ...), one of the derived
//! values `?label`, `?all_rooms`, `?rooms_half_1`, `?rooms_half_2`,
//! `?requester`, or a fact learned during execution: `?found`,
//! `?found_room`, `?found_instance`.

use thiserror::Error;

use super::{Goal, Plan, PlanStep, StepState, TeamContext};
use crate::kb::text::blocks;
use crate::kb::{AgentKind, Kb, Ontology};
use crate::types::{AgentId, Params, Value};

pub const DERIVED_VARS: [&str; 5] = [
    "label",
    "all_rooms",
    "rooms_half_1",
    "rooms_half_2",
    "requester",
];
pub const FACT_VARS: [&str; 3] = ["found", "found_room", "found_instance"];

#[derive(Debug, Clone, PartialEq, Error)]
#[error("plans:{line}: `{plan}`: {message}")]
pub struct PlanValidationError {
    pub line: usize,
    pub plan: String,
    pub message: String,
}

fn err(line: usize, plan: &str, message: impl Into<String>) -> PlanValidationError {
    PlanValidationError {
        line,
        plan: plan.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTemplate {
    pub role: String,
    pub concept: String,
    pub concurrent: bool,
    pub optional: bool,
    pub params: Params,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanTemplate {
    pub plan_id: String,
    pub goal_concept: String,
    pub est_success: f64,
    pub est_cost: f64,
    pub steps: Vec<StepTemplate>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PlanLibrary {
    templates: Vec<PlanTemplate>,
}

impl PlanLibrary {
    pub fn parse(text: &str, onto: &Ontology) -> Result<PlanLibrary, PlanValidationError> {
        let mut templates: Vec<PlanTemplate> = Vec::new();
        for b in blocks(text).map_err(|(l, m)| err(l, "", m))? {
            let h = &b.head;
            let (Some("plan"), Some(id), 2) = (h.word(0), h.word(1), h.words.len()) else {
                return Err(err(h.no, h.word(1).unwrap_or(""), "expected `plan ID`"));
            };
            if templates.iter().any(|t| t.plan_id == id) {
                return Err(err(h.no, id, "duplicate plan id"));
            }
            let mut goal = None;
            let mut success = None;
            let mut cost = None;
            let mut steps = Vec::new();
            for l in &b.body {
                let number = |what: &str| -> Result<f64, PlanValidationError> {
                    match (l.words.len(), l.word(1).map(str::parse::<f64>)) {
                        (2, Some(Ok(v))) if v.is_finite() => Ok(v),
                        _ => Err(err(l.no, id, format!("expected `{what} NUMBER`"))),
                    }
                };
                match l.word(0) {
                    Some("goal") if l.words.len() == 2 => goal = Some(l.words[1].clone()),
                    Some("success") => success = Some(number("success")?),
                    Some("cost") => cost = Some(number("cost")?),
                    Some("step") if l.words.len() >= 3 => {
                        let mut s = StepTemplate {
                            role: l.words[1].clone(),
                            concept: l.words[2].clone(),
                            concurrent: false,
                            optional: false,
                            params: Params::new(),
                        };
                        if !onto.is_a(&s.concept, "EVENT") {
                            return Err(err(
                                l.no,
                                id,
                                format!("step concept `{}` is not an event", s.concept),
                            ));
                        }
                        for w in &l.words[3..] {
                            match w.as_str() {
                                "concurrent" => s.concurrent = true,
                                "optional" => s.optional = true,
                                kv => {
                                    let (k, v) = kv.split_once('=').ok_or_else(|| {
                                        err(l.no, id, format!("bad step word `{kv}`"))
                                    })?;
                                    let value = if let Some(var) = v.strip_prefix('?') {
                                        Value::Id(format!("?{var}"))
                                    } else {
                                        Value::parse_literal(v)
                                    };
                                    s.params.insert(k.to_string(), value);
                                }
                            }
                        }
                        steps.push((l.no, s));
                    }
                    _ => return Err(err(l.no, id, "expected goal, success, cost or step")),
                }
            }
            let goal = goal.ok_or_else(|| err(h.no, id, "missing `goal`"))?;
            if !onto.is_a(&goal, "EVENT") {
                return Err(err(
                    h.no,
                    id,
                    format!("goal `{goal}` is not an event concept"),
                ));
            }
            let est_success = success.ok_or_else(|| err(h.no, id, "missing `success`"))?;
            let est_cost = cost.ok_or_else(|| err(h.no, id, "missing `cost`"))?;
            if !(0.0..=1.0).contains(&est_success) {
                return Err(err(h.no, id, "success must lie in [0, 1]"));
            }
            if est_cost < 0.0 {
                return Err(err(h.no, id, "cost must not be negative"));
            }
            if steps.is_empty() {
                return Err(err(h.no, id, "a plan needs at least one step"));
            }
            for (line, s) in &steps {
                for v in s.params.values() {
                    if let Some(var) = v.as_id().and_then(|x| x.strip_prefix('?')) {
                        let known = DERIVED_VARS.contains(&var)
                            || FACT_VARS.contains(&var)
                            || onto.property(&goal, var).is_some();
                        if !known {
                            return Err(err(
                                *line,
                                id,
                                format!("unknown variable `?{var}` for goal {goal}"),
                            ));
                        }
                    }
                }
            }
            templates.push(PlanTemplate {
                plan_id: id.to_string(),
                goal_concept: goal,
                est_success,
                est_cost,
                steps: steps.into_iter().map(|(_, s)| s).collect(),
            });
        }
        Ok(PlanLibrary { templates })
    }

    pub fn from_templates(templates: Vec<PlanTemplate>) -> PlanLibrary {
        PlanLibrary { templates }
    }

    pub fn templates(&self) -> &[PlanTemplate] {
        &self.templates
    }

    /// Instantiated candidates for `goal`, sorted by plan id. Templates whose
    /// roles the team cannot fill are left out, as are `excluded` ids.
    pub fn candidates(
        &self,
        goal: &Goal,
        team: &TeamContext,
        kb: &Kb,
        excluded: &dyn Fn(&str) -> bool,
    ) -> Vec<Plan> {
        let mut out: Vec<Plan> = self
            .templates
            .iter()
            .filter(|t| t.goal_concept == goal.concept && !excluded(&t.plan_id))
            .filter_map(|t| instantiate(t, goal, team, kb))
            .collect();
        out.sort_by(|a, b| a.plan_id.cmp(&b.plan_id));
        out
    }
}

fn can_do(kb: &Kb, id: &AgentId, concept: &str) -> bool {
    kb.profile(id).is_some_and(|p| p.has_skill(concept))
}

fn resolve_role(
    role: &str,
    concept: &str,
    goal: &Goal,
    team: &TeamContext,
    kb: &Kb,
) -> Option<AgentId> {
    let first_of = |kind: AgentKind| {
        team.robots
            .iter()
            .find(|(id, k)| *k == kind && can_do(kb, id, concept))
            .map(|(id, _)| id.clone())
    };
    match role {
        "drone" => first_of(AgentKind::Drone),
        "ugv" => first_of(AgentKind::Ugv),
        "any" => {
            if let crate::kb::Addressee::Agent(a) = &goal.addressee {
                if team.robots.iter().any(|(id, _)| id == a) && can_do(kb, a, concept) {
                    return Some(a.clone());
                }
            }
            team.robots
                .iter()
                .find(|(id, _)| can_do(kb, id, concept))
                .map(|(id, _)| id.clone())
        }
        id => {
            let id = AgentId::new(id);
            (team.robots.iter().any(|(r, _)| *r == id) && can_do(kb, &id, concept)).then_some(id)
        }
    }
}

fn instantiate(t: &PlanTemplate, goal: &Goal, team: &TeamContext, kb: &Kb) -> Option<Plan> {
    let mut steps = Vec::with_capacity(t.steps.len());
    for s in &t.steps {
        let assigned_to = resolve_role(&s.role, &s.concept, goal, team, kb)?;
        steps.push(PlanStep {
            concept: s.concept.clone(),
            bindings: s.params.clone(),
            assigned_to,
            state: StepState::NotStarted,
            concurrent: s.concurrent,
            optional: s.optional,
            command_id: None,
        });
    }
    Some(Plan {
        plan_id: t.plan_id.clone(),
        goal_id: goal.goal_id.clone(),
        steps,
        est_cost: t.est_cost,
        est_success: t.est_success,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn onto() -> Ontology {
        Ontology::parse(
            "concept ALL\nconcept EVENT is-a ALL\nconcept FIND-OBJECT is-a EVENT\n  property theme ALL\nconcept SCAN is-a EVENT\nconcept ROCK is-a ALL\n",
        )
        .unwrap()
    }

    #[test]
    fn parses_plan() {
        let lib = PlanLibrary::parse(
            "plan p\n  goal FIND-OBJECT\n  success 0.5\n  cost 0.1\n  step any SCAN concurrent x=?theme y=2\n",
            &onto(),
        )
        .unwrap();
        let s = &lib.templates()[0].steps[0];
        assert!(s.concurrent && !s.optional);
        assert_eq!(s.params["x"], Value::Id("?theme".into()));
        assert_eq!(s.params["y"], Value::Scalar(2.0));
    }

    #[test]
    fn rejects_bad_plans() {
        let o = onto();
        let bad = [
            "plan p\n  goal FIND-OBJECT\n  success 1.5\n  cost 0\n  step any SCAN\n",
            "plan p\n  goal FIND-OBJECT\n  success 0.5\n  cost 0\n",
            "plan p\n  goal FIND-OBJECT\n  success 0.5\n  cost 0\n  step any ROCK\n",
            "plan p\n  goal FIND-OBJECT\n  success 0.5\n  cost 0\n  step any SCAN x=?nope\n",
            "plan p\n  goal ROCK\n  success 0.5\n  cost 0\n  step any SCAN\n",
        ];
        for text in bad {
            assert!(PlanLibrary::parse(text, &o).is_err(), "{text}");
        }
    }
}
