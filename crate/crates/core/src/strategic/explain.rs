//! Causal explanations assembled from a thought log.

use serde_json::Value as Json;

use super::{StrategicError, Thought, ThoughtKind};
use crate::kb::{Kb, Pos};

fn text<'a>(t: &'a Thought, key: &str) -> Option<&'a str> {
    t.structured_cause.get(key).and_then(Json::as_str)
}

/// Everyday word for an action concept: the first verb sense's lemma.
fn verb_word(concept: &str, kb: &Kb) -> String {
    kb.lexicon
        .entries()
        .iter()
        .find(|e| e.pos == Pos::Verb && e.concept == concept)
        .map(|e| e.lemma.clone())
        .unwrap_or_else(|| concept.to_ascii_lowercase().replace('-', " "))
}

/// Explain a goal, or the goal a thought belongs to, from the request
/// through the plan choice and actions to the outcome.
pub fn explain(target: &str, thoughts: &[Thought], kb: &Kb) -> Result<String, StrategicError> {
    let goal_id = if thoughts
        .iter()
        .any(|t| t.goal_id.as_deref() == Some(target))
    {
        target.to_string()
    } else {
        thoughts
            .iter()
            .find(|t| t.thought_id == target)
            .and_then(|t| t.goal_id.clone())
            .ok_or_else(|| StrategicError::UnknownTarget(target.to_string()))?
    };
    let about: Vec<&Thought> = thoughts
        .iter()
        .filter(|t| t.goal_id.as_deref() == Some(goal_id.as_str()))
        .collect();
    let mut parts = Vec::new();

    match about.iter().find(|t| t.kind == ThoughtKind::GoalAdopted) {
        Some(t) => {
            let who = text(t, "requester_name").unwrap_or("someone");
            let said = text(t, "utterance").unwrap_or("");
            match text(t, "analysis_error") {
                Some(why) => parts.push(format!(
                    "{who} said \"{said}\", which we could not understand ({why})."
                )),
                None => parts.push(format!(
                    "{who} asked \"{said}\", so we adopted goal {goal_id} ({}).",
                    text(t, "concept").unwrap_or("?")
                )),
            }
        }
        None => parts.push(format!("Goal {goal_id} was adopted.")),
    }

    if let Some(t) = about
        .iter()
        .rev()
        .find(|t| t.kind == ThoughtKind::PlanSelected)
    {
        let plan = text(t, "plan").unwrap_or("?");
        let scores = t
            .structured_cause
            .get("scores")
            .and_then(Json::as_array)
            .cloned()
            .unwrap_or_default();
        let total_of = |id: &str| {
            scores
                .iter()
                .find(|s| s.get("plan_id").and_then(Json::as_str) == Some(id))
                .and_then(|s| s.get("total"))
                .and_then(Json::as_f64)
        };
        let mut s = format!("We chose plan {plan}");
        if let Some(total) = total_of(plan) {
            s.push_str(&format!(" with utility {total:.3}"));
        }
        if let Some(c) = text(t, "top_component") {
            s.push_str(&format!(", mostly because of its {c} term"));
        }
        if let Some(r) = text(t, "runner_up") {
            match total_of(r) {
                Some(rt) => s.push_str(&format!("; the runner-up {r} scored {rt:.3}")),
                None => s.push_str(&format!("; the runner-up was {r}")),
            }
        }
        s.push('.');
        parts.push(s);
    }

    let actions: Vec<String> = about
        .iter()
        .filter(|t| t.kind == ThoughtKind::ActionIssued)
        .map(|t| {
            let word = text(t, "verb")
                .map(|v| verb_word(v, kb))
                .unwrap_or_else(|| "act".into());
            format!("{} ({word})", t.robot_id)
        })
        .collect();
    if !actions.is_empty() {
        parts.push(format!("Actions: {}.", actions.join(", ")));
    }

    let outcome = about.iter().rev().find(|t| {
        matches!(
            t.kind,
            ThoughtKind::GoalAchieved | ThoughtKind::GoalAbandoned
        )
    });
    parts.push(match outcome {
        Some(t) if t.kind == ThoughtKind::GoalAchieved => "The goal was achieved.".to_string(),
        Some(t) => format!(
            "The goal was abandoned: {}.",
            text(t, "reason").unwrap_or("no reason recorded")
        ),
        None => "The goal is still in progress.".to_string(),
    });
    Ok(parts.join(" "))
}
