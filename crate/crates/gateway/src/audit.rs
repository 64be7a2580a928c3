//! Consistency checks over a finished trace.
//!
//! Rules:
//! - `tick-order`: event ticks never decrease.
//! - `unclosed-command`: every command gets exactly one terminal report
//!   (success, failure, preempted or expired) from the same robot later on.
//! - `orphan-report`: every report that names a command follows that command.
//! - `unanalyzed-chat`: every chat line is followed by a `tmr` or
//!   `analysis_error` event with its utterance id.
//! - `untraced-action`: every ActionIssued thought naming a command id is
//!   matched by a `command` event.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::trace::{EventKind, Trace, TraceEvent};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: String,
    /// Index of the offending event in the trace body.
    pub event: usize,
    pub message: String,
}

fn v(rule: &str, event: usize, message: String) -> Violation {
    Violation {
        rule: rule.into(),
        event,
        message,
    }
}

fn str_at<'a>(e: &'a TraceEvent, path: &[&str]) -> Option<&'a str> {
    let mut cur = &e.data;
    for p in path {
        cur = cur.get(p)?;
    }
    cur.as_str()
}

const TERMINAL: [&str; 4] = ["success", "failure", "preempted", "expired"];

pub fn audit_trace(trace: &Trace) -> Vec<Violation> {
    audit_events(&trace.events)
}

pub fn audit_events(events: &[TraceEvent]) -> Vec<Violation> {
    let mut out = Vec::new();
    // command id -> (event index, robot, terminal reports seen)
    let mut commands: BTreeMap<String, (usize, Option<String>, usize)> = BTreeMap::new();
    let mut chat: BTreeMap<String, (usize, bool)> = BTreeMap::new();
    let mut actions: Vec<(usize, String)> = Vec::new();
    let mut last_tick = 0;

    for (i, e) in events.iter().enumerate() {
        if e.tick < last_tick {
            out.push(v(
                "tick-order",
                i,
                format!("tick {} after tick {last_tick}", e.tick),
            ));
        }
        last_tick = last_tick.max(e.tick);
        match e.kind {
            EventKind::Command => {
                if let Some(id) = str_at(e, &["command_id"]) {
                    commands.insert(
                        id.to_string(),
                        (i, e.robot.as_ref().map(|r| r.0.clone()), 0),
                    );
                }
            }
            EventKind::Report => {
                let Some(cid) = str_at(e, &["command_id"]) else {
                    continue;
                };
                let kind = str_at(e, &["kind", "kind"]).unwrap_or("");
                match commands.get_mut(cid) {
                    None => out.push(v(
                        "orphan-report",
                        i,
                        format!("report for unknown command {cid}"),
                    )),
                    Some((_, robot, closed)) => {
                        if robot.as_deref() != e.robot.as_ref().map(|r| r.0.as_str()) {
                            out.push(v(
                                "orphan-report",
                                i,
                                format!("report for {cid} from another robot"),
                            ));
                        }
                        if TERMINAL.contains(&kind) {
                            *closed += 1;
                        }
                    }
                }
            }
            EventKind::Chat => {
                if let Some(id) = str_at(e, &["utterance_id"]) {
                    chat.insert(id.to_string(), (i, false));
                }
            }
            EventKind::Tmr | EventKind::AnalysisError => {
                if let Some(c) = str_at(e, &["utterance_id"]).and_then(|id| chat.get_mut(id)) {
                    c.1 = true;
                }
            }
            EventKind::Thought if str_at(e, &["kind"]) == Some("ActionIssued") => {
                if let Some(cid) = str_at(e, &["structured_cause", "command_id"]) {
                    actions.push((i, cid.to_string()));
                }
            }
            _ => {}
        }
    }
    for (cid, (i, _, closed)) in &commands {
        match closed {
            0 => out.push(v(
                "unclosed-command",
                *i,
                format!("command {cid} never got a terminal report"),
            )),
            1 => {}
            n => out.push(v(
                "unclosed-command",
                *i,
                format!("command {cid} got {n} terminal reports"),
            )),
        }
    }
    for (uid, (i, analyzed)) in &chat {
        if !analyzed {
            out.push(v(
                "unanalyzed-chat",
                *i,
                format!("utterance {uid} has no tmr or analysis_error"),
            ));
        }
    }
    let issued: BTreeSet<&String> = commands.keys().collect();
    for (i, cid) in &actions {
        if !issued.contains(cid) {
            out.push(v(
                "untraced-action",
                *i,
                format!("thought names command {cid} that was never sent"),
            ));
        }
    }
    out.sort_by_key(|x| x.event);
    out
}
