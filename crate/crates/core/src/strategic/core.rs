//! One robot's strategic core: attend, deliberate, render, monitor.

use std::collections::{BTreeMap, VecDeque};
use std::str::FromStr;
use std::sync::Arc;

use log::debug;
use serde_json::{json, Map, Value as Json};

use super::{
    assess_confidence, select, Agenda, AgendaEntry, Goal, GoalStatus, PlanLibrary, Provenance,
    StepState, StrategicError, TeamContext, TeamUpdate, Thought, ThoughtKind, UtilityScore,
    Utterance, Weights,
};
use crate::bus::{Command, Report, ReportKind, Verb};
use crate::kb::{
    generate, generate_thought, interpret_percept, Addressee, AnalysisError, Filler, Frame, Kb,
    SpeechAct, Tmr, Vmr,
};
use crate::types::{AgentId, Params, Point, Pose, Value};

/// Minimum confidence for a sighting to count as finding a goal's object.
pub const FOUND_CONFIDENCE: f64 = 0.5;
/// Deadline given to commands whose step does not set `deadline=`.
pub const DEFAULT_DEADLINE_TICKS: u64 = 3000;
/// Upper bound on deliberate/render rounds in one cycle.
const MAX_ROUNDS: usize = 16;
const POSE_LOG: usize = 64;

/// Something heard on the team chat, already analyzed.
#[derive(Debug, Clone, PartialEq)]
pub enum Heard {
    Tmr(Tmr),
    Failed {
        utterance_id: String,
        speaker: AgentId,
        text: String,
        error: AnalysisError,
    },
}

/// Input to [`StrategicCore::attend`].
#[derive(Debug, Clone, PartialEq)]
pub enum Event {
    Heard(Heard),
    Vmr(Vmr),
    Report(Report),
    Team(TeamUpdate),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decision {
    Idle,
    Step {
        goal_id: String,
        plan_id: String,
        step: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rendered {
    Command(Command),
    Utterance(Utterance),
}

#[derive(Debug, Clone, Default)]
pub struct CycleInput {
    pub tick: u64,
    pub heard: Vec<Heard>,
    pub reports: Vec<Report>,
    pub team: Vec<TeamUpdate>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CycleOutput {
    pub commands: Vec<Command>,
    pub utterances: Vec<Utterance>,
    pub team: Vec<TeamUpdate>,
    pub thoughts: Vec<Thought>,
    pub vmrs: Vec<Vmr>,
}

#[derive(Debug, Clone)]
struct Issued {
    goal_id: String,
    plan_id: String,
    step: usize,
}

#[derive(Debug, Clone)]
struct Sighting {
    instance: String,
    position: Point,
    room: Option<String>,
    confidence: f64,
}

pub struct StrategicCore {
    robot_id: AgentId,
    kb: Arc<Kb>,
    library: Arc<PlanLibrary>,
    team: TeamContext,
    weights: Weights,
    agenda: Agenda,
    thoughts: Vec<Thought>,
    drained: usize,
    command_seq: u64,
    issued: BTreeMap<String, Issued>,
    /// Physical command in flight and the goal it serves.
    outstanding: Option<(String, String)>,
    sightings: BTreeMap<String, Sighting>,
    outbox: Vec<TeamUpdate>,
    poses: VecDeque<(u64, Pose)>,
}

fn obj(v: Json) -> Map<String, Json> {
    match v {
        Json::Object(m) => m,
        _ => Map::new(),
    }
}

fn fmt3(x: f64) -> String {
    format!("{x:.3}")
}

impl StrategicCore {
    pub fn new(
        robot_id: AgentId,
        kb: Arc<Kb>,
        library: Arc<PlanLibrary>,
        team: TeamContext,
    ) -> StrategicCore {
        StrategicCore {
            robot_id,
            kb,
            library,
            team,
            weights: Weights::default(),
            agenda: Agenda::new(),
            thoughts: Vec::new(),
            drained: 0,
            command_seq: 0,
            issued: BTreeMap::new(),
            outstanding: None,
            sightings: BTreeMap::new(),
            outbox: Vec::new(),
            poses: VecDeque::new(),
        }
    }

    pub fn with_weights(mut self, weights: Weights) -> StrategicCore {
        self.weights = weights;
        self
    }

    pub fn robot_id(&self) -> &AgentId {
        &self.robot_id
    }

    pub fn agenda(&self) -> &Agenda {
        &self.agenda
    }

    pub fn weights(&self) -> Weights {
        self.weights
    }

    /// Every thought so far.
    pub fn thoughts(&self) -> &[Thought] {
        &self.thoughts
    }

    /// Thoughts produced since the last drain.
    pub fn drain_thoughts(&mut self) -> Vec<Thought> {
        let out = self.thoughts[self.drained..].to_vec();
        self.drained = self.thoughts.len();
        out
    }

    /// Team updates produced since the last call.
    pub fn take_team_updates(&mut self) -> Vec<TeamUpdate> {
        std::mem::take(&mut self.outbox)
    }

    /// Record the robot's pose so percept batches can be placed in the map.
    pub fn observe_pose(&mut self, tick: u64, pose: Pose) {
        if self.poses.len() == POSE_LOG {
            self.poses.pop_front();
        }
        self.poses.push_back((tick, pose));
    }

    fn pose_at(&self, tick: u64) -> Option<Pose> {
        self.poses
            .iter()
            .rev()
            .find(|(t, _)| *t <= tick)
            .or(self.poses.front())
            .map(|(_, p)| *p)
    }

    fn think(
        &mut self,
        tick: u64,
        kind: ThoughtKind,
        goal_id: Option<&str>,
        cause: Json,
        slots: &[(&str, String)],
    ) {
        let slots: BTreeMap<String, String> = slots
            .iter()
            .map(|(k, v)| (k.to_string(), v.clone()))
            .collect();
        let structured_cause = obj(cause);
        let rendered_text = generate_thought(kind.as_str(), &slots, &self.kb)
            .unwrap_or_else(|_| format!("{kind}: {}", Json::Object(structured_cause.clone())));
        let thought = Thought {
            thought_id: format!("{}-t{}", self.robot_id, self.thoughts.len() + 1),
            tick,
            robot_id: self.robot_id.clone(),
            kind,
            goal_id: goal_id.map(str::to_string),
            structured_cause,
            rendered_text,
        };
        debug!("{}: {}", self.robot_id, thought.rendered_text);
        self.thoughts.push(thought);
    }

    fn is_robot(&self, id: &AgentId) -> bool {
        self.kb.profile(id).is_some_and(|p| p.kind.is_robot())
    }

    fn priority_of(&self, id: &AgentId) -> f64 {
        self.kb.profile(id).map(|p| p.priority()).unwrap_or(0.5)
    }

    // ---- attend -------------------------------------------------------

    /// Fold new events into the agenda. Every change to the agenda is
    /// recorded as a thought.
    pub fn attend(&mut self, events: &[Event], tick: u64) {
        for e in events {
            match e {
                Event::Heard(h) => self.hear(h, tick),
                Event::Vmr(v) => self.see(v, tick),
                Event::Team(u) => self.team_update(u, tick),
                Event::Report(r) => self.monitor(std::slice::from_ref(r), tick),
            }
        }
    }

    fn adopt(&mut self, goal: Goal, tick: u64, cause: Json, task: String) {
        let id = goal.goal_id.clone();
        let requester = self.kb.display_name(&goal.requester);
        let priority = goal.priority;
        let concept = goal.concept.clone();
        if !self.agenda.insert(goal) {
            return;
        }
        // Anything already seen that the goal is about counts at once.
        let theme = self
            .agenda
            .entry(&id)
            .and_then(|e| e.goal.bindings.get("theme"))
            .and_then(|f| f.concept().map(str::to_string));
        if let Some(theme) = theme {
            let seen = self
                .sightings
                .iter()
                .find(|(c, _)| self.kb.ontology.is_a(c, &theme))
                .map(|(_, s)| s.clone());
            if let Some(s) = seen {
                let facts = self.facts_for(&s);
                if let Some(e) = self.agenda.entry_mut(&id) {
                    e.facts = facts;
                }
            }
        }
        let mut cause = obj(cause);
        cause.insert("goal".into(), json!(id));
        cause.insert("concept".into(), json!(concept));
        cause.insert("priority".into(), json!(priority));
        cause.insert("requester_name".into(), json!(requester));
        self.think(
            tick,
            ThoughtKind::GoalAdopted,
            Some(&id),
            Json::Object(cause),
            &[
                ("goal", id.clone()),
                ("task", task),
                ("requester", requester),
                ("priority", format!("{priority:.2}")),
            ],
        );
    }

    fn hear(&mut self, h: &Heard, tick: u64) {
        match h {
            Heard::Tmr(tmr) => {
                if self.is_robot(&tmr.speaker) {
                    return;
                }
                match tmr.speech_act {
                    SpeechAct::RequestAction | SpeechAct::RequestInfo => {
                        let goal = Goal {
                            goal_id: format!("goal-{}", tmr.tmr_id),
                            concept: tmr.head.clone(),
                            bindings: tmr.bindings.clone(),
                            priority: self.priority_of(&tmr.speaker),
                            status: GoalStatus::Pending,
                            provenance: Provenance::FromUtterance {
                                tmr_id: tmr.tmr_id.clone(),
                            },
                            requester: tmr.speaker.clone(),
                            addressee: tmr.addressee.clone(),
                        };
                        let task = match tmr.theme().and_then(Filler::concept) {
                            Some(t) => format!("{} {t}", tmr.head),
                            None => tmr.head.clone(),
                        };
                        let cause = json!({
                            "tmr_id": tmr.tmr_id,
                            "requester": tmr.speaker,
                            "utterance": tmr.source_text,
                            "speech_act": tmr.speech_act,
                            "bindings": tmr.bindings,
                        });
                        self.adopt(goal, tick, cause, task);
                    }
                    SpeechAct::Inform => {
                        let detail = format!(
                            "nothing to do with an INFORM {} from {}",
                            tmr.head, tmr.speaker
                        );
                        self.think(
                            tick,
                            ThoughtKind::Anomaly,
                            None,
                            json!({"tmr_id": tmr.tmr_id, "utterance": tmr.source_text, "ignored": true}),
                            &[("detail", detail)],
                        );
                    }
                    SpeechAct::Ack => {}
                }
            }
            Heard::Failed {
                utterance_id,
                speaker,
                text,
                error,
            } => {
                if self.is_robot(speaker) || self.kb.profile(speaker).is_none() {
                    return;
                }
                let goal = Goal {
                    goal_id: format!("clarify-{utterance_id}"),
                    concept: "CLARIFY".into(),
                    bindings: BTreeMap::new(),
                    priority: self.priority_of(speaker),
                    status: GoalStatus::Pending,
                    provenance: Provenance::SelfGenerated {
                        reason: error.to_string(),
                    },
                    requester: speaker.clone(),
                    addressee: Addressee::Team,
                };
                let cause = json!({
                    "utterance_id": utterance_id,
                    "requester": speaker,
                    "utterance": text,
                    "analysis_error": error.to_string(),
                });
                self.adopt(goal, tick, cause, "CLARIFY".into());
            }
        }
    }

    fn nearest_room(&self, p: Point) -> Option<String> {
        if let Some(r) = self.team.room_at(p) {
            return Some(r.name.clone());
        }
        self.team
            .rooms
            .iter()
            .min_by(|a, b| {
                a.centroid()
                    .distance(&p)
                    .total_cmp(&b.centroid().distance(&p))
            })
            .map(|r| r.name.clone())
    }

    fn facts_for(&self, s: &Sighting) -> Params {
        let mut f = Params::new();
        f.insert(
            "found".into(),
            Value::Pose(Pose::new(s.position.x, s.position.y, 0.0)),
        );
        f.insert("found_instance".into(), Value::Id(s.instance.clone()));
        if let Some(r) = &s.room {
            f.insert("found_room".into(), Value::Id(r.clone()));
        }
        f
    }

    fn see(&mut self, vmr: &Vmr, tick: u64) {
        for o in &vmr.objects {
            if o.confidence < FOUND_CONFIDENCE {
                continue;
            }
            let better = self
                .sightings
                .get(&o.concept)
                .is_none_or(|s| o.confidence > s.confidence);
            if better {
                let room = self.nearest_room(o.position);
                self.sightings.insert(
                    o.concept.clone(),
                    Sighting {
                        instance: o.instance_id.clone(),
                        position: o.position,
                        room,
                        confidence: o.confidence,
                    },
                );
            }
            let s = self.sightings[&o.concept].clone();
            let wanted: Vec<String> = self
                .agenda
                .entries()
                .iter()
                .filter(|e| !e.goal.status.is_terminal() && !e.facts.contains_key("found"))
                .filter(|e| {
                    e.goal
                        .bindings
                        .get("theme")
                        .and_then(Filler::concept)
                        .is_some_and(|t| self.kb.ontology.is_a(&o.concept, t))
                })
                .map(|e| e.goal.goal_id.clone())
                .collect();
            for goal_id in wanted {
                let facts = self.facts_for(&s);
                let entry = self.agenda.entry_mut(&goal_id).expect("goal listed above");
                entry.facts = facts.clone();
                let plan_id = entry.selected().map(str::to_string);
                self.outbox.push(TeamUpdate {
                    from: self.robot_id.clone(),
                    goal_id: goal_id.clone(),
                    plan_id,
                    step: None,
                    facts,
                });
                let room = s.room.clone().unwrap_or_default();
                self.think(
                    tick,
                    ThoughtKind::ReportProcessed,
                    Some(&goal_id),
                    json!({
                        "vmr_id": vmr.vmr_id,
                        "concept": o.concept,
                        "instance": s.instance,
                        "position": [s.position.x, s.position.y],
                        "room": room,
                        "confidence": s.confidence,
                    }),
                    &[
                        ("robot", self.robot_id.to_string()),
                        ("outcome", format!("a sighting of {} in {room}", o.concept)),
                        ("command", vmr.vmr_id.clone()),
                    ],
                );
            }
        }
    }

    fn team_update(&mut self, u: &TeamUpdate, tick: u64) {
        if u.from == self.robot_id {
            return;
        }
        let Some(entry) = self.agenda.entry_mut(&u.goal_id) else {
            return;
        };
        let mut changed = false;
        if !u.facts.is_empty() && !entry.facts.contains_key("found") {
            entry.facts = u.facts.clone();
            changed = true;
        }
        let mut step_note = None;
        if let (Some(plan_id), Some((i, state))) = (&u.plan_id, u.step) {
            let current = entry.selected() == Some(plan_id.as_str());
            if current {
                let plan = entry.plan.as_mut().expect("selected plan");
                if let Some(step) = plan.steps.get_mut(i) {
                    if step.state.can_become(state) {
                        step.state = state;
                        changed = true;
                        step_note = Some((i, state));
                        if state == StepState::Failed && !step.optional {
                            entry.flagged = true;
                            entry.failed_plans.insert(plan_id.clone());
                        }
                    }
                }
            } else if state == StepState::Failed {
                let optional = self
                    .library
                    .templates()
                    .iter()
                    .find(|t| &t.plan_id == plan_id)
                    .and_then(|t| t.steps.get(i))
                    .is_some_and(|s| s.optional);
                if !optional && entry.failed_plans.insert(plan_id.clone()) {
                    changed = true;
                }
            }
        }
        if changed {
            let goal_id = u.goal_id.clone();
            let mut slots = vec![
                ("robot", u.from.to_string()),
                (
                    "outcome",
                    if u.facts.is_empty() {
                        "progress".to_string()
                    } else {
                        "a sighting".to_string()
                    },
                ),
                (
                    "command",
                    u.plan_id.clone().unwrap_or_else(|| goal_id.clone()),
                ),
            ];
            if let Some((i, state)) = step_note {
                slots[1].1 = format!("{state:?}");
                slots.push(("step", i.to_string()));
                slots.push(("state", format!("{state:?}")));
            }
            self.think(
                tick,
                ThoughtKind::ReportProcessed,
                Some(&goal_id),
                json!({"from": u.from, "plan": u.plan_id, "step": u.step.map(|s| s.0), "state": u.step.map(|s| s.1), "facts": u.facts}),
                &slots,
            );
            self.settle(&goal_id, tick);
        }
    }

    /// Mark the goal achieved once its plan has completed.
    fn settle(&mut self, goal_id: &str, tick: u64) {
        let Some(entry) = self.agenda.entry_mut(goal_id) else {
            return;
        };
        let done = entry.plan.as_ref().is_some_and(|p| p.is_complete());
        if !done || entry.goal.status.is_terminal() {
            return;
        }
        if entry.goal.status != GoalStatus::Active {
            entry.goal.status = GoalStatus::Active;
        }
        entry.goal.status = GoalStatus::Achieved;
        let plan = entry.selected().unwrap_or_default().to_string();
        self.think(
            tick,
            ThoughtKind::GoalAchieved,
            Some(goal_id),
            json!({"goal": goal_id, "plan": plan}),
            &[("goal", goal_id.to_string()), ("plan", plan)],
        );
    }

    // ---- monitor ------------------------------------------------------

    /// Match command reports to plan steps.
    pub fn monitor(&mut self, reports: &[Report], tick: u64) {
        for r in reports {
            let Some(cid) = &r.command_id else { continue };
            if matches!(
                r.kind,
                ReportKind::PerceptBatch(_) | ReportKind::SafetyEvent(_)
            ) {
                continue;
            }
            let Some(issued) = self.issued.get(cid).cloned() else {
                self.think(
                    tick,
                    ThoughtKind::Anomaly,
                    None,
                    json!({"report_id": r.report_id, "command_id": cid, "kind": r.kind.tag()}),
                    &[(
                        "detail",
                        format!("report {} names unknown command {cid}", r.report_id),
                    )],
                );
                continue;
            };
            let new_state = match &r.kind {
                ReportKind::Success => StepState::Done,
                ReportKind::Failure(_) | ReportKind::Preempted | ReportKind::Expired => {
                    StepState::Failed
                }
                _ => continue,
            };
            self.issued.remove(cid);
            if self.outstanding.as_ref().is_some_and(|(c, _)| c == cid) {
                self.outstanding = None;
            }
            let outcome = match &r.kind {
                ReportKind::Failure(why) => format!("failure ({why})"),
                k => k.tag().to_string(),
            };
            let mut slots = vec![
                ("robot", r.robot_id.to_string()),
                ("outcome", outcome),
                ("command", cid.clone()),
            ];
            let mut changed = false;
            if let Some(entry) = self.agenda.entry_mut(&issued.goal_id) {
                if entry.selected() == Some(issued.plan_id.as_str()) {
                    let plan = entry.plan.as_mut().expect("selected plan");
                    let step = &mut plan.steps[issued.step];
                    if step.state.can_become(new_state) {
                        step.state = new_state;
                        changed = true;
                        if new_state == StepState::Failed && !step.optional {
                            entry.flagged = true;
                            if !matches!(r.kind, ReportKind::Preempted) {
                                entry.failed_plans.insert(issued.plan_id.clone());
                            }
                        }
                    }
                }
            }
            if changed {
                slots.push(("step", issued.step.to_string()));
                slots.push(("state", format!("{new_state:?}")));
                self.outbox.push(TeamUpdate {
                    from: self.robot_id.clone(),
                    goal_id: issued.goal_id.clone(),
                    plan_id: Some(issued.plan_id.clone()),
                    step: Some((issued.step, new_state)),
                    facts: Params::new(),
                });
            }
            self.think(
                tick,
                ThoughtKind::ReportProcessed,
                Some(&issued.goal_id),
                json!({
                    "report_id": r.report_id,
                    "command_id": cid,
                    "kind": r.kind,
                    "plan": issued.plan_id,
                    "step": issued.step,
                    "state": if changed { Some(new_state) } else { None },
                }),
                &slots,
            );
            self.settle(&issued.goal_id, tick);
        }
    }

    // ---- deliberate ---------------------------------------------------

    fn set_status(entry: &mut AgendaEntry, next: GoalStatus) {
        if entry.goal.status == next {
            return;
        }
        if entry.goal.status == GoalStatus::Suspended && next != GoalStatus::Active {
            entry.goal.status = GoalStatus::Active;
        }
        if entry.goal.status.can_become(next) {
            entry.goal.status = next;
        }
    }

    /// Pick the next step to take for the focus goal, choosing (or
    /// re-choosing) its plan when needed.
    pub fn deliberate(&mut self, tick: u64) -> Result<Decision, StrategicError> {
        let Some(focus) = self.agenda.focus().map(|e| e.goal.goal_id.clone()) else {
            return Ok(Decision::Idle);
        };
        let mut suspended = Vec::new();
        for e in self.agenda.entries_mut() {
            if e.goal.goal_id != focus && e.goal.status == GoalStatus::Active {
                e.goal.status = GoalStatus::Suspended;
                suspended.push(e.goal.goal_id.clone());
            }
        }
        for id in suspended {
            debug!("{}: suspended {id} in favour of {focus}", self.robot_id);
        }
        let entry = self.agenda.entry(&focus).expect("focus exists");
        let needs_plan = entry.plan.is_none()
            || entry.flagged
            || entry.plan.as_ref().is_some_and(|p| p.has_failed());
        if needs_plan {
            self.choose_plan(&focus, tick)?;
        }
        let entry = self.agenda.entry_mut(&focus).expect("focus exists");
        Self::set_status(entry, GoalStatus::Active);
        let plan = entry.plan.as_ref().expect("plan chosen");
        let busy_here = self.outstanding.as_ref().is_some_and(|(_, g)| *g == focus);
        let next = plan.runnable().into_iter().find(|&i| {
            let s = &plan.steps[i];
            s.assigned_to == self.robot_id && !(busy_here && Verb::from_str(&s.concept).is_ok())
        });
        Ok(match next {
            Some(step) => Decision::Step {
                goal_id: focus,
                plan_id: plan.plan_id.clone(),
                step,
            },
            None => Decision::Idle,
        })
    }

    fn choose_plan(&mut self, goal_id: &str, tick: u64) -> Result<(), StrategicError> {
        let entry = self.agenda.entry(goal_id).expect("goal exists");
        let failed = &entry.failed_plans;
        let candidates = self
            .library
            .candidates(&entry.goal, &self.team, &self.kb, &|id| failed.contains(id));
        if candidates.is_empty() {
            let tried: Vec<String> = entry.failed_plans.iter().cloned().collect();
            let reason = if tried.is_empty() {
                format!("no plan in the library can achieve {}", entry.goal.concept)
            } else {
                format!(
                    "every plan for {} has failed ({})",
                    entry.goal.concept,
                    tried.join(", ")
                )
            };
            let entry = self.agenda.entry_mut(goal_id).expect("goal exists");
            Self::set_status(entry, GoalStatus::Abandoned);
            entry.flagged = false;
            self.think(
                tick,
                ThoughtKind::GoalAbandoned,
                Some(goal_id),
                json!({"goal": goal_id, "reason": reason, "failed_plans": tried}),
                &[("goal", goal_id.to_string()), ("reason", reason.clone())],
            );
            return Err(StrategicError::NoPlanAvailable(goal_id.to_string()));
        }
        let priority = entry.goal.priority;
        let scores: Vec<UtilityScore> = candidates
            .iter()
            .map(|p| {
                UtilityScore::compute(
                    &p.plan_id,
                    priority,
                    p.est_success,
                    p.est_cost,
                    self.weights,
                )
            })
            .collect();
        let best = select(&scores).expect("non-empty");
        let confidence = assess_confidence(&scores);
        let winner = scores[best].clone();
        let runner_up = scores
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != best)
            .max_by(|a, b| {
                a.1.total
                    .total_cmp(&b.1.total)
                    .then_with(|| b.1.plan_id.cmp(&a.1.plan_id))
            })
            .map(|(_, s)| s.clone());
        let plan = candidates.into_iter().nth(best).expect("index in range");
        let entry = self.agenda.entry_mut(goal_id).expect("goal exists");
        entry.plan = Some(plan);
        entry.candidates = scores.clone();
        entry.flagged = false;
        let mut slots = vec![
            ("plan", winner.plan_id.clone()),
            ("goal", goal_id.to_string()),
            ("total", fmt3(winner.total)),
            ("component", winner.top_component().to_string()),
        ];
        if let Some(r) = &runner_up {
            slots.push(("runner_up", r.plan_id.clone()));
            slots.push(("runner_up_total", fmt3(r.total)));
        }
        self.think(
            tick,
            ThoughtKind::PlanSelected,
            Some(goal_id),
            json!({
                "goal": goal_id,
                "plan": winner.plan_id,
                "scores": scores,
                "runner_up": runner_up.as_ref().map(|r| r.plan_id.clone()),
                "top_component": winner.top_component(),
                "weights": self.weights,
            }),
            &slots,
        );
        self.think(
            tick,
            ThoughtKind::ConfidenceAssessed,
            Some(goal_id),
            json!({"goal": goal_id, "plan": winner.plan_id, "confidence": confidence}),
            &[
                ("plan", winner.plan_id.clone()),
                ("confidence", fmt3(confidence)),
            ],
        );
        Ok(())
    }

    // ---- render -------------------------------------------------------

    fn resolve_var(&self, var: &str, entry: &AgendaEntry) -> Option<Value> {
        let rooms = self.team.room_names();
        let half = rooms.len().div_ceil(2);
        match var {
            "label" => {
                let theme = entry.goal.bindings.get("theme")?.concept()?;
                self.kb
                    .ontology
                    .label_for_concept(theme)
                    .map(|l| Value::Id(l.to_string()))
            }
            "all_rooms" => Some(Value::IdList(rooms)),
            "rooms_half_1" => Some(Value::IdList(rooms[..half].to_vec())),
            "rooms_half_2" => Some(Value::IdList(rooms[half..].to_vec())),
            "requester" => Some(Value::Id(entry.goal.requester.to_string())),
            v if super::plans::FACT_VARS.contains(&v) => entry.facts.get(v).cloned(),
            role => match entry.goal.bindings.get(role)? {
                Filler::Concept(c) => Some(Value::Id(c.clone())),
                Filler::Agent(a) => Some(Value::Id(a.to_string())),
                Filler::Team => Some(Value::Id("TEAM".into())),
            },
        }
    }

    /// Room name for a room concept, every room for a non-specific place.
    fn place_value(&self, v: Value) -> Value {
        match v {
            Value::Id(id) => {
                if let Some(r) = self.team.room_for_concept(&id) {
                    Value::Id(r.name.clone())
                } else if self.kb.ontology.contains(&id)
                    && self.kb.ontology.is_a(&id, "PLACE")
                    && id != "DOCK"
                {
                    Value::IdList(self.team.room_names())
                } else {
                    Value::Id(id)
                }
            }
            Value::IdList(l) => Value::IdList(
                l.into_iter()
                    .map(|x| {
                        self.team
                            .room_for_concept(&x)
                            .map(|r| r.name.clone())
                            .unwrap_or(x)
                    })
                    .collect(),
            ),
            v => v,
        }
    }

    fn fail_step(&mut self, goal_id: &str, step: usize, tick: u64, reason: &str) -> StrategicError {
        let entry = self.agenda.entry_mut(goal_id).expect("goal exists");
        let plan = entry.plan.as_mut().expect("plan selected");
        let plan_id = plan.plan_id.clone();
        plan.steps[step].state = StepState::Failed;
        entry.flagged = true;
        entry.failed_plans.insert(plan_id.clone());
        self.outbox.push(TeamUpdate {
            from: self.robot_id.clone(),
            goal_id: goal_id.to_string(),
            plan_id: Some(plan_id.clone()),
            step: Some((step, StepState::Failed)),
            facts: Params::new(),
        });
        self.think(
            tick,
            ThoughtKind::Anomaly,
            Some(goal_id),
            json!({"goal": goal_id, "plan": plan_id, "step": step, "reason": reason}),
            &[(
                "detail",
                format!("cannot render step {step} of {plan_id}: {reason}"),
            )],
        );
        StrategicError::UnrenderableStep {
            plan_id,
            step,
            reason: reason.to_string(),
        }
    }

    /// Turn a plan step into a command for the tactical layer or an
    /// utterance for the team chat.
    pub fn render_action(
        &mut self,
        goal_id: &str,
        step: usize,
        tick: u64,
    ) -> Result<Rendered, StrategicError> {
        let entry = self
            .agenda
            .entry(goal_id)
            .ok_or_else(|| StrategicError::UnknownGoal(goal_id.to_string()))?;
        let plan = entry
            .plan
            .as_ref()
            .ok_or_else(|| StrategicError::NoPlanAvailable(goal_id.to_string()))?;
        let plan_id = plan.plan_id.clone();
        let s = plan
            .steps
            .get(step)
            .cloned()
            .ok_or_else(|| StrategicError::UnrenderableStep {
                plan_id: plan_id.clone(),
                step,
                reason: "no such step".into(),
            })?;
        let mut params = Params::new();
        for (k, v) in &s.bindings {
            let value = match v.as_id().and_then(|x| x.strip_prefix('?')) {
                Some(var) => match self.resolve_var(var, entry) {
                    Some(x) => x,
                    None => {
                        return Err(self.fail_step(
                            goal_id,
                            step,
                            tick,
                            &format!("?{var} is not known yet"),
                        ))
                    }
                },
                None => v.clone(),
            };
            params.insert(k.clone(), value);
        }
        let goal = entry.goal.clone();

        if let Ok(verb) = Verb::from_str(&s.concept) {
            let deadline = params
                .remove("deadline")
                .and_then(|v| v.as_scalar())
                .map(|d| d as u64);
            let mut out = Params::new();
            for (k, v) in params {
                let v = self.place_value(v);
                match (verb, k.as_str(), v) {
                    (Verb::MoveTo, "target", Value::Id(room)) => match self.team.room(&room) {
                        Some(r) => {
                            let c = r.centroid();
                            out.insert(k, Value::Pose(Pose::new(c.x, c.y, 0.0)));
                        }
                        None => {
                            return Err(self.fail_step(
                                goal_id,
                                step,
                                tick,
                                &format!("no place called {room}"),
                            ))
                        }
                    },
                    (Verb::SearchArea, "room", v @ Value::IdList(_)) => {
                        out.insert("rooms".into(), v);
                    }
                    (Verb::ReturnToDock | Verb::Stop, "destination", _) => {}
                    (_, _, v) => {
                        out.insert(k, v);
                    }
                }
            }
            self.command_seq += 1;
            let cmd = Command {
                command_id: format!("{}-c{}", self.robot_id, self.command_seq),
                robot_id: s.assigned_to.clone(),
                verb,
                params: out,
                priority: goal.priority.clamp(0.0, 1.0),
                issued_tick: tick,
                deadline_ticks: Some(deadline.unwrap_or(DEFAULT_DEADLINE_TICKS)),
            };
            if let Err(why) = cmd.validate() {
                return Err(self.fail_step(goal_id, step, tick, &why));
            }
            let entry = self.agenda.entry_mut(goal_id).expect("goal exists");
            let ps = &mut entry.plan.as_mut().expect("plan").steps[step];
            ps.state = StepState::Issued;
            ps.command_id = Some(cmd.command_id.clone());
            self.issued.insert(
                cmd.command_id.clone(),
                Issued {
                    goal_id: goal_id.into(),
                    plan_id: plan_id.clone(),
                    step,
                },
            );
            self.outstanding = Some((cmd.command_id.clone(), goal_id.to_string()));
            self.think(
                tick,
                ThoughtKind::ActionIssued,
                Some(goal_id),
                json!({"goal": goal_id, "plan": plan_id, "step": step, "verb": verb.as_str(), "command_id": cmd.command_id, "params": cmd.params}),
                &[
                    ("action", format!("{} ({})", verb.as_str(), cmd.command_id)),
                    ("assignee", cmd.robot_id.to_string()),
                    ("step", step.to_string()),
                    ("plan", plan_id.clone()),
                ],
            );
            return Ok(Rendered::Command(cmd));
        }

        let (act, addressee) = match s.concept.as_str() {
            "REPORT" => (SpeechAct::Inform, Addressee::Team),
            "ASK" => (
                SpeechAct::RequestInfo,
                Addressee::Agent(goal.requester.clone()),
            ),
            other => {
                return Err(self.fail_step(
                    goal_id,
                    step,
                    tick,
                    &format!("{other} has no rendering"),
                ))
            }
        };
        let Some(content) = params
            .remove("content")
            .and_then(|v| v.as_id().map(str::to_string))
        else {
            return Err(self.fail_step(goal_id, step, tick, "missing content"));
        };
        let mut tmr = Tmr::new(
            act,
            content.clone(),
            self.robot_id.clone(),
            addressee.clone(),
        );
        for (k, v) in params {
            let filler = match v {
                Value::Id(id) if self.kb.ontology.contains(&id) => Filler::Concept(id),
                Value::Id(id) if self.team.room(&id).is_some() => {
                    Filler::Concept(Kb::room_concept(&id))
                }
                Value::Id(id) if self.kb.profile(&AgentId::new(&id)).is_some() => {
                    Filler::Agent(AgentId::new(id))
                }
                v => {
                    return Err(self.fail_step(
                        goal_id,
                        step,
                        tick,
                        &format!("{k}={v:?} cannot be said"),
                    ))
                }
            };
            tmr = tmr.with(&k, filler);
        }
        if let Some(owner) = goal.bindings.get("owner") {
            if tmr.bindings.contains_key("theme")
                && self.kb.ontology.property(&content, "owner").is_some()
            {
                tmr = tmr.with("owner", owner.clone());
            }
        }
        let text = match generate(&tmr, &self.kb) {
            Ok(t) => t,
            Err(e) => return Err(self.fail_step(goal_id, step, tick, &e.to_string())),
        };
        let entry = self.agenda.entry_mut(goal_id).expect("goal exists");
        entry.plan.as_mut().expect("plan").steps[step].state = StepState::Done;
        self.outbox.push(TeamUpdate {
            from: self.robot_id.clone(),
            goal_id: goal_id.to_string(),
            plan_id: Some(plan_id.clone()),
            step: Some((step, StepState::Done)),
            facts: Params::new(),
        });
        self.think(
            tick,
            ThoughtKind::ActionIssued,
            Some(goal_id),
            json!({"goal": goal_id, "plan": plan_id, "step": step, "verb": s.concept, "text": text, "tmr": tmr}),
            &[
                ("action", format!("{} \"{text}\"", s.concept)),
                ("assignee", self.robot_id.to_string()),
                ("step", step.to_string()),
                ("plan", plan_id.clone()),
            ],
        );
        self.settle(goal_id, tick);
        Ok(Rendered::Utterance(Utterance {
            speaker: self.robot_id.clone(),
            addressee,
            text,
        }))
    }

    // ---- cycle --------------------------------------------------------

    /// One full strategic cycle.
    pub fn cycle(&mut self, input: CycleInput) -> CycleOutput {
        let tick = input.tick;
        let mut vmrs = Vec::new();
        let mut events: Vec<Event> = input.team.into_iter().map(Event::Team).collect();
        events.extend(input.heard.into_iter().map(Event::Heard));
        let mut command_reports = Vec::new();
        for r in input.reports {
            match &r.kind {
                ReportKind::PerceptBatch(dets) => {
                    let Some(pose) = self.pose_at(r.tick) else {
                        continue;
                    };
                    let frame = Frame {
                        pose,
                        tick: r.tick,
                        width: self.team.width,
                        height: self.team.height,
                    };
                    let outcome = interpret_percept(dets, &r.robot_id, &self.kb, &frame);
                    if !outcome.vmr.objects.is_empty() {
                        vmrs.push(outcome.vmr);
                    }
                }
                _ if r.command_id.is_some() => command_reports.push(r),
                _ => {}
            }
        }
        events.extend(vmrs.iter().cloned().map(Event::Vmr));
        events.extend(command_reports.into_iter().map(Event::Report));
        self.attend(&events, tick);

        let mut out = CycleOutput {
            vmrs,
            ..Default::default()
        };
        for _ in 0..MAX_ROUNDS {
            match self.deliberate(tick) {
                Ok(Decision::Idle) => break,
                Ok(Decision::Step { goal_id, step, .. }) => {
                    match self.render_action(&goal_id, step, tick) {
                        Ok(Rendered::Command(c)) => out.commands.push(c),
                        Ok(Rendered::Utterance(u)) => out.utterances.push(u),
                        Err(_) => continue,
                    }
                }
                Err(_) => continue,
            }
        }
        out.team = self.take_team_updates();
        out.thoughts = self.drain_thoughts();
        out
    }
}
