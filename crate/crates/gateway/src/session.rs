//! A running scenario: world, tactical layers, buses, strategic cores and
//! the team chat, advanced one tick at a time.
//!
//! Each tick:
//! 1. due scripted utterances are queued, then queued chat is analyzed and
//!    handed to every robot's strategic inbox;
//! 2. every tactical layer ticks on the detections from the last world step;
//! 3. the world integrates the merged actuator requests and senses;
//! 4. reports are drained from each uplink;
//! 5. on every `strategic_period_ticks`-th tick each strategic core that is
//!    not stalled runs one cycle, in robot id order. Its commands go down
//!    the bus, its utterances onto the chat, its team updates to the other
//!    cores' inboxes.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use harmonic_core::bt::{
    default_safety_spec, parse_tree_file, supported_verbs, Origin, TacticalLayer,
};
use harmonic_core::bus::{ChannelPair, Report, ReportKind, SendCommandOutcome};
use harmonic_core::kb::{analyze, load_kb, Addressee, Kb, KbValidationError};
use harmonic_core::sim::{
    load_scenario, Detection, Gripper, ObjectPlace, ScenarioConfig, ScenarioValidationError,
    WorldState, CELL_SIZE, DT,
};
use harmonic_core::strategic::{
    CycleInput, Heard, PlanLibrary, PlanValidationError, StrategicCore, TeamContext, TeamUpdate,
};
use harmonic_core::types::AgentId;

use crate::protocol::{
    ChatLine, Delta, GoalView, HumanView, ObjectView, RobotView, RoomView, Snapshot,
};
use crate::trace::{EventKind, Trace, TraceEvent, TraceHeader};

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error(transparent)]
    Scenario(#[from] ScenarioValidationError),
    #[error("knowledge base: {0}")]
    Kb(#[from] KbValidationError),
    #[error(transparent)]
    Plans(#[from] PlanValidationError),
    #[error("robot `{robot}`: {message}")]
    Robot { robot: String, message: String },
    #[error("runtime fault at tick {tick}: {message}")]
    Runtime { tick: u64, message: String },
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl GatewayError {
    /// 2 for anything wrong with the inputs, 3 for faults while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            GatewayError::Runtime { .. } | GatewayError::Io(_) => 3,
            _ => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InjectError {
    #[error("utterance is empty")]
    Empty,
    #[error("`{0}` is not a human in this scenario")]
    UnknownSender(String),
    #[error("the run has finished")]
    Finished,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Every adopted goal reached a terminal state and nothing is pending.
    Quiescent,
    MaxTicks,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalOutcome {
    pub robot: AgentId,
    pub goal_id: String,
    pub concept: String,
    pub status: String,
    pub plan: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub seed: u64,
    pub ticks: u64,
    pub stop_reason: Option<StopReason>,
    pub collisions: u64,
    /// Ticks on which a safety branch was active while the command subtree
    /// still emitted an actuator request.
    pub safety_conflicts: u64,
    pub faults: Vec<String>,
    pub goals: Vec<GoalOutcome>,
    pub chat: Vec<String>,
    pub trace_events: usize,
    pub trace_digest: String,
}

/// Events produced by one tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub tick: u64,
    pub events: Vec<TraceEvent>,
    pub chat: Vec<ChatLine>,
}

struct RobotRuntime {
    id: AgentId,
    tactical: TacticalLayer,
    bus: ChannelPair,
    core: StrategicCore,
    detections: Vec<Detection>,
    safety_active: bool,
    faulted: bool,
    heard: Vec<Heard>,
    reports: Vec<Report>,
    team: Vec<TeamUpdate>,
    tactical_ticks: u64,
    strategic_cycles: u64,
}

struct PendingChat {
    speaker: AgentId,
    addressee: Addressee,
    text: String,
}

pub struct Session {
    config: ScenarioConfig,
    kb: Arc<Kb>,
    world: WorldState,
    robots: Vec<RobotRuntime>,
    humans: BTreeSet<AgentId>,
    script: Vec<(u64, AgentId, String)>,
    script_pos: usize,
    pending_chat: VecDeque<PendingChat>,
    chat: Vec<ChatLine>,
    utterance_seq: u64,
    trace: Vec<TraceEvent>,
    tick: u64,
    max_ticks: u64,
    stop_when_quiescent: bool,
    stop_reason: Option<StopReason>,
    collisions: u64,
    safety_conflicts: u64,
    faults: Vec<String>,
}

fn robot_err(robot: &str, message: impl Into<String>) -> GatewayError {
    GatewayError::Robot {
        robot: robot.to_string(),
        message: message.into(),
    }
}

impl Session {
    /// Load a scenario file. `seed` and `max_ticks` override the file.
    pub fn load(
        path: &Path,
        seed: Option<u64>,
        max_ticks: Option<u64>,
    ) -> Result<Session, GatewayError> {
        let mut config = ScenarioConfig::from_file(path)?;
        if let Some(s) = seed {
            config.seed = s;
        }
        if let Some(m) = max_ticks {
            config.max_ticks = m;
        }
        Session::from_config(config)
    }

    pub fn from_config(config: ScenarioConfig) -> Result<Session, GatewayError> {
        let world = load_scenario(&config)?;
        let kb = Arc::new(load_kb(
            config.resolve(&config.ontology),
            config.resolve(&config.lexicon),
            config.resolve(&config.profiles),
        )?);
        let plans = Arc::new(PlanLibrary::parse(
            &config.read_file("plans", &config.plans)?,
            &kb.ontology,
        )?);

        let mut team_robots = Vec::new();
        for spec in &config.robots {
            let id = AgentId::new(&spec.id);
            if spec.profile_id() != id {
                return Err(robot_err(
                    &spec.id,
                    "the profile id must equal the robot id",
                ));
            }
            let profile = kb
                .profile(&id)
                .ok_or_else(|| robot_err(&spec.id, "no profile in the knowledge base"))?;
            let kind_ok = matches!(
                (profile.kind, spec.kind),
                (
                    harmonic_core::kb::AgentKind::Ugv,
                    harmonic_core::sim::RobotKind::Ugv
                ) | (
                    harmonic_core::kb::AgentKind::Drone,
                    harmonic_core::sim::RobotKind::Drone
                )
            );
            if !kind_ok {
                return Err(robot_err(
                    &spec.id,
                    format!("profile kind {} does not match", profile.kind),
                ));
            }
            team_robots.push((id, profile.kind));
        }
        let team = TeamContext::new(
            team_robots,
            world.rooms.clone(),
            world.grid.width_m(),
            world.grid.height_m(),
        );

        let mut robots = Vec::new();
        for spec in &config.robots {
            let id = AgentId::new(&spec.id);
            let text = config.read_file("robots.tree", &spec.tree)?;
            let subtree = parse_tree_file(&text).map_err(|e| robot_err(&spec.id, e.to_string()))?;
            let supported = supported_verbs(&subtree);
            let safety = default_safety_spec(spec.kind, &spec.safety);
            let body = &world.robots[&id];
            let tactical =
                TacticalLayer::new(body, &world.grid, &world.rooms, &safety, subtree, supported)
                    .map_err(|e| robot_err(&spec.id, e.to_string()))?;
            robots.push(RobotRuntime {
                id: id.clone(),
                tactical,
                bus: ChannelPair::new(config.downlink_capacity, config.uplink_capacity),
                core: StrategicCore::new(id, kb.clone(), plans.clone(), team.clone()),
                detections: Vec::new(),
                safety_active: false,
                faulted: false,
                heard: Vec::new(),
                reports: Vec::new(),
                team: Vec::new(),
                tactical_ticks: 0,
                strategic_cycles: 0,
            });
        }
        robots.sort_by(|a, b| a.id.cmp(&b.id));

        let mut humans = BTreeSet::new();
        for h in &config.humans {
            let id = AgentId::new(&h.id);
            match kb.profile(&id) {
                Some(p) if !p.kind.is_robot() => {}
                _ => {
                    return Err(ScenarioValidationError::new(
                        "humans.id",
                        format!("`{}` has no human profile in the knowledge base", h.id),
                    )
                    .into())
                }
            }
            humans.insert(id);
        }
        let mut script: Vec<(u64, AgentId, String)> = config
            .script
            .iter()
            .map(|s| (s.tick, AgentId::new(&s.sender), s.text.clone()))
            .collect();
        script.sort_by_key(|s| s.0);

        Ok(Session {
            max_ticks: config.max_ticks,
            config,
            kb,
            world,
            robots,
            humans,
            script,
            script_pos: 0,
            pending_chat: VecDeque::new(),
            chat: Vec::new(),
            utterance_seq: 0,
            trace: Vec::new(),
            tick: 0,
            stop_when_quiescent: true,
            stop_reason: None,
            collisions: 0,
            safety_conflicts: 0,
            faults: Vec::new(),
        })
    }

    /// Keep ticking after every goal is settled (used when serving).
    pub fn run_until_max_ticks(mut self) -> Session {
        self.stop_when_quiescent = false;
        self
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn max_ticks(&self) -> u64 {
        self.max_ticks
    }

    pub fn is_finished(&self) -> bool {
        self.stop_reason.is_some()
    }

    pub fn world(&self) -> &WorldState {
        &self.world
    }

    pub fn world_mut(&mut self) -> &mut WorldState {
        &mut self.world
    }

    pub fn kb(&self) -> &Kb {
        &self.kb
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.config
    }

    pub fn chat(&self) -> &[ChatLine] {
        &self.chat
    }

    pub fn events(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn robot_ids(&self) -> Vec<AgentId> {
        self.robots.iter().map(|r| r.id.clone()).collect()
    }

    pub fn core(&self, id: &AgentId) -> Option<&StrategicCore> {
        self.robots.iter().find(|r| &r.id == id).map(|r| &r.core)
    }

    pub fn tactical(&self, id: &AgentId) -> Option<&TacticalLayer> {
        self.robots
            .iter()
            .find(|r| &r.id == id)
            .map(|r| &r.tactical)
    }

    /// `(tactical ticks, strategic cycles)` run so far for a robot.
    pub fn layer_counts(&self, id: &AgentId) -> Option<(u64, u64)> {
        self.robots
            .iter()
            .find(|r| &r.id == id)
            .map(|r| (r.tactical_ticks, r.strategic_cycles))
    }

    pub fn safety_active(&self, id: &AgentId) -> bool {
        self.robots.iter().any(|r| &r.id == id && r.safety_active)
    }

    pub fn collisions(&self) -> u64 {
        self.collisions
    }

    pub fn safety_conflicts(&self) -> u64 {
        self.safety_conflicts
    }

    /// Queue an utterance from a human; it is analyzed at the start of the
    /// next tick.
    pub fn inject_utterance(&mut self, sender: &str, text: &str) -> Result<(), InjectError> {
        if self.is_finished() {
            return Err(InjectError::Finished);
        }
        let sender = AgentId::new(sender);
        if !self.humans.contains(&sender) {
            return Err(InjectError::UnknownSender(sender.0));
        }
        if text.trim().is_empty() {
            return Err(InjectError::Empty);
        }
        self.pending_chat.push_back(PendingChat {
            speaker: sender,
            addressee: Addressee::Team,
            text: text.trim().into(),
        });
        Ok(())
    }

    fn emit(&mut self, tick: u64, robot: Option<&AgentId>, kind: EventKind, data: impl Serialize) {
        self.trace.push(TraceEvent::new(tick, robot, kind, data));
    }

    /// Put queued chat on the record, analyze it and deliver it to every core.
    fn process_chat(&mut self, tick: u64, new_lines: &mut Vec<ChatLine>) {
        while let Some(p) = self.pending_chat.pop_front() {
            self.utterance_seq += 1;
            let n = self.utterance_seq;
            let line = ChatLine {
                utterance_id: format!("u-{n:06}"),
                tick,
                speaker: p.speaker.clone(),
                addressee: p.addressee.clone(),
                text: p.text.clone(),
            };
            self.emit(tick, None, EventKind::Chat, &line);
            let heard = match analyze(&p.text, &p.speaker, &self.kb) {
                Ok(mut tmr) => {
                    tmr.tmr_id = format!("tmr-{n:06}");
                    tmr.source_text = p.text.clone();
                    tmr.tick = tick;
                    self.emit(
                        tick,
                        None,
                        EventKind::Tmr,
                        serde_json::json!({"utterance_id": line.utterance_id, "tmr": tmr}),
                    );
                    Heard::Tmr(tmr)
                }
                Err(error) => {
                    self.emit(
                        tick,
                        None,
                        EventKind::AnalysisError,
                        serde_json::json!({"utterance_id": line.utterance_id, "error": error.to_string()}),
                    );
                    Heard::Failed {
                        utterance_id: line.utterance_id.clone(),
                        speaker: p.speaker,
                        text: p.text,
                        error,
                    }
                }
            };
            for r in &mut self.robots {
                r.heard.push(heard.clone());
            }
            self.chat.push(line.clone());
            new_lines.push(line);
        }
    }

    fn stalled(&self, id: &AgentId, tick: u64) -> bool {
        self.config
            .stalls
            .iter()
            .any(|s| s.robot == id.0 && s.from_tick <= tick && tick < s.from_tick + s.ticks)
    }

    fn quiescent(&self) -> bool {
        let mut any_goal = false;
        for r in &self.robots {
            for e in r.core.agenda().entries() {
                any_goal = true;
                if !e.goal.status.is_terminal() {
                    return false;
                }
            }
            if r.tactical.active_command().is_some() || !r.heard.is_empty() || !r.team.is_empty() {
                return false;
            }
        }
        any_goal && self.pending_chat.is_empty() && self.script_pos == self.script.len()
    }

    /// Advance one tick. Returns `None` once the run has finished.
    pub fn step(&mut self) -> Result<Option<TickReport>, GatewayError> {
        if self.is_finished() {
            return Ok(None);
        }
        if self.tick >= self.max_ticks {
            self.finish(StopReason::MaxTicks);
            return Ok(None);
        }
        let t = self.tick + 1;
        let mark = self.trace.len();
        let mut new_chat = Vec::new();

        while let Some((at, sender, text)) = self.script.get(self.script_pos).cloned() {
            if at > t {
                break;
            }
            self.pending_chat.push_back(PendingChat {
                speaker: sender,
                addressee: Addressee::Team,
                text,
            });
            self.script_pos += 1;
        }
        self.process_chat(t, &mut new_chat);

        // Tactical layers.
        let mut requests = Vec::new();
        for i in 0..self.robots.len() {
            let r = &mut self.robots[i];
            let body = self.world.robots[&r.id].clone();
            let step = r
                .tactical
                .step(t, &body, &r.detections, &r.bus)
                .map_err(|e| GatewayError::Runtime {
                    tick: t,
                    message: format!("{}: {e}", r.id),
                })?;
            r.tactical_ticks += 1;
            r.safety_active = step.safety_active;
            let conflict = step.safety_active
                && step.requests.iter().any(|(o, _)| {
                    matches!(o, Origin::Action(_)) && r.tactical.is_command_origin(o)
                });
            if conflict {
                self.safety_conflicts += 1;
            }
            if let (Some(f), false) = (&step.fault, r.faulted) {
                r.faulted = true;
                let msg = format!("{}: {f}", r.id);
                let id = r.id.clone();
                self.faults.push(msg.clone());
                self.emit(
                    t,
                    Some(&id),
                    EventKind::Fault,
                    serde_json::json!({"message": msg}),
                );
            }
            requests.extend(step.requests.into_iter().map(|(_, q)| q));
        }

        let outcome = self
            .world
            .step(&requests, DT)
            .map_err(|e| GatewayError::Runtime {
                tick: t,
                message: e.to_string(),
            })?;
        for c in &outcome.collisions {
            self.collisions += 1;
            self.emit(t, Some(&c.robot_id.clone()), EventKind::Collision, c);
        }
        let mut detections = outcome.detections;
        for r in &mut self.robots {
            r.detections = detections.remove(&r.id).unwrap_or_default();
            r.core.observe_pose(t, self.world.robots[&r.id].pose);
        }

        for i in 0..self.robots.len() {
            let reports = self.robots[i].bus.poll_reports(usize::MAX);
            let id = self.robots[i].id.clone();
            for rep in &reports {
                if !matches!(rep.kind, ReportKind::PerceptBatch(_)) {
                    self.emit(t, Some(&id), EventKind::Report, rep);
                }
            }
            self.robots[i].reports.extend(reports);
        }

        if t.is_multiple_of(self.config.strategic_period_ticks) {
            for i in 0..self.robots.len() {
                let id = self.robots[i].id.clone();
                if self.stalled(&id, t) {
                    continue;
                }
                let r = &mut self.robots[i];
                let input = CycleInput {
                    tick: t,
                    heard: std::mem::take(&mut r.heard),
                    reports: std::mem::take(&mut r.reports),
                    team: std::mem::take(&mut r.team),
                };
                let out = r.core.cycle(input);
                r.strategic_cycles += 1;
                for th in &out.thoughts {
                    self.emit(t, Some(&id), EventKind::Thought, th);
                }
                for v in &out.vmrs {
                    self.emit(t, Some(&id), EventKind::Vmr, v);
                }
                for cmd in out.commands {
                    self.emit(t, Some(&id), EventKind::Command, &cmd);
                    let r = &mut self.robots[i];
                    if r.bus.send_command(cmd.clone()) == SendCommandOutcome::DownlinkFull {
                        let rep = Report {
                            report_id: format!("{}-downlink-{}", id, cmd.command_id),
                            robot_id: id.clone(),
                            command_id: Some(cmd.command_id.clone()),
                            kind: ReportKind::Failure("downlink-full".into()),
                            tick: t,
                        };
                        r.reports.push(rep.clone());
                        self.emit(t, Some(&id), EventKind::Report, &rep);
                    }
                }
                for u in out.utterances {
                    self.pending_chat.push_back(PendingChat {
                        speaker: u.speaker,
                        addressee: u.addressee,
                        text: u.text,
                    });
                }
                for u in out.team {
                    for other in self.robots.iter_mut().filter(|o| o.id != id) {
                        other.team.push(u.clone());
                    }
                }
            }
            self.process_chat(t, &mut new_chat);
        }

        self.tick = t;
        if t >= self.max_ticks {
            self.finish(StopReason::MaxTicks);
        } else if self.stop_when_quiescent && self.quiescent() {
            self.finish(StopReason::Quiescent);
        }
        Ok(Some(TickReport {
            tick: t,
            events: self.trace[mark..].to_vec(),
            chat: new_chat,
        }))
    }

    /// Close outstanding commands and mark the run finished.
    fn finish(&mut self, reason: StopReason) {
        if self.stop_reason.is_some() {
            return;
        }
        let t = self.tick;
        for i in 0..self.robots.len() {
            let id = self.robots[i].id.clone();
            let expired = {
                let r = &mut self.robots[i];
                r.tactical.expire_outstanding(t, &r.bus);
                r.bus.poll_reports(usize::MAX)
            };
            for rep in expired.iter().filter(|r| r.kind == ReportKind::Expired) {
                self.emit(t, Some(&id), EventKind::Report, rep);
            }
        }
        self.stop_reason = Some(reason);
    }

    /// Run to the end.
    pub fn run(&mut self) -> Result<(), GatewayError> {
        while self.step()?.is_some() {}
        Ok(())
    }

    pub fn trace(&self) -> Trace {
        Trace {
            header: TraceHeader::new(&self.config.name, self.config.seed, self.robot_ids()),
            events: self.trace.clone(),
        }
    }

    pub fn summary(&self) -> RunSummary {
        let mut goals = Vec::new();
        for r in &self.robots {
            for e in r.core.agenda().entries() {
                goals.push(GoalOutcome {
                    robot: r.id.clone(),
                    goal_id: e.goal.goal_id.clone(),
                    concept: e.goal.concept.clone(),
                    status: format!("{:?}", e.goal.status),
                    plan: e.selected().map(str::to_string),
                });
            }
        }
        let trace = self.trace();
        RunSummary {
            scenario: self.config.name.clone(),
            seed: self.config.seed,
            ticks: self.tick,
            stop_reason: self.stop_reason,
            collisions: self.collisions,
            safety_conflicts: self.safety_conflicts,
            faults: self.faults.clone(),
            goals,
            chat: self
                .chat
                .iter()
                .map(|c| format!("{}: {}", c.speaker, c.text))
                .collect(),
            trace_events: trace.events.len(),
            trace_digest: trace.body_digest(),
        }
    }

    // ---- views for clients ---------------------------------------------

    fn robot_views(&self) -> Vec<RobotView> {
        self.robots
            .iter()
            .map(|r| {
                let b = &self.world.robots[&r.id];
                RobotView {
                    id: r.id.clone(),
                    kind: format!("{:?}", b.kind),
                    x: b.pose.x,
                    y: b.pose.y,
                    theta: b.pose.theta,
                    altitude: b.altitude,
                    battery: b.battery,
                    holding: match &b.gripper {
                        Some(Gripper::Holding(o)) => Some(o.clone()),
                        _ => None,
                    },
                    active_command: r.tactical.active_command().map(|c| c.command_id.clone()),
                    safety_active: r.safety_active,
                }
            })
            .collect()
    }

    fn object_views(&self) -> Vec<ObjectView> {
        self.world
            .objects
            .iter()
            .map(|(id, o)| {
                let p = self.world.object_position(id).unwrap_or_default();
                ObjectView {
                    id: id.clone(),
                    label: o.label.clone(),
                    concept: o.concept.clone(),
                    x: p.x,
                    y: p.y,
                    held_by: match &o.place {
                        ObjectPlace::HeldBy { robot } => Some(robot.clone()),
                        ObjectPlace::Floor { .. } => None,
                    },
                }
            })
            .collect()
    }

    fn agendas(&self) -> BTreeMap<String, Vec<GoalView>> {
        self.robots
            .iter()
            .map(|r| {
                let goals = r
                    .core
                    .agenda()
                    .entries()
                    .iter()
                    .map(|e| GoalView {
                        goal_id: e.goal.goal_id.clone(),
                        concept: e.goal.concept.clone(),
                        status: format!("{:?}", e.goal.status),
                        priority: e.goal.priority,
                        plan: e.selected().map(str::to_string),
                    })
                    .collect();
                (r.id.0.clone(), goals)
            })
            .collect()
    }

    pub fn snapshot(&self, paused: bool, speed: f64) -> Snapshot {
        Snapshot {
            scenario: self.config.name.clone(),
            seed: self.config.seed,
            tick: self.tick,
            paused,
            speed,
            finished: self.is_finished(),
            cell_size: CELL_SIZE,
            map: self
                .world
                .grid
                .to_ascii()
                .lines()
                .map(str::to_string)
                .collect(),
            rooms: self
                .world
                .rooms
                .iter()
                .map(|r| RoomView {
                    name: r.name.clone(),
                    min: [r.min.col, r.min.row],
                    max: [r.max.col, r.max.row],
                })
                .collect(),
            robots: self.robot_views(),
            objects: self.object_views(),
            humans: self
                .world
                .humans
                .iter()
                .map(|(id, p)| HumanView {
                    id: id.clone(),
                    name: self.kb.display_name(id),
                    x: p.x,
                    y: p.y,
                })
                .collect(),
            chat: self.chat.clone(),
            agendas: self.agendas(),
        }
    }

    pub fn delta(&self, report: &TickReport) -> Delta {
        Delta {
            tick: report.tick,
            finished: self.is_finished(),
            robots: self.robot_views(),
            objects: self.object_views(),
            chat: report.chat.clone(),
            agendas: self.agendas(),
        }
    }
}
