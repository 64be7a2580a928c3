//! Robot-level tree assembly and the per-robot tactical loop.
//!
//! The root of every robot tree is a Selector over
//! `[safety_0, .., safety_n, command_slot, idle]`. Each safety subtree is
//! `Sequence[condition, Selector[response, hold]]`: once its condition holds,
//! the subtree never fails, so nothing to its right runs that tick.

use std::collections::BTreeSet;
use std::sync::Arc;

use super::engine::tick;
use super::leaf::LeafLibrary;
use super::leaves::{
    standard_library, TacticalEnv, ALTITUDE_PREDICATE, BATTERY_PREDICATE, FAILURE_KEY,
    OBSTACLE_PREDICATE, PROGRESS_KEY, TASK_PREFIX,
};
use super::node::{BtNode, BtTree, NodeKind, ValidationFailure};
use super::{ActuatorRequest, Blackboard, BtError, BtStatus, Channel, Origin, TickResult};
use crate::bus::{ChannelPair, Command, Report, ReportKind, Verb};
use crate::sim::{Detection, GridMap, Gripper, RobotBody, RobotKind, SafetyParams, OBSTACLE_LABEL};
use crate::types::{AgentId, Params, Value};

pub const COMMAND_SLOT_ID: &str = "command_slot";
pub const IDLE_ID: &str = "idle";
pub const ROOT_ID: &str = "root";
/// Ticks between Progress reports for the active command.
pub const PROGRESS_PERIOD: u64 = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct SafetyEntry {
    pub predicate_id: String,
    pub params: Params,
    pub response: BtNode,
}

impl SafetyEntry {
    pub fn new(predicate_id: &str, params: Params, response: BtNode) -> Self {
        SafetyEntry {
            predicate_id: predicate_id.to_string(),
            params,
            response,
        }
    }
}

fn scalar_params(pairs: &[(&str, f64)]) -> Params {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), Value::Scalar(*v)))
        .collect()
}

/// Collision avoidance first, then altitude (drone), then battery reserve.
pub fn default_safety_spec(kind: RobotKind, p: &SafetyParams) -> Vec<SafetyEntry> {
    let radius = p.obstacle_radius.unwrap_or(0.3);
    let half_angle = p.obstacle_half_angle.unwrap_or(1.0);
    let mut spec = vec![SafetyEntry::new(
        OBSTACLE_PREDICATE,
        scalar_params(&[("radius", radius), ("half_angle", half_angle)]),
        BtNode::action(
            "avoid",
            "avoid_obstacle",
            scalar_params(&[("radius", radius)]),
        ),
    )];
    if kind == RobotKind::Drone {
        spec.push(SafetyEntry::new(
            ALTITUDE_PREDICATE,
            scalar_params(&[("min", p.min_altitude.unwrap_or(1.2))]),
            BtNode::action("climb", "climb", Params::new()),
        ));
    }
    let reserve = p.battery_reserve.unwrap_or(match kind {
        RobotKind::Ugv => 0.1,
        RobotKind::Drone => 0.15,
    });
    spec.push(SafetyEntry::new(
        BATTERY_PREDICATE,
        scalar_params(&[("threshold", reserve)]),
        BtNode::action("dock", "return_to_dock", Params::new()),
    ));
    spec
}

fn prefix_ids(node: &mut BtNode, prefix: &str) {
    node.node_id = format!("{prefix}/{}", node.node_id);
    match &mut node.kind {
        NodeKind::Sequence { children }
        | NodeKind::Selector { children }
        | NodeKind::Parallel { children, .. } => {
            for c in children {
                prefix_ids(c, prefix);
            }
        }
        NodeKind::Decorator { child, .. } => prefix_ids(child, prefix),
        NodeKind::Condition { .. } | NodeKind::Action { .. } => {}
    }
}

pub fn safety_subtree_id(i: usize) -> String {
    format!("safety_{i}")
}

pub fn safety_condition_id(i: usize) -> String {
    format!("safety_{i}/cond")
}

/// Assemble and validate a robot's root tree.
pub fn build_robot_tree(
    kind: RobotKind,
    safety_spec: &[SafetyEntry],
    command_subtree: Vec<BtNode>,
    library: &LeafLibrary,
) -> Result<BtTree, ValidationFailure> {
    if safety_spec.is_empty() {
        return Err(ValidationFailure::EmptySafetySpec);
    }
    let required: &[&str] = match kind {
        RobotKind::Ugv => &[OBSTACLE_PREDICATE],
        RobotKind::Drone => &[ALTITUDE_PREDICATE, BATTERY_PREDICATE],
    };
    for r in required {
        if !safety_spec.iter().any(|e| e.predicate_id == *r) {
            return Err(ValidationFailure::MissingSafety {
                kind: format!("{kind:?}"),
                predicate: r.to_string(),
            });
        }
    }
    let mut children = Vec::with_capacity(safety_spec.len() + 2);
    for (i, entry) in safety_spec.iter().enumerate() {
        let id = safety_subtree_id(i);
        let mut response = entry.response.clone();
        prefix_ids(&mut response, &id);
        children.push(BtNode::sequence(
            id.clone(),
            vec![
                BtNode::condition(
                    safety_condition_id(i),
                    entry.predicate_id.clone(),
                    entry.params.clone(),
                ),
                BtNode::selector(
                    format!("{id}/respond"),
                    vec![
                        response,
                        BtNode::action(format!("{id}/hold"), "stop", Params::new()),
                    ],
                ),
            ],
        ));
    }
    let slot_children = if command_subtree.is_empty() {
        vec![BtNode::condition(
            format!("{COMMAND_SLOT_ID}/empty"),
            "always_failure",
            Params::new(),
        )]
    } else {
        command_subtree
    };
    children.push(BtNode::selector(COMMAND_SLOT_ID, slot_children));
    children.push(BtNode::action(IDLE_ID, "idle", Params::new()));
    BtTree::build(BtNode::selector(ROOT_ID, children), library)
}

/// Verbs a command subtree can execute: those named by its `command/verb_is` gates.
pub fn supported_verbs(command_subtree: &[BtNode]) -> BTreeSet<Verb> {
    let mut out = BTreeSet::new();
    for root in command_subtree {
        root.walk(&mut |n| {
            if let NodeKind::Condition {
                predicate_id,
                params,
            } = &n.kind
            {
                if predicate_id == "command/verb_is" {
                    if let Some(v) = params
                        .get("verb")
                        .and_then(Value::as_id)
                        .and_then(|v| v.parse().ok())
                    {
                        out.insert(v);
                    }
                }
            }
        });
    }
    out
}

/// Refresh the `percept/*` keys from ground truth and this tick's detections.
///
/// Obstacle detections landing in cells the static map lists as free are
/// accumulated in `percept/blocked` for the planner.
pub fn write_percepts(
    bb: &mut Blackboard,
    body: &RobotBody,
    detections: &[Detection],
    static_map: &GridMap,
) -> Result<(), BtError> {
    bb.set("percept/pose", Value::Pose(body.pose))?;
    bb.set("percept/altitude", Value::Scalar(body.altitude))?;
    bb.set("percept/battery", Value::Scalar(body.battery))?;
    let holding = match &body.gripper {
        Some(Gripper::Holding(o)) => o.clone(),
        _ => "none".to_string(),
    };
    bb.set("percept/holding", Value::Id(holding))?;

    let mut blocked: BTreeSet<String> = bb
        .id_list("percept/blocked")?
        .map(|l| l.iter().cloned().collect())
        .unwrap_or_default();
    let before = blocked.len();
    for d in detections
        .iter()
        .filter(|d| d.class_label == OBSTACLE_LABEL)
    {
        // Nudge past the surface point so it lands inside the obstacle cell.
        let p = body.pose.project(
            d.relative_position.range + 0.01,
            d.relative_position.bearing,
        );
        let cell = GridMap::cell_of(p);
        if static_map.is_free(cell) {
            blocked.insert(cell.to_string());
        }
    }
    if blocked.len() != before || !bb.contains("percept/blocked") {
        bb.set(
            "percept/blocked",
            Value::IdList(blocked.into_iter().collect()),
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    UnsupportedVerb(Verb),
    MalformedParams(String),
}

impl RejectReason {
    pub fn describe(&self) -> String {
        match self {
            RejectReason::UnsupportedVerb(v) => format!("unsupported-verb:{v}"),
            RejectReason::MalformedParams(m) => format!("malformed-params:{m}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InstallOutcome {
    Accepted,
    Rejected(RejectReason),
}

#[derive(Debug, Clone)]
struct Active {
    command: Command,
    progress: f64,
}

/// Output of one tactical step.
#[derive(Debug, Clone, PartialEq)]
pub struct TacticalStep {
    /// Clamped requests, at most one per channel.
    pub requests: Vec<(Origin, ActuatorRequest)>,
    /// Reports queued on the uplink this step, in send order.
    pub reports: Vec<Report>,
    /// Whether any safety condition held this tick.
    pub safety_active: bool,
    pub result: Option<TickResult>,
    /// Set when the tree could not be ticked; the robot stays halted.
    pub fault: Option<BtError>,
}

/// Velocity limits used to clamp outgoing setpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub v_max: f64,
    pub omega_max: f64,
    pub vz_max: f64,
}

/// The tactical layer of one robot: blackboard, tree and command handling.
pub struct TacticalLayer {
    robot_id: AgentId,
    kind: RobotKind,
    tree: BtTree,
    library: LeafLibrary,
    blackboard: Blackboard,
    env: Arc<TacticalEnv>,
    static_map: GridMap,
    supported: BTreeSet<Verb>,
    limits: Limits,
    safety_count: usize,
    safety_predicates: Vec<String>,
    last_safety: Vec<bool>,
    command_ids: BTreeSet<String>,
    active: Option<Active>,
    report_seq: u64,
    faulted: Option<BtError>,
    ticks: u64,
}

impl std::fmt::Debug for TacticalLayer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TacticalLayer")
            .field("robot_id", &self.robot_id)
            .field(
                "active",
                &self.active.as_ref().map(|a| &a.command.command_id),
            )
            .field("ticks", &self.ticks)
            .finish()
    }
}

impl TacticalLayer {
    /// Build the tactical layer for `body`, using the standard leaf library.
    pub fn new(
        body: &RobotBody,
        static_map: &GridMap,
        rooms: &[crate::sim::Room],
        safety_spec: &[SafetyEntry],
        command_subtree: Vec<BtNode>,
        supported: BTreeSet<Verb>,
    ) -> Result<TacticalLayer, ValidationFailure> {
        let env = Arc::new(TacticalEnv::for_body(body, static_map, rooms));
        let library = standard_library(env.clone());
        let tree = build_robot_tree(body.kind, safety_spec, command_subtree, &library)?;
        let command_ids = tree
            .root()
            .find(COMMAND_SLOT_ID)
            .expect("slot exists")
            .subtree_ids();
        Ok(TacticalLayer {
            robot_id: body.robot_id.clone(),
            kind: body.kind,
            tree,
            library,
            blackboard: Blackboard::new(body.robot_id.clone()),
            env,
            static_map: static_map.clone(),
            supported,
            limits: Limits {
                v_max: body.v_max,
                omega_max: body.omega_max,
                vz_max: body.vz_max,
            },
            safety_count: safety_spec.len(),
            safety_predicates: safety_spec.iter().map(|e| e.predicate_id.clone()).collect(),
            last_safety: vec![false; safety_spec.len()],
            command_ids,
            active: None,
            report_seq: 0,
            faulted: None,
            ticks: 0,
        })
    }

    pub fn robot_id(&self) -> &AgentId {
        &self.robot_id
    }

    pub fn tree(&self) -> &BtTree {
        &self.tree
    }

    pub fn blackboard(&self) -> &Blackboard {
        &self.blackboard
    }

    pub fn env(&self) -> &TacticalEnv {
        &self.env
    }

    pub fn ticks(&self) -> u64 {
        self.ticks
    }

    pub fn active_command(&self) -> Option<&Command> {
        self.active.as_ref().map(|a| &a.command)
    }

    pub fn fault(&self) -> Option<&BtError> {
        self.faulted.as_ref()
    }

    /// Whether `origin` lies inside the command slot.
    pub fn is_command_origin(&self, origin: &Origin) -> bool {
        self.command_ids.contains(origin.node_id())
    }

    fn report(&mut self, command_id: Option<&str>, kind: ReportKind, tick: u64) -> Report {
        self.report_seq += 1;
        Report {
            report_id: format!("{}-r{}", self.robot_id, self.report_seq),
            robot_id: self.robot_id.clone(),
            command_id: command_id.map(str::to_string),
            kind,
            tick,
        }
    }

    fn clear_command(&mut self) {
        self.blackboard.remove_prefix("command/");
        self.blackboard.remove_prefix(TASK_PREFIX);
        self.active = None;
    }

    fn check_params(&self, cmd: &Command) -> Result<(), String> {
        let get = |k: &str| cmd.params.get(k);
        let need_pose = |k: &str| match get(k) {
            Some(Value::Pose(_)) => Ok(()),
            Some(v) => Err(format!("{k} must be a pose, got {}", v.type_name())),
            None => Err(format!("missing {k}")),
        };
        for k in cmd.params.keys() {
            if k.is_empty() || k.contains('/') {
                return Err(format!("bad parameter name `{k}`"));
            }
        }
        match cmd.verb {
            Verb::MoveTo => need_pose("target"),
            Verb::PickUp => need_pose("location"),
            Verb::SearchArea => {
                let rooms: Vec<&str> = match (get("room"), get("rooms")) {
                    (Some(Value::Id(r)), None) => vec![r.as_str()],
                    (None, Some(Value::IdList(l))) => l.iter().map(String::as_str).collect(),
                    (None, None) => vec![],
                    _ => {
                        return Err("room must be an identifier or rooms an identifier list".into())
                    }
                };
                match rooms.iter().find(|r| self.env.room(r).is_none()) {
                    Some(r) => Err(format!("unknown room `{r}`")),
                    None => Ok(()),
                }
            }
            Verb::Hover => match get("duration") {
                None => Ok(()),
                Some(Value::Scalar(d)) if *d > 0.0 => Ok(()),
                Some(_) => Err("duration must be a positive number".into()),
            },
            Verb::Scan | Verb::ReturnToDock | Verb::Stop => Ok(()),
        }
    }

    /// Install `cmd` as the active command. Returns the outcome and the
    /// reports it generated (a Preempted for the previous command, an Ack
    /// on acceptance, a Failure on rejection).
    pub fn install_command(&mut self, cmd: Command, tick: u64) -> (InstallOutcome, Vec<Report>) {
        let mut reports = Vec::new();
        let reject = if cmd.robot_id != self.robot_id {
            Some(RejectReason::MalformedParams(format!(
                "addressed to {}",
                cmd.robot_id
            )))
        } else if !self.supported.contains(&cmd.verb) {
            Some(RejectReason::UnsupportedVerb(cmd.verb))
        } else {
            cmd.validate()
                .and_then(|_| self.check_params(&cmd))
                .err()
                .map(RejectReason::MalformedParams)
        };
        if let Some(reason) = reject {
            let r = self.report(
                Some(&cmd.command_id),
                ReportKind::Failure(reason.describe()),
                tick,
            );
            reports.push(r);
            return (InstallOutcome::Rejected(reason), reports);
        }
        if let Some(prev) = self.active.take() {
            let r = self.report(Some(&prev.command.command_id), ReportKind::Preempted, tick);
            reports.push(r);
        }
        self.clear_command();
        let bb = &mut self.blackboard;
        let mut write = |k: &str, v: Value| bb.set(k, v).expect("command keys are well formed");
        write("command/id", Value::Id(cmd.command_id.clone()));
        write("command/verb", Value::Id(cmd.verb.as_str().to_string()));
        write("command/priority", Value::Scalar(cmd.priority));
        write("command/issued_tick", Value::Scalar(cmd.issued_tick as f64));
        for (k, v) in &cmd.params {
            write(&format!("command/{k}"), v.clone());
        }
        let ack = self.report(Some(&cmd.command_id), ReportKind::Ack, tick);
        reports.push(ack);
        self.active = Some(Active {
            command: cmd,
            progress: 0.0,
        });
        (InstallOutcome::Accepted, reports)
    }

    fn clamp(&self, mut req: ActuatorRequest) -> ActuatorRequest {
        let l = self.limits;
        let sp = &mut req.setpoint;
        match req.channel {
            Channel::Drive => {
                let dims = if self.kind == RobotKind::Ugv { 2 } else { 3 };
                sp.resize(dims, 0.0);
                let w = dims - 1;
                sp[w] = sp[w].clamp(-l.omega_max, l.omega_max);
                if dims == 2 {
                    sp[0] = sp[0].clamp(-l.v_max, l.v_max);
                } else {
                    let s = sp[0].hypot(sp[1]);
                    if s > l.v_max {
                        sp[0] *= l.v_max / s;
                        sp[1] *= l.v_max / s;
                    }
                }
            }
            Channel::Vertical => {
                sp.resize(1, 0.0);
                sp[0] = sp[0].clamp(-l.vz_max, l.vz_max);
            }
            Channel::Gripper => {
                sp.resize(1, 0.0);
                sp[0] = sp[0].clamp(0.0, 1.0);
            }
            Channel::Signal => sp.resize(1, 0.0),
        }
        for v in sp.iter_mut() {
            if !v.is_finite() {
                *v = 0.0;
            }
        }
        req
    }

    /// One tactical tick. Never blocks: commands are polled, reports are
    /// pushed without waiting.
    pub fn step(
        &mut self,
        tick_no: u64,
        body: &RobotBody,
        detections: &[Detection],
        bus: &ChannelPair,
    ) -> Result<TacticalStep, BtError> {
        self.ticks += 1;
        let mut reports = Vec::new();
        if let Some(err) = &self.faulted {
            return Ok(TacticalStep {
                requests: Vec::new(),
                reports,
                safety_active: false,
                result: None,
                fault: Some(err.clone()),
            });
        }
        write_percepts(&mut self.blackboard, body, detections, &self.static_map)?;

        for cmd in bus.poll_commands(bus.downlink_capacity()) {
            let (_, rs) = self.install_command(cmd, tick_no);
            reports.extend(rs);
        }
        if let Some(a) = &self.active {
            if let Some(d) = a.command.deadline_ticks {
                if tick_no > a.command.issued_tick + d {
                    let id = a.command.command_id.clone();
                    reports.push(self.report(Some(&id), ReportKind::Expired, tick_no));
                    self.clear_command();
                }
            }
        }

        let result = match tick(&self.tree, &self.library, &mut self.blackboard, detections) {
            Ok(r) => r,
            Err(e) => {
                log::error!("{}: tactical fault, halting robot: {e}", self.robot_id);
                self.faulted = Some(e.clone());
                if let Some(a) = self.active.take() {
                    let id = a.command.command_id;
                    reports.push(self.report(
                        Some(&id),
                        ReportKind::Failure(format!("fault:{e}")),
                        tick_no,
                    ));
                }
                for r in &reports {
                    bus.send_report(r.clone());
                }
                return Ok(TacticalStep {
                    requests: Vec::new(),
                    reports,
                    safety_active: false,
                    result: None,
                    fault: Some(e),
                });
            }
        };

        let mut safety_active = false;
        for i in 0..self.safety_count {
            let on = result.status_of(&safety_condition_id(i)) == Some(BtStatus::Success);
            safety_active |= on;
            if on && !self.last_safety[i] {
                let kind = ReportKind::SafetyEvent(self.safety_predicates[i].clone());
                reports.push(self.report(None, kind, tick_no));
            }
            self.last_safety[i] = on;
        }

        if let Some(active) = &self.active {
            let id = active.command.command_id.clone();
            match result.status_of(COMMAND_SLOT_ID) {
                Some(BtStatus::Success) => {
                    reports.push(self.report(Some(&id), ReportKind::Success, tick_no));
                    self.clear_command();
                }
                Some(BtStatus::Failure) => {
                    let reason = self
                        .blackboard
                        .id(FAILURE_KEY)
                        .ok()
                        .flatten()
                        .unwrap_or("failed")
                        .to_string();
                    reports.push(self.report(Some(&id), ReportKind::Failure(reason), tick_no));
                    self.clear_command();
                }
                _ => {
                    let p = self
                        .blackboard
                        .scalar(PROGRESS_KEY)
                        .ok()
                        .flatten()
                        .unwrap_or(0.0)
                        .clamp(0.0, 1.0);
                    let last = active.progress;
                    if tick_no.is_multiple_of(PROGRESS_PERIOD) && p > last {
                        reports.push(self.report(Some(&id), ReportKind::Progress(p), tick_no));
                        if let Some(a) = self.active.as_mut() {
                            a.progress = p;
                        }
                    }
                }
            }
        }

        let seen: Vec<Detection> = detections
            .iter()
            .filter(|d| d.class_label != OBSTACLE_LABEL)
            .cloned()
            .collect();
        if !seen.is_empty() {
            reports.push(self.report(None, ReportKind::PerceptBatch(seen), tick_no));
        }
        for r in &reports {
            bus.send_report(r.clone());
        }

        let requests = result
            .requests
            .iter()
            .map(|(o, r)| (o.clone(), self.clamp(r.clone())))
            .collect();
        Ok(TacticalStep {
            requests,
            reports,
            safety_active,
            result: Some(result),
            fault: None,
        })
    }

    /// Close the active command at shutdown.
    pub fn expire_outstanding(&mut self, tick_no: u64, bus: &ChannelPair) -> Vec<Report> {
        let mut out = Vec::new();
        if let Some(a) = self.active.take() {
            out.push(self.report(Some(&a.command.command_id), ReportKind::Expired, tick_no));
            self.clear_command();
        }
        for cmd in bus.poll_commands(bus.downlink_capacity()) {
            out.push(self.report(Some(&cmd.command_id), ReportKind::Expired, tick_no));
        }
        for r in &out {
            bus.send_report(r.clone());
        }
        out
    }
}
