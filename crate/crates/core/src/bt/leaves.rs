//! The standard leaf library shared by every robot.
//!
//! Conditions read `percept/*` and `command/*`; actions keep command-scoped
//! progress under `internal/task/*`, which the tactical layer clears when a
//! command is installed or finishes. An action that fails writes its reason
//! to [`FAILURE_KEY`].

use std::collections::BTreeSet;
use std::f64::consts::{PI, TAU};
use std::sync::Arc;

use super::leaf::{ActionLeaf, Effects, LeafContext, LeafLibrary};
use super::nav::{parse_cell, steer, turn_to, Planner};
use super::{BtError, BtStatus, Channel};
use crate::sim::{CellIndex, GridMap, RobotBody, RobotKind, Room, GRASP_RADIUS, OBSTACLE_LABEL};
use crate::types::{wrap_angle, Point, Pose, Value};

pub const FAILURE_KEY: &str = "internal/task/failure";
pub const PROGRESS_KEY: &str = "internal/task/progress";
pub const TASK_PREFIX: &str = "internal/task/";

/// Ticks a robot must hold position inside grasp range before closing.
pub const GRASP_SETTLE_TICKS: u64 = 3;
/// Confidence a target detection needs to end a search.
pub const SEARCH_CONFIDENCE: f64 = 0.5;
const SCAN_RATE: f64 = 1.5;
const VIEWPOINT_TOLERANCE: f64 = 0.3;
const AVOID_SPEED: f64 = 0.25;

/// Static knowledge the leaves of one robot need: its kind, the map as
/// loaded, room layout and dock.
#[derive(Debug)]
pub struct TacticalEnv {
    pub kind: RobotKind,
    pub rooms: Vec<Room>,
    pub dock: Point,
    pub radius: f64,
    pub sensor_range: f64,
    pub cruise_speed: f64,
    pub planner: Planner,
}

impl TacticalEnv {
    pub fn for_body(body: &RobotBody, grid: &GridMap, rooms: &[Room]) -> TacticalEnv {
        // Drones plan against walls only; they cruise above furniture.
        let layer = match body.kind {
            RobotKind::Ugv => crate::sim::ObstacleLayer::Ground,
            RobotKind::Drone => crate::sim::ObstacleLayer::Air,
        };
        let clearance = body.radius + 0.15;
        TacticalEnv {
            kind: body.kind,
            rooms: rooms.to_vec(),
            dock: body.dock,
            radius: body.radius,
            sensor_range: body.sensor.range,
            cruise_speed: (body.v_max * 0.5).min(1.0),
            planner: Planner::new(grid, layer, clearance),
        }
    }

    /// Drive setpoint in this robot's channel layout.
    pub fn drive(&self, v: f64, omega: f64) -> Vec<f64> {
        match self.kind {
            RobotKind::Ugv => vec![v, omega],
            RobotKind::Drone => vec![v, 0.0, omega],
        }
    }

    pub fn room(&self, name: &str) -> Option<&Room> {
        self.rooms
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
    }

    /// Search viewpoints for a room: a lattice at 0.75 sensor range, snapped
    /// to traversable cells inside the room, in boustrophedon order.
    pub fn viewpoints(&self, room: &Room) -> Vec<Point> {
        let none = BTreeSet::new();
        let inside: Vec<CellIndex> = room
            .cells()
            .filter(|c| self.planner.traversable(*c, &none))
            .collect();
        if inside.is_empty() {
            return Vec::new();
        }
        let spacing = 0.75 * self.sensor_range;
        let lo = GridMap::center(room.min);
        let hi = GridMap::center(room.max);
        let steps = |a: f64, b: f64| (((b - a) / spacing).floor() as usize) + 1;
        let (nx, ny) = (steps(lo.x, hi.x), steps(lo.y, hi.y));
        let off = |a: f64, b: f64, n: usize| a + ((b - a) - (n - 1) as f64 * spacing) / 2.0;
        let (ox, oy) = (off(lo.x, hi.x, nx), off(lo.y, hi.y, ny));
        let mut out: Vec<Point> = Vec::new();
        for j in 0..ny {
            let cols: Vec<usize> = if j % 2 == 0 {
                (0..nx).collect()
            } else {
                (0..nx).rev().collect()
            };
            for i in cols {
                let want = Point::new(ox + i as f64 * spacing, oy + j as f64 * spacing);
                let best = inside
                    .iter()
                    .min_by(|a, b| {
                        GridMap::center(**a)
                            .distance(&want)
                            .total_cmp(&GridMap::center(**b).distance(&want))
                    })
                    .map(|c| GridMap::center(*c))
                    .expect("non-empty");
                if !out.contains(&best) {
                    out.push(best);
                }
            }
        }
        out
    }
}

fn fail(out: &mut Effects, reason: &str) -> Result<BtStatus, BtError> {
    out.write(FAILURE_KEY, Value::Id(reason.to_string()))?;
    Ok(BtStatus::Failure)
}

fn robot_pose(ctx: &LeafContext<'_>) -> Result<Option<Pose>, BtError> {
    ctx.blackboard.pose("percept/pose")
}

fn learned_blocked(ctx: &LeafContext<'_>) -> Result<BTreeSet<CellIndex>, BtError> {
    Ok(ctx
        .blackboard
        .id_list("percept/blocked")?
        .unwrap_or(&[])
        .iter()
        .filter_map(|s| parse_cell(s))
        .collect())
}

fn task_scalar(ctx: &LeafContext<'_>, name: &str) -> Result<Option<f64>, BtError> {
    ctx.blackboard
        .scalar(&format!("{TASK_PREFIX}{}/{name}", ctx.node_id))
}

fn set_task(ctx: &LeafContext<'_>, out: &mut Effects, name: &str, v: f64) -> Result<(), BtError> {
    out.write(
        &format!("{TASK_PREFIX}{}/{name}", ctx.node_id),
        Value::Scalar(v),
    )
}

enum Approach {
    Arrived(Point),
    Moving,
    Unreachable,
}

/// One navigation step toward `goal`; emits the drive request when moving.
fn approach(
    env: &TacticalEnv,
    ctx: &LeafContext<'_>,
    out: &mut Effects,
    pose: Pose,
    goal: Point,
    tolerance: f64,
    speed: f64,
) -> Result<Approach, BtError> {
    let blocked = learned_blocked(ctx)?;
    let Some(route) = env.planner.route(pose.point(), goal, &blocked) else {
        return Ok(Approach::Unreachable);
    };
    if pose.point().distance(&route.goal) <= tolerance {
        out.emit(Channel::Drive, env.drive(0.0, 0.0));
        return Ok(Approach::Arrived(route.goal));
    }
    let [v, w] = steer(pose, route.waypoint, speed, 0.5);
    out.emit(Channel::Drive, env.drive(v, w));
    Ok(Approach::Moving)
}

fn obstacles<'a>(ctx: &'a LeafContext<'_>) -> impl Iterator<Item = &'a crate::sim::Detection> + 'a {
    ctx.percepts
        .iter()
        .filter(|d| d.class_label == OBSTACLE_LABEL)
}

/// Zero drive, Running forever. The root fallback.
struct Idle(Arc<TacticalEnv>);

impl ActionLeaf for Idle {
    fn tick(&self, _ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
        Ok(BtStatus::Running)
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

struct Stop(Arc<TacticalEnv>);

impl ActionLeaf for Stop {
    fn tick(&self, _ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
        Ok(BtStatus::Success)
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

struct Patrol(Arc<TacticalEnv>);

impl ActionLeaf for Patrol {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let speed = ctx.param_scalar("speed", self.0.cruise_speed)?;
        out.emit(Channel::Drive, self.0.drive(speed, 0.0));
        Ok(BtStatus::Running)
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

/// Back away from the nearest obstacle when the space behind is clear,
/// otherwise turn away from it in place.
struct AvoidObstacle(Arc<TacticalEnv>);

impl ActionLeaf for AvoidObstacle {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let radius = ctx.param_scalar("radius", 0.3)?;
        let near: Vec<_> = obstacles(ctx)
            .filter(|d| d.relative_position.range <= radius + 0.15)
            .collect();
        let Some(nearest) = near.iter().min_by(|a, b| {
            a.relative_position
                .range
                .total_cmp(&b.relative_position.range)
        }) else {
            out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
            return Ok(BtStatus::Running);
        };
        let b = nearest.relative_position.bearing;
        match self.0.kind {
            RobotKind::Drone => {
                out.emit(
                    Channel::Drive,
                    vec![-AVOID_SPEED * b.cos(), -AVOID_SPEED * b.sin(), 0.0],
                );
            }
            RobotKind::Ugv => {
                let rear_blocked = near
                    .iter()
                    .any(|d| d.relative_position.bearing.abs() > PI / 2.0);
                if b.abs() < PI / 2.0 && !rear_blocked {
                    out.emit(Channel::Drive, vec![-AVOID_SPEED, 0.0]);
                } else {
                    out.emit(Channel::Drive, vec![0.0, if b >= 0.0 { -1.5 } else { 1.5 }]);
                }
            }
        }
        Ok(BtStatus::Running)
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

struct Climb;

impl ActionLeaf for Climb {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        out.emit(Channel::Vertical, vec![ctx.param_scalar("rate", 0.5)?]);
        Ok(BtStatus::Running)
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Vertical)
    }
}

/// Go to the pose under `target_key` (default `command/target`).
struct Navigate(Arc<TacticalEnv>);

impl ActionLeaf for Navigate {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let key = ctx.param_id("target_key", "command/target")?;
        let tolerance = ctx.param_scalar("tolerance", 0.2)?;
        let speed = ctx.param_scalar("speed", self.0.cruise_speed)?;
        let Some(target) = ctx.blackboard.pose(key)? else {
            return fail(out, "no-target");
        };
        let Some(pose) = robot_pose(ctx)? else {
            return fail(out, "no-pose");
        };
        let start = match task_scalar(ctx, "start")? {
            Some(d) => d,
            None => {
                let d = pose.point().distance(&target.point()).max(1e-9);
                set_task(ctx, out, "start", d)?;
                d
            }
        };
        match approach(&self.0, ctx, out, pose, target.point(), tolerance, speed)? {
            Approach::Arrived(_) => Ok(BtStatus::Success),
            Approach::Unreachable => fail(out, "unreachable"),
            Approach::Moving => {
                let left = pose.point().distance(&target.point());
                out.write(
                    PROGRESS_KEY,
                    Value::Scalar((1.0 - left / start).clamp(0.0, 1.0)),
                )?;
                Ok(BtStatus::Running)
            }
        }
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

struct ReturnToDock(Arc<TacticalEnv>);

impl ActionLeaf for ReturnToDock {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let tolerance = ctx.param_scalar("tolerance", 0.2)?;
        let Some(pose) = robot_pose(ctx)? else {
            return fail(out, "no-pose");
        };
        match approach(
            &self.0,
            ctx,
            out,
            pose,
            self.0.dock,
            tolerance,
            self.0.cruise_speed,
        )? {
            Approach::Arrived(_) => Ok(BtStatus::Success),
            Approach::Unreachable => fail(out, "unreachable"),
            Approach::Moving => Ok(BtStatus::Running),
        }
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

/// Rotate in place through a full turn, tracking accumulated heading change.
fn scan_step(
    env: &TacticalEnv,
    ctx: &LeafContext<'_>,
    out: &mut Effects,
    pose: Pose,
    prefix: &str,
    fresh: bool,
) -> Result<bool, BtError> {
    let acc = task_scalar(ctx, &format!("{prefix}acc"))?;
    let last = task_scalar(ctx, &format!("{prefix}last"))?;
    let acc = match (acc, last) {
        (Some(a), Some(l)) if !fresh => a + wrap_angle(pose.theta - l).abs(),
        _ => 0.0,
    };
    if acc >= TAU {
        set_task(ctx, out, &format!("{prefix}acc"), acc)?;
        out.emit(Channel::Drive, env.drive(0.0, 0.0));
        return Ok(true);
    }
    set_task(ctx, out, &format!("{prefix}acc"), acc)?;
    set_task(ctx, out, &format!("{prefix}last"), pose.theta)?;
    out.emit(Channel::Drive, env.drive(0.0, SCAN_RATE));
    Ok(false)
}

struct Scan(Arc<TacticalEnv>);

impl ActionLeaf for Scan {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let Some(pose) = robot_pose(ctx)? else {
            return fail(out, "no-pose");
        };
        if scan_step(&self.0, ctx, out, pose, "", false)? {
            Ok(BtStatus::Success)
        } else {
            Ok(BtStatus::Running)
        }
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

struct Hover(Arc<TacticalEnv>);

impl ActionLeaf for Hover {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let default = ctx.blackboard.scalar("command/duration")?.unwrap_or(3.0);
        let duration = ctx.param_scalar("duration", default)?;
        let now = ctx.blackboard.tick_counter() as f64;
        let start = match task_scalar(ctx, "start")? {
            Some(s) => s,
            None => {
                set_task(ctx, out, "start", now)?;
                now
            }
        };
        out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
        let elapsed = (now - start) * crate::sim::DT;
        out.write(
            PROGRESS_KEY,
            Value::Scalar((elapsed / duration.max(1e-9)).clamp(0.0, 1.0)),
        )?;
        Ok(if elapsed + 1e-9 >= duration {
            BtStatus::Success
        } else {
            BtStatus::Running
        })
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

/// Sweep rooms viewpoint by viewpoint, turning a full circle at each,
/// until an object with the wanted label is seen.
///
/// Rooms come from `command/rooms` or `command/room` (all rooms when
/// neither is set); the wanted label from `command/label`. Without a label
/// the search succeeds once the sweep completes.
struct SearchArea(Arc<TacticalEnv>);

impl SearchArea {
    fn plan(&self, ctx: &LeafContext<'_>) -> Result<Result<Vec<Point>, String>, BtError> {
        let bb = ctx.blackboard;
        let names: Vec<String> = if let Some(list) = bb.id_list("command/rooms")? {
            list.to_vec()
        } else if let Some(one) = bb.id("command/room")? {
            vec![one.to_string()]
        } else {
            self.0.rooms.iter().map(|r| r.name.clone()).collect()
        };
        let mut points = Vec::new();
        for n in &names {
            let Some(room) = self.0.room(n) else {
                return Ok(Err(format!("unknown-room:{n}")));
            };
            points.extend(self.0.viewpoints(room));
        }
        Ok(Ok(points))
    }
}

impl ActionLeaf for SearchArea {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let label = ctx.blackboard.id("command/label")?;
        if let Some(label) = label {
            let seen = ctx
                .percepts
                .iter()
                .any(|d| d.class_label == label && d.confidence >= SEARCH_CONFIDENCE);
            if seen {
                out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
                out.write(PROGRESS_KEY, Value::Scalar(1.0))?;
                return Ok(BtStatus::Success);
            }
        }
        let points = match self.plan(ctx)? {
            Ok(p) => p,
            Err(reason) => return fail(out, &reason),
        };
        let Some(pose) = robot_pose(ctx)? else {
            return fail(out, "no-pose");
        };
        let mut idx = task_scalar(ctx, "vp")?.unwrap_or(0.0) as usize;
        let mut scanning = task_scalar(ctx, "scanning")?.unwrap_or(0.0) > 0.0;
        loop {
            let Some(&vp) = points.get(idx) else {
                out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
                out.write(PROGRESS_KEY, Value::Scalar(1.0))?;
                return match label {
                    Some(_) => fail(out, "not-found"),
                    None => Ok(BtStatus::Success),
                };
            };
            if scanning {
                if scan_step(&self.0, ctx, out, pose, "scan_", false)? {
                    idx += 1;
                    scanning = false;
                    // The turn is complete; move on within the same tick.
                    continue;
                }
                break;
            }
            match approach(
                &self.0,
                ctx,
                out,
                pose,
                vp,
                VIEWPOINT_TOLERANCE,
                self.0.cruise_speed,
            )? {
                Approach::Moving => break,
                Approach::Unreachable => {
                    log::debug!(
                        "{}: skipping unreachable viewpoint {vp:?}",
                        ctx.blackboard.robot_id()
                    );
                    idx += 1;
                }
                Approach::Arrived(_) => {
                    scanning = true;
                    scan_step(&self.0, ctx, out, pose, "scan_", true)?;
                    break;
                }
            }
        }
        set_task(ctx, out, "vp", idx as f64)?;
        set_task(ctx, out, "scanning", if scanning { 1.0 } else { 0.0 })?;
        let frac = if points.is_empty() {
            1.0
        } else {
            idx as f64 / points.len() as f64
        };
        out.write(PROGRESS_KEY, Value::Scalar(frac.clamp(0.0, 1.0)))?;
        Ok(BtStatus::Running)
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

/// Approach `command/location`, hold still inside grasp range for
/// [`GRASP_SETTLE_TICKS`], close the gripper, and succeed once the
/// object is held.
struct Grasp(Arc<TacticalEnv>);

impl ActionLeaf for Grasp {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let bb = ctx.blackboard;
        let object = bb.id("command/object")?;
        let holding = bb.id("percept/holding")?.filter(|h| *h != "none");
        if let Some(h) = holding {
            out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
            return if object.is_none_or(|o| o == h) {
                Ok(BtStatus::Success)
            } else {
                fail(out, "holding-other")
            };
        }
        let Some(location) = bb.pose("command/location")? else {
            return fail(out, "no-location");
        };
        let Some(pose) = robot_pose(ctx)? else {
            return fail(out, "no-pose");
        };
        let reach = GRASP_RADIUS - 0.1;
        let closes = task_scalar(ctx, "closes")?.unwrap_or(0.0);
        if pose.point().distance(&location.point()) <= reach {
            let settled = task_scalar(ctx, "settled")?.unwrap_or(0.0) + 1.0;
            set_task(ctx, out, "settled", settled)?;
            if settled as u64 > GRASP_SETTLE_TICKS {
                if closes >= 2.0 {
                    return fail(out, "nothing-to-grasp");
                }
                set_task(ctx, out, "closes", closes + 1.0)?;
                set_task(ctx, out, "settled", 0.0)?;
                out.emit(Channel::Gripper, vec![1.0]);
            } else {
                out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
            }
            return Ok(BtStatus::Running);
        }
        set_task(ctx, out, "settled", 0.0)?;
        match approach(
            &self.0,
            ctx,
            out,
            pose,
            location.point(),
            0.05,
            self.0.cruise_speed * 0.6,
        )? {
            Approach::Moving => Ok(BtStatus::Running),
            Approach::Unreachable => fail(out, "unreachable"),
            Approach::Arrived(p) => {
                if p.distance(&location.point()) > reach {
                    fail(out, "out-of-reach")
                } else {
                    // Arrived at the cell but not yet within reach: creep closer.
                    let [v, w] = steer(pose, location.point(), 0.1, 0.0);
                    out.emit(Channel::Drive, self.0.drive(v, w));
                    Ok(BtStatus::Running)
                }
            }
        }
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

/// Face a heading given by `command/heading` (radians).
struct Face(Arc<TacticalEnv>);

impl ActionLeaf for Face {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        let Some(heading) = ctx.blackboard.scalar("command/heading")? else {
            return fail(out, "no-heading");
        };
        let Some(pose) = robot_pose(ctx)? else {
            return fail(out, "no-pose");
        };
        if wrap_angle(heading - pose.theta).abs() < 0.02 {
            out.emit(Channel::Drive, self.0.drive(0.0, 0.0));
            return Ok(BtStatus::Success);
        }
        let [v, w] = turn_to(pose, heading);
        out.emit(Channel::Drive, self.0.drive(v, w));
        Ok(BtStatus::Running)
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Drive)
    }
}

fn obstacle_within_radius(ctx: &LeafContext<'_>) -> Result<bool, BtError> {
    let radius = ctx.param_scalar("radius", 0.3)?;
    let half_angle = ctx.param_scalar("half_angle", 1.0)?;
    Ok(obstacles(ctx).any(|d| {
        d.relative_position.range <= radius && d.relative_position.bearing.abs() <= half_angle
    }))
}

fn battery_below(ctx: &LeafContext<'_>) -> Result<bool, BtError> {
    let threshold = ctx.param_scalar("threshold", 0.1)?;
    Ok(ctx
        .blackboard
        .scalar("percept/battery")?
        .is_some_and(|b| b < threshold))
}

fn altitude_below(ctx: &LeafContext<'_>) -> Result<bool, BtError> {
    let min = ctx.param_scalar("min", 1.2)?;
    Ok(ctx
        .blackboard
        .scalar("percept/altitude")?
        .is_some_and(|a| a < min))
}

fn verb_is(ctx: &LeafContext<'_>) -> Result<bool, BtError> {
    let want = match ctx.params.get("verb") {
        Some(Value::Id(v)) => v.as_str(),
        _ => return Err(ctx.bad_param("verb", "expected a verb name")),
    };
    Ok(ctx
        .blackboard
        .id("command/verb")?
        .is_some_and(|v| v == want))
}

fn command_active(ctx: &LeafContext<'_>) -> Result<bool, BtError> {
    Ok(ctx.blackboard.id("command/id")?.is_some())
}

pub const OBSTACLE_PREDICATE: &str = "safety/obstacle_within_radius";
pub const BATTERY_PREDICATE: &str = "safety/battery_below";
pub const ALTITUDE_PREDICATE: &str = "safety/altitude_below";

/// Every condition and action the shipped trees use.
pub fn standard_library(env: Arc<TacticalEnv>) -> LeafLibrary {
    let mut lib = LeafLibrary::new();
    lib.register_condition("always_success", |_: &LeafContext<'_>| Ok(true))
        .register_condition("always_failure", |_: &LeafContext<'_>| Ok(false))
        .register_condition("command/verb_is", verb_is)
        .register_condition("command/active", command_active)
        .register_condition(OBSTACLE_PREDICATE, obstacle_within_radius)
        .register_condition(BATTERY_PREDICATE, battery_below)
        .register_condition(ALTITUDE_PREDICATE, altitude_below)
        .register_action("idle", Idle(env.clone()))
        .register_action("stop", Stop(env.clone()))
        .register_action("patrol", Patrol(env.clone()))
        .register_action("avoid_obstacle", AvoidObstacle(env.clone()))
        .register_action("climb", Climb)
        .register_action("navigate", Navigate(env.clone()))
        .register_action("return_to_dock", ReturnToDock(env.clone()))
        .register_action("scan", Scan(env.clone()))
        .register_action("hover", Hover(env.clone()))
        .register_action("search_area", SearchArea(env.clone()))
        .register_action("face", Face(env.clone()));
    if env.kind == RobotKind::Ugv {
        lib.register_action("grasp", Grasp(env));
    }
    lib
}
