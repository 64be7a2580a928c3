//! World state and the fixed-step integrator.

use std::collections::BTreeMap;
use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::map::{Cell, CellIndex, GridMap, ObstacleLayer, CELL_SIZE};
use crate::bt::{ActuatorRequest, Channel};
use crate::types::{wrap_angle, AgentId, Point, Pose};

pub const DT: f64 = 0.1;
pub const GRASP_RADIUS: f64 = 0.4;
pub const DRONE_MIN_ALTITUDE: f64 = 0.3;
pub const DRONE_MAX_ALTITUDE: f64 = 2.5;
/// Drones above this altitude clear furniture.
pub const FURNITURE_HEIGHT: f64 = 1.0;
pub const DOCK_RADIUS: f64 = 0.3;
pub const CHARGE_RATE: f64 = 0.05;
pub const OBSTACLE_LABEL: &str = "obstacle";
const PROXIMITY_SECTORS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RobotKind {
    #[serde(rename = "UGV")]
    Ugv,
    Drone,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    pub fov: f64,
    pub range: f64,
    pub p_detect: f64,
    pub proximity_radius: f64,
}

impl SensorSpec {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.fov > 0.0 && self.fov <= TAU + 1e-12) {
            return Err(format!("fov {} outside (0, 2pi]", self.fov));
        }
        if self.range <= 0.0 {
            return Err(format!("range {} must be positive", self.range));
        }
        if !(0.0..=1.0).contains(&self.p_detect) {
            return Err(format!("p_detect {} outside [0,1]", self.p_detect));
        }
        if self.proximity_radius <= 0.0 {
            return Err("proximity_radius must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", content = "object", rename_all = "snake_case")]
pub enum Gripper {
    Empty,
    Holding(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobotBody {
    pub robot_id: AgentId,
    pub kind: RobotKind,
    pub pose: Pose,
    /// Drone only; zero for ground vehicles.
    pub altitude: f64,
    pub radius: f64,
    pub v_max: f64,
    pub omega_max: f64,
    pub vz_max: f64,
    pub battery: f64,
    pub idle_drain: f64,
    pub motion_drain: f64,
    pub sensor: SensorSpec,
    /// Ground vehicles only.
    pub gripper: Option<Gripper>,
    pub dock: Point,
}

impl RobotBody {
    pub fn layer(&self) -> ObstacleLayer {
        match self.kind {
            RobotKind::Drone if self.altitude >= FURNITURE_HEIGHT => ObstacleLayer::Air,
            _ => ObstacleLayer::Ground,
        }
    }

    /// Kind defaults for kinematics, drain and sensing.
    pub fn with_defaults(robot_id: AgentId, kind: RobotKind, pose: Pose) -> RobotBody {
        match kind {
            RobotKind::Ugv => RobotBody {
                robot_id,
                kind,
                pose,
                altitude: 0.0,
                radius: 0.2,
                v_max: 1.0,
                omega_max: 2.0,
                vz_max: 0.0,
                battery: 1.0,
                idle_drain: 0.0002,
                motion_drain: 0.001,
                sensor: SensorSpec {
                    fov: PI / 2.0,
                    range: 3.0,
                    p_detect: 0.7,
                    proximity_radius: 0.6,
                },
                gripper: Some(Gripper::Empty),
                dock: pose.point(),
            },
            RobotKind::Drone => RobotBody {
                robot_id,
                kind,
                pose,
                altitude: DRONE_MIN_ALTITUDE,
                radius: 0.15,
                v_max: 2.0,
                omega_max: 2.5,
                vz_max: 0.5,
                battery: 1.0,
                idle_drain: 0.0005,
                motion_drain: 0.0015,
                sensor: SensorSpec {
                    fov: 2.0 * PI / 3.0,
                    range: 4.0,
                    p_detect: 0.7,
                    proximity_radius: 0.6,
                },
                gripper: None,
                dock: pose.point(),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "at", rename_all = "snake_case")]
pub enum ObjectPlace {
    Floor { x: f64, y: f64 },
    HeldBy { robot: AgentId },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldObject {
    pub concept: String,
    /// Class label the perception pipeline reports for this object.
    pub label: String,
    pub place: ObjectPlace,
}

/// Rectangular room in inclusive cell coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Room {
    pub name: String,
    pub min: CellIndex,
    pub max: CellIndex,
}

impl Room {
    pub fn contains(&self, c: CellIndex) -> bool {
        c.col >= self.min.col
            && c.col <= self.max.col
            && c.row >= self.min.row
            && c.row <= self.max.row
    }

    pub fn centroid(&self) -> Point {
        Point::new(
            (self.min.col + self.max.col + 1) as f64 * CELL_SIZE / 2.0,
            (self.min.row + self.max.row + 1) as f64 * CELL_SIZE / 2.0,
        )
    }

    pub fn cells(&self) -> impl Iterator<Item = CellIndex> + '_ {
        (self.min.row..=self.max.row)
            .flat_map(move |r| (self.min.col..=self.max.col).map(move |c| CellIndex::new(c, r)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativePosition {
    pub range: f64,
    pub bearing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub class_label: String,
    pub confidence: f64,
    pub relative_position: RelativePosition,
    pub tick: u64,
    /// Object identity when the detector can track it; proximity returns
    /// carry none.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollisionEvent {
    pub robot_id: AgentId,
    pub tick: u64,
    pub position: Point,
    /// Cell the robot was pushing into.
    pub cell: CellIndex,
}

#[derive(Debug, Error, PartialEq)]
pub enum StepError {
    #[error("actuator request for unknown robot `{0}`")]
    UnknownRobot(AgentId),
    #[error("robot `{robot}` has two requests on channel {channel:?}")]
    DuplicateChannel { robot: AgentId, channel: Channel },
    #[error("dt must be {DT} s, got {0}")]
    BadTimestep(f64),
}

#[derive(Debug, Error, PartialEq)]
pub enum InjectError {
    #[error("cell {0} is not free")]
    NotFree(CellIndex),
    #[error("cell {0} overlaps a robot or object")]
    Occupied(CellIndex),
}

/// Seeded generator whose position can be serialized.
#[derive(Debug, Clone)]
pub struct WorldRng {
    seed: u64,
    rng: ChaCha8Rng,
}

impl WorldRng {
    pub fn new(seed: u64) -> Self {
        WorldRng {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn gen_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }
}

impl PartialEq for WorldRng {
    fn eq(&self, other: &Self) -> bool {
        self.seed == other.seed && self.rng.get_word_pos() == other.rng.get_word_pos()
    }
}

impl Serialize for WorldRng {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        (self.seed, self.rng.get_word_pos().to_string()).serialize(s)
    }
}

impl<'de> Deserialize<'de> for WorldRng {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let (seed, pos): (u64, String) = Deserialize::deserialize(d)?;
        let mut r = WorldRng::new(seed);
        r.rng
            .set_word_pos(pos.parse().map_err(serde::de::Error::custom)?);
        Ok(r)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub grid: GridMap,
    pub rooms: Vec<Room>,
    pub objects: BTreeMap<String, WorldObject>,
    pub robots: BTreeMap<AgentId, RobotBody>,
    pub humans: BTreeMap<AgentId, Point>,
    pub tick: u64,
    pub rng: WorldRng,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepOutcome {
    pub detections: BTreeMap<AgentId, Vec<Detection>>,
    pub collisions: Vec<CollisionEvent>,
}

impl WorldState {
    pub fn room_of(&self, p: Point) -> Option<&Room> {
        let c = GridMap::cell_of(p);
        self.rooms.iter().find(|r| r.contains(c))
    }

    pub fn room(&self, name: &str) -> Option<&Room> {
        self.rooms
            .iter()
            .find(|r| r.name.eq_ignore_ascii_case(name))
    }

    pub fn object_position(&self, id: &str) -> Option<Point> {
        let obj = self.objects.get(id)?;
        match &obj.place {
            ObjectPlace::Floor { x, y } => Some(Point::new(*x, *y)),
            ObjectPlace::HeldBy { robot } => self.robots.get(robot).map(|b| b.pose.point()),
        }
    }

    /// SHA-256 over the canonical JSON serialization.
    pub fn digest(&self) -> [u8; 32] {
        let bytes = serde_json::to_vec(self).expect("world state serializes");
        Sha256::digest(&bytes).into()
    }

    /// Turn a free cell into furniture mid-run.
    pub fn inject_obstacle(&mut self, cell: CellIndex) -> Result<(), InjectError> {
        if !self.grid.is_free(cell) {
            return Err(InjectError::NotFree(cell));
        }
        for body in self.robots.values() {
            let q = GridMap::closest_point_in_cell(cell, body.pose.point());
            if q.distance(&body.pose.point()) < body.radius {
                return Err(InjectError::Occupied(cell));
            }
        }
        for obj in self.objects.values() {
            if let ObjectPlace::Floor { x, y } = obj.place {
                if GridMap::cell_of(Point::new(x, y)) == cell {
                    return Err(InjectError::Occupied(cell));
                }
            }
        }
        self.grid.set(cell, Cell::Furniture);
        Ok(())
    }

    /// Advance the world by one fixed step, then sense for every robot.
    /// Channels without a request this step are driven to zero.
    pub fn step(
        &mut self,
        requests: &[ActuatorRequest],
        dt: f64,
    ) -> Result<StepOutcome, StepError> {
        if (dt - DT).abs() > 1e-12 {
            return Err(StepError::BadTimestep(dt));
        }
        let mut per_robot: BTreeMap<AgentId, BTreeMap<Channel, Vec<f64>>> = BTreeMap::new();
        for req in requests {
            if !self.robots.contains_key(&req.robot_id) {
                return Err(StepError::UnknownRobot(req.robot_id.clone()));
            }
            let chans = per_robot.entry(req.robot_id.clone()).or_default();
            if chans.insert(req.channel, req.setpoint.clone()).is_some() {
                return Err(StepError::DuplicateChannel {
                    robot: req.robot_id.clone(),
                    channel: req.channel,
                });
            }
        }

        self.tick += 1;
        let tick = self.tick;
        let mut outcome = StepOutcome::default();
        let ids: Vec<AgentId> = self.robots.keys().cloned().collect();
        for id in &ids {
            let chans = per_robot.remove(id).unwrap_or_default();
            if let Some(ev) = self.integrate(id, &chans, dt, tick) {
                outcome.collisions.push(ev);
            }
        }
        for id in &ids {
            let d = self.sense(id);
            outcome.detections.insert(id.clone(), d);
        }
        Ok(outcome)
    }

    fn integrate(
        &mut self,
        id: &AgentId,
        chans: &BTreeMap<Channel, Vec<f64>>,
        dt: f64,
        tick: u64,
    ) -> Option<CollisionEvent> {
        let sp =
            |c: Channel, i: usize| chans.get(&c).and_then(|v| v.get(i)).copied().unwrap_or(0.0);
        let body = self.robots.get(id).expect("robot exists").clone();
        let powered = body.battery > 0.0;

        let (mut vx, mut vy, mut omega) = match body.kind {
            RobotKind::Ugv => (sp(Channel::Drive, 0), 0.0, sp(Channel::Drive, 1)),
            RobotKind::Drone => (
                sp(Channel::Drive, 0),
                sp(Channel::Drive, 1),
                sp(Channel::Drive, 2),
            ),
        };
        let mut vz = sp(Channel::Vertical, 0);
        if !powered {
            (vx, vy, omega, vz) = (0.0, 0.0, 0.0, 0.0);
        }
        let speed = vx.hypot(vy);
        if speed > body.v_max {
            vx *= body.v_max / speed;
            vy *= body.v_max / speed;
        }
        let speed = vx.hypot(vy);
        omega = omega.clamp(-body.omega_max, body.omega_max);
        vz = vz.clamp(-body.vz_max, body.vz_max);

        let (c, s) = (body.pose.theta.cos(), body.pose.theta.sin());
        let from = body.pose.point();
        let to = Point::new(
            from.x + (vx * c - vy * s) * dt,
            from.y + (vx * s + vy * c) * dt,
        );
        let mut new_altitude = body.altitude;
        if body.kind == RobotKind::Drone {
            new_altitude = (body.altitude + vz * dt).clamp(DRONE_MIN_ALTITUDE, DRONE_MAX_ALTITUDE);
        }
        let layer = match body.kind {
            RobotKind::Drone if body.altitude.min(new_altitude) >= FURNITURE_HEIGHT => {
                ObstacleLayer::Air
            }
            RobotKind::Drone => ObstacleLayer::Ground,
            RobotKind::Ugv => ObstacleLayer::Ground,
        };

        let (reached, collision) = self.sweep(&body, from, to, layer);
        let mut event = None;
        if let Some(cell) = collision {
            event = Some(CollisionEvent {
                robot_id: id.clone(),
                tick,
                position: reached,
                cell,
            });
        }

        let drain = (body.idle_drain + body.motion_drain * speed / body.v_max) * dt;
        let mut battery = (body.battery - drain).max(0.0);
        if speed == 0.0 && reached.distance(&body.dock) <= DOCK_RADIUS {
            battery = (battery + CHARGE_RATE * dt).min(1.0);
        }

        let b = self.robots.get_mut(id).expect("robot exists");
        b.pose = Pose::new(
            reached.x,
            reached.y,
            wrap_angle(body.pose.theta + omega * dt),
        );
        b.altitude = new_altitude;
        b.battery = battery;

        if let Some(grip) = chans
            .get(&Channel::Gripper)
            .and_then(|v| v.first())
            .copied()
        {
            self.actuate_gripper(id, grip);
        }
        event
    }

    /// Move a disc from `from` toward `to`, stopping at first contact.
    fn sweep(
        &self,
        body: &RobotBody,
        from: Point,
        to: Point,
        layer: ObstacleLayer,
    ) -> (Point, Option<CellIndex>) {
        if from == to {
            return (from, None);
        }
        let blocked = |p: Point| {
            self.grid.disc_collides(p, body.radius, layer) || self.robot_contact(body, p)
        };
        let lerp = |t: f64| Point::new(from.x + (to.x - from.x) * t, from.y + (to.y - from.y) * t);
        const SAMPLES: usize = 8;
        let mut free_t = 0.0;
        for i in 1..=SAMPLES {
            let t = i as f64 / SAMPLES as f64;
            if blocked(lerp(t)) {
                let mut lo = free_t;
                let mut hi = t;
                for _ in 0..30 {
                    let mid = 0.5 * (lo + hi);
                    if blocked(lerp(mid)) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let contact = lerp(hi);
                let cell = self
                    .grid
                    .blocking_cells_near(contact, body.radius, layer)
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .map(|(c, _, _)| c)
                    .unwrap_or_else(|| GridMap::cell_of(contact));
                return (lerp(lo), Some(cell));
            }
            free_t = t;
        }
        (to, None)
    }

    fn robot_contact(&self, body: &RobotBody, p: Point) -> bool {
        self.robots.values().any(|other| {
            other.robot_id != body.robot_id
                && other.kind == body.kind
                && other.pose.point().distance(&p) < other.radius + body.radius
        })
    }

    fn actuate_gripper(&mut self, id: &AgentId, setpoint: f64) {
        let Some(body) = self.robots.get(id) else {
            return;
        };
        let Some(gripper) = body.gripper.clone() else {
            return;
        };
        let here = body.pose.point();
        let close = setpoint.clamp(0.0, 1.0) >= 0.5;
        match (gripper, close) {
            (Gripper::Empty, true) => {
                let nearest = self
                    .objects
                    .iter()
                    .filter_map(|(oid, o)| match o.place {
                        ObjectPlace::Floor { x, y } => {
                            let d = Point::new(x, y).distance(&here);
                            (d <= GRASP_RADIUS).then(|| (oid.clone(), d))
                        }
                        ObjectPlace::HeldBy { .. } => None,
                    })
                    .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
                if let Some((oid, _)) = nearest {
                    self.objects.get_mut(&oid).unwrap().place =
                        ObjectPlace::HeldBy { robot: id.clone() };
                    self.robots.get_mut(id).unwrap().gripper = Some(Gripper::Holding(oid));
                }
            }
            (Gripper::Holding(oid), false) => {
                self.objects.get_mut(&oid).unwrap().place = ObjectPlace::Floor {
                    x: here.x,
                    y: here.y,
                };
                self.robots.get_mut(id).unwrap().gripper = Some(Gripper::Empty);
            }
            _ => {}
        }
    }

    /// Vision and proximity sensing for one robot.
    pub fn sense(&mut self, id: &AgentId) -> Vec<Detection> {
        let Some(body) = self.robots.get(id).cloned() else {
            return Vec::new();
        };
        let tick = self.tick;
        let here = body.pose.point();
        let mut out = Vec::new();

        let visible: Vec<(String, String, f64, f64)> = self
            .objects
            .iter()
            .filter_map(|(oid, o)| {
                let ObjectPlace::Floor { x, y } = o.place else {
                    return None;
                };
                let p = Point::new(x, y);
                let range = p.distance(&here);
                if range > body.sensor.range {
                    return None;
                }
                let bearing = wrap_angle((p.y - here.y).atan2(p.x - here.x) - body.pose.theta);
                if bearing.abs() > body.sensor.fov / 2.0 + 1e-12 {
                    return None;
                }
                if !self.grid.line_of_sight(here, p) {
                    return None;
                }
                Some((oid.clone(), o.label.clone(), range, bearing))
            })
            .collect();
        for (oid, label, range, bearing) in visible {
            if self.rng.gen_f64() < body.sensor.p_detect {
                let confidence = 0.6 + 0.4 * self.rng.gen_f64();
                out.push(Detection {
                    class_label: label,
                    confidence,
                    relative_position: RelativePosition { range, bearing },
                    tick,
                    instance: Some(oid),
                });
            }
        }

        out.extend(self.proximity(&body));
        out
    }

    /// Nearest obstacle point per bearing sector within the proximity radius.
    /// No randomness.
    pub fn proximity(&self, body: &RobotBody) -> Vec<Detection> {
        let here = body.pose.point();
        let radius = body.sensor.proximity_radius;
        let mut sectors: [Option<(f64, f64)>; PROXIMITY_SECTORS] = [None; PROXIMITY_SECTORS];
        let mut consider = |d: f64, q: Point| {
            let bearing = if d > 0.0 {
                wrap_angle((q.y - here.y).atan2(q.x - here.x) - body.pose.theta)
            } else {
                0.0
            };
            let idx = (((bearing + PI) / TAU) * PROXIMITY_SECTORS as f64).floor() as usize
                % PROXIMITY_SECTORS;
            match sectors[idx] {
                Some((best, _)) if best <= d => {}
                _ => sectors[idx] = Some((d, bearing)),
            }
        };
        for (_, d, q) in self.grid.blocking_cells_near(here, radius, body.layer()) {
            consider(d, q);
        }
        for other in self.robots.values() {
            if other.robot_id == body.robot_id || other.kind != body.kind {
                continue;
            }
            let centre = other.pose.point();
            let dc = centre.distance(&here);
            let d = (dc - other.radius).max(0.0);
            if d <= radius && dc > 0.0 {
                let q = Point::new(
                    here.x + (centre.x - here.x) * d / dc,
                    here.y + (centre.y - here.y) * d / dc,
                );
                consider(d, q);
            }
        }
        sectors
            .iter()
            .flatten()
            .map(|&(range, bearing)| Detection {
                class_label: OBSTACLE_LABEL.to_string(),
                confidence: 1.0,
                relative_position: RelativePosition { range, bearing },
                tick: self.tick,
                instance: None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room_world(map: &str) -> WorldState {
        WorldState {
            grid: GridMap::parse(map).unwrap(),
            rooms: vec![],
            objects: BTreeMap::new(),
            robots: BTreeMap::new(),
            humans: BTreeMap::new(),
            tick: 0,
            rng: WorldRng::new(7),
        }
    }

    fn open_map() -> String {
        let mut s = String::new();
        for r in 0..20 {
            for c in 0..20 {
                s.push(if r == 0 || c == 0 || r == 19 || c == 19 {
                    '#'
                } else {
                    '.'
                });
            }
            s.push('\n');
        }
        s
    }

    fn ugv(pose: Pose) -> RobotBody {
        RobotBody::with_defaults(AgentId::new("ugv-1"), RobotKind::Ugv, pose)
    }

    fn drive(v: f64, w: f64) -> ActuatorRequest {
        ActuatorRequest::new(AgentId::new("ugv-1"), Channel::Drive, vec![v, w])
    }

    #[test]
    fn zero_velocity_only_idle_drain() {
        let mut w = room_world(&open_map());
        let mut b = ugv(Pose::new(2.0, 2.0, 0.3));
        b.dock = Point::new(4.0, 4.0);
        w.robots.insert(b.robot_id.clone(), b.clone());
        w.step(&[drive(0.0, 0.0)], DT).unwrap();
        let after = &w.robots[&b.robot_id];
        assert_eq!(after.pose, b.pose);
        assert!((after.battery - (1.0 - b.idle_drain * DT)).abs() < 1e-15);
    }

    #[test]
    fn unicycle_step_matches_closed_form() {
        let mut w = room_world(&open_map());
        let b = ugv(Pose::new(1.0, 1.0, 0.0));
        w.robots.insert(b.robot_id.clone(), b.clone());
        w.step(&[drive(1.0, 0.0)], DT).unwrap();
        let p = w.robots[&b.robot_id].pose;
        // closed form x + v cos(theta) dt
        assert!((p.x - 1.1).abs() < 1e-12);
        assert!((p.y - 1.0).abs() < 1e-12);
        assert_eq!(p.theta, 0.0);
    }

    #[test]
    fn wall_contact_clips_and_reports() {
        let mut w = room_world(&open_map());
        // east wall occupies x in [4.75, 5.0); disc radius 0.2 touches at x = 4.55
        let b = ugv(Pose::new(4.5, 2.1, 0.0));
        w.robots.insert(b.robot_id.clone(), b.clone());
        let out = w.step(&[drive(1.0, 0.0)], DT).unwrap();
        assert_eq!(out.collisions.len(), 1);
        assert_eq!(out.collisions[0].cell, CellIndex::new(19, 8));
        let p = w.robots[&b.robot_id].pose;
        assert!((p.x - 4.55).abs() < 1e-6, "clipped at contact, got {}", p.x);
        assert!(GridMap::cell_of(p.point()).col < 19);
    }

    #[test]
    fn unknown_robot_rejected() {
        let mut w = room_world(&open_map());
        assert_eq!(
            w.step(&[drive(0.0, 0.0)], DT),
            Err(StepError::UnknownRobot(AgentId::new("ugv-1")))
        );
    }

    #[test]
    fn object_behind_wall_is_never_seen() {
        let mut map: Vec<Vec<char>> = open_map().lines().map(|l| l.chars().collect()).collect();
        for row in map.iter_mut().take(19).skip(1) {
            row[10] = '#';
        }
        let text: String = map
            .iter()
            .map(|r| r.iter().collect::<String>() + "\n")
            .collect();
        let mut w = room_world(&text);
        let mut b = ugv(Pose::new(2.0, 2.0, 0.0));
        b.sensor.p_detect = 1.0;
        w.robots.insert(b.robot_id.clone(), b);
        w.objects.insert(
            "keys-1".into(),
            WorldObject {
                concept: "KEY-SET".into(),
                label: "keys".into(),
                place: ObjectPlace::Floor { x: 3.5, y: 2.0 },
            },
        );
        for _ in 0..50 {
            let out = w.step(&[], DT).unwrap();
            assert!(out.detections[&AgentId::new("ugv-1")]
                .iter()
                .all(|d| d.class_label != "keys"));
        }
    }

    #[test]
    fn gripper_transfers_within_radius() {
        let mut w = room_world(&open_map());
        let b = ugv(Pose::new(2.0, 2.0, 0.0));
        w.robots.insert(b.robot_id.clone(), b);
        w.objects.insert(
            "keys-1".into(),
            WorldObject {
                concept: "KEY-SET".into(),
                label: "keys".into(),
                place: ObjectPlace::Floor { x: 2.3, y: 2.0 },
            },
        );
        let grip = ActuatorRequest::new(AgentId::new("ugv-1"), Channel::Gripper, vec![1.0]);
        w.step(&[grip], DT).unwrap();
        assert_eq!(
            w.objects["keys-1"].place,
            ObjectPlace::HeldBy {
                robot: AgentId::new("ugv-1")
            }
        );
        assert_eq!(
            w.robots[&AgentId::new("ugv-1")].gripper,
            Some(Gripper::Holding("keys-1".into()))
        );
    }

    #[test]
    fn proximity_is_deterministic() {
        let mut w = room_world(&open_map());
        let b = ugv(Pose::new(0.6, 2.0, 0.0));
        w.robots.insert(b.robot_id.clone(), b.clone());
        let a = w.proximity(&b);
        let c = w.proximity(&b);
        assert_eq!(a, c);
        // west wall boundary at x = 0.25
        let nearest = a
            .iter()
            .map(|d| d.relative_position.range)
            .fold(f64::INFINITY, f64::min);
        assert!((nearest - 0.35).abs() < 1e-9);
    }
}
