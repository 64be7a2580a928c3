//! Scenario configuration (TOML) and world construction.
//!
//! ```toml
//! name = "lost_keys"
//! map = "apartment.map"            # paths are relative to the scenario file
//! ontology = "kb/apartment.onto"
//! lexicon = "kb/apartment.lex"
//! profiles = "kb/team.profiles"
//! plans = "plans/search.plans"
//! seed = 42
//! max_ticks = 5000
//! tick_rate_hz = 10.0
//! strategic_period_ticks = 5
//!
//! [[rooms]]
//! name = "kitchen"
//! cells = [1, 1, 14, 12]           # min col, min row, max col, max row (inclusive)
//!
//! [[robots]]
//! id = "ugv-1"
//! kind = "UGV"                     # or "Drone"
//! tree = "trees/ugv.tree"
//! pose = [2.0, 2.0, 0.0]
//! [robots.safety]
//! obstacle_radius = 0.3
//!
//! [[objects]]
//! id = "keys-1"
//! concept = "KEY-SET"
//! label = "keys"
//! position = [7.1, 2.4]
//!
//! [[humans]]
//! id = "danny"
//! position = [3.0, 6.0]
//!
//! [[script]]
//! tick = 10
//! sender = "danny"
//! text = "Find my keys"
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::map::{CellIndex, GridMap};
use super::world::{
    Gripper, ObjectPlace, RobotBody, RobotKind, Room, SensorSpec, WorldObject, WorldRng, WorldState,
};
use crate::types::{AgentId, Point, Pose};

#[derive(Debug, Error)]
#[error("scenario field `{field}`: {message}")]
pub struct ScenarioValidationError {
    pub field: String,
    pub message: String,
}

impl ScenarioValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ScenarioValidationError {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoomSpec {
    pub name: String,
    pub cells: [i32; 4],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SafetyParams {
    pub obstacle_radius: Option<f64>,
    pub obstacle_half_angle: Option<f64>,
    pub battery_reserve: Option<f64>,
    pub min_altitude: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorOverrides {
    pub fov: Option<f64>,
    pub range: Option<f64>,
    pub p_detect: Option<f64>,
    pub proximity_radius: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotSpec {
    pub id: String,
    pub kind: RobotKind,
    /// Agent id in the profiles file; defaults to `id`.
    pub profile: Option<String>,
    pub tree: PathBuf,
    pub pose: [f64; 3],
    pub altitude: Option<f64>,
    pub battery: Option<f64>,
    #[serde(default)]
    pub safety: SafetyParams,
    #[serde(default)]
    pub sensor: SensorOverrides,
}

impl RobotSpec {
    pub fn profile_id(&self) -> AgentId {
        AgentId::new(self.profile.clone().unwrap_or_else(|| self.id.clone()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub id: String,
    pub concept: String,
    pub label: String,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HumanSpec {
    pub id: String,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptedUtterance {
    pub tick: u64,
    pub sender: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StallSpec {
    pub robot: String,
    pub from_tick: u64,
    pub ticks: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub map: PathBuf,
    pub ontology: PathBuf,
    pub lexicon: PathBuf,
    pub profiles: PathBuf,
    pub plans: PathBuf,
    pub seed: u64,
    pub max_ticks: u64,
    #[serde(default = "default_rate")]
    pub tick_rate_hz: f64,
    #[serde(default = "default_period")]
    pub strategic_period_ticks: u64,
    #[serde(default = "default_downlink")]
    pub downlink_capacity: usize,
    #[serde(default = "default_uplink")]
    pub uplink_capacity: usize,
    #[serde(default)]
    pub rooms: Vec<RoomSpec>,
    #[serde(default)]
    pub robots: Vec<RobotSpec>,
    #[serde(default)]
    pub objects: Vec<ObjectSpec>,
    #[serde(default)]
    pub humans: Vec<HumanSpec>,
    #[serde(default)]
    pub script: Vec<ScriptedUtterance>,
    /// Artificial strategic-layer stalls, used to exercise delay tolerance.
    #[serde(default)]
    pub stalls: Vec<StallSpec>,
    /// Directory relative paths resolve against; set by the loader.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn default_rate() -> f64 {
    10.0
}
fn default_period() -> u64 {
    5
}
fn default_downlink() -> usize {
    crate::bus::DEFAULT_DOWNLINK_CAPACITY
}
fn default_uplink() -> usize {
    crate::bus::DEFAULT_UPLINK_CAPACITY
}

impl ScenarioConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<ScenarioConfig, ScenarioValidationError> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| {
            ScenarioValidationError::new("scenario", format!("{}: {e}", path.display()))
        })?;
        let mut cfg = ScenarioConfig::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<ScenarioConfig, ScenarioValidationError> {
        toml::from_str(text).map_err(|e| ScenarioValidationError::new("scenario", e.to_string()))
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    fn read(&self, field: &str, p: &Path) -> Result<String, ScenarioValidationError> {
        let full = self.resolve(p);
        fs::read_to_string(&full)
            .map_err(|e| ScenarioValidationError::new(field, format!("{}: {e}", full.display())))
    }

    pub fn read_map(&self) -> Result<GridMap, ScenarioValidationError> {
        let text = self.read("map", &self.map)?;
        GridMap::parse(&text).map_err(|e| ScenarioValidationError::new("map", e.to_string()))
    }

    pub fn read_file(&self, field: &str, p: &Path) -> Result<String, ScenarioValidationError> {
        self.read(field, p)
    }

    /// Structural checks that need no files.
    pub fn validate_shape(&self) -> Result<(), ScenarioValidationError> {
        if self.robots.is_empty() {
            return Err(ScenarioValidationError::new(
                "robots",
                "at least one robot required",
            ));
        }
        if self.strategic_period_ticks < 1 {
            return Err(ScenarioValidationError::new(
                "strategic_period_ticks",
                "must be >= 1",
            ));
        }
        if self.tick_rate_hz.is_nan() || self.tick_rate_hz <= 0.0 {
            return Err(ScenarioValidationError::new(
                "tick_rate_hz",
                "must be positive",
            ));
        }
        let mut ids = BTreeSet::new();
        for r in &self.robots {
            if !ids.insert(r.id.clone()) {
                return Err(ScenarioValidationError::new(
                    "robots.id",
                    format!("duplicate `{}`", r.id),
                ));
            }
        }
        for h in &self.humans {
            if !ids.insert(h.id.clone()) {
                return Err(ScenarioValidationError::new(
                    "humans.id",
                    format!("duplicate `{}`", h.id),
                ));
            }
        }
        for s in &self.script {
            if !self.humans.iter().any(|h| h.id == s.sender) {
                return Err(ScenarioValidationError::new(
                    "script.sender",
                    format!("`{}` is not a declared human", s.sender),
                ));
            }
            if s.text.trim().is_empty() {
                return Err(ScenarioValidationError::new(
                    "script.text",
                    "empty utterance",
                ));
            }
        }
        for st in &self.stalls {
            if !self.robots.iter().any(|r| r.id == st.robot) {
                return Err(ScenarioValidationError::new(
                    "stalls.robot",
                    format!("unknown robot `{}`", st.robot),
                ));
            }
        }
        Ok(())
    }
}

/// Build the initial world. Same config and seed give an identical state.
pub fn load_scenario(config: &ScenarioConfig) -> Result<WorldState, ScenarioValidationError> {
    config.validate_shape()?;
    let grid = config.read_map()?;
    build_world(config, grid)
}

pub fn build_world(
    config: &ScenarioConfig,
    grid: GridMap,
) -> Result<WorldState, ScenarioValidationError> {
    let mut rooms = Vec::new();
    for spec in &config.rooms {
        let [c0, r0, c1, r1] = spec.cells;
        if c0 > c1 || r0 > r1 {
            return Err(ScenarioValidationError::new(
                "rooms.cells",
                format!("room `{}` has inverted bounds", spec.name),
            ));
        }
        let room = Room {
            name: spec.name.clone(),
            min: CellIndex::new(c0, r0),
            max: CellIndex::new(c1, r1),
        };
        if !grid.in_bounds(room.min) || !grid.in_bounds(room.max) {
            return Err(ScenarioValidationError::new(
                "rooms.cells",
                format!("room `{}` exceeds the map", spec.name),
            ));
        }
        if let Some(other) = rooms
            .iter()
            .find(|o: &&Room| o.cells().any(|c| room.contains(c)))
        {
            return Err(ScenarioValidationError::new(
                "rooms",
                format!("rooms `{}` and `{}` overlap", other.name, room.name),
            ));
        }
        rooms.push(room);
    }
    if !rooms.is_empty() {
        if let Some((c, _)) = grid.cells().find(|(c, cell)| {
            *cell == super::map::Cell::Free && !rooms.iter().any(|r| r.contains(*c))
        }) {
            return Err(ScenarioValidationError::new(
                "rooms",
                format!("free cell {c} belongs to no room"),
            ));
        }
    }

    let free_at = |field: &str, p: Point| -> Result<(), ScenarioValidationError> {
        if !grid.contains_point(p) || !grid.is_free(GridMap::cell_of(p)) {
            return Err(ScenarioValidationError::new(
                field,
                format!("({:.2}, {:.2}) is not on a free cell", p.x, p.y),
            ));
        }
        Ok(())
    };

    let mut robots = BTreeMap::new();
    for spec in &config.robots {
        let pose = Pose::new(spec.pose[0], spec.pose[1], spec.pose[2]);
        free_at("robots.pose", pose.point())?;
        let mut body = RobotBody::with_defaults(AgentId::new(&spec.id), spec.kind, pose);
        if let Some(alt) = spec.altitude {
            if spec.kind != RobotKind::Drone {
                return Err(ScenarioValidationError::new(
                    "robots.altitude",
                    "only drones have altitude",
                ));
            }
            if !(super::world::DRONE_MIN_ALTITUDE..=super::world::DRONE_MAX_ALTITUDE).contains(&alt)
            {
                return Err(ScenarioValidationError::new(
                    "robots.altitude",
                    "outside [0.3, 2.5]",
                ));
            }
            body.altitude = alt;
        }
        if let Some(b) = spec.battery {
            if !(0.0..=1.0).contains(&b) {
                return Err(ScenarioValidationError::new(
                    "robots.battery",
                    "outside [0,1]",
                ));
            }
            body.battery = b;
        }
        let o = &spec.sensor;
        body.sensor = SensorSpec {
            fov: o.fov.unwrap_or(body.sensor.fov),
            range: o.range.unwrap_or(body.sensor.range),
            p_detect: o.p_detect.unwrap_or(body.sensor.p_detect),
            proximity_radius: o.proximity_radius.unwrap_or(body.sensor.proximity_radius),
        };
        body.sensor
            .validate()
            .map_err(|m| ScenarioValidationError::new("robots.sensor", m))?;
        if grid.disc_collides(pose.point(), body.radius, body.layer()) {
            return Err(ScenarioValidationError::new(
                "robots.pose",
                format!("robot `{}` overlaps an obstacle", spec.id),
            ));
        }
        debug_assert!(body.kind == RobotKind::Drone || body.gripper == Some(Gripper::Empty));
        robots.insert(body.robot_id.clone(), body);
    }

    let mut objects = BTreeMap::new();
    for spec in &config.objects {
        let p = Point::new(spec.position[0], spec.position[1]);
        free_at("objects.position", p)?;
        if objects.contains_key(&spec.id) {
            return Err(ScenarioValidationError::new(
                "objects.id",
                format!("duplicate `{}`", spec.id),
            ));
        }
        objects.insert(
            spec.id.clone(),
            WorldObject {
                concept: spec.concept.clone(),
                label: spec.label.clone(),
                place: ObjectPlace::Floor { x: p.x, y: p.y },
            },
        );
    }

    let mut humans = BTreeMap::new();
    for h in &config.humans {
        let p = Point::new(h.position[0], h.position[1]);
        free_at("humans.position", p)?;
        humans.insert(AgentId::new(&h.id), p);
    }

    Ok(WorldState {
        grid,
        rooms,
        objects,
        robots,
        humans,
        tick: 0,
        rng: WorldRng::new(config.seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> ScenarioConfig {
        let text = format!(
            r#"
name = "t"
map = "m.map"
ontology = "o"
lexicon = "l"
profiles = "p"
plans = "x"
seed = 3
max_ticks = 10
[[rooms]]
name = "all"
cells = [1, 1, 6, 6]
[[robots]]
id = "ugv-1"
kind = "UGV"
tree = "t.tree"
pose = [0.5, 0.5, 0.0]
{extra}
"#
        );
        ScenarioConfig::from_toml(&text).unwrap()
    }

    fn grid() -> GridMap {
        GridMap::parse(
            "########\n#......#\n#......#\n#..#...#\n#......#\n#......#\n#......#\n########\n",
        )
        .unwrap()
    }

    #[test]
    fn builds_world_deterministically() {
        let cfg = config("[[objects]]\nid = \"keys-1\"\nconcept = \"KEY-SET\"\nlabel = \"keys\"\nposition = [1.4, 1.4]\n");
        let mut g = grid();
        // the wall cell in the middle must not be counted as un-roomed free space
        g.set(CellIndex::new(3, 3), super::super::map::Cell::Wall);
        let a = build_world(&cfg, g.clone()).unwrap();
        let b = build_world(&cfg, g).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
        assert_eq!(a.objects.len(), 1);
    }

    #[test]
    fn placement_on_wall_is_rejected() {
        let cfg = config("[[objects]]\nid = \"keys-1\"\nconcept = \"KEY-SET\"\nlabel = \"keys\"\nposition = [0.1, 0.1]\n");
        let err = build_world(&cfg, grid()).unwrap_err();
        assert_eq!(err.field, "objects.position");
    }

    #[test]
    fn uncovered_free_cell_is_rejected() {
        let mut cfg = config("");
        cfg.rooms[0].cells = [1, 1, 6, 5];
        let err = build_world(&cfg, grid()).unwrap_err();
        assert_eq!(err.field, "rooms");
    }

    #[test]
    fn no_robots_is_rejected() {
        let mut cfg = config("");
        cfg.robots.clear();
        assert_eq!(cfg.validate_shape().unwrap_err().field, "robots");
    }
}
