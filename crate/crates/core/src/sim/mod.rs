//! Deterministic seeded 2D apartment simulation: occupancy map, objects,
//! UGV and drone kinematics, vision and proximity sensing, collisions.

mod map;
mod scenario;
mod world;

pub use map::{Cell, CellIndex, GridMap, MapError, ObstacleLayer, CELL_SIZE};
pub use scenario::{
    build_world, load_scenario, HumanSpec, ObjectSpec, RobotSpec, RoomSpec, SafetyParams,
    ScenarioConfig, ScenarioValidationError, ScriptedUtterance, SensorOverrides, StallSpec,
};
pub use world::{
    CollisionEvent, Detection, Gripper, InjectError, ObjectPlace, RelativePosition, RobotBody,
    RobotKind, Room, SensorSpec, StepError, StepOutcome, WorldObject, WorldRng, WorldState,
    DOCK_RADIUS, DRONE_MAX_ALTITUDE, DRONE_MIN_ALTITUDE, DT, FURNITURE_HEIGHT, GRASP_RADIUS,
    OBSTACLE_LABEL,
};
