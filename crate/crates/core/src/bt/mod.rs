//! Reactive behavior-tree engine for the tactical layer.
//!
//! Trees are re-evaluated from the root every tick, so a higher-priority
//! safety branch preempts whatever the command branch was doing on the very
//! tick its condition becomes true. Memory is opt-in through the
//! `MemorySequenceMarker` decorator. All per-tick state lives on the
//! [`Blackboard`], which makes a tick a pure function of
//! (tree, blackboard, percepts).

mod blackboard;
mod engine;
mod leaf;
pub mod leaves;
pub mod nav;
mod node;
mod parse;
mod robot;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::types::AgentId;

pub use blackboard::{check_key, Blackboard, NAMESPACES};
pub use engine::{tick, NodeVisit, Origin, TickResult};
pub use leaf::{ActionLeaf, ConditionLeaf, Effects, LeafContext, LeafLibrary};
pub use node::{BtNode, BtTree, DecoratorKind, NodeKind, ValidationFailure};
pub use parse::{parse_tree_file, TreeParseError};
pub use robot::{
    build_robot_tree, default_safety_spec, safety_condition_id, safety_subtree_id, supported_verbs,
    write_percepts, InstallOutcome, Limits, RejectReason, SafetyEntry, TacticalLayer, TacticalStep,
    COMMAND_SLOT_ID, IDLE_ID, PROGRESS_PERIOD, ROOT_ID,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BtStatus {
    Success,
    Failure,
    Running,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// UGV `[v, omega]`; drone `[vx, vy, omega]` in the body frame.
    Drive,
    /// Drone climb rate `[vz]`.
    Vertical,
    /// `[closure]`, 0 open to 1 closed.
    Gripper,
    Signal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActuatorRequest {
    pub robot_id: AgentId,
    pub channel: Channel,
    pub setpoint: Vec<f64>,
}

impl ActuatorRequest {
    pub fn new(robot_id: AgentId, channel: Channel, setpoint: Vec<f64>) -> Self {
        ActuatorRequest {
            robot_id,
            channel,
            setpoint,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.setpoint.iter().all(|v| *v == 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BtError {
    #[error("leaf `{0}` is not registered")]
    UnresolvedLeaf(String),
    #[error("blackboard key `{key}` holds a {found}, expected {expected}")]
    BlackboardTypeMismatch {
        key: String,
        expected: &'static str,
        found: &'static str,
    },
    #[error("malformed blackboard key `{0}`")]
    BadKey(String),
    #[error("leaf may not write `{0}`")]
    ForbiddenWrite(String),
    #[error("leaf parameter `{param}` on node `{node}`: {message}")]
    BadParam {
        node: String,
        param: String,
        message: String,
    },
}
