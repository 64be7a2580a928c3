//! Shared value and geometry types used across both control layers.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Identifier of a team member (human or robot).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AgentId(pub String);

impl AgentId {
    pub fn new(id: impl Into<String>) -> Self {
        AgentId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AgentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AgentId {
    fn from(s: &str) -> Self {
        AgentId(s.to_string())
    }
}

/// Planar pose in the world frame. Heading in radians, counter-clockwise
/// from +x in map coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub const fn new(x: f64, y: f64, theta: f64) -> Self {
        Pose { x, y, theta }
    }

    pub fn point(&self) -> Point {
        Point::new(self.x, self.y)
    }

    /// Transform a (range, bearing) observation taken from this pose into
    /// world coordinates.
    pub fn project(&self, range: f64, bearing: f64) -> Point {
        let a = self.theta + bearing;
        Point::new(self.x + range * a.cos(), self.y + range * a.sin())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Wrap an angle into (-pi, pi].
pub fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut r = a % two_pi;
    if r <= -std::f64::consts::PI {
        r += two_pi;
    } else if r > std::f64::consts::PI {
        r -= two_pi;
    }
    r
}

/// Typed value stored on blackboards and carried in command parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "value", rename_all = "snake_case")]
pub enum Value {
    Scalar(f64),
    Pose(Pose),
    Id(String),
    IdList(Vec<String>),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Scalar(_) => "scalar",
            Value::Pose(_) => "pose",
            Value::Id(_) => "identifier",
            Value::IdList(_) => "identifier-list",
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            Value::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_pose(&self) -> Option<Pose> {
        match self {
            Value::Pose(p) => Some(*p),
            _ => None,
        }
    }

    pub fn as_id(&self) -> Option<&str> {
        match self {
            Value::Id(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_id_list(&self) -> Option<&[String]> {
        match self {
            Value::IdList(v) => Some(v),
            _ => None,
        }
    }

    /// Parse the textual form used in tree and plan files: a number becomes a
    /// scalar, `x,y` or `x,y,theta` a pose, `a|b|c` an identifier list, and
    /// anything else an identifier.
    pub fn parse_literal(text: &str) -> Value {
        if let Ok(v) = text.parse::<f64>() {
            return Value::Scalar(v);
        }
        let parts: Vec<&str> = text.split(',').collect();
        if parts.len() == 2 || parts.len() == 3 {
            let nums: Result<Vec<f64>, _> = parts.iter().map(|p| p.trim().parse::<f64>()).collect();
            if let Ok(n) = nums {
                let theta = n.get(2).copied().unwrap_or(0.0);
                return Value::Pose(Pose::new(n[0], n[1], theta));
            }
        }
        if text.contains('|') {
            return Value::IdList(
                text.split('|')
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect(),
            );
        }
        Value::Id(text.to_string())
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Scalar(v) => write!(f, "{v}"),
            Value::Pose(p) => write!(f, "{},{},{}", p.x, p.y, p.theta),
            Value::Id(s) => f.write_str(s),
            Value::IdList(v) => f.write_str(&v.join("|")),
        }
    }
}

/// Ordered parameter map. BTreeMap keeps serialization deterministic.
pub type Params = BTreeMap<String, Value>;
