use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use super::{Blackboard, BtError, BtStatus, Channel};
use crate::sim::Detection;
use crate::types::{Params, Value};

/// Read-only view a leaf gets during one tick.
pub struct LeafContext<'a> {
    pub node_id: &'a str,
    pub blackboard: &'a Blackboard,
    pub percepts: &'a [Detection],
    pub params: &'a Params,
}

impl LeafContext<'_> {
    pub fn param_scalar(&self, name: &str, default: f64) -> Result<f64, BtError> {
        match self.params.get(name) {
            None => Ok(default),
            Some(Value::Scalar(v)) => Ok(*v),
            Some(other) => Err(self.bad_param(
                name,
                format!("expected a number, got {}", other.type_name()),
            )),
        }
    }

    pub fn param_id<'p>(&'p self, name: &str, default: &'p str) -> Result<&'p str, BtError> {
        match self.params.get(name) {
            None => Ok(default),
            Some(Value::Id(v)) => Ok(v),
            Some(other) => Err(self.bad_param(
                name,
                format!("expected an identifier, got {}", other.type_name()),
            )),
        }
    }

    pub fn bad_param(&self, name: &str, message: impl Into<String>) -> BtError {
        BtError::BadParam {
            node: self.node_id.to_string(),
            param: name.to_string(),
            message: message.into(),
        }
    }
}

/// Side effects an action wants applied at the end of the tick.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Effects {
    pub(crate) request: Option<(Channel, Vec<f64>)>,
    pub(crate) writes: Vec<(String, Option<Value>)>,
}

impl Effects {
    /// At most one request per action per tick; a second call replaces the first.
    pub fn emit(&mut self, channel: Channel, setpoint: Vec<f64>) {
        self.request = Some((channel, setpoint));
    }

    /// Buffer a write. Leaves may only write the `internal/` namespace.
    pub fn write(&mut self, key: &str, value: Value) -> Result<(), BtError> {
        if !key.starts_with("internal/") || key.len() <= "internal/".len() {
            return Err(BtError::ForbiddenWrite(key.to_string()));
        }
        self.writes.push((key.to_string(), Some(value)));
        Ok(())
    }

    pub fn clear(&mut self, key: &str) -> Result<(), BtError> {
        if !key.starts_with("internal/") {
            return Err(BtError::ForbiddenWrite(key.to_string()));
        }
        self.writes.push((key.to_string(), None));
        Ok(())
    }

    pub fn request(&self) -> Option<&(Channel, Vec<f64>)> {
        self.request.as_ref()
    }
}

pub trait ConditionLeaf: Send + Sync {
    fn evaluate(&self, ctx: &LeafContext<'_>) -> Result<bool, BtError>;
}

pub trait ActionLeaf: Send + Sync {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError>;

    /// Called once when a Running action stops being ticked.
    fn halt(&self, _ctx: &LeafContext<'_>, _out: &mut Effects) {}

    /// Channel the engine zeroes when this action is halted.
    fn channel(&self) -> Option<Channel> {
        None
    }
}

impl<F> ConditionLeaf for F
where
    F: Fn(&LeafContext<'_>) -> Result<bool, BtError> + Send + Sync,
{
    fn evaluate(&self, ctx: &LeafContext<'_>) -> Result<bool, BtError> {
        self(ctx)
    }
}

/// Registry of leaves a robot's trees may reference.
#[derive(Clone, Default)]
pub struct LeafLibrary {
    conditions: BTreeMap<String, Arc<dyn ConditionLeaf>>,
    actions: BTreeMap<String, Arc<dyn ActionLeaf>>,
}

impl fmt::Debug for LeafLibrary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LeafLibrary")
            .field("conditions", &self.conditions.keys().collect::<Vec<_>>())
            .field("actions", &self.actions.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl LeafLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register_condition(
        &mut self,
        id: impl Into<String>,
        leaf: impl ConditionLeaf + 'static,
    ) -> &mut Self {
        self.conditions.insert(id.into(), Arc::new(leaf));
        self
    }

    pub fn register_action(
        &mut self,
        id: impl Into<String>,
        leaf: impl ActionLeaf + 'static,
    ) -> &mut Self {
        self.actions.insert(id.into(), Arc::new(leaf));
        self
    }

    pub fn unregister(&mut self, id: &str) {
        self.conditions.remove(id);
        self.actions.remove(id);
    }

    pub fn has_condition(&self, id: &str) -> bool {
        self.conditions.contains_key(id)
    }

    pub fn has_action(&self, id: &str) -> bool {
        self.actions.contains_key(id)
    }

    pub fn condition(&self, id: &str) -> Result<&Arc<dyn ConditionLeaf>, BtError> {
        self.conditions
            .get(id)
            .ok_or_else(|| BtError::UnresolvedLeaf(id.to_string()))
    }

    pub fn action(&self, id: &str) -> Result<&Arc<dyn ActionLeaf>, BtError> {
        self.actions
            .get(id)
            .ok_or_else(|| BtError::UnresolvedLeaf(id.to_string()))
    }
}
