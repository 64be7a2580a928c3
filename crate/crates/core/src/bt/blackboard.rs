//! Per-robot key/value store read by leaves and written by the engine.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::BtError;
use crate::types::{AgentId, Pose, Value};

pub const NAMESPACES: [&str; 4] = ["percept", "command", "safety", "internal"];

/// Validate `<namespace>/<name>`.
pub fn check_key(key: &str) -> Result<(), BtError> {
    match key.split_once('/') {
        Some((ns, name)) if NAMESPACES.contains(&ns) && !name.is_empty() => Ok(()),
        _ => Err(BtError::BadKey(key.to_string())),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blackboard {
    robot_id: AgentId,
    entries: BTreeMap<String, Value>,
    tick_counter: u64,
}

impl Blackboard {
    pub fn new(robot_id: AgentId) -> Self {
        Blackboard {
            robot_id,
            entries: BTreeMap::new(),
            tick_counter: 0,
        }
    }

    pub fn robot_id(&self) -> &AgentId {
        &self.robot_id
    }

    pub fn tick_counter(&self) -> u64 {
        self.tick_counter
    }

    pub(crate) fn advance_tick(&mut self) {
        self.tick_counter += 1;
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.entries.get(key)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn set(&mut self, key: &str, value: Value) -> Result<(), BtError> {
        check_key(key)?;
        self.entries.insert(key.to_string(), value);
        Ok(())
    }

    pub fn remove(&mut self, key: &str) -> Option<Value> {
        self.entries.remove(key)
    }

    pub fn remove_prefix(&mut self, prefix: &str) {
        self.entries.retain(|k, _| !k.starts_with(prefix));
    }

    pub fn keys_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = &'a String> + 'a {
        self.entries
            .range(prefix.to_string()..)
            .map(|(k, _)| k)
            .take_while(move |k| k.starts_with(prefix))
    }

    pub fn entries(&self) -> &BTreeMap<String, Value> {
        &self.entries
    }

    fn mismatch(key: &str, expected: &'static str, got: &Value) -> BtError {
        BtError::BlackboardTypeMismatch {
            key: key.to_string(),
            expected,
            found: got.type_name(),
        }
    }

    pub fn scalar(&self, key: &str) -> Result<Option<f64>, BtError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Scalar(v)) => Ok(Some(*v)),
            Some(other) => Err(Self::mismatch(key, "scalar", other)),
        }
    }

    pub fn pose(&self, key: &str) -> Result<Option<Pose>, BtError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Pose(p)) => Ok(Some(*p)),
            Some(other) => Err(Self::mismatch(key, "pose", other)),
        }
    }

    pub fn id(&self, key: &str) -> Result<Option<&str>, BtError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::Id(s)) => Ok(Some(s)),
            Some(other) => Err(Self::mismatch(key, "identifier", other)),
        }
    }

    pub fn id_list(&self, key: &str) -> Result<Option<&[String]>, BtError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Value::IdList(v)) => Ok(Some(v)),
            Some(other) => Err(Self::mismatch(key, "identifier-list", other)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keys_need_known_namespace() {
        let mut bb = Blackboard::new(AgentId::new("r"));
        assert!(bb.set("percept/pose", Value::Pose(Pose::default())).is_ok());
        assert!(matches!(
            bb.set("pose", Value::Scalar(1.0)),
            Err(BtError::BadKey(_))
        ));
        assert!(matches!(
            bb.set("other/x", Value::Scalar(1.0)),
            Err(BtError::BadKey(_))
        ));
        assert!(matches!(
            bb.set("internal/", Value::Scalar(1.0)),
            Err(BtError::BadKey(_))
        ));
    }

    #[test]
    fn typed_reads_report_mismatch() {
        let mut bb = Blackboard::new(AgentId::new("r"));
        bb.set("command/target", Value::Id("kitchen".into()))
            .unwrap();
        assert_eq!(
            bb.pose("command/target"),
            Err(BtError::BlackboardTypeMismatch {
                key: "command/target".into(),
                expected: "pose",
                found: "identifier"
            })
        );
        assert_eq!(bb.pose("command/missing"), Ok(None));
    }

    #[test]
    fn prefix_scan() {
        let mut bb = Blackboard::new(AgentId::new("r"));
        bb.set("command/a", Value::Scalar(1.0)).unwrap();
        bb.set("command/b", Value::Scalar(2.0)).unwrap();
        bb.set("internal/c", Value::Scalar(3.0)).unwrap();
        assert_eq!(bb.keys_with_prefix("command/").count(), 2);
        bb.remove_prefix("command/");
        assert_eq!(bb.entries().len(), 1);
    }
}
