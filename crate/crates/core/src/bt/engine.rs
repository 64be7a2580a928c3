//! Tick evaluation.
//!
//! A tick reads a snapshot of the blackboard, walks the tree from the root,
//! and only then commits: halts for actions that were Running last tick but
//! were not reached (or were abandoned by a finished Parallel) are applied
//! first, then the effects of the actions that ran, in tree order. Requests
//! are merged per channel; the first action to claim a channel wins and a
//! halt only zeroes channels no action claimed.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::leaf::{Effects, LeafContext, LeafLibrary};
use super::node::{BtTree, DecoratorKind, NodeKind};
use super::{ActuatorRequest, Blackboard, BtError, BtNode, BtStatus, Channel};
use crate::sim::Detection;
use crate::types::{Params, Value};

pub(crate) const RUNNING_KEY: &str = "internal/bt/running";
const MEM_PREFIX: &str = "internal/bt/mem/";
const RETRY_PREFIX: &str = "internal/bt/retry/";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeVisit {
    pub node_id: String,
    pub status: BtStatus,
}

/// Which node produced a request.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "by", content = "node", rename_all = "snake_case")]
pub enum Origin {
    Action(String),
    /// Fail-safe zeroing of a halted action's channel.
    Halt(String),
}

impl Origin {
    pub fn node_id(&self) -> &str {
        match self {
            Origin::Action(n) | Origin::Halt(n) => n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickResult {
    pub status: BtStatus,
    /// At most one request per channel, ordered by channel.
    pub requests: Vec<(Origin, ActuatorRequest)>,
    /// Post-order record of every node evaluated this tick.
    pub visits: Vec<NodeVisit>,
    pub halted: Vec<String>,
}

impl TickResult {
    pub fn status_of(&self, node_id: &str) -> Option<BtStatus> {
        self.visits
            .iter()
            .find(|v| v.node_id == node_id)
            .map(|v| v.status)
    }

    pub fn plain_requests(&self) -> Vec<ActuatorRequest> {
        self.requests.iter().map(|(_, r)| r.clone()).collect()
    }
}

struct Pending<'t> {
    node_id: &'t str,
    effects: Effects,
    discarded: bool,
}

struct Pass<'t, 'a> {
    lib: &'a LeafLibrary,
    bb: &'a Blackboard,
    percepts: &'a [Detection],
    visits: Vec<NodeVisit>,
    visited: BTreeSet<&'t str>,
    pending: Vec<Pending<'t>>,
    running_now: Vec<&'t str>,
    abandoned: Vec<&'t str>,
    engine_writes: Vec<(String, Option<Value>)>,
}

impl<'t, 'a> Pass<'t, 'a> {
    fn ctx<'c>(&'c self, node_id: &'c str, params: &'c Params) -> LeafContext<'c> {
        LeafContext {
            node_id,
            blackboard: self.bb,
            percepts: self.percepts,
            params,
        }
    }

    fn eval(&mut self, node: &'t BtNode) -> Result<BtStatus, BtError> {
        self.visited.insert(&node.node_id);
        let status = match &node.kind {
            NodeKind::Sequence { children } => {
                let mut out = BtStatus::Success;
                for c in children {
                    let s = self.eval(c)?;
                    if s != BtStatus::Success {
                        out = s;
                        break;
                    }
                }
                out
            }
            NodeKind::Selector { children } => {
                let mut out = BtStatus::Failure;
                for c in children {
                    let s = self.eval(c)?;
                    if s != BtStatus::Failure {
                        out = s;
                        break;
                    }
                }
                out
            }
            NodeKind::Parallel {
                children,
                success_threshold,
            } => {
                let running_mark = self.running_now.len();
                let (mut ok, mut failed) = (0usize, 0usize);
                for c in children {
                    match self.eval(c)? {
                        BtStatus::Success => ok += 1,
                        BtStatus::Failure => failed += 1,
                        BtStatus::Running => {}
                    }
                }
                let out = if ok >= *success_threshold {
                    BtStatus::Success
                } else if failed > children.len() - success_threshold {
                    BtStatus::Failure
                } else {
                    BtStatus::Running
                };
                if out != BtStatus::Running {
                    let dropped: Vec<&'t str> = self.running_now.drain(running_mark..).collect();
                    for p in self
                        .pending
                        .iter_mut()
                        .filter(|p| dropped.contains(&p.node_id))
                    {
                        p.discarded = true;
                    }
                    self.abandoned.extend(dropped);
                }
                out
            }
            NodeKind::Condition {
                predicate_id,
                params,
            } => {
                let leaf = self.lib.condition(predicate_id)?;
                if leaf.evaluate(&self.ctx(&node.node_id, params))? {
                    BtStatus::Success
                } else {
                    BtStatus::Failure
                }
            }
            NodeKind::Action { action_id, params } => {
                let leaf = self.lib.action(action_id)?;
                let mut effects = Effects::default();
                let s = leaf.tick(&self.ctx(&node.node_id, params), &mut effects)?;
                self.pending.push(Pending {
                    node_id: &node.node_id,
                    effects,
                    discarded: false,
                });
                if s == BtStatus::Running {
                    self.running_now.push(&node.node_id);
                }
                s
            }
            NodeKind::Decorator { decorator, child } => match decorator {
                DecoratorKind::Inverter => match self.eval(child)? {
                    BtStatus::Success => BtStatus::Failure,
                    BtStatus::Failure => BtStatus::Success,
                    BtStatus::Running => BtStatus::Running,
                },
                DecoratorKind::RetryN { n } => {
                    let key = format!("{RETRY_PREFIX}{}", node.node_id);
                    let failures = self.bb.scalar(&key)?.unwrap_or(0.0) as u32;
                    match self.eval(child)? {
                        BtStatus::Success => {
                            self.engine_writes.push((key, None));
                            BtStatus::Success
                        }
                        BtStatus::Running => BtStatus::Running,
                        BtStatus::Failure => {
                            let attempts = failures + 1;
                            if attempts < *n {
                                self.engine_writes
                                    .push((key, Some(Value::Scalar(attempts as f64))));
                                BtStatus::Running
                            } else {
                                self.engine_writes.push((key, None));
                                BtStatus::Failure
                            }
                        }
                    }
                }
                DecoratorKind::MemorySequenceMarker => {
                    let NodeKind::Sequence { children } = &child.kind else {
                        unreachable!("validated: memory marker wraps a sequence")
                    };
                    self.visited.insert(&child.node_id);
                    let key = format!("{MEM_PREFIX}{}", node.node_id);
                    let start = self.bb.scalar(&key)?.unwrap_or(0.0) as usize;
                    let mut out = BtStatus::Success;
                    for (i, c) in children.iter().enumerate().skip(start) {
                        match self.eval(c)? {
                            BtStatus::Success => continue,
                            BtStatus::Running => {
                                self.engine_writes
                                    .push((key.clone(), Some(Value::Scalar(i as f64))));
                                out = BtStatus::Running;
                                break;
                            }
                            BtStatus::Failure => {
                                out = BtStatus::Failure;
                                break;
                            }
                        }
                    }
                    if out != BtStatus::Running {
                        self.engine_writes.push((key, None));
                    }
                    self.visits.push(NodeVisit {
                        node_id: child.node_id.clone(),
                        status: out,
                    });
                    out
                }
            },
        };
        self.visits.push(NodeVisit {
            node_id: node.node_id.clone(),
            status,
        });
        Ok(status)
    }
}

/// Evaluate one tick of `tree` for the robot owning `blackboard`.
pub fn tick(
    tree: &BtTree,
    library: &LeafLibrary,
    blackboard: &mut Blackboard,
    percepts: &[Detection],
) -> Result<TickResult, BtError> {
    let root = tree.root();
    let snapshot = &*blackboard;
    let mut pass = Pass {
        lib: library,
        bb: snapshot,
        percepts,
        visits: Vec::new(),
        visited: BTreeSet::new(),
        pending: Vec::new(),
        running_now: Vec::new(),
        abandoned: Vec::new(),
        engine_writes: Vec::new(),
    };
    let status = pass.eval(root)?;

    let prev_running: Vec<String> = snapshot
        .id_list(RUNNING_KEY)?
        .map(<[String]>::to_vec)
        .unwrap_or_default();
    let mut to_halt: Vec<String> = prev_running
        .into_iter()
        .filter(|id| !pass.visited.contains(id.as_str()))
        .collect();
    to_halt.extend(pass.abandoned.iter().map(|s| s.to_string()));

    let mut halt_effects = Vec::new();
    let mut halted = Vec::new();
    for id in to_halt {
        let Some(node) = root.find(&id) else { continue };
        let NodeKind::Action { action_id, params } = &node.kind else {
            continue;
        };
        let leaf = library.action(action_id)?;
        let mut fx = Effects::default();
        leaf.halt(&pass.ctx(&node.node_id, params), &mut fx);
        halt_effects.push((id.clone(), leaf.channel(), fx));
        halted.push(id);
    }

    let stale: Vec<String> = snapshot
        .keys_with_prefix(MEM_PREFIX)
        .chain(snapshot.keys_with_prefix(RETRY_PREFIX))
        .filter(|k| {
            let id = k
                .trim_start_matches(MEM_PREFIX)
                .trim_start_matches(RETRY_PREFIX);
            !pass.visited.contains(id)
        })
        .cloned()
        .collect();

    let robot = snapshot.robot_id().clone();
    let mut by_channel: BTreeMap<Channel, (Origin, Vec<f64>)> = BTreeMap::new();
    let mut writes: Vec<(String, Option<Value>)> = Vec::new();
    for (id, channel, fx) in halt_effects {
        writes.extend(fx.writes);
        if let Some(ch) = channel {
            if matches!(ch, Channel::Drive | Channel::Vertical | Channel::Signal) {
                by_channel.insert(ch, (Origin::Halt(id.clone()), vec![0.0]));
            }
        }
    }
    writes.extend(stale.into_iter().map(|k| (k, None)));
    writes.extend(pass.engine_writes);
    for p in pass.pending.into_iter().filter(|p| !p.discarded) {
        writes.extend(p.effects.writes);
        if let Some((ch, sp)) = p.effects.request {
            match by_channel.get(&ch) {
                Some((Origin::Action(_), _)) => {
                    log::debug!(
                        "channel {ch:?} already claimed this tick; dropping request from `{}`",
                        p.node_id
                    );
                }
                _ => {
                    by_channel.insert(ch, (Origin::Action(p.node_id.to_string()), sp));
                }
            }
        }
    }
    let running: Vec<String> = pass.running_now.iter().map(|s| s.to_string()).collect();
    let visits = pass.visits;

    for (k, v) in writes {
        match v {
            Some(v) => blackboard.set(&k, v)?,
            None => {
                blackboard.remove(&k);
            }
        }
    }
    if running.is_empty() {
        blackboard.remove(RUNNING_KEY);
    } else {
        blackboard.set(RUNNING_KEY, Value::IdList(running))?;
    }
    blackboard.advance_tick();

    let requests = by_channel
        .into_iter()
        .map(|(ch, (origin, sp))| (origin, ActuatorRequest::new(robot.clone(), ch, sp)))
        .collect();
    Ok(TickResult {
        status,
        requests,
        visits,
        halted,
    })
}
