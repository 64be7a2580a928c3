//! A deliberately naive recursive interpreter used as the oracle for the
//! engine, plus scripted stub leaves.
//!
//! Stub leaves carry a `script` parameter such as `S|R|F`: on tick `t` they
//! return the `t`-th entry (the last one once the script runs out).

#![allow(dead_code)]

use std::collections::{HashMap, HashSet};

use harmonic_core::bt::{
    ActionLeaf, BtError, BtNode, BtStatus, Channel, DecoratorKind, Effects, LeafContext,
    LeafLibrary, NodeKind,
};
use harmonic_core::types::{Params, Value};

pub const STUB_ACTION: &str = "stub_action";
pub const STUB_CONDITION: &str = "stub_condition";

fn letter(s: BtStatus) -> &'static str {
    match s {
        BtStatus::Success => "S",
        BtStatus::Failure => "F",
        BtStatus::Running => "R",
    }
}

fn parse(l: &str) -> BtStatus {
    match l {
        "S" => BtStatus::Success,
        "F" => BtStatus::Failure,
        "R" => BtStatus::Running,
        other => panic!("bad script letter {other}"),
    }
}

fn script_of(params: &Params) -> Vec<BtStatus> {
    match params.get("script") {
        Some(Value::IdList(v)) => v.iter().map(|s| parse(s)).collect(),
        Some(Value::Id(s)) => vec![parse(s)],
        other => panic!("stub without script: {other:?}"),
    }
}

fn at(script: &[BtStatus], t: u64) -> BtStatus {
    script[(t as usize).min(script.len() - 1)]
}

pub fn script_params(script: &[BtStatus]) -> Params {
    let letters: Vec<String> = script.iter().map(|s| letter(*s).to_string()).collect();
    // A one-element list would parse back as a plain id; both forms are accepted.
    [("script".to_string(), Value::IdList(letters))].into()
}

struct StubAction;

impl ActionLeaf for StubAction {
    fn tick(&self, ctx: &LeafContext<'_>, out: &mut Effects) -> Result<BtStatus, BtError> {
        out.emit(Channel::Signal, vec![1.0]);
        Ok(at(&script_of(ctx.params), ctx.blackboard.tick_counter()))
    }
    fn channel(&self) -> Option<Channel> {
        Some(Channel::Signal)
    }
}

pub fn stub_library() -> LeafLibrary {
    let mut lib = LeafLibrary::new();
    lib.register_action(STUB_ACTION, StubAction);
    lib.register_condition(STUB_CONDITION, |ctx: &LeafContext<'_>| {
        Ok(at(&script_of(ctx.params), ctx.blackboard.tick_counter()) == BtStatus::Success)
    });
    lib
}

/// Oracle state: retry counters and memory indices keyed by node id.
#[derive(Default)]
pub struct Reference {
    t: u64,
    retries: HashMap<String, u32>,
    memory: HashMap<String, usize>,
}

impl Reference {
    /// Returns the root status and the leaf ids ticked, in order.
    pub fn tick(&mut self, root: &BtNode) -> (BtStatus, Vec<String>) {
        let mut seen = HashSet::new();
        let mut leaves = Vec::new();
        let status = self.eval(root, &mut seen, &mut leaves);
        self.retries.retain(|k, _| seen.contains(k));
        self.memory.retain(|k, _| seen.contains(k));
        self.t += 1;
        (status, leaves)
    }

    fn eval(
        &mut self,
        n: &BtNode,
        seen: &mut HashSet<String>,
        leaves: &mut Vec<String>,
    ) -> BtStatus {
        seen.insert(n.node_id.clone());
        match &n.kind {
            NodeKind::Condition { params, .. } | NodeKind::Action { params, .. } => {
                leaves.push(n.node_id.clone());
                let s = at(&script_of(params), self.t);
                if matches!(n.kind, NodeKind::Condition { .. }) && s == BtStatus::Running {
                    BtStatus::Failure
                } else {
                    s
                }
            }
            NodeKind::Sequence { children } => {
                for c in children {
                    match self.eval(c, seen, leaves) {
                        BtStatus::Success => {}
                        other => return other,
                    }
                }
                BtStatus::Success
            }
            NodeKind::Selector { children } => {
                for c in children {
                    match self.eval(c, seen, leaves) {
                        BtStatus::Failure => {}
                        other => return other,
                    }
                }
                BtStatus::Failure
            }
            NodeKind::Parallel {
                children,
                success_threshold,
            } => {
                let results: Vec<BtStatus> = children
                    .iter()
                    .map(|c| self.eval(c, seen, leaves))
                    .collect();
                let ok = results.iter().filter(|s| **s == BtStatus::Success).count();
                let bad = results.iter().filter(|s| **s == BtStatus::Failure).count();
                // Success impossible once fewer than `threshold` children can still succeed.
                if ok >= *success_threshold {
                    BtStatus::Success
                } else if children.len() - bad < *success_threshold {
                    BtStatus::Failure
                } else {
                    BtStatus::Running
                }
            }
            NodeKind::Decorator {
                decorator: DecoratorKind::Inverter,
                child,
            } => match self.eval(child, seen, leaves) {
                BtStatus::Success => BtStatus::Failure,
                BtStatus::Failure => BtStatus::Success,
                BtStatus::Running => BtStatus::Running,
            },
            NodeKind::Decorator {
                decorator: DecoratorKind::RetryN { n: limit },
                child,
            } => match self.eval(child, seen, leaves) {
                BtStatus::Success => {
                    self.retries.remove(&n.node_id);
                    BtStatus::Success
                }
                BtStatus::Running => BtStatus::Running,
                BtStatus::Failure => {
                    let count = self.retries.get(&n.node_id).copied().unwrap_or(0) + 1;
                    if count >= *limit {
                        self.retries.remove(&n.node_id);
                        BtStatus::Failure
                    } else {
                        self.retries.insert(n.node_id.clone(), count);
                        BtStatus::Running
                    }
                }
            },
            NodeKind::Decorator {
                decorator: DecoratorKind::MemorySequenceMarker,
                child,
            } => {
                let NodeKind::Sequence { children } = &child.kind else {
                    panic!("memory marker needs a sequence")
                };
                seen.insert(child.node_id.clone());
                let from = self.memory.get(&n.node_id).copied().unwrap_or(0);
                for (i, c) in children.iter().enumerate().skip(from) {
                    match self.eval(c, seen, leaves) {
                        BtStatus::Success => {}
                        BtStatus::Running => {
                            self.memory.insert(n.node_id.clone(), i);
                            return BtStatus::Running;
                        }
                        BtStatus::Failure => {
                            self.memory.remove(&n.node_id);
                            return BtStatus::Failure;
                        }
                    }
                }
                self.memory.remove(&n.node_id);
                BtStatus::Success
            }
        }
    }
}

pub const ALL_STATUSES: [BtStatus; 3] = [BtStatus::Success, BtStatus::Failure, BtStatus::Running];

/// Every status tuple of length `k`.
pub fn tuples(k: usize) -> Vec<Vec<BtStatus>> {
    let mut out = vec![vec![]];
    for _ in 0..k {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                ALL_STATUSES.iter().map(move |s| {
                    let mut p = prefix.clone();
                    p.push(*s);
                    p
                })
            })
            .collect();
    }
    out
}

/// Run the engine for `ticks` ticks, reporting root status and ticked leaves.
pub fn run_engine(root: &BtNode, ticks: usize) -> Vec<(BtStatus, Vec<String>)> {
    use harmonic_core::bt::{tick, Blackboard, BtTree};
    use harmonic_core::types::AgentId;

    let lib = stub_library();
    let mut leaf_ids = HashSet::new();
    root.walk(&mut |n| {
        if matches!(n.kind, NodeKind::Action { .. } | NodeKind::Condition { .. }) {
            leaf_ids.insert(n.node_id.clone());
        }
    });
    let tree = BtTree::build(root.clone(), &lib).expect("valid tree");
    let mut bb = Blackboard::new(AgentId::new("r"));
    (0..ticks)
        .map(|_| {
            let r = tick(&tree, &lib, &mut bb, &[]).expect("tick");
            // Post-order visits list each leaf right when it is ticked.
            let leaves = r
                .visits
                .iter()
                .filter(|v| leaf_ids.contains(&v.node_id))
                .map(|v| v.node_id.clone())
                .collect();
            (r.status, leaves)
        })
        .collect()
}

pub fn run_reference(root: &BtNode, ticks: usize) -> Vec<(BtStatus, Vec<String>)> {
    let mut r = Reference::default();
    (0..ticks).map(|_| r.tick(root)).collect()
}

fn leaf(i: usize, script: &[BtStatus], as_condition: bool) -> BtNode {
    let id = format!("c{i}");
    if as_condition {
        BtNode::condition(id, STUB_CONDITION, script_params(script))
    } else {
        BtNode::action(id, STUB_ACTION, script_params(script))
    }
}

fn composites(children: Vec<BtNode>) -> Vec<BtNode> {
    let k = children.len();
    let mut out = vec![
        BtNode::sequence("root", children.clone()),
        BtNode::selector("root", children.clone()),
    ];
    for threshold in 1..=k {
        out.push(BtNode::parallel("root", threshold, children.clone()));
    }
    out.push(BtNode::decorator(
        "root",
        DecoratorKind::MemorySequenceMarker,
        BtNode::sequence("mem_seq", children),
    ));
    out
}

/// Every tree shape in the exhaustive table, with the number of ticks to run.
pub fn exhaustive_cases() -> Vec<(BtNode, usize)> {
    let mut cases = Vec::new();
    // Single tick: every status combination of up to three children.
    for k in 1..=3 {
        for statuses in tuples(k) {
            let children: Vec<BtNode> = statuses
                .iter()
                .enumerate()
                .map(|(i, s)| leaf(i, &[*s], false))
                .collect();
            cases.extend(composites(children).into_iter().map(|t| (t, 1)));
        }
        // Conditions only ever answer Success or Failure.
        for statuses in tuples(k)
            .into_iter()
            .filter(|t| !t.contains(&BtStatus::Running))
        {
            let children: Vec<BtNode> = statuses
                .iter()
                .enumerate()
                .map(|(i, s)| leaf(i, &[*s], true))
                .collect();
            cases.extend(composites(children).into_iter().map(|t| (t, 1)));
        }
    }
    // Two ticks with every two-step script, so memory and reactivity show up.
    for k in 1..=3 {
        let scripts = tuples(2);
        let mut idx = vec![0usize; k];
        loop {
            let children: Vec<BtNode> = idx
                .iter()
                .enumerate()
                .map(|(i, j)| leaf(i, &scripts[*j], false))
                .collect();
            cases.extend(composites(children).into_iter().map(|t| (t, 2)));
            let mut pos = 0;
            while pos < k {
                idx[pos] += 1;
                if idx[pos] < scripts.len() {
                    break;
                }
                idx[pos] = 0;
                pos += 1;
            }
            if pos == k {
                break;
            }
        }
    }
    // Decorators over one scripted child, four ticks.
    for script in tuples(3) {
        let child = leaf(0, &script, false);
        cases.push((
            BtNode::decorator("root", DecoratorKind::Inverter, child.clone()),
            4,
        ));
        for n in 1..=3 {
            cases.push((
                BtNode::decorator("root", DecoratorKind::RetryN { n }, child.clone()),
                4,
            ));
        }
        // Retry under a sequence whose sibling sometimes preempts it.
        for gate in tuples(2) {
            let seq = BtNode::sequence(
                "root",
                vec![
                    leaf(1, &gate, true),
                    BtNode::decorator("retry", DecoratorKind::RetryN { n: 3 }, child.clone()),
                ],
            );
            cases.push((seq, 4));
        }
    }
    cases
}

/// Compare engine and oracle on every case; returns (cases, mismatch descriptions).
pub fn run_exhaustive() -> (usize, Vec<String>) {
    let cases = exhaustive_cases();
    let mut mismatches = Vec::new();
    for (tree, ticks) in &cases {
        let got = run_engine(tree, *ticks);
        let want = run_reference(tree, *ticks);
        if got != want {
            mismatches.push(format!("{tree:?}: engine {got:?} reference {want:?}"));
        }
    }
    (cases.len(), mismatches)
}
