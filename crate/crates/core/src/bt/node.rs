use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::leaf::LeafLibrary;
use crate::types::Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decorator", rename_all = "snake_case")]
pub enum DecoratorKind {
    Inverter,
    RetryN { n: u32 },
    MemorySequenceMarker,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeKind {
    Sequence {
        children: Vec<BtNode>,
    },
    Selector {
        children: Vec<BtNode>,
    },
    Parallel {
        children: Vec<BtNode>,
        success_threshold: usize,
    },
    Condition {
        predicate_id: String,
        params: Params,
    },
    Action {
        action_id: String,
        params: Params,
    },
    Decorator {
        decorator: DecoratorKind,
        child: Box<BtNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BtNode {
    pub node_id: String,
    #[serde(flatten)]
    pub kind: NodeKind,
}

impl BtNode {
    pub fn sequence(id: impl Into<String>, children: Vec<BtNode>) -> Self {
        BtNode {
            node_id: id.into(),
            kind: NodeKind::Sequence { children },
        }
    }

    pub fn selector(id: impl Into<String>, children: Vec<BtNode>) -> Self {
        BtNode {
            node_id: id.into(),
            kind: NodeKind::Selector { children },
        }
    }

    pub fn parallel(
        id: impl Into<String>,
        success_threshold: usize,
        children: Vec<BtNode>,
    ) -> Self {
        BtNode {
            node_id: id.into(),
            kind: NodeKind::Parallel {
                children,
                success_threshold,
            },
        }
    }

    pub fn condition(
        id: impl Into<String>,
        predicate_id: impl Into<String>,
        params: Params,
    ) -> Self {
        BtNode {
            node_id: id.into(),
            kind: NodeKind::Condition {
                predicate_id: predicate_id.into(),
                params,
            },
        }
    }

    pub fn action(id: impl Into<String>, action_id: impl Into<String>, params: Params) -> Self {
        BtNode {
            node_id: id.into(),
            kind: NodeKind::Action {
                action_id: action_id.into(),
                params,
            },
        }
    }

    pub fn decorator(id: impl Into<String>, decorator: DecoratorKind, child: BtNode) -> Self {
        BtNode {
            node_id: id.into(),
            kind: NodeKind::Decorator {
                decorator,
                child: Box::new(child),
            },
        }
    }

    pub fn children(&self) -> &[BtNode] {
        match &self.kind {
            NodeKind::Sequence { children }
            | NodeKind::Selector { children }
            | NodeKind::Parallel { children, .. } => children,
            NodeKind::Decorator { child, .. } => std::slice::from_ref(child.as_ref()),
            NodeKind::Condition { .. } | NodeKind::Action { .. } => &[],
        }
    }

    /// Pre-order walk.
    pub fn walk(&self, f: &mut impl FnMut(&BtNode)) {
        f(self);
        for c in self.children() {
            c.walk(f);
        }
    }

    pub fn find(&self, id: &str) -> Option<&BtNode> {
        if self.node_id == id {
            return Some(self);
        }
        self.children().iter().find_map(|c| c.find(id))
    }

    /// Ids of every node in this subtree.
    pub fn subtree_ids(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.walk(&mut |n| {
            out.insert(n.node_id.clone());
        });
        out
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ValidationFailure {
    #[error("node id `{0}` is not unique")]
    DuplicateId(String),
    #[error("composite `{0}` has no children")]
    EmptyComposite(String),
    #[error("parallel `{node}` threshold {threshold} outside [1, {children}]")]
    BadThreshold {
        node: String,
        threshold: usize,
        children: usize,
    },
    #[error("leaf `{leaf}` on node `{node}` is not in the leaf library")]
    UnresolvedLeaf { node: String, leaf: String },
    #[error("memory marker `{0}` must wrap a sequence")]
    MemoryNotOnSequence(String),
    #[error("retry `{0}` needs n >= 1")]
    BadRetry(String),
    #[error("no safety conditions configured")]
    EmptySafetySpec,
    #[error("robot kind {kind} requires safety predicate `{predicate}`")]
    MissingSafety { kind: String, predicate: String },
    #[error("node id `{0}` is empty")]
    EmptyId(String),
}

/// A tree that passed build-time validation against a leaf library.
#[derive(Debug, Clone, PartialEq)]
pub struct BtTree {
    root: BtNode,
}

impl BtTree {
    pub fn build(root: BtNode, library: &LeafLibrary) -> Result<BtTree, ValidationFailure> {
        let mut seen = BTreeSet::new();
        validate(&root, library, &mut seen)?;
        Ok(BtTree { root })
    }

    pub fn root(&self) -> &BtNode {
        &self.root
    }

    pub fn into_root(self) -> BtNode {
        self.root
    }
}

fn validate(
    node: &BtNode,
    lib: &LeafLibrary,
    seen: &mut BTreeSet<String>,
) -> Result<(), ValidationFailure> {
    if node.node_id.is_empty() {
        return Err(ValidationFailure::EmptyId(format!("{:?}", node.kind)));
    }
    if !seen.insert(node.node_id.clone()) {
        return Err(ValidationFailure::DuplicateId(node.node_id.clone()));
    }
    match &node.kind {
        NodeKind::Sequence { children } | NodeKind::Selector { children } => {
            if children.is_empty() {
                return Err(ValidationFailure::EmptyComposite(node.node_id.clone()));
            }
        }
        NodeKind::Parallel {
            children,
            success_threshold,
        } => {
            if children.is_empty() {
                return Err(ValidationFailure::EmptyComposite(node.node_id.clone()));
            }
            if *success_threshold < 1 || *success_threshold > children.len() {
                return Err(ValidationFailure::BadThreshold {
                    node: node.node_id.clone(),
                    threshold: *success_threshold,
                    children: children.len(),
                });
            }
        }
        NodeKind::Condition { predicate_id, .. } => {
            if !lib.has_condition(predicate_id) {
                return Err(ValidationFailure::UnresolvedLeaf {
                    node: node.node_id.clone(),
                    leaf: predicate_id.clone(),
                });
            }
        }
        NodeKind::Action { action_id, .. } => {
            if !lib.has_action(action_id) {
                return Err(ValidationFailure::UnresolvedLeaf {
                    node: node.node_id.clone(),
                    leaf: action_id.clone(),
                });
            }
        }
        NodeKind::Decorator { decorator, child } => match decorator {
            DecoratorKind::MemorySequenceMarker
                if !matches!(child.kind, NodeKind::Sequence { .. }) =>
            {
                return Err(ValidationFailure::MemoryNotOnSequence(node.node_id.clone()));
            }
            DecoratorKind::RetryN { n: 0 } => {
                return Err(ValidationFailure::BadRetry(node.node_id.clone()))
            }
            _ => {}
        },
    }
    for c in node.children() {
        validate(c, lib, seen)?;
    }
    Ok(())
}
