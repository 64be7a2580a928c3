//! Tree description files.
//!
//! One node per line, indentation gives depth, `#` starts a comment:
//!
//! ```text
//! selector search_or_move
//!   sequence do_search
//!     condition is_search command/verb_is verb=SEARCH-AREA
//!     action sweep search_area speed=0.5
//!   retry try_move n=3
//!     action go navigate tolerance=0.2
//! ```
//!
//! The file is a forest: top-level lines become siblings. Grammar in
//! `docs/formats.md`.

use thiserror::Error;

use super::node::{BtNode, DecoratorKind};
use crate::types::{Params, Value};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct TreeParseError {
    pub line: usize,
    pub message: String,
}

fn err(line: usize, message: impl Into<String>) -> TreeParseError {
    TreeParseError {
        line,
        message: message.into(),
    }
}

#[derive(Debug)]
enum Draft {
    Composite {
        ctor: fn(String, Vec<BtNode>) -> BtNode,
    },
    Parallel {
        threshold: usize,
    },
    Decorator(DecoratorKind),
    Leaf(BtNode),
}

#[derive(Debug)]
struct Open {
    indent: usize,
    line: usize,
    id: String,
    draft: Draft,
    children: Vec<BtNode>,
}

impl Open {
    fn close(self) -> Result<BtNode, TreeParseError> {
        let Open {
            line,
            id,
            draft,
            mut children,
            ..
        } = self;
        match draft {
            Draft::Leaf(node) => {
                if !children.is_empty() {
                    return Err(err(line, format!("leaf `{id}` cannot have children")));
                }
                Ok(node)
            }
            Draft::Composite { ctor } => Ok(ctor(id, children)),
            Draft::Parallel { threshold } => Ok(BtNode::parallel(id, threshold, children)),
            Draft::Decorator(kind) => {
                if children.len() != 1 {
                    return Err(err(
                        line,
                        format!(
                            "decorator `{id}` needs exactly one child, found {}",
                            children.len()
                        ),
                    ));
                }
                Ok(BtNode::decorator(id, kind, children.remove(0)))
            }
        }
    }
}

fn parse_params<'a>(
    line: usize,
    words: impl Iterator<Item = &'a str>,
) -> Result<Params, TreeParseError> {
    let mut params = Params::new();
    for w in words {
        let (k, v) = w
            .split_once('=')
            .ok_or_else(|| err(line, format!("expected key=value, got `{w}`")))?;
        if k.is_empty() || v.is_empty() {
            return Err(err(line, format!("empty key or value in `{w}`")));
        }
        if params
            .insert(k.to_string(), Value::parse_literal(v))
            .is_some()
        {
            return Err(err(line, format!("parameter `{k}` given twice")));
        }
    }
    Ok(params)
}

fn take_count(line: usize, params: &mut Params, key: &str) -> Result<u64, TreeParseError> {
    match params.remove(key) {
        Some(Value::Scalar(v)) if v >= 0.0 && v.fract() == 0.0 => Ok(v as u64),
        Some(other) => Err(err(
            line,
            format!("`{key}` must be a non-negative integer, got {other}"),
        )),
        None => Err(err(line, format!("missing `{key}=`"))),
    }
}

fn parse_line(line: usize, body: &str) -> Result<(String, Draft), TreeParseError> {
    let mut words = body.split_whitespace();
    let kind = words.next().expect("non-empty line");
    let id = words
        .next()
        .ok_or_else(|| err(line, format!("`{kind}` needs a node id")))?
        .to_string();
    let draft = match kind {
        "sequence" | "selector" => {
            let ctor: fn(String, Vec<BtNode>) -> BtNode = if kind == "sequence" {
                |i, c| BtNode::sequence(i, c)
            } else {
                |i, c| BtNode::selector(i, c)
            };
            if let Some(extra) = words.next() {
                return Err(err(line, format!("unexpected `{extra}` after {kind}")));
            }
            Draft::Composite { ctor }
        }
        "parallel" => {
            let mut p = parse_params(line, words)?;
            let threshold = take_count(line, &mut p, "threshold")? as usize;
            if let Some(k) = p.keys().next() {
                return Err(err(line, format!("unknown parallel parameter `{k}`")));
            }
            Draft::Parallel { threshold }
        }
        "condition" | "action" => {
            let leaf = words
                .next()
                .ok_or_else(|| err(line, format!("{kind} `{id}` needs a leaf id")))?;
            let params = parse_params(line, words)?;
            let node = if kind == "condition" {
                BtNode::condition(id.clone(), leaf, params)
            } else {
                BtNode::action(id.clone(), leaf, params)
            };
            Draft::Leaf(node)
        }
        "inverter" | "memory" => {
            if let Some(extra) = words.next() {
                return Err(err(line, format!("unexpected `{extra}` after {kind}")));
            }
            Draft::Decorator(if kind == "inverter" {
                DecoratorKind::Inverter
            } else {
                DecoratorKind::MemorySequenceMarker
            })
        }
        "retry" => {
            let mut p = parse_params(line, words)?;
            let n = take_count(line, &mut p, "n")?;
            let n = u32::try_from(n).map_err(|_| err(line, "retry count too large"))?;
            Draft::Decorator(DecoratorKind::RetryN { n })
        }
        other => return Err(err(line, format!("unknown node kind `{other}`"))),
    };
    Ok((id, draft))
}

/// Parse a forest of nodes. Structural invariants other than shape (unique
/// ids, thresholds, leaf resolution) are checked later by `BtTree::build`.
pub fn parse_tree_file(text: &str) -> Result<Vec<BtNode>, TreeParseError> {
    let mut roots = Vec::new();
    let mut stack: Vec<Open> = Vec::new();

    fn attach(stack: &mut [Open], roots: &mut Vec<BtNode>, node: BtNode) {
        match stack.last_mut() {
            Some(parent) => parent.children.push(node),
            None => roots.push(node),
        }
    }

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        if content.starts_with('\t') {
            return Err(err(line, "indent with spaces, not tabs"));
        }
        let indent = content.len() - content.trim_start().len();
        while stack.last().is_some_and(|o| o.indent >= indent) {
            let done = stack.pop().unwrap().close()?;
            attach(&mut stack, &mut roots, done);
        }
        if let Some(parent) = stack.last() {
            if matches!(parent.draft, Draft::Leaf(_)) {
                return Err(err(
                    line,
                    format!("leaf `{}` cannot have children", parent.id),
                ));
            }
        } else if indent != 0 && roots.is_empty() {
            return Err(err(line, "first node must not be indented"));
        }
        let (id, draft) = parse_line(line, content.trim())?;
        stack.push(Open {
            indent,
            line,
            id,
            draft,
            children: Vec::new(),
        });
    }
    while let Some(open) = stack.pop() {
        let done = open.close()?;
        attach(&mut stack, &mut roots, done);
    }
    Ok(roots)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bt::NodeKind;

    #[test]
    fn nested_forest() {
        let src = "\
# comment
selector top
  sequence s
    condition c always_success
    action a idle speed=0.5 target=1,2
  inverter inv
    condition c2 always_failure
retry r n=3
  action b stop
";
        let forest = parse_tree_file(src).unwrap();
        assert_eq!(forest.len(), 2);
        assert_eq!(forest[0].children().len(), 2);
        let a = forest[0].find("a").unwrap();
        let NodeKind::Action { params, .. } = &a.kind else {
            panic!()
        };
        assert_eq!(params["speed"], Value::Scalar(0.5));
        assert!(matches!(params["target"], Value::Pose(_)));
        assert!(matches!(
            forest[1].kind,
            NodeKind::Decorator {
                decorator: DecoratorKind::RetryN { n: 3 },
                ..
            }
        ));
    }

    #[test]
    fn parallel_threshold() {
        let f =
            parse_tree_file("parallel p threshold=2\n  action a idle\n  action b idle\n").unwrap();
        assert!(matches!(
            f[0].kind,
            NodeKind::Parallel {
                success_threshold: 2,
                ..
            }
        ));
        assert_eq!(
            parse_tree_file("parallel p\n  action a idle\n")
                .unwrap_err()
                .line,
            1
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = parse_tree_file("selector s\n  action a idle\n    action b idle\n").unwrap_err();
        assert_eq!(e.line, 3);
        let e = parse_tree_file("selector s\n\n  blorp x\n").unwrap_err();
        assert_eq!(e.line, 3);
        assert!(e.message.contains("blorp"));
        let e = parse_tree_file("inverter i\n").unwrap_err();
        assert_eq!(e.line, 1);
        let e = parse_tree_file("action a idle speed\n").unwrap_err();
        assert!(e.message.contains("key=value"));
    }

    #[test]
    fn empty_file_is_empty_forest() {
        assert!(parse_tree_file("# nothing\n\n").unwrap().is_empty());
    }
}
