//! Behavior-tree engine and the therapy tree catalog.
//!
//! Trees are Sequence/Selector interiors over Action/Condition leaves. Ticks
//! have memory: an interior node that returned Running resumes at its
//! bookmarked child, so completed dialogue steps are never replayed.

mod catalog;
mod def;
mod engine;

use thiserror::Error;

pub use catalog::{builtin_trees, TreeCatalog};
pub use def::{load_tree, ActionSpec, NodeDef, NodeKind, Roles, TreeDef};
pub use engine::{tick, ActionResult, Blackboard, Responder, Status, TickContext, TickOutcome};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BtError {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant {rule} violated at node {node:?}")]
    Invariant { rule: String, node: String },
    #[error("malformed tree: {0}")]
    MalformedTree(String),
    #[error("unknown tree {0}")]
    UnknownTree(String),
    #[error("cannot read trees: {0}")]
    Io(String),
}

impl BtError {
    fn invariant(rule: &str, node: &str) -> Self {
        BtError::Invariant {
            rule: rule.to_string(),
            node: node.to_string(),
        }
    }
}
