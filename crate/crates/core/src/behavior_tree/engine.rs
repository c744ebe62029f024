use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{ActionSpec, BtError, NodeDef, NodeKind, TreeDef};
use crate::protocol::{InteractionEvent, PatientResponse};
use crate::sim_kernel::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Success,
    Failure,
    Running,
}

/// Per-session execution state.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blackboard {
    /// Running-child index per interior node name.
    bookmarks: BTreeMap<String, usize>,
    pub last_response: Option<PatientResponse>,
    /// Consecutive unanswered attempts per Action leaf.
    pub retries: BTreeMap<String, u32>,
    pub values: BTreeMap<String, String>,
}

impl Blackboard {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bookmark(&self, node: &str) -> Option<usize> {
        self.bookmarks.get(node).copied()
    }

    pub fn bookmarks(&self) -> &BTreeMap<String, usize> {
        &self.bookmarks
    }

    fn check_against(&self, tree: &TreeDef) -> Result<(), BtError> {
        for (name, idx) in &self.bookmarks {
            match tree.find(name) {
                Some(node) if !node.kind.is_leaf() && *idx < node.children.len() => {}
                _ => {
                    return Err(BtError::MalformedTree(format!(
                        "bookmark {name}→{idx} does not index a child"
                    )))
                }
            }
        }
        Ok(())
    }
}

/// Result of asking the responder to perform an Action leaf.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionResult {
    /// The robot acted and the patient reacted; emits one interaction event.
    Performed {
        status: Status,
        response: PatientResponse,
    },
    /// Not performed this tick; the leaf reports Running and emits nothing.
    Deferred,
}

/// Supplies leaf outcomes: the patient's side of the interaction.
pub trait Responder {
    fn action(&mut self, node: &NodeDef, spec: &ActionSpec, bb: &mut Blackboard) -> ActionResult;
    fn condition(&mut self, node: &NodeDef, spec: &ActionSpec, bb: &Blackboard) -> Status;
}

#[derive(Debug, Clone)]
pub struct TickContext {
    pub session_id: String,
    pub t: SimTime,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickOutcome {
    pub status: Status,
    pub events: Vec<InteractionEvent>,
    /// Names of every node visited, in visit order.
    pub visited: Vec<String>,
}

/// One tick from the root.
pub fn tick<R: Responder + ?Sized>(
    tree: &TreeDef,
    bb: &mut Blackboard,
    responder: &mut R,
    ctx: &TickContext,
) -> Result<TickOutcome, BtError> {
    tree.check()
        .map_err(|e| BtError::MalformedTree(e.to_string()))?;
    bb.check_against(tree)?;
    let mut run = Run {
        responder,
        ctx,
        events: Vec::new(),
        visited: Vec::new(),
    };
    let status = run.node(&tree.root, bb);
    Ok(TickOutcome {
        status,
        events: run.events,
        visited: run.visited,
    })
}

struct Run<'a, R: ?Sized> {
    responder: &'a mut R,
    ctx: &'a TickContext,
    events: Vec<InteractionEvent>,
    visited: Vec<String>,
}

impl<R: Responder + ?Sized> Run<'_, R> {
    fn node(&mut self, node: &NodeDef, bb: &mut Blackboard) -> Status {
        self.visited.push(node.name.clone());
        match node.kind {
            NodeKind::Sequence => self.composite(node, bb, Status::Success),
            NodeKind::Selector => self.composite(node, bb, Status::Failure),
            NodeKind::Condition => {
                let spec = node.action_spec.as_ref().expect("checked leaf");
                self.responder.condition(node, spec, bb)
            }
            NodeKind::Action => {
                let spec = node.action_spec.as_ref().expect("checked leaf");
                match self.responder.action(node, spec, bb) {
                    ActionResult::Deferred => Status::Running,
                    ActionResult::Performed { status, response } => {
                        bb.last_response = Some(response);
                        self.events.push(InteractionEvent {
                            t: self.ctx.t,
                            session_id: self.ctx.session_id.clone(),
                            action: node.name.clone(),
                            patient_response: response,
                            modality: spec.modality,
                        });
                        status
                    }
                }
            }
        }
    }

    /// `keep_going` is the child status that moves on to the next sibling:
    /// Success for a Sequence, Failure for a Selector.
    fn composite(&mut self, node: &NodeDef, bb: &mut Blackboard, keep_going: Status) -> Status {
        let start = bb.bookmark(&node.name).unwrap_or(0);
        for (i, child) in node.children.iter().enumerate().skip(start) {
            match self.node(child, bb) {
                Status::Running => {
                    bb.bookmarks.insert(node.name.clone(), i);
                    return Status::Running;
                }
                s if s == keep_going => continue,
                other => {
                    bb.bookmarks.remove(&node.name);
                    return other;
                }
            }
        }
        bb.bookmarks.remove(&node.name);
        keep_going
    }
}
