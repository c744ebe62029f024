use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::BtError;
use crate::protocol::{Modality, PatientResponse, TherapyStage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeKind {
    Sequence,
    Selector,
    Action,
    Condition,
}

impl NodeKind {
    pub fn is_leaf(self) -> bool {
        matches!(self, NodeKind::Action | NodeKind::Condition)
    }
}

/// What a leaf does: the robot behavior (or perception check) and its channel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionSpec {
    pub behavior: String,
    pub modality: Modality,
    /// Human-readable script line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<String>,
    /// Responses a Condition accepts; empty means any positive response.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expect: Vec<PatientResponse>,
}

impl ActionSpec {
    pub fn accepts(&self, response: Option<PatientResponse>) -> bool {
        match response {
            None => false,
            Some(r) if self.expect.is_empty() => r.is_positive(),
            Some(r) => self.expect.contains(&r),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeDef {
    pub kind: NodeKind,
    pub name: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeDef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action_spec: Option<ActionSpec>,
}

impl NodeDef {
    pub fn sequence(name: impl Into<String>, children: Vec<NodeDef>) -> Self {
        NodeDef {
            kind: NodeKind::Sequence,
            name: name.into(),
            children,
            action_spec: None,
        }
    }

    pub fn selector(name: impl Into<String>, children: Vec<NodeDef>) -> Self {
        NodeDef {
            kind: NodeKind::Selector,
            name: name.into(),
            children,
            action_spec: None,
        }
    }

    pub fn action(name: impl Into<String>, behavior: impl Into<String>, modality: Modality) -> Self {
        NodeDef {
            kind: NodeKind::Action,
            name: name.into(),
            children: Vec::new(),
            action_spec: Some(ActionSpec {
                behavior: behavior.into(),
                modality,
                line: None,
                expect: Vec::new(),
            }),
        }
    }

    pub fn condition(name: impl Into<String>, behavior: impl Into<String>, modality: Modality) -> Self {
        NodeDef {
            kind: NodeKind::Condition,
            ..NodeDef::action(name, behavior, modality)
        }
    }

    /// Pre-order walk.
    pub fn walk<'a>(&'a self, f: &mut impl FnMut(&'a NodeDef)) {
        f(self);
        for c in &self.children {
            c.walk(f);
        }
    }

    pub fn count(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |_| n += 1);
        n
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Roles {
    pub robot: String,
    pub patient: String,
}

/// A declarative therapy program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TreeDef {
    pub tree_id: String,
    pub stage: TherapyStage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub roles: Option<Roles>,
    pub root: NodeDef,
}

impl TreeDef {
    pub fn new(tree_id: impl Into<String>, stage: TherapyStage, root: NodeDef) -> Result<Self, BtError> {
        let tree = TreeDef {
            tree_id: tree_id.into(),
            stage,
            description: None,
            roles: None,
            root,
        };
        tree.check()?;
        Ok(tree)
    }

    /// Structural invariants: leaves are childless Action/Condition nodes with
    /// an action spec, interior nodes have at least one child and no spec,
    /// names are non-empty and unique.
    pub fn check(&self) -> Result<(), BtError> {
        if self.tree_id.trim().is_empty() {
            return Err(BtError::invariant("tree-id-non-empty", ""));
        }
        let mut names = BTreeSet::new();
        let mut result = Ok(());
        self.root.walk(&mut |node| {
            if result.is_err() {
                return;
            }
            result = check_node(node, &mut names);
        });
        result
    }

    pub fn find(&self, name: &str) -> Option<&NodeDef> {
        let mut found = None;
        self.root.walk(&mut |n| {
            if found.is_none() && n.name == name {
                found = Some(n);
            }
        });
        found
    }

    pub fn leaves(&self) -> Vec<&NodeDef> {
        let mut out = Vec::new();
        self.root.walk(&mut |n| {
            if n.kind.is_leaf() {
                out.push(n);
            }
        });
        out
    }

    /// Modalities used by this tree's Action leaves.
    pub fn action_modalities(&self) -> BTreeSet<Modality> {
        self.leaves()
            .into_iter()
            .filter(|n| n.kind == NodeKind::Action)
            .filter_map(|n| n.action_spec.as_ref().map(|s| s.modality))
            .collect()
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree serializes");
        s.push('\n');
        s
    }
}

fn check_node<'a>(node: &'a NodeDef, names: &mut BTreeSet<&'a str>) -> Result<(), BtError> {
    if node.name.trim().is_empty() {
        return Err(BtError::invariant("node-name-non-empty", &node.name));
    }
    if !names.insert(node.name.as_str()) {
        return Err(BtError::invariant("node-names-unique", &node.name));
    }
    if node.kind.is_leaf() {
        if !node.children.is_empty() {
            return Err(BtError::invariant("leaf-has-no-children", &node.name));
        }
        if node.action_spec.is_none() {
            return Err(BtError::invariant("leaf-has-action-spec", &node.name));
        }
    } else {
        if node.children.is_empty() {
            return Err(BtError::invariant("interior-has-children", &node.name));
        }
        if node.action_spec.is_some() {
            return Err(BtError::invariant("interior-has-no-action-spec", &node.name));
        }
    }
    Ok(())
}

/// Parse and check a tree definition file.
pub fn load_tree(text: &str) -> Result<TreeDef, BtError> {
    let tree: TreeDef = serde_json::from_str(text).map_err(|e| BtError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    tree.check()?;
    Ok(tree)
}
