use std::collections::BTreeMap;
use std::path::Path;

use super::{load_tree, BtError, TreeDef};
use crate::protocol::TherapyStage;

const BUILTIN_SOURCES: [(&str, &str); 7] = [
    ("entry_playball", include_str!("../../trees/entry_playball.json")),
    ("entry_chasing", include_str!("../../trees/entry_chasing.json")),
    ("entry_spinning", include_str!("../../trees/entry_spinning.json")),
    ("basic_aladdin", include_str!("../../trees/basic_aladdin.json")),
    ("middle_knockknock", include_str!("../../trees/middle_knockknock.json")),
    ("advanced_sarcasm_1", include_str!("../../trees/advanced_sarcasm_1.json")),
    ("advanced_sarcasm_2", include_str!("../../trees/advanced_sarcasm_2.json")),
];

/// Trees by id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TreeCatalog {
    trees: BTreeMap<String, TreeDef>,
}

/// The seven shipped therapy trees.
pub fn builtin_trees() -> TreeCatalog {
    TreeCatalog::builtin()
}

impl TreeCatalog {
    pub fn builtin() -> Self {
        let mut catalog = TreeCatalog::default();
        for (id, text) in BUILTIN_SOURCES {
            let tree = load_tree(text).unwrap_or_else(|e| panic!("built-in tree {id}: {e}"));
            debug_assert_eq!(tree.tree_id, id);
            catalog.insert(tree);
        }
        catalog
    }

    /// Start from the built-ins and replace or add every `*.json` tree in `dir`.
    pub fn builtin_with_dir(dir: &Path) -> Result<Self, BtError> {
        let mut catalog = Self::builtin();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| BtError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let text = std::fs::read_to_string(&path)
                .map_err(|e| BtError::Io(format!("{}: {e}", path.display())))?;
            catalog.insert(load_tree(&text)?);
        }
        Ok(catalog)
    }

    pub fn insert(&mut self, tree: TreeDef) {
        self.trees.insert(tree.tree_id.clone(), tree);
    }

    pub fn get(&self, tree_id: &str) -> Result<&TreeDef, BtError> {
        self.trees
            .get(tree_id)
            .ok_or_else(|| BtError::UnknownTree(tree_id.to_string()))
    }

    pub fn len(&self) -> usize {
        self.trees.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trees.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TreeDef> {
        self.trees.values()
    }

    pub fn stage_trees(&self, stage: TherapyStage) -> Vec<&TreeDef> {
        self.trees.values().filter(|t| t.stage == stage).collect()
    }

    /// Tree ids per stage, as consumed by `protocol::ValidationContext`.
    pub fn stage_map(&self) -> BTreeMap<TherapyStage, Vec<String>> {
        TherapyStage::ALL
            .into_iter()
            .map(|s| (s, self.stage_trees(s).iter().map(|t| t.tree_id.clone()).collect()))
            .collect()
    }
}
