use crate::growth::{tree_metrics, CoralTree, TreeMetrics};
use crate::io::config::RunConfig;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// How the level clock advances; echoed in every tree document.
pub const SYNC_RULE: &str = "next level starts at the latest crossing time of the current level; \
crossed branches are frozen until then; halted branches continue as untracked compartments";

/// Serialized result of a growth run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeDocument {
    pub schema_version: u32,
    pub config: RunConfig,
    pub out_of_regime: bool,
    pub sync_rule: String,
    pub tree: CoralTree,
    pub metrics: TreeMetrics,
}

impl TreeDocument {
    pub fn new(config: RunConfig, tree: CoralTree) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            out_of_regime: config.out_of_regime(),
            sync_rule: SYNC_RULE.to_string(),
            metrics: tree_metrics(&tree, 0),
            config,
            tree,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("tree document serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
