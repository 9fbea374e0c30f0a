//! JSON exchange format for trees and the processes living on them.
//!
//! ```json
//! {"depth": 2, "branching": [2, 2, 2], "leaf_probs": [0.25, ...],
//!  "processes": {"f": [node values in breadth-first order]}}
//! ```
//!
//! `branching` lists the number of children of each internal node in
//! breadth-first order; when absent the tree is taken to be binary.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::TreeProcess;
use crate::tree::FiltrationTree;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeFile {
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branching: Option<Vec<usize>>,
    pub leaf_probs: Vec<f64>,
    pub processes: BTreeMap<String, Vec<f64>>,
}

impl TreeFile {
    pub fn from_processes<'a>(
        tree: &FiltrationTree,
        processes: impl IntoIterator<Item = (&'a str, &'a TreeProcess)>,
    ) -> Self {
        Self {
            depth: tree.depth(),
            branching: Some(tree.branching()),
            leaf_probs: tree.leaf_probs().to_vec(),
            processes: processes.into_iter().map(|(k, p)| (k.to_owned(), p.values().to_vec())).collect(),
        }
    }

    pub fn tree(&self) -> Result<FiltrationTree> {
        let branching = match &self.branching {
            Some(b) => b.clone(),
            None => {
                let internal = (1usize << self.depth) - 1;
                vec![2; internal]
            }
        };
        FiltrationTree::new(self.depth, &branching, &self.leaf_probs)
    }

    /// The tree together with every named process on it.
    pub fn load(&self) -> Result<(Arc<FiltrationTree>, BTreeMap<String, TreeProcess>)> {
        let tree = Arc::new(self.tree()?);
        let procs = self
            .processes
            .iter()
            .map(|(k, v)| Ok((k.clone(), TreeProcess::new(tree.clone(), v.clone())?)))
            .collect::<Result<_>>()?;
        Ok((tree, procs))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(Error::from)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_doubling, gen_leaf_backprop, LeafDist};

    #[test]
    fn round_trip_is_exact() {
        let f = gen_leaf_backprop(LeafDist::LogNormal, 4, 9).unwrap();
        let file = TreeFile::from_processes(f.tree(), [("f", f.process())]);
        let text = file.to_json().unwrap();
        let back = TreeFile::from_json(&text).unwrap();
        assert_eq!(back, file);
        let (tree, procs) = back.load().unwrap();
        assert_eq!(*tree, **f.tree());
        assert_eq!(procs["f"].values(), f.values());
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn binary_default() {
        let f = gen_doubling(3).unwrap();
        let mut file = TreeFile::from_processes(f.tree(), [("f", f.process())]);
        file.branching = None;
        let (tree, _) = file.load().unwrap();
        assert_eq!(*tree, **f.tree());
    }
}
