//! Finite filtrations as rooted trees.
//!
//! Nodes are stored in breadth-first order, which is also the canonical index
//! used by every process living on the tree. Children of a node are
//! contiguous, so a tree is fully described by its depth, the number of
//! children of each internal node, and the leaf probabilities.

use crate::error::{Error, Result};

/// Largest depth any constructor accepts.
pub const MAX_DEPTH: usize = 24;
/// Largest node count any constructor accepts.
pub const MAX_NODES: usize = 1 << 26;

const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FiltrationTree {
    depth: usize,
    /// `level_start[n]..level_start[n + 1]` are the level-`n` nodes.
    level_start: Vec<usize>,
    parent: Vec<usize>,
    /// `child_start[a]..child_start[a + 1]` are the children of `a`.
    child_start: Vec<usize>,
    prob: Vec<f64>,
}

impl FiltrationTree {
    /// Build a tree from the branching number of every internal node (in
    /// breadth-first order) and the probabilities of the depth-`depth` nodes.
    pub fn new(depth: usize, branching: &[usize], leaf_probs: &[f64]) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::DepthGuard { depth, limit: MAX_DEPTH });
        }
        let mut level_start = vec![0, 1];
        let mut parent = vec![usize::MAX];
        let mut child_start = Vec::new();
        let mut consumed = 0;
        for level in 0..depth {
            let (lo, hi) = (level_start[level], level_start[level + 1]);
            for a in lo..hi {
                let b = *branching.get(consumed).ok_or_else(|| {
                    Error::InvalidTree(format!("branching list too short ({} entries)", branching.len()))
                })?;
                consumed += 1;
                if b == 0 {
                    return Err(Error::InvalidTree(format!("internal node {a} has no children")));
                }
                child_start.push(parent.len());
                if parent.len() + b > MAX_NODES {
                    return Err(Error::InvalidTree(format!("more than {MAX_NODES} nodes")));
                }
                parent.extend(std::iter::repeat_n(a, b));
            }
            level_start.push(parent.len());
        }
        if consumed != branching.len() {
            return Err(Error::InvalidTree(format!(
                "branching list has {} entries, tree has {consumed} internal nodes",
                branching.len()
            )));
        }
        let n = parent.len();
        // Leaves own an empty child range.
        while child_start.len() <= n {
            child_start.push(n);
        }

        let leaf_lo = level_start[depth];
        if leaf_probs.len() != n - leaf_lo {
            return Err(Error::InvalidTree(format!(
                "{} leaf probabilities for {} leaves",
                leaf_probs.len(),
                n - leaf_lo
            )));
        }
        let mut prob = vec![0.0; n];
        let mut total = 0.0;
        for (i, &p) in leaf_probs.iter().enumerate() {
            if !(p >= 0.0) || !p.is_finite() {
                return Err(Error::InvalidTree(format!("leaf probability {p} at leaf {i}")));
            }
            prob[leaf_lo + i] = p;
            total += p;
        }
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidTree(format!("leaf probabilities sum to {total}")));
        }
        for a in (0..leaf_lo).rev() {
            prob[a] = (child_start[a]..child_start[a + 1]).map(|c| prob[c]).sum();
        }
        if let Some(a) = prob.iter().position(|&p| p <= 0.0) {
            return Err(Error::InvalidTree(format!("node {a} has zero probability")));
        }
        Ok(Self { depth, level_start, parent, child_start, prob })
    }

    /// Every internal node has `b` children with equal conditional probability.
    pub fn uniform(b: usize, depth: usize) -> Result<Self> {
        if depth > MAX_DEPTH {
            return Err(Error::DepthGuard { depth, limit: MAX_DEPTH });
        }
        let internal: usize = (0..depth).map(|k| b.pow(k as u32)).sum();
        let leaves = b.checked_pow(depth as u32).filter(|&l| l <= MAX_NODES).ok_or_else(|| {
            Error::InvalidTree(format!("{b}^{depth} leaves is too many"))
        })?;
        let p = 1.0 / leaves as f64;
        Self::new(depth, &vec![b; internal], &vec![p; leaves])
    }

    /// Build a tree from branching numbers and the conditional probability of
    /// every non-root node given its parent (breadth-first order, root
    /// excluded).
    pub fn from_conditional(depth: usize, branching: &[usize], cond: &[f64]) -> Result<Self> {
        let shape = Self::new_shape_only(depth, branching)?;
        if cond.len() + 1 != shape.parent.len() {
            return Err(Error::InvalidTree(format!(
                "{} conditional probabilities for {} non-root nodes",
                cond.len(),
                shape.parent.len() - 1
            )));
        }
        let mut node_p = vec![1.0; shape.parent.len()];
        for v in 1..node_p.len() {
            node_p[v] = node_p[shape.parent[v]] * cond[v - 1];
        }
        let leaves = &node_p[shape.level_start[depth]..];
        let total: f64 = leaves.iter().sum();
        let leaves: Vec<f64> = leaves.iter().map(|p| p / total).collect();
        Self::new(depth, branching, &leaves)
    }

    fn new_shape_only(depth: usize, branching: &[usize]) -> Result<Self> {
        let leaves: usize = {
            let mut count = 1usize;
            let mut consumed = 0usize;
            for _ in 0..depth {
                let next: usize = branching
                    .get(consumed..consumed + count)
                    .ok_or_else(|| Error::InvalidTree("branching list too short".into()))?
                    .iter()
                    .sum();
                consumed += count;
                count = next;
            }
            count
        };
        Self::new(depth, branching, &vec![1.0 / leaves as f64; leaves])
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.node_count() - self.level_start[self.depth]
    }

    /// Node index range of level `n`.
    pub fn level(&self, n: usize) -> std::ops::Range<usize> {
        self.level_start[n]..self.level_start[n + 1]
    }

    pub fn leaves(&self) -> std::ops::Range<usize> {
        self.level(self.depth)
    }

    pub fn check_level(&self, n: usize) -> Result<()> {
        if n > self.depth {
            Err(Error::LevelOutOfRange { level: n, depth: self.depth })
        } else {
            Ok(())
        }
    }

    /// Level of node `a`.
    pub fn level_of(&self, a: usize) -> usize {
        self.level_start.partition_point(|&s| s <= a) - 1
    }

    pub fn parent(&self, a: usize) -> Option<usize> {
        (a != 0).then(|| self.parent[a])
    }

    pub fn children(&self, a: usize) -> std::ops::Range<usize> {
        self.child_start[a]..self.child_start[a + 1]
    }

    pub fn is_leaf(&self, a: usize) -> bool {
        a >= self.level_start[self.depth]
    }

    /// Probability of the atom `a`.
    pub fn prob(&self, a: usize) -> f64 {
        self.prob[a]
    }

    pub fn probs(&self) -> &[f64] {
        &self.prob
    }

    pub fn leaf_probs(&self) -> &[f64] {
        &self.prob[self.leaves()]
    }

    /// Conditional probability of `c` given its parent.
    pub fn cond_prob(&self, c: usize) -> f64 {
        match self.parent(c) {
            Some(a) => self.prob[c] / self.prob[a],
            None => 1.0,
        }
    }

    /// Branching number of every internal node in breadth-first order.
    pub fn branching(&self) -> Vec<usize> {
        (0..self.level_start[self.depth]).map(|a| self.children(a).len()).collect()
    }

    /// Ancestor of `a` at level `n` (which must not exceed the level of `a`).
    pub fn ancestor(&self, mut a: usize, n: usize) -> usize {
        let mut lvl = self.level_of(a);
        debug_assert!(n <= lvl);
        while lvl > n {
            a = self.parent[a];
            lvl -= 1;
        }
        a
    }

    /// Nodes on the path from the root to `a`, root first.
    pub fn path_to(&self, a: usize) -> Vec<usize> {
        let mut path = vec![a];
        let mut v = a;
        while v != 0 {
            v = self.parent[v];
            path.push(v);
        }
        path.reverse();
        path
    }

    /// Fill `out` with the root-to-`a` path (reusing its allocation).
    pub fn path_into(&self, a: usize, out: &mut Vec<usize>) {
        let lvl = self.level_of(a);
        out.clear();
        out.resize(lvl + 1, 0);
        let mut v = a;
        for k in (0..=lvl).rev() {
            out[k] = v;
            if k > 0 {
                v = self.parent[v];
            }
        }
    }

    /// Average level-`n` node values up to level `m <= n`.
    pub fn average_up(&self, values: &[f64], n: usize, m: usize) -> Result<Vec<f64>> {
        self.check_level(n)?;
        if m > n {
            return Err(Error::LevelOutOfRange { level: m, depth: n });
        }
        if values.len() != self.level(n).len() {
            return Err(Error::ShapeMismatch { expected: self.level(n).len(), got: values.len() });
        }
        let mut cur = values.to_vec();
        for lvl in (m..n).rev() {
            let base = self.level_start[lvl + 1];
            cur = self
                .level(lvl)
                .map(|a| {
                    let mass: f64 =
                        self.children(a).map(|c| cur[c - base] * self.prob[c]).sum();
                    mass / self.prob[a]
                })
                .collect();
        }
        Ok(cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_tree_layout() {
        let t = FiltrationTree::uniform(2, 3).unwrap();
        assert_eq!(t.node_count(), 15);
        assert_eq!(t.leaf_count(), 8);
        assert_eq!(t.level(2), 3..7);
        assert_eq!(t.children(1), 3..5);
        assert_eq!(t.parent(6), Some(2));
        assert_eq!(t.level_of(0), 0);
        assert_eq!(t.level_of(14), 3);
        assert_eq!(t.path_to(9), vec![0, 1, 4, 9]);
        assert_eq!(t.ancestor(9, 1), 1);
        assert!((t.prob(4) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn irregular_branching() {
        let t = FiltrationTree::new(2, &[2, 1, 3], &[0.1, 0.2, 0.3, 0.4]).unwrap();
        assert_eq!(t.level(1), 1..3);
        assert_eq!(t.children(1), 3..4);
        assert_eq!(t.children(2), 4..7);
        assert!((t.prob(1) - 0.1).abs() < 1e-15);
        assert!((t.prob(2) - 0.9).abs() < 1e-15);
        assert_eq!(t.branching(), vec![2, 1, 3]);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(FiltrationTree::new(1, &[2], &[0.5, 0.4]).is_err());
        assert!(FiltrationTree::new(1, &[2], &[1.0, 0.0]).is_err());
        assert!(FiltrationTree::new(1, &[2, 2], &[0.5, 0.5]).is_err());
        assert!(FiltrationTree::new(1, &[0], &[]).is_err());
        assert!(matches!(
            FiltrationTree::uniform(2, 25),
            Err(Error::DepthGuard { .. })
        ));
    }

    #[test]
    fn depth_zero_is_a_single_atom() {
        let t = FiltrationTree::new(0, &[], &[1.0]).unwrap();
        assert_eq!(t.node_count(), 1);
        assert!(t.is_leaf(0));
        assert_eq!(t.leaf_probs(), &[1.0]);
    }

    #[test]
    fn conditional_construction() {
        let t = FiltrationTree::from_conditional(2, &[2, 2, 2], &[0.25, 0.75, 0.5, 0.5, 0.1, 0.9])
            .unwrap();
        assert!((t.prob(3) - 0.125).abs() < 1e-15);
        assert!((t.prob(6) - 0.675).abs() < 1e-15);
        assert!((t.cond_prob(5) - 0.1).abs() < 1e-15);
    }
}
