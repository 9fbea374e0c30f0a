//! Adapted processes and martingales on a filtration tree.

use std::ops::Deref;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::tree::FiltrationTree;

/// Relative tolerance of the averaging property.
pub const MARTINGALE_TOL: f64 = 1e-10;

/// One real value per node; the value at a level-`n` node is the value of
/// `f_n` on that atom.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeProcess {
    tree: Arc<FiltrationTree>,
    values: Vec<f64>,
}

impl TreeProcess {
    pub fn new(tree: Arc<FiltrationTree>, values: Vec<f64>) -> Result<Self> {
        if values.len() != tree.node_count() {
            return Err(Error::ShapeMismatch { expected: tree.node_count(), got: values.len() });
        }
        Ok(Self { tree, values })
    }

    pub fn from_fn(tree: Arc<FiltrationTree>, f: impl FnMut(usize) -> f64) -> Self {
        let values = (0..tree.node_count()).map(f).collect();
        Self { tree, values }
    }

    pub fn constant(tree: Arc<FiltrationTree>, c: f64) -> Self {
        let n = tree.node_count();
        Self { tree, values: vec![c; n] }
    }

    pub fn tree(&self) -> &Arc<FiltrationTree> {
        &self.tree
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn value(&self, a: usize) -> f64 {
        self.values[a]
    }

    /// Values of `f_n` on the level-`n` atoms.
    pub fn at_level(&self, n: usize) -> &[f64] {
        &self.values[self.tree.level(n)]
    }

    pub fn leaf_values(&self) -> &[f64] {
        self.at_level(self.tree.depth())
    }

    pub fn depth(&self) -> usize {
        self.tree.depth()
    }

    /// Increment `df` at node `a` (zero at the root).
    pub fn increment(&self, a: usize) -> f64 {
        match self.tree.parent(a) {
            Some(p) => self.values[a] - self.values[p],
            None => 0.0,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { tree: self.tree.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        ensure_same_tree(&self.tree, &other.tree)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { tree: self.tree.clone(), values })
    }

    /// The values `f_0, ..., f_N` along the path ending at leaf node `leaf`.
    pub fn path(&self, leaf: usize) -> Vec<f64> {
        self.tree.path_to(leaf).into_iter().map(|a| self.values[a]).collect()
    }

    /// `E f_n`.
    pub fn expectation(&self, n: usize) -> f64 {
        self.tree.level(n).map(|a| self.tree.prob(a) * self.values[a]).sum()
    }

    /// `E_m f_n` as values on the level-`m` atoms.
    pub fn conditional(&self, n: usize, m: usize) -> Result<Vec<f64>> {
        self.tree.check_level(n)?;
        self.tree.average_up(self.at_level(n), n, m)
    }

    /// Largest violation of the averaging property, relative to the scale of
    /// the children, together with the node where it occurs.
    pub fn martingale_residual(&self) -> (usize, f64) {
        let t = &self.tree;
        let mut worst = (0, 0.0);
        for a in 0..t.level(t.depth()).start {
            let mut mass = 0.0;
            let mut scale = self.values[a].abs() * t.prob(a);
            for c in t.children(a) {
                mass += self.values[c] * t.prob(c);
                scale += self.values[c].abs() * t.prob(c);
            }
            let res = (self.values[a] * t.prob(a) - mass).abs();
            let rel = if scale > 0.0 { res / scale } else { 0.0 };
            if rel > worst.1 || rel.is_nan() {
                worst = (a, rel);
            }
        }
        worst
    }

    pub fn is_martingale(&self) -> bool {
        let (_, r) = self.martingale_residual();
        r <= MARTINGALE_TOL
    }
}

pub(crate) fn ensure_same_tree(a: &Arc<FiltrationTree>, b: &Arc<FiltrationTree>) -> Result<()> {
    if Arc::ptr_eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::TreeMismatch)
    }
}

/// Probability-weighted average of leaf values over each level-`n` atom.
pub fn conditional_expectation(tree: &FiltrationTree, leaf_values: &[f64], n: usize) -> Result<Vec<f64>> {
    tree.average_up(leaf_values, tree.depth(), n)
}

/// A process satisfying `f_m = E(f_n | F_m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Martingale(TreeProcess);

impl Martingale {
    /// Validate the averaging property.
    pub fn new(p: TreeProcess) -> Result<Self> {
        let (node, residual) = p.martingale_residual();
        if residual > MARTINGALE_TOL || residual.is_nan() {
            return Err(Error::NotMartingale { node, residual });
        }
        Ok(Self(p))
    }

    /// Wrap a process known to be a martingale by construction.
    pub fn new_unchecked(p: TreeProcess) -> Self {
        Self(p)
    }

    /// The martingale `f_n = E_n f` closed by the given leaf values.
    pub fn from_leaves(tree: Arc<FiltrationTree>, leaf_values: &[f64]) -> Result<Self> {
        let depth = tree.depth();
        if leaf_values.len() != tree.leaf_count() {
            return Err(Error::ShapeMismatch { expected: tree.leaf_count(), got: leaf_values.len() });
        }
        let mut values = vec![0.0; tree.node_count()];
        values[tree.leaves()].copy_from_slice(leaf_values);
        for a in (0..tree.level(depth).start).rev() {
            let mass: f64 = tree.children(a).map(|c| values[c] * tree.prob(c)).sum();
            values[a] = mass / tree.prob(a);
        }
        Ok(Self(TreeProcess { tree, values }))
    }

    pub fn process(&self) -> &TreeProcess {
        &self.0
    }

    pub fn into_process(self) -> TreeProcess {
        self.0
    }

    /// `f - f_0`.
    pub fn centered(&self) -> Self {
        let f0 = self.0.values[0];
        Self(self.0.map(|v| v - f0))
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self(self.0.map(|v| c * v))
    }

    /// `|f|`, a nonnegative submartingale.
    pub fn abs(&self) -> TreeProcess {
        self.0.map(f64::abs)
    }
}

impl Deref for Martingale {
    type Target = TreeProcess;
    fn deref(&self) -> &TreeProcess {
        &self.0
    }
}

impl From<Martingale> for TreeProcess {
    fn from(m: Martingale) -> Self {
        m.0
    }
}
