//! Stopping times as first-marked-node rules.
//!
//! A stopping time is encoded by marking nodes: `τ` on a path is the level of
//! the first marked node along it. Since the decision at a node only sees the
//! node itself and its ancestors, `{τ ≤ n}` is automatically a union of
//! level-`n` atoms.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::process::{ensure_same_tree, Martingale, TreeProcess};
use crate::tree::FiltrationTree;

#[derive(Debug, Clone, PartialEq)]
pub struct StoppingRule {
    tree: Arc<FiltrationTree>,
    marks: Vec<bool>,
}

impl StoppingRule {
    pub fn new(tree: Arc<FiltrationTree>, marks: Vec<bool>) -> Result<Self> {
        if marks.len() != tree.node_count() {
            return Err(Error::ShapeMismatch { expected: tree.node_count(), got: marks.len() });
        }
        Ok(Self { tree, marks })
    }

    /// `τ ≡ n`.
    pub fn constant(tree: Arc<FiltrationTree>, n: usize) -> Self {
        let marks = (0..tree.node_count()).map(|a| tree.level_of(a) == n).collect();
        Self { tree, marks }
    }

    /// `τ ≡ ∞`.
    pub fn never(tree: Arc<FiltrationTree>) -> Self {
        let n = tree.node_count();
        Self { tree, marks: vec![false; n] }
    }

    /// Rule with prescribed per-leaf times (`None` for `∞`). Fails unless the
    /// times are adapted, i.e. leaves sharing the level-`k` atom agree on
    /// whether they stop at `k`.
    pub fn from_leaf_times(tree: Arc<FiltrationTree>, times: &[Option<usize>]) -> Result<Self> {
        if times.len() != tree.leaf_count() {
            return Err(Error::ShapeMismatch { expected: tree.leaf_count(), got: times.len() });
        }
        let mut marks = vec![false; tree.node_count()];
        for (l, t) in tree.leaves().zip(times) {
            if let Some(k) = *t {
                tree.check_level(k)?;
                marks[tree.ancestor(l, k)] = true;
            }
        }
        let rule = Self { tree, marks };
        if rule.leaf_times() != times {
            return Err(Error::InvalidParameter("leaf times are not a stopping time".into()));
        }
        Ok(rule)
    }

    pub fn tree(&self) -> &Arc<FiltrationTree> {
        &self.tree
    }

    pub fn marks(&self) -> &[bool] {
        &self.marks
    }

    /// For every node, the first marked node on the path to it (inclusive).
    pub fn stop_node(&self) -> Vec<Option<usize>> {
        let t = &self.tree;
        let mut out = vec![None; t.node_count()];
        for a in 0..t.node_count() {
            let inherited = t.parent(a).and_then(|p| out[p]);
            out[a] = inherited.or(self.marks[a].then_some(a));
        }
        out
    }

    /// `τ` on every leaf, `None` for `∞`.
    pub fn leaf_times(&self) -> Vec<Option<usize>> {
        let stop = self.stop_node();
        self.tree.leaves().map(|l| stop[l].map(|a| self.tree.level_of(a))).collect()
    }

    pub fn is_bounded(&self) -> bool {
        self.leaf_times().iter().all(Option::is_some)
    }

    /// Marks as seen by the first-hit semantics: only the first mark on each
    /// path matters, so two rules are equal as stopping times iff their
    /// canonical forms agree.
    pub fn canonical(&self) -> Self {
        let stop = self.stop_node();
        let marks = (0..self.tree.node_count()).map(|a| stop[a] == Some(a)).collect();
        Self { tree: self.tree.clone(), marks }
    }

    /// `σ ∧ τ`: a node fires as soon as either rule has fired.
    pub fn min(&self, other: &Self) -> Result<Self> {
        ensure_same_tree(&self.tree, &other.tree)?;
        let marks = self.marks.iter().zip(&other.marks).map(|(&a, &b)| a || b).collect();
        Ok(Self { tree: self.tree.clone(), marks })
    }

    /// `σ ∨ τ`: a node fires once both rules have fired.
    pub fn max(&self, other: &Self) -> Result<Self> {
        ensure_same_tree(&self.tree, &other.tree)?;
        let (s, t) = (self.stop_node(), other.stop_node());
        let marks = s.iter().zip(&t).map(|(a, b)| a.is_some() && b.is_some()).collect();
        Ok(Self { tree: self.tree.clone(), marks })
    }
}

/// `τ = inf{t : f_t ∈ B}`; the decision at a node uses only its own value.
pub fn hitting_time(f: &TreeProcess, hit: impl Fn(f64) -> bool) -> StoppingRule {
    let marks = f.values().iter().map(|&v| hit(v)).collect();
    StoppingRule { tree: f.tree().clone(), marks }
}

/// The stopped process `f^τ_t = f_{τ∧t}` of an arbitrary adapted process.
pub fn stop_adapted(f: &TreeProcess, tau: &StoppingRule) -> Result<TreeProcess> {
    ensure_same_tree(f.tree(), &tau.tree)?;
    let stop = tau.stop_node();
    let values = (0..f.values().len()).map(|a| f.value(stop[a].unwrap_or(a))).collect();
    TreeProcess::new(f.tree().clone(), values)
}

/// The stopped martingale `f^τ`.
pub fn stop_process(f: &Martingale, tau: &StoppingRule) -> Result<Martingale> {
    stop_adapted(f, tau).map(Martingale::new_unchecked)
}

/// Largest deviation `|f_{σ∧τ} − E_σ f_τ|` over the leaves.
///
/// `E_σ` averages over the atoms of `F_σ`: the leaves are grouped by the
/// node at which `σ` fires, and each leaf on which `σ` never fires is an atom
/// on its own.
pub fn optional_sampling_residual(f: &Martingale, sigma: &StoppingRule, tau: &StoppingRule) -> Result<f64> {
    ensure_same_tree(f.tree(), sigma.tree())?;
    ensure_same_tree(f.tree(), tau.tree())?;
    if !tau.is_bounded() {
        return Err(Error::Unbounded);
    }
    let t = f.tree();
    let f_tau = stop_adapted(f, tau)?;
    let f_min = stop_adapted(f, &sigma.min(tau)?)?;
    let sigma_node = sigma.stop_node();

    // Group leaves by the σ atom containing them.
    let mut mass = vec![0.0; t.node_count()];
    let mut weight = vec![0.0; t.node_count()];
    for l in t.leaves() {
        let key = sigma_node[l].unwrap_or(l);
        mass[key] += t.prob(l) * f_tau.value(l);
        weight[key] += t.prob(l);
    }
    let mut worst = 0.0f64;
    for l in t.leaves() {
        let key = sigma_node[l].unwrap_or(l);
        let cond = mass[key] / weight[key];
        worst = worst.max((f_min.value(l) - cond).abs());
    }
    Ok(worst)
}

/// Whether `f_{σ∧τ} = E_σ f_τ` holds within `1e-10` (relative to the scale of `f`).
pub fn optional_sampling_check(f: &Martingale, sigma: &StoppingRule, tau: &StoppingRule) -> Result<bool> {
    let scale = f.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    Ok(optional_sampling_residual(f, sigma, tau)? <= 1e-10 * scale)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn walk2() -> Martingale {
        // ±1 walk of depth 2, children ordered (up, down).
        let t = Arc::new(FiltrationTree::uniform(2, 2).unwrap());
        Martingale::new(TreeProcess::new(t, vec![0.0, 1.0, -1.0, 2.0, 0.0, 0.0, -2.0]).unwrap()).unwrap()
    }

    #[test]
    fn deterministic_hitting_time() {
        let t = Arc::new(FiltrationTree::uniform(1, 2).unwrap());
        let f = TreeProcess::new(t, vec![0.0, 1.0, 2.0]).unwrap();
        assert_eq!(hitting_time(&f, |x| x >= 2.0).leaf_times(), vec![Some(2)]);
        assert_eq!(hitting_time(&f, |x| x >= 5.0).leaf_times(), vec![None]);
    }

    #[test]
    fn walk_hitting_time() {
        let f = walk2();
        let tau = hitting_time(&f, |x| x >= 1.0);
        assert_eq!(tau.leaf_times(), vec![Some(1), Some(1), None, None]);
    }

    #[test]
    fn stopped_walk() {
        let f = walk2();
        let tau = hitting_time(&f, |x| x == 1.0);
        let s = stop_process(&f, &tau).unwrap();
        assert_eq!(s.leaf_values(), &[1.0, 1.0, 0.0, -2.0]);
        assert!(s.is_martingale());
        let never = StoppingRule::never(f.tree().clone());
        assert_eq!(stop_process(&f, &never).unwrap(), f);
        let zero = StoppingRule::constant(f.tree().clone(), 0);
        assert!(stop_process(&f, &zero).unwrap().values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn leaf_times_must_be_adapted() {
        let f = walk2();
        let t = f.tree().clone();
        let ok = StoppingRule::from_leaf_times(t.clone(), &[Some(1), Some(1), None, Some(2)]).unwrap();
        assert_eq!(ok.leaf_times(), vec![Some(1), Some(1), None, Some(2)]);
        // Stopping at 1 on one leaf of the up-atom but not the other peeks ahead.
        assert!(StoppingRule::from_leaf_times(t, &[Some(1), Some(2), None, None]).is_err());
    }

    #[test]
    fn min_and_max_of_rules() {
        let f = walk2();
        let up = hitting_time(&f, |x| x >= 1.0);
        let two = StoppingRule::constant(f.tree().clone(), 2);
        assert_eq!(up.min(&two).unwrap().leaf_times(), vec![Some(1), Some(1), Some(2), Some(2)]);
        assert_eq!(up.max(&two).unwrap().leaf_times(), vec![Some(2), Some(2), None, None]);
    }

    #[test]
    fn optional_sampling_simple_cases() {
        let f = walk2();
        let tree = f.tree().clone();
        let zero = StoppingRule::constant(tree.clone(), 0);
        let end = StoppingRule::constant(tree.clone(), 2);
        assert!(optional_sampling_check(&f, &zero, &end).unwrap());
        let up = hitting_time(&f, |x| x >= 1.0);
        assert!(optional_sampling_check(&f, &up, &end).unwrap());
        assert!(optional_sampling_check(&f, &end, &up.min(&end).unwrap()).unwrap());
        assert!(matches!(optional_sampling_check(&f, &zero, &up), Err(Error::Unbounded)));
    }
}
