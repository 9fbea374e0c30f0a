//! Weighted weak-type Doob inequality
//! `λ · w{Mf_n > λ} ≤ ∫_{Mf_n > λ} f_n Mw_n dμ`, with `w_k = E_k w`.

use crate::error::{Error, Result};
use crate::ops::functionals::maximal;
use crate::ops::level_sets::{upper_level_sets, LevelPoint};
use crate::process::{ensure_same_tree, Martingale, TreeProcess};

/// Both sides at every breakpoint of `Mf_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedPoint {
    pub lambda: f64,
    pub lhs: f64,
    pub rhs: f64,
}

/// Scan `λ ↦ (λ w{Mf_n > λ}, ∫_{Mf_n>λ} f_n Mw_n)` for a nonnegative
/// submartingale `f` and a positive weight `w` given on the leaves.
pub fn weighted_maximal_data(f: &TreeProcess, w_leaves: &[f64], n: usize) -> Result<Vec<WeightedPoint>> {
    let t = f.tree();
    t.check_level(n)?;
    if w_leaves.len() != t.leaf_count() {
        return Err(Error::ShapeMismatch { expected: t.leaf_count(), got: w_leaves.len() });
    }
    if let Some(bad) = w_leaves.iter().find(|&&x| !(x > 0.0)) {
        return Err(Error::InvalidParameter(format!("weight must be positive, got {bad}")));
    }
    if let Some(bad) = f.values().iter().find(|&&x| x < 0.0) {
        return Err(Error::InvalidParameter(format!("f must be nonnegative, got {bad}")));
    }
    let w = Martingale::from_leaves(t.clone(), w_leaves)?;
    ensure_same_tree(t, w.tree())?;
    let mf = maximal(f);
    let mw = maximal(&w);
    let atoms = t.level(n);
    let x: Vec<f64> = atoms.clone().map(|a| mf.value(a)).collect();
    // w{A} = ∫_A w_n for A ∈ F_n.
    let wmass: Vec<f64> = atoms.clone().map(|a| t.prob(a) * w.value(a)).collect();
    let integrand: Vec<f64> = atoms.map(|a| t.prob(a) * f.value(a) * mw.value(a)).collect();
    Ok(upper_level_sets(&x, &wmass, &integrand)
        .into_iter()
        .map(|LevelPoint { lambda, mass, integral }| WeightedPoint { lambda, lhs: lambda * mass, rhs: integral })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_leaf_backprop, LeafDist};
    use crate::tree::FiltrationTree;
    use std::sync::Arc;

    #[test]
    fn unit_weight_is_plain_doob() {
        let f = gen_leaf_backprop(LeafDist::Normal, 5, 2).unwrap().abs();
        let ones = vec![1.0; f.tree().leaf_count()];
        for p in weighted_maximal_data(&f, &ones, 5).unwrap() {
            assert!(p.lhs <= p.rhs + 1e-12);
        }
    }

    #[test]
    fn constant_has_one_breakpoint() {
        let t = Arc::new(FiltrationTree::uniform(2, 3).unwrap());
        let f = TreeProcess::constant(t.clone(), 2.0);
        let pts = weighted_maximal_data(&f, &[1.0; 8], 3).unwrap();
        assert!(pts.iter().all(|p| p.lambda == 2.0 || p.lambda == 1.0));
        assert!(weighted_maximal_data(&f, &[0.0; 8], 3).is_err());
    }
}
