//! Running maximal, square and oscillation functionals.
//!
//! All of these are computed top-down: the value at a node depends only on
//! the path to it, so one pass in breadth-first order suffices.

use crate::process::TreeProcess;

fn top_down(f: &TreeProcess, root: f64, step: impl Fn(usize, usize, f64) -> f64) -> TreeProcess {
    let t = f.tree();
    let mut out = vec![0.0; t.node_count()];
    out[0] = root;
    for a in 1..out.len() {
        let p = t.parent(a).expect("non-root");
        out[a] = step(a, p, out[p]);
    }
    TreeProcess::new(t.clone(), out).expect("shape matches")
}

/// `Mf_n = max_{k ≤ n} |f_k|`.
pub fn maximal(f: &TreeProcess) -> TreeProcess {
    top_down(f, f.value(0).abs(), |a, _, prev| prev.max(f.value(a).abs()))
}

/// `Mdf_n = max_{1 ≤ k ≤ n} |df_k|`, with `Mdf_0 = 0`.
pub fn max_increment(f: &TreeProcess) -> TreeProcess {
    top_down(f, 0.0, |a, p, prev| prev.max((f.value(a) - f.value(p)).abs()))
}

/// `Sf_n = (Σ_{1 ≤ k ≤ n} |df_k|²)^{1/2}`.
pub fn square_function(f: &TreeProcess) -> TreeProcess {
    let sq = top_down(f, 0.0, |a, p, prev| prev + (f.value(a) - f.value(p)).powi(2));
    sq.map(f64::sqrt)
}

/// `E_{n} |df_{n+1}|²` on every internal node (zero on leaves).
pub fn conditional_variance(f: &TreeProcess) -> Vec<f64> {
    let t = f.tree();
    (0..t.node_count())
        .map(|a| t.children(a).map(|c| t.cond_prob(c) * (f.value(c) - f.value(a)).powi(2)).sum())
        .collect()
}

/// `sf_n = (Σ_{1 ≤ k ≤ n} E_{k-1} |df_k|²)^{1/2}`.
pub fn predictable_square(f: &TreeProcess) -> TreeProcess {
    let cv = conditional_variance(f);
    let sq = top_down(f, 0.0, |_, p, prev| prev + cv[p]);
    sq.map(f64::sqrt)
}

/// Running oscillation `M_t = max_{t'' ≤ t' ≤ t} |f_{t'} − f_{t''}|`.
pub fn oscillation(f: &TreeProcess) -> TreeProcess {
    let hi = top_down(f, f.value(0), |a, _, prev| prev.max(f.value(a)));
    let lo = top_down(f, f.value(0), |a, _, prev| prev.min(f.value(a)));
    hi.zip_with(&lo, |h, l| h - l).expect("same tree")
}

/// Whether `f_a ≤ E(f_children | a)` at every internal node, within `tol`
/// relative to the children's scale.
pub fn is_submartingale(f: &TreeProcess, tol: f64) -> bool {
    let t = f.tree();
    (0..t.level(t.depth()).start).all(|a| {
        let mut mean = 0.0;
        let mut scale = 0.0;
        for c in t.children(a) {
            mean += t.cond_prob(c) * f.value(c);
            scale += t.cond_prob(c) * f.value(c).abs();
        }
        f.value(a) <= mean + tol * scale.max(f.value(a).abs())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_leaf_backprop, gen_scaled_walk, gen_walk, LeafDist};
    use crate::tree::FiltrationTree;
    use std::sync::Arc;

    fn chain(values: &[f64]) -> TreeProcess {
        let t = Arc::new(FiltrationTree::uniform(1, values.len() - 1).unwrap());
        TreeProcess::new(t, values.to_vec()).unwrap()
    }

    #[test]
    fn maximal_of_a_path() {
        assert_eq!(maximal(&chain(&[0.0, 1.0, -2.0, 1.0])).values(), &[0.0, 1.0, 2.0, 2.0]);
        assert_eq!(maximal(&chain(&[-3.0, -3.0])).values(), &[3.0, 3.0]);
    }

    #[test]
    fn square_function_of_a_path() {
        let s = square_function(&chain(&[0.0, 1.0, -1.0]));
        assert!((s.value(2) - 5f64.sqrt()).abs() < 1e-15);
        let w = gen_scaled_walk(16).unwrap();
        for &v in square_function(&w).leaf_values() {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn predictable_square_of_fair_walk() {
        let w = gen_walk(5, 1.0).unwrap();
        let s = predictable_square(&w);
        for n in 0..=5 {
            for &v in s.at_level(n) {
                assert!((v - (n as f64).sqrt()).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn oscillation_of_a_path() {
        assert_eq!(oscillation(&chain(&[0.0, 1.0, -2.0, 1.0])).values(), &[0.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn maximal_is_a_submartingale() {
        let f = gen_leaf_backprop(LeafDist::Normal, 6, 4).unwrap();
        assert!(is_submartingale(&maximal(&f), 1e-12));
        assert!(is_submartingale(&f.abs(), 1e-12));
    }

    #[test]
    fn max_increment_starts_at_zero() {
        let m = max_increment(&chain(&[5.0, 6.0, 4.0, 4.5]));
        assert_eq!(m.values(), &[0.0, 1.0, 2.0, 2.0]);
    }
}
