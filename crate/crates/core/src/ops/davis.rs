//! Davis decomposition `f = f^pred + f^bv`.
//!
//! ```text
//! dg_n     = min(1, Mdf_{n-1} / |df_n|) df_n      (0 when df_n = 0)
//! dh_n     = df_n − dg_n
//! df^pred  = dg_n − E_{n-1} dg_n
//! df^bv    = dh_n − E_{n-1} dh_n
//! ```
//!
//! With `Mdf_0 = 0` the first increment goes entirely to the bounded
//! variation part. `f^pred` starts at 0 and `f^bv` at `f_0`.

use crate::ops::functionals::max_increment;
use crate::process::{Martingale, TreeProcess};

#[derive(Debug, Clone)]
pub struct DavisParts {
    pub f_pred: Martingale,
    pub f_bv: Martingale,
    /// Cumulative `g` (jumps truncated at the running max jump), `g_0 = 0`.
    pub g: TreeProcess,
    /// Cumulative `h = f − g`, `h_0 = f_0`.
    pub h: TreeProcess,
    /// `Mdf`.
    pub mdf: TreeProcess,
}

pub fn davis_decompose(f: &Martingale) -> DavisParts {
    let t = f.tree();
    let n = t.node_count();
    let mdf = max_increment(f);
    let mut g = vec![0.0; n];
    let mut h = vec![0.0; n];
    let mut pred = vec![0.0; n];
    let mut bv = vec![0.0; n];
    h[0] = f.value(0);
    bv[0] = f.value(0);
    for a in 0..t.level(t.depth()).start {
        let kids = t.children(a);
        let dg = |c: usize| {
            let df = f.value(c) - f.value(a);
            if df == 0.0 {
                0.0
            } else {
                (mdf.value(a) / df.abs()).min(1.0) * df
            }
        };
        let mean_dg: f64 = kids.clone().map(|c| t.cond_prob(c) * dg(c)).sum();
        let mean_dh: f64 =
            kids.clone().map(|c| t.cond_prob(c) * (f.value(c) - f.value(a) - dg(c))).sum();
        for c in kids {
            let dgc = dg(c);
            let dhc = f.value(c) - f.value(a) - dgc;
            g[c] = g[a] + dgc;
            h[c] = h[a] + dhc;
            pred[c] = pred[a] + dgc - mean_dg;
            bv[c] = bv[a] + dhc - mean_dh;
        }
    }
    let tree = t.clone();
    let mk = |v| TreeProcess::new(tree.clone(), v).expect("shape matches");
    DavisParts {
        f_pred: Martingale::new_unchecked(mk(pred)),
        f_bv: Martingale::new_unchecked(mk(bv)),
        g: mk(g),
        h: mk(h),
        mdf,
    }
}

/// Per-leaf total variation `Σ_n |df_n|` of a process.
pub fn total_variation(f: &TreeProcess) -> Vec<f64> {
    let t = f.tree();
    let mut tv = vec![0.0; t.node_count()];
    for a in 1..tv.len() {
        let p = t.parent(a).expect("non-root");
        tv[a] = tv[p] + (f.value(a) - f.value(p)).abs();
    }
    tv[t.leaves()].to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_leaf_backprop;
    use crate::generators::LeafDist;
    use crate::tree::FiltrationTree;
    use std::sync::Arc;

    #[test]
    fn two_step_example() {
        // df_1 = ±1, df_2 = ±1/2, fair and independent.
        let t = Arc::new(FiltrationTree::uniform(2, 2).unwrap());
        let f = Martingale::new(
            TreeProcess::new(t, vec![0.0, 1.0, -1.0, 1.5, 0.5, -0.5, -1.5]).unwrap(),
        )
        .unwrap();
        let d = davis_decompose(&f);
        assert_eq!(d.f_pred.values(), &[0.0, 0.0, 0.0, 0.5, -0.5, 0.5, -0.5]);
        assert_eq!(d.f_bv.values(), &[0.0, 1.0, -1.0, 1.0, 1.0, -1.0, -1.0]);
        assert!(d.f_pred.is_martingale() && d.f_bv.is_martingale());
    }

    #[test]
    fn shrinking_increments_have_no_bv_part_after_zero_start() {
        // df_1 = 0, then |df_n| nonincreasing: Mdf_{n-1} ≥ |df_n| from n = 3 on,
        // and at n = 2 we have Mdf_1 = 0, so build f with df_1 = df_2 = 0.
        let t = Arc::new(FiltrationTree::uniform(2, 4).unwrap());
        let mut v = vec![0.0; t.node_count()];
        for a in 0..t.level(4).start {
            let n = t.level_of(a);
            let step = if n < 1 { 0.0 } else { 1.0 / n as f64 };
            let c = t.children(a).start;
            v[c] = v[a] + step;
            v[c + 1] = v[a] - step;
        }
        let f = Martingale::new(TreeProcess::new(t, v).unwrap()).unwrap();
        let d = davis_decompose(&f);
        // First nonzero increment (n = 2) goes to bv; afterwards nothing does.
        for a in f.tree().level(2).end..f.values().len() {
            let p = f.tree().parent(a).unwrap();
            assert_eq!(d.f_bv.value(a) - d.f_bv.value(p), 0.0);
        }
    }

    #[test]
    fn invariants_on_random_martingales() {
        for seed in 0..20 {
            let f = gen_leaf_backprop(LeafDist::Exponential, 5, seed).unwrap();
            let d = davis_decompose(&f);
            let t = f.tree();
            for a in 0..t.node_count() {
                assert!((d.f_pred.value(a) + d.f_bv.value(a) - f.value(a)).abs() < 1e-12);
                if let Some(p) = t.parent(a) {
                    let dp = d.f_pred.value(a) - d.f_pred.value(p);
                    assert!(dp.abs() <= 2.0 * d.mdf.value(p) + 1e-12);
                    let dh = (d.h.value(a) - d.h.value(p)).abs();
                    assert!((dh - (d.mdf.value(a) - d.mdf.value(p))).abs() < 1e-12);
                }
            }
            assert!(d.f_pred.is_martingale());
            assert!(d.f_bv.is_martingale());
        }
    }
}
