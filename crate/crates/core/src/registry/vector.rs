//! Families of martingales on a shared tree: `ℓ^r`-valued maximal and BDG
//! inequalities, and the paraproduct estimates.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use super::sampling::random_rule;
use super::{quotient, run_trials, Ctx, Outcome};
use crate::error::{Error, Result};
use crate::generators::{increment_on, random_tree, TreeShape};
use crate::ops::functionals::{maximal, square_function};
use crate::ops::lepingle::lepingle_partition;
use crate::ops::norms::{conjugate, lp_norm, lr};
use crate::ops::paraproduct::{chen_residual, paraproduct_deltaf, paraproduct_variation_bound};
use crate::ops::variation::{chain_variation, variation};
use crate::process::Martingale;
use crate::registry::CheckReport;
use crate::rng;
use crate::stopping::StoppingRule;
use crate::tree::FiltrationTree;

/// `k` centred martingales of varied scale on one random tree.
fn family<R: Rng>(rng: &mut R, k: usize, max_depth: usize) -> Result<Vec<Martingale>> {
    let depth = rng.random_range(1..=max_depth.max(1));
    let tree = Arc::new(random_tree(depth, TreeShape::default(), rng)?);
    let scale = LogNormal::new(0.0, 1.0).expect("sigma 1");
    Ok((0..k).map(|_| increment_on(tree.clone(), 0.0, rng).scaled(scale.sample(rng))).collect())
}

/// Per leaf, `ℓ^r_k x_k(leaf)`.
fn lr_leaves(xs: &[Vec<f64>], r: f64) -> Vec<f64> {
    (0..xs[0].len()).map(|i| lr(xs.iter().map(|x| x[i]), r)).collect()
}

fn finite(o: &mut Outcome, v: f64) {
    if !v.is_finite() {
        o.push_ratio(f64::INFINITY);
    }
}

pub(crate) fn vector_trial<R: Rng>(fam: &[Martingale], q: f64, r: f64, p: f64, rng: &mut R) -> Result<Outcome> {
    let mut o = Outcome::new();
    let t = fam[0].tree();
    let probs = t.leaf_probs();
    let mf: Vec<Vec<f64>> = fam.iter().map(|f| maximal(f).leaf_values().to_vec()).collect();
    let sf: Vec<Vec<f64>> = fam.iter().map(|f| square_function(f).leaf_values().to_vec()).collect();
    let fin: Vec<Vec<f64>> = fam.iter().map(|f| f.leaf_values().to_vec()).collect();
    let pc = conjugate(p);

    // r = p: Fubini and scalar Doob.
    let lhs = lp_norm(&lr_leaves(&mf, p), probs, p);
    let rhs = lp_norm(&lr_leaves(&fin, p), probs, p);
    o.assert_le(lhs, pc, rhs).measure("fubini_ratio", quotient(lhs, pc * rhs));

    // r = ∞: max_k |f_k| is a submartingale.
    let lhs = lp_norm(&lr_leaves(&mf, f64::INFINITY), probs, p);
    let rhs = lp_norm(&lr_leaves(&fin, f64::INFINITY), probs, p);
    o.assert_le(lhs, pc, rhs).measure("sup_ratio", quotient(lhs, pc * rhs));

    // q = r = 2: ‖ℓ² f_N‖₂ = ‖ℓ² Sf‖₂ for martingales started at 0.
    let lhs = lp_norm(&lr_leaves(&mf, 2.0), probs, 2.0);
    let rhs = lp_norm(&lr_leaves(&sf, 2.0), probs, 2.0);
    o.assert_le(lhs, 2.0, rhs).measure("l2_bdg_ratio", quotient(lhs, 2.0 * rhs));

    let bdg = quotient(lp_norm(&lr_leaves(&mf, r), probs, q), lp_norm(&lr_leaves(&sf, r), probs, q));
    let vmax = quotient(lp_norm(&lr_leaves(&mf, r), probs, p), lp_norm(&lr_leaves(&fin, r), probs, p));
    finite(&mut o, bdg);
    finite(&mut o, vmax);
    o.measure("lr_bdg_ratio", bdg).measure("vv_max_ratio", vmax);

    // ‖Mf‖_{L^p(w)} against ‖f‖_{L^p(w*)} for the first member.
    let sigma = rng.random_range(0.1..2.0);
    let dist = LogNormal::new(0.0, sigma).expect("positive sigma");
    let w: Vec<f64> = (0..probs.len()).map(|_| dist.sample(rng)).collect();
    let ws = maximal(&Martingale::from_leaves(t.clone(), &w)?.into_process());
    let num: f64 = (0..probs.len()).map(|i| probs[i] * w[i] * mf[0][i].powf(p)).sum();
    let den: f64 = (0..probs.len()).map(|i| probs[i] * ws.leaf_values()[i] * fin[0][i].abs().powf(p)).sum();
    let weighted = quotient(num.powf(1.0 / p), den.powf(1.0 / p));
    finite(&mut o, weighted);
    o.measure("weighted_ratio", weighted);
    Ok(o)
}

pub(crate) fn vector_valued(ctx: &Ctx) -> Result<CheckReport> {
    let k = ctx.usize("k", 8)?;
    if k == 0 || k > 64 {
        return Err(Error::InvalidParameter(format!("vector_valued needs 1 <= k <= 64, got {k}")));
    }
    let q = ctx.f64("q", 3.0)?;
    let r = ctx.f64("r", 1.5)?;
    let p = ctx.f64("p", 2.0)?;
    if !(q >= 1.0 && r >= 1.0 && p > 1.0) {
        return Err(Error::InvalidParameter("vector_valued needs q, r >= 1 and p > 1".into()));
    }
    let depth = ctx.depth(6);
    let n = ctx.trials(1_000);
    let seed = ctx.seed_for("family");
    let run = run_trials(n, |i| {
        let mut g = rng::stream(seed, i as u64);
        let fam = family(&mut g, k, depth)?;
        vector_trial(&fam, q, r, p, &mut g)
    })?;
    Ok(ctx.report(conjugate(p), run))
}

/// Exponents of the paraproduct estimates.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Exponents {
    pub q0: f64,
    pub q1: f64,
    pub r0: f64,
    pub r1: f64,
}

impl Exponents {
    fn q(&self) -> f64 {
        1.0 / (1.0 / self.q0 + 1.0 / self.q1)
    }

    fn r(&self) -> f64 {
        1.0 / (1.0 / self.r0 + 1.0 / self.r1)
    }
}

fn leaf_time(times: &[Option<usize>], i: usize) -> usize {
    times[i].expect("bounded rule")
}

fn sg(gp: &[f64], s: usize, t: usize) -> f64 {
    (s + 1..=t).map(|j| (gp[j] - gp[j - 1]).powi(2)).sum::<f64>().sqrt()
}

pub(crate) fn paraproduct_trial<R: Rng>(fam: &[Martingale], e: Exponents, rng: &mut R) -> Result<Outcome> {
    let mut o = Outcome::new();
    let tree: &Arc<FiltrationTree> = fam[0].tree();
    let probs = tree.leaf_probs();
    let n = tree.depth();
    let leaves: Vec<usize> = tree.leaves().collect();
    let pairs: Vec<(&Martingale, &Martingale)> = fam.chunks(2).map(|c| (&c[0], &c[1])).collect();

    // Exact identities and the pathwise bound for the first pair.
    let (f, g) = pairs[0];
    let pi = paraproduct_deltaf(f, g)?;
    let fmax = f.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let gmax = g.values().iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let chen = chen_residual(&pi, f, g);
    o.assert_small(chen, 1e-12 * (1.0 + 4.0 * fmax * gmax)).measure("chen_residual", chen);
    let mut path_worst = 0.0f64;
    for &l in &leaves {
        let (lhs, rhs) = paraproduct_variation_bound(&pi.path_matrix(l), 3.0, 2.0)?;
        o.assert_le(lhs, 1.0, rhs);
        path_worst = path_worst.max(quotient(lhs, rhs));
    }
    o.measure("variation_bound_ratio", path_worst);

    // Maximal paraproduct over random τ'_k ≤ τ_k, one term per pair.
    let mut lhs_k = Vec::new();
    let mut f_k = Vec::new();
    let mut s_k = Vec::new();
    for &(f, g) in &pairs {
        let pi = paraproduct_deltaf(f, g)?;
        let tp = random_rule(tree, true, rng);
        let sigma = random_rule(tree, false, rng);
        let tau = tp.max(&sigma)?.min(&StoppingRule::constant(tree.clone(), n))?;
        let (tpt, taut) = (tp.leaf_times(), tau.leaf_times());
        let (mut a, mut b, mut c) = (Vec::new(), Vec::new(), Vec::new());
        for (i, &l) in leaves.iter().enumerate() {
            let (s, t) = (leaf_time(&tpt, i), leaf_time(&taut, i));
            let pm = pi.path_matrix(l);
            let fp = f.path(l);
            let gp = g.path(l);
            a.push((s..=t).map(|u| pm[s][u].abs()).fold(0.0, f64::max));
            b.push((s..t).map(|u| (fp[u] - fp[s]).abs()).fold(0.0, f64::max));
            c.push(sg(&gp, s, t));
        }
        lhs_k.push(a);
        f_k.push(b);
        s_k.push(c);
    }
    let lhs = lp_norm(&lr_leaves(&lhs_k, e.r()), probs, e.q());
    let rhs = lp_norm(&lr_leaves(&f_k, e.r1), probs, e.q1) * lp_norm(&lr_leaves(&s_k, e.r0), probs, e.q0);
    let v = quotient(lhs, rhs);
    finite(&mut o, v);
    o.measure("vv_pprod_ratio", v);

    // Both time arguments free inside the blocks of a stopping partition.
    let r_df = 1.0 / (0.5 + 1.0 / e.r1);
    let sgn = lp_norm(square_function(g).leaf_values(), probs, e.q0);
    let mut lhs_leaf = Vec::new();
    let mut f_leaf = Vec::new();
    for &l in &leaves {
        let fp = f.path(l);
        let pm = pi.path_matrix(l);
        let mut taus = lepingle_partition(&fp, 2).taus;
        if *taus.last().expect("τ_0") != n {
            taus.push(n);
        }
        let mut blocks = Vec::new();
        let mut fb = Vec::new();
        for w in taus.windows(2) {
            let (a, b) = (w[0], w[1]);
            blocks.push((a..=b).flat_map(|s| (s..=b).map(move |t| (s, t))).map(|(s, t)| pm[s][t].abs()).fold(0.0, f64::max));
            fb.push((a..b).map(|t| (fp[t] - fp[a]).abs()).fold(0.0, f64::max));
        }
        lhs_leaf.push(lr(blocks, r_df));
        f_leaf.push(lr(fb, e.r1));
    }
    let v = quotient(lp_norm(&lhs_leaf, probs, e.q()), lp_norm(&f_leaf, probs, e.q1) * sgn);
    finite(&mut o, v);
    o.measure("vv_pprod_delta_f_ratio", v);

    // Two-parameter r-variation, when the exponents allow it.
    let r = e.r();
    if 1.0 / r < 0.5 + 1.0 / e.r1 {
        let mut vr = Vec::new();
        let mut vf = Vec::new();
        for &l in &leaves {
            let pm = pi.path_matrix(l);
            let (s, _) = chain_variation(pm.len(), |i, j| pm[i][j].abs().powf(r));
            vr.push(s.powf(1.0 / r));
            vf.push(variation(&f.path(l), e.r1)?.value);
        }
        let v = quotient(lp_norm(&vr, probs, e.q()), lp_norm(&vf, probs, e.q1) * sgn);
        finite(&mut o, v);
        o.measure("pprod_vr_ratio", v);
    }
    Ok(o)
}

pub(crate) fn paraproduct(ctx: &Ctx) -> Result<CheckReport> {
    let e = Exponents {
        q0: ctx.f64("q0", 2.0)?,
        q1: ctx.f64("q1", 4.0)?,
        r0: ctx.f64("r0", 4.0)?,
        r1: ctx.f64("r1", 4.0)?,
    };
    if !(e.q0 >= 1.0 && e.q1 > 0.0 && e.r0 >= 1.0 && e.r1 >= 1.0) {
        return Err(Error::InvalidParameter("paraproduct needs q0, r0, r1 >= 1 and q1 > 0".into()));
    }
    let k = ctx.usize("k", 3)?;
    if k == 0 || k > 32 {
        return Err(Error::InvalidParameter(format!("paraproduct needs 1 <= k <= 32, got {k}")));
    }
    let depth = ctx.depth(6);
    let n = ctx.trials(1_000);
    let seed = ctx.seed_for("family");
    let run = run_trials(n, |i| {
        let mut g = rng::stream(seed, i as u64);
        let fam = family(&mut g, 2 * k, depth)?;
        paraproduct_trial(&fam, e, &mut g)
    })?;
    Ok(ctx.report(1.0, run))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_member_reduces_to_doob() {
        let mut g = rng::stream(9, 0);
        let fam = family(&mut g, 1, 5).unwrap();
        let o = vector_trial(&fam, 2.0, 2.0, 2.0, &mut g).unwrap();
        let get = |k: &str| o.maxima.iter().find(|(n, _)| n == k).unwrap().1;
        // With one member every ℓ^r collapses to |·|.
        assert!((get("fubini_ratio") - get("sup_ratio")).abs() < 1e-12);
        assert!(o.ratio.unwrap() <= 1.0);
    }

    #[test]
    fn zero_f_gives_zero_paraproduct() {
        let mut g = rng::stream(2, 0);
        let mut fam = family(&mut g, 2, 4).unwrap();
        fam[0] = fam[0].scaled(0.0);
        let e = Exponents { q0: 2.0, q1: 4.0, r0: 4.0, r1: 4.0 };
        let o = paraproduct_trial(&fam, e, &mut g).unwrap();
        let get = |k: &str| o.maxima.iter().find(|(n, _)| n == k).unwrap().1;
        assert_eq!(get("vv_pprod_ratio"), 0.0);
        assert_eq!(get("chen_residual"), 0.0);
    }
}
