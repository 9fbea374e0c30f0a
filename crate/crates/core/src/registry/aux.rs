//! Auxiliary lemmas: Garsia–Neveu, sum of conditional expectations,
//! truncated moments, good-λ, the `s`/`S` comparisons, and the layer-cake
//! formulas they rest on.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde_json::Value;

use super::quad::{garsia_neveu_kernel, truncation_kernel};
use super::{quotient, run_check, run_qualifying, run_trials, CheckConfig, Ctx, Outcome, Real};
use crate::error::{Error, Result};
use crate::generators::{random_tree, GeneratorSpec, TreeShape};
use crate::ops::functionals::{self, maximal, square_function};
use crate::ops::norms::{lp_norm, moment};
use crate::process::Martingale;
use crate::registry::CheckReport;
use crate::rng;
use crate::tree::FiltrationTree;

const QUALIFY_CAP: usize = 20;

/// Every positive threshold at which a piecewise-constant function of `λ`
/// with jumps at `breaks` can change, plus one point inside each gap and one
/// beyond each end.
fn scan_points(breaks: &mut Vec<f64>) -> Vec<f64> {
    breaks.retain(|b| *b > 0.0 && b.is_finite());
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let mut out = Vec::with_capacity(2 * breaks.len() + 2);
    if let (Some(&lo), Some(&hi)) = (breaks.first(), breaks.last()) {
        out.push(0.5 * lo);
        for w in breaks.windows(2) {
            out.push(w[0]);
            out.push(0.5 * (w[0] + w[1]));
        }
        out.push(hi);
        out.push(2.0 * hi);
    } else {
        out.push(1.0);
    }
    out
}

/// Positive random variables `W`, `Z` on the leaves of a tree, with weights.
pub(crate) struct Pair {
    pub probs: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
}

impl Pair {
    fn mass_where(&self, pred: impl Fn(usize) -> bool, val: impl Fn(usize) -> f64) -> f64 {
        (0..self.probs.len()).filter(|&i| pred(i)).map(|i| self.probs[i] * val(i)).sum()
    }
}

/// `E((W − λ) 1_{W>λ}) ≤ E(Z 1_{W>λ})` for every `λ > 0`. Between
/// consecutive values of `W` the left side decreases while the right side is
/// constant, so it suffices to test `λ → 0+` and each value of `W`.
pub(crate) fn garsia_neveu_hypothesis(pair: &Pair) -> bool {
    let mut lams: Vec<f64> = pair.w.clone();
    lams.retain(|&v| v > 0.0);
    lams.push(0.0);
    lams.iter().all(|&l| {
        let lhs = pair.mass_where(|i| pair.w[i] > l, |i| pair.w[i] - l);
        let rhs = pair.mass_where(|i| pair.w[i] > l, |i| pair.z[i]);
        lhs <= rhs + 1e-12 * (1.0 + rhs.abs())
    })
}

/// A random predictable increasing process `A` (with `A_0 = 0`) and
/// `ξ = θ A_∞ + |noise|`.
fn garsia_neveu_sample<R: Rng>(rng: &mut R, max_depth: usize) -> Result<(Arc<FiltrationTree>, Vec<f64>, Vec<f64>)> {
    let depth = rng.random_range(1..=max_depth.max(1));
    let tree = Arc::new(random_tree(depth, TreeShape::default(), rng)?);
    let mut a = vec![0.0; tree.node_count()];
    for p in 0..tree.level(depth).start {
        let da: f64 = if rng.random_bool(0.3) { 0.0 } else { Exp::new(1.0).expect("rate").sample(rng) };
        for c in tree.children(p) {
            a[c] = a[p] + da;
        }
    }
    let theta = rng.random_range(0.3..=1.0);
    let sigma = rng.random_range(0.01..1.0);
    let a_inf = a[tree.leaves()].to_vec();
    let xi = a_inf
        .iter()
        .map(|&v| theta * v + (sigma * rng.sample::<f64, _>(StandardNormal)).abs() + 1e-12)
        .collect();
    Ok((tree, a, xi))
}

/// `E_t(A_∞ − A_t) ≤ E_t ξ` on every node.
fn corollary_hypothesis(tree: &FiltrationTree, a: &[f64], xi: &[f64]) -> bool {
    let depth = tree.depth();
    let a_inf = &a[tree.leaves()];
    (0..=depth).all(|n| {
        let ea = tree.average_up(a_inf, depth, n).expect("level in range");
        let ex = tree.average_up(xi, depth, n).expect("level in range");
        tree.level(n).enumerate().all(|(i, node)| ea[i] - a[node] <= ex[i] + 1e-12 * (1.0 + ex[i].abs()))
    })
}

pub(crate) fn garsia_neveu(ctx: &Ctx) -> Result<CheckReport> {
    let ps = ctx.f64_list("p", &[1.0, 1.5, 2.0, 3.0])?;
    if ps.iter().any(|&p| !(p >= 1.0)) {
        return Err(Error::InvalidParameter("garsia_neveu needs p >= 1".into()));
    }
    let depth = ctx.depth(6);
    let target = ctx.trials(1_000);
    let seed = ctx.seed_for("pairs");
    let run = run_qualifying(target, QUALIFY_CAP * target, |i| {
        let mut r = rng::stream(seed, i as u64);
        let (tree, a, xi) = garsia_neveu_sample(&mut r, depth)?;
        let pair = Pair { probs: tree.leaf_probs().to_vec(), w: a[tree.leaves()].to_vec(), z: xi.clone() };
        let cor = corollary_hypothesis(&tree, &a, &xi);
        if !garsia_neveu_hypothesis(&pair) {
            let mut o = Outcome::skipped();
            o.count("corollary_without_lemma", if cor { 1.0 } else { 0.0 });
            return Ok(o);
        }
        let mut o = Outcome::new();
        o.count("corollary_hypothesis_held", if cor { 1.0 } else { 0.0 });
        for &p in &ps {
            let lhs = lp_norm(&pair.w, &pair.probs, p);
            let rhs = lp_norm(&pair.z, &pair.probs, p);
            o.assert_le(lhs, p, rhs).measure(format!("ratio_p{p}"), quotient(lhs, p * rhs));
        }
        Ok(o)
    })?;
    Ok(ctx.report(ps[0], run))
}

/// Positive adapted `z_k` on a random tree; per leaf `W = Σ E_{k−1} z_k`,
/// `Z = Σ z_k` and `Mz = max z_k`.
pub(crate) struct ZFamily {
    pub probs: Vec<f64>,
    pub w: Vec<f64>,
    pub z: Vec<f64>,
    pub mz: Vec<f64>,
}

fn z_family<R: Rng>(rng: &mut R, max_depth: usize) -> Result<ZFamily> {
    let depth = rng.random_range(1..=max_depth.max(1));
    let tree = random_tree(depth, TreeShape::default(), rng)?;
    let exp = Exp::new(1.0).expect("rate");
    let mut z = vec![0.0; tree.node_count()];
    for p in 0..tree.level(depth).start {
        let scale = rng.random_range(0.1..3.0);
        for c in tree.children(p) {
            z[c] = scale * exp.sample(rng) + 1e-9;
        }
    }
    let n = tree.node_count();
    let (mut w, mut zs, mut mz) = (vec![0.0f64; n], vec![0.0f64; n], vec![0.0f64; n]);
    for p in 0..tree.level(depth).start {
        let ez: f64 = tree.children(p).map(|c| tree.cond_prob(c) * z[c]).sum();
        for c in tree.children(p) {
            w[c] = w[p] + ez;
            zs[c] = zs[p] + z[c];
            mz[c] = mz[p].max(z[c]);
        }
    }
    let leaves = tree.leaves();
    Ok(ZFamily {
        probs: tree.leaf_probs().to_vec(),
        w: w[leaves.clone()].to_vec(),
        z: zs[leaves.clone()].to_vec(),
        mz: mz[leaves].to_vec(),
    })
}

pub(crate) fn sum_of_ek_trial(fam: &ZFamily, ps: &[f64]) -> Outcome {
    let mut o = Outcome::new();
    for &p in ps {
        let lhs = moment(&fam.w, &fam.probs, p);
        let rhs = moment(&fam.z, &fam.probs, p);
        let c = p.powf(p);
        o.assert_le(lhs, c, rhs).measure(format!("ratio_p{p}"), quotient(lhs, c * rhs));
    }
    o
}

pub(crate) fn sum_of_ek(ctx: &Ctx) -> Result<CheckReport> {
    let ps = ctx.f64_list("p", &[1.0, 1.5, 2.0, 3.0])?;
    if ps.iter().any(|&p| !(p >= 1.0)) {
        return Err(Error::InvalidParameter("sum_of_ek needs p >= 1".into()));
    }
    let depth = ctx.depth(6);
    let n = ctx.trials(1_000);
    let seed = ctx.seed_for("z");
    let run = run_trials(n, |i| Ok(sum_of_ek_trial(&z_family(&mut rng::stream(seed, i as u64), depth)?, &ps)))?;
    Ok(ctx.report(ps[0].powf(ps[0]), run))
}

/// `E(Z ∧ λ) ≤ C E(W ∧ λ)` for all `λ > 0`. Both sides are concave and
/// piecewise linear with kinks at the values, so checking the kinks and
/// `λ → ∞` suffices (at `λ → 0+` the slopes are `1 ≤ C`).
pub(crate) fn truncation_hypothesis(z: &[f64], w: &[f64], probs: &[f64], c: f64) -> bool {
    let e_min = |x: &[f64], l: f64| x.iter().zip(probs).map(|(v, p)| p * v.min(l)).sum::<f64>();
    let ok = |l: f64| {
        let (a, b) = (e_min(z, l), c * e_min(w, l));
        a <= b + 1e-12 * (1.0 + b.abs())
    };
    z.iter().chain(w).all(|&l| ok(l)) && ok(f64::INFINITY) && c >= 1.0
}

pub(crate) fn truncation(ctx: &Ctx) -> Result<CheckReport> {
    let ps = ctx.f64_list("p", &[0.25, 0.5, 0.75, 1.0])?;
    if ps.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
        return Err(Error::InvalidParameter("truncation needs 0 < p <= 1".into()));
    }
    let c = ctx.f64("c", 2.0)?;
    let depth = ctx.depth(6);
    let target = ctx.trials(1_000);
    let seed = ctx.seed_for("z");
    let run = run_qualifying(target, QUALIFY_CAP * target, |i| {
        let fam = z_family(&mut rng::stream(seed, i as u64), depth)?;
        if !truncation_hypothesis(&fam.z, &fam.w, &fam.probs, c) {
            return Ok(Outcome::skipped());
        }
        let mut o = Outcome::new();
        for &p in &ps {
            let lhs = moment(&fam.z, &fam.probs, p);
            let rhs = moment(&fam.w, &fam.probs, p);
            o.assert_le(lhs, c, rhs).measure(format!("ratio_p{p}"), quotient(lhs, c * rhs));
        }
        Ok(o)
    })?;
    Ok(ctx.report(c, run))
}

/// `μ{g > βλ, f ≤ δλ} ≤ ε μ{g > λ}` at every threshold where either side can
/// change.
pub(crate) fn good_lambda_hypothesis(g: &[f64], f: &[f64], probs: &[f64], beta: f64, delta: f64, eps: f64) -> bool {
    let mut breaks: Vec<f64> = g.iter().map(|v| v / beta).chain(f.iter().map(|v| v / delta)).chain(g.iter().copied()).collect();
    scan_points(&mut breaks).into_iter().all(|l| {
        let mut lhs = 0.0;
        let mut rhs = 0.0;
        for i in 0..probs.len() {
            if g[i] > beta * l && f[i] <= delta * l {
                lhs += probs[i];
            }
            if g[i] > l {
                rhs += probs[i];
            }
        }
        lhs <= eps * rhs + 1e-12
    })
}

pub(crate) fn good_lambda(ctx: &Ctx) -> Result<CheckReport> {
    let ps = ctx.f64_list("p", &[0.5, 1.0, 2.0])?;
    let beta = ctx.f64("beta", 2.0)?;
    let delta = ctx.f64("delta", 0.1)?;
    if !(beta > 1.0 + delta && delta > 0.0) {
        return Err(Error::InvalidParameter(format!("good_lambda needs beta > 1 + delta > 1, got {beta}, {delta}")));
    }
    let eps = delta / (beta - 1.0 - delta);
    if let Some(p) = ps.iter().find(|&&p| !(p > 0.0 && beta.powf(p) * eps < 1.0)) {
        return Err(Error::InvalidParameter(format!("good_lambda needs beta^p eps < 1, fails at p = {p}")));
    }
    let depth = ctx.depth(6);
    let target = ctx.trials(1_000);
    let seed = ctx.seed_for("z");
    let run = run_qualifying(target, QUALIFY_CAP * target, |i| {
        let fam = z_family(&mut rng::stream(seed, i as u64), depth)?;
        let g = &fam.z;
        let f: Vec<f64> = fam.w.iter().zip(&fam.mz).map(|(a, b)| a.max(*b)).collect();
        if !good_lambda_hypothesis(g, &f, &fam.probs, beta, delta, eps) {
            return Ok(Outcome::skipped());
        }
        let mut o = Outcome::new();
        for &p in &ps {
            let c = delta.powf(-p) / (beta.powf(-p) - eps);
            let lhs = moment(g, &fam.probs, p);
            let rhs = moment(&f, &fam.probs, p);
            o.assert_le(lhs, c, rhs).measure(format!("ratio_p{p}"), quotient(lhs, c * rhs));
        }
        Ok(o)
    })?;
    let p0 = ps[0];
    Ok(ctx.report(delta.powf(-p0) / (beta.powf(-p0) - eps), run))
}

pub(crate) fn predictable_square_trial(f: &Martingale, ps_s: &[f64], ps_m: &[f64]) -> Outcome {
    let mut o = Outcome::new();
    let f = f.centered();
    let probs = f.tree().leaf_probs();
    let sf = functionals::predictable_square(&f);
    let big_s = square_function(&f);
    let mf = maximal(&f);
    for &p in ps_s {
        let c = (p / 2.0).sqrt();
        let lhs = lp_norm(sf.leaf_values(), probs, p);
        let rhs = lp_norm(big_s.leaf_values(), probs, p);
        o.assert_le(lhs, c, rhs).measure(format!("s_over_S_p{p}"), quotient(lhs, c * rhs));
    }
    for &p in ps_m {
        let c = 5f64.powf(1.0 / p);
        let lhs = lp_norm(mf.leaf_values(), probs, p);
        let rhs = lp_norm(sf.leaf_values(), probs, p);
        o.assert_le(lhs, c, rhs).measure(format!("M_over_s_p{p}"), quotient(lhs, c * rhs));
    }
    o
}

pub(crate) fn predictable_square(ctx: &Ctx) -> Result<CheckReport> {
    let ps_s = ctx.f64_list("p_s", &[2.0, 4.0])?;
    let ps_m = ctx.f64_list("p_m", &[0.5, 1.0, 2.0])?;
    if ps_s.iter().any(|&p| !(p >= 2.0)) || ps_m.iter().any(|&p| !(p > 0.0 && p <= 2.0)) {
        return Err(Error::InvalidParameter("predictable_square needs p_s >= 2 and 0 < p_m <= 2".into()));
    }
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(6) });
    let n = ctx.trials(1_000);
    let run = run_trials(n, |i| {
        Ok(match ctx.martingale(&gen, i)? {
            Ok(f) => predictable_square_trial(&f, &ps_s, &ps_m),
            Err(_) => Outcome::not_martingale(),
        })
    })?;
    Ok(ctx.report((ps_s[0] / 2.0).sqrt(), run))
}

/// `t^p = p(p−1) ∫_0^t (t−λ) λ^{p−2} dλ` for `p > 1` and
/// `t^p = p(1−p) ∫_0^∞ (t∧λ) λ^{p−2} dλ` for `p < 1`, by quadrature. The
/// measurements record the relative error of the other sign convention.
pub(crate) fn layer_cake(ctx: &Ctx) -> Result<CheckReport> {
    let n = ctx.trials(1_000);
    let seed = ctx.seed_for("points");
    let run = run_trials(n, |i| {
        let mut r = rng::stream(seed, i as u64);
        let t = 10f64.powf(r.random_range(-2.0..2.0));
        let p_hi = r.random_range(1.05..5.0);
        let p_lo = r.random_range(0.05..0.95);
        let tp_hi = t.powf(p_hi);
        let tp_lo = t.powf(p_lo);
        let k_gn = garsia_neveu_kernel(t, p_hi);
        let k_tr = truncation_kernel(t, p_lo);
        let mut o = Outcome::new();
        o.assert_small((p_hi * (p_hi - 1.0) * k_gn - tp_hi) / tp_hi, 1e-8);
        o.assert_small((p_lo * (1.0 - p_lo) * k_tr - tp_lo) / tp_lo, 1e-8);
        o.measure("garsia_neveu_p_one_minus_p_error", ((p_hi * (1.0 - p_hi) * k_gn - tp_hi) / tp_hi).abs())
            .measure("truncation_p_minus_one_error", ((p_lo * (p_lo - 1.0) * k_tr - tp_lo) / tp_lo).abs());
        Ok(o)
    })?;
    Ok(ctx.report(1.0, run))
}

/// All auxiliary lemma checks, with summed counts and the largest ratio.
pub(crate) fn aux_lemmas(ctx: &Ctx) -> Result<CheckReport> {
    const SUBS: [&str; 6] = ["garsia_neveu", "sum_of_ek", "truncation", "good_lambda", "predictable_square", "layer_cake"];
    let mut out = ctx.report(1.0, super::Run { outcomes: Vec::new() });
    let mut measurements = BTreeMap::new();
    for name in SUBS {
        let cfg = CheckConfig {
            check: name.to_owned(),
            params: BTreeMap::new(),
            trials: ctx.cfg.trials,
            depth: ctx.cfg.depth,
            seed: ctx.seed,
            tol: Some(ctx.tol),
            corpus: None,
        };
        let rep = run_check(&cfg)?;
        out.trials += rep.trials;
        out.violations += rep.violations;
        out.hypothesis_failures += rep.hypothesis_failures;
        if rep.worst_ratio.0 > out.worst_ratio.0 || rep.worst_ratio.0.is_nan() {
            out.worst_ratio = rep.worst_ratio;
        }
        measurements.insert(format!("{name}/trials"), Real(rep.trials as f64));
        measurements.insert(format!("{name}/violations"), Real(rep.violations as f64));
        measurements.insert(format!("{name}/hypothesis_failures"), Real(rep.hypothesis_failures as f64));
        measurements.insert(format!("{name}/worst_ratio"), rep.worst_ratio);
        for (k, v) in rep.measurements {
            measurements.insert(format!("{name}/{k}"), v);
        }
    }
    out.params.insert("sub_checks".into(), Value::from(SUBS.to_vec()));
    out.measurements = measurements;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(w: &[f64], z: &[f64]) -> Pair {
        let n = w.len() as f64;
        Pair { probs: vec![1.0 / n; w.len()], w: w.to_vec(), z: z.to_vec() }
    }

    #[test]
    fn constant_pair_satisfies_hypothesis() {
        assert!(garsia_neveu_hypothesis(&pair(&[2.0, 2.0], &[2.0, 2.0])));
        assert!(!garsia_neveu_hypothesis(&pair(&[4.0, 0.0], &[0.1, 0.1])));
    }

    #[test]
    fn predictable_process_with_its_limit_is_equality() {
        let mut r = rng::stream(4, 0);
        let (tree, a, _) = garsia_neveu_sample(&mut r, 5).unwrap();
        let a_inf = a[tree.leaves()].to_vec();
        assert!(corollary_hypothesis(&tree, &a, &a_inf));
        let p = Pair { probs: tree.leaf_probs().to_vec(), w: a_inf.clone(), z: a_inf };
        assert!(garsia_neveu_hypothesis(&p));
    }

    #[test]
    fn deterministic_z_gives_equality() {
        // z_k deterministic: W = Z on every path.
        let fam = ZFamily { probs: vec![0.5, 0.5], w: vec![3.0, 3.0], z: vec![3.0, 3.0], mz: vec![2.0, 2.0] };
        let o = sum_of_ek_trial(&fam, &[1.0]);
        let r = o.maxima[0].1;
        assert_eq!(r, 1.0);
    }

    #[test]
    fn equal_pair_truncation_with_unit_constant() {
        let z = [1.0, 2.0, 5.0];
        assert!(truncation_hypothesis(&z, &z, &[0.2, 0.3, 0.5], 1.0));
        assert!(!truncation_hypothesis(&[5.0, 5.0, 5.0], &z, &[0.2, 0.3, 0.5], 1.0));
    }

    #[test]
    fn good_lambda_hypothesis_detects_failure() {
        // g large where f is tiny on half the mass: fails for small ε.
        assert!(!good_lambda_hypothesis(&[10.0, 1.0], &[0.0, 0.0], &[0.5, 0.5], 2.0, 0.1, 0.01));
        assert!(good_lambda_hypothesis(&[1.0, 1.0], &[1.0, 1.0], &[0.5, 0.5], 2.0, 0.1, 0.01));
    }
}
