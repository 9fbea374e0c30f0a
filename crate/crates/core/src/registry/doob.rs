//! Doob's maximal inequality, the weak-type square function bound, and the
//! weighted weak-type Doob inequality.

use rand::Rng;
use rand_distr::{Distribution, LogNormal};

use super::{quotient, run_trials, Ctx, Outcome};
use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::ops::functionals::{maximal, square_function};
use crate::ops::level_sets::upper_level_sets;
use crate::ops::norms::{conjugate, lp_norm, mean};
use crate::ops::weighted::weighted_maximal_data;
use crate::process::{Martingale, TreeProcess};
use crate::registry::CheckReport;
use crate::rng;

fn leaf_probs(f: &TreeProcess) -> &[f64] {
    f.tree().leaf_probs()
}

/// Strong `‖Mf_N‖_p ≤ p′ ‖f_N‖_p` and, at every level, the weak form
/// `λ |{Mf_n > λ}| ≤ ∫_{Mf_n > λ} |f_n|`.
pub(crate) fn doob_trial(f: &Martingale, p: f64) -> Outcome {
    let mut o = Outcome::new();
    let t = f.tree();
    let mf = maximal(f);
    let probs = leaf_probs(f);
    let pc = conjugate(p);
    let lhs = lp_norm(mf.leaf_values(), probs, p);
    let rhs = lp_norm(f.leaf_values(), probs, p);
    o.assert_le(lhs, pc, rhs).measure("strong_ratio", quotient(lhs, pc * rhs));
    let mut weak = 0.0f64;
    for n in 0..=t.depth() {
        let lvl = t.level(n);
        let mass = &t.probs()[lvl.clone()];
        let y: Vec<f64> = lvl.map(|a| t.prob(a) * f.value(a).abs()).collect();
        for pt in upper_level_sets(mf.at_level(n), mass, &y) {
            o.assert_le(pt.lambda * pt.mass, 1.0, pt.integral);
            weak = weak.max(quotient(pt.lambda * pt.mass, pt.integral));
        }
    }
    o.measure("weak_ratio", weak);
    o
}

pub(crate) fn doob(ctx: &Ctx) -> Result<CheckReport> {
    let p = ctx.f64("p", 2.0)?;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("doob needs p > 1, got {p}")));
    }
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(8) });
    let n = ctx.trials(10_000);
    let run = run_trials(n, |i| {
        Ok(match ctx.martingale(&gen, i)? {
            Ok(f) => doob_trial(&f, p),
            Err(_) => Outcome::not_martingale(),
        })
    })?;
    Ok(ctx.report(conjugate(p), run))
}

/// `|{Sf > λ}| ≤ 3‖f‖₁/λ` at every breakpoint, and
/// `Σ_k E(|df_k|² 1_{τ>k}) ≤ 2λ‖f‖₁` for `τ = inf{n : |f_n| > λ}`.
pub(crate) fn square_weak_trial(f: &Martingale) -> Outcome {
    let mut o = Outcome::new();
    let t = f.tree();
    let probs = leaf_probs(f);
    let l1 = mean(&f.leaf_values().iter().map(|v| v.abs()).collect::<Vec<_>>(), probs);
    let sf = square_function(f);
    let zeros = vec![0.0; probs.len()];
    let mut weak = 0.0f64;
    for pt in upper_level_sets(sf.leaf_values(), probs, &zeros) {
        o.assert_le(pt.lambda * pt.mass, 3.0, l1);
        weak = weak.max(quotient(pt.lambda * pt.mass, 3.0 * l1));
    }
    o.measure("weak_ratio", weak);

    // {τ > k} at a level-k node a is {Mf(a) ≤ λ}, so the stopped sum at λ is
    // the total weight of nodes with Mf ≤ λ.
    let mf = maximal(f);
    let mut nodes: Vec<(f64, f64)> = (1..t.node_count())
        .map(|a| (mf.value(a), t.prob(a) * f.increment(a).powi(2)))
        .collect();
    nodes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    let mut look = 0.0f64;
    let mut i = 0;
    while i < nodes.len() {
        let v = nodes[i].0;
        while i < nodes.len() && nodes[i].0 == v {
            acc += nodes[i].1;
            i += 1;
        }
        if v > 0.0 {
            o.assert_le(acc, 2.0, v * l1);
            look = look.max(quotient(acc, 2.0 * v * l1));
        }
    }
    o.measure("lookahead_ratio", look);
    o
}

pub(crate) fn square_weak(ctx: &Ctx) -> Result<CheckReport> {
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(8) });
    let n = ctx.trials(10_000);
    let run = run_trials(n, |i| {
        Ok(match ctx.martingale(&gen, i)? {
            Ok(f) => square_weak_trial(&f),
            Err(_) => Outcome::not_martingale(),
        })
    })?;
    Ok(ctx.report(3.0, run))
}

pub(crate) fn weighted_trial(f: &Martingale, w: &[f64], p: f64) -> Result<Outcome> {
    let mut o = Outcome::new();
    let t = f.tree();
    let fa = f.abs();
    let depth = t.depth();
    let mut weak = 0.0f64;
    for n in [depth / 2, depth] {
        for pt in weighted_maximal_data(&fa, w, n)? {
            o.assert_le(pt.lhs, 1.0, pt.rhs);
            weak = weak.max(quotient(pt.lhs, pt.rhs));
        }
    }
    o.measure("weak_ratio", weak);
    let wm = Martingale::from_leaves(t.clone(), w)?;
    let mw = maximal(&wm);
    let mf = maximal(&fa);
    let probs = leaf_probs(f);
    let lhs: f64 = (0..probs.len()).map(|i| probs[i] * w[i] * mf.leaf_values()[i].powf(p)).sum();
    let rhs: f64 =
        (0..probs.len()).map(|i| probs[i] * mw.leaf_values()[i] * fa.leaf_values()[i].powf(p)).sum();
    o.measure(format!("strong_ratio_p{p}"), quotient(lhs.powf(1.0 / p), rhs.powf(1.0 / p)));
    Ok(o)
}

pub(crate) fn weighted_doob(ctx: &Ctx) -> Result<CheckReport> {
    let p = ctx.f64("p", 2.0)?;
    if !(p > 1.0) {
        return Err(Error::InvalidParameter(format!("weighted_doob needs p > 1, got {p}")));
    }
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(8) });
    let n = ctx.trials(1_000);
    let wseed = ctx.seed_for("weight");
    let run = run_trials(n, |i| {
        let f = match ctx.martingale(&gen, i)? {
            Ok(f) => f,
            Err(_) => return Ok(Outcome::not_martingale()),
        };
        let mut r = rng::stream(wseed, i as u64);
        let sigma = r.random_range(0.1..2.0);
        let dist = LogNormal::new(0.0, sigma).expect("positive sigma");
        let w: Vec<f64> = (0..f.tree().leaf_count()).map(|_| dist.sample(&mut r)).collect();
        weighted_trial(&f, &w, p)
    })?;
    Ok(ctx.report(1.0, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_doubling, gen_walk};
    use crate::tree::FiltrationTree;
    use std::sync::Arc;

    #[test]
    fn constant_martingale_half_ratio() {
        let t = Arc::new(FiltrationTree::uniform(2, 3).unwrap());
        let f = Martingale::new(TreeProcess::constant(t, 1.5)).unwrap();
        let o = doob_trial(&f, 2.0);
        let strong = o.maxima.iter().find(|(k, _)| k == "strong_ratio").unwrap().1;
        assert!((strong - 0.5).abs() < 1e-15);
        assert!(o.ratio.unwrap() <= 1.0);
    }

    #[test]
    fn doubling_with_p_three_halves() {
        let f = gen_doubling(10).unwrap();
        let o = doob_trial(&f, 1.5);
        assert!(o.ratio.unwrap() <= 1.0 + 1e-9);
    }

    #[test]
    fn square_weak_examples() {
        let t = Arc::new(FiltrationTree::uniform(2, 3).unwrap());
        let zero = Martingale::new(TreeProcess::constant(t, 0.0)).unwrap();
        assert_eq!(square_weak_trial(&zero).ratio, Some(0.0));
        assert!(square_weak_trial(&gen_walk(6, 1.0).unwrap()).ratio.unwrap() <= 1.0);
        assert!(square_weak_trial(&gen_doubling(8).unwrap()).ratio.unwrap() <= 1.0);
    }

    #[test]
    fn lookahead_matches_stopping_time_definition() {
        use crate::stopping::hitting_time;
        let f = gen_walk(4, 1.0).unwrap();
        let t = f.tree().clone();
        for lambda in [0.5, 1.0, 2.0, 3.0] {
            let tau = hitting_time(&f, |x| x.abs() > lambda);
            let stop = tau.stop_node();
            // Σ_k E(|df_k|² 1_{τ > k}): nodes with no mark on the path up to them.
            let direct: f64 =
                (1..t.node_count()).filter(|&a| stop[a].is_none()).map(|a| t.prob(a) * f.increment(a).powi(2)).sum();
            let mf = maximal(&f);
            let via_max: f64 = (1..t.node_count())
                .filter(|&a| mf.value(a) <= lambda)
                .map(|a| t.prob(a) * f.increment(a).powi(2))
                .sum();
            assert_eq!(direct, via_max);
        }
    }
}
