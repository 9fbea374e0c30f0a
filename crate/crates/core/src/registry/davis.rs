//! Davis decomposition, Davis/BDG comparisons, and the sharp square-function
//! inequality.

use super::{quotient, run_trials, Ctx, Outcome};
use crate::bellman::{bellman_chain, davis_sides, pathwise_sharp_sides, sharp_quotient_sides, GAMMA};
use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::ops::davis::{davis_decompose, total_variation};
use crate::ops::functionals::{maximal, square_function};
use crate::ops::norms::{lp_norm, mean};
use crate::process::Martingale;
use crate::registry::CheckReport;

fn scale(f: &Martingale) -> f64 {
    f.values().iter().fold(1.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn davis_decomposition_trial(f: &Martingale) -> Outcome {
    let mut o = Outcome::new();
    let t = f.tree();
    let parts = davis_decompose(f);
    let sc = scale(f);

    let sum_res = (0..t.node_count())
        .map(|a| (f.value(a) - parts.f_pred.value(a) - parts.f_bv.value(a)).abs())
        .fold(0.0, f64::max);
    o.assert_small(sum_res, 1e-12 * sc).measure("sum_residual", sum_res);
    o.assert_small(parts.f_pred.martingale_residual().1, 1e-10);
    o.assert_small(parts.f_bv.martingale_residual().1, 1e-10);

    let mut jump = 0.0f64;
    for c in 1..t.node_count() {
        let a = t.parent(c).expect("non-root");
        let d = parts.f_pred.increment(c).abs();
        o.assert_le(d, 2.0, parts.mdf.value(a));
        jump = jump.max(quotient(d, 2.0 * parts.mdf.value(a)));
    }
    o.measure("pred_jump_ratio", jump);

    let probs = t.leaf_probs();
    let bv = mean(&total_variation(&parts.f_bv), probs);
    let emdf = mean(parts.mdf.leaf_values(), probs);
    o.assert_le(bv, 2.0, emdf).measure("bv_ratio", quotient(bv, 2.0 * emdf));

    // Σ|dh_n| telescopes to Mdf_N on every path.
    let tv_h = total_variation(&parts.h);
    let tele = tv_h.iter().zip(parts.mdf.leaf_values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    o.assert_small(tele, 1e-12 * sc);
    o
}

pub(crate) fn davis_decomposition(ctx: &Ctx) -> Result<CheckReport> {
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(8) });
    let n = ctx.trials(10_000);
    let run = run_trials(n, |i| {
        Ok(match ctx.martingale(&gen, i)? {
            Ok(f) => davis_decomposition_trial(&f),
            Err(_) => Outcome::not_martingale(),
        })
    })?;
    Ok(ctx.report(2.0, run))
}

fn sqrt3() -> f64 {
    3f64.sqrt()
}

pub(crate) fn davis_bdg_trial(f: &Martingale, p: f64) -> Outcome {
    let mut o = Outcome::new();
    let f = f.centered();
    let (es, em) = davis_sides(&f);
    o.assert_le(es, sqrt3(), em);
    o.measure("e_sf_over_e_mf", quotient(es, em)).measure("e_mf_over_e_sf", quotient(em, es));
    let probs = f.tree().leaf_probs();
    let sp = lp_norm(square_function(&f).leaf_values(), probs, p);
    let mp = lp_norm(maximal(&f).leaf_values(), probs, p);
    o.measure(format!("lp_sf_over_mf_p{p}"), quotient(sp, mp))
        .measure(format!("lp_mf_over_sf_p{p}"), quotient(mp, sp));
    o
}

pub(crate) fn davis_bdg(ctx: &Ctx) -> Result<CheckReport> {
    let p = ctx.f64("p", 2.0)?;
    if !(p >= 1.0) {
        return Err(Error::InvalidParameter(format!("davis_bdg needs p >= 1, got {p}")));
    }
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(8) });
    let n = ctx.trials(10_000);
    let run = run_trials(n, |i| {
        Ok(match ctx.martingale(&gen, i)? {
            Ok(f) => davis_bdg_trial(&f, p),
            Err(_) => Outcome::not_martingale(),
        })
    })?;
    Ok(ctx.report(sqrt3(), run))
}

pub(crate) fn sharp_davis_trial(f: &Martingale) -> Outcome {
    let mut o = Outcome::new();
    let (es, em) = davis_sides(f);
    o.assert_le(es, sqrt3(), em).measure("davis_ratio", quotient(es, em));
    let (lhs, rhs) = sharp_quotient_sides(f);
    o.assert_le(lhs, 1.0, rhs).measure("quotient_ratio", quotient(lhs, rhs));
    o
}

pub(crate) fn sharp_davis(ctx: &Ctx) -> Result<CheckReport> {
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(8) });
    let n = ctx.trials(10_000);
    let run = run_trials(n, |i| {
        Ok(match ctx.martingale(&gen, i)? {
            Ok(f) => sharp_davis_trial(&f),
            Err(_) => Outcome::not_martingale(),
        })
    })?;
    Ok(ctx.report(sqrt3(), run))
}

pub(crate) fn pathwise_sharp_trial(f: &Martingale) -> Outcome {
    let mut o = Outcome::new();
    let t = f.tree();
    let mut worst = 0.0f64;
    let mut path = Vec::with_capacity(t.depth() + 1);
    for l in t.leaves() {
        path.clear();
        path.extend(t.path_to(l).into_iter().map(|a| f.value(a)));
        let (lhs, rhs) = pathwise_sharp_sides(&path);
        o.assert_le(lhs, 1.0, rhs);
        worst = worst.max(quotient(lhs, rhs));
    }
    o.measure("pathwise_ratio", worst);
    let chain = bellman_chain(f, GAMMA);
    for w in chain.windows(2) {
        o.assert_small((w[1] - w[0]).max(0.0), 1e-10 * (1.0 + w[0].abs()));
    }
    o
}

pub(crate) fn pathwise_sharp(ctx: &Ctx) -> Result<CheckReport> {
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(10) });
    let n = ctx.trials(10_000);
    let run = run_trials(n, |i| {
        Ok(match ctx.martingale(&gen, i)? {
            Ok(f) => pathwise_sharp_trial(&f),
            Err(_) => Outcome::not_martingale(),
        })
    })?;
    Ok(ctx.report(1.0, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_scaled_walk, gen_walk};

    #[test]
    fn single_fair_step() {
        let f = gen_walk(1, 1.0).unwrap();
        let (es, em) = davis_sides(&f);
        assert_eq!((es, em), (1.0, 1.0));
        assert_eq!(sharp_davis_trial(&f).ratio, Some((1.0 - 1e-10) / 3f64.sqrt()));
    }

    #[test]
    fn scaled_walk_ratio_is_below_sqrt3() {
        let f = gen_scaled_walk(16).unwrap();
        let o = davis_bdg_trial(&f, 2.0);
        assert!(o.ratio.unwrap() < 1.0);
        let (es, _) = davis_sides(&f);
        assert!((es - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ratio_is_scale_invariant() {
        let f = gen_walk(6, 1.0).unwrap();
        let (a, b) = davis_sides(&f);
        let (c, d) = davis_sides(&f.scaled(7.25));
        assert!((a / b - c / d).abs() < 1e-12);
    }
}
