//! The pathwise `r`-variation bound built from greedy stopping partitions.

use super::{quotient, run_trials, Ctx, Outcome};
use crate::error::{Error, Result};
use crate::generators::GeneratorSpec;
use crate::ops::functionals::maximal;
use crate::ops::lepingle::{comparable_jump_failures, lepingle_pathwise_bound};
use crate::ops::norms::lp_norm;
use crate::ops::variation::variation;
use crate::process::Martingale;
use crate::registry::CheckReport;

pub(crate) fn lepingle_trial(f: &Martingale, rs: &[f64], p: f64) -> Result<Outcome> {
    let mut o = Outcome::new();
    let t = f.tree();
    let probs = t.leaf_probs();
    let paths: Vec<Vec<f64>> = t.leaves().map(|l| f.path(l)).collect();
    let mf = lp_norm(maximal(f).leaf_values(), probs, p);
    for &r in rs {
        let mut worst = 0.0f64;
        let mut fails = 0usize;
        let mut vr = Vec::with_capacity(paths.len());
        for path in &paths {
            let (lhs, rhs) = lepingle_pathwise_bound(path, r)?;
            o.assert_le(lhs, 1.0, rhs);
            worst = worst.max(quotient(lhs, rhs));
            fails += comparable_jump_failures(path, r)?;
            vr.push(variation(path, r)?.value);
        }
        if fails > 0 {
            o.push_ratio(f64::INFINITY);
        }
        o.count(format!("comparable_jump_failures_r{r}"), fails as f64);
        o.measure(format!("pathwise_ratio_r{r}"), worst);
        let c = r / (r - 2.0);
        o.measure(format!("moment_ratio_r{r}"), quotient(lp_norm(&vr, probs, p), c * mf));
    }
    Ok(o)
}

pub(crate) fn lepingle(ctx: &Ctx) -> Result<CheckReport> {
    let rs = ctx.f64_list("r", &[2.5, 3.0, 4.0])?;
    if let Some(r) = rs.iter().find(|&&r| !(r > 2.0)) {
        return Err(Error::InvalidParameter(format!("lepingle needs r > 2, got {r}")));
    }
    let p = ctx.f64("p", 1.0)?;
    if !(p > 0.0) {
        return Err(Error::InvalidParameter(format!("lepingle needs p > 0, got {p}")));
    }
    let gen = ctx.generator(GeneratorSpec::RandomWalk { depth: ctx.depth(10) });
    let n = ctx.trials(1_000);
    let run = run_trials(n, |i| match ctx.martingale(&gen, i)? {
        Ok(f) => lepingle_trial(&f, &rs, p),
        Err(_) => Ok(Outcome::not_martingale()),
    })?;
    Ok(ctx.report(8.0, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_walk;

    #[test]
    fn walk_satisfies_bound() {
        let f = gen_walk(8, 1.0).unwrap();
        let o = lepingle_trial(&f, &[2.5, 3.0], 1.0).unwrap();
        assert!(o.ratio.unwrap() <= 1.0);
        assert!(o.counts.iter().all(|(_, v)| *v == 0.0));
    }
}
