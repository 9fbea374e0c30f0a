//! Optional sampling as a numerical identity.

use std::sync::Arc;

use rand::Rng;

use super::{run_trials, Ctx, Outcome};
use crate::error::Result;
use crate::generators::GeneratorSpec;
use crate::process::Martingale;
use crate::registry::CheckReport;
use crate::rng;
use crate::stopping::{optional_sampling_residual, StoppingRule};
use crate::tree::FiltrationTree;

/// Random marks with a random density; bounded rules also mark every leaf.
pub(crate) fn random_rule<R: Rng + ?Sized>(tree: &Arc<FiltrationTree>, bounded: bool, rng: &mut R) -> StoppingRule {
    let q = rng.random_range(0.0..0.6);
    let leaves = tree.leaves();
    let marks = (0..tree.node_count()).map(|a| (bounded && leaves.contains(&a)) || rng.random_bool(q)).collect();
    StoppingRule::new(tree.clone(), marks).expect("one mark per node")
}

pub(crate) fn optional_sampling_trial<R: Rng + ?Sized>(f: &Martingale, rng: &mut R) -> Result<Outcome> {
    let t = f.tree();
    let sigma = random_rule(t, rng.random_bool(0.5), rng);
    let tau = random_rule(t, true, rng);
    let res = optional_sampling_residual(f, &sigma, &tau)?;
    let scale = f.values().iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let mut o = Outcome::new();
    o.assert_small(res, 1e-10 * scale).measure("residual", res / scale);
    Ok(o)
}

pub(crate) fn optional_sampling(ctx: &Ctx) -> Result<CheckReport> {
    let gen = ctx.generator(GeneratorSpec::Mixed { max_depth: ctx.depth(8) });
    let n = ctx.trials(10_000);
    let seed = ctx.seed_for("stopping");
    let run = run_trials(n, |i| match ctx.martingale(&gen, i)? {
        Ok(f) => optional_sampling_trial(&f, &mut rng::stream(seed, i as u64)),
        Err(_) => Ok(Outcome::not_martingale()),
    })?;
    Ok(ctx.report(1.0, run))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_walk;

    #[test]
    fn walk_passes() {
        let f = gen_walk(5, 1.0).unwrap();
        for i in 0..20 {
            let o = optional_sampling_trial(&f, &mut rng::stream(3, i)).unwrap();
            assert!(o.ratio.unwrap() <= 1.0);
        }
    }

    #[test]
    fn bounded_rule_stops_everywhere() {
        let t = Arc::new(FiltrationTree::uniform(2, 4).unwrap());
        let r = random_rule(&t, true, &mut rng::stream(0, 0));
        assert!(r.is_bounded());
    }
}
