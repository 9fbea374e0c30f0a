//! Greedy stopping partitions and the pathwise `r`-variation bound.
//!
//! For `m ≥ 2` the partition `τ^{(m)}` stops whenever the path has moved by
//! at least `2^{-m} M_t` since the last stop, where `M_t` is the running
//! oscillation. Any jump of the path of size comparable to `2^{-m} M_t` is
//! then dominated by a jump between consecutive stops, which gives
//!
//! ```text
//! V^r(f)^ρ ≤ 8^ρ Σ_{m≥2} 2^{-(m-2)(r-ρ)} Σ_j |f_{τ_j} − f_{τ_{j-1}}|^ρ.
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::TreeProcess;
use crate::stopping::StoppingRule;
use crate::ops::variation::variation;

/// Stopping indices `τ_0 = 0 < τ_1 < …` of one path; indices past the last
/// entry are `∞`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GreedyPartition {
    pub m: u32,
    pub taus: Vec<usize>,
}

/// `M_t = max_{t'' ≤ t' ≤ t} |f_{t'} − f_{t''}|`.
pub fn running_oscillation(path: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(path.len());
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in path {
        lo = lo.min(v);
        hi = hi.max(v);
        out.push(hi - lo);
    }
    out
}

/// `τ_{j+1} = inf{t ≥ τ_j : |f_t − f_{τ_j}| ≥ 2^{-m} M_t, M_t > 0}`.
pub fn lepingle_partition(path: &[f64], m: u32) -> GreedyPartition {
    let osc = running_oscillation(path);
    let scale = 0.5f64.powi(m as i32);
    let mut taus = vec![0];
    let mut last = 0;
    for t in 1..path.len() {
        if osc[t] > 0.0 && (path[t] - path[last]).abs() >= scale * osc[t] {
            taus.push(t);
            last = t;
        }
    }
    GreedyPartition { m, taus }
}

/// Smallest nonzero `|f_a − f_b|` over all pairs.
fn min_pairwise_gap(path: &[f64]) -> Option<f64> {
    let mut v = path.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).map(|w| w[1] - w[0]).filter(|&d| d > 0.0).min_by(f64::total_cmp)
}

/// Levels `m = 2, 3, …` whose partition can carry a witness pair. A pair
/// `(t', t)` with jump `d` is charged to the `m` with
/// `2 < d / (2^{-m} M_t) ≤ 4`, which forces `2^{-m} M_∞ ≥ d / 4`; beyond the
/// smallest nonzero pairwise gap no pair can land. One extra level is kept.
#[allow(clippy::reversed_empty_ranges)]
pub fn lepingle_levels(path: &[f64]) -> std::ops::RangeInclusive<u32> {
    let osc = running_oscillation(path).last().copied().unwrap_or(0.0);
    let Some(dmin) = min_pairwise_gap(path) else {
        return 2..=1;
    };
    let mut m = 2;
    while 0.5f64.powi(m as i32) * osc >= dmin / 4.0 {
        m += 1;
    }
    2..=m
}

/// Both sides of the pathwise bound with exponent `ρ < r`:
/// `(V^r(f)^ρ, 8^ρ Σ_m 2^{-(m-2)(r-ρ)} Σ_j |Δ_j|^ρ)`.
pub fn lepingle_pathwise_bound_rho(path: &[f64], r: f64, rho: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && r > rho) {
        return Err(Error::InvalidParameter(format!("need 0 < ρ < r, got ρ = {rho}, r = {r}")));
    }
    let lhs = variation(path, r)?.value.powf(rho);
    let mut rhs = 0.0;
    for m in lepingle_levels(path) {
        let part = lepingle_partition(path, m);
        let jumps: f64 =
            part.taus.windows(2).map(|w| (path[w[1]] - path[w[0]]).abs().powf(rho)).sum();
        rhs += 0.5f64.powf((m - 2) as f64 * (r - rho)) * jumps;
    }
    Ok((lhs, 8f64.powf(rho) * rhs))
}

/// `(V^r(f)², 64 Σ_{m≥2} 2^{-(m-2)(r-2)} S_(m)²)` for `r > 2`.
pub fn lepingle_pathwise_bound(path: &[f64], r: f64) -> Result<(f64, f64)> {
    if !(r > 2.0) {
        return Err(Error::InvalidParameter(format!("need r > 2, got {r}")));
    }
    lepingle_pathwise_bound_rho(path, r, 2.0)
}

/// Check the comparable-jump claim on every pair of the `r`-variation
/// witness: for the `m` with `2 < d/(2^{-m} M_t) ≤ 4`, the last stop
/// `τ_j ≤ t` satisfies `τ_j > t'` and `d ≤ 8 |f_{τ_j} − f_{τ_{j-1}}|`.
/// Returns the number of failing pairs.
pub fn comparable_jump_failures(path: &[f64], r: f64) -> Result<usize> {
    let osc = running_oscillation(path);
    let witness = variation(path, r)?.witness;
    let mut failures = 0;
    for w in witness.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        let d = (path[t1] - path[t0]).abs();
        if d == 0.0 {
            continue;
        }
        // Smallest m with d / (2^{-m} M_t) > 2.
        let mut m = 2u32;
        while d / (0.5f64.powi(m as i32) * osc[t1]) <= 2.0 {
            m += 1;
        }
        let part = lepingle_partition(path, m);
        let j = part.taus.iter().rposition(|&tau| tau <= t1).expect("τ_0 = 0");
        let ok = part.taus[j] > t0
            && j > 0
            && d <= 8.0 * (path[part.taus[j]] - path[part.taus[j - 1]]).abs() * (1.0 + 1e-12);
        if !ok {
            failures += 1;
        }
    }
    Ok(failures)
}

/// The partition `τ^{(m)}` on a tree as stopping rules `τ_1, τ_2, …` (`τ_0 = 0`
/// omitted). Fails if the per-path construction were not adapted.
pub fn lepingle_rules(f: &TreeProcess, m: u32) -> Result<Vec<StoppingRule>> {
    let t: &Arc<_> = f.tree();
    let parts: Vec<GreedyPartition> = t.leaves().map(|l| lepingle_partition(&f.path(l), m)).collect();
    let count = parts.iter().map(|p| p.taus.len()).max().unwrap_or(1);
    (1..count)
        .map(|j| {
            let times: Vec<Option<usize>> = parts.iter().map(|p| p.taus.get(j).copied()).collect();
            StoppingRule::from_leaf_times(t.clone(), &times)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::gen_walk;

    #[test]
    fn constant_path_never_stops() {
        let p = [1.0; 5];
        assert_eq!(lepingle_partition(&p, 3).taus, vec![0]);
        assert_eq!(lepingle_pathwise_bound(&p, 3.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn alternating_path_stops_every_step() {
        let p = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
        assert_eq!(lepingle_partition(&p, 2).taus, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn two_jump_path() {
        let p = [0.0, 1.0, 1.0, 3.0, 3.0];
        let (lhs, rhs) = lepingle_pathwise_bound(&p, 3.0).unwrap();
        // V^3 = 3 (one jump 0 → 3 beats 1³ + 2³ = 9 < 27).
        assert!((lhs - 9.0).abs() < 1e-12);
        assert!(lhs <= rhs);
        assert_eq!(comparable_jump_failures(&p, 3.0).unwrap(), 0);
    }

    #[test]
    fn rules_are_adapted_on_a_walk() {
        let f = gen_walk(6, 1.0).unwrap();
        for m in 2..5 {
            let rules = lepingle_rules(&f, m).unwrap();
            let leaves: Vec<usize> = f.tree().leaves().collect();
            for (j, rule) in rules.iter().enumerate() {
                for (i, tau) in rule.leaf_times().into_iter().enumerate() {
                    let want = lepingle_partition(&f.path(leaves[i]), m).taus.get(j + 1).copied();
                    assert_eq!(tau, want);
                }
            }
        }
    }

    #[test]
    fn rejects_small_r() {
        assert!(lepingle_pathwise_bound(&[0.0, 1.0], 2.0).is_err());
    }
}
