//! Exact `r`-variation by dynamic programming over increasing subsequences.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationResult {
    pub value: f64,
    /// Maximising increasing index sequence.
    pub witness: Vec<usize>,
}

/// Maximise `Σ cost(u_{l-1}, u_l)` over increasing chains `u_0 < … < u_L` in
/// `0..n`. Costs must be nonnegative. Returns the maximum and a maximising
/// chain (a single index when every cost vanishes).
pub fn chain_variation(n: usize, cost: impl Fn(usize, usize) -> f64) -> (f64, Vec<usize>) {
    if n == 0 {
        return (0.0, Vec::new());
    }
    let mut best = vec![0.0f64; n];
    let mut prev = vec![usize::MAX; n];
    for j in 1..n {
        for i in 0..j {
            let v = best[i] + cost(i, j);
            if v > best[j] {
                best[j] = v;
                prev[j] = i;
            }
        }
    }
    let mut end = 0;
    for j in 1..n {
        if best[j] > best[end] {
            end = j;
        }
    }
    let mut witness = vec![end];
    while prev[*witness.last().unwrap()] != usize::MAX {
        witness.push(prev[*witness.last().unwrap()]);
    }
    witness.reverse();
    (best[end], witness)
}

/// `V^r` of an `n`-point path with pairwise distance `dist(i, j)`.
pub fn variation_by(n: usize, dist: impl Fn(usize, usize) -> f64, r: f64) -> Result<VariationResult> {
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("variation exponent r = {r}")));
    }
    if r.is_infinite() {
        let mut best = (0.0, if n > 0 { vec![0] } else { Vec::new() });
        for j in 0..n {
            for i in 0..j {
                let d = dist(i, j);
                if d > best.0 {
                    best = (d, vec![i, j]);
                }
            }
        }
        return Ok(VariationResult { value: best.0, witness: best.1 });
    }
    let (sum, witness) = chain_variation(n, |i, j| dist(i, j).powf(r));
    Ok(VariationResult { value: sum.powf(1.0 / r), witness })
}

/// `V^r f = sup (Σ_l |f_{u_l} − f_{u_{l-1}}|^r)^{1/r}` over increasing
/// sequences; `r = ∞` gives the oscillation `max f − min f`.
pub fn variation(path: &[f64], r: f64) -> Result<VariationResult> {
    variation_by(path.len(), |i, j| (path[j] - path[i]).abs(), r)
}

/// `Σ |f_{u_l} − f_{u_{l-1}}|^r` along a given chain.
pub fn chain_sum(path: &[f64], chain: &[usize], r: f64) -> f64 {
    chain.windows(2).map(|w| (path[w[1]] - path[w[0]]).abs().powf(r)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive search over all subsets, as an independent oracle.
    fn brute(path: &[f64], r: f64) -> f64 {
        let n = path.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let chain: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            best = best.max(chain_sum(path, &chain, r));
        }
        best.powf(1.0 / r)
    }

    #[test]
    fn small_examples() {
        let v = variation(&[0.0, 1.0, 2.0], 2.0).unwrap();
        assert!((v.value - 2.0).abs() < 1e-15);
        assert_eq!(v.witness, vec![0, 2]);
        let v = variation(&[0.0, 1.0, 0.0, 1.0], 2.0).unwrap();
        assert!((v.value - 3f64.sqrt()).abs() < 1e-15);
        let v = variation(&[0.0, 1.0, 2.0, 3.0], 1.0).unwrap();
        assert!((v.value - 3.0).abs() < 1e-15);
        let v = variation(&[0.0, 2.0, -1.0, 1.0], f64::INFINITY).unwrap();
        assert_eq!(v.value, 3.0);
        assert_eq!(v.witness, vec![1, 2]);
    }

    #[test]
    fn matches_exhaustive_search() {
        let paths: [&[f64]; 4] = [
            &[0.3, -1.2, 0.7, 0.1, 2.0, -0.4, 0.9],
            &[1.0, 1.0, 1.0],
            &[0.0, 0.5, -0.25, 0.125, -0.0625, 0.03],
            &[2.0, -3.0, 4.0, -5.0, 6.0, 0.0, 1.0, 0.5],
        ];
        for p in paths {
            for r in [0.5, 1.0, 1.5, 2.0, 2.5, 4.0] {
                let v = variation(p, r).unwrap();
                assert!((v.value - brute(p, r)).abs() < 1e-12, "{p:?} r={r}");
                assert!((chain_sum(p, &v.witness, r) - v.value.powf(r)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_exponent() {
        assert!(variation(&[0.0, 1.0], 0.0).is_err());
        assert!(variation(&[0.0, 1.0], -1.0).is_err());
        assert!(variation(&[0.0, 1.0], f64::NAN).is_err());
    }

    #[test]
    fn degenerate_paths() {
        assert_eq!(variation(&[], 2.0).unwrap().value, 0.0);
        assert_eq!(variation(&[4.0], 2.0).unwrap().witness, vec![0]);
    }
}
