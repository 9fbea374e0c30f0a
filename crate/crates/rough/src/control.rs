//! Controls on a grid and the greedy small-block partition.
//!
//! A control is sampled at grid times, with grid paths read as càdlàg step
//! functions: `ω(s, t_j−) = ω(s, t_{j−1}) + ω(t_{j−1}, t_{j−1}+)` and
//! `ω(s+, t) ≤ ω(s, t) − ω(s, s+)`. The right-jump part `ω(s, s+)` is zero for
//! controls built from sampled paths.

use std::sync::{Arc, Mutex};

use martlab_core::ops::variation::chain_variation;
use martlab_core::rng;
use rand::Rng;

use crate::error::{Error, Result};
use crate::path::{dist, Grid2, SampledPath};

/// `V^ρ` of a two-parameter array given by its entry norms `|Ξ_{s,t}|`:
/// `sup_π (Σ |Ξ_{π_{l−1},π_l}|^ρ)^{1/ρ}`.
pub fn two_param_variation(n: usize, norm: impl Fn(usize, usize) -> f64, rho: f64) -> f64 {
    assert!(rho > 0.0, "variation exponent must be positive");
    chain_variation(n, |s, t| norm(s, t).powf(rho)).0.powf(1.0 / rho)
}

pub trait Control: Send + Sync {
    /// Number of grid points.
    fn len(&self) -> usize;
    /// `ω(t_s, t_t)` for `s ≤ t`.
    fn omega(&self, s: usize, t: usize) -> f64;
    /// `ω(t_s, t_s+)`.
    fn right_jump(&self, _s: usize) -> f64 {
        0.0
    }

    /// `ω(t_s, t_t−)`.
    fn left_limit(&self, s: usize, t: usize) -> f64 {
        if t <= s {
            0.0
        } else {
            self.omega(s, t - 1) + self.right_jump(t - 1)
        }
    }

    /// Upper estimate of `ω(t_s+, t_t)` from superadditivity.
    fn from_right(&self, s: usize, t: usize) -> f64 {
        (self.omega(s, t) - self.right_jump(s)).max(0.0)
    }
}

type Cost = Arc<dyn Fn(usize, usize) -> f64 + Send + Sync>;

/// `ω(s,t) = sup over chains in [s,t] of Σ cost(u_{l−1}, u_l)`, which is
/// superadditive whenever costs are nonnegative.
///
/// Rows are filled lazily: row `s` holds the chain DP started at `s`, extended
/// only as far as queries reach, so dyadic blocks cost `O(block²)`.
pub struct ChainControl {
    n: usize,
    cost: Cost,
    rows: Vec<Mutex<Vec<f64>>>,
}

impl ChainControl {
    pub fn new(n: usize, cost: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        ChainControl { n, cost: Arc::new(cost), rows: (0..n).map(|_| Mutex::new(vec![0.0])).collect() }
    }

    /// `ω = (V^r X)^r`, the canonical control of a path.
    pub fn path(x: &SampledPath, r: f64) -> Self {
        let x = Arc::new(x.clone());
        Self::new(x.len(), move |s, t| dist(x.value(s), x.value(t)).powf(r))
    }

    /// `ω = (V^ρ Ξ)^ρ` for a two-parameter array.
    pub fn two_param(xi: Arc<Grid2>, rho: f64) -> Self {
        Self::new(xi.len(), move |s, t| xi.norm_at(s, t).powf(rho))
    }
}

impl Control for ChainControl {
    fn len(&self) -> usize {
        self.n
    }

    fn omega(&self, s: usize, t: usize) -> f64 {
        if t <= s {
            return 0.0;
        }
        let mut row = self.rows[s].lock().expect("control row lock");
        while s + row.len() <= t {
            let j = s + row.len();
            let mut best = 0.0f64;
            for (k, b) in row.iter().enumerate() {
                best = best.max(b + (self.cost)(s + k, j));
            }
            row.push(best);
        }
        row[t - s]
    }
}

/// A control given by a closure, with optional right jumps.
pub struct FnControl {
    n: usize,
    f: Cost,
    jumps: Vec<f64>,
}

impl FnControl {
    pub fn new(n: usize, f: impl Fn(usize, usize) -> f64 + Send + Sync + 'static) -> Self {
        FnControl { n, f: Arc::new(f), jumps: vec![0.0; n] }
    }

    /// Declare `ω(t_s, t_s+)` for each grid point.
    pub fn with_right_jumps(mut self, jumps: Vec<f64>) -> Result<Self> {
        if jumps.len() != self.n {
            return Err(Error::Dimension(format!("{} jumps for {} grid points", jumps.len(), self.n)));
        }
        self.jumps = jumps;
        Ok(self)
    }
}

impl Control for FnControl {
    fn len(&self) -> usize {
        self.n
    }

    fn omega(&self, s: usize, t: usize) -> f64 {
        if t <= s {
            0.0
        } else {
            (self.f)(s, t)
        }
    }

    fn right_jump(&self, s: usize) -> f64 {
        self.jumps[s]
    }
}

/// `Σ ω_k`, again a control.
pub struct SumControl {
    parts: Vec<Arc<dyn Control>>,
}

impl SumControl {
    pub fn new(parts: Vec<Arc<dyn Control>>) -> Result<Self> {
        let n = parts.first().map_or(0, |c| c.len());
        if parts.iter().any(|c| c.len() != n) {
            return Err(Error::GridMismatch);
        }
        Ok(SumControl { parts })
    }
}

impl Control for SumControl {
    fn len(&self) -> usize {
        self.parts.first().map_or(0, |c| c.len())
    }

    fn omega(&self, s: usize, t: usize) -> f64 {
        self.parts.iter().map(|c| c.omega(s, t)).sum()
    }

    fn right_jump(&self, s: usize) -> f64 {
        self.parts.iter().map(|c| c.right_jump(s)).sum()
    }
}

/// Largest relative superadditivity defect `(ω(s,t) + ω(t,u) − ω(s,u))₊ / (1 + ω(s,u))`
/// over `samples` random grid triples, together with `max ω(t,t)`.
pub fn superadditivity_defect(omega: &dyn Control, samples: usize, seed: u64) -> f64 {
    let n = omega.len();
    if n < 2 {
        return 0.0;
    }
    let mut r = rng::stream(seed, 0);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let mut v = [r.random_range(0..n), r.random_range(0..n), r.random_range(0..n)];
        v.sort_unstable();
        let [s, t, u] = v;
        let whole = omega.omega(s, u);
        let d = omega.omega(s, t) + omega.omega(t, u) - whole;
        worst = worst.max(d.max(0.0) / (1.0 + whole)).max(omega.omega(t, t).abs());
    }
    worst
}

/// Greedy partition with `ω(π_{j−1}+, π_j) ∧ ω(π_{j−1}, π_j−) ≤ ε` on every
/// block, restricted to grid times.
///
/// From `π_j`: if `ω(π_j, π_j+) ≥ ε` the next point is the following grid
/// time (the atom is isolated); otherwise it is the first grid time `t` at
/// which `ω(π_j, ·)` reaches `ε` just after `t`.
pub fn control_partition(omega: &dyn Control, eps: f64) -> Result<Vec<usize>> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!("partition threshold ε = {eps}")));
    }
    let n = omega.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let last = n - 1;
    let mut pts = vec![0];
    while *pts.last().unwrap() < last {
        assert!(pts.len() <= n, "partition exceeded the number of grid points");
        let i = *pts.last().unwrap();
        let next = if omega.right_jump(i) >= eps {
            i + 1
        } else {
            (i + 1..=last)
                .find(|&m| omega.omega(i, m) >= eps || omega.omega(i, m) + omega.right_jump(m) >= eps)
                .unwrap_or(last)
        };
        pts.push(next);
    }
    Ok(pts)
}

/// `max_j ω(π_{j−1}+, π_j) ∧ ω(π_{j−1}, π_j−)`; at most `ε` for the output
/// of [`control_partition`].
pub fn partition_defect(omega: &dyn Control, pts: &[usize]) -> f64 {
    pts.windows(2).map(|w| omega.from_right(w[0], w[1]).min(omega.left_limit(w[0], w[1]))).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Interp;

    fn exhaustive(n: usize, cost: &dyn Fn(usize, usize) -> f64) -> f64 {
        // Every subset of 0..n as a chain.
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let idx: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
            let s: f64 = idx.windows(2).map(|w| cost(w[0], w[1])).sum();
            best = best.max(s);
        }
        best
    }

    #[test]
    fn two_param_variation_examples() {
        assert_eq!(two_param_variation(5, |_, _| 0.0, 1.5), 0.0);
        let t: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        assert!((two_param_variation(9, |s, u| t[u] - t[s], 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_param_variation_matches_exhaustive() {
        let mut r = rng::stream(7, 0);
        for _ in 0..20 {
            let xi: Vec<f64> = (0..36).map(|_| r.random_range(-1.0..1.0)).collect();
            let rho = r.random_range(0.5..3.0);
            let norm = |s: usize, t: usize| f64::abs(xi[s * 6 + t]);
            let got = two_param_variation(6, norm, rho);
            let want = exhaustive(6, &|s, t| norm(s, t).powf(rho)).powf(1.0 / rho);
            assert!((got - want).abs() < 1e-12 * (1.0 + want));
        }
    }

    #[test]
    fn chain_control_rows() {
        let x = SampledPath::scalar(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, -1.0, 0.5], Interp::Linear).unwrap();
        let c = ChainControl::path(&x, 2.0);
        assert_eq!(c.omega(1, 1), 0.0);
        assert!((c.omega(0, 3) - exhaustive(4, &|s, t| (x.value(t)[0] - x.value(s)[0]).powi(2))).abs() < 1e-15);
        assert!((c.omega(1, 2) - 4.0).abs() < 1e-15);
        assert!(superadditivity_defect(&c, 200, 1) <= 1e-10);
    }

    #[test]
    fn sum_control() {
        let a: Arc<dyn Control> = Arc::new(FnControl::new(5, |s, t| (t - s) as f64));
        let b: Arc<dyn Control> = Arc::new(FnControl::new(5, |s, t| 2.0 * (t - s) as f64));
        let c = SumControl::new(vec![a, b]).unwrap();
        assert_eq!(c.omega(1, 4), 9.0);
        assert!(SumControl::new(vec![Arc::new(FnControl::new(3, |_, _| 0.0)) as Arc<dyn Control>, Arc::new(FnControl::new(4, |_, _| 0.0))]).is_err());
    }

    #[test]
    fn partition_of_time_control() {
        let n = 1001;
        let c = FnControl::new(n, move |s, t| (t - s) as f64 / (n - 1) as f64);
        let pts = control_partition(&c, 0.25).unwrap();
        assert!((4..=5).contains(&(pts.len() - 1)), "{pts:?}");
        assert!(partition_defect(&c, &pts) <= 0.25);
        // ε above the total mass: one block.
        assert_eq!(control_partition(&c, 2.0).unwrap(), vec![0, n - 1]);
    }

    #[test]
    fn atom_is_isolated() {
        let n = 101;
        let k0 = 40;
        let f = move |s: usize, t: usize| (t - s) as f64 / 100.0 + if s <= k0 && k0 < t { 5.0 } else { 0.0 };
        let mut jumps = vec![0.0; n];
        jumps[k0] = 5.0;
        let c = FnControl::new(n, f).with_right_jumps(jumps).unwrap();
        let pts = control_partition(&c, 0.3).unwrap();
        let at = pts.iter().position(|&p| p == k0).expect("atom time is a partition point");
        assert_eq!(pts[at + 1], k0 + 1);
        assert!(partition_defect(&c, &pts) <= 0.3 + 1e-12);
    }

    #[test]
    fn rejects_bad_eps() {
        let c = FnControl::new(3, |_, _| 0.0);
        assert!(control_partition(&c, 0.0).is_err());
    }
}
