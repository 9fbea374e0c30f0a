//! The sewing map on a grid, and Young integration.

use std::sync::Arc;

use martlab_core::rng;
use rand::Rng;
use serde::Serialize;

use crate::control::{ChainControl, Control, SumControl};
use crate::error::{Error, Result};
use crate::path::{norm, Interp, SampledPath};

/// A two-parameter germ `Ξ_{s,t}` on grid indices.
pub trait Germ: Sync {
    fn len(&self) -> usize;
    fn width(&self) -> usize;
    fn xi(&self, s: usize, t: usize) -> Vec<f64>;

    /// Limit of the sewing sums over partitions of the single grid cell
    /// `[t_k, t_{k+1}]`. Defaults to `Ξ_{k,k+1}` (nothing resolvable inside a
    /// cell); germs built from interpolated paths override it.
    fn cell(&self, k: usize) -> Vec<f64> {
        self.xi(k, k + 1)
    }
}

/// Germ from a closure.
pub struct FnGerm<F> {
    n: usize,
    width: usize,
    f: F,
}

impl<F: Fn(usize, usize) -> Vec<f64> + Sync> FnGerm<F> {
    pub fn new(n: usize, width: usize, f: F) -> Self {
        FnGerm { n, width, f }
    }
}

impl<F: Fn(usize, usize) -> Vec<f64> + Sync> Germ for FnGerm<F> {
    fn len(&self) -> usize {
        self.n
    }
    fn width(&self) -> usize {
        self.width
    }
    fn xi(&self, s: usize, t: usize) -> Vec<f64> {
        (self.f)(s, t)
    }
}

/// `Σ_{k≥1} (2/k)^θ = 2^θ ζ(θ)` for `θ > 1`.
pub fn sewing_constant(theta: f64) -> f64 {
    assert!(theta > 1.0, "sewing exponent must exceed 1");
    // Euler–Maclaurin tail after N terms.
    let n = 64.0f64;
    let head: f64 = (1..64).map(|k| (k as f64).powf(-theta)).sum();
    let tail = n.powf(1.0 - theta) / (theta - 1.0) + 0.5 * n.powf(-theta) + theta / 12.0 * n.powf(-theta - 1.0)
        - theta * (theta + 1.0) * (theta + 2.0) / 720.0 * n.powf(-theta - 3.0);
    2f64.powf(theta) * (head + tail)
}

#[derive(Debug, Clone, Serialize)]
pub struct SewResult {
    /// The sewn value `𝓘Ξ_{0,T}`.
    pub value: Vec<f64>,
    /// `Ξ_{0,T}`.
    pub germ_value: Vec<f64>,
    /// Riemann sums `𝓘^{π_k}Ξ_{0,T}` over the nested dyadic grid partitions.
    pub level_sums: Vec<Vec<f64>>,
    pub theta: f64,
    pub constant: f64,
    pub omega_total: f64,
    /// `Σ_{k≥1}(2/k)^θ ω(0,T)^θ`.
    pub error_bound: f64,
    pub hypothesis_checks: usize,
    pub hypothesis_failures: usize,
}

impl SewResult {
    /// `|𝓘Ξ_{0,T} − Ξ_{0,T}|`.
    pub fn error(&self) -> f64 {
        dist_vec(&self.value, &self.germ_value)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SewOptions {
    /// Random triples used to spot-check `|δΞ| ≤ ω^θ` (all triples on
    /// grids of at most 48 points, spans of at most 256 steps otherwise).
    pub spot_checks: usize,
    pub seed: u64,
}

impl Default for SewOptions {
    fn default() -> Self {
        SewOptions { spot_checks: 64, seed: 0 }
    }
}

fn dist_vec(a: &[f64], b: &[f64]) -> f64 {
    crate::path::dist(a, b)
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    acc.iter_mut().zip(v).for_each(|(a, b)| *a += b);
}

/// `δΞ_{s,t,u} = Ξ_{s,u} − Ξ_{s,t} − Ξ_{t,u}`.
pub fn delta(germ: &dyn Germ, s: usize, t: usize, u: usize) -> Vec<f64> {
    let (a, b, c) = (germ.xi(s, u), germ.xi(s, t), germ.xi(t, u));
    a.iter().zip(&b).zip(&c).map(|((a, b), c)| a - b - c).collect()
}

/// Nested dyadic partitions `π_k = {⌊j(n−1)/2^k⌋}` of the grid `0..n`;
/// the last one is the full grid.
pub fn dyadic_partitions(n: usize) -> Vec<Vec<usize>> {
    if n < 2 {
        return vec![(0..n).collect()];
    }
    let m = n - 1;
    let mut out = Vec::new();
    let mut k = 0u32;
    loop {
        let parts = 1usize << k;
        let mut pts: Vec<usize> = (0..=parts).map(|j| ((j as u128 * m as u128) >> k) as usize).collect();
        pts.dedup();
        let done = pts.len() == n;
        out.push(pts);
        if done {
            return out;
        }
        k += 1;
    }
}

/// `Σ_j Ξ_{π_j, π_{j+1}}`.
pub fn riemann_sum(germ: &dyn Germ, pts: &[usize]) -> Vec<f64> {
    let mut acc = vec![0.0; germ.width()];
    for w in pts.windows(2) {
        add_into(&mut acc, &germ.xi(w[0], w[1]));
    }
    acc
}

/// The sewn path at every grid time: `Z_{t_j} = Σ_{k<j} cell(k)`, flat
/// row-major with `germ.width()` entries per point.
pub fn cumulative(germ: &dyn Germ) -> Vec<f64> {
    let w = germ.width();
    let n = germ.len();
    let mut out = vec![0.0; n * w];
    for k in 0..n.saturating_sub(1) {
        let c = germ.cell(k);
        for a in 0..w {
            out[(k + 1) * w + a] = out[k * w + a] + c[a];
        }
    }
    out
}

const SPOT_SPAN: usize = 256;

pub fn sew(germ: &dyn Germ, omega: &dyn Control, theta: f64) -> Result<SewResult> {
    sew_with(germ, omega, theta, SewOptions::default())
}

/// Sew `Ξ` over `[0, T]`: the limit of the Riemann sums along the nested
/// dyadic refinements of the grid, finished with the per-cell limits.
///
/// Successive refinements are checked against
/// `|𝓘^π − 𝓘^{π′}| ≤ C ω(0,T) max_j ω(π_j, π_{j+1})^{θ−1}`; a failure means the
/// hypothesis `|δΞ| ≤ ω^θ` does not hold and is reported as non-Cauchy.
pub fn sew_with(germ: &dyn Germ, omega: &dyn Control, theta: f64, opts: SewOptions) -> Result<SewResult> {
    if !(theta > 1.0) {
        return Err(Error::InvalidParameter(format!("sewing exponent θ = {theta} must exceed 1")));
    }
    let n = germ.len();
    if omega.len() != n {
        return Err(Error::GridMismatch);
    }
    if n == 0 {
        return Err(Error::InvalidPath("empty grid".into()));
    }
    let last = n - 1;
    let constant = sewing_constant(theta);
    let omega_total = omega.omega(0, last);

    let (mut checks, mut failures) = (0, 0);
    let mut check = |s: usize, t: usize, u: usize| {
        let d = norm(&delta(germ, s, t, u));
        let w = omega.omega(s, u).powf(theta);
        checks += 1;
        if d > w * (1.0 + 1e-9) + 1e-12 {
            failures += 1;
        }
    };
    if n <= 48 {
        for s in 0..n {
            for t in s + 1..n {
                for u in t + 1..n {
                    check(s, t, u);
                }
            }
        }
    } else {
        let mut r = rng::stream(opts.seed, 0);
        // Spans are capped so each check costs O(span²); long spans are
        // covered by the refinement check below.
        for _ in 0..opts.spot_checks {
            let s = r.random_range(0..n - 2);
            let u = r.random_range(s + 2..=(s + SPOT_SPAN).min(last));
            let t = r.random_range(s + 1..u);
            check(s, t, u);
        }
    }

    let parts = dyadic_partitions(n);
    let level_sums: Vec<Vec<f64>> = parts.iter().map(|p| riemann_sum(germ, p)).collect();
    for k in 0..parts.len().saturating_sub(1) {
        let worst = parts[k].windows(2).map(|w| omega.omega(w[0], w[1])).fold(0.0, f64::max);
        let allowed = constant * omega_total * worst.powf(theta - 1.0);
        let diff = dist_vec(&level_sums[k], &level_sums[k + 1]);
        let slack = 1e-12 * (1.0 + norm(&level_sums[k]) + norm(&level_sums[k + 1]));
        if diff > allowed * (1.0 + 1e-9) + slack {
            return Err(Error::NonCauchy { level: k + 1, diff, allowed });
        }
    }

    let mut value = vec![0.0; germ.width()];
    for k in 0..last {
        add_into(&mut value, &germ.cell(k));
    }
    let germ_value = germ.xi(0, last);
    let error_bound = constant * omega_total.powf(theta);
    let res = SewResult {
        value,
        germ_value,
        level_sums,
        theta,
        constant,
        omega_total,
        error_bound,
        hypothesis_checks: checks,
        hypothesis_failures: failures,
    };
    let err = res.error();
    if err > error_bound * (1.0 + 1e-9) + 1e-12 * (1.0 + norm(&res.value)) {
        return Err(Error::SewingBound { err, bound: error_bound });
    }
    Ok(res)
}

struct YoungGerm<'a> {
    a: &'a SampledPath,
    g: &'a SampledPath,
}

impl Germ for YoungGerm<'_> {
    fn len(&self) -> usize {
        self.a.len()
    }

    fn width(&self) -> usize {
        1
    }

    fn xi(&self, s: usize, t: usize) -> Vec<f64> {
        let dg = self.g.increment(s, t);
        vec![self.a.value(s).iter().zip(&dg).map(|(a, d)| a * d).sum()]
    }

    fn cell(&self, k: usize) -> Vec<f64> {
        let dg = self.g.increment(k, k + 1);
        let dot = |a: &[f64]| -> f64 { a.iter().zip(&dg).map(|(a, d)| a * d).sum() };
        let v = match (self.a.interp(), self.g.interp()) {
            // Exact for two linear pieces: the integrand averages its endpoints.
            (Interp::Linear, Interp::Linear) => 0.5 * (dot(self.a.value(k)) + dot(self.a.value(k + 1))),
            // g jumps at t_{k+1}, where a has already reached a_{k+1}.
            (Interp::Linear, Interp::Constant) => dot(self.a.value(k + 1)),
            (Interp::Constant, _) => dot(self.a.value(k)),
        };
        vec![v]
    }
}

#[derive(Debug, Clone)]
pub struct YoungIntegral {
    /// `t ↦ ∫_0^t a dg` on the grid.
    pub path: SampledPath,
    pub sew: SewResult,
}

/// `∫ a dg = Σ_i ∫ a^i dg^i` by sewing `Ξ_{s,t} = a_s · δg_{s,t}` with
/// `ω = ω_{a,r} + ω_{g,r}` and `θ = 2/r`.
pub fn young_integral(a: &SampledPath, g: &SampledPath, r: f64) -> Result<YoungIntegral> {
    if !(r > 0.0 && r < 2.0) {
        return Err(Error::InvalidParameter(format!("Young integration needs 0 < r < 2, got {r}")));
    }
    if !a.same_grid(g) {
        return Err(Error::GridMismatch);
    }
    if a.dim() != g.dim() {
        return Err(Error::Dimension(format!("integrand has dimension {}, integrator {}", a.dim(), g.dim())));
    }
    let germ = YoungGerm { a, g };
    let omega = SumControl::new(vec![
        Arc::new(ChainControl::path(a, r)) as Arc<dyn Control>,
        Arc::new(ChainControl::path(g, r)),
    ])?;
    let sew = sew(&germ, &omega, 2.0 / r)?;
    let path = SampledPath::new(g.times().to_vec(), 1, cumulative(&germ), g.interp())?;
    Ok(YoungIntegral { path, sew })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::FnControl;

    #[test]
    fn constant_matches_zeta() {
        // ζ(2) = π²/6, ζ(3) ≈ 1.2020569031595942.
        let z2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!((sewing_constant(2.0) - 4.0 * z2).abs() < 1e-12);
        assert!((sewing_constant(3.0) - 8.0 * 1.202_056_903_159_594_2).abs() < 1e-12);
        let direct: f64 = (1..2_000_000).map(|k| (2.0 / k as f64).powf(1.5)).sum();
        // Direct sum truncation error is about 2^1.5 · 2 / sqrt(2e6).
        assert!((sewing_constant(1.5) - direct - 2f64.powf(1.5) * 2.0 / 2e6f64.sqrt()).abs() < 1e-6);
    }

    #[test]
    fn dyadic_partitions_are_nested() {
        for n in [2usize, 3, 7, 17, 100] {
            let ps = dyadic_partitions(n);
            assert_eq!(ps.last().unwrap().len(), n);
            for w in ps.windows(2) {
                assert!(w[0].iter().all(|p| w[1].contains(p)));
            }
            assert!(ps.iter().all(|p| p[0] == 0 && *p.last().unwrap() == n - 1));
        }
    }

    #[test]
    fn additive_germ_sews_to_itself() {
        let x: Vec<f64> = (0..33).map(|i| (i as f64).sin()).collect();
        let germ = FnGerm::new(33, 1, |s, t| vec![x[t] - x[s]]);
        let om = FnControl::new(33, |s, t| (t - s) as f64);
        let res = sew(&germ, &om, 1.5).unwrap();
        assert!((res.value[0] - (x[32] - x[0])).abs() < 1e-14);
        for l in &res.level_sums {
            assert!((l[0] - res.value[0]).abs() < 1e-14);
        }
        assert_eq!(res.hypothesis_failures, 0);
    }

    #[test]
    fn bound_for_left_point_identity() {
        // Ξ_{s,t} = s (t − s) with ω = t − s and θ = 2: |1/2 − 0| ≤ Σ(2/k)².
        let n = 257;
        let t: Vec<f64> = SampledPath::uniform_times(n - 1, 1.0);
        let tt = t.clone();
        let germ = FnGerm::new(n, 1, move |s, u| vec![tt[s] * (tt[u] - tt[s])]);
        let tc = t.clone();
        let om = FnControl::new(n, move |s, u| tc[u] - tc[s]);
        let res = sew(&germ, &om, 2.0).unwrap();
        assert_eq!(res.germ_value, vec![0.0]);
        assert!(res.error_bound >= 0.5);
        assert!((res.error_bound - 4.0 * std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
        assert_eq!(res.hypothesis_failures, 0);
    }

    #[test]
    fn non_cauchy_is_reported() {
        // δΞ does not vanish as blocks shrink, but the control claims it does.
        let germ = FnGerm::new(17, 1, |s, t| vec![if t > s + 1 { 1.0 } else { 0.0 }]);
        let om = FnControl::new(17, |s, t| 1e-3 * (t - s) as f64);
        assert!(matches!(sew(&germ, &om, 2.0), Err(Error::NonCauchy { .. })));
    }

    #[test]
    fn young_identity_is_one_half() {
        let t = SampledPath::uniform_times(1 << 12, 1.0);
        let a = SampledPath::scalar(t.clone(), t.clone(), Interp::Linear).unwrap();
        let res = young_integral(&a, &a, 1.5).unwrap();
        assert!((res.sew.value[0] - 0.5).abs() < 1e-12);
        assert!((res.path.value(1 << 11)[0] - 0.125).abs() < 1e-12);
        // Grid-level Riemann sums sit at 1/2 − 1/(2m) for m cells.
        let fine = res.sew.level_sums.last().unwrap()[0];
        assert!((fine - (0.5 - 0.5 / 4096.0)).abs() < 1e-12);
    }

    #[test]
    fn young_constant_integrand() {
        let t = SampledPath::uniform_times(64, 2.0);
        let g = SampledPath::from_fn(t.clone(), 1, Interp::Linear, |u| vec![(3.0 * u).cos()]).unwrap();
        let a = SampledPath::from_fn(t, 1, Interp::Linear, |_| vec![1.0]).unwrap();
        let res = young_integral(&a, &g, 1.2).unwrap();
        for i in 0..g.len() {
            assert!((res.path.value(i)[0] - (g.value(i)[0] - g.value(0)[0])).abs() < 1e-13);
        }
    }

    #[test]
    fn young_rejects_r_two() {
        let t = SampledPath::uniform_times(4, 1.0);
        let a = SampledPath::scalar(t.clone(), t, Interp::Linear).unwrap();
        assert!(young_integral(&a, &a, 2.0).is_err());
    }
}
