//! The Bellman function `U(x, y, m) = y − (|x|² + (γ−1)m²)/m` behind the sharp
//! square-function inequality, and the finite constructions showing that
//! `√3` cannot be improved in `E Sf ≤ √3 E f*`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::functionals::{maximal, square_function};
use crate::process::{Martingale, TreeProcess};
use crate::tree::FiltrationTree;

pub const GAMMA: f64 = 3.0;
pub const MAX_EXTREMAL_DEPTH: usize = 12;

/// A point of the domain `{(x, y, m) : y ≥ 0, |x| ≤ m}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellmanPoint {
    pub x: f64,
    pub y: f64,
    pub m: f64,
}

impl BellmanPoint {
    pub fn new(x: f64, y: f64, m: f64) -> Result<Self> {
        if !(m >= 0.0 && y >= 0.0) || x.abs() > m {
            return Err(Error::InvalidParameter(format!("({x}, {y}, {m}) is outside the domain |x| <= m")));
        }
        Ok(Self { x, y, m })
    }
}

/// `U(x, y, m)`; at `m = 0` (so `x = 0`) the value is `y`.
pub fn bellman_u(p: BellmanPoint, gamma: f64) -> f64 {
    if p.m == 0.0 {
        return p.y;
    }
    p.y - (p.x * p.x + (gamma - 1.0) * p.m * p.m) / p.m
}

/// `U(x, y, m) − 2xh/m − U(x+h, y + h²/(|x+h| ∨ m), |x+h| ∨ m)`; nonnegative
/// for every `γ ≥ 3`.
pub fn concavity_residual(x: f64, h: f64, y: f64, m: f64, gamma: f64) -> Result<f64> {
    let p = BellmanPoint::new(x, y, m)?;
    if m == 0.0 {
        return Err(Error::InvalidParameter("m must be positive".into()));
    }
    let m1 = (x + h).abs().max(m);
    let next = BellmanPoint { x: x + h, y: y + h * h / m1, m: m1 };
    Ok(bellman_u(p, gamma) - 2.0 * x * h / m - bellman_u(next, gamma))
}

/// A point where the inductive step fails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub gamma: f64,
    pub x: f64,
    pub h: f64,
    pub y: f64,
    pub m: f64,
    pub residual: f64,
}

/// Evaluation grid for the concavity scan, at `m = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityGrid {
    pub x_points: usize,
    pub h_min: f64,
    pub h_max: f64,
    pub h_step: f64,
    pub ys: Vec<f64>,
}

impl Default for ConcavityGrid {
    /// 41 × 1001 × 3 = 123 123 points. The `h` range reaches `|x+h| > 10`,
    /// which is where the step starts failing for `γ = 2.9`.
    fn default() -> Self {
        Self { x_points: 41, h_min: -25.0, h_max: 25.0, h_step: 0.05, ys: vec![0.0, 1.0, 10.0] }
    }
}

impl ConcavityGrid {
    fn xs(&self) -> Vec<f64> {
        let n = self.x_points.max(2);
        (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
    }

    fn hs(&self) -> Vec<f64> {
        let n = ((self.h_max - self.h_min) / self.h_step).round() as usize + 1;
        (0..n).map(|i| self.h_min + i as f64 * self.h_step).collect()
    }

    pub fn len(&self) -> usize {
        self.xs().len() * self.hs().len() * self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcavityScan {
    pub points: usize,
    /// Smallest residual and where it occurs.
    pub worst: Counterexample,
    /// Largest `|residual|` on the branch `|x+h| ≤ m`, where it should vanish.
    pub inner_branch_error: f64,
}

impl ConcavityScan {
    pub fn counterexample(&self, tol: f64) -> Option<Counterexample> {
        (self.worst.residual < -tol).then_some(self.worst)
    }
}

pub fn concavity_scan(grid: &ConcavityGrid, gamma: f64) -> ConcavityScan {
    let xs = grid.xs();
    let hs = grid.hs();
    let m = 1.0;
    let per_x: Vec<(Counterexample, f64)> = xs
        .par_iter()
        .map(|&x| {
            let mut worst = Counterexample { gamma, x, h: 0.0, y: grid.ys[0], m, residual: f64::INFINITY };
            let mut inner = 0.0f64;
            for &y in &grid.ys {
                for &h in &hs {
                    let r = concavity_residual(x, h, y, m, gamma).expect("grid lies in the domain");
                    if r < worst.residual {
                        worst = Counterexample { gamma, x, h, y, m, residual: r };
                    }
                    if (x + h).abs() <= m {
                        inner = inner.max(r.abs());
                    }
                }
            }
            (worst, inner)
        })
        .collect();
    let mut worst = per_x[0].0;
    let mut inner = 0.0f64;
    for (w, i) in per_x {
        if w.residual < worst.residual {
            worst = w;
        }
        inner = inner.max(i);
    }
    ConcavityScan { points: grid.len(), worst, inner_branch_error: inner }
}

fn ratio(num: f64, den: f64) -> f64 {
    if num == 0.0 && den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Both sides of the pathwise sharp inequality along one path `f_0..f_N`:
/// `3|f_0| + Σ_{n≥1} |df_n|²/f*_n` and
/// `2f*_N + |f_N|²/f*_N − Σ_{n<N} 2 f_n df_{n+1}/f*_n`, with `0/0 = 0`.
pub fn pathwise_sharp_sides(path: &[f64]) -> (f64, f64) {
    let Some(&f0) = path.first() else {
        return (0.0, 0.0);
    };
    let mut star = f0.abs();
    let mut lhs = 3.0 * f0.abs();
    let mut drift = 0.0;
    for w in path.windows(2) {
        let (prev_star, d) = (star, w[1] - w[0]);
        drift += ratio(2.0 * w[0] * d, prev_star);
        star = star.max(w[1].abs());
        lhs += ratio(d * d, star);
    }
    let last = path[path.len() - 1];
    let rhs = 2.0 * star + ratio(last * last, star) - drift;
    (lhs, rhs)
}

/// Per-node `U(f_n, S̃_n, f*_n)` with `S̃_n = γ|f_0| + Σ_{j ≤ n} |df_j|²/f*_j`.
pub fn bellman_process(f: &TreeProcess, gamma: f64) -> TreeProcess {
    let t = f.tree();
    let star = maximal(f);
    let mut s = vec![0.0; t.node_count()];
    s[0] = gamma * f.value(0).abs();
    for a in 1..s.len() {
        let p = t.parent(a).expect("non-root");
        let d = f.increment(a);
        s[a] = s[p] + ratio(d * d, star.value(a));
    }
    TreeProcess::from_fn(t.clone(), |a| {
        bellman_u(BellmanPoint { x: f.value(a), y: s[a], m: star.value(a) }, gamma)
    })
}

/// `E U(f_n, S̃_n, f*_n)` for `n = 0..=N`; nonincreasing when `γ ≥ 3`.
pub fn bellman_chain(f: &Martingale, gamma: f64) -> Vec<f64> {
    let u = bellman_process(f, gamma);
    (0..=f.depth()).map(|n| u.expectation(n)).collect()
}

/// Expectations of both sides of the sharp quotient inequality at the final
/// time.
pub fn sharp_quotient_sides(f: &Martingale) -> (f64, f64) {
    let t = f.tree();
    let mut lhs = 0.0;
    let mut rhs = 0.0;
    let mut path = Vec::with_capacity(t.depth() + 1);
    for l in t.leaves() {
        path.clear();
        path.extend(t.path_to(l).into_iter().map(|a| f.value(a)));
        let (a, _) = pathwise_sharp_sides(&path);
        // The drift term has zero mean; only the closed part enters.
        let star = path.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let last = path[path.len() - 1];
        lhs += t.prob(l) * a;
        rhs += t.prob(l) * (2.0 * star + ratio(last * last, star));
    }
    (lhs, rhs)
}

/// `(E Sf_N, E f*_N)`.
pub fn davis_sides(f: &TreeProcess) -> (f64, f64) {
    let n = f.depth();
    (square_function(f).expectation(n), maximal(f).expectation(n))
}

/// `V(x, t, z) = √t − γz`.
pub fn bellman_v(_x: f64, t: f64, z: f64, gamma: f64) -> f64 {
    t.sqrt() - gamma * z
}

/// The martingale of the lower-bound construction: from 0 a fair step of the
/// current maximum size, from `±f*` a step to `0` with probability `r/(r+1)`
/// or to `±(1+r)f*` with probability `1/(r+1)`. It starts with `f_0 = 0`,
/// `f_1 = ±1`.
pub fn extremal_martingale(r: f64, depth: usize) -> Result<Martingale> {
    if depth > MAX_EXTREMAL_DEPTH {
        return Err(Error::DepthGuard { depth, limit: MAX_EXTREMAL_DEPTH });
    }
    if !(r > 0.0) {
        return Err(Error::InvalidParameter(format!("r must be positive, got {r}")));
    }
    // Build level by level, tracking (value, running max) per node.
    let mut states = vec![(0.0f64, 0.0f64)];
    let mut all = vec![(0.0, 0.0)];
    let mut branching = Vec::new();
    let mut cond = Vec::new();
    for _ in 0..depth {
        let mut next = Vec::with_capacity(2 * states.len());
        for &(x, z) in &states {
            branching.push(2);
            if x == 0.0 {
                let step = if z == 0.0 { 1.0 } else { z };
                next.push((step, z.max(step)));
                next.push((-step, z.max(step)));
                cond.extend([0.5, 0.5]);
            } else {
                let s = x.signum();
                let up = x + s * r * z;
                next.push((0.0, z));
                next.push((up, z.max(up.abs())));
                cond.extend([r / (r + 1.0), 1.0 / (r + 1.0)]);
            }
        }
        all.extend_from_slice(&next);
        states = next;
    }
    let tree = Arc::new(FiltrationTree::from_conditional(depth, &branching, &cond)?);
    Martingale::new(TreeProcess::new(tree, all.into_iter().map(|(x, _)| x).collect())?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtremalResult {
    /// `best[d]` is the largest `E Sf / E f*` over the grid and all depths
    /// `≤ d`; index 0 is 0.
    pub best: Vec<f64>,
    pub best_ratio: f64,
    pub best_r: f64,
    pub best_depth: usize,
}

/// Best `E Sf / E f*` of the lower-bound construction over `r ∈ r_grid` and
/// all depths up to `depth`.
pub fn extremal_search(depth: usize, r_grid: &[f64]) -> Result<ExtremalResult> {
    if depth > MAX_EXTREMAL_DEPTH {
        return Err(Error::DepthGuard { depth, limit: MAX_EXTREMAL_DEPTH });
    }
    if r_grid.is_empty() {
        return Err(Error::InvalidParameter("empty r grid".into()));
    }
    let per_r: Vec<Vec<f64>> = r_grid
        .par_iter()
        .map(|&r| {
            let f = extremal_martingale(r, depth)?;
            let sf = square_function(&f);
            let mf = maximal(&f);
            Ok((0..=depth).map(|n| ratio(sf.expectation(n), mf.expectation(n))).collect())
        })
        .collect::<Result<_>>()?;
    let mut best = vec![0.0; depth + 1];
    let (mut best_ratio, mut best_r, mut best_depth) = (0.0, r_grid[0], 0);
    for d in 0..=depth {
        best[d] = if d > 0 { best[d - 1] } else { 0.0 };
        for (i, ratios) in per_r.iter().enumerate() {
            if ratios[d] > best[d] {
                best[d] = ratios[d];
            }
            if ratios[d] > best_ratio {
                (best_ratio, best_r, best_depth) = (ratios[d], r_grid[i], d);
            }
        }
    }
    Ok(ExtremalResult { best, best_ratio, best_r, best_depth })
}
