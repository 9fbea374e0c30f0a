//! Exact scans of weak-type inequalities over all thresholds.
//!
//! On a finite space, `λ ↦ μ{x > λ}` and `λ ↦ ∫_{x > λ} y` are step functions
//! that only jump at values of `x`. Evaluating at every value (both the set
//! `{x > s}` and its left limit `{x ≥ s}`) and at midpoints between
//! consecutive values covers every extremal configuration of an inequality of
//! the form `λ·μ{x > λ} ≤ ∫_{x > λ} y` or `μ{x > λ} ≤ C/λ`.

/// One evaluation: the threshold, the mass of the upper level set, and the
/// integral of the integrand over it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelPoint {
    pub lambda: f64,
    pub mass: f64,
    pub integral: f64,
}

/// Scan all positive thresholds of `x` (weights `mass`, integrand `y`).
pub fn upper_level_sets(x: &[f64], mass: &[f64], y: &[f64]) -> Vec<LevelPoint> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
    let mut out = Vec::new();
    let (mut m, mut s) = (0.0, 0.0);
    let mut i = 0;
    while i < idx.len() {
        let v = x[idx[i]];
        if v <= 0.0 {
            break;
        }
        // {x > v}
        out.push(LevelPoint { lambda: v, mass: m, integral: s });
        while i < idx.len() && x[idx[i]] == v {
            m += mass[idx[i]];
            s += y[idx[i]];
            i += 1;
        }
        // left limit at v: {x ≥ v}
        out.push(LevelPoint { lambda: v, mass: m, integral: s });
        let next = if i < idx.len() { x[idx[i]].max(0.0) } else { 0.0 };
        out.push(LevelPoint { lambda: 0.5 * (v + next), mass: m, integral: s });
    }
    out
}
