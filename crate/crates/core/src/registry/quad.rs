//! Adaptive Simpson quadrature, used to check layer-cake formulas numerically.

/// `∫_a^b f` to absolute tolerance `tol`.
pub fn integrate(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let m = 0.5 * (a + b);
    let (fa, fm, fb) = (f(a), f(m), f(b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

#[allow(clippy::too_many_arguments)]
fn step(f: &impl Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let diff = left + right - whole;
    if depth == 0 || diff.abs() <= 15.0 * tol {
        return left + right + diff / 15.0;
    }
    step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) + step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// `∫_0^t (t − λ) λ^{p−2} dλ` for `p > 1`, via `λ = t v^{1/(p−1)}` which
/// turns `λ^{p−2} dλ` into `t^{p−1}/(p−1) dv`.
pub fn garsia_neveu_kernel(t: f64, p: f64) -> f64 {
    let a = 1.0 / (p - 1.0);
    let inner = integrate(&|v: f64| 1.0 - v.powf(a), 0.0, 1.0, 1e-13);
    t.powf(p) / (p - 1.0) * inner
}

/// `∫_0^∞ (t ∧ λ) λ^{p−2} dλ` for `0 < p < 1`, split at `λ = t` and
/// integrated in `x = ln λ` on each side.
pub fn truncation_kernel(t: f64, p: f64) -> f64 {
    let lt = t.ln();
    // Both integrands decay like e^{-c|x - ln t|}; cut where they are < 1e-17.
    let below = 40.0 / p;
    let above = 40.0 / (1.0 - p);
    let lo = integrate(&|x: f64| (x * p).exp(), lt - below, lt, 1e-14 * t.powf(p));
    let hi = integrate(&|x: f64| t * (x * (p - 1.0)).exp(), lt, lt + above, 1e-14 * t.powf(p));
    lo + hi
}
