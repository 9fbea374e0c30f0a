//! Picard iteration for `dY = φ(Y) d𝐗`, `Y_0 = y_0`.

use serde::Serialize;

use crate::control::{ChainControl, Control};
use crate::controlled::{compose, rough_integral, ControlledPath};
use crate::error::{Error, Result};
use crate::rough_path::RoughPath;
use crate::sewing::sewing_constant;
use crate::smooth::SmoothFunction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RdeConfig {
    /// Smallness threshold on `‖X‖_r + ‖𝕏‖_{r/2}` per subinterval; derived
    /// from the declared norms when absent.
    pub eps: Option<f64>,
    /// Radius `A` of the solution set `𝒴(X, A)`.
    pub a: f64,
    /// Stop once the contraction metric is below `tol·(1 + sup|Y| + sup|Y′|)`.
    pub tol: f64,
    pub max_iter: usize,
    /// How many times `ε` may be halved after a failed subinterval.
    pub max_halvings: usize,
}

impl Default for RdeConfig {
    fn default() -> Self {
        RdeConfig { eps: None, a: 1.0, tol: 1e-10, max_iter: 100, max_halvings: 20 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalDiagnostics {
    pub start: usize,
    pub end: usize,
    pub iterations: usize,
    pub metrics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RdeDiagnostics {
    pub iterations: usize,
    pub final_metric: f64,
    pub subdivisions: usize,
    pub error_bound: f64,
    pub eps: f64,
    pub halvings: usize,
    pub intervals: Vec<IntervalDiagnostics>,
}

#[derive(Debug, Clone)]
pub struct RdeSolution {
    pub path: ControlledPath,
    pub diagnostics: RdeDiagnostics,
}

/// Conservative `ε` under which one Picard step maps `𝒴(X, A)` into itself,
/// obtained by chaining the composition and integration estimates with the
/// declared norms of `φ`.
pub fn smallness_epsilon(phi: &SmoothFunction, a: f64, r: f64) -> f64 {
    let n = phi.norms();
    let (s, l, dl) = (n.sup, n.d_sup, n.d_lip);
    let theta = 3.0 / r;
    let c = 2f64.powf(theta - 1.0) * sewing_constant(theta);
    let y_r = if l > 0.0 { a / l } else { 0.0 };
    let b0 = l * s;
    let b1 = l * a + dl * y_r * s;
    let b2 = l * a * a + 0.5 * dl * y_r * y_r;
    let k1 = c * (b2 + b1) + b0;
    if k1 == 0.0 {
        return f64::INFINITY;
    }
    let mut eps = a * a / k1;
    if l > 0.0 {
        eps = eps.min(y_r / (s + k1));
    }
    eps
}

fn metric(phi: &SmoothFunction, a: f64, y: &ControlledPath, z: &ControlledPath, x: &RoughPath) -> Result<f64> {
    let r = x.r();
    let diff = z.sub(y)?;
    let n = phi.norms();
    let dr = diff.remainder(x.x())?.variation(r / 2.0);
    let dyp = diff.yp().variation(r);
    let dy = diff.y().variation(r);
    Ok(dr.max(dyp).max(2.0 * (n.d_sup + a * n.d_lip) * dy))
}

fn membership(phi: &SmoothFunction, a: f64, y: &ControlledPath, x: &RoughPath) -> Result<Option<String>> {
    let norms = y.norms(x)?;
    let n = phi.norms();
    let over = |v: f64, b: f64| v > b * (1.0 + 1e-9) + 1e-12;
    Ok(if over(norms.yp_r, a) {
        Some(format!("‖Y′‖_r = {:.6e} > A = {a}", norms.yp_r))
    } else if over(norms.remainder, a * a) {
        Some(format!("‖R^Y‖_(r/2) = {:.6e} > A² = {}", norms.remainder, a * a))
    } else if n.d_sup > 0.0 && over(norms.y_r, a / n.d_sup) {
        Some(format!("‖Y‖_r = {:.6e} > A/‖φ‖_Lip = {}", norms.y_r, a / n.d_sup))
    } else if over(norms.yp_sup, n.sup) {
        Some(format!("‖Y′‖_sup = {:.6e} > ‖φ‖_sup = {}", norms.yp_sup, n.sup))
    } else {
        None
    })
}

struct Local {
    path: ControlledPath,
    diag: IntervalDiagnostics,
    bound: f64,
}

fn picard(phi: &SmoothFunction, x: &RoughPath, y0: &[f64], cfg: &RdeConfig, start: usize) -> Result<Local> {
    let d = phi.d();
    let mut y = ControlledPath::constant(x.x().times(), y0, d)?;
    let mut metrics: Vec<f64> = Vec::new();
    let mut rising = 0;
    for it in 1..=cfg.max_iter {
        let fy = compose(phi, &y)?;
        let int = rough_integral(&fy, x)?;
        let z = int.z.shifted(y0)?;
        if let Some(detail) = membership(phi, cfg.a, &z, x)? {
            return Err(Error::OutsideSolutionSpace { iteration: it, detail });
        }
        let m = metric(phi, cfg.a, &y, &z, x)?;
        if let Some(&prev) = metrics.last() {
            rising = if m >= prev { rising + 1 } else { 0 };
        }
        metrics.push(m);
        y = z;
        let scale = 1.0 + y.y().sup_norm() + y.yp().sup_norm();
        if m <= cfg.tol * scale {
            let bound = match metrics.len() {
                0 | 1 => m,
                k => {
                    let q = metrics[k - 1] / metrics[k - 2];
                    if q < 1.0 {
                        m * q / (1.0 - q)
                    } else {
                        m
                    }
                }
            };
            let end = start + x.len() - 1;
            return Ok(Local { path: y, diag: IntervalDiagnostics { start, end, iterations: it, metrics }, bound });
        }
        if rising >= 3 {
            return Err(Error::NotContracting { start, end: start + x.len() - 1 });
        }
    }
    Err(Error::MaxIter(cfg.max_iter))
}

/// Split `0..n` into blocks with `‖X‖_r + ‖𝕏‖_{r/2} < ε`, bisecting at the
/// grid time that halves the `r`-variation mass of `X`.
fn subdivide(x: &RoughPath, eps: f64) -> Result<Vec<(usize, usize)>> {
    let r = x.r();
    let wx = ChainControl::path(x.x(), r);
    let wxx = ChainControl::two_param(x.xx_arc(), r / 2.0);
    let size = |i: usize, j: usize| wx.omega(i, j).powf(1.0 / r) + wxx.omega(i, j).powf(2.0 / r);
    let mut out = Vec::new();
    let mut stack = vec![(0, x.len() - 1)];
    while let Some((i, j)) = stack.pop() {
        let sz = size(i, j);
        if sz < eps || j == i {
            out.push((i, j));
            continue;
        }
        if j == i + 1 {
            return Err(Error::JumpTooLarge { index: i, size: sz, eps });
        }
        let total = wx.omega(i, j);
        let m = if total > 0.0 {
            (i + 1..j).find(|&m| wx.omega(i, m) >= 0.5 * total).unwrap_or(j - 1)
        } else {
            (i + j) / 2
        };
        // Right half first on the stack so that the left one is solved first.
        stack.push((m, j));
        stack.push((i, m));
    }
    Ok(out)
}

fn solve_with_eps(phi: &SmoothFunction, x: &RoughPath, y0: &[f64], cfg: &RdeConfig, eps: f64) -> Result<(ControlledPath, Vec<IntervalDiagnostics>, f64)> {
    let blocks = subdivide(x, eps)?;
    let mut init = y0.to_vec();
    let mut whole: Option<ControlledPath> = None;
    let mut diags = Vec::new();
    let mut bound = 0.0;
    for (i, j) in blocks {
        if i == j {
            continue;
        }
        let local = picard(phi, &x.slice(i, j)?, &init, cfg, i)?;
        init = local.path.y().value(local.path.len() - 1).to_vec();
        bound += local.bound;
        diags.push(local.diag);
        whole = Some(match whole {
            None => local.path,
            Some(w) => w.concat(&local.path)?,
        });
    }
    let path = match whole {
        Some(p) => {
            let t = x.x().times().to_vec();
            ControlledPath::new(p.y().retimed(t.clone())?, p.yp().retimed(t)?, phi.d())?
        }
        None => {
            let c = ControlledPath::constant(x.x().times(), y0, phi.d())?;
            compose(phi, &c).and_then(|f| ControlledPath::new(c.y().clone(), f.y().clone(), phi.d()))?
        }
    };
    Ok((path, diags, bound))
}

/// Solve on successive subintervals where the driver is `ε`-small, matching
/// the initial datum across boundaries. Subintervals that leave the solution
/// set or stop contracting trigger a restart with `ε/2`.
pub fn rde_solve(phi: &SmoothFunction, x: &RoughPath, y0: &[f64], cfg: &RdeConfig) -> Result<RdeSolution> {
    if y0.len() != phi.e() {
        return Err(Error::Dimension(format!("y0 has length {}, φ expects {}", y0.len(), phi.e())));
    }
    if x.dim() != phi.d() {
        return Err(Error::Dimension(format!("driver has dimension {}, φ expects {}", x.dim(), phi.d())));
    }
    if !(cfg.a > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::InvalidParameter("A and tol must be positive".into()));
    }
    let mut eps = match cfg.eps {
        Some(e) if e > 0.0 => e,
        Some(e) => return Err(Error::InvalidParameter(format!("ε = {e}"))),
        None => smallness_epsilon(phi, cfg.a, x.r()),
    };
    let mut halvings = 0;
    loop {
        match solve_with_eps(phi, x, y0, cfg, eps) {
            Ok((path, intervals, error_bound)) => {
                let iterations = intervals.iter().map(|d| d.iterations).sum();
                let final_metric = intervals.iter().filter_map(|d| d.metrics.last().copied()).fold(0.0, f64::max);
                let diagnostics = RdeDiagnostics {
                    iterations,
                    final_metric,
                    subdivisions: intervals.len(),
                    error_bound,
                    eps,
                    halvings,
                    intervals,
                };
                return Ok(RdeSolution { path, diagnostics });
            }
            Err(err @ (Error::NotContracting { .. } | Error::OutsideSolutionSpace { .. })) => {
                if halvings >= cfg.max_halvings {
                    return Err(err);
                }
                halvings += 1;
                eps *= 0.5;
            }
            Err(e) => return Err(e),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityRecord {
    pub d_remainder: f64,
    pub d_derivative: f64,
    pub d_path: f64,
    pub d_x: f64,
    pub d_xx: f64,
    pub d_y0: f64,
    /// `max(‖ΔR‖, ‖ΔY′‖, ‖ΔY‖) / max(‖ΔX‖, ‖Δ𝕏‖, |Δy₀|)`, with `0/0 = 0`.
    pub ratio: f64,
}

/// Solve with `(X, y₀)` and `(X̃, ỹ₀)` and compare the solutions.
pub fn rde_stability(
    phi: &SmoothFunction,
    x: &RoughPath,
    xt: &RoughPath,
    y0: &[f64],
    yt0: &[f64],
    cfg: &RdeConfig,
) -> Result<StabilityRecord> {
    let a = rde_solve(phi, x, y0, cfg)?.path;
    let b = rde_solve(phi, xt, yt0, cfg)?.path;
    let r = x.r();
    let diff = a.sub(&b)?;
    let d_remainder = a.remainder(x.x())?.sub(&b.remainder(xt.x())?)?.variation(r / 2.0);
    let d_derivative = diff.yp().variation(r);
    let d_path = diff.y().variation(r);
    let (d_x, d_xx) = x.distance(xt)?;
    let d_y0 = crate::path::dist(y0, yt0);
    let num = d_remainder.max(d_derivative).max(d_path);
    let den = d_x.max(d_xx).max(d_y0);
    let ratio = if num == 0.0 { 0.0 } else { num / den };
    Ok(StabilityRecord { d_remainder, d_derivative, d_path, d_x, d_xx, d_y0, ratio })
}
