//! Checks for the layers without a registry of their own: the Bellman
//! function, Young/sewing integration, rough lifts, and the RDE solver.
//! They produce the same [`CheckReport`]s as the core registry.

use std::collections::BTreeMap;
use std::time::Instant;

use martlab_core::bellman::{concavity_scan, extremal_search, ConcavityGrid};
use martlab_core::registry::{CheckConfig, CheckReport, Real, DEFAULT_TOL};
use martlab_core::rng;
use martlab_rough::{
    lift, lift_geometric, rde_solve, rough_integral, young_integral, ControlledPath, Interp, RdeConfig, RoughPath,
    SampledPath, SmoothFunction,
};
use rand::Rng;
use rayon::prelude::*;
use serde_json::Value;

use crate::error::{CliError, Result};

pub const CHECKS: &[(&str, &str)] = &[
    ("bellman", "concavity step of U at gamma = 3 on a grid, a failure at gamma < 3, extremal ratio <= sqrt(3)"),
    ("young_sewing", "identity Young integral = 1/2 and |I - Xi| <= sum (2/k)^theta omega^theta on random paths"),
    ("rough_lift", "Chen relation of lifts on all grid triples and int (X - X_0) dX = XX"),
    ("rde", "linear RDE on a smooth driver against the exponential; Picard metric decreasing"),
];

pub fn is_layer_check(name: &str) -> bool {
    CHECKS.iter().any(|(n, _)| *n == name)
}

/// Residual scale for identities that hold exactly up to rounding.
const EXACT_TOL: f64 = 1e-12;
/// Sup-norm tolerance for the RDE against its ODE oracle.
pub const RDE_TOL: f64 = 1e-4;
/// Young integral of the identity against itself.
const YOUNG_IDENTITY_TOL: f64 = 1e-6;

struct Params<'a> {
    cfg: &'a CheckConfig,
    used: BTreeMap<String, Value>,
}

impl Params<'_> {
    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = match self.cfg.params.get(key) {
            None => default,
            Some(v) => v.as_f64().ok_or_else(|| CliError::usage(format!("parameter {key} must be a number")))?,
        };
        self.used.insert(key.to_owned(), Value::from(v));
        Ok(v)
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = match self.cfg.params.get(key) {
            None => default,
            Some(v) => {
                v.as_u64().ok_or_else(|| CliError::usage(format!("parameter {key} must be a nonnegative integer")))?
                    as usize
            }
        };
        self.used.insert(key.to_owned(), Value::from(v));
        Ok(v)
    }

    fn trials(&mut self, default: usize) -> usize {
        let n = self.cfg.trials.unwrap_or(default);
        self.used.insert("trials".into(), Value::from(n));
        n
    }

    fn check_unused(&self) -> Result<()> {
        match self.cfg.params.keys().find(|k| !self.used.contains_key(*k)) {
            Some(k) => Err(CliError::usage(format!("check {} has no parameter {k}", self.cfg.check))),
            None => Ok(()),
        }
    }
}

#[derive(Default)]
struct Tally {
    trials: usize,
    violations: usize,
    hypothesis_failures: usize,
    worst: f64,
    maxima: BTreeMap<String, f64>,
}

impl Tally {
    fn trial(&mut self, ratio: f64, tol: f64) {
        let r = if ratio.is_nan() { f64::INFINITY } else { ratio };
        self.trials += 1;
        if r > 1.0 + tol {
            self.violations += 1;
        }
        self.worst = self.worst.max(r);
    }

    fn measure(&mut self, key: &str, v: f64) {
        let e = self.maxima.entry(key.to_owned()).or_insert(f64::NEG_INFINITY);
        if v > *e || v.is_nan() {
            *e = v;
        }
    }
}

pub fn run_check(cfg: &CheckConfig) -> Result<CheckReport> {
    let start = Instant::now();
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    if !(tol >= 0.0) {
        return Err(CliError::usage(format!("tolerance must be nonnegative, got {tol}")));
    }
    if cfg.corpus.is_some() {
        return Err(CliError::usage(format!("check {} does not take a corpus", cfg.check)));
    }
    let mut p = Params { cfg, used: BTreeMap::new() };
    let seed_for = |label: &str| rng::derive_seed(cfg.seed, &format!("{}/{label}", cfg.check));
    let mut t = Tally::default();
    let constant = match cfg.check.as_str() {
        "bellman" => bellman(&mut p, &mut t, tol)?,
        "young_sewing" => young(&mut p, &mut t, tol, seed_for("paths"))?,
        "rough_lift" => rough(&mut p, &mut t, tol, seed_for("paths"))?,
        "rde" => rde(&mut p, &mut t, tol, seed_for("drivers"))?,
        other => return Err(CliError::usage(format!("unknown check {other}"))),
    };
    p.check_unused()?;
    Ok(CheckReport {
        check: cfg.check.clone(),
        params: p.used,
        trials: t.trials,
        violations: t.violations,
        hypothesis_failures: t.hypothesis_failures,
        worst_ratio: Real(t.worst),
        constant_used: Real(constant),
        seed: cfg.seed,
        runtime_ms: start.elapsed().as_millis() as u64,
        measurements: t.maxima.into_iter().map(|(k, v)| (k, Real(v))).collect(),
    })
}

fn bellman(p: &mut Params, t: &mut Tally, tol: f64) -> Result<f64> {
    let gamma = p.f64("gamma", 3.0)?;
    let probe = p.f64("gamma_probe", 2.9)?;
    let depth = p.usize("extremal_depth", 8)?;
    let r_max = p.usize("r_max", 8)?;
    if r_max == 0 {
        return Err(CliError::usage("r_max must be positive"));
    }
    let grid = ConcavityGrid::default();
    t.measure("grid_points", grid.len() as f64);

    let scan = concavity_scan(&grid, gamma);
    t.trial((-scan.worst.residual).max(0.0) / EXACT_TOL, tol);
    t.trial(scan.inner_branch_error / EXACT_TOL, tol);
    t.measure("worst_residual", scan.worst.residual);
    t.measure("inner_branch_error", scan.inner_branch_error);

    // Below the sharp constant the step must fail somewhere on the grid.
    let probed = concavity_scan(&grid, probe);
    t.trial(if probed.counterexample(EXACT_TOL).is_some() { 0.0 } else { f64::INFINITY }, tol);
    t.measure("probe_residual", probed.worst.residual);

    let r_grid: Vec<f64> = (1..=r_max).map(|r| r as f64).collect();
    let ex = extremal_search(depth, &r_grid)?;
    t.trial(ex.best_ratio / 3f64.sqrt(), tol);
    t.measure("extremal_best_ratio", ex.best_ratio);
    t.measure("extremal_best_r", ex.best_r);
    Ok(3f64.sqrt())
}

/// `±h^H` steps with random magnitudes: a path of finite `r`-variation for
/// `r > 1/H`.
fn holder_walk<R: Rng>(n: usize, hurst: f64, rng: &mut R) -> Vec<f64> {
    let h = (1.0 / n as f64).powf(hurst);
    let mut x = 0.0;
    let mut out = vec![x];
    for _ in 0..n {
        let s = if rng.random_bool(0.5) { 1.0 } else { -1.0 };
        x += s * h * rng.random_range(0.5..1.5);
        out.push(x);
    }
    out
}

fn young(p: &mut Params, t: &mut Tally, tol: f64, seed: u64) -> Result<f64> {
    let trials = p.trials(100);
    let max_steps = p.usize("max_steps", 256)?;
    let identity_steps = p.usize("identity_steps", 1 << 12)?;
    if max_steps < 2 || identity_steps == 0 {
        return Err(CliError::usage("max_steps must be at least 2 and identity_steps positive"));
    }
    let times = SampledPath::uniform_times(identity_steps, 1.0);
    let id = SampledPath::scalar(times.clone(), times, Interp::Linear)?;
    let res = young_integral(&id, &id, 1.5)?;
    let err = (res.sew.value[0] - 0.5).abs();
    t.trial(err / YOUNG_IDENTITY_TOL, tol);
    t.measure("identity_error", err);

    let out: Vec<(f64, f64, usize)> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, usize)> {
            let mut r = rng::stream(seed, i as u64);
            let n = r.random_range(2..=max_steps);
            let hurst = r.random_range(0.6..0.9);
            let rv = 0.5 * (1.0 / hurst + 2.0);
            let interp = if r.random_bool(0.5) { Interp::Constant } else { Interp::Linear };
            let times = SampledPath::uniform_times(n, 1.0);
            let a = SampledPath::scalar(times.clone(), holder_walk(n, hurst, &mut r), interp)?;
            let g = SampledPath::scalar(times, holder_walk(n, hurst, &mut r), interp)?;
            match young_integral(&a, &g, rv) {
                Ok(y) => Ok((y.sew.error(), y.sew.error_bound, y.sew.hypothesis_failures)),
                Err(martlab_rough::Error::SewingBound { err, bound }) => Ok((err, bound, 0)),
                Err(e) => Err(e.into()),
            }
        })
        .collect::<Result<_>>()?;
    for (err, bound, hyp) in out {
        let ratio = if err == 0.0 { 0.0 } else { err / bound };
        t.trial(ratio, tol);
        t.hypothesis_failures += hyp;
        t.measure("bound_ratio", ratio);
    }
    Ok(1.0)
}

/// `(X − X_0, I)` as a controlled path whose rough integral is `𝕏_{0,·}`.
pub fn identity_integrand(x: &RoughPath) -> Result<ControlledPath> {
    let d = x.dim();
    let w = d * d * d;
    let x0 = x.x().value(0).to_vec();
    let y = x.x().map(w, |v| {
        let mut out = vec![0.0; w];
        for i in 0..d {
            for j in 0..d {
                out[(i * d + j) * d + j] = v[i] - x0[i];
            }
        }
        out
    })?;
    let mut yp = vec![0.0; w * d];
    for i in 0..d {
        for j in 0..d {
            yp[((i * d + j) * d + j) * d + i] = 1.0;
        }
    }
    let yp = SampledPath::from_fn(x.x().times().to_vec(), w * d, Interp::Constant, |_| yp.clone())?;
    Ok(ControlledPath::new(y, yp, d)?)
}

fn rough(p: &mut Params, t: &mut Tally, tol: f64, seed: u64) -> Result<f64> {
    let trials = p.trials(50);
    let max_points = p.usize("max_points", 256)?;
    let max_dim = p.usize("max_dim", 2)?;
    if max_points < 2 || max_dim == 0 {
        return Err(CliError::usage("max_points must be at least 2 and max_dim positive"));
    }
    let out: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut r = rng::stream(seed, i as u64);
            let n = r.random_range(1..max_points);
            let d = r.random_range(1..=max_dim);
            let h = 1.0 / (n as f64).sqrt();
            let mut v = vec![0.0; d];
            let mut vals = v.clone();
            for _ in 0..n {
                for c in v.iter_mut() {
                    *c += if r.random_bool(0.5) { h } else { -h };
                }
                vals.extend_from_slice(&v);
            }
            let path = SampledPath::new(SampledPath::uniform_times(n, 1.0), d, vals, Interp::Constant)?;
            let x = if r.random_bool(0.5) { lift(&path, 2.5)? } else { lift_geometric(&path, 2.5)? };
            let chen = x.chen_residual();
            let z = rough_integral(&identity_integrand(&x)?, &x)?;
            let zy = z.z.y();
            let mut integral = 0.0f64;
            for k in 0..x.len() {
                let want = x.xx().get(0, k);
                for (a, b) in zy.value(k).iter().zip(want) {
                    integral = integral.max((a - b).abs());
                }
            }
            Ok((chen, integral))
        })
        .collect::<Result<_>>()?;
    for (chen, integral) in out {
        t.trial(chen.max(integral) / EXACT_TOL, tol);
        t.measure("chen_residual", chen);
        t.measure("integral_residual", integral);
    }
    Ok(1.0)
}

/// `X_t = t` with its exact second level `(t − s)²/2`.
pub fn line_driver(steps: usize, t_end: f64) -> Result<RoughPath> {
    let times = SampledPath::uniform_times(steps, t_end);
    let x = SampledPath::scalar(times.clone(), times.clone(), Interp::Linear)?;
    Ok(RoughPath::from_fn(x, 2.5, |s, u| vec![0.5 * (times[u] - times[s]).powi(2)])?)
}

/// Whether every subinterval's Picard metrics strictly decrease (until they
/// vanish).
pub fn metrics_decrease(sol: &martlab_rough::RdeSolution) -> bool {
    sol.diagnostics.intervals.iter().all(|iv| iv.metrics.windows(2).all(|w| w[1] < w[0] || w[1] == 0.0))
}

fn rde(p: &mut Params, t: &mut Tally, tol: f64, seed: u64) -> Result<f64> {
    let trials = p.trials(20);
    let t_end = p.f64("t_end", 0.3)?;
    let steps = p.usize("steps", 300)?;
    if !(t_end > 0.0) || steps == 0 {
        return Err(CliError::usage("t_end and steps must be positive"));
    }
    let x = line_driver(steps, t_end)?;
    let sol = rde_solve(&SmoothFunction::identity_1d(), &x, &[1.0], &RdeConfig::default())?;
    let err = (0..x.len()).map(|i| (sol.path.y().value(i)[0] - x.x().time(i).exp()).abs()).fold(0.0, f64::max);
    t.trial(err / RDE_TOL, tol);
    t.measure("sup_error", err);

    let out: Vec<(bool, usize)> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, usize)> {
            let mut r = rng::stream(seed, i as u64);
            let n = r.random_range(20..=120);
            // Single steps must stay below the smallness threshold of sin.
            let h = r.random_range(0.002..0.015);
            let mut v = 0.0;
            let mut vals = vec![v];
            for _ in 0..n {
                v += if r.random_bool(0.5) { h } else { -h };
                vals.push(v);
            }
            let path = SampledPath::scalar(SampledPath::uniform_times(n, 1.0), vals, Interp::Constant)?;
            let y0 = r.random_range(-1.0..1.0);
            let sol = rde_solve(&SmoothFunction::sine_1d(), &lift(&path, 2.5)?, &[y0], &RdeConfig::default())?;
            Ok((metrics_decrease(&sol), sol.diagnostics.iterations))
        })
        .collect::<Result<_>>()?;
    for (ok, iters) in out {
        t.trial(if ok { 0.0 } else { f64::INFINITY }, tol);
        t.measure("max_iterations", iters as f64);
    }
    Ok(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(name: &str) -> CheckConfig {
        CheckConfig::new(name, 5)
    }

    #[test]
    fn layer_checks_pass_on_small_runs() {
        for name in ["young_sewing", "rough_lift", "rde"] {
            let rep = run_check(&cfg(name).trials(6)).unwrap();
            assert!(rep.passed(), "{rep:?}");
            assert_eq!(rep.check, name);
        }
    }

    #[test]
    fn unknown_parameters_are_usage_errors() {
        let c = cfg("rde").param("stepz", 10);
        assert!(matches!(run_check(&c), Err(CliError::Usage(_))));
        let c = cfg("young_sewing").param("max_steps", 1);
        assert!(matches!(run_check(&c), Err(CliError::Usage(_))));
    }

    #[test]
    fn line_driver_level_two() {
        let x = line_driver(10, 2.0).unwrap();
        assert!((x.xx().get(0, 10)[0] - 2.0).abs() < 1e-15);
        assert!(x.chen_residual() < 1e-15);
    }
}
