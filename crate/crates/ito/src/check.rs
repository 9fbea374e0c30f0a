//! Report-producing checks for the Itô layer, in the same [`CheckReport`]
//! format as the martingale registry.
//!
//! * `ito_bound`: `‖V^r Π^π(f,g)‖_{L^q}` against `‖V^{p1} f^{(π)}‖_{L^{q1}}
//!   ‖V^∞ g‖_{L^{q0}}` on random trees. The constant is unspecified, so the
//!   ratio is measured; only a positive left side over a vanishing right
//!   side (or a non-finite value) counts as a violation.
//! * `ito_identities`: coarsening, Chen, integration by parts, additivity,
//!   the conditional isometry and the martingale property on random
//!   instances, plus `[g,g]_{0,T} = T` for the scaled walk.
//! * `ito_refinement`: dyadic refinement distances for the walk demo must
//!   not increase. The default levels start at 4, where the dyadic mesh is
//!   finer than the typical oscillation block; coarser starting levels show
//!   the pre-asymptotic growth.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use martlab_core::generators::{increment_on, random_tree, TreeShape};
use martlab_core::ops::norms::lp_norm;
use martlab_core::ops::variation::variation;
use martlab_core::registry::{CheckConfig, CheckReport, Real, ABS_TOL, DEFAULT_TOL};
use martlab_core::rng;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::partition::AdaptedGridPartition;
use crate::refine::{matrix_variation, refine_converge, RefineConfig};
use crate::space::{GridCadlagPath, SampleSpace};
use crate::sums::{self, check_pair, pathwise};

/// Absolute tolerance of the exact identities.
pub const IDENTITY_TOL: f64 = 1e-12;
/// Tolerance of identities that pass through conditional expectations.
pub const CONDITIONAL_TOL: f64 = 1e-10;

pub const CHECKS: &[(&str, &str)] = &[
    ("ito_bound", "||V^r Pi(f,g)||_q against ||V^p1 f_pi||_q1 ||V^inf g||_q0; ratio measured"),
    ("ito_identities", "coarsening, Chen, integration by parts, additivity, isometry, martingale property"),
    ("ito_refinement", "dyadic refinement distances of the walk demo are nonincreasing"),
];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundExponents {
    pub r: f64,
    pub p1: f64,
    pub q0: f64,
    pub q1: f64,
}

impl Default for BoundExponents {
    fn default() -> Self {
        Self { r: 2.0, p1: 4.0, q0: 2.0, q1: 4.0 }
    }
}

impl BoundExponents {
    /// `1/q = 1/q0 + 1/q1`.
    pub fn q(&self) -> f64 {
        1.0 / (1.0 / self.q0 + 1.0 / self.q1)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.q1 > 0.0
            && self.q0 >= 1.0
            && self.q0.is_finite()
            && self.r > 0.0
            && self.p1 > 0.0
            && 1.0 / self.r < 1.0 / self.p1 + 0.5;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!(
                "need 0 < q1, 1 <= q0 < inf, r, p1 > 0 and 1/r < 1/p1 + 1/2; got {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundMeasurement {
    pub lhs: f64,
    pub rhs: f64,
    pub ratio: f64,
}

fn quotient(lhs: f64, rhs: f64) -> f64 {
    if lhs <= ABS_TOL {
        0.0
    } else {
        lhs / rhs
    }
}

/// Both sides of the bound, computed exactly on the space's paths.
pub fn ito_bound_measure(
    f: &GridCadlagPath,
    g: &GridCadlagPath,
    pi: &AdaptedGridPartition,
    e: &BoundExponents,
) -> Result<BoundMeasurement> {
    check_pair(f, g, pi)?;
    e.validate()?;
    let n = f.grid().len();
    let per_path: Vec<(f64, f64, f64)> = (0..pi.space().paths())
        .into_par_iter()
        .map(|p| -> Result<(f64, f64, f64)> {
            let (fx, gx) = (f.path(p), g.path(p));
            let pts = pi.points(p);
            let m = pathwise::ito_matrix(&fx, &gx, pts);
            let lhs = matrix_variation(&m, n, e.r)?;
            let vf = variation(&pathwise::discretize(&fx, pts), e.p1)?.value;
            let vg = variation(&gx, f64::INFINITY)?.value;
            Ok((lhs, vf, vg))
        })
        .collect::<Result<_>>()?;
    let w = pi.space().weights();
    let col = |k: usize| -> Vec<f64> { per_path.iter().map(|t| [t.0, t.1, t.2][k]).collect() };
    let lhs = lp_norm(&col(0), w, e.q());
    let rhs = lp_norm(&col(1), w, e.q1) * lp_norm(&col(2), w, e.q0);
    Ok(BoundMeasurement { lhs, rhs, ratio: quotient(lhs, rhs) })
}

/// Accumulates trial outcomes into a report, mirroring the registry's
/// conventions: a trial's ratio is the worst of its assertions, and a
/// violation is a ratio above `1 + tol`.
struct Tally {
    tol: f64,
    trials: usize,
    violations: usize,
    worst: f64,
    maxima: BTreeMap<String, f64>,
}

impl Tally {
    fn new(tol: f64) -> Self {
        Self { tol, trials: 0, violations: 0, worst: 0.0, maxima: BTreeMap::new() }
    }

    fn trial(&mut self, ratio: f64, measures: &[(&str, f64)]) {
        let r = if ratio.is_nan() { f64::INFINITY } else { ratio };
        self.trials += 1;
        if r > 1.0 + self.tol {
            self.violations += 1;
        }
        self.worst = self.worst.max(r);
        for &(k, v) in measures {
            let e = self.maxima.entry(k.to_owned()).or_insert(f64::NEG_INFINITY);
            if v > *e || v.is_nan() {
                *e = v;
            }
        }
    }

    fn report(self, check: &str, params: BTreeMap<String, Value>, constant: f64, seed: u64, start: Instant) -> CheckReport {
        CheckReport {
            check: check.to_owned(),
            params,
            trials: self.trials,
            violations: self.violations,
            hypothesis_failures: 0,
            worst_ratio: Real(self.worst),
            constant_used: Real(constant),
            seed,
            runtime_ms: start.elapsed().as_millis() as u64,
            measurements: self.maxima.into_iter().map(|(k, v)| (k, Real(v))).collect(),
        }
    }
}

/// Ratio for a measured-only bound: 0 when consistent with some finite
/// constant, `∞` otherwise.
fn finite_constant_ratio(m: &BoundMeasurement) -> f64 {
    if m.lhs.is_finite() && m.rhs.is_finite() && m.ratio.is_finite() {
        0.0
    } else {
        f64::INFINITY
    }
}

/// One instance of the bound, as a single-trial report.
pub fn ito_bound_check(
    f: &GridCadlagPath,
    g: &GridCadlagPath,
    pi: &AdaptedGridPartition,
    e: &BoundExponents,
) -> Result<CheckReport> {
    let start = Instant::now();
    let m = ito_bound_measure(f, g, pi, e)?;
    let mut t = Tally::new(DEFAULT_TOL);
    t.trial(finite_constant_ratio(&m), &[("bound_ratio", m.ratio), ("lhs", m.lhs), ("rhs", m.rhs)]);
    let mut params = exponent_params(e);
    params.insert("enumeration".into(), serde_json::to_value(f.space().enumeration())?);
    Ok(t.report("ito_bound", params, f64::INFINITY, 0, start))
}

fn exponent_params(e: &BoundExponents) -> BTreeMap<String, Value> {
    [("r", e.r), ("p1", e.p1), ("q0", e.q0), ("q1", e.q1)].into_iter().map(|(k, v)| (k.to_owned(), Value::from(v))).collect()
}

/// A random instance on a random tree: an adapted integrand, a martingale
/// integrator, and two nested adapted partitions.
pub struct RandomInstance {
    pub f: GridCadlagPath,
    pub g: GridCadlagPath,
    pub pi: AdaptedGridPartition,
    pub tau: AdaptedGridPartition,
}

fn random_marks<R: Rng>(n: usize, p: f64, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.random_bool(p)).collect()
}

pub fn random_instance<R: Rng>(depth: usize, rng: &mut R) -> Result<RandomInstance> {
    let tree = Arc::new(random_tree(depth, TreeShape::default(), rng)?);
    let space = SampleSpace::tree(tree.clone(), 1.0)?;
    let gm = increment_on(tree.clone(), 0.0, rng);
    let g = GridCadlagPath::from_process(space.clone(), gm.process())?;
    let f = match rng.random_range(0..4) {
        0 => GridCadlagPath::from_process(space.clone(), increment_on(tree.clone(), rng.random_range(-1.0..1.0), rng).process())?,
        1 => g.adapted_map(|x| x.iter().map(|v| v.abs()).fold(0.0, f64::max)),
        2 => g.clone(),
        _ => g.adapted_map(|x| x[x.len() - 1].powi(2) - x.len() as f64 * 0.1),
    };
    let nodes = tree.node_count();
    let pi = AdaptedGridPartition::from_marks(space.clone(), &random_marks(nodes, 0.35, rng))?;
    let tau = pi.union(&AdaptedGridPartition::from_marks(space, &random_marks(nodes, 0.35, rng))?)?;
    Ok(RandomInstance { f, g, pi, tau })
}

/// Residuals of every exact identity on one instance, and the sup norms
/// used to scale them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResiduals {
    pub coarsening: f64,
    pub chen: f64,
    pub parts: f64,
    pub additivity: f64,
    pub isometry: f64,
    pub martingale: f64,
}

impl IdentityResiduals {
    pub fn max_exact(&self) -> f64 {
        [self.coarsening, self.chen, self.parts, self.additivity].into_iter().fold(0.0, f64::max)
    }

    pub fn max_conditional(&self) -> f64 {
        self.isometry.max(self.martingale)
    }
}

pub fn identity_residuals<R: Rng>(inst: &RandomInstance, rng: &mut R) -> Result<IdentityResiduals> {
    let RandomInstance { f, g, pi, tau } = inst;
    let n = f.grid().steps();
    let s = rng.random_range(0..=n);
    let u = rng.random_range(s..=n);
    let with_su = AdaptedGridPartition::deterministic(pi.space().clone(), &[s, u])?.union(pi)?;
    Ok(IdentityResiduals {
        coarsening: sums::coarsening_residual(f, g, pi, tau)?,
        chen: sums::chen_residual(f, g, pi)?,
        parts: sums::parts_residual(f, g, pi)?,
        additivity: sums::additivity_residual(f, g, pi)?,
        isometry: sums::isometry_residual(g, &with_su, s, u)?,
        martingale: sums::martingale_residual(f, g, pi)?,
    })
}

struct Params<'a> {
    cfg: &'a CheckConfig,
    used: BTreeMap<String, Value>,
}

impl<'a> Params<'a> {
    fn f64(&mut self, key: &str, default: f64) -> Result<f64> {
        let v = match self.cfg.params.get(key) {
            None => default,
            Some(v) => v.as_f64().ok_or_else(|| Error::InvalidParameter(format!("parameter {key} must be a number")))?,
        };
        self.used.insert(key.to_owned(), Value::from(v));
        Ok(v)
    }

    fn usize(&mut self, key: &str, default: usize) -> Result<usize> {
        let v = match self.cfg.params.get(key) {
            None => default,
            Some(v) => {
                v.as_u64().ok_or_else(|| Error::InvalidParameter(format!("parameter {key} must be a nonnegative integer")))?
                    as usize
            }
        };
        self.used.insert(key.to_owned(), Value::from(v));
        Ok(v)
    }

    fn depth(&mut self, default: usize) -> Result<usize> {
        let d = self.cfg.depth.unwrap_or(default);
        if d == 0 || d > 10 {
            return Err(Error::InvalidParameter(format!("depth must be in 1..=10, got {d}")));
        }
        self.used.insert("depth".into(), Value::from(d));
        Ok(d)
    }
}

pub fn is_ito_check(name: &str) -> bool {
    CHECKS.iter().any(|(n, _)| *n == name)
}

/// Run one of [`CHECKS`] from a registry-style configuration.
pub fn run_check(cfg: &CheckConfig) -> Result<CheckReport> {
    let start = Instant::now();
    let tol = cfg.tol.unwrap_or(DEFAULT_TOL);
    if !(tol >= 0.0) {
        return Err(Error::InvalidParameter(format!("tolerance must be nonnegative, got {tol}")));
    }
    if cfg.corpus.is_some() {
        return Err(Error::InvalidParameter(format!("check {} does not take a corpus", cfg.check)));
    }
    let mut p = Params { cfg, used: BTreeMap::new() };
    let seed_for = |label: &str| rng::derive_seed(cfg.seed, &format!("{}/{label}", cfg.check));
    let mut tally = Tally::new(tol);
    let constant;
    match cfg.check.as_str() {
        "ito_bound" => {
            let e = BoundExponents { r: p.f64("r", 2.0)?, p1: p.f64("p1", 4.0)?, q0: p.f64("q0", 2.0)?, q1: p.f64("q1", 4.0)? };
            e.validate()?;
            let depth = p.depth(6)?;
            let trials = cfg.trials.unwrap_or(200);
            let seed = seed_for("instances");
            let ms: Vec<BoundMeasurement> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut r = rng::stream(seed, i as u64);
                    let inst = random_instance(depth, &mut r)?;
                    ito_bound_measure(&inst.f, &inst.g, &inst.pi, &e)
                })
                .collect::<Result<_>>()?;
            for m in &ms {
                tally.trial(finite_constant_ratio(m), &[("bound_ratio", m.ratio)]);
            }
            constant = f64::INFINITY;
        }
        "ito_identities" => {
            let depth = p.depth(5)?;
            let trials = cfg.trials.unwrap_or(200);
            let seed = seed_for("instances");
            let rs: Vec<IdentityResiduals> = (0..trials)
                .into_par_iter()
                .map(|i| {
                    let mut r = rng::stream(seed, i as u64);
                    let inst = random_instance(depth, &mut r)?;
                    identity_residuals(&inst, &mut r)
                })
                .collect::<Result<_>>()?;
            for r in &rs {
                let ratio = (r.max_exact() / IDENTITY_TOL).max(r.max_conditional() / CONDITIONAL_TOL);
                tally.trial(
                    ratio,
                    &[
                        ("coarsening_residual", r.coarsening),
                        ("chen_residual", r.chen),
                        ("parts_residual", r.parts),
                        ("additivity_residual", r.additivity),
                        ("isometry_residual", r.isometry),
                        ("martingale_residual", r.martingale),
                    ],
                );
            }
            // The scaled walk on a sampled space: [g,g]_{0,T} = T per path.
            let steps = p.usize("walk_steps", 256)?;
            let paths = p.usize("walk_paths", 256)?;
            let space = SampleSpace::uniform(2, steps, 1.0, paths, seed_for("walk"))?;
            let g = GridCadlagPath::scaled_walk(space.clone())?;
            let cov = sums::covariation_sum(&g, &g, &AdaptedGridPartition::full(space), 0, steps)?;
            let dev = cov.iter().fold(0.0f64, |m, c| m.max((c - 1.0).abs()));
            tally.trial(dev / IDENTITY_TOL, &[("walk_covariation_deviation", dev)]);
            constant = 1.0;
        }
        "ito_refinement" => {
            let steps = p.usize("steps", 256)?;
            let paths = p.usize("paths", 512)?;
            let eps = p.f64("eps", 0.5)?;
            let rc = RefineConfig {
                start_level: p.usize("start_level", 4)? as u32,
                levels: p.usize("levels", 4)? as u32,
                r: p.f64("r", 2.0)?,
                p_tilde: p.f64("p_tilde", 3.0)?,
                q: p.f64("q", 2.0)?,
                tol,
            };
            let demo = walk_demo(steps, paths, eps, seed_for("walk"))?;
            let d = refine_converge(&demo.g, &demo.g, &demo.pi, &rc)?;
            p.used.insert("enumeration".into(), serde_json::to_value(d.enumeration)?);
            let dists = d.distances();
            for (k, w) in dists.windows(2).enumerate() {
                let ratio = if w[0] > 0.0 { w[1] / w[0] } else if w[1] > 0.0 { f64::INFINITY } else { 0.0 };
                tally.trial(ratio, &[(&format!("distance_{}", k + 2), w[1]), ("distance_1", w[0])]);
            }
            let errs: Vec<f64> = d.levels.iter().map(|l| l.discretization_error).collect();
            for (k, w) in errs.windows(2).enumerate() {
                let ratio = if w[0] > 0.0 { w[1] / w[0] } else if w[1] > 0.0 { f64::INFINITY } else { 0.0 };
                tally.trial(ratio, &[(&format!("discretization_error_{}", k + 1), w[1])]);
            }
            constant = 1.0;
        }
        other => return Err(Error::InvalidParameter(format!("unknown check `{other}`"))),
    }
    let mut params = p.used;
    if cfg.check != "ito_refinement" {
        params.insert("trials".into(), Value::from(tally.trials));
    }
    Ok(tally.report(&cfg.check, params, constant, cfg.seed, start))
}

/// The walk demo: a scaled ±1/√N walk on `[0, 1]` (sampled when the tree
/// is too large to enumerate), integrated against itself over an
/// `ε`-oscillation partition.
pub struct WalkDemo {
    pub g: GridCadlagPath,
    pub pi: AdaptedGridPartition,
}

pub fn walk_demo(steps: usize, paths: usize, eps: f64, seed: u64) -> Result<WalkDemo> {
    let space = SampleSpace::uniform(2, steps, 1.0, paths, seed)?;
    let g = GridCadlagPath::scaled_walk(space)?;
    let pi = AdaptedGridPartition::oscillation(&g, eps)?;
    Ok(WalkDemo { g, pi })
}
