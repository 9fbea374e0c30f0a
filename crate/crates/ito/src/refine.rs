//! Cauchy diagnostics for Itô sums along dyadic refinements of an adapted
//! partition.
//!
//! Level `n` uses `π^{(n)} = π ∪ {jT/2^n}`. For each level we record the
//! `L^q` norm of `V^r(Π^{π^{(n)}} − Π^{π^{(n−1)}})` (the difference viewed as
//! a two-parameter process) and of the discretisation error `V^{p̃}(f −
//! f^{(π^{(n)})})`. Growth across levels is reported, not raised: it is a
//! legitimate outcome for integrands outside the convergence hypotheses.

use martlab_core::ops::norms::lp_norm;
use martlab_core::ops::variation::{variation, variation_by};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::AdaptedGridPartition;
use crate::space::{Enumeration, GridCadlagPath};
use crate::sums::{check_pair, pathwise};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// First dyadic level; levels `start_level..=start_level + levels` are
    /// compared.
    pub start_level: u32,
    pub levels: u32,
    /// Variation exponent for the two-parameter differences.
    pub r: f64,
    /// Variation exponent for `f − f^{(π)}`.
    pub p_tilde: f64,
    /// Integrability exponent of the norms over paths.
    pub q: f64,
    /// Relative slack when comparing consecutive levels.
    pub tol: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self { start_level: 0, levels: 4, r: 2.0, p_tilde: 3.0, q: 2.0, tol: 1e-9 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelDiagnostics {
    pub level: u32,
    pub mean_points: f64,
    /// Distance to the previous level; absent at level 0.
    pub distance: Option<f64>,
    pub discretization_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefineDiagnostics {
    pub config: RefineConfig,
    pub enumeration: Enumeration,
    pub levels: Vec<LevelDiagnostics>,
    pub distances_nonincreasing: bool,
    pub errors_nonincreasing: bool,
}

impl RefineDiagnostics {
    /// Both sequences shrink (to tolerance) across the levels.
    pub fn cauchy(&self) -> bool {
        self.distances_nonincreasing && self.errors_nonincreasing
    }

    pub fn distances(&self) -> Vec<f64> {
        self.levels.iter().filter_map(|l| l.distance).collect()
    }
}

fn nonincreasing(v: &[f64], tol: f64) -> bool {
    v.windows(2).all(|w| w[1] <= w[0] * (1.0 + tol) + tol * 1e-3)
}

/// Two-parameter `V^r` of a row-major upper-triangular matrix.
pub fn matrix_variation(m: &[f64], n: usize, r: f64) -> Result<f64> {
    Ok(variation_by(n, |i, j| m[i * n + j].abs(), r)?.value)
}

pub fn refine_converge(
    f: &GridCadlagPath,
    g: &GridCadlagPath,
    pi: &AdaptedGridPartition,
    cfg: &RefineConfig,
) -> Result<RefineDiagnostics> {
    check_pair(f, g, pi)?;
    if !(cfg.r > 0.0 && cfg.p_tilde > 0.0 && cfg.q > 0.0 && cfg.tol >= 0.0) {
        return Err(Error::InvalidParameter("refinement exponents must be positive".into()));
    }
    let parts: Vec<AdaptedGridPartition> =
        (cfg.start_level..=cfg.start_level + cfg.levels).map(|n| pi.refine(n)).collect();
    let len = f.grid().len();
    // Per path: (distance, discretisation error) at every level.
    let per_path: Vec<Vec<(f64, f64)>> = (0..pi.space().paths())
        .into_par_iter()
        .map(|p| -> Result<Vec<(f64, f64)>> {
            let (fx, gx) = (f.path(p), g.path(p));
            let mut prev: Option<Vec<f64>> = None;
            let mut out = Vec::with_capacity(parts.len());
            for part in &parts {
                let pts = part.points(p);
                let m = pathwise::ito_matrix(&fx, &gx, pts);
                let dist = match &prev {
                    Some(q) => {
                        let diff: Vec<f64> = m.iter().zip(q).map(|(a, b)| a - b).collect();
                        matrix_variation(&diff, len, cfg.r)?
                    }
                    None => 0.0,
                };
                let fp = pathwise::discretize(&fx, pts);
                let e: Vec<f64> = fx.iter().zip(&fp).map(|(a, b)| a - b).collect();
                out.push((dist, variation(&e, cfg.p_tilde)?.value));
                prev = Some(m);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let w = pi.space().weights();
    let levels: Vec<LevelDiagnostics> = parts
        .iter()
        .enumerate()
        .map(|(n, part)| {
            let d: Vec<f64> = per_path.iter().map(|v| v[n].0).collect();
            let e: Vec<f64> = per_path.iter().map(|v| v[n].1).collect();
            LevelDiagnostics {
                level: cfg.start_level + n as u32,
                mean_points: part.mean_len(),
                distance: (n > 0).then(|| lp_norm(&d, w, cfg.q)),
                discretization_error: lp_norm(&e, w, cfg.q),
            }
        })
        .collect();
    let dists: Vec<f64> = levels.iter().filter_map(|l| l.distance).collect();
    let errs: Vec<f64> = levels.iter().map(|l| l.discretization_error).collect();
    Ok(RefineDiagnostics {
        config: *cfg,
        enumeration: pi.space().enumeration(),
        distances_nonincreasing: nonincreasing(&dists, cfg.tol),
        errors_nonincreasing: nonincreasing(&errs, cfg.tol),
        levels,
    })
}
