//! Itô sums, discretisation and covariation sums, pathwise on grid indices,
//! and the exact identities relating them.
//!
//! All time arguments are grid indices `s ≤ u`; real times map to indices by
//! [`TimeGrid::index_at`](crate::space::TimeGrid::index_at), which is exact
//! for right-continuous step paths.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::partition::{floor_index, AdaptedGridPartition};
use crate::space::{GridCadlagPath, SampleSpace};

/// Pathwise kernels on plain slices.
pub mod pathwise {
    use super::floor_index;

    /// `Σ_{s<π_j<u} (f_{π_j} − f_{⌊s,π⌋}) (g_{π_{j+1}∧u} − g_{π_j})`, term by
    /// term.
    pub fn ito_sum(f: &[f64], g: &[f64], pts: &[usize], s: usize, u: usize) -> f64 {
        let fs = f[floor_index(pts, s)];
        let mut acc = 0.0;
        for (j, &a) in pts.iter().enumerate() {
            if a <= s {
                continue;
            }
            if a >= u {
                break;
            }
            let b = pts.get(j + 1).map_or(u, |&b| b.min(u));
            acc += (f[a] - fs) * (g[b] - g[a]);
        }
        acc
    }

    /// `f^{(π)}_k = f_{⌊k,π⌋}`.
    pub fn discretize(f: &[f64], pts: &[usize]) -> Vec<f64> {
        (0..f.len()).map(|k| f[floor_index(pts, k)]).collect()
    }

    /// All `Π^π(f,g)_{s,u}`, `s ≤ u`, as a row-major `len × len` matrix
    /// (zero below the diagonal). Uses `Π^π_{s,u} = Σ_{s≤v<u} (f^{(π)}_v −
    /// f^{(π)}_s)(g_{v+1} − g_v)`, which is the coarsening identity with the
    /// full grid as the finer partition.
    pub fn ito_matrix(f: &[f64], g: &[f64], pts: &[usize]) -> Vec<f64> {
        let n = f.len();
        let fp = discretize(f, pts);
        let mut m = vec![0.0; n * n];
        for s in 0..n {
            let mut acc = 0.0;
            for u in s + 1..n {
                acc += (fp[u - 1] - fp[s]) * (g[u] - g[u - 1]);
                m[s * n + u] = acc;
            }
        }
        m
    }

    /// `Σ_{⌊s⌋ ≤ π_j < ⌊u⌋} δf_{π_j,π_{j+1}} δg_{π_j,π_{j+1}}`.
    pub fn covariation(f: &[f64], g: &[f64], pts: &[usize], s: usize, u: usize) -> f64 {
        let (lo, hi) = (floor_index(pts, s), floor_index(pts, u));
        pts.windows(2)
            .filter(|w| w[0] >= lo && w[0] < hi)
            .map(|w| (f[w[1]] - f[w[0]]) * (g[w[1]] - g[w[0]]))
            .sum()
    }

    /// Cumulative covariation `C_k = [f,g]^π_{0,k}`; then `[f,g]^π_{s,u} =
    /// C_u − C_s` because both sums run over blocks between floors.
    pub fn covariation_cumulative(f: &[f64], g: &[f64], pts: &[usize]) -> Vec<f64> {
        let mut out = vec![0.0; f.len()];
        let mut acc = 0.0;
        let mut j = 0;
        for (k, o) in out.iter_mut().enumerate() {
            while j + 1 < pts.len() && pts[j + 1] <= k {
                acc += (f[pts[j + 1]] - f[pts[j]]) * (g[pts[j + 1]] - g[pts[j]]);
                j += 1;
            }
            *o = acc;
        }
        out
    }
}

pub(crate) fn check_pair(f: &GridCadlagPath, g: &GridCadlagPath, pi: &AdaptedGridPartition) -> Result<()> {
    if SampleSpace::same(f.space(), g.space()) && SampleSpace::same(f.space(), pi.space()) {
        Ok(())
    } else {
        Err(Error::SpaceMismatch)
    }
}

fn check_times(f: &GridCadlagPath, s: usize, u: usize) -> Result<()> {
    if s > u || u > f.grid().steps() {
        return Err(Error::InvalidParameter(format!("need s <= u <= {}, got s = {s}, u = {u}", f.grid().steps())));
    }
    Ok(())
}

/// `Π^π(f,g)_{s,u}` on every path.
pub fn ito_sum(f: &GridCadlagPath, g: &GridCadlagPath, pi: &AdaptedGridPartition, s: usize, u: usize) -> Result<Vec<f64>> {
    check_pair(f, g, pi)?;
    check_times(f, s, u)?;
    Ok((0..pi.space().paths())
        .into_par_iter()
        .map(|p| pathwise::ito_sum(&f.path(p), &g.path(p), pi.points(p), s, u))
        .collect())
}

/// `f^{(π)}`, again an adapted grid process.
pub fn discretize(f: &GridCadlagPath, pi: &AdaptedGridPartition) -> Result<GridCadlagPath> {
    if !SampleSpace::same(f.space(), pi.space()) {
        return Err(Error::SpaceMismatch);
    }
    let paths: Vec<Vec<f64>> = (0..pi.space().paths()).map(|p| pathwise::discretize(&f.path(p), pi.points(p))).collect();
    GridCadlagPath::from_paths(f.space().clone(), &paths)
}

/// `[f,g]^π_{s,u}` on every path.
pub fn covariation_sum(f: &GridCadlagPath, g: &GridCadlagPath, pi: &AdaptedGridPartition, s: usize, u: usize) -> Result<Vec<f64>> {
    check_pair(f, g, pi)?;
    check_times(f, s, u)?;
    Ok((0..pi.space().paths()).map(|p| pathwise::covariation(&f.path(p), &g.path(p), pi.points(p), s, u)).collect())
}

fn max_over_paths(n: usize, h: impl Fn(usize) -> f64 + Send + Sync) -> f64 {
    (0..n).into_par_iter().map(h).reduce(|| 0.0, |a, b| if b > a || b.is_nan() { b } else { a })
}

/// `max |Π^π(f,g)_{s,u} − Π^τ(f^{(π)},g)_{s,u}|` over paths and grid pairs,
/// for `π ⊆ τ`. Both sides are evaluated term by term.
pub fn coarsening_residual(
    f: &GridCadlagPath,
    g: &GridCadlagPath,
    pi: &AdaptedGridPartition,
    tau: &AdaptedGridPartition,
) -> Result<f64> {
    check_pair(f, g, pi)?;
    if !pi.is_coarser_than(tau) {
        return Err(Error::InvalidPartition("the second partition must refine the first".into()));
    }
    let n = f.grid().len();
    Ok(max_over_paths(pi.space().paths(), |p| {
        let (fx, gx) = (f.path(p), g.path(p));
        let fpi = pathwise::discretize(&fx, pi.points(p));
        let mut worst = 0.0f64;
        for s in 0..n {
            for u in s..n {
                let a = pathwise::ito_sum(&fx, &gx, pi.points(p), s, u);
                let b = pathwise::ito_sum(&fpi, &gx, tau.points(p), s, u);
                worst = worst.max((a - b).abs());
            }
        }
        worst
    }))
}

/// `max |Π_{s,w} − Π_{s,u} − Π_{u,w} − δf^{(π)}_{s,u} δg_{u,w}|` over paths
/// and grid triples `s ≤ u ≤ w`.
pub fn chen_residual(f: &GridCadlagPath, g: &GridCadlagPath, pi: &AdaptedGridPartition) -> Result<f64> {
    check_pair(f, g, pi)?;
    let n = f.grid().len();
    Ok(max_over_paths(pi.space().paths(), |p| {
        let (fx, gx) = (f.path(p), g.path(p));
        let m = pathwise::ito_matrix(&fx, &gx, pi.points(p));
        let fp = pathwise::discretize(&fx, pi.points(p));
        let mut worst = 0.0f64;
        for s in 0..n {
            for u in s..n {
                let base = m[s * n + u];
                let df = fp[u] - fp[s];
                for w in u..n {
                    let r = m[s * n + w] - base - m[u * n + w] - df * (gx[w] - gx[u]);
                    worst = worst.max(r.abs());
                }
            }
        }
        worst
    }))
}

/// `max |δf^{(π)}_{s,u} δg^{(π)}_{s,u} − Π^π(f,g)_{s,⌊u⌋} − Π^π(g,f)_{s,⌊u⌋}
/// − [f,g]^π_{s,u}|` over paths and grid pairs.
pub fn parts_residual(f: &GridCadlagPath, g: &GridCadlagPath, pi: &AdaptedGridPartition) -> Result<f64> {
    check_pair(f, g, pi)?;
    let n = f.grid().len();
    Ok(max_over_paths(pi.space().paths(), |p| {
        let (fx, gx) = (f.path(p), g.path(p));
        let pts = pi.points(p);
        let mfg = pathwise::ito_matrix(&fx, &gx, pts);
        let mgf = pathwise::ito_matrix(&gx, &fx, pts);
        let (fp, gp) = (pathwise::discretize(&fx, pts), pathwise::discretize(&gx, pts));
        let cov = pathwise::covariation_cumulative(&fx, &gx, pts);
        let mut worst = 0.0f64;
        for s in 0..n {
            for u in s..n {
                let fu = floor_index(pts, u).max(s);
                let lhs = (fp[u] - fp[s]) * (gp[u] - gp[s]) - mfg[s * n + fu] - mgf[s * n + fu];
                worst = worst.max((lhs - (cov[u] - cov[s])).abs());
            }
        }
        worst
    }))
}

/// `max |[f,g]_{s,w} − [f,g]_{s,u} − [f,g]_{u,w}|` over paths and triples.
pub fn additivity_residual(f: &GridCadlagPath, g: &GridCadlagPath, pi: &AdaptedGridPartition) -> Result<f64> {
    check_pair(f, g, pi)?;
    let n = f.grid().len();
    Ok(max_over_paths(pi.space().paths(), |p| {
        let (fx, gx) = (f.path(p), g.path(p));
        let pts = pi.points(p);
        let c: Vec<Vec<f64>> = (0..n).map(|s| (0..n).map(|u| if u >= s { pathwise::covariation(&fx, &gx, pts, s, u) } else { 0.0 }).collect()).collect();
        let mut worst = 0.0f64;
        for s in 0..n {
            for u in s..n {
                for w in u..n {
                    worst = worst.max((c[s][w] - c[s][u] - c[u][w]).abs());
                }
            }
        }
        worst
    }))
}

/// Level-`k` conditional expectation of per-leaf values, read back per leaf.
fn cond_per_leaf(space: &SampleSpace, leaf_values: &[f64], k: usize) -> Result<Vec<f64>> {
    let tree = space.tree_ref().ok_or(Error::NeedsTree("conditional expectations"))?;
    let avg = martlab_core::process::conditional_expectation(tree, leaf_values, k)?;
    let base = tree.level(k).start;
    Ok(tree.leaves().map(|l| avg[tree.ancestor(l, k) - base]).collect())
}

/// `max |E_s [f,f]^π_{s,u} − E_s |δf_{s,u}|²|` over atoms, for `s, u ∈ π`
/// on every path. Needs an enumerated tree.
pub fn isometry_residual(f: &GridCadlagPath, pi: &AdaptedGridPartition, s: usize, u: usize) -> Result<f64> {
    check_pair(f, f, pi)?;
    check_times(f, s, u)?;
    if !f.space().is_exact() {
        return Err(Error::NeedsTree("isometry_residual"));
    }
    if !(pi.contains_everywhere(s) && pi.contains_everywhere(u)) {
        return Err(Error::InvalidPartition(format!("{s} and {u} must be partition points on every path")));
    }
    let paths: Vec<Vec<f64>> = f.paths().collect();
    let cov: Vec<f64> = paths.iter().enumerate().map(|(p, x)| pathwise::covariation(x, x, pi.points(p), s, u)).collect();
    let sq: Vec<f64> = paths.iter().map(|x| (x[u] - x[s]).powi(2)).collect();
    let a = cond_per_leaf(f.space(), &cov, s)?;
    let b = cond_per_leaf(f.space(), &sq, s)?;
    Ok(a.iter().zip(&b).fold(0.0, |m, (x, y)| m.max((x - y).abs())))
}

/// `max |E_u Π^π(f,g)_{s,w} − Π^π(f,g)_{s,u}|` over `s ≤ u ≤ w` and atoms.
/// Zero (to rounding) when `f` is adapted, `g` a martingale and `π`
/// adapted. Needs an enumerated tree.
pub fn martingale_residual(f: &GridCadlagPath, g: &GridCadlagPath, pi: &AdaptedGridPartition) -> Result<f64> {
    check_pair(f, g, pi)?;
    if !f.space().is_exact() {
        return Err(Error::NeedsTree("martingale_residual"));
    }
    let n = f.grid().len();
    let mats: Vec<Vec<f64>> = (0..pi.space().paths())
        .into_par_iter()
        .map(|p| pathwise::ito_matrix(&f.path(p), &g.path(p), pi.points(p)))
        .collect();
    let mut worst = 0.0f64;
    for s in 0..n {
        for w in s..n {
            let leaf_w: Vec<f64> = mats.iter().map(|m| m[s * n + w]).collect();
            for u in s..=w {
                let cond = cond_per_leaf(f.space(), &leaf_w, u)?;
                for (c, m) in cond.iter().zip(&mats) {
                    worst = worst.max((c - m[s * n + u]).abs());
                }
            }
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn literal_and_matrix_forms_agree() {
        let f = [0.0, 1.0, -0.5, 2.0, 0.25, 1.5, -1.0];
        let g = [1.0, 0.0, 0.5, 3.0, -2.0, 0.0, 0.75];
        for pts in [vec![0], vec![0, 3], vec![0, 1, 2, 3, 4, 5, 6], vec![0, 2, 5]] {
            let m = pathwise::ito_matrix(&f, &g, &pts);
            for s in 0..7 {
                for u in s..7 {
                    let lit = pathwise::ito_sum(&f, &g, &pts, s, u);
                    assert!((m[s * 7 + u] - lit).abs() < 1e-14, "{pts:?} {s} {u}");
                }
            }
        }
    }

    #[test]
    fn endpoint_only_partitions() {
        let f = [0.0, 1.0, 3.0];
        let g = [0.0, 2.0, 5.0];
        // π = {0}: no point strictly inside (0, u).
        assert_eq!(pathwise::ito_sum(&f, &g, &[0], 0, 2), 0.0);
        // π = {0, 1}: one term (f_1 − f_0)(g_2 − g_1).
        assert_eq!(pathwise::ito_sum(&f, &g, &[0, 1], 0, 2), 3.0);
        assert_eq!(pathwise::ito_sum(&f, &g, &[0, 1], 1, 2), 0.0);
    }

    #[test]
    fn covariation_of_ramp() {
        let h = 0.125;
        let f: Vec<f64> = (0..9).map(|k| k as f64 * h).collect();
        let pts: Vec<usize> = (0..9).collect();
        assert!((pathwise::covariation(&f, &f, &pts, 0, 8) - 8.0 * h * h).abs() < 1e-15);
        let c = pathwise::covariation_cumulative(&f, &f, &[0, 3, 7]);
        assert_eq!(c, vec![0.0, 0.0, 0.0, 9.0 * h * h, 9.0 * h * h, 9.0 * h * h, 9.0 * h * h, 25.0 * h * h, 25.0 * h * h]);
        assert_eq!(pathwise::covariation(&f, &f, &[0, 3, 7], 1, 8), 25.0 * h * h);
    }

    #[test]
    fn discretize_extremes() {
        let f = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(pathwise::discretize(&f, &[0, 1, 2, 3]), f);
        assert_eq!(pathwise::discretize(&f, &[0]), vec![1.0; 4]);
        assert_eq!(pathwise::discretize(&f, &[0, 2]), vec![1.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn identities_on_a_small_tree() {
        let s = SampleSpace::uniform(2, 5, 1.0, 1, 0).unwrap();
        let g = GridCadlagPath::scaled_walk(s.clone()).unwrap();
        let f = g.adapted_map(|x| x.iter().map(|v| v.abs()).fold(0.0, f64::max));
        let pi = AdaptedGridPartition::oscillation(&f, 0.6).unwrap();
        let tau = pi.union(&AdaptedGridPartition::oscillation(&g, 0.4).unwrap()).unwrap();
        assert!(coarsening_residual(&f, &g, &pi, &tau).unwrap() <= 1e-12);
        assert!(chen_residual(&f, &g, &pi).unwrap() <= 1e-12);
        assert!(parts_residual(&f, &g, &pi).unwrap() <= 1e-12);
        assert!(additivity_residual(&f, &g, &pi).unwrap() <= 1e-12);
        assert!(martingale_residual(&f, &g, &pi).unwrap() <= 1e-12);
        let full = AdaptedGridPartition::full(s);
        assert!(isometry_residual(&g, &full, 1, 4).unwrap() <= 1e-12);
        assert!(isometry_residual(&g, &pi, 1, 4).is_err());
        let cov = covariation_sum(&g, &g, &full, 0, 5).unwrap();
        assert!(cov.iter().all(|c| (c - 1.0).abs() < 1e-12));
    }

    #[test]
    fn constant_integrand_gives_zero() {
        let s = SampleSpace::uniform(2, 4, 1.0, 1, 0).unwrap();
        let g = GridCadlagPath::scaled_walk(s.clone()).unwrap();
        let f = GridCadlagPath::constant(s.clone(), 3.0);
        let pi = AdaptedGridPartition::full(s);
        assert!(ito_sum(&f, &g, &pi, 0, 4).unwrap().iter().all(|&v| v == 0.0));
        assert!(ito_sum(&g, &f, &pi, 0, 4).unwrap().iter().all(|&v| v == 0.0));
    }
}
