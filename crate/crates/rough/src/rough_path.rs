use std::sync::Arc;

use crate::error::{Error, Result};
use crate::path::{Grid2, SampledPath};
use crate::MAX_TWO_PARAM_GRID;

/// `𝐗 = (X, 𝕏)` with `𝕏^{ij}_{s,t}` the iterated integral
/// `∫_s^t (X^i_{u−} − X^i_s) dX^j_u`, stored at index `i*d + j`.
#[derive(Debug, Clone)]
pub struct RoughPath {
    x: SampledPath,
    xx: Arc<Grid2>,
    r: f64,
}

impl RoughPath {
    pub fn new(x: SampledPath, xx: Grid2, r: f64) -> Result<Self> {
        if !(2.0..3.0).contains(&r) {
            return Err(Error::InvalidParameter(format!("rough path exponent r = {r} must lie in [2, 3)")));
        }
        if xx.len() != x.len() {
            return Err(Error::Dimension(format!("𝕏 has {} grid points, X has {}", xx.len(), x.len())));
        }
        if xx.width() != x.dim() * x.dim() {
            return Err(Error::Dimension(format!("𝕏 entries have width {}, expected {}", xx.width(), x.dim().pow(2))));
        }
        Ok(RoughPath { x, xx: Arc::new(xx), r })
    }

    /// `(X, 𝕏)` with `𝕏` supplied pointwise as a `d×d` row-major matrix.
    pub fn from_fn(x: SampledPath, r: f64, xx: impl Fn(usize, usize) -> Vec<f64>) -> Result<Self> {
        let d = x.dim();
        let g = Grid2::from_fn(x.len(), d * d, xx)?;
        Self::new(x, g, r)
    }

    pub fn x(&self) -> &SampledPath {
        &self.x
    }

    pub fn xx(&self) -> &Grid2 {
        &self.xx
    }

    pub(crate) fn xx_arc(&self) -> Arc<Grid2> {
        self.xx.clone()
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// `‖X‖_r = V^r X_{0,T}`.
    pub fn x_norm(&self) -> f64 {
        self.x.variation(self.r)
    }

    /// `‖𝕏‖_{r/2} = V^{r/2} 𝕏_{0,T}`.
    pub fn xx_norm(&self) -> f64 {
        self.xx.variation(self.r / 2.0)
    }

    /// `max |𝕏_{s,u} − 𝕏_{s,t} − 𝕏_{t,u} − δX_{s,t} ⊗ δX_{t,u}|` over all grid triples.
    pub fn chen_residual(&self) -> f64 {
        let n = self.len();
        let d = self.dim();
        let mut worst = 0.0f64;
        for s in 0..n {
            for t in s..n {
                let a = self.x.increment(s, t);
                for u in t..n {
                    let b = self.x.increment(t, u);
                    let (su, st, tu) = (self.xx.get(s, u), self.xx.get(s, t), self.xx.get(t, u));
                    for i in 0..d {
                        for j in 0..d {
                            let k = i * d + j;
                            worst = worst.max((su[k] - st[k] - tu[k] - a[i] * b[j]).abs());
                        }
                    }
                }
            }
        }
        worst
    }

    /// Restriction to grid indices `i..=j` (time shifted to start at 0).
    pub fn slice(&self, i: usize, j: usize) -> Result<RoughPath> {
        Ok(RoughPath { x: self.x.slice(i, j)?, xx: Arc::new(self.xx.slice(i, j)?), r: self.r })
    }

    /// `(X − X̃, 𝕏 − 𝕏̃)` norms: `(‖ΔX‖_r, ‖Δ𝕏‖_{r/2})`.
    pub fn distance(&self, other: &RoughPath) -> Result<(f64, f64)> {
        let dx = self.x.sub(&other.x)?;
        let dxx = self.xx.sub(&other.xx)?;
        Ok((dx.variation(self.r), dxx.variation(self.r / 2.0)))
    }
}

fn lift_impl(x: &SampledPath, r: f64, half: f64) -> Result<RoughPath> {
    let n = x.len();
    if n > MAX_TWO_PARAM_GRID {
        return Err(Error::GridTooLarge { n, limit: MAX_TWO_PARAM_GRID });
    }
    let d = x.dim();
    let mut g = Grid2::zeros(n, d * d)?;
    let mut row = vec![0.0; d * d];
    for s in 0..n {
        row.iter_mut().for_each(|v| *v = 0.0);
        for t in s..n.saturating_sub(1) {
            let base = x.increment(s, t);
            let dx = x.increment(t, t + 1);
            for i in 0..d {
                for j in 0..d {
                    row[i * d + j] += (base[i] + half * dx[i]) * dx[j];
                }
            }
            g.get_mut(s, t + 1).copy_from_slice(&row);
        }
    }
    RoughPath::new(x.clone(), g, r)
}

/// Left-point lift `𝕏_{s,t} = Σ_{s ≤ u_i < t} (X_{u_i} − X_s) ⊗ δX_{u_i,u_{i+1}}`,
/// the iterated integral of the càdlàg step path.
pub fn lift(x: &SampledPath, r: f64) -> Result<RoughPath> {
    lift_impl(x, r, 0.0)
}

/// Iterated integral of the piecewise-linear interpolation: the left-point
/// sums plus `½ Σ δX_i ⊗ δX_i`. Also satisfies Chen exactly.
pub fn lift_geometric(x: &SampledPath, r: f64) -> Result<RoughPath> {
    lift_impl(x, r, 0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::path::Interp;

    fn walk(n: usize) -> SampledPath {
        let mut v = vec![0.0, 0.0];
        let mut vals = v.clone();
        for i in 0..n {
            v[0] += if (i * 7 + 3) % 5 < 2 { 1.0 } else { -1.0 };
            v[1] += if (i * 3 + 1) % 4 < 2 { 0.5 } else { -0.5 };
            vals.extend_from_slice(&v);
        }
        SampledPath::new(SampledPath::uniform_times(n, 1.0), 2, vals, Interp::Constant).unwrap()
    }

    #[test]
    fn chen_holds_for_both_lifts() {
        let x = walk(40);
        assert!(lift(&x, 2.5).unwrap().chen_residual() <= 1e-12);
        assert!(lift_geometric(&x, 2.5).unwrap().chen_residual() <= 1e-12);
    }

    #[test]
    fn symmetric_part_of_left_lift() {
        let x = walk(30);
        let xp = lift(&x, 2.5).unwrap();
        let n = x.len();
        let tot = x.increment(0, n - 1);
        let m = xp.xx().get(0, n - 1);
        for i in 0..2 {
            for j in 0..2 {
                let quad: f64 = (0..n - 1)
                    .map(|k| {
                        let dx = x.increment(k, k + 1);
                        dx[i] * dx[j]
                    })
                    .sum();
                let lhs = m[i * 2 + j] + m[j * 2 + i];
                assert!((lhs - (tot[i] * tot[j] - quad)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn linear_path_lift_converges() {
        for steps in [16usize, 256] {
            let x = SampledPath::scalar(SampledPath::uniform_times(steps, 1.0), SampledPath::uniform_times(steps, 1.0), Interp::Linear)
                .unwrap();
            let xp = lift(&x, 2.5).unwrap();
            let err = (xp.xx().get(0, steps)[0] - 0.5).abs();
            assert!((err - 0.5 / steps as f64).abs() < 1e-12);
            let geo = lift_geometric(&x, 2.5).unwrap();
            assert!((geo.xx().get(3, steps)[0] - 0.5 * (1.0 - x.time(3)).powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn exponent_range() {
        let x = walk(4);
        assert!(lift(&x, 3.0).is_err());
        assert!(lift(&x, 1.9).is_err());
    }
}
