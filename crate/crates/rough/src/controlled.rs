//! Controlled paths, composition with smooth maps, and the rough integral.

use std::sync::Arc;

use serde::Serialize;

use crate::control::{ChainControl, Control, FnControl};
use crate::error::{Error, Result};
use crate::path::{Grid2, SampledPath};
use crate::rough_path::RoughPath;
use crate::sewing::{cumulative, sew, sewing_constant, Germ, SewResult};
use crate::smooth::SmoothFunction;

/// `(Y, Y′)` with `Y` of dimension `m` and `Y′_t ∈ L(ℝ^d, ℝ^m)` stored as an
/// `m×d` row-major matrix per grid point (`[a*d + i] = ∂Y^a/∂X^i`).
#[derive(Debug, Clone)]
pub struct ControlledPath {
    y: SampledPath,
    yp: SampledPath,
    d: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ControlledNorms {
    /// `‖Y‖_r`
    pub y_r: f64,
    /// `‖Y′‖_r`
    pub yp_r: f64,
    /// `‖Y′‖_sup`
    pub yp_sup: f64,
    /// `‖R^Y‖_{r/2}`
    pub remainder: f64,
}

impl ControlledNorms {
    /// `‖Y‖_r − (‖Y′‖_sup ‖X‖_r + ‖R^Y‖_{r/2})`, nonpositive up to rounding.
    pub fn implicit_gap(&self, x_norm: f64) -> f64 {
        self.y_r - (self.yp_sup * x_norm + self.remainder)
    }
}

impl ControlledPath {
    pub fn new(y: SampledPath, yp: SampledPath, d: usize) -> Result<Self> {
        if !y.same_grid(&yp) {
            return Err(Error::GridMismatch);
        }
        if yp.dim() != y.dim() * d {
            return Err(Error::Dimension(format!("Y′ has dimension {}, expected {}·{d}", yp.dim(), y.dim())));
        }
        Ok(ControlledPath { y, yp, d })
    }

    /// `Y ≡ y0` with `Y′ = 0`.
    pub fn constant(times: &[f64], y0: &[f64], d: usize) -> Result<Self> {
        let m = y0.len();
        let y = SampledPath::from_fn(times.to_vec(), m, Default::default(), |_| y0.to_vec())?;
        let yp = SampledPath::from_fn(times.to_vec(), m * d, Default::default(), |_| vec![0.0; m * d])?;
        Self::new(y, yp, d)
    }

    pub fn y(&self) -> &SampledPath {
        &self.y
    }

    pub fn yp(&self) -> &SampledPath {
        &self.yp
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.y.dim()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    fn check_driver(&self, x: &SampledPath) -> Result<()> {
        if !self.y.same_grid(x) {
            return Err(Error::GridMismatch);
        }
        if x.dim() != self.d {
            return Err(Error::Dimension(format!("driver has dimension {}, expected {}", x.dim(), self.d)));
        }
        Ok(())
    }

    /// `R^Y_{s,t} = δY_{s,t} − Y′_s δX_{s,t}`.
    pub fn remainder(&self, x: &SampledPath) -> Result<Grid2> {
        self.check_driver(x)?;
        let (m, d) = (self.dim(), self.d);
        Grid2::from_fn(self.len(), m, |s, t| {
            let dy = self.y.increment(s, t);
            let dx = x.increment(s, t);
            let yp = self.yp.value(s);
            (0..m).map(|a| dy[a] - (0..d).map(|i| yp[a * d + i] * dx[i]).sum::<f64>()).collect()
        })
    }

    pub fn norms(&self, x: &RoughPath) -> Result<ControlledNorms> {
        let r = x.r();
        Ok(ControlledNorms {
            y_r: self.y.variation(r),
            yp_r: self.yp.variation(r),
            yp_sup: self.yp.sup_norm(),
            remainder: self.remainder(x.x())?.variation(r / 2.0),
        })
    }

    /// Pointwise difference `(Y − Ỹ, Y′ − Ỹ′)`.
    pub fn sub(&self, other: &ControlledPath) -> Result<ControlledPath> {
        Self::new(self.y.sub(&other.y)?, self.yp.sub(&other.yp)?, self.d)
    }

    pub(crate) fn concat(&self, other: &ControlledPath) -> Result<ControlledPath> {
        Self::new(self.y.concat(&other.y)?, self.yp.concat(&other.yp)?, self.d)
    }

    pub(crate) fn shifted(&self, y0: &[f64]) -> Result<ControlledPath> {
        let y = self.y.map(self.dim(), |v| v.iter().zip(y0).map(|(a, b)| a + b).collect())?;
        Self::new(y, self.yp.clone(), self.d)
    }
}

/// `(φ(Y), Dφ(Y)Y′)`. `Y` has dimension `e`, so `φ(Y)` takes values in
/// `L(ℝ^d, ℝ^e)` and its derivative in `L(ℝ^d, L(ℝ^d, ℝ^e))`.
pub fn compose(phi: &SmoothFunction, y: &ControlledPath) -> Result<ControlledPath> {
    let (e, d) = (phi.e(), phi.d());
    if y.dim() != e || y.d() != d {
        return Err(Error::Dimension(format!(
            "φ maps ℝ^{e} with a {d}-dimensional driver; Y has dimension {} with driver dimension {}",
            y.dim(),
            y.d()
        )));
    }
    let fy = y.y().map(e * d, |v| phi.phi(v))?;
    let mut vals = Vec::with_capacity(y.len() * e * d * d);
    for k in 0..y.len() {
        let dp = phi.dphi(y.y().value(k));
        let yp = y.yp().value(k);
        for aj in 0..e * d {
            for i in 0..d {
                vals.push((0..e).map(|b| dp[aj * e + b] * yp[b * d + i]).sum::<f64>());
            }
        }
    }
    let fyp = SampledPath::new(y.y().times().to_vec(), e * d * d, vals, y.y().interp())?;
    ControlledPath::new(fy, fyp, d)
}

/// Both sides of the composition estimates
/// `‖Dφ(Y)Y′‖_r ≤ ‖Dφ‖_sup‖Y′‖_r + ‖Dφ‖_Lip‖Y‖_r‖Y′‖_sup` and
/// `‖R^{φ(Y)}‖_{r/2} ≤ ‖Dφ‖_sup‖R^Y‖_{r/2} + ½‖Dφ‖_Lip‖Y‖_r²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositionBounds {
    pub derivative_lhs: f64,
    pub derivative_rhs: f64,
    pub remainder_lhs: f64,
    pub remainder_rhs: f64,
}

impl CompositionBounds {
    pub fn holds(&self) -> bool {
        let ok = |l: f64, r: f64| l <= r * (1.0 + 1e-9) + 1e-12;
        ok(self.derivative_lhs, self.derivative_rhs) && ok(self.remainder_lhs, self.remainder_rhs)
    }
}

pub fn composition_bounds(phi: &SmoothFunction, y: &ControlledPath, x: &RoughPath) -> Result<CompositionBounds> {
    let fy = compose(phi, y)?;
    let r = x.r();
    let yn = y.norms(x)?;
    let n = phi.norms();
    Ok(CompositionBounds {
        derivative_lhs: fy.yp().variation(r),
        derivative_rhs: n.d_sup * yn.yp_r + n.d_lip * yn.y_r * yn.yp_sup,
        remainder_lhs: fy.remainder(x.x())?.variation(r / 2.0),
        remainder_rhs: n.d_sup * yn.remainder + 0.5 * n.d_lip * yn.y_r * yn.y_r,
    })
}

struct RoughGerm<'a> {
    y: &'a ControlledPath,
    x: &'a RoughPath,
    e: usize,
}

impl Germ for RoughGerm<'_> {
    fn len(&self) -> usize {
        self.x.len()
    }

    fn width(&self) -> usize {
        self.e
    }

    /// `Y_s δX_{s,t} + Y′_s 𝕏_{s,t}`.
    fn xi(&self, s: usize, t: usize) -> Vec<f64> {
        let d = self.x.dim();
        let dx = self.x.x().increment(s, t);
        let xx = self.x.xx().get(s, t);
        let (y, yp) = (self.y.y().value(s), self.y.yp().value(s));
        (0..self.e)
            .map(|a| {
                let mut v = 0.0;
                for j in 0..d {
                    let aj = a * d + j;
                    v += y[aj] * dx[j];
                    for i in 0..d {
                        v += yp[aj * d + i] * xx[i * d + j];
                    }
                }
                v
            })
            .collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoughIntegral {
    /// `(∫_0^· Y d𝐗, Y)`.
    #[serde(skip)]
    pub z: ControlledPath,
    pub sew: SewResult,
    /// `2^{θ−1} Σ_k (2/k)^θ` with `θ = 3/r`.
    pub constant: f64,
    /// `C (V^{r/2}R^Y_{0,T−} V^r X_{0,T} + V^r Y′_{0,T−} V^{r/2}𝕏_{0,T})`.
    pub local_bound: f64,
    /// `‖R^Z‖_{r/2}`.
    pub remainder_norm: f64,
    /// `C‖R^Y‖‖X‖`, `C‖Y′‖_r‖𝕏‖`, `‖Y′‖_sup‖𝕏‖`.
    pub remainder_terms: [f64; 3],
}

impl RoughIntegral {
    pub fn remainder_bound(&self) -> f64 {
        self.remainder_terms.iter().sum()
    }
}

/// `∫ Y d𝐗` for `Y` controlled by `X` with values in `L(ℝ^d, ℝ^e)`
/// (`Y` of dimension `e·d`), by sewing `Y_s δX_{s,t} + Y′_s 𝕏_{s,t}`.
pub fn rough_integral(y: &ControlledPath, x: &RoughPath) -> Result<RoughIntegral> {
    let d = x.dim();
    y.check_driver(x.x())?;
    if !y.dim().is_multiple_of(d) {
        return Err(Error::Dimension(format!("integrand dimension {} is not a multiple of {d}", y.dim())));
    }
    let e = y.dim() / d;
    let r = x.r();
    let n = x.len();
    let theta = 3.0 / r;

    let ry = Arc::new(y.remainder(x.x())?);
    let w_r = Arc::new(ChainControl::two_param(ry.clone(), r / 2.0));
    let w_x = Arc::new(ChainControl::path(x.x(), r));
    let w_yp = Arc::new(ChainControl::path(y.yp(), r));
    let w_xx = Arc::new(ChainControl::two_param(x.xx_arc(), r / 2.0));
    let (a, b, c, dd) = (w_r.clone(), w_x.clone(), w_yp.clone(), w_xx.clone());
    let omega = FnControl::new(n, move |s, t| {
        let left = t - 1;
        a.omega(s, left).powf(2.0 / 3.0) * b.omega(s, t).powf(1.0 / 3.0)
            + c.omega(s, left).powf(1.0 / 3.0) * dd.omega(s, t).powf(2.0 / 3.0)
    });

    let germ = RoughGerm { y, x, e };
    let sewn = sew(&germ, &omega, theta)?;
    let constant = 2f64.powf(theta - 1.0) * sewing_constant(theta);

    let last = n - 1;
    let v_r_left = w_r.omega(0, last.saturating_sub(1)).powf(2.0 / r);
    let v_yp_left = w_yp.omega(0, last.saturating_sub(1)).powf(1.0 / r);
    let (v_x, v_xx) = (w_x.omega(0, last).powf(1.0 / r), w_xx.omega(0, last).powf(2.0 / r));
    let local_bound = constant * (v_r_left * v_x + v_yp_left * v_xx);
    let err = sewn.error();
    if err > local_bound * (1.0 + 1e-9) + 1e-12 * (1.0 + sewn.value.iter().map(|v| v.abs()).sum::<f64>()) {
        return Err(Error::SewingBound { err, bound: local_bound });
    }

    let zy = SampledPath::new(x.x().times().to_vec(), e, cumulative(&germ), y.y().interp())?;
    let z = ControlledPath::new(zy, y.y().clone(), d)?;
    let remainder_norm = z.remainder(x.x())?.variation(r / 2.0);
    let v_r = w_r.omega(0, last).powf(2.0 / r);
    let v_yp = w_yp.omega(0, last).powf(1.0 / r);
    let remainder_terms = [constant * v_r * v_x, constant * v_yp * v_xx, y.yp().sup_norm() * v_xx];
    let bound: f64 = remainder_terms.iter().sum();
    if remainder_norm > bound * (1.0 + 1e-9) + 1e-12 {
        return Err(Error::RemainderBound { norm: remainder_norm, bound });
    }
    Ok(RoughIntegral { z, sew: sewn, constant, local_bound, remainder_norm, remainder_terms })
}
