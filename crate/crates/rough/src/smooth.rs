//! Vector fields `φ : ℝ^e → L(ℝ^d, ℝ^e)` with declared `C^{2,1}` norms.

use std::fmt;
use std::sync::Arc;

use martlab_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::path::{dist, norm};

/// Declared bounds: `‖φ‖_sup`, `‖Dφ‖_sup` (= `‖φ‖_Lip`), `‖Dφ‖_Lip`,
/// `‖D²φ‖_sup`, `‖D²φ‖_Lip`. All tensors are measured in the Frobenius norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothNorms {
    pub sup: f64,
    pub d_sup: f64,
    pub d_lip: f64,
    pub d2_sup: f64,
    pub d2_lip: f64,
}

type VecFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// `φ(y)` is an `e×d` matrix stored row-major (`[a*d + j]`); `Dφ(y)` stores
/// `∂_b φ^{aj}` at `[(a*d + j)*e + b]`; `D²φ(y)` stores `∂_c∂_b φ^{aj}` at
/// `[((a*d + j)*e + b)*e + c]`.
#[derive(Clone)]
pub struct SmoothFunction {
    e: usize,
    d: usize,
    phi: VecFn,
    dphi: VecFn,
    d2phi: VecFn,
    norms: SmoothNorms,
}

impl fmt::Debug for SmoothFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothFunction").field("e", &self.e).field("d", &self.d).field("norms", &self.norms).finish()
    }
}

impl SmoothFunction {
    pub fn new(
        e: usize,
        d: usize,
        phi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        dphi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        d2phi: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        norms: SmoothNorms,
    ) -> Result<Self> {
        if e == 0 || d == 0 {
            return Err(Error::Dimension("vector field dimensions must be positive".into()));
        }
        let n = [norms.sup, norms.d_sup, norms.d_lip, norms.d2_sup, norms.d2_lip];
        if n.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("declared norms must be finite and nonnegative".into()));
        }
        Ok(SmoothFunction { e, d, phi: Arc::new(phi), dphi: Arc::new(dphi), d2phi: Arc::new(d2phi), norms })
    }

    /// `φ(y) = M y` with `M` stored like `Dφ`; `radius` bounds `|y|` on the
    /// region where the declared `‖φ‖_sup = ‖M‖·radius` is meant to hold.
    pub fn linear(e: usize, d: usize, m: Vec<f64>, radius: f64) -> Result<Self> {
        if m.len() != e * d * e {
            return Err(Error::Dimension(format!("linear map needs {} entries, got {}", e * d * e, m.len())));
        }
        let mn = norm(&m);
        let m = Arc::new(m);
        let (m1, m2) = (m.clone(), m.clone());
        Self::new(
            e,
            d,
            move |y| (0..e * d).map(|k| (0..e).map(|b| m1[k * e + b] * y[b]).sum()).collect(),
            move |_| m2.to_vec(),
            move |_| vec![0.0; e * d * e * e],
            SmoothNorms { sup: mn * radius, d_sup: mn, d_lip: 0.0, d2_sup: 0.0, d2_lip: 0.0 },
        )
    }

    /// `φ(y) = y` in one dimension, with `‖φ‖_sup` declared on `|y| ≤ 2`.
    pub fn identity_1d() -> Self {
        Self::linear(1, 1, vec![1.0], 2.0).expect("valid linear field")
    }

    pub fn constant(e: usize, d: usize, c: Vec<f64>) -> Result<Self> {
        if c.len() != e * d {
            return Err(Error::Dimension(format!("constant field needs {} entries, got {}", e * d, c.len())));
        }
        let sup = norm(&c);
        Self::new(
            e,
            d,
            move |_| c.clone(),
            move |_| vec![0.0; e * d * e],
            move |_| vec![0.0; e * d * e * e],
            SmoothNorms { sup, d_sup: 0.0, d_lip: 0.0, d2_sup: 0.0, d2_lip: 0.0 },
        )
    }

    /// `φ(y) = y²` in one dimension, with norms declared on `|y| ≤ radius`.
    pub fn square_1d(radius: f64) -> Self {
        Self::new(
            1,
            1,
            |y| vec![y[0] * y[0]],
            |y| vec![2.0 * y[0]],
            |_| vec![2.0],
            SmoothNorms { sup: radius * radius, d_sup: 2.0 * radius, d_lip: 2.0, d2_sup: 2.0, d2_lip: 0.0 },
        )
        .expect("valid field")
    }

    /// `φ(y) = sin y` in one dimension.
    pub fn sine_1d() -> Self {
        Self::new(
            1,
            1,
            |y| vec![y[0].sin()],
            |y| vec![y[0].cos()],
            |y| vec![-y[0].sin()],
            SmoothNorms { sup: 1.0, d_sup: 1.0, d_lip: 1.0, d2_sup: 1.0, d2_lip: 1.0 },
        )
        .expect("valid field")
    }

    /// Value dimension `e`.
    pub fn e(&self) -> usize {
        self.e
    }

    /// Driver dimension `d`.
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn norms(&self) -> SmoothNorms {
        self.norms
    }

    /// `‖φ‖_Lip = ‖Dφ‖_sup`.
    pub fn lip(&self) -> f64 {
        self.norms.d_sup
    }

    pub fn phi(&self, y: &[f64]) -> Vec<f64> {
        (self.phi)(y)
    }

    pub fn dphi(&self, y: &[f64]) -> Vec<f64> {
        (self.dphi)(y)
    }

    pub fn d2phi(&self, y: &[f64]) -> Vec<f64> {
        (self.d2phi)(y)
    }

    /// Sample the box `[−radius, radius]^e` and report every declared norm
    /// that the samples exceed, plus derivatives that disagree with central
    /// differences. Advisory only.
    pub fn validate_norms(&self, radius: f64, samples: usize, seed: u64) -> Vec<String> {
        let mut r = rng::stream(seed, 0);
        let e = self.e;
        let mut pt = || -> Vec<f64> { (0..e).map(|_| r.random_range(-radius..=radius)).collect() };
        let (mut sup, mut dsup, mut dlip, mut d2sup, mut d2lip, mut fd) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
        for _ in 0..samples {
            let (y, z) = (pt(), pt());
            let h = dist(&y, &z);
            let (dy, dz) = (self.dphi(&y), self.dphi(&z));
            let (d2y, d2z) = (self.d2phi(&y), self.d2phi(&z));
            sup = sup.max(norm(&self.phi(&y)));
            dsup = dsup.max(norm(&dy));
            d2sup = d2sup.max(norm(&d2y));
            if h > 0.0 {
                dlip = dlip.max(dist(&dy, &dz) / h);
                d2lip = d2lip.max(dist(&d2y, &d2z) / h);
            }
            // Central differences of φ in each coordinate direction.
            let step = 1e-5 * (1.0 + radius);
            for b in 0..e {
                let mut p = y.clone();
                let mut m = y.clone();
                p[b] += step;
                m[b] -= step;
                let (fp, fm) = (self.phi(&p), self.phi(&m));
                for k in 0..fp.len() {
                    let approx = (fp[k] - fm[k]) / (2.0 * step);
                    fd = fd.max((approx - dy[k * e + b]).abs() / (1.0 + dy[k * e + b].abs()));
                }
            }
        }
        let n = self.norms;
        let mut out = Vec::new();
        let mut flag = |name: &str, seen: f64, declared: f64| {
            if seen > declared * (1.0 + 1e-9) + 1e-12 {
                out.push(format!("{name}: sampled {seen:.6e} exceeds declared {declared:.6e}"));
            }
        };
        flag("‖φ‖_sup", sup, n.sup);
        flag("‖Dφ‖_sup", dsup, n.d_sup);
        flag("‖Dφ‖_Lip", dlip, n.d_lip);
        flag("‖D²φ‖_sup", d2sup, n.d2_sup);
        flag("‖D²φ‖_Lip", d2lip, n.d2_lip);
        if fd > 1e-4 {
            out.push(format!("Dφ differs from central differences of φ by {fd:.3e}"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_declarations_hold() {
        assert!(SmoothFunction::identity_1d().validate_norms(2.0, 200, 1).is_empty());
        assert!(SmoothFunction::square_1d(3.0).validate_norms(3.0, 200, 2).is_empty());
        assert!(SmoothFunction::sine_1d().validate_norms(10.0, 200, 3).is_empty());
        let c = SmoothFunction::constant(2, 3, vec![1.0, 0.0, 2.0, -1.0, 0.5, 0.0]).unwrap();
        assert!(c.validate_norms(5.0, 50, 4).is_empty());
    }

    #[test]
    fn understated_norm_warns() {
        let mut f = SmoothFunction::square_1d(1.0);
        // Declared for |y| ≤ 1 but sampled on |y| ≤ 3.
        let w = f.validate_norms(3.0, 200, 5);
        assert!(w.iter().any(|s| s.contains("‖φ‖_sup")));
        f.norms.d_lip = 0.0;
        assert!(f.validate_norms(1.0, 50, 6).iter().any(|s| s.contains("‖Dφ‖_Lip")));
    }

    #[test]
    fn wrong_derivative_warns() {
        let f = SmoothFunction::new(
            1,
            1,
            |y| vec![y[0].sin()],
            |y| vec![2.0 * y[0].cos()],
            |y| vec![-y[0].sin()],
            SmoothNorms { sup: 1.0, d_sup: 2.0, d_lip: 2.0, d2_sup: 1.0, d2_lip: 1.0 },
        )
        .unwrap();
        assert!(f.validate_norms(1.0, 20, 7).iter().any(|s| s.contains("central differences")));
    }

    #[test]
    fn linear_map_layout() {
        // e = 2, d = 1: φ(y) = (y_0 + 2 y_1, 3 y_1).
        let f = SmoothFunction::linear(2, 1, vec![1.0, 2.0, 0.0, 3.0], 1.0).unwrap();
        assert_eq!(f.phi(&[1.0, 1.0]), vec![3.0, 3.0]);
    }
}
