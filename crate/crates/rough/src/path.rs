use serde::{Deserialize, Serialize};

use crate::control::two_param_variation;
use crate::error::{Error, Result};
use crate::MAX_TWO_PARAM_GRID;

/// How a path behaves between grid points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interp {
    /// Linear interpolation between samples.
    #[default]
    Linear,
    /// Càdlàg step function: constant on `[t_i, t_{i+1})`.
    Constant,
}

impl Interp {
    pub fn name(self) -> &'static str {
        match self {
            Interp::Linear => "linear",
            Interp::Constant => "constant",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "linear" | "piecewise-linear" | "piecewise_linear" => Some(Interp::Linear),
            "constant" | "cadlag" | "piecewise-constant" | "piecewise_constant" => Some(Interp::Constant),
            _ => None,
        }
    }
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// An `ℝ^d`-valued path sampled on `0 = t_0 < … < t_{n−1} = T`.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    times: Vec<f64>,
    dim: usize,
    values: Vec<f64>,
    interp: Interp,
}

impl SampledPath {
    /// `values` is row-major: point `i` occupies `values[i*dim..(i+1)*dim]`.
    pub fn new(times: Vec<f64>, dim: usize, values: Vec<f64>, interp: Interp) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidPath("empty grid".into()));
        }
        if dim == 0 {
            return Err(Error::InvalidPath("dimension must be positive".into()));
        }
        if times[0] != 0.0 {
            return Err(Error::InvalidPath(format!("grid starts at {} instead of 0", times[0])));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) || times.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidPath("times must be finite and strictly increasing".into()));
        }
        if values.len() != times.len() * dim {
            return Err(Error::InvalidPath(format!(
                "{} values for {} times of dimension {dim}",
                values.len(),
                times.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        Ok(SampledPath { times, dim, values, interp })
    }

    pub fn from_fn(times: Vec<f64>, dim: usize, interp: Interp, f: impl Fn(f64) -> Vec<f64>) -> Result<Self> {
        let mut values = Vec::with_capacity(times.len() * dim);
        for &t in &times {
            let v = f(t);
            if v.len() != dim {
                return Err(Error::Dimension(format!("f({t}) has length {} instead of {dim}", v.len())));
            }
            values.extend(v);
        }
        Self::new(times, dim, values, interp)
    }

    pub fn scalar(times: Vec<f64>, values: Vec<f64>, interp: Interp) -> Result<Self> {
        Self::new(times, 1, values, interp)
    }

    /// `n_steps + 1` equally spaced times on `[0, t_end]`.
    pub fn uniform_times(n_steps: usize, t_end: f64) -> Vec<f64> {
        let n = n_steps.max(1);
        (0..=n).map(|i| if i == n { t_end } else { t_end * i as f64 / n as f64 }).collect()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn with_interp(mut self, interp: Interp) -> Self {
        self.interp = interp;
        self
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn time(&self, i: usize) -> f64 {
        self.times[i]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().expect("non-empty grid")
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// `δX_{s,t} = X_t − X_s` for grid indices.
    pub fn increment(&self, s: usize, t: usize) -> Vec<f64> {
        self.value(t).iter().zip(self.value(s)).map(|(b, a)| b - a).collect()
    }

    pub fn same_grid(&self, other: &SampledPath) -> bool {
        self.times == other.times
    }

    /// Value at an arbitrary time in `[0, T]`, honouring the interpolation.
    pub fn eval(&self, t: f64) -> Vec<f64> {
        let k = self.times.partition_point(|&u| u <= t);
        if k == 0 {
            return self.value(0).to_vec();
        }
        let i = k - 1;
        if i + 1 >= self.len() || self.interp == Interp::Constant {
            return self.value(i).to_vec();
        }
        let w = (t - self.times[i]) / (self.times[i + 1] - self.times[i]);
        self.value(i).iter().zip(self.value(i + 1)).map(|(a, b)| a + w * (b - a)).collect()
    }

    /// The restriction to grid indices `i..=j`, with time shifted to start at 0.
    pub fn slice(&self, i: usize, j: usize) -> Result<SampledPath> {
        if i > j || j >= self.len() {
            return Err(Error::InvalidParameter(format!("slice {i}..={j} of a grid with {} points", self.len())));
        }
        let t0 = self.times[i];
        let times = self.times[i..=j].iter().map(|t| t - t0).collect();
        let values = self.values[i * self.dim..(j + 1) * self.dim].to_vec();
        Self::new(times, self.dim, values, self.interp)
    }

    /// Pointwise map to a path of dimension `dim` on the same grid.
    pub fn map(&self, dim: usize, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<SampledPath> {
        let mut values = Vec::with_capacity(self.len() * dim);
        for i in 0..self.len() {
            let v = f(self.value(i));
            if v.len() != dim {
                return Err(Error::Dimension(format!("map produced length {} instead of {dim}", v.len())));
            }
            values.extend(v);
        }
        Self::new(self.times.clone(), dim, values, self.interp)
    }

    pub fn sub(&self, other: &SampledPath) -> Result<SampledPath> {
        if !self.same_grid(other) {
            return Err(Error::GridMismatch);
        }
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("{} vs {}", self.dim, other.dim)));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Self::new(self.times.clone(), self.dim, values, self.interp)
    }

    pub fn scaled(&self, c: f64) -> SampledPath {
        SampledPath { values: self.values.iter().map(|v| c * v).collect(), ..self.clone() }
    }

    /// `sup_i |X_{t_i}|`.
    pub fn sup_norm(&self) -> f64 {
        (0..self.len()).map(|i| norm(self.value(i))).fold(0.0, f64::max)
    }

    /// `V^r X` over the whole grid (Euclidean norm of increments).
    pub fn variation(&self, r: f64) -> f64 {
        self.variation_on(0, self.len() - 1, r)
    }

    pub fn variation_on(&self, i: usize, j: usize, r: f64) -> f64 {
        two_param_variation(j - i + 1, |a, b| dist(self.value(i + a), self.value(i + b)), r)
    }

    pub(crate) fn retimed(&self, times: Vec<f64>) -> Result<SampledPath> {
        Self::new(times, self.dim, self.values.clone(), self.interp)
    }

    /// Append `other` (whose first point must coincide with our last).
    pub(crate) fn concat(&self, other: &SampledPath) -> Result<SampledPath> {
        if self.dim != other.dim {
            return Err(Error::Dimension(format!("{} vs {}", self.dim, other.dim)));
        }
        let t0 = self.t_end();
        let mut times = self.times.clone();
        times.extend(other.times[1..].iter().map(|t| t + t0));
        let mut values = self.values.clone();
        values.extend_from_slice(&other.values[other.dim..]);
        Self::new(times, self.dim, values, self.interp)
    }
}

/// A two-parameter array `Ξ_{s,t}` on grid pairs `s ≤ t`, each entry a
/// vector of fixed width (e.g. `d²` for `𝕏`).
#[derive(Debug, Clone, PartialEq)]
pub struct Grid2 {
    n: usize,
    width: usize,
    data: Vec<f64>,
}

impl Grid2 {
    pub fn zeros(n: usize, width: usize) -> Result<Self> {
        if n > MAX_TWO_PARAM_GRID {
            return Err(Error::GridTooLarge { n, limit: MAX_TWO_PARAM_GRID });
        }
        Ok(Grid2 { n, width, data: vec![0.0; n * n * width] })
    }

    pub fn from_fn(n: usize, width: usize, f: impl Fn(usize, usize) -> Vec<f64>) -> Result<Self> {
        let mut g = Self::zeros(n, width)?;
        for s in 0..n {
            for t in s..n {
                let v = f(s, t);
                if v.len() != width {
                    return Err(Error::Dimension(format!("entry ({s},{t}) has length {}", v.len())));
                }
                g.get_mut(s, t).copy_from_slice(&v);
            }
        }
        Ok(g)
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn get(&self, s: usize, t: usize) -> &[f64] {
        let k = (s * self.n + t) * self.width;
        &self.data[k..k + self.width]
    }

    pub fn get_mut(&mut self, s: usize, t: usize) -> &mut [f64] {
        let k = (s * self.n + t) * self.width;
        &mut self.data[k..k + self.width]
    }

    pub fn norm_at(&self, s: usize, t: usize) -> f64 {
        norm(self.get(s, t))
    }

    /// `V^ρ Ξ` over the whole grid.
    pub fn variation(&self, rho: f64) -> f64 {
        two_param_variation(self.n, |s, t| self.norm_at(s, t), rho)
    }

    pub fn sub(&self, other: &Grid2) -> Result<Grid2> {
        if self.n != other.n || self.width != other.width {
            return Err(Error::Dimension("two-parameter arrays differ in shape".into()));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(Grid2 { n: self.n, width: self.width, data })
    }

    pub fn slice(&self, i: usize, j: usize) -> Result<Grid2> {
        Grid2::from_fn(j - i + 1, self.width, |s, t| self.get(i + s, i + t).to_vec())
    }

    /// `max |Ξ_{s,t}|` over all pairs.
    pub fn sup_norm(&self) -> f64 {
        let mut m = 0.0f64;
        for s in 0..self.n {
            for t in s..self.n {
                m = m.max(self.norm_at(s, t));
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> SampledPath {
        SampledPath::from_fn(SampledPath::uniform_times(n, 1.0), 1, Interp::Linear, |t| vec![t]).unwrap()
    }

    #[test]
    fn validation() {
        assert!(SampledPath::new(vec![0.0, 0.5, 0.5], 1, vec![0.0; 3], Interp::Linear).is_err());
        assert!(SampledPath::new(vec![0.1, 0.5], 1, vec![0.0; 2], Interp::Linear).is_err());
        assert!(SampledPath::new(vec![0.0, 0.5], 2, vec![0.0; 3], Interp::Linear).is_err());
        assert!(SampledPath::new(vec![0.0], 1, vec![f64::NAN], Interp::Linear).is_err());
        assert!(SampledPath::new(vec![0.0], 1, vec![1.0], Interp::Linear).is_ok());
    }

    #[test]
    fn eval_interpolates() {
        let p = SampledPath::scalar(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 0.0], Interp::Linear).unwrap();
        assert_eq!(p.eval(0.5), vec![1.0]);
        assert_eq!(p.eval(1.5), vec![1.0]);
        assert_eq!(p.eval(5.0), vec![0.0]);
        let c = p.clone().with_interp(Interp::Constant);
        assert_eq!(c.eval(0.5), vec![0.0]);
        assert_eq!(c.eval(1.0), vec![2.0]);
    }

    #[test]
    fn slice_and_concat_round_trip() {
        let p = line(10);
        let a = p.slice(0, 4).unwrap();
        let b = p.slice(4, 10).unwrap();
        assert_eq!(b.time(0), 0.0);
        let c = a.concat(&b).unwrap();
        assert_eq!(c.len(), p.len());
        for i in 0..p.len() {
            assert!((c.time(i) - p.time(i)).abs() < 1e-15);
            assert_eq!(c.value(i), p.value(i));
        }
    }

    #[test]
    fn monotone_variation_is_total_increment() {
        let p = line(50);
        for r in [1.0, 2.0, 2.5] {
            assert!((p.variation(r) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn grid2_guard() {
        assert!(matches!(Grid2::zeros(MAX_TWO_PARAM_GRID + 1, 1), Err(Error::GridTooLarge { .. })));
    }
}
