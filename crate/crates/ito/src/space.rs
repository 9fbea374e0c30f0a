//! Uniform time grids over finite filtrations, and right-continuous
//! piecewise-constant processes on them.
//!
//! Grid index `k` is time `t_k = kT/N` and level `k` of the underlying tree.
//! A path is one leaf (or, for sampled spaces, one drawn leaf address); its
//! value on `[t_k, t_{k+1})` is the value of its level-`k` ancestor.

use std::sync::Arc;

use martlab_core::rng;
use martlab_core::tree::MAX_DEPTH;
use martlab_core::{FiltrationTree, TreeProcess};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest number of grid steps.
pub const MAX_GRID: usize = 4096;
/// Spaces with more leaves than this are sampled instead of enumerated.
pub const MAX_ENUMERATED_PATHS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    steps: usize,
    t_end: f64,
}

impl TimeGrid {
    pub fn new(steps: usize, t_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("at least one step is needed".into()));
        }
        if steps > MAX_GRID {
            return Err(Error::GridTooLarge { n: steps, limit: MAX_GRID });
        }
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidGrid(format!("terminal time {t_end}")));
        }
        Ok(Self { steps, t_end })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Number of grid points, `N + 1`.
    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.t_end / self.steps as f64
    }

    /// Largest `k` with `t_k ≤ t`, clamped to the grid.
    pub fn index_at(&self, t: f64) -> usize {
        if !(t > 0.0) {
            return 0;
        }
        let mut k = ((t / self.t_end * self.steps as f64).floor() as usize).min(self.steps);
        if self.time(k) > t {
            k -= 1;
        } else if k < self.steps && self.time(k + 1) <= t {
            k += 1;
        }
        k
    }

    /// Grid indices of the dyadic times `jT/2^level`, rounded down to the
    /// grid.
    pub fn dyadic(&self, level: u32) -> Vec<usize> {
        let m = 1usize << level.min(40);
        let mut out: Vec<usize> = (0..=m).map(|j| ((j as u128 * self.steps as u128) / m as u128) as usize).collect();
        out.dedup();
        out
    }
}

/// How the paths of a space were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum Enumeration {
    /// Every leaf of a tree, weighted by its probability.
    Exact { paths: usize },
    /// Uniform draws from a `branching`-ary fair tree of `log2_population`
    /// (base-2 log of) leaves; expectations are Monte Carlo averages.
    Sampled { paths: usize, branching: usize, log2_population: f64, seed: u64 },
}

impl Enumeration {
    pub fn is_sampled(&self) -> bool {
        matches!(self, Self::Sampled { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Tree(Arc<FiltrationTree>),
    Sampled { branching: usize, seed: u64, symbols: Vec<u32> },
}

/// The probability space under a family of grid processes.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSpace {
    grid: TimeGrid,
    kind: Kind,
    weights: Vec<f64>,
}

impl SampleSpace {
    /// All leaves of `tree`; grid step `k` is tree level `k`.
    pub fn tree(tree: Arc<FiltrationTree>, t_end: f64) -> Result<Arc<Self>> {
        let grid = TimeGrid::new(tree.depth(), t_end)?;
        let weights = tree.leaf_probs().to_vec();
        Ok(Arc::new(Self { grid, kind: Kind::Tree(tree), weights }))
    }

    /// Fair `branching`-ary tree of depth `steps`: enumerated when it has at
    /// most [`MAX_ENUMERATED_PATHS`] leaves, otherwise `samples` uniformly
    /// drawn leaves.
    pub fn uniform(branching: usize, steps: usize, t_end: f64, samples: usize, seed: u64) -> Result<Arc<Self>> {
        if branching < 2 {
            return Err(Error::InvalidParameter(format!("branching {branching}")));
        }
        let log2 = steps as f64 * (branching as f64).log2();
        if log2 <= (MAX_ENUMERATED_PATHS as f64).log2() {
            Self::tree(Arc::new(FiltrationTree::uniform(branching, steps)?), t_end)
        } else {
            Self::sampled(branching, steps, t_end, samples, seed)
        }
    }

    /// `samples` leaves drawn uniformly from the fair `branching`-ary tree.
    pub fn sampled(branching: usize, steps: usize, t_end: f64, samples: usize, seed: u64) -> Result<Arc<Self>> {
        let grid = TimeGrid::new(steps, t_end)?;
        if branching < 2 || branching > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!("branching {branching}")));
        }
        if samples == 0 {
            return Err(Error::InvalidParameter("at least one sample path is needed".into()));
        }
        let mut symbols = Vec::with_capacity(samples * steps);
        for p in 0..samples {
            let mut r = rng::stream(seed, p as u64);
            symbols.extend((0..steps).map(|_| r.random_range(0..branching as u32)));
        }
        let weights = vec![1.0 / samples as f64; samples];
        Ok(Arc::new(Self { grid, kind: Kind::Sampled { branching, seed, symbols }, weights }))
    }

    /// A single deterministic path (every node has one child). Grids deeper
    /// than the tree depth limit are stored as one path without a tree.
    pub fn deterministic(steps: usize, t_end: f64) -> Result<Arc<Self>> {
        if steps <= MAX_DEPTH {
            return Self::tree(Arc::new(FiltrationTree::new(steps, &vec![1; steps], &[1.0])?), t_end);
        }
        let grid = TimeGrid::new(steps, t_end)?;
        let kind = Kind::Sampled { branching: 1, seed: 0, symbols: vec![0; steps] };
        Ok(Arc::new(Self { grid, kind, weights: vec![1.0] }))
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn paths(&self) -> usize {
        self.weights.len()
    }

    /// Probability (or Monte Carlo weight) of each path.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn tree_ref(&self) -> Option<&Arc<FiltrationTree>> {
        match &self.kind {
            Kind::Tree(t) => Some(t),
            Kind::Sampled { .. } => None,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.tree_ref().is_some()
    }

    pub fn enumeration(&self) -> Enumeration {
        match &self.kind {
            Kind::Tree(_) | Kind::Sampled { branching: 1, .. } => Enumeration::Exact { paths: self.paths() },
            Kind::Sampled { branching, seed, .. } => Enumeration::Sampled {
                paths: self.paths(),
                branching: *branching,
                log2_population: self.grid.steps as f64 * (*branching as f64).log2(),
                seed: *seed,
            },
        }
    }

    /// Child offsets along path `p`, one per step.
    pub fn symbols(&self, p: usize) -> Vec<u32> {
        match &self.kind {
            Kind::Tree(t) => {
                let nodes = t.path_to(t.leaves().start + p);
                nodes.windows(2).map(|w| (w[1] - t.children(w[0]).start) as u32).collect()
            }
            Kind::Sampled { symbols, .. } => {
                let n = self.grid.steps;
                symbols[p * n..(p + 1) * n].to_vec()
            }
        }
    }

    pub(crate) fn same(a: &Arc<Self>, b: &Arc<Self>) -> bool {
        Arc::ptr_eq(a, b) || a == b
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Store {
    /// Node values of the tree.
    Nodes(Vec<f64>),
    /// Row-major `paths × (N + 1)`.
    Paths(Vec<f64>),
}

/// A right-continuous piecewise-constant adapted process on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCadlagPath {
    space: Arc<SampleSpace>,
    store: Store,
}

fn fill_dfs(tree: &FiltrationTree, a: usize, prefix: &mut Vec<u32>, f: &impl Fn(&[u32]) -> f64, out: &mut [f64]) {
    out[a] = f(prefix);
    if tree.is_leaf(a) {
        return;
    }
    for (i, c) in tree.children(a).enumerate() {
        prefix.push(i as u32);
        fill_dfs(tree, c, prefix, f, out);
        prefix.pop();
    }
}

impl GridCadlagPath {
    /// Wrap a process living on the space's tree.
    pub fn from_process(space: Arc<SampleSpace>, p: &TreeProcess) -> Result<Self> {
        match space.tree_ref() {
            Some(t) if Arc::ptr_eq(t, p.tree()) || **t == **p.tree() => {
                Ok(Self { store: Store::Nodes(p.values().to_vec()), space })
            }
            Some(_) => Err(Error::SpaceMismatch),
            None => Err(Error::NeedsTree("from_process")),
        }
    }

    /// `x_k = f(s_1, …, s_k)` where `s_i` are the child offsets taken so far.
    pub fn from_fn(space: Arc<SampleSpace>, f: impl Fn(&[u32]) -> f64) -> Self {
        let store = match &space.kind {
            Kind::Tree(t) => {
                let mut out = vec![0.0; t.node_count()];
                fill_dfs(t, 0, &mut Vec::new(), &f, &mut out);
                Store::Nodes(out)
            }
            Kind::Sampled { symbols, .. } => {
                let n = space.grid.steps;
                let mut out = Vec::with_capacity(space.paths() * (n + 1));
                for sym in symbols.chunks(n) {
                    out.extend((0..=n).map(|k| f(&sym[..k])));
                }
                Store::Paths(out)
            }
        };
        Self { space, store }
    }

    /// `x_0 = x0`, `x_{k+1} = step(k, x_k, s_{k+1})`.
    pub fn from_recursion(space: Arc<SampleSpace>, x0: f64, step: impl Fn(usize, f64, u32) -> f64) -> Self {
        let store = match &space.kind {
            Kind::Tree(t) => {
                let mut out = vec![0.0; t.node_count()];
                out[0] = x0;
                for a in 0..t.level(t.depth()).start {
                    let k = t.level_of(a);
                    for (i, c) in t.children(a).enumerate() {
                        out[c] = step(k, out[a], i as u32);
                    }
                }
                Store::Nodes(out)
            }
            Kind::Sampled { symbols, .. } => {
                let n = space.grid.steps;
                let mut out = Vec::with_capacity(space.paths() * (n + 1));
                for sym in symbols.chunks(n) {
                    let mut x = x0;
                    out.push(x);
                    for (k, &s) in sym.iter().enumerate() {
                        x = step(k, x, s);
                        out.push(x);
                    }
                }
                Store::Paths(out)
            }
        };
        Self { space, store }
    }

    pub fn constant(space: Arc<SampleSpace>, c: f64) -> Self {
        Self::from_recursion(space, c, |_, x, _| x)
    }

    /// Fair `±step` walk from 0. Needs a space where every node has two
    /// equally likely children.
    pub fn walk(space: Arc<SampleSpace>, step: f64) -> Result<Self> {
        let fair = match &space.kind {
            Kind::Tree(t) => (0..t.level(t.depth()).start)
                .all(|a| t.children(a).len() == 2 && t.children(a).all(|c| (t.cond_prob(c) - 0.5).abs() <= 1e-12)),
            Kind::Sampled { branching, .. } => *branching == 2,
        };
        if !fair {
            return Err(Error::InvalidParameter("walk needs a fair binary space".into()));
        }
        Ok(Self::from_recursion(space, 0.0, |_, x, s| if s == 0 { x + step } else { x - step }))
    }

    /// Walk with steps `±sqrt(T/N)`, so that `Σ (δg)² = T` on every path.
    pub fn scaled_walk(space: Arc<SampleSpace>) -> Result<Self> {
        let g = space.grid();
        Self::walk(space, (g.t_end() / g.steps() as f64).sqrt())
    }

    /// Build from per-path value vectors. On trees the vectors must agree
    /// wherever paths share a node, i.e. the process must be adapted.
    pub fn from_paths(space: Arc<SampleSpace>, paths: &[Vec<f64>]) -> Result<Self> {
        let len = space.grid.len();
        if paths.len() != space.paths() || paths.iter().any(|v| v.len() != len) {
            return Err(Error::InvalidParameter(format!("expected {} paths of {len} values", space.paths())));
        }
        let store = match &space.kind {
            Kind::Tree(t) => {
                let mut out = vec![f64::NAN; t.node_count()];
                let mut seen = vec![false; t.node_count()];
                let mut nodes = Vec::new();
                for (p, v) in paths.iter().enumerate() {
                    t.path_into(t.leaves().start + p, &mut nodes);
                    for (k, &a) in nodes.iter().enumerate() {
                        if seen[a] {
                            let (x, y) = (out[a], v[k]);
                            if !(x == y || (x - y).abs() <= 1e-12 * (1.0 + x.abs())) {
                                return Err(Error::NotAdapted { node: a, index: k });
                            }
                        } else {
                            seen[a] = true;
                            out[a] = v[k];
                        }
                    }
                }
                Store::Nodes(out)
            }
            Kind::Sampled { .. } => Store::Paths(paths.concat()),
        };
        Ok(Self { space, store })
    }

    /// `y_k = f(x_0, …, x_k)`: an adapted functional of this path.
    pub fn adapted_map(&self, f: impl Fn(&[f64]) -> f64) -> Self {
        let paths: Vec<Vec<f64>> = self.paths().map(|x| (0..x.len()).map(|k| f(&x[..=k])).collect()).collect();
        Self::from_paths(self.space.clone(), &paths).expect("prefix functionals are adapted")
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        if !SampleSpace::same(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&x, &y)| f(x, y)).collect();
        let store = match (&self.store, &other.store) {
            (Store::Nodes(a), Store::Nodes(b)) => Store::Nodes(zip(a, b)),
            (Store::Paths(a), Store::Paths(b)) => Store::Paths(zip(a, b)),
            _ => return Err(Error::SpaceMismatch),
        };
        Ok(Self { space: self.space.clone(), store })
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn grid(&self) -> TimeGrid {
        self.space.grid
    }

    /// Values along path `p` at the grid points.
    pub fn path(&self, p: usize) -> Vec<f64> {
        match (&self.store, &self.space.kind) {
            (Store::Nodes(v), Kind::Tree(t)) => t.path_to(t.leaves().start + p).into_iter().map(|a| v[a]).collect(),
            (Store::Paths(v), _) => {
                let len = self.space.grid.len();
                v[p * len..(p + 1) * len].to_vec()
            }
            _ => unreachable!("storage follows the space kind"),
        }
    }

    pub fn paths(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.space.paths()).map(move |p| self.path(p))
    }

    /// Value on path `p` at real time `t` (right-continuous).
    pub fn value_at(&self, p: usize, t: f64) -> f64 {
        self.path(p)[self.grid().index_at(t)]
    }

    /// The process as a tree process, when the space is a tree.
    pub fn tree_process(&self) -> Option<TreeProcess> {
        match (&self.store, &self.space.kind) {
            (Store::Nodes(v), Kind::Tree(t)) => TreeProcess::new(t.clone(), v.clone()).ok(),
            _ => None,
        }
    }

    /// Averaging property on trees; `None` for sampled spaces, where it
    /// cannot be decided from the drawn paths.
    pub fn is_martingale(&self) -> Option<bool> {
        self.tree_process().map(|p| p.is_martingale())
    }

    /// Probability-weighted mean of `h(path)`.
    pub fn expect(&self, h: impl Fn(&[f64]) -> f64) -> f64 {
        self.paths().zip(self.space.weights()).map(|(x, w)| w * h(&x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_is_right_continuous() {
        let g = TimeGrid::new(10, 1.0).unwrap();
        assert_eq!(g.index_at(0.0), 0);
        assert_eq!(g.index_at(0.3), 3);
        assert_eq!(g.index_at(0.2999), 2);
        assert_eq!(g.index_at(1.0), 10);
        assert_eq!(g.index_at(7.0), 10);
        assert_eq!(g.dyadic(1), vec![0, 5, 10]);
        assert_eq!(g.dyadic(5).len(), 11);
        assert!(TimeGrid::new(MAX_GRID + 1, 1.0).is_err());
    }

    #[test]
    fn enumerated_and_sampled_walks() {
        let s = SampleSpace::uniform(2, 4, 1.0, 10, 0).unwrap();
        assert!(s.is_exact());
        let w = GridCadlagPath::scaled_walk(s.clone()).unwrap();
        assert_eq!(w.is_martingale(), Some(true));
        assert_eq!(w.path(0), vec![0.0, 0.5, 1.0, 1.5, 2.0]);
        assert_eq!(s.symbols(3), vec![0, 0, 1, 1]);

        let big = SampleSpace::uniform(2, 64, 1.0, 50, 7).unwrap();
        assert!(big.enumeration().is_sampled());
        let w = GridCadlagPath::scaled_walk(big.clone()).unwrap();
        assert_eq!(w.is_martingale(), None);
        for x in w.paths() {
            let qv: f64 = x.windows(2).map(|d| (d[1] - d[0]).powi(2)).sum();
            assert!((qv - 1.0).abs() < 1e-12);
        }
        assert_eq!(SampleSpace::uniform(2, 64, 1.0, 50, 7).unwrap(), big);
    }

    #[test]
    fn from_fn_agrees_with_recursion() {
        let s = SampleSpace::uniform(3, 3, 2.0, 1, 0).unwrap();
        let a = GridCadlagPath::from_fn(s.clone(), |sym| sym.iter().map(|&x| f64::from(x)).sum());
        let b = GridCadlagPath::from_recursion(s, 0.0, |_, x, sym| x + f64::from(sym));
        assert_eq!(a, b);
    }

    #[test]
    fn non_adapted_paths_are_rejected() {
        let s = SampleSpace::uniform(2, 2, 1.0, 1, 0).unwrap();
        let mut paths: Vec<Vec<f64>> = (0..4).map(|_| vec![0.0, 1.0, 2.0]).collect();
        paths[0][1] = 5.0;
        assert!(matches!(GridCadlagPath::from_paths(s.clone(), &paths), Err(Error::NotAdapted { .. })));
        let w = GridCadlagPath::scaled_walk(s).unwrap();
        let m = w.adapted_map(|x| x.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        assert_eq!(m.is_martingale(), Some(false));
        assert_eq!(m.value_at(3, 0.99), 0.0);
    }
}
