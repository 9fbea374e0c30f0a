//! Corpus generators. Every output is a martingale by construction.

use std::sync::Arc;

use rand::Rng;
use rand_distr::{Distribution, Exp, LogNormal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::process::{Martingale, TreeProcess};
use crate::rng;
use crate::tree::{FiltrationTree, MAX_DEPTH};

/// Distribution of i.i.d. leaf values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeafDist {
    Normal,
    Uniform,
    Rademacher,
    Exponential,
    LogNormal,
}

impl LeafDist {
    pub const ALL: [LeafDist; 5] =
        [Self::Normal, Self::Uniform, Self::Rademacher, Self::Exponential, Self::LogNormal];

    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Self::Normal => rng.sample(StandardNormal),
            Self::Uniform => rng.random_range(-1.0..1.0),
            Self::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            Self::Exponential => Exp::new(1.0).expect("rate 1").sample(rng),
            Self::LogNormal => LogNormal::new(0.0, 1.0).expect("sigma 1").sample(rng),
        }
    }
}

/// Shape of random trees: branching drawn uniformly from a range, and
/// optionally non-uniform conditional probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeShape {
    pub min_branch: usize,
    pub max_branch: usize,
    pub random_probs: bool,
}

impl Default for TreeShape {
    fn default() -> Self {
        Self { min_branch: 2, max_branch: 3, random_probs: true }
    }
}

impl TreeShape {
    pub const BINARY_FAIR: TreeShape = TreeShape { min_branch: 2, max_branch: 2, random_probs: false };
}

fn guard(depth: usize) -> Result<()> {
    if depth > MAX_DEPTH {
        Err(Error::DepthGuard { depth, limit: MAX_DEPTH })
    } else {
        Ok(())
    }
}

/// A random filtration tree of the given shape.
pub fn random_tree<R: Rng + ?Sized>(depth: usize, shape: TreeShape, rng: &mut R) -> Result<FiltrationTree> {
    guard(depth)?;
    if shape.min_branch == 0 || shape.min_branch > shape.max_branch {
        return Err(Error::InvalidParameter(format!(
            "branching range {}..={}",
            shape.min_branch, shape.max_branch
        )));
    }
    let mut branching = Vec::new();
    let mut cond = Vec::new();
    let mut width = 1usize;
    for _ in 0..depth {
        let mut next = 0;
        for _ in 0..width {
            let b = rng.random_range(shape.min_branch..=shape.max_branch);
            branching.push(b);
            next += b;
            if shape.random_probs {
                let w: Vec<f64> = (0..b).map(|_| rng.random_range(0.05..1.0)).collect();
                let s: f64 = w.iter().sum();
                cond.extend(w.iter().map(|x| x / s));
            } else {
                cond.extend(std::iter::repeat_n(1.0 / b as f64, b));
            }
        }
        width = next;
        if width > crate::tree::MAX_NODES {
            return Err(Error::InvalidTree("random tree too large".into()));
        }
    }
    FiltrationTree::from_conditional(depth, &branching, &cond)
}

/// I.i.d. leaf values averaged back up the tree.
pub fn leaf_backprop_on<R: Rng + ?Sized>(tree: Arc<FiltrationTree>, dist: LeafDist, rng: &mut R) -> Martingale {
    let leaves: Vec<f64> = (0..tree.leaf_count()).map(|_| dist.sample(rng)).collect();
    Martingale::from_leaves(tree, &leaves).expect("leaf count matches")
}

pub fn gen_leaf_backprop(dist: LeafDist, depth: usize, seed: u64) -> Result<Martingale> {
    let mut rng = rng::stream(seed, 0);
    let tree = Arc::new(random_tree(depth, TreeShape::default(), &mut rng)?);
    Ok(leaf_backprop_on(tree, dist, &mut rng))
}

/// Random child offsets, re-centred so that their conditional mean is zero.
/// Each internal node draws its own scale, so the conditional variances vary.
pub fn increment_on<R: Rng + ?Sized>(tree: Arc<FiltrationTree>, f0: f64, rng: &mut R) -> Martingale {
    let mut values = vec![0.0; tree.node_count()];
    values[0] = f0;
    for a in 0..tree.level(tree.depth()).start {
        let scale = rng.random_range(0.2..2.0);
        let kids = tree.children(a);
        let offsets: Vec<f64> = kids.clone().map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let mean: f64 = kids.clone().zip(&offsets).map(|(c, d)| tree.cond_prob(c) * d).sum();
        for (c, d) in kids.zip(&offsets) {
            values[c] = values[a] + (d - mean);
        }
    }
    Martingale::new_unchecked(TreeProcess::new(tree, values).expect("shape matches"))
}

pub fn gen_increment(depth: usize, seed: u64) -> Result<Martingale> {
    let mut rng = rng::stream(seed, 0);
    let tree = Arc::new(random_tree(depth, TreeShape::default(), &mut rng)?);
    Ok(increment_on(tree, 0.0, &mut rng))
}

// Five-point Gauss–Legendre rule on [-1, 1].
const GL_NODES: [f64; 5] = [
    0.0,
    -0.538_469_310_105_683_1,
    0.538_469_310_105_683_1,
    -0.906_179_845_938_664,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
    0.236_926_885_056_189_1,
];

/// Average of `f` over `[a, b]` by Gauss–Legendre on 8 panels.
fn average(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const PANELS: usize = 8;
    let h = (b - a) / PANELS as f64;
    let mut s = 0.0;
    for k in 0..PANELS {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
            s += w * f(mid + 0.5 * h * x);
        }
    }
    s * 0.5 / PANELS as f64
}

/// Dyadic martingale `f_n = E(f | F_n)` of a function on `[0, 1]`.
pub fn gen_dyadic_of_function(f: impl Fn(f64) -> f64, depth: usize) -> Result<Martingale> {
    guard(depth)?;
    let tree = Arc::new(FiltrationTree::uniform(2, depth)?);
    let n = tree.leaf_count();
    let h = 1.0 / n as f64;
    let leaves: Vec<f64> = (0..n).map(|k| average(&f, k as f64 * h, (k + 1) as f64 * h)).collect();
    Martingale::from_leaves(tree, &leaves)
}

/// Fair ±1/√n walk of length `n` started at 0.
pub fn gen_scaled_walk(n: usize) -> Result<Martingale> {
    gen_walk(n, 1.0 / (n.max(1) as f64).sqrt())
}

/// Fair ±`step` walk of length `n` started at 0. Children are ordered
/// (up, down).
pub fn gen_walk(n: usize, step: f64) -> Result<Martingale> {
    guard(n)?;
    let tree = Arc::new(FiltrationTree::uniform(2, n)?);
    let mut values = vec![0.0; tree.node_count()];
    for a in 0..tree.level(n).start {
        let c = tree.children(a).start;
        values[c] = values[a] + step;
        values[c + 1] = values[a] - step;
    }
    Ok(Martingale::new_unchecked(TreeProcess::new(tree, values)?))
}

/// `f_n = 2^n 1_[0, 2^-n]` on the dyadic filtration: converges to 0 almost
/// surely while `E f_n = 1`.
pub fn gen_doubling(depth: usize) -> Result<Martingale> {
    guard(depth)?;
    let tree = Arc::new(FiltrationTree::uniform(2, depth)?);
    let values = (0..tree.node_count())
        .map(|a| {
            let n = tree.level_of(a);
            if a == tree.level(n).start {
                2f64.powi(n as i32)
            } else {
                0.0
            }
        })
        .collect();
    Ok(Martingale::new_unchecked(TreeProcess::new(tree, values)?))
}

/// `E_n f_∞` for `f_∞ = Σ_m (m+1)^-2 2^m 1_[2^-m-1, 2^-m]`, an integrable
/// limit whose maximal function is not integrable.
pub fn gen_log_weight(depth: usize) -> Result<Martingale> {
    guard(depth)?;
    let tree = Arc::new(FiltrationTree::uniform(2, depth)?);
    let n = tree.leaf_count();
    let leaves: Vec<f64> = (0..n)
        .map(|k| {
            if k == 0 {
                // Average over [0, 2^-depth] of the tail pieces m >= depth:
                // 2^depth Σ_{m≥depth} (m+1)^-2 2^m 2^{-m-1}.
                2f64.powi(depth as i32 - 1) * inverse_square_tail(depth + 1)
            } else {
                let m = depth - 1 - (usize::BITS - 1 - k.leading_zeros()) as usize;
                2f64.powi(m as i32) / ((m + 1) as f64).powi(2)
            }
        })
        .collect();
    Martingale::from_leaves(tree, &leaves)
}

/// `Σ_{k ≥ from} 1/k²`.
fn inverse_square_tail(from: usize) -> f64 {
    let head: f64 = (1..from).map(|k| 1.0 / (k as f64 * k as f64)).sum();
    std::f64::consts::PI.powi(2) / 6.0 - head
}

/// Named generator with parameters, as used by corpus configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum GeneratorSpec {
    /// Random depth in `1..=max_depth`, random shape, and either i.i.d.
    /// leaves of a random distribution or random centred increments.
    Mixed { max_depth: usize },
    LeafBackprop { dist: LeafDist, depth: usize },
    Increment { depth: usize },
    /// Binary tree, random conditional probabilities, random two-point
    /// increments.
    RandomWalk { depth: usize },
    ScaledWalk { n: usize },
    Walk { n: usize },
    Doubling { depth: usize },
    LogWeight { depth: usize },
    DyadicIdentity { depth: usize },
}

impl GeneratorSpec {
    pub fn generate(&self, seed: u64) -> Result<Martingale> {
        self.generate_with(&mut rng::stream(seed, 0))
    }

    /// Trial `index` of the corpus with this seed.
    pub fn trial(&self, seed: u64, index: usize) -> Result<Martingale> {
        self.generate_with(&mut rng::stream(seed, index as u64))
    }

    pub fn generate_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Martingale> {
        match *self {
            Self::Mixed { max_depth } => {
                guard(max_depth)?;
                let depth = rng.random_range(1..=max_depth.max(1));
                let shape = if rng.random_bool(0.25) { TreeShape::BINARY_FAIR } else { TreeShape::default() };
                let tree = Arc::new(random_tree(depth, shape, rng)?);
                if rng.random_bool(0.5) {
                    let dist = LeafDist::ALL[rng.random_range(0..LeafDist::ALL.len())];
                    Ok(leaf_backprop_on(tree, dist, rng))
                } else {
                    let f0 = rng.sample::<f64, _>(StandardNormal);
                    Ok(increment_on(tree, f0, rng))
                }
            }
            Self::LeafBackprop { dist, depth } => {
                guard(depth)?;
                let tree = Arc::new(random_tree(depth, TreeShape::default(), rng)?);
                Ok(leaf_backprop_on(tree, dist, rng))
            }
            Self::Increment { depth } => {
                guard(depth)?;
                let tree = Arc::new(random_tree(depth, TreeShape::default(), rng)?);
                Ok(increment_on(tree, 0.0, rng))
            }
            Self::RandomWalk { depth } => {
                guard(depth)?;
                let shape = TreeShape { min_branch: 2, max_branch: 2, random_probs: true };
                let tree = Arc::new(random_tree(depth, shape, rng)?);
                Ok(increment_on(tree, 0.0, rng))
            }
            Self::ScaledWalk { n } => gen_scaled_walk(n),
            Self::Walk { n } => gen_walk(n, 1.0),
            Self::Doubling { depth } => gen_doubling(depth),
            Self::LogWeight { depth } => gen_log_weight(depth),
            Self::DyadicIdentity { depth } => gen_dyadic_of_function(|x| x, depth),
        }
    }

    /// Whether different seeds give different outputs.
    pub fn is_random(&self) -> bool {
        matches!(self, Self::Mixed { .. } | Self::LeafBackprop { .. } | Self::Increment { .. } | Self::RandomWalk { .. })
    }
}
