//! Two-parameter adapted processes and the discrete paraproduct
//! `Π(F, g)_{s,t} = Σ_{s < j ≤ t} F_{s, j-1} dg_j`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ops::variation::chain_variation;
use crate::process::{ensure_same_tree, TreeProcess};
use crate::tree::FiltrationTree;

/// `F_{s,t}` for `s ≤ t`, stored at the level-`t` nodes (so `F_{s,t}` is
/// `F_t`-measurable by construction).
#[derive(Debug, Clone, PartialEq)]
pub struct TwoParamProcess {
    tree: Arc<FiltrationTree>,
    offset: Vec<usize>,
    values: Vec<f64>,
}

impl TwoParamProcess {
    /// Build from `f(node, s)` for every node and every `s ≤ level(node)`.
    pub fn from_fn(tree: Arc<FiltrationTree>, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut offset = Vec::with_capacity(tree.node_count() + 1);
        let mut values = Vec::new();
        for a in 0..tree.node_count() {
            offset.push(values.len());
            for s in 0..=tree.level_of(a) {
                values.push(f(a, s));
            }
        }
        offset.push(values.len());
        Self { tree, offset, values }
    }

    /// `F_{s,t} = f_t − f_s`.
    pub fn delta(f: &TreeProcess) -> Self {
        let t = f.tree().clone();
        let tree = t.clone();
        let mut path = Vec::new();
        Self::from_fn(t, move |a, s| {
            if s == 0 {
                tree.path_into(a, &mut path);
            }
            f.value(a) - f.value(path[s])
        })
    }

    pub fn tree(&self) -> &Arc<FiltrationTree> {
        &self.tree
    }

    /// `F_{s, level(a)}` on the atom `a`.
    pub fn get(&self, a: usize, s: usize) -> f64 {
        debug_assert!(s <= self.tree.level_of(a));
        self.values[self.offset[a] + s]
    }

    /// Row of all `F_{s, level(a)}`, `s = 0..=level(a)`.
    pub fn row(&self, a: usize) -> &[f64] {
        &self.values[self.offset[a]..self.offset[a + 1]]
    }

    /// `P[s][t] = F_{s,t}` along the root-to-`leaf` path (`s ≤ t`; entries
    /// below the diagonal are zero).
    pub fn path_matrix(&self, leaf: usize) -> Vec<Vec<f64>> {
        let path = self.tree.path_to(leaf);
        let n = path.len();
        let mut m = vec![vec![0.0; n]; n];
        for (t, &a) in path.iter().enumerate() {
            for (s, row) in m.iter_mut().enumerate().take(t + 1) {
                row[t] = self.get(a, s);
            }
        }
        m
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            tree: self.tree.clone(),
            offset: self.offset.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// `Π(F, g)_{s,t}` for all `s ≤ t`.
pub fn paraproduct(big_f: &TwoParamProcess, g: &TreeProcess) -> Result<TwoParamProcess> {
    ensure_same_tree(&big_f.tree, g.tree())?;
    let t = big_f.tree.clone();
    let mut offset = Vec::with_capacity(t.node_count() + 1);
    let mut values: Vec<f64> = Vec::with_capacity(big_f.values.len());
    for a in 0..t.node_count() {
        offset.push(values.len());
        match t.parent(a) {
            None => values.push(0.0),
            Some(p) => {
                let dg = g.value(a) - g.value(p);
                let lvl = t.level_of(a);
                let prow = offset[p];
                for s in 0..lvl {
                    values.push(values[prow + s] + big_f.get(p, s) * dg);
                }
                values.push(0.0);
            }
        }
    }
    offset.push(values.len());
    Ok(TwoParamProcess { tree: t, offset, values })
}

/// `Π(δf, g)`.
pub fn paraproduct_deltaf(f: &TreeProcess, g: &TreeProcess) -> Result<TwoParamProcess> {
    ensure_same_tree(f.tree(), g.tree())?;
    paraproduct(&TwoParamProcess::delta(f), g)
}

/// `Π_{s,t}` on the level-`t` atoms.
pub fn paraproduct_at(pi: &TwoParamProcess, s: usize, t: usize) -> Result<Vec<f64>> {
    pi.tree.check_level(t)?;
    if s > t {
        return Err(Error::InvalidParameter(format!("paraproduct needs s ≤ t, got s = {s}, t = {t}")));
    }
    Ok(pi.tree.level(t).map(|a| pi.get(a, s)).collect())
}

/// Largest `|δΠ_{s,t,u} − (f_t − f_s)(g_u − g_t)|` over all paths and triples.
pub fn chen_residual(pi: &TwoParamProcess, f: &TreeProcess, g: &TreeProcess) -> f64 {
    let t = pi.tree();
    let mut worst = 0.0f64;
    for leaf in t.leaves() {
        let p = pi.path_matrix(leaf);
        let fp = f.path(leaf);
        let gp = g.path(leaf);
        let n = fp.len();
        for s in 0..n {
            for tt in s..n {
                for u in tt..n {
                    let d = p[s][u] - p[s][tt] - p[tt][u];
                    worst = worst.max((d - (fp[tt] - fp[s]) * (gp[u] - gp[tt])).abs());
                }
            }
        }
    }
    worst
}

/// `Π*_t = max_{0 ≤ n < n' ≤ t} |Π_{n,n'}|` along a path matrix.
pub fn running_sup(p: &[Vec<f64>]) -> Vec<f64> {
    let n = p.len();
    let mut out = vec![0.0f64; n];
    for t in 1..n {
        let col = (0..t).map(|s| p[s][t].abs()).fold(0.0, f64::max);
        out[t] = out[t - 1].max(col);
    }
    out
}

/// Greedy partition `τ^{(m)}` of a two-parameter path:
/// `τ_{j+1} = inf{t > τ_j : max_{τ_j ≤ t' < t} |Π_{t',t}| > 2^{-m-1} Π*_t}`.
pub fn paraproduct_partition(p: &[Vec<f64>], m: u32) -> Vec<usize> {
    let star = running_sup(p);
    let thr = 0.5f64.powi(m as i32 + 1);
    let mut taus = vec![0];
    let mut last = 0;
    for t in 1..p.len() {
        let s = (last..t).map(|tp| p[tp][t].abs()).fold(0.0, f64::max);
        if s > thr * star[t] {
            taus.push(t);
            last = t;
        }
    }
    taus
}

/// Both sides of the two-parameter variation bound for `0 < ρ < r`:
/// `sup_chains Σ |Π_{u_{l-1},u_l}|^r` against
/// `(Π*)^r/(1 − 2^{-r}) + 2^ρ Σ_{m≥0} (2^{-m} Π*)^{r-ρ} Σ_j (max_{τ_{j-1} ≤ t < τ_j} |Π_{t,τ_j}|)^ρ`.
///
/// The `m`-sum stops one level after `2^{-m} Π*` drops below the smallest
/// nonzero `|Π_{s,t}|`; beyond that every bucket of the proof is empty.
pub fn paraproduct_variation_bound(p: &[Vec<f64>], r: f64, rho: f64) -> Result<(f64, f64)> {
    if !(rho > 0.0 && r > rho) {
        return Err(Error::InvalidParameter(format!("need 0 < ρ < r, got ρ = {rho}, r = {r}")));
    }
    let n = p.len();
    let (lhs, _) = chain_variation(n, |i, j| p[i][j].abs().powf(r));
    let star = running_sup(p).last().copied().unwrap_or(0.0);
    if star == 0.0 {
        return Ok((lhs, 0.0));
    }
    let min_nz = (0..n)
        .flat_map(|s| (s + 1..n).map(move |t| (s, t)))
        .map(|(s, t)| p[s][t].abs())
        .filter(|&v| v > 0.0)
        .fold(f64::INFINITY, f64::min);
    let mut rhs = star.powf(r) / (1.0 - 0.5f64.powf(r));
    let mut m = 0u32;
    loop {
        let scale = 0.5f64.powi(m as i32) * star;
        let taus = paraproduct_partition(p, m);
        let blocks: f64 = taus
            .windows(2)
            .map(|w| (w[0]..w[1]).map(|t| p[t][w[1]].abs()).fold(0.0, f64::max).powf(rho))
            .sum();
        rhs += 2f64.powf(rho) * scale.powf(r - rho) * blocks;
        if scale < min_nz {
            break;
        }
        m += 1;
    }
    Ok((lhs, rhs))
}

/// Bucket of each step of a chain: `l ∈ L(m)` iff
/// `2^{-m-1} Π*_{u_l} < |Π_{u_{l-1},u_l}| ≤ 2^{-m} Π*_{u_l}`; `None` for
/// vanishing steps.
pub fn chain_buckets(p: &[Vec<f64>], chain: &[usize]) -> Vec<Option<u32>> {
    let star = running_sup(p);
    chain
        .windows(2)
        .map(|w| {
            let v = p[w[0]][w[1]].abs();
            if v == 0.0 {
                return None;
            }
            let s = star[w[1]];
            let mut m = 0u32;
            while v <= 0.5f64.powi(m as i32 + 1) * s {
                m += 1;
            }
            Some(m)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{gen_increment, gen_leaf_backprop, increment_on, LeafDist};

    fn chain(values: &[f64]) -> TreeProcess {
        let t = Arc::new(FiltrationTree::uniform(1, values.len() - 1).unwrap());
        TreeProcess::new(t, values.to_vec()).unwrap()
    }

    #[test]
    fn empty_sum_on_the_diagonal() {
        let f = chain(&[0.0, 1.0, 3.0]);
        let g = chain(&[0.0, -1.0, 2.0]);
        let pi = paraproduct_deltaf(&f, &g).unwrap();
        for t in 0..3 {
            assert_eq!(paraproduct_at(&pi, t, t).unwrap(), vec![0.0]);
        }
        // Π_{0,2} = (f_1 − f_0)(g_2 − g_1).
        assert_eq!(paraproduct_at(&pi, 0, 2).unwrap(), vec![3.0]);
        assert!(paraproduct_at(&pi, 2, 1).is_err());
    }

    #[test]
    fn chen_identity_on_random_martingales() {
        let f = gen_leaf_backprop(LeafDist::Normal, 6, 1).unwrap();
        let g = increment_on(f.tree().clone(), 0.0, &mut crate::rng::stream(5, 0));
        let pi = paraproduct_deltaf(&f, &g).unwrap();
        assert!(chen_residual(&pi, &f, &g) <= 1e-12);
        let other = gen_increment(6, 2).unwrap();
        assert!(paraproduct_deltaf(&f, &other).is_err());
    }

    #[test]
    fn second_index_is_a_martingale() {
        let f = gen_leaf_backprop(LeafDist::Uniform, 5, 3).unwrap();
        let g = increment_on(f.tree().clone(), 0.0, &mut crate::rng::stream(9, 0));
        let pi = paraproduct_deltaf(&f, &g).unwrap();
        let t = f.tree();
        for s in 0..t.depth() {
            for a in t.level(s).start..t.level(t.depth()).start {
                if t.level_of(a) < s {
                    continue;
                }
                let mean: f64 = t.children(a).map(|c| t.cond_prob(c) * pi.get(c, s)).sum();
                assert!((mean - pi.get(a, s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_paraproduct_is_one_block() {
        let p = vec![vec![0.0; 4]; 4];
        assert_eq!(paraproduct_partition(&p, 0), vec![0]);
        assert_eq!(paraproduct_variation_bound(&p, 3.0, 2.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn four_point_buckets_by_hand() {
        // Π_{s,t} on times 0..=3 (upper triangle).
        let p = vec![
            vec![0.0, 1.0, 0.5, 4.0],
            vec![0.0, 0.0, 0.25, 3.0],
            vec![0.0, 0.0, 0.0, 0.75],
            vec![0.0, 0.0, 0.0, 0.0],
        ];
        // Π*_t: t=1 → 1, t=2 → 1, t=3 → 4.
        assert_eq!(running_sup(&p), vec![0.0, 1.0, 1.0, 4.0]);
        // Chain 0 < 1 < 2 < 3: steps 1 (Π*=1 → m=0), 0.25 (Π*=1: 1/8 < 0.25 ≤ 1/4 → m=2),
        // 0.75 (Π*=4: 0.5 < 0.75 ≤ 1 → m=2).
        assert_eq!(chain_buckets(&p, &[0, 1, 2, 3]), vec![Some(0), Some(2), Some(2)]);
        // Chain 0 < 3: 4 ≤ 4 and > 2 → m=0.
        assert_eq!(chain_buckets(&p, &[0, 3]), vec![Some(0)]);
        let (lhs, rhs) = paraproduct_variation_bound(&p, 3.0, 2.0).unwrap();
        assert_eq!(lhs, 64.0);
        assert!(lhs <= rhs);
    }
}
