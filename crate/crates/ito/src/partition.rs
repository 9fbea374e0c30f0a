//! Adapted partitions: increasing sequences of grid-valued stopping times.
//!
//! Stored per path as the list of partition points `0 = π_0 < π_1 < …`. A
//! path with `J + 1` points has `π_{J+1} = ∞`. On tree spaces adaptedness is
//! verified by converting the points to [`StoppingRule`]s; on sampled spaces
//! partitions built from prefix rules are adapted by construction.

use std::sync::Arc;

use martlab_core::StoppingRule;

use crate::error::{Error, Result};
use crate::space::{GridCadlagPath, SampleSpace};

#[derive(Debug, Clone, PartialEq)]
pub struct AdaptedGridPartition {
    space: Arc<SampleSpace>,
    points: Vec<Vec<usize>>,
}

/// Largest partition point `≤ k`.
pub fn floor_index(points: &[usize], k: usize) -> usize {
    points[points.partition_point(|&x| x <= k) - 1]
}

fn validate(points: &[usize], steps: usize) -> Result<()> {
    if points.first() != Some(&0) {
        return Err(Error::InvalidPartition("partitions start at 0".into()));
    }
    if points.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidPartition("points must be strictly increasing".into()));
    }
    if *points.last().unwrap() > steps {
        return Err(Error::InvalidPartition(format!("point beyond the grid end {steps}")));
    }
    Ok(())
}

fn merge(a: &[usize], b: &[usize]) -> Vec<usize> {
    let mut out: Vec<usize> = a.iter().chain(b).copied().collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl AdaptedGridPartition {
    /// Per-path points. On tree spaces the points must form stopping times.
    pub fn new(space: Arc<SampleSpace>, points: Vec<Vec<usize>>) -> Result<Self> {
        if points.len() != space.paths() {
            return Err(Error::InvalidPartition(format!("{} paths, expected {}", points.len(), space.paths())));
        }
        for p in &points {
            validate(p, space.grid().steps())?;
        }
        let out = Self { space, points };
        if out.space.is_exact() {
            out.to_rules()?;
        }
        Ok(out)
    }

    /// `π_0 = 0` followed by the (finite) values of `rules` in order.
    pub fn from_rules(space: Arc<SampleSpace>, rules: &[StoppingRule]) -> Result<Self> {
        let tree = space.tree_ref().ok_or(Error::NeedsTree("from_rules"))?.clone();
        let mut points = vec![vec![0]; space.paths()];
        let mut ended = vec![false; space.paths()];
        for rule in rules {
            if **rule.tree() != *tree {
                return Err(Error::SpaceMismatch);
            }
            for (p, t) in rule.leaf_times().into_iter().enumerate() {
                match t {
                    None => ended[p] = true,
                    // A leading rule equal to 0 restates π_0.
                    Some(0) if points[p].len() == 1 && !ended[p] => {}
                    Some(t) if !ended[p] && t > *points[p].last().unwrap() => points[p].push(t),
                    Some(_) => {
                        return Err(Error::InvalidPartition(format!("rule times are not increasing on path {p}")))
                    }
                }
            }
        }
        Self::new(space, points)
    }

    /// `π_j` as stopping rules, `j = 0..=max_j` (`∞` past the last point).
    pub fn to_rules(&self) -> Result<Vec<StoppingRule>> {
        let tree = self.space.tree_ref().ok_or(Error::NeedsTree("to_rules"))?;
        let jmax = self.points.iter().map(Vec::len).max().unwrap_or(0);
        (0..jmax)
            .map(|j| {
                let times: Vec<Option<usize>> = self.points.iter().map(|p| p.get(j).copied()).collect();
                StoppingRule::from_leaf_times(tree.clone(), &times)
                    .map_err(|_| Error::InvalidPartition(format!("point {j} is not a stopping time")))
            })
            .collect()
    }

    /// Every path gets the same deterministic points (0 is added).
    pub fn deterministic(space: Arc<SampleSpace>, idx: &[usize]) -> Result<Self> {
        let pts = merge(&[0], idx);
        validate(&pts, space.grid().steps())?;
        let points = vec![pts; space.paths()];
        Ok(Self { space, points })
    }

    /// `{0}` only.
    pub fn trivial(space: Arc<SampleSpace>) -> Self {
        let points = vec![vec![0]; space.paths()];
        Self { space, points }
    }

    /// Every grid point.
    pub fn full(space: Arc<SampleSpace>) -> Self {
        let pts: Vec<usize> = (0..=space.grid().steps()).collect();
        let points = vec![pts; space.paths()];
        Self { space, points }
    }

    /// The dyadic times `jT/2^level` (rounded down to the grid).
    pub fn dyadic(space: Arc<SampleSpace>, level: u32) -> Self {
        let pts = space.grid().dyadic(level);
        let points = vec![pts; space.paths()];
        Self { space, points }
    }

    /// `π_{j+1} = min{k > π_j : |f_k − f_{π_j}| ≥ ε}`.
    pub fn oscillation(f: &GridCadlagPath, eps: f64) -> Result<Self> {
        if !(eps > 0.0) {
            return Err(Error::InvalidParameter(format!("oscillation threshold {eps}")));
        }
        let points = f
            .paths()
            .map(|x| {
                let mut pts = vec![0];
                let mut base = x[0];
                for (k, &v) in x.iter().enumerate().skip(1) {
                    if (v - base).abs() >= eps {
                        pts.push(k);
                        base = v;
                    }
                }
                pts
            })
            .collect();
        Ok(Self { space: f.space().clone(), points })
    }

    /// Points at the levels of marked nodes along each leaf's path. Any
    /// marking of tree nodes yields an adapted partition.
    pub fn from_marks(space: Arc<SampleSpace>, marks: &[bool]) -> Result<Self> {
        let tree = space.tree_ref().ok_or(Error::NeedsTree("from_marks"))?;
        if marks.len() != tree.node_count() {
            return Err(Error::InvalidPartition(format!("{} marks for {} nodes", marks.len(), tree.node_count())));
        }
        let mut nodes = Vec::new();
        let points = tree
            .leaves()
            .map(|l| {
                tree.path_into(l, &mut nodes);
                std::iter::once(0).chain((1..nodes.len()).filter(|&k| marks[nodes[k]])).collect()
            })
            .collect();
        Ok(Self { space, points })
    }

    /// Pathwise union; unions of stopping times are stopping times.
    pub fn union(&self, other: &Self) -> Result<Self> {
        if !SampleSpace::same(&self.space, &other.space) {
            return Err(Error::SpaceMismatch);
        }
        let points = self.points.iter().zip(&other.points).map(|(a, b)| merge(a, b)).collect();
        Ok(Self { space: self.space.clone(), points })
    }

    /// `π ∪ {jT/2^level}`.
    pub fn refine(&self, level: u32) -> Self {
        let d = self.space.grid().dyadic(level);
        let points = self.points.iter().map(|a| merge(a, &d)).collect();
        Self { space: self.space.clone(), points }
    }

    /// Whether `self ⊆ finer` on every path.
    pub fn is_coarser_than(&self, finer: &Self) -> bool {
        SampleSpace::same(&self.space, &finer.space)
            && self.points.iter().zip(&finer.points).all(|(a, b)| a.iter().all(|x| b.binary_search(x).is_ok()))
    }

    /// Whether `k` is a partition point on every path.
    pub fn contains_everywhere(&self, k: usize) -> bool {
        self.points.iter().all(|p| p.binary_search(&k).is_ok())
    }

    pub fn space(&self) -> &Arc<SampleSpace> {
        &self.space
    }

    pub fn points(&self, p: usize) -> &[usize] {
        &self.points[p]
    }

    pub fn all_points(&self) -> &[Vec<usize>] {
        &self.points
    }

    /// Expected number of partition points.
    pub fn mean_len(&self) -> f64 {
        self.points.iter().zip(self.space.weights()).map(|(p, w)| w * p.len() as f64).sum()
    }

    /// `⌊t, π⌋` on every path, as grid times.
    pub fn floor_time(&self, t: f64) -> Vec<f64> {
        let g = self.space.grid();
        let k = g.index_at(t);
        self.points.iter().map(|p| g.time(floor_index(p, k))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space() -> Arc<SampleSpace> {
        SampleSpace::uniform(2, 4, 1.0, 1, 0).unwrap()
    }

    #[test]
    fn floors() {
        let p = [0, 2, 5];
        assert_eq!(floor_index(&p, 0), 0);
        assert_eq!(floor_index(&p, 1), 0);
        assert_eq!(floor_index(&p, 2), 2);
        assert_eq!(floor_index(&p, 4), 2);
        assert_eq!(floor_index(&p, 9), 5);
        let pi = AdaptedGridPartition::trivial(space());
        assert!(pi.floor_time(0.8).iter().all(|&t| t == 0.0));
        let pi = AdaptedGridPartition::deterministic(space(), &[1, 3]).unwrap();
        assert!(pi.floor_time(0.75).iter().all(|&t| t == 0.75));
        assert!(pi.floor_time(0.7).iter().all(|&t| t == 0.25));
    }

    #[test]
    fn oscillation_partition_is_adapted() {
        let w = GridCadlagPath::scaled_walk(space()).unwrap();
        let pi = AdaptedGridPartition::oscillation(&w, 0.9).unwrap();
        // Steps of 1/2: the threshold is reached after two equal steps.
        assert_eq!(pi.points(0), &[0, 2, 4]);
        assert_eq!(pi.points(5), &[0]);
        let rules = pi.to_rules().unwrap();
        let back = AdaptedGridPartition::from_rules(space(), &rules[1..]).unwrap();
        assert_eq!(back, pi);
    }

    #[test]
    fn anticipating_points_are_rejected() {
        let s = space();
        let mut pts = vec![vec![0]; 16];
        // Stop at 1 only on the first leaf: depends on the future.
        pts[0].push(1);
        assert!(AdaptedGridPartition::new(s.clone(), pts).is_err());
        let marks: Vec<bool> = (0..31).map(|a| a % 3 == 1).collect();
        let pi = AdaptedGridPartition::from_marks(s.clone(), &marks).unwrap();
        assert!(AdaptedGridPartition::new(s, pi.all_points().to_vec()).is_ok());
    }

    #[test]
    fn unions_and_refinements() {
        let s = space();
        let a = AdaptedGridPartition::deterministic(s.clone(), &[3]).unwrap();
        let b = a.refine(1);
        assert_eq!(b.points(0), &[0, 2, 3, 4]);
        assert!(a.is_coarser_than(&b));
        assert!(!b.is_coarser_than(&a));
        assert_eq!(a.union(&AdaptedGridPartition::full(s)).unwrap().points(3).len(), 5);
    }
}
