//! Axis-parallel isolation forest used as the reference detector.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::seq::index;
use rand::Rng as _;

use crate::isolation::{self, adjustment_c, depth_limit, DepthHistogram, Rows};
use crate::rng::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ITreeNode {
    Internal { dim: usize, value: f32, left: Box<ITreeNode>, right: Box<ITreeNode> },
    Leaf { size: usize },
}

impl ITreeNode {
    pub fn depth(&self) -> usize {
        match self {
            ITreeNode::Leaf { .. } => 0,
            ITreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn mass(&self) -> usize {
        match self {
            ITreeNode::Leaf { size } => *size,
            ITreeNode::Internal { left, right, .. } => left.mass() + right.mass(),
        }
    }

    fn leaf_depths(&self, e: usize, hist: &mut DepthHistogram) {
        match self {
            ITreeNode::Leaf { .. } => hist.record(e),
            ITreeNode::Internal { left, right, .. } => {
                left.leaf_depths(e + 1, hist);
                right.leaf_depths(e + 1, hist);
            }
        }
    }
}

fn range<R: Rows + ?Sized>(data: &R, points: &[usize], dim: usize) -> (f32, f32) {
    points.iter().fold((f32::INFINITY, f32::NEG_INFINITY), |(lo, hi), &i| {
        let v = data.row(i)[dim];
        (lo.min(v), hi.max(v))
    })
}

/// Uniform dimension among those not constant on `points`, if any.
fn pick_dimension<R: Rows + ?Sized>(data: &R, points: &[usize], rng: &mut Rng) -> Option<(usize, f32, f32)> {
    let d = data.n_cols();
    for _ in 0..64 {
        let dim = rng.random_range(0..d);
        let (lo, hi) = range(data, points, dim);
        if hi > lo {
            return Some((dim, lo, hi));
        }
    }
    let open: Vec<(usize, f32, f32)> = (0..d)
        .filter_map(|dim| {
            let (lo, hi) = range(data, points, dim);
            (hi > lo).then_some((dim, lo, hi))
        })
        .collect();
    if open.is_empty() {
        None
    } else {
        Some(open[rng.random_range(0..open.len())])
    }
}

pub fn build_itree<R: Rows + ?Sized>(data: &R, points: &mut [usize], depth: usize, limit: usize, rng: &mut Rng) -> ITreeNode {
    if depth >= limit || points.len() <= 1 {
        return ITreeNode::Leaf { size: points.len() };
    }
    let Some((dim, lo, hi)) = pick_dimension(data, points, rng) else {
        return ITreeNode::Leaf { size: points.len() };
    };
    let mut value = lo + (hi - lo) * rng.random::<f32>();
    if value <= lo {
        value = lo + (hi - lo) * 0.5;
    }
    let mut split = 0;
    for i in 0..points.len() {
        if data.row(points[i])[dim] < value {
            points.swap(i, split);
            split += 1;
        }
    }
    let (l, r) = points.split_at_mut(split);
    ITreeNode::Internal {
        dim,
        value,
        left: Box::new(build_itree(data, l, depth + 1, limit, rng)),
        right: Box::new(build_itree(data, r, depth + 1, limit, rng)),
    }
}

pub fn itree_path_length(p: &[f32], tree: &ITreeNode) -> f64 {
    let mut node = tree;
    let mut e = 0usize;
    loop {
        match node {
            ITreeNode::Leaf { size } => return e as f64 + adjustment_c(*size),
            ITreeNode::Internal { dim, value, left, right } => {
                node = if p[*dim] < *value { left } else { right };
                e += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationForest {
    trees: Vec<ITreeNode>,
    psi: usize,
    depth_limit: usize,
}

impl IsolationForest {
    pub fn build<R: Rows + ?Sized>(data: &R, trees: usize, psi: usize, rng: &mut Rng) -> Result<Self> {
        if trees == 0 {
            return Err(Error::InvalidParameter("number of trees must be at least 1"));
        }
        if psi == 0 {
            return Err(Error::InvalidParameter("psi must be at least 1"));
        }
        let n = data.n_rows();
        if n == 0 || data.n_cols() == 0 {
            return Err(Error::InvalidParameter("cannot build a forest on an empty point set"));
        }
        let psi = psi.min(n);
        let limit = depth_limit(psi, 2);
        let rngs: Vec<Rng> = (0..trees).map(|_| rng::fork(rng)).collect();
        let trees = isolation::par_map(rngs, |mut tree_rng| {
            let mut sample = if psi >= n { (0..n).collect() } else { index::sample(&mut tree_rng, n, psi).into_vec() };
            build_itree(data, &mut sample, 0, limit, &mut tree_rng)
        });
        Ok(Self { trees, psi, depth_limit: limit })
    }

    pub fn trees(&self) -> &[ITreeNode] {
        &self.trees
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    pub fn score_rows<Q: Rows + ?Sized>(&self, queries: &Q) -> Vec<f64> {
        let norm = adjustment_c(self.psi);
        let ids: Vec<usize> = (0..queries.n_rows()).collect();
        isolation::par_map(ids, |i| {
            let p = queries.row(i);
            let total: f64 = self.trees.iter().map(|t| itree_path_length(p, t)).sum();
            isolation::isolation_score(total / self.trees.len() as f64, norm)
        })
    }

    pub fn depth_histogram(&self) -> DepthHistogram {
        let mut hist = DepthHistogram::default();
        self.trees.iter().for_each(|t| t.leaf_depths(0, &mut hist));
        hist
    }
}

/// Scores of an isolation forest built on `data`.
pub fn baseline_iforest<R: Rows + ?Sized>(data: &R, trees: usize, psi: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = rng::from_seed(seed);
    Ok(IsolationForest::build(data, trees, psi, &mut rng)?.score_rows(data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn repeated_point_scores_equal() {
        let data: Vec<Vec<f32>> = (0..50).map(|_| alloc::vec![3.0, -1.0]).collect();
        let s = baseline_iforest(&data, 20, 16, 1).unwrap();
        assert!(s.windows(2).all(|w| w[0] == w[1]));
    }

    fn gaussian_with_outlier() -> Vec<Vec<f32>> {
        let mut rng = rng::from_seed(4);
        let mut data: Vec<Vec<f32>> = (0..300)
            .map(|_| {
                let x: f32 = rng.sample(rand_distr::StandardNormal);
                let y: f32 = rng.sample(rand_distr::StandardNormal);
                alloc::vec![x, y]
            })
            .collect();
        data.push(alloc::vec![9.0, 9.0]);
        data
    }

    #[test]
    fn far_outlier_has_the_shortest_paths() {
        let data = gaussian_with_outlier();
        let forest = IsolationForest::build(&data, 100, 256, &mut rng::from_seed(7)).unwrap();
        let mean_depth = |p: &[f32]| forest.trees().iter().map(|t| itree_path_length(p, t)).sum::<f64>();
        let outlier = mean_depth(&data[300]);
        assert!(data[..300].iter().all(|p| mean_depth(p) > outlier));
        let scores = forest.score_rows(&data);
        let max = scores.iter().cloned().fold(f64::MIN, f64::max);
        assert_eq!(scores[300], max);
    }

    #[test]
    fn depth_never_exceeds_limit() {
        let data = gaussian_with_outlier();
        let forest = IsolationForest::build(&data, 30, 256, &mut rng::from_seed(3)).unwrap();
        assert_eq!(forest.depth_limit(), 8);
        for t in forest.trees() {
            assert!(t.depth() <= 8);
            assert_eq!(t.mass(), 256);
        }
    }
}
