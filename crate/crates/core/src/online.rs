//! Online Isolation Forest: every tree is an adaptive histogram over the
//! points of a sliding buffer. Bins split once their height reaches
//! `η·2^k` and merge back when forgetting drops them below it.

use alloc::boxed::Box;
use alloc::collections::VecDeque;
use alloc::vec::Vec;

use rand::Rng as _;

use crate::isolation::{self, DepthHistogram};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Axis-aligned closed box.
#[derive(Debug, Clone, PartialEq)]
pub struct Bounds {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Bounds {
    pub fn point(x: &[f64]) -> Self {
        Self { lo: x.to_vec(), hi: x.to_vec() }
    }

    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::LengthMismatch { left: lo.len(), right: hi.len() });
        }
        if lo.iter().zip(&hi).any(|(l, h)| !(l <= h)) {
            return Err(Error::InvalidParameter("box lower corner exceeds upper corner"));
        }
        Ok(Self { lo, hi })
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| l <= v && v <= h)
    }

    pub fn expand(&mut self, x: &[f64]) {
        for ((l, h), &v) in self.lo.iter_mut().zip(self.hi.iter_mut()).zip(x) {
            if v < *l {
                *l = v;
            }
            if v > *h {
                *h = v;
            }
        }
    }

    pub fn union(&self, other: &Bounds) -> Bounds {
        let mut out = self.clone();
        out.expand(&other.lo);
        out.expand(&other.hi);
        out
    }

    fn of_points(points: &[f64], d: usize) -> Option<Bounds> {
        let mut rows = points.chunks_exact(d);
        let mut b = Bounds::point(rows.next()?);
        rows.for_each(|r| b.expand(r));
        Some(b)
    }
}

/// How the supports of freshly split children are initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChildSupport {
    /// The parent support cut at the split value. Every point already in the
    /// parent bin stays inside the support of the child it routes to.
    #[default]
    SplitParent,
    /// Bounding boxes of the synthetic points on each side; an empty side
    /// gets no support.
    SyntheticBounds,
}

#[derive(Debug, Clone, PartialEq)]
struct Split {
    dim: usize,
    value: f64,
    left: OnlineNode,
    right: OnlineNode,
}

/// One bin of an online tree.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineNode {
    h: usize,
    support: Option<Bounds>,
    split: Option<Box<Split>>,
    depth: usize,
}

impl OnlineNode {
    pub fn new(depth: usize) -> Self {
        Self { h: 0, support: None, split: None, depth }
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn support(&self) -> Option<&Bounds> {
        self.support.as_ref()
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// `(dimension, value)` of the split; points with `x[dim] < value` go left.
    pub fn split(&self) -> Option<(usize, f64)> {
        self.split.as_ref().map(|s| (s.dim, s.value))
    }

    pub fn children(&self) -> Option<(&OnlineNode, &OnlineNode)> {
        self.split.as_ref().map(|s| (&s.left, &s.right))
    }

    /// Deepest node depth in the subtree.
    pub fn max_depth(&self) -> usize {
        match self.children() {
            None => self.depth,
            Some((l, r)) => l.max_depth().max(r.max_depth()),
        }
    }

    pub fn node_count(&self) -> usize {
        match self.children() {
            None => 1,
            Some((l, r)) => 1 + l.node_count() + r.node_count(),
        }
    }

    pub fn leaf_depths(&self, hist: &mut DepthHistogram) {
        match self.children() {
            None => hist.record(self.depth),
            Some((l, r)) => {
                l.leaf_depths(hist);
                r.leaf_depths(hist);
            }
        }
    }

    fn check_mass(&self) {
        if let Some(s) = &self.split {
            debug_assert_eq!(self.h, s.left.h + s.right.h, "mass conservation at depth {}", self.depth);
        }
    }
}

/// Split threshold `η·2^k`.
fn capacity(eta: usize, depth: usize) -> usize {
    eta.saturating_mul(1usize.checked_shl(depth as u32).unwrap_or(usize::MAX))
}

/// Adds `x` to every bin on its path, splitting the reached leaf when full.
pub fn learn_point(node: &mut OnlineNode, x: &[f64], eta: usize, depth_cap: usize, mode: ChildSupport, rng: &mut Rng) {
    node.h += 1;
    match &mut node.support {
        Some(r) => r.expand(x),
        None => node.support = Some(Bounds::point(x)),
    }
    match &mut node.split {
        Some(s) => {
            let child = if x[s.dim] < s.value { &mut s.left } else { &mut s.right };
            learn_point(child, x, eta, depth_cap, mode, rng);
        }
        None => {
            if node.depth < depth_cap && node.h >= capacity(eta, node.depth) {
                split_leaf(node, mode, rng);
            }
        }
    }
    node.check_mass();
}

/// Splits a leaf by sampling `h` synthetic points uniformly from its support.
///
/// # Panics
///
/// If `node` is internal or has no support.
pub fn split_leaf(node: &mut OnlineNode, mode: ChildSupport, rng: &mut Rng) {
    assert!(node.split.is_none(), "only leaves can split");
    let support = node.support.as_ref().expect("a split needs a support");
    let d = support.dim();
    let dim = rng.random_range(0..d);
    let value = uniform_in(support.lo[dim], support.hi[dim], rng);
    let mut left_pts = Vec::new();
    let mut right_pts = Vec::new();
    let mut synthetic = alloc::vec![0.0; d];
    for _ in 0..node.h {
        for (i, s) in synthetic.iter_mut().enumerate() {
            *s = uniform_in(support.lo[i], support.hi[i], rng);
        }
        if synthetic[dim] < value {
            left_pts.extend_from_slice(&synthetic);
        } else {
            right_pts.extend_from_slice(&synthetic);
        }
    }
    let (left_support, right_support) = match mode {
        ChildSupport::SplitParent => {
            let mut l = support.clone();
            let mut r = support.clone();
            l.hi[dim] = value;
            r.lo[dim] = value;
            (Some(l), Some(r))
        }
        ChildSupport::SyntheticBounds => (Bounds::of_points(&left_pts, d), Bounds::of_points(&right_pts, d)),
    };
    let child_depth = node.depth + 1;
    let left = OnlineNode { h: left_pts.len() / d, support: left_support, split: None, depth: child_depth };
    let right = OnlineNode { h: right_pts.len() / d, support: right_support, split: None, depth: child_depth };
    node.split = Some(Box::new(Split { dim, value, left, right }));
}

fn uniform_in(lo: f64, hi: f64, rng: &mut Rng) -> f64 {
    if hi > lo {
        lo + (hi - lo) * rng.random::<f64>()
    } else {
        lo
    }
}

/// Removes `x` from every bin on its path under the current splits, merging
/// the first internal bin that falls below capacity.
///
/// Splits made after `x` was learned can send it towards an already empty
/// child; the decrement then goes to the sibling, which keeps every height
/// nonnegative and every internal height equal to its children's sum.
pub fn forget_point(node: &mut OnlineNode, x: &[f64], eta: usize) -> Result<()> {
    if node.h == 0 {
        return Err(Error::UnderflowViolation);
    }
    node.h -= 1;
    if let Some(s) = &mut node.split {
        if node.h < capacity(eta, node.depth) {
            let merged = match (s.left.support.take(), s.right.support.take()) {
                (Some(l), Some(r)) => Some(l.union(&r)),
                (l, r) => l.or(r),
            };
            node.support = merged.or(node.support.take());
            node.split = None;
            return Ok(());
        }
        let go_left = x[s.dim] < s.value;
        let child = match (go_left, s.left.h, s.right.h) {
            (true, 0, _) => &mut s.right,
            (false, _, 0) => &mut s.left,
            (true, _, _) => &mut s.left,
            (false, _, _) => &mut s.right,
        };
        forget_point(child, x, eta)?;
    }
    node.check_mass();
    Ok(())
}

/// Leaf depth plus `max(0, log₂(h/η))`.
pub fn point_depth(node: &OnlineNode, x: &[f64], eta: usize) -> f64 {
    let mut n = node;
    while let Some(s) = &n.split {
        n = if x[s.dim] < s.value { &s.left } else { &s.right };
    }
    let extra = if n.h > eta { libm::log2(n.h as f64 / eta as f64) } else { 0.0 };
    n.depth as f64 + extra
}

/// `(⌊½·log₂(ω/η) + 1⌋, ⌊log₂((ω+1)/η) + 1⌋)`: average and worst-case tree depth.
pub fn depth_bounds(omega: usize, eta: usize) -> Result<(usize, usize)> {
    if eta == 0 || omega < eta {
        return Err(Error::InvalidParameter("need omega >= eta >= 1"));
    }
    let avg = libm::floor(0.5 * libm::log2(omega as f64 / eta as f64) + 1.0);
    let worst = libm::floor(libm::log2((omega as f64 + 1.0) / eta as f64) + 1.0);
    Ok((avg as usize, worst as usize))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnlineParams {
    pub trees: usize,
    pub omega: usize,
    pub eta: usize,
    pub support: ChildSupport,
}

impl OnlineParams {
    pub fn new(trees: usize, omega: usize, eta: usize) -> Self {
        Self { trees, omega, eta, support: ChildSupport::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter("number of trees must be at least 1"));
        }
        if self.eta == 0 {
            return Err(Error::InvalidParameter("eta must be at least 1"));
        }
        if self.omega <= self.eta {
            return Err(Error::InvalidParameter("omega must exceed eta"));
        }
        Ok(())
    }

    /// `⌊log₂(ω/η)⌋`.
    pub fn depth_cap(&self) -> usize {
        let mut cap = 0;
        while capacity(self.eta, cap + 1) <= self.omega {
            cap += 1;
        }
        cap
    }

    /// `log₂(ω/η)`.
    pub fn normalizer(&self) -> f64 {
        libm::log2(self.omega as f64 / self.eta as f64)
    }
}

#[derive(Debug, Clone)]
struct OnlineTree {
    root: OnlineNode,
    rng: Rng,
}

/// The forest together with its sliding buffer.
#[derive(Debug, Clone)]
pub struct OnlineForest {
    params: OnlineParams,
    dim: usize,
    depth_cap: usize,
    trees: Vec<OnlineTree>,
    buffer: VecDeque<Vec<f64>>,
    processed: usize,
}

impl OnlineForest {
    pub fn new(params: OnlineParams, dim: usize, rng: &mut Rng) -> Result<Self> {
        params.validate()?;
        if dim == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1"));
        }
        let trees = (0..params.trees).map(|_| OnlineTree { root: OnlineNode::new(0), rng: rng::fork(rng) }).collect();
        Ok(Self {
            params,
            dim,
            depth_cap: params.depth_cap(),
            trees,
            buffer: VecDeque::with_capacity(params.omega + 1),
            processed: 0,
        })
    }

    pub fn params(&self) -> &OnlineParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn depth_cap(&self) -> usize {
        self.depth_cap
    }

    pub fn processed(&self) -> usize {
        self.processed
    }

    pub fn buffer(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.buffer.iter().map(Vec::as_slice)
    }

    pub fn roots(&self) -> impl ExactSizeIterator<Item = &OnlineNode> + '_ {
        self.trees.iter().map(|t| &t.root)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidDataset("non-finite stream value"));
        }
        Ok(())
    }

    /// Current score of `x` without updating the forest.
    pub fn score(&self, x: &[f64]) -> f64 {
        let eta = self.params.eta;
        let total: f64 = self.trees.iter().map(|t| point_depth(&t.root, x, eta)).sum();
        isolation::isolation_score(total / self.trees.len() as f64, self.params.normalizer())
    }

    /// Learns `x`, forgets the oldest buffered point if the buffer overflows,
    /// then scores `x`.
    pub fn process(&mut self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let (eta, cap, mode) = (self.params.eta, self.depth_cap, self.params.support);
        self.buffer.push_back(x.to_vec());
        let old = if self.buffer.len() > self.params.omega { self.buffer.pop_front() } else { None };
        for tree in &mut self.trees {
            learn_point(&mut tree.root, x, eta, cap, mode, &mut tree.rng);
            if let Some(o) = &old {
                forget_point(&mut tree.root, o, eta)?;
            }
        }
        self.processed += 1;
        Ok(self.score(x))
    }

    /// Runs the learn/forget steps of every point in `batch`, then scores the
    /// batch against the updated forest. Trees update in parallel with the
    /// `rayon` feature.
    pub fn process_batch(&mut self, batch: &[Vec<f64>]) -> Result<Vec<f64>> {
        for x in batch {
            self.check_dim(x)?;
        }
        let (eta, cap, mode, omega) = (self.params.eta, self.depth_cap, self.params.support, self.params.omega);
        let start = self.buffer.len();
        let stream: Vec<&[f64]> = self.buffer.iter().map(Vec::as_slice).chain(batch.iter().map(Vec::as_slice)).collect();
        let trees = core::mem::take(&mut self.trees);
        let updated = isolation::par_map(trees, |mut tree| {
            let mut popped = 0;
            for j in 0..batch.len() {
                learn_point(&mut tree.root, stream[start + j], eta, cap, mode, &mut tree.rng);
                if start + j + 1 - popped > omega {
                    forget_point(&mut tree.root, stream[popped], eta)?;
                    popped += 1;
                }
            }
            Ok(tree)
        });
        drop(stream);
        self.trees = updated.into_iter().collect::<Result<Vec<_>>>()?;
        for x in batch {
            self.buffer.push_back(x.clone());
            if self.buffer.len() > omega {
                self.buffer.pop_front();
            }
        }
        self.processed += batch.len();
        let this = &*self;
        Ok(isolation::par_map(batch.iter().collect(), |x: &Vec<f64>| this.score(x)))
    }

    pub fn depth_histogram(&self) -> DepthHistogram {
        let mut hist = DepthHistogram::default();
        self.roots().for_each(|r| r.leaf_depths(&mut hist));
        hist
    }
}

/// Streams `points` through a fresh forest in batches of `batch` rows.
pub fn online_scores(points: &[Vec<f64>], params: OnlineParams, batch: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    let dim = points.first().map_or(1, Vec::len);
    let mut forest = OnlineForest::new(params, dim, rng)?;
    let batch = batch.max(1);
    let mut scores = Vec::with_capacity(points.len());
    for chunk in points.chunks(batch) {
        if batch == 1 {
            scores.push(forest.process(&chunk[0])?);
        } else {
            scores.extend(forest.process_batch(chunk)?);
        }
    }
    Ok(scores)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf_with(h: usize, depth: usize) -> OnlineNode {
        OnlineNode { h, support: None, split: None, depth }
    }

    #[test]
    fn first_point_opens_a_degenerate_box() {
        let mut root = OnlineNode::new(0);
        learn_point(&mut root, &[1.0, 2.0], 4, 3, ChildSupport::default(), &mut rng::from_seed(0));
        assert_eq!(root.height(), 1);
        assert_eq!(root.support(), Some(&Bounds::point(&[1.0, 2.0])));
        learn_point(&mut root, &[-1.0, 5.0], 4, 3, ChildSupport::default(), &mut rng::from_seed(0));
        assert_eq!(root.support().unwrap().lo(), &[-1.0, 2.0]);
        assert_eq!(root.support().unwrap().hi(), &[1.0, 5.0]);
    }

    #[test]
    fn split_fires_at_eta() {
        let mut rng = rng::from_seed(1);
        let mut root = OnlineNode::new(0);
        for i in 0..7 {
            learn_point(&mut root, &[i as f64, 0.5 * i as f64], 8, 3, ChildSupport::default(), &mut rng);
            assert!(root.is_leaf());
        }
        learn_point(&mut root, &[7.0, 3.5], 8, 3, ChildSupport::default(), &mut rng);
        let (l, r) = root.children().unwrap();
        assert_eq!(l.height() + r.height(), 8);
        assert_eq!(l.depth(), 1);
    }

    #[test]
    fn no_split_at_depth_cap() {
        let mut rng = rng::from_seed(1);
        let mut root = OnlineNode::new(0);
        for i in 0..20 {
            learn_point(&mut root, &[i as f64], 4, 0, ChildSupport::default(), &mut rng);
        }
        assert!(root.is_leaf());
        assert_eq!(root.height(), 20);
    }

    #[test]
    fn degenerate_support_sends_everything_right() {
        for mode in [ChildSupport::SplitParent, ChildSupport::SyntheticBounds] {
            let mut node = OnlineNode { h: 6, support: Some(Bounds::point(&[0.3, 0.3])), split: None, depth: 0 };
            split_leaf(&mut node, mode, &mut rng::from_seed(2));
            let (dim, value) = node.split().unwrap();
            assert_eq!(value, 0.3);
            assert!(dim < 2);
            let (l, r) = node.children().unwrap();
            assert_eq!((l.height(), r.height()), (0, 6));
            assert_eq!(r.support(), Some(&Bounds::point(&[0.3, 0.3])));
            if mode == ChildSupport::SyntheticBounds {
                assert_eq!(l.support(), None);
            }
        }
    }

    #[test]
    fn split_is_reproducible() {
        let make = || {
            let mut node = OnlineNode { h: 64, support: Some(Bounds::new(alloc::vec![0.0], alloc::vec![1.0]).unwrap()), split: None, depth: 0 };
            split_leaf(&mut node, ChildSupport::SyntheticBounds, &mut rng::from_seed(77));
            node
        };
        let a = make();
        assert_eq!(a, make());
        let (l, r) = a.children().unwrap();
        assert_eq!(l.height() + r.height(), 64);
        let value = a.split().unwrap().1;
        assert!(l.support().is_none_or(|b| b.hi()[0] < value));
        assert!(r.support().is_none_or(|b| b.lo()[0] >= value));
    }

    #[test]
    fn forgetting_below_eta_merges_the_root() {
        let mut rng = rng::from_seed(3);
        let mut root = OnlineNode::new(0);
        let pts: Vec<[f64; 2]> = (0..8).map(|i| [i as f64, (i * i) as f64]).collect();
        for p in &pts {
            learn_point(&mut root, p, 8, 3, ChildSupport::default(), &mut rng);
        }
        assert!(!root.is_leaf());
        forget_point(&mut root, &pts[0], 8).unwrap();
        assert!(root.is_leaf());
        assert_eq!(root.height(), 7);
        for p in &pts[1..] {
            assert!(root.support().unwrap().contains(p));
        }
    }

    #[test]
    fn learn_then_forget_single_point() {
        let mut root = OnlineNode::new(0);
        learn_point(&mut root, &[0.5, 0.5], 4, 2, ChildSupport::default(), &mut rng::from_seed(0));
        forget_point(&mut root, &[0.5, 0.5], 4).unwrap();
        assert_eq!(root.height(), 0);
        assert!(root.is_leaf());
        assert_eq!(forget_point(&mut root, &[0.5, 0.5], 4), Err(Error::UnderflowViolation));
    }

    #[test]
    fn depth_formula() {
        assert_eq!(point_depth(&leaf_with(32, 0), &[0.0], 32), 0.0);
        assert_eq!(point_depth(&leaf_with(128, 2), &[0.0], 32), 4.0);
        assert_eq!(point_depth(&leaf_with(5, 3), &[0.0], 32), 3.0);
        assert_eq!(point_depth(&leaf_with(0, 1), &[0.0], 32), 1.0);
    }

    #[test]
    fn bounds_and_caps() {
        assert_eq!(depth_bounds(2048, 32).unwrap(), (4, 7));
        assert_eq!(depth_bounds(32, 32).unwrap(), (1, 1));
        assert!(depth_bounds(8, 32).is_err());
        let p = OnlineParams::new(32, 2048, 32);
        assert_eq!(p.depth_cap(), 6);
        assert_eq!(p.normalizer(), 6.0);
        assert_eq!(OnlineParams::new(1, 100, 32).depth_cap(), 1);
        assert!(OnlineParams::new(1, 32, 32).validate().is_err());
    }

    #[test]
    fn score_half_at_normalizer_depth() {
        let p = OnlineParams::new(1, 2048, 32);
        assert!((isolation::isolation_score(p.normalizer(), p.normalizer()) - 0.5).abs() < 1e-15);
    }

    fn stream(n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = rng::from_seed(seed);
        (0..n).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect()
    }

    #[test]
    fn batch_and_single_steps_agree_on_state() {
        let pts = stream(700, 4);
        let params = OnlineParams::new(4, 128, 8);
        let mut a = OnlineForest::new(params, 3, &mut rng::from_seed(9)).unwrap();
        let mut b = OnlineForest::new(params, 3, &mut rng::from_seed(9)).unwrap();
        for p in &pts {
            a.process(p).unwrap();
        }
        for chunk in pts.chunks(100) {
            b.process_batch(chunk).unwrap();
        }
        assert!(a.roots().zip(b.roots()).all(|(x, y)| x == y));
        assert!(a.buffer().zip(b.buffer()).all(|(x, y)| x == y));
        assert_eq!(a.score(&pts[3]), b.score(&pts[3]));
    }

    #[test]
    fn root_height_tracks_window() {
        let pts = stream(400, 5);
        let params = OnlineParams::new(3, 100, 4);
        let mut f = OnlineForest::new(params, 3, &mut rng::from_seed(1)).unwrap();
        for (i, p) in pts.iter().enumerate() {
            let s = f.process(p).unwrap();
            assert!(s > 0.0 && s <= 1.0);
            assert!(f.roots().all(|r| r.height() == (i + 1).min(100)));
            assert!(f.roots().all(|r| r.max_depth() <= f.depth_cap()));
        }
        assert_eq!(f.buffer().len(), 100);
    }

    #[test]
    fn constant_stream_gives_constant_scores() {
        let params = OnlineParams::new(4, 64, 4);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| alloc::vec![0.25, 0.75]).collect();
        let scores = online_scores(&pts, params, 1, &mut rng::from_seed(2)).unwrap();
        assert!(scores[100..].windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn wrong_dimension_is_rejected() {
        let mut f = OnlineForest::new(OnlineParams::new(2, 64, 4), 3, &mut rng::from_seed(0)).unwrap();
        assert_eq!(f.process(&[1.0]), Err(Error::DimensionMismatch { expected: 3, got: 1 }));
    }
}
