//! RuzHash, a locality-sensitive hash for the Ruzicka distance, and the
//! isolation forest that partitions with it.
//!
//! A draw binarizes `p` against random thresholds and returns the smallest
//! permuted index among the active coordinates. Buckets are 0-based here;
//! `None` is the empty bucket of a vector with no active coordinate. With an
//! aggregation vector the empty bucket folds into child 0.

use alloc::vec::Vec;

use rand::Rng as _;

use crate::isolation::{self, adjustment_c, depth_limit, DepthHistogram, Normalization, Rows};
use crate::rng::{self, Rng};
use crate::preference::{SparseRow, Supports};
use crate::voronoi::subsample;
use crate::{Error, Result};

/// One hash draw over `m` coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct RuzHashParams {
    tau: Vec<f32>,
    pi: Vec<u32>,
    order: Vec<u32>,
    beta: Option<Vec<u16>>,
}

impl RuzHashParams {
    /// Fresh thresholds and permutation; `branching` adds an aggregation
    /// vector onto `0..branching`.
    pub fn sample(m: usize, branching: Option<usize>, rng: &mut Rng) -> Self {
        let mut params = Self {
            tau: alloc::vec![0.0; m],
            pi: alloc::vec![0; m],
            order: (0..m as u32).collect(),
            beta: branching.map(|_| alloc::vec![0; m]),
        };
        params.resample(branching, rng);
        params
    }

    /// Redraws in place, reusing the buffers.
    pub fn resample(&mut self, branching: Option<usize>, rng: &mut Rng) {
        let m = self.tau.len();
        for t in &mut self.tau {
            *t = rng.random::<f32>();
        }
        for (i, o) in self.order.iter_mut().enumerate() {
            *o = i as u32;
        }
        for i in (1..m).rev() {
            let j = rng.random_range(0..=i);
            self.order.swap(i, j);
        }
        for (rank, &coord) in self.order.iter().enumerate() {
            self.pi[coord as usize] = rank as u32;
        }
        match branching {
            Some(b) => {
                assert!((1..=u16::MAX as usize + 1).contains(&b), "branching factor out of range");
                let beta = self.beta.get_or_insert_with(|| alloc::vec![0; m]);
                beta.resize(m, 0);
                for v in beta.iter_mut() {
                    *v = rng.random_range(0..b) as u16;
                }
            }
            None => self.beta = None,
        }
    }

    pub fn from_parts(tau: Vec<f32>, pi: Vec<u32>, beta: Option<Vec<u16>>) -> Result<Self> {
        let m = tau.len();
        if pi.len() != m {
            return Err(Error::LengthMismatch { left: m, right: pi.len() });
        }
        if let Some(b) = &beta {
            if b.len() != m {
                return Err(Error::LengthMismatch { left: m, right: b.len() });
            }
        }
        if tau.iter().any(|t| !(0.0..1.0).contains(t)) {
            return Err(Error::InvalidParameter("thresholds must lie in [0, 1)"));
        }
        let mut order = alloc::vec![u32::MAX; m];
        for (coord, &rank) in pi.iter().enumerate() {
            let slot = order.get_mut(rank as usize).ok_or(Error::InvalidParameter("pi is not a permutation"))?;
            if *slot != u32::MAX {
                return Err(Error::InvalidParameter("pi is not a permutation"));
            }
            *slot = coord as u32;
        }
        Ok(Self { tau, pi, order, beta })
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    pub fn tau(&self) -> &[f32] {
        &self.tau
    }

    /// Rank of every coordinate under the permutation.
    pub fn pi(&self) -> &[u32] {
        &self.pi
    }

    /// Aggregation map from hash index to child.
    pub fn beta(&self) -> Option<&[u16]> {
        self.beta.as_deref()
    }
}

/// Smallest rank among coordinates with `p_i > tau_i`.
pub fn ruzhash(p: &[f32], params: &RuzHashParams) -> Option<usize> {
    debug_assert_eq!(p.len(), params.len());
    params
        .order
        .iter()
        .position(|&c| p[c as usize] > params.tau[c as usize])
}

/// [`ruzhash`] mapped through the aggregation vector.
///
/// # Panics
///
/// If `params` carries no aggregation vector.
pub fn ruzhash_aggregated(p: &[f32], params: &RuzHashParams) -> Option<usize> {
    let beta = params.beta.as_ref().expect("aggregation vector required");
    ruzhash(p, params).map(|h| beta[h] as usize)
}

/// Fraction of `trials` independent draws under which `p` and `q` share a bucket.
pub fn estimate_collision(p: &[f32], q: &[f32], branching: Option<usize>, trials: usize, rng: &mut Rng) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("need at least one trial"));
    }
    let mut params = RuzHashParams::sample(p.len(), branching, rng);
    let mut hits = 0usize;
    for trial in 0..trials {
        if trial > 0 {
            params.resample(branching, rng);
        }
        let same = match branching {
            Some(_) => ruzhash_aggregated(p, &params) == ruzhash_aggregated(q, &params),
            None => ruzhash(p, &params) == ruzhash(q, &params),
        };
        hits += same as usize;
    }
    Ok(hits as f64 / trials as f64)
}

/// Per-node hash drawn from one 64-bit key. Coordinate `j` gets its
/// threshold, rank and child from a counter-based mix of `(key, j)`, so
/// routing only reads the nonzero entries of a point and the node stores no
/// per-coordinate state. [`NodeHash::params`] materializes the same draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeHash {
    key: u64,
    branching: u32,
}

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
/// Low bits of a mixed word: the threshold, then the coordinate in the rank key.
const LOW_BITS: u32 = 24;
const LOW_MASK: u64 = (1 << LOW_BITS) - 1;

/// SplitMix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl NodeHash {
    /// Largest number of coordinates a node hash can order.
    pub const MAX_COORDS: usize = (1 << LOW_BITS) - 1;

    pub fn sample(branching: usize, rng: &mut Rng) -> Self {
        assert!((1..=u16::MAX as usize + 1).contains(&branching), "branching factor out of range");
        Self { key: rng.random(), branching: branching as u32 }
    }

    #[inline]
    fn word(&self, j: u32) -> u64 {
        mix(self.key ^ (j as u64 + 1).wrapping_mul(GOLDEN))
    }

    /// Threshold in `[0, 1)` on a 2⁻²⁴ grid, exact in `f32`.
    #[inline]
    fn tau(word: u64) -> f32 {
        (word & LOW_MASK) as u32 as f32 * (1.0 / (1u32 << LOW_BITS) as f32)
    }

    /// High 40 bits of the word, ties broken by coordinate.
    #[inline]
    fn rank_key(word: u64, j: u32) -> u64 {
        (word & !LOW_MASK) | j as u64
    }

    #[inline]
    fn bucket(&self, j: u32) -> usize {
        (mix(self.word(j) ^ GOLDEN) % self.branching as u64) as usize
    }

    /// Child for the active coordinate of lowest rank among `entries`; the
    /// empty bucket goes to child 0.
    #[inline]
    fn route(&self, entries: impl Iterator<Item = (u32, f32)>) -> usize {
        let mut best = u64::MAX;
        for (j, v) in entries {
            let w = self.word(j);
            let r = if v > Self::tau(w) { Self::rank_key(w, j) } else { u64::MAX };
            best = best.min(r);
        }
        if best == u64::MAX {
            0
        } else {
            self.bucket((best & LOW_MASK) as u32)
        }
    }

    pub fn child(&self, p: &[f32]) -> usize {
        self.route(p.iter().enumerate().filter(|(_, v)| **v > 0.0).map(|(j, &v)| (j as u32, v)))
    }

    pub(crate) fn child_sparse(&self, p: SparseRow<'_>) -> usize {
        self.route(p.indices().iter().copied().zip(p.values().iter().copied()))
    }

    /// The thresholds, permutation and aggregation vector over `m` coordinates.
    pub fn params(&self, m: usize) -> RuzHashParams {
        assert!(m <= Self::MAX_COORDS, "too many coordinates");
        let words: Vec<u64> = (0..m as u32).map(|j| self.word(j)).collect();
        let mut order: Vec<u32> = (0..m as u32).collect();
        order.sort_unstable_by_key(|&j| Self::rank_key(words[j as usize], j));
        let mut pi = alloc::vec![0u32; m];
        for (rank, &j) in order.iter().enumerate() {
            pi[j as usize] = rank as u32;
        }
        let tau = words.iter().map(|&w| Self::tau(w)).collect();
        // `beta` is indexed by rank.
        let beta = order.iter().map(|&j| self.bucket(j) as u16).collect();
        RuzHashParams { tau, pi, order, beta: Some(beta) }
    }

    pub fn byte_size(&self) -> usize {
        core::mem::size_of::<Self>()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RzNode {
    Internal { hash: NodeHash, children: Vec<RzNode> },
    Leaf { size: usize },
}

impl RzNode {
    pub fn depth(&self) -> usize {
        match self {
            RzNode::Leaf { .. } => 0,
            RzNode::Internal { children, .. } => 1 + children.iter().map(RzNode::depth).max().unwrap_or(0),
        }
    }

    pub fn mass(&self) -> usize {
        match self {
            RzNode::Leaf { size } => *size,
            RzNode::Internal { children, .. } => children.iter().map(RzNode::mass).sum(),
        }
    }

    pub fn leaf_depths(&self, hist: &mut DepthHistogram) {
        fn walk(node: &RzNode, e: usize, hist: &mut DepthHistogram) {
            match node {
                RzNode::Leaf { .. } => hist.record(e),
                RzNode::Internal { children, .. } => children.iter().for_each(|c| walk(c, e + 1, hist)),
            }
        }
        walk(self, 0, hist);
    }
}

/// Builds one tree over the listed rows of a preference matrix.
pub fn build_rzhash_tree<R: Rows + ?Sized>(
    data: &R,
    points: &[usize],
    b: usize,
    depth_limit: usize,
    rng: &mut Rng,
) -> RzNode {
    grow(&Routed::new(data), points.to_vec(), 0, b, depth_limit, rng)
}

/// Rows with their supports when those are cheap to keep.
struct Routed<'a, R: ?Sized> {
    data: &'a R,
    supports: Option<Supports>,
}

impl<'a, R: Rows + ?Sized> Routed<'a, R> {
    fn new(data: &'a R) -> Self {
        Self { data, supports: Supports::build(data) }
    }

    fn child(&self, hash: &NodeHash, i: usize) -> usize {
        match &self.supports {
            Some(sp) => hash.child_sparse(sp.row(i)),
            None => hash.child(self.data.row(i)),
        }
    }

    fn path_length(&self, i: usize, tree: &RzNode) -> f64 {
        descend(tree, |h| self.child(h, i))
    }
}

fn grow<R: Rows + ?Sized>(data: &Routed<'_, R>, points: Vec<usize>, depth: usize, b: usize, limit: usize, rng: &mut Rng) -> RzNode {
    if depth >= limit || points.len() < b {
        return RzNode::Leaf { size: points.len() };
    }
    let hash = NodeHash::sample(b, rng);
    let mut parts: Vec<Vec<usize>> = (0..b).map(|_| Vec::new()).collect();
    for &i in &points {
        parts[data.child(&hash, i)].push(i);
    }
    drop(points);
    let children = parts.into_iter().map(|part| grow(data, part, depth + 1, b, limit, rng)).collect();
    RzNode::Internal { hash, children }
}

fn descend(tree: &RzNode, child: impl Fn(&NodeHash) -> usize) -> f64 {
    let mut node = tree;
    let mut e = 0usize;
    loop {
        match node {
            RzNode::Leaf { size } => return e as f64 + adjustment_c(*size),
            RzNode::Internal { hash, children } => {
                node = &children[child(hash)];
                e += 1;
            }
        }
    }
}

pub fn rz_path_length(p: &[f32], tree: &RzNode) -> f64 {
    descend(tree, |h| h.child(p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RzForestParams {
    pub trees: usize,
    pub psi: usize,
    pub branching: usize,
    pub normalization: Normalization,
}

impl RzForestParams {
    pub fn new(trees: usize, psi: usize, branching: usize) -> Self {
        Self { trees, psi, branching, normalization: Normalization::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter("number of trees must be at least 1"));
        }
        if self.branching < 2 {
            return Err(Error::InvalidParameter("branching factor must be at least 2"));
        }
        if self.branching > self.psi {
            return Err(Error::InvalidParameter("branching factor cannot exceed psi"));
        }
        if self.branching > u16::MAX as usize + 1 {
            return Err(Error::InvalidParameter("branching factor too large"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RzHashForest {
    trees: Vec<RzNode>,
    psi: usize,
    branching: usize,
    depth_limit: usize,
    normalization: Normalization,
}

fn check_input<R: Rows + ?Sized>(data: &R, params: &RzForestParams) -> Result<usize> {
    params.validate()?;
    if data.n_rows() == 0 {
        return Err(Error::InvalidParameter("cannot build a forest on an empty point set"));
    }
    if data.n_cols() == 0 {
        return Err(Error::InvalidParameter("preference vectors must be nonempty"));
    }
    if data.n_cols() > NodeHash::MAX_COORDS {
        return Err(Error::InvalidParameter("too many models for a node hash"));
    }
    Ok(params.psi.min(data.n_rows()))
}

impl RzHashForest {
    pub fn build<R: Rows + ?Sized>(data: &R, params: &RzForestParams, rng: &mut Rng) -> Result<Self> {
        let psi = check_input(data, params)?;
        let limit = depth_limit(psi, params.branching);
        let n = data.n_rows();
        let rngs: Vec<Rng> = (0..params.trees).map(|_| rng::fork(rng)).collect();
        let routed = Routed::new(data);
        let trees = isolation::par_map(rngs, |mut tree_rng| {
            let sample = subsample(n, psi, &mut tree_rng);
            grow(&routed, sample, 0, params.branching, limit, &mut tree_rng)
        });
        Ok(Self { trees, psi, branching: params.branching, depth_limit: limit, normalization: params.normalization })
    }

    pub fn trees(&self) -> &[RzNode] {
        &self.trees
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    pub fn score_rows<Q: Rows + ?Sized>(&self, queries: &Q) -> Vec<f64> {
        let norm = self.normalization.normalizer(self.psi, self.branching);
        let routed = Routed::new(queries);
        let ids: Vec<usize> = (0..queries.n_rows()).collect();
        isolation::par_map(ids, |i| {
            let total: f64 = self.trees.iter().map(|t| routed.path_length(i, t)).sum();
            isolation::isolation_score(total / self.trees.len() as f64, norm)
        })
    }

    pub fn depth_histogram(&self) -> DepthHistogram {
        let mut hist = DepthHistogram::default();
        self.trees.iter().for_each(|t| t.leaf_depths(&mut hist));
        hist
    }
}

/// Scores of a fitted-and-discarded forest: every tree is built, used to score
/// all rows and dropped, so only one tree per worker is alive at a time.
/// Produces the same scores as [`RzHashForest::build`] followed by
/// [`RzHashForest::score_rows`] under the same RNG state.
pub fn rzhash_scores<R: Rows + ?Sized>(data: &R, params: &RzForestParams, rng: &mut Rng) -> Result<(Vec<f64>, DepthHistogram)> {
    let psi = check_input(data, params)?;
    let limit = depth_limit(psi, params.branching);
    let n = data.n_rows();
    let rngs: Vec<Rng> = (0..params.trees).map(|_| rng::fork(rng)).collect();
    let routed = Routed::new(data);
    let per_tree = isolation::par_map(rngs, |mut tree_rng| {
        let sample = subsample(n, psi, &mut tree_rng);
        let tree = grow(&routed, sample, 0, params.branching, limit, &mut tree_rng);
        let mut hist = DepthHistogram::default();
        tree.leaf_depths(&mut hist);
        let depths: Vec<f64> = (0..n).map(|i| routed.path_length(i, &tree)).collect();
        (depths, hist)
    });
    let norm = params.normalization.normalizer(psi, params.branching);
    let mut hist = DepthHistogram::default();
    let mut scores = Vec::with_capacity(n);
    for i in 0..n {
        let total: f64 = per_tree.iter().map(|(d, _)| d[i]).sum();
        scores.push(isolation::isolation_score(total / params.trees as f64, norm));
    }
    per_tree.iter().for_each(|(_, h)| hist.merge(h));
    Ok((scores, hist))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::preference;

    #[test]
    fn single_active_coordinate() {
        let mut rng = rng::from_seed(1);
        let m = 12;
        let params = RuzHashParams::from_parts(alloc::vec![0.5; m], (0..m as u32).rev().collect(), None).unwrap();
        for j in 0..m {
            let mut p = alloc::vec![0.0f32; m];
            p[j] = 1.0;
            assert_eq!(ruzhash(&p, &params), Some(params.pi()[j] as usize));
        }
        let random = RuzHashParams::sample(m, None, &mut rng);
        assert_eq!(ruzhash(&alloc::vec![1.0; m], &random), Some(0));
        assert_eq!(ruzhash(&alloc::vec![0.0; m], &random), None);
    }

    #[test]
    fn sampled_params_are_valid() {
        let mut rng = rng::from_seed(3);
        let params = RuzHashParams::sample(50, Some(4), &mut rng);
        let mut seen = alloc::vec![false; 50];
        for &r in params.pi() {
            assert!(!seen[r as usize]);
            seen[r as usize] = true;
        }
        assert!(params.tau().iter().all(|t| (0.0..1.0).contains(t)));
        assert!(params.beta().unwrap().iter().all(|&v| v < 4));
        let rebuilt = RuzHashParams::from_parts(params.tau().to_vec(), params.pi().to_vec(), params.beta().map(<[u16]>::to_vec)).unwrap();
        assert_eq!(rebuilt, params);
        assert!(RuzHashParams::from_parts(alloc::vec![0.1; 3], alloc::vec![0, 0, 1], None).is_err());
        assert!(RuzHashParams::from_parts(alloc::vec![1.0; 1], alloc::vec![0], None).is_err());
    }

    #[test]
    fn aggregation_with_one_bucket() {
        let mut rng = rng::from_seed(9);
        let params = RuzHashParams::sample(20, Some(1), &mut rng);
        let p: Vec<f32> = (0..20).map(|i| (i as f32) / 20.0).collect();
        assert_eq!(ruzhash_aggregated(&p, &params).unwrap_or(0), 0);
    }

    #[test]
    fn identical_vectors_always_collide() {
        let mut rng = rng::from_seed(5);
        let p: Vec<f32> = (0..30).map(|i| ((i * 7) % 11) as f32 / 11.0).collect();
        assert_eq!(estimate_collision(&p, &p, None, 500, &mut rng).unwrap(), 1.0);
        assert_eq!(estimate_collision(&p, &p, Some(3), 500, &mut rng).unwrap(), 1.0);
    }

    #[test]
    fn disjoint_supports_collide_at_one_over_b() {
        let mut rng = rng::from_seed(6);
        let mut p = alloc::vec![0.0f32; 40];
        let mut q = alloc::vec![0.0f32; 40];
        p[..20].iter_mut().for_each(|v| *v = 1.0);
        q[20..].iter_mut().for_each(|v| *v = 1.0);
        assert_eq!(preference::ruzicka(&p, &q).unwrap(), 1.0);
        assert_eq!(estimate_collision(&p, &q, None, 2000, &mut rng).unwrap(), 0.0);
        let f = estimate_collision(&p, &q, Some(2), 20000, &mut rng).unwrap();
        assert!((f - 0.5).abs() < 0.02, "{f}");
    }

    #[test]
    fn collision_tracks_ruzicka() {
        let mut rng = rng::from_seed(12);
        let p: Vec<f32> = (0..100).map(|_| rng.random::<f32>()).collect();
        let q: Vec<f32> = (0..100).map(|_| rng.random::<f32>()).collect();
        let d = preference::ruzicka(&p, &q).unwrap();
        let f = estimate_collision(&p, &q, None, 10_000, &mut rng).unwrap();
        assert!((f - (1.0 - d)).abs() <= 0.02, "{f} vs {d}");
        let f4 = estimate_collision(&p, &q, Some(4), 10_000, &mut rng).unwrap();
        assert!((f4 - (1.0 - 0.75 * d)).abs() <= 0.02, "{f4} vs {d}");
    }

    fn matrix(n: usize, m: usize, seed: u64) -> Vec<Vec<f32>> {
        let mut rng = rng::from_seed(seed);
        (0..n)
            .map(|_| (0..m).map(|_| if rng.random::<f32>() < 0.3 { rng.random() } else { 0.0 }).collect())
            .collect()
    }

    #[test]
    fn node_hash_is_an_aggregated_ruzhash() {
        let mut rng = rng::from_seed(17);
        let data = matrix(300, 25, 3);
        for b in [2, 3, 7] {
            let hash = NodeHash::sample(b, &mut rng);
            let params = hash.params(25);
            let sup = Supports::build(&data);
            for (i, p) in data.iter().enumerate() {
                let want = ruzhash(p, &params).map_or(0, |h| params.beta().unwrap()[h] as usize);
                assert_eq!(hash.child(p), want);
                if let Some(sp) = &sup {
                    assert_eq!(hash.child_sparse(sp.row(i)), want);
                }
            }
            let rebuilt = RuzHashParams::from_parts(params.tau().to_vec(), params.pi().to_vec(), params.beta().map(<[u16]>::to_vec));
            assert!(rebuilt.is_ok());
        }
    }

    #[test]
    fn children_partition_parent() {
        let data = matrix(200, 30, 2);
        let ids: Vec<usize> = (0..200).collect();
        let mut rng = rng::from_seed(4);
        let tree = build_rzhash_tree(&data, &ids, 4, 4, &mut rng);
        assert_eq!(tree.mass(), 200);
        assert!(tree.depth() <= 4);
        match &tree {
            RzNode::Internal { children, .. } => assert_eq!(children.len(), 4),
            RzNode::Leaf { .. } => panic!("root should split"),
        }
    }

    #[test]
    fn identical_points_reach_depth_limit() {
        let data: Vec<Vec<f32>> = (0..64).map(|_| alloc::vec![0.4, 0.9, 0.0]).collect();
        let ids: Vec<usize> = (0..64).collect();
        let tree = build_rzhash_tree(&data, &ids, 2, 6, &mut rng::from_seed(1));
        assert_eq!(tree.depth(), 6);
        assert_eq!(rz_path_length(&data[0], &tree), 6.0 + adjustment_c(64));
    }

    #[test]
    fn streaming_matches_stored_forest() {
        let data = matrix(300, 40, 8);
        let params = RzForestParams::new(15, 128, 2);
        let forest = RzHashForest::build(&data, &params, &mut rng::from_seed(21)).unwrap();
        let stored = forest.score_rows(&data);
        let (streamed, hist) = rzhash_scores(&data, &params, &mut rng::from_seed(21)).unwrap();
        assert_eq!(stored, streamed);
        assert_eq!(hist, forest.depth_histogram());
        assert!(stored.iter().all(|s| *s > 0.0 && *s < 1.0));
    }

    #[test]
    fn zero_preference_rows_isolate_together() {
        let mut data = matrix(200, 40, 10);
        for row in data.iter_mut().take(3) {
            row.iter_mut().for_each(|v| *v = 0.0);
        }
        let params = RzForestParams::new(50, 128, 2);
        let (scores, _) = rzhash_scores(&data, &params, &mut rng::from_seed(2)).unwrap();
        assert_eq!(scores[0], scores[1]);
        assert_eq!(scores[1], scores[2]);
    }

    #[test]
    fn rejects_bad_params() {
        let data = matrix(10, 5, 1);
        assert!(RzHashForest::build(&data, &RzForestParams::new(0, 8, 2), &mut rng::from_seed(0)).is_err());
        assert!(RzHashForest::build(&data, &RzForestParams::new(3, 8, 1), &mut rng::from_seed(0)).is_err());
        assert!(RzHashForest::build(&data, &RzForestParams::new(3, 8, 16), &mut rng::from_seed(0)).is_err());
    }
}
