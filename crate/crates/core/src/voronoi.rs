//! Voronoi isolation trees: nested `b`-seed Voronoi tessellations under any
//! [`Distance`].

use alloc::vec::Vec;

use rand::seq::index;

use crate::isolation::{self, adjustment_c, depth_limit, DepthHistogram, Normalization, Rows};
use crate::preference::{Distance, SparseRow, SparseVec, Supports};
use crate::rng::{self, Rng};
use crate::{Error, Result};

/// Seeds are row indices into the point set the tree was built on.
#[derive(Debug, Clone, PartialEq)]
pub enum VoronoiNode {
    Internal { seeds: Vec<usize>, children: Vec<VoronoiNode> },
    Leaf { size: usize },
}

impl VoronoiNode {
    pub fn depth(&self) -> usize {
        match self {
            VoronoiNode::Leaf { .. } => 0,
            VoronoiNode::Internal { children, .. } => {
                1 + children.iter().map(VoronoiNode::depth).max().unwrap_or(0)
            }
        }
    }

    /// Sum of leaf sizes, which equals the number of points the tree was built on.
    pub fn mass(&self) -> usize {
        match self {
            VoronoiNode::Leaf { size } => *size,
            VoronoiNode::Internal { children, .. } => children.iter().map(VoronoiNode::mass).sum(),
        }
    }

    pub fn leaf_depths(&self, hist: &mut DepthHistogram) {
        fn walk(node: &VoronoiNode, e: usize, hist: &mut DepthHistogram) {
            match node {
                VoronoiNode::Leaf { .. } => hist.record(e),
                VoronoiNode::Internal { children, .. } => {
                    children.iter().for_each(|c| walk(c, e + 1, hist))
                }
            }
        }
        walk(self, 0, hist);
    }
}

/// A point to route, with its support when the sparse kernels apply.
#[derive(Clone, Copy)]
enum Query<'a> {
    Dense(&'a [f32]),
    Sparse(SparseRow<'a>),
}

/// Distances from points to seeds drawn from `data`.
struct Kernel<'a, R: ?Sized> {
    data: &'a R,
    metric: Distance,
    supports: Option<Supports>,
}

impl<'a, R: Rows + ?Sized> Kernel<'a, R> {
    fn new(data: &'a R, metric: Distance) -> Self {
        let supports = if metric.has_sparse_kernel() { Supports::build(data) } else { None };
        Self { data, metric, supports }
    }

    fn dense(data: &'a R, metric: Distance) -> Self {
        Self { data, metric, supports: None }
    }

    fn data_row(&self, i: usize) -> Query<'_> {
        match &self.supports {
            Some(sp) => Query::Sparse(sp.row(i)),
            None => Query::Dense(self.data.row(i)),
        }
    }

    fn to_seed(&self, q: Query<'_>, seed: usize) -> f64 {
        match (q, &self.supports) {
            (Query::Sparse(p), Some(sp)) => self.metric.eval_sparse(p, self.data.row(seed), sp.stats(seed)),
            (Query::Dense(p), _) => self.metric.eval(p, self.data.row(seed)),
            (Query::Sparse(_), None) => unreachable!("sparse queries need supports"),
        }
    }

    /// Index of the seed nearest to `q`; ties go to the lowest seed index.
    fn nearest(&self, q: Query<'_>, seeds: &[usize]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, &s) in seeds.iter().enumerate() {
            let d = self.to_seed(q, s);
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    fn path_length(&self, q: Query<'_>, tree: &VoronoiNode) -> f64 {
        let mut node = tree;
        let mut e = 0usize;
        loop {
            match node {
                VoronoiNode::Leaf { size } => return e as f64 + adjustment_c(*size),
                VoronoiNode::Internal { seeds, children } => {
                    node = &children[self.nearest(q, seeds)];
                    e += 1;
                }
            }
        }
    }
}

/// Builds one tree over the rows listed in `points`.
pub fn build_voronoi_tree<R: Rows + ?Sized>(
    data: &R,
    points: &[usize],
    b: usize,
    depth_limit: usize,
    metric: Distance,
    rng: &mut Rng,
) -> VoronoiNode {
    grow(&Kernel::dense(data, metric), points, 0, b, depth_limit, rng)
}

fn grow<R: Rows + ?Sized>(kernel: &Kernel<'_, R>, points: &[usize], depth: usize, b: usize, limit: usize, rng: &mut Rng) -> VoronoiNode {
    if depth >= limit || points.len() < b {
        return VoronoiNode::Leaf { size: points.len() };
    }
    let seed_pos: Vec<usize> = index::sample(rng, points.len(), b).into_vec();
    let seeds: Vec<usize> = seed_pos.iter().map(|&i| points[i]).collect();
    let mut owner = alloc::vec![usize::MAX; points.len()];
    for (k, &pos) in seed_pos.iter().enumerate() {
        owner[pos] = k;
    }
    let mut parts: Vec<Vec<usize>> = (0..b).map(|_| Vec::new()).collect();
    let mut separable = false;
    for (pos, &row) in points.iter().enumerate() {
        let k = if owner[pos] != usize::MAX {
            owner[pos]
        } else {
            let p = kernel.data_row(row);
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (k, &s) in seeds.iter().enumerate() {
                let d = kernel.to_seed(p, s);
                separable |= d > 0.0;
                if d < best_d {
                    best_d = d;
                    best = k;
                }
            }
            best
        };
        parts[k].push(row);
    }
    // Seeds that coincide with each other are also indistinguishable.
    if !separable {
        separable = seeds.windows(2).any(|w| kernel.to_seed(kernel.data_row(w[0]), w[1]) > 0.0);
    }
    if !separable {
        return VoronoiNode::Leaf { size: points.len() };
    }
    let children = parts.iter().map(|part| grow(kernel, part, depth + 1, b, limit, rng)).collect();
    VoronoiNode::Internal { seeds, children }
}

/// Depth reached by `p` plus the leaf-size correction.
pub fn path_length<R: Rows + ?Sized>(p: &[f32], tree: &VoronoiNode, data: &R, metric: Distance) -> f64 {
    Kernel::dense(data, metric).path_length(Query::Dense(p), tree)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoronoiParams {
    pub trees: usize,
    pub psi: usize,
    pub branching: usize,
    pub metric: Distance,
    pub normalization: Normalization,
}

impl VoronoiParams {
    pub fn new(trees: usize, psi: usize, branching: usize, metric: Distance) -> Self {
        Self { trees, psi, branching, metric, normalization: Normalization::default() }
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
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiForest {
    trees: Vec<VoronoiNode>,
    psi: usize,
    branching: usize,
    metric: Distance,
    depth_limit: usize,
    normalization: Normalization,
}

/// One uniform subsample of `min(psi, n)` rows without replacement.
pub(crate) fn subsample(n: usize, psi: usize, rng: &mut Rng) -> Vec<usize> {
    if psi >= n {
        (0..n).collect()
    } else {
        index::sample(rng, n, psi).into_vec()
    }
}

impl VoronoiForest {
    pub fn build<R: Rows + ?Sized>(data: &R, params: &VoronoiParams, rng: &mut Rng) -> Result<Self> {
        params.validate()?;
        let n = data.n_rows();
        if n == 0 {
            return Err(Error::InvalidParameter("cannot build a forest on an empty point set"));
        }
        let psi = params.psi.min(n);
        let limit = depth_limit(psi, params.branching);
        let rngs: Vec<Rng> = (0..params.trees).map(|_| rng::fork(rng)).collect();
        let kernel = Kernel::new(data, params.metric);
        let trees = isolation::par_map(rngs, |mut tree_rng| {
            let sample = subsample(n, psi, &mut tree_rng);
            grow(&kernel, &sample, 0, params.branching, limit, &mut tree_rng)
        });
        Ok(Self {
            trees,
            psi,
            branching: params.branching,
            metric: params.metric,
            depth_limit: limit,
            normalization: params.normalization,
        })
    }

    pub fn trees(&self) -> &[VoronoiNode] {
        &self.trees
    }

    pub fn psi(&self) -> usize {
        self.psi
    }

    pub fn branching(&self) -> usize {
        self.branching
    }

    pub fn metric(&self) -> Distance {
        self.metric
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    pub fn mean_path_length<R: Rows + ?Sized>(&self, p: &[f32], data: &R) -> f64 {
        let total: f64 = self.trees.iter().map(|t| path_length(p, t, data, self.metric)).sum();
        total / self.trees.len() as f64
    }

    /// Scores `queries` against a forest built on `data`.
    pub fn score_rows<R: Rows + ?Sized, Q: Rows + ?Sized>(&self, data: &R, queries: &Q) -> Vec<f64> {
        let kernel = Kernel::new(data, self.metric);
        self.score_with(&kernel, queries)
    }

    fn score_with<R: Rows + ?Sized, Q: Rows + ?Sized>(&self, kernel: &Kernel<'_, R>, queries: &Q) -> Vec<f64> {
        let norm = self.normalization.normalizer(self.psi, self.branching);
        let ids: Vec<usize> = (0..queries.n_rows()).collect();
        isolation::par_map(ids, |i| {
            let dense = queries.row(i);
            let sparse = kernel.supports.as_ref().and_then(|_| SparseVec::from_dense(dense));
            let q = sparse.as_ref().map_or(Query::Dense(dense), |s| Query::Sparse(s.as_row()));
            let total: f64 = self.trees.iter().map(|t| kernel.path_length(q, t)).sum();
            isolation::isolation_score(total / self.trees.len() as f64, norm)
        })
    }

    /// Scores of the rows the forest was built from.
    pub fn anomaly_scores<R: Rows + ?Sized>(&self, data: &R) -> Vec<f64> {
        self.score_rows(data, data)
    }

    pub fn depth_histogram(&self) -> DepthHistogram {
        let mut hist = DepthHistogram::default();
        self.trees.iter().for_each(|t| t.leaf_depths(&mut hist));
        hist
    }
}

/// Builds a forest and scores the rows it was built from.
pub fn voronoi_scores<R: Rows + ?Sized>(data: &R, params: &VoronoiParams, rng: &mut Rng) -> Result<Vec<f64>> {
    Ok(VoronoiForest::build(data, params, rng)?.anomaly_scores(data))
}
