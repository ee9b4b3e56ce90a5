//! Scoring rules shared by every batch isolation forest in the crate.

use alloc::vec::Vec;

/// Euler–Mascheroni constant used by the harmonic-number approximation.
pub const EULER_GAMMA: f64 = 0.577_215_664_9;

/// Row access to a point set the forests are built on.
pub trait Rows: Sync {
    fn n_rows(&self) -> usize;
    fn row(&self, i: usize) -> &[f32];

    fn n_cols(&self) -> usize {
        if self.n_rows() == 0 {
            0
        } else {
            self.row(0).len()
        }
    }
}

impl Rows for [Vec<f32>] {
    fn n_rows(&self) -> usize {
        self.len()
    }

    fn row(&self, i: usize) -> &[f32] {
        &self[i]
    }
}

impl Rows for Vec<Vec<f32>> {
    fn n_rows(&self) -> usize {
        self.len()
    }

    fn row(&self, i: usize) -> &[f32] {
        &self[i]
    }
}

impl<R: Rows + ?Sized> Rows for &R {
    fn n_rows(&self) -> usize {
        (**self).n_rows()
    }

    fn row(&self, i: usize) -> &[f32] {
        (**self).row(i)
    }
}

/// Expected path length of an unsuccessful search in a binary search tree of
/// `n` nodes, the usual leaf-size correction.
pub fn adjustment_c(n: usize) -> f64 {
    match n {
        0 | 1 => 0.0,
        2 => 1.0,
        _ => {
            let n = n as f64;
            2.0 * (libm::log(n - 1.0) + EULER_GAMMA) - 2.0 * (n - 1.0) / n
        }
    }
}

/// Smallest `l` with `b^l ≥ psi`, i.e. `ceil(log_b psi)` without rounding error.
pub fn depth_limit(psi: usize, b: usize) -> usize {
    assert!(b >= 2, "branching factor must be at least 2");
    let mut level = 0;
    let mut reach = 1usize;
    while reach < psi {
        reach = reach.saturating_mul(b);
        level += 1;
    }
    level
}

/// How average depths are turned into scores.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Divide by `c(ψ)`.
    #[default]
    AverageDepth,
    /// Divide by `log_b ψ`, the depth of a balanced `b`-ary tree.
    LogBase,
}

impl Normalization {
    pub fn normalizer(self, psi: usize, b: usize) -> f64 {
        match self {
            Normalization::AverageDepth => adjustment_c(psi),
            Normalization::LogBase => {
                if psi <= 1 {
                    0.0
                } else {
                    libm::log(psi as f64) / libm::log(b as f64)
                }
            }
        }
    }
}

/// `2^(−mean_depth / normalizer)`; a zero normalizer (one-point subsample)
/// yields 1.
pub fn isolation_score(mean_depth: f64, normalizer: f64) -> f64 {
    if normalizer > 0.0 {
        libm::exp2(-mean_depth / normalizer)
    } else {
        1.0
    }
}

/// Maps `f` over `items`, in parallel when the `rayon` feature is on. Output
/// order always follows input order.
pub(crate) fn par_map<I, T, F>(items: Vec<I>, f: F) -> Vec<T>
where
    I: Send,
    T: Send,
    F: Fn(I) -> T + Sync + Send,
{
    #[cfg(feature = "rayon")]
    {
        use rayon::prelude::*;
        items.into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "rayon"))]
    {
        items.into_iter().map(f).collect()
    }
}

/// Per-depth leaf counts accumulated over a forest.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DepthHistogram(pub Vec<usize>);

impl DepthHistogram {
    pub fn record(&mut self, depth: usize) {
        if self.0.len() <= depth {
            self.0.resize(depth + 1, 0);
        }
        self.0[depth] += 1;
    }

    pub fn merge(&mut self, other: &DepthHistogram) {
        for (d, &c) in other.0.iter().enumerate() {
            if c > 0 {
                if self.0.len() <= d {
                    self.0.resize(d + 1, 0);
                }
                self.0[d] += c;
            }
        }
    }

    pub fn max_depth(&self) -> Option<usize> {
        self.0.iter().rposition(|&c| c > 0)
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }
}
