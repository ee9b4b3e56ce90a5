//! Preference Embedding and the preference-space distances.

use alloc::vec::Vec;
use core::sync::atomic::{AtomicUsize, Ordering};

use crate::geometry::{LabeledDataset, ModelInstance};
use crate::isolation::Rows;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreferenceMode {
    Continuous,
    Binary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreferenceConfig {
    sigma: f64,
    k_multiplier: f64,
    mode: PreferenceMode,
}

impl PreferenceConfig {
    pub fn new(sigma: f64, k_multiplier: f64, mode: PreferenceMode) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidParameter("sigma must be positive"));
        }
        if !(k_multiplier > 0.0 && k_multiplier.is_finite()) {
            return Err(Error::InvalidParameter("k multiplier must be positive"));
        }
        Ok(Self { sigma, k_multiplier, mode })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn k_multiplier(&self) -> f64 {
        self.k_multiplier
    }

    pub fn mode(&self) -> PreferenceMode {
        self.mode
    }

    /// Inlier threshold `k·σ`.
    pub fn epsilon(&self) -> f64 {
        self.k_multiplier * self.sigma
    }
}

/// Preference of a point with residual `delta` towards one model.
pub fn preference_value(delta: f64, config: &PreferenceConfig) -> f64 {
    let delta = libm::fabs(delta);
    if delta > config.epsilon() {
        return 0.0;
    }
    match config.mode {
        PreferenceMode::Binary => 1.0,
        PreferenceMode::Continuous => {
            libm::exp(-(delta * delta) / (2.0 * config.sigma * config.sigma))
        }
    }
}

static MATRIX_BYTES_LIVE: AtomicUsize = AtomicUsize::new(0);
static MATRIX_BYTES_PEAK: AtomicUsize = AtomicUsize::new(0);
static DISTANCE_EVALS: AtomicUsize = AtomicUsize::new(0);

/// Bytes currently held by live [`PreferenceMatrix`] values.
pub fn matrix_bytes_live() -> usize {
    MATRIX_BYTES_LIVE.load(Ordering::Relaxed)
}

/// High-water mark of [`matrix_bytes_live`] since the last reset.
pub fn matrix_bytes_peak() -> usize {
    MATRIX_BYTES_PEAK.load(Ordering::Relaxed)
}

pub fn reset_matrix_peak() {
    MATRIX_BYTES_PEAK.store(matrix_bytes_live(), Ordering::Relaxed);
}

/// Number of preference/ambient distance evaluations performed so far.
pub fn distance_evaluations() -> usize {
    DISTANCE_EVALS.load(Ordering::Relaxed)
}

fn track_alloc(bytes: usize) {
    let live = MATRIX_BYTES_LIVE.fetch_add(bytes, Ordering::Relaxed) + bytes;
    MATRIX_BYTES_PEAK.fetch_max(live, Ordering::Relaxed);
}

/// Dense `n × m` matrix of preferences stored as 32-bit floats.
#[derive(Debug, PartialEq)]
pub struct PreferenceMatrix {
    rows: usize,
    cols: usize,
    values: Vec<f32>,
}

impl PreferenceMatrix {
    pub fn from_values(rows: usize, cols: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::LengthMismatch { left: values.len(), right: rows * cols });
        }
        if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("preferences must lie in [0, 1]"));
        }
        track_alloc(values.len() * core::mem::size_of::<f32>());
        Ok(Self { rows, cols, values })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn byte_size(&self) -> usize {
        self.values.len() * core::mem::size_of::<f32>()
    }
}

impl Clone for PreferenceMatrix {
    fn clone(&self) -> Self {
        track_alloc(self.byte_size());
        Self { rows: self.rows, cols: self.cols, values: self.values.clone() }
    }
}

impl Drop for PreferenceMatrix {
    fn drop(&mut self) {
        MATRIX_BYTES_LIVE.fetch_sub(self.byte_size(), Ordering::Relaxed);
    }
}

impl Rows for PreferenceMatrix {
    fn n_rows(&self) -> usize {
        self.rows
    }

    fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.cols..(i + 1) * self.cols]
    }
}

/// Maps every point to its preference vector over `models`.
pub fn embed(
    data: &LabeledDataset,
    models: &[ModelInstance],
    config: &PreferenceConfig,
) -> Result<PreferenceMatrix> {
    embed_rows(data, None, models, config)
}

/// [`embed`] restricted to the listed rows of `data`, in that order.
pub fn embed_rows(
    data: &LabeledDataset,
    subset: Option<&[usize]>,
    models: &[ModelInstance],
    config: &PreferenceConfig,
) -> Result<PreferenceMatrix> {
    if let Some(first) = models.first() {
        let family = first.family();
        if models.iter().any(|m| m.family() != family) {
            return Err(Error::InvalidParameter("models must share one family"));
        }
        if family.ambient_dim() != data.dim() {
            return Err(Error::DimensionMismatch { expected: family.ambient_dim(), got: data.dim() });
        }
    }
    let n = subset.map_or(data.len(), <[usize]>::len);
    let mut values = Vec::with_capacity(n * models.len());
    let mut push_row = |x: &[f64]| {
        values.extend(models.iter().map(|m| preference_value(m.residual(x), config) as f32));
    };
    match subset {
        Some(ids) => ids.iter().for_each(|&i| push_row(data.point(i))),
        None => data.points().for_each(push_row),
    }
    PreferenceMatrix::from_values(n, models.len(), values)
}

/// Distances available to the Voronoi forest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Distance {
    Jaccard,
    Ruzicka,
    Tanimoto,
    Euclidean,
}

impl Distance {
    pub fn name(self) -> &'static str {
        match self {
            Distance::Jaccard => "jaccard",
            Distance::Ruzicka => "ruzicka",
            Distance::Tanimoto => "tanimoto",
            Distance::Euclidean => "euclidean",
        }
    }

    /// Unchecked evaluation; both slices must have the same length.
    #[inline]
    pub fn eval(self, p: &[f32], q: &[f32]) -> f64 {
        debug_assert_eq!(p.len(), q.len());
        match self {
            Distance::Jaccard => jaccard_kernel(p, q),
            Distance::Ruzicka => ruzicka_kernel(p, q),
            Distance::Tanimoto => tanimoto_kernel(p, q),
            Distance::Euclidean => euclidean_kernel(p, q),
        }
    }
}

fn check_len(p: &[f32], q: &[f32]) -> Result<()> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    Ok(())
}

/// Jaccard distance between binary preference vectors; nonzero entries count
/// as set members.
pub fn jaccard(p: &[f32], q: &[f32]) -> Result<f64> {
    check_len(p, q)?;
    Ok(jaccard_kernel(p, q))
}

/// Ruzicka (generalized Jaccard) distance.
pub fn ruzicka(p: &[f32], q: &[f32]) -> Result<f64> {
    check_len(p, q)?;
    Ok(ruzicka_kernel(p, q))
}

/// Tanimoto distance.
pub fn tanimoto(p: &[f32], q: &[f32]) -> Result<f64> {
    check_len(p, q)?;
    Ok(tanimoto_kernel(p, q))
}

/// `1 − num/den`, with `0/0` read as identical all-zero vectors.
#[inline]
fn one_minus_ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        1.0 - num / den
    } else {
        0.0
    }
}

const LANES: usize = 8;

#[inline]
fn lanes2(p: &[f32], q: &[f32], f: impl Fn(f64, f64) -> (f64, f64)) -> (f64, f64) {
    let mut a = [0.0f64; LANES];
    let mut b = [0.0f64; LANES];
    let pc = p.chunks_exact(LANES);
    let qc = q.chunks_exact(LANES);
    let (pr, qr) = (pc.remainder(), qc.remainder());
    for (pp, qq) in pc.zip(qc) {
        for l in 0..LANES {
            let (x, y) = f(pp[l] as f64, qq[l] as f64);
            a[l] += x;
            b[l] += y;
        }
    }
    let (mut sa, mut sb) = (a.iter().sum::<f64>(), b.iter().sum::<f64>());
    for (&x, &y) in pr.iter().zip(qr) {
        let (u, v) = f(x as f64, y as f64);
        sa += u;
        sb += v;
    }
    (sa, sb)
}

fn jaccard_kernel(p: &[f32], q: &[f32]) -> f64 {
    DISTANCE_EVALS.fetch_add(1, Ordering::Relaxed);
    let (inter, union) = lanes2(p, q, |x, y| {
        let (a, b) = (x > 0.0, y > 0.0);
        (f64::from(u8::from(a && b)), f64::from(u8::from(a || b)))
    });
    one_minus_ratio(inter, union)
}

fn ruzicka_kernel(p: &[f32], q: &[f32]) -> f64 {
    DISTANCE_EVALS.fetch_add(1, Ordering::Relaxed);
    let (lo, hi) = lanes2(p, q, |x, y| if x < y { (x, y) } else { (y, x) });
    one_minus_ratio(lo, hi)
}

fn tanimoto_kernel(p: &[f32], q: &[f32]) -> f64 {
    DISTANCE_EVALS.fetch_add(1, Ordering::Relaxed);
    let (dot, diff) = lanes2(p, q, |x, y| (x * y, (x - y) * (x - y)));
    // ‖p‖² + ‖q‖² − ⟨p,q⟩ = ‖p − q‖² + ⟨p,q⟩
    one_minus_ratio(dot, diff + dot)
}

fn euclidean_kernel(p: &[f32], q: &[f32]) -> f64 {
    DISTANCE_EVALS.fetch_add(1, Ordering::Relaxed);
    let (sq, _) = lanes2(p, q, |x, y| ((x - y) * (x - y), 0.0));
    libm::sqrt(sq)
}

/// Support size, sum and squared norm of one nonnegative row.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub(crate) struct RowStats {
    count: f64,
    sum: f64,
    sq: f64,
}

impl RowStats {
    fn of(val: &[f32]) -> Self {
        let mut st = RowStats { count: val.len() as f64, ..RowStats::default() };
        for &v in val {
            let v = v as f64;
            st.sum += v;
            st.sq += v * v;
        }
        st
    }
}

/// Nonzero entries of a nonnegative row.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SparseRow<'a> {
    idx: &'a [u32],
    val: &'a [f32],
    stats: RowStats,
}

impl<'a> SparseRow<'a> {
    pub(crate) fn indices(&self) -> &'a [u32] {
        self.idx
    }

    pub(crate) fn values(&self) -> &'a [f32] {
        self.val
    }
}

/// Owned [`SparseRow`].
#[derive(Debug, Clone, Default)]
pub(crate) struct SparseVec {
    idx: Vec<u32>,
    val: Vec<f32>,
    stats: RowStats,
}

impl SparseVec {
    /// `None` when `row` has a negative entry.
    pub(crate) fn from_dense(row: &[f32]) -> Option<Self> {
        let mut out = SparseVec::default();
        for (j, &v) in row.iter().enumerate() {
            if v < 0.0 || v.is_nan() {
                return None;
            }
            if v > 0.0 {
                out.idx.push(j as u32);
                out.val.push(v);
            }
        }
        out.stats = RowStats::of(&out.val);
        Some(out)
    }

    pub(crate) fn as_row(&self) -> SparseRow<'_> {
        SparseRow { idx: &self.idx, val: &self.val, stats: self.stats }
    }
}

/// Compressed rows of a mostly-zero nonnegative point set. Counted by
/// [`matrix_bytes_live`] like the dense matrix.
#[derive(Debug)]
pub(crate) struct Supports {
    offsets: Vec<usize>,
    idx: Vec<u32>,
    val: Vec<f32>,
    stats: Vec<RowStats>,
}

impl Supports {
    /// Densest support fraction for which the sparse kernels pay off.
    const MAX_DENSITY: f64 = 0.25;

    /// `None` unless every entry is nonnegative and the rows are sparse enough.
    pub(crate) fn build<R: Rows + ?Sized>(rows: &R) -> Option<Self> {
        let (n, m) = (rows.n_rows(), rows.n_cols());
        let budget = (Self::MAX_DENSITY * (n * m) as f64) as usize;
        let (mut offsets, mut idx, mut val) = (alloc::vec![0], Vec::new(), Vec::new());
        let mut stats = Vec::with_capacity(n);
        for i in 0..n {
            let start = idx.len();
            for (j, &v) in rows.row(i).iter().enumerate() {
                if v < 0.0 || v.is_nan() {
                    return None;
                }
                if v > 0.0 {
                    idx.push(j as u32);
                    val.push(v);
                }
            }
            if idx.len() > budget {
                return None;
            }
            offsets.push(idx.len());
            stats.push(RowStats::of(&val[start..]));
        }
        let out = Supports { offsets, idx, val, stats };
        track_alloc(out.byte_size());
        Some(out)
    }

    fn byte_size(&self) -> usize {
        use core::mem::size_of;
        self.offsets.len() * size_of::<usize>()
            + self.idx.len() * size_of::<u32>()
            + self.val.len() * size_of::<f32>()
            + self.stats.len() * size_of::<RowStats>()
    }

    pub(crate) fn row(&self, i: usize) -> SparseRow<'_> {
        let (a, b) = (self.offsets[i], self.offsets[i + 1]);
        SparseRow { idx: &self.idx[a..b], val: &self.val[a..b], stats: self.stats[i] }
    }

    pub(crate) fn stats(&self, i: usize) -> RowStats {
        self.stats[i]
    }
}

impl Drop for Supports {
    fn drop(&mut self) {
        MATRIX_BYTES_LIVE.fetch_sub(self.byte_size(), Ordering::Relaxed);
    }
}

impl Distance {
    /// Whether [`Distance::eval_sparse`] applies.
    pub(crate) fn has_sparse_kernel(self) -> bool {
        !matches!(self, Distance::Euclidean)
    }

    /// Same value as [`Distance::eval`] up to rounding, touching only the
    /// support of `p`; `q_stats` must describe `q`.
    #[inline]
    pub(crate) fn eval_sparse(self, p: SparseRow<'_>, q: &[f32], q_stats: RowStats) -> f64 {
        DISTANCE_EVALS.fetch_add(1, Ordering::Relaxed);
        let (ps, qs) = (p.stats, q_stats);
        match self {
            Distance::Jaccard => {
                let inter = p.idx.iter().filter(|&&j| q[j as usize] > 0.0).count() as f64;
                one_minus_ratio(inter, ps.count + qs.count - inter)
            }
            Distance::Ruzicka => {
                let lo: f64 = p.idx.iter().zip(p.val).map(|(&j, &v)| v.min(q[j as usize]) as f64).sum();
                one_minus_ratio(lo, ps.sum + qs.sum - lo)
            }
            Distance::Tanimoto => {
                let dot: f64 = p.idx.iter().zip(p.val).map(|(&j, &v)| v as f64 * q[j as usize] as f64).sum();
                one_minus_ratio(dot, ps.sq + qs.sq - dot)
            }
            Distance::Euclidean => {
                let mut sq = qs.sq;
                for (&j, &v) in p.idx.iter().zip(p.val) {
                    let (x, y) = (v as f64, q[j as usize] as f64);
                    sq += (x - y) * (x - y) - y * y;
                }
                libm::sqrt(sq.max(0.0))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{fit_minimal, Label, ModelFamily};

    fn cfg(sigma: f64, k: f64, mode: PreferenceMode) -> PreferenceConfig {
        PreferenceConfig::new(sigma, k, mode).unwrap()
    }

    #[test]
    fn preference_function() {
        let c = cfg(0.1, 3.0, PreferenceMode::Continuous);
        let b = cfg(0.1, 3.0, PreferenceMode::Binary);
        assert_eq!(preference_value(0.0, &c), 1.0);
        assert_eq!(preference_value(0.0, &b), 1.0);
        assert_eq!(preference_value(0.2, &cfg(0.1, 1.0, PreferenceMode::Continuous)), 0.0);
        assert!((preference_value(0.1, &c) - 0.606_530_66).abs() < 1e-8);
        assert_eq!(preference_value(0.1, &b), 1.0);
        assert!(PreferenceConfig::new(0.0, 1.0, PreferenceMode::Binary).is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(jaccard(&[1.0, 0.0, 1.0], &[1.0, 0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(jaccard(&[1.0, 0.0], &[0.0, 1.0]).unwrap(), 1.0);
        assert!((jaccard(&[1.0, 0.0, 1.0], &[1.0, 1.0, 0.0]).unwrap() - 2.0 / 3.0).abs() < 1e-12);

        assert_eq!(ruzicka(&[0.3, 0.7], &[0.3, 0.7]).unwrap(), 0.0);
        assert_eq!(ruzicka(&[0.3, 0.0], &[0.0, 0.9]).unwrap(), 1.0);
        assert!((ruzicka(&[0.2, 0.8], &[0.4, 0.4]).unwrap() - 0.5).abs() < 1e-7);

        assert_eq!(tanimoto(&[0.5, 0.25], &[0.5, 0.25]).unwrap(), 0.0);
        assert_eq!(tanimoto(&[1.0, 0.0], &[0.0, 0.4]).unwrap(), 1.0);
        assert!((tanimoto(&[1.0, 0.0], &[0.5, 0.0]).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_vector_conventions() {
        let z = [0.0f32; 4];
        let nz = [0.0f32, 0.5, 0.0, 0.0];
        for d in [jaccard, ruzicka, tanimoto] {
            assert_eq!(d(&z, &z).unwrap(), 0.0);
            assert_eq!(d(&z, &nz).unwrap(), 1.0);
        }
    }

    #[test]
    fn length_mismatch() {
        for d in [jaccard, ruzicka, tanimoto] {
            assert_eq!(d(&[1.0], &[1.0, 0.0]), Err(Error::LengthMismatch { left: 1, right: 2 }));
        }
    }

    #[test]
    fn sparse_kernels_match_dense() {
        let p = [0.0f32, 0.5, 0.0, 1.0, 0.25, 0.0, 0.0, 0.75, 0.0, 0.125];
        let q = [0.3f32, 0.5, 0.0, 0.0, 0.9, 0.0, 0.1, 0.75, 0.0, 0.0];
        let (sp, sq) = (SparseVec::from_dense(&p).unwrap(), SparseVec::from_dense(&q).unwrap());
        for d in [Distance::Jaccard, Distance::Ruzicka, Distance::Tanimoto, Distance::Euclidean] {
            for (a, b, sb) in [(&sp, &q, &sq), (&sq, &p, &sp), (&sp, &p, &sp)] {
                let dense = d.eval(&a.idx.iter().fold(alloc::vec![0.0; 10], |mut v, &j| {
                    v[j as usize] = a.val[a.idx.iter().position(|&k| k == j).unwrap()];
                    v
                }), b);
                assert!((d.eval_sparse(a.as_row(), b, sb.stats) - dense).abs() < 1e-12, "{d:?}");
            }
            if d.has_sparse_kernel() {
                assert_eq!(d.eval_sparse(sp.as_row(), &p, sp.stats), 0.0);
            }
        }
        assert!(SparseVec::from_dense(&[0.5, -0.1]).is_none());
        let rows = alloc::vec![p.to_vec(), q.to_vec()];
        let sup = Supports::build(&rows);
        assert!(sup.is_none(), "denser than the cutoff");
        let mut wide = alloc::vec![alloc::vec![0.0f32; 40]; 2];
        wide[0][3] = 0.5;
        wide[1][3] = 1.0;
        wide[1][9] = 0.5;
        let sup = Supports::build(&wide).unwrap();
        assert!((Distance::Tanimoto.eval_sparse(sup.row(0), &wide[1], sup.stats(1)) - tanimoto(&wide[0], &wide[1]).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn binary_reduction_is_exact() {
        let p = [1.0f32, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let q = [1.0f32, 1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let j = jaccard(&p, &q).unwrap();
        assert_eq!(j, ruzicka(&p, &q).unwrap());
        assert_eq!(j, tanimoto(&p, &q).unwrap());
    }

    fn toy() -> (LabeledDataset, Vec<ModelInstance>) {
        // Two points on y = 0, one far from both models.
        let data = LabeledDataset::new(
            2,
            alloc::vec![0.1, 0.0, 0.4, 0.0, 0.5, 0.8],
            alloc::vec![Label::Genuine, Label::Genuine, Label::Anomaly],
            None,
            0.01,
        )
        .unwrap();
        let models = alloc::vec![
            fit_minimal(ModelFamily::Line2d, &[&[0.0, 0.0], &[1.0, 0.0]]).unwrap(),
            fit_minimal(ModelFamily::Line2d, &[&[0.0, 0.0], &[1.0, 0.01]]).unwrap(),
        ];
        (data, models)
    }

    #[test]
    fn embed_toy_instance() {
        let (data, models) = toy();
        let conf = cfg(0.01, 3.0, PreferenceMode::Continuous);
        let p = embed(&data, &models, &conf).unwrap();
        assert_eq!((p.rows(), p.cols()), (3, 2));
        assert_eq!(p.row(0)[0], 1.0);
        assert_eq!(p.row(2), &[0.0, 0.0]);
        // Brute-force the three pairwise Tanimoto distances.
        let d01 = tanimoto(p.row(0), p.row(1)).unwrap();
        let d02 = tanimoto(p.row(0), p.row(2)).unwrap();
        let d12 = tanimoto(p.row(1), p.row(2)).unwrap();
        assert!(d01 < d02 && d01 < d12);
        assert_eq!(d02, 1.0);
    }

    #[test]
    fn embed_rows_matches_full_embedding() {
        let (data, models) = toy();
        let conf = cfg(0.01, 3.0, PreferenceMode::Binary);
        let full = embed(&data, &models, &conf).unwrap();
        let sub = embed_rows(&data, Some(&[2, 0]), &models, &conf).unwrap();
        assert_eq!(sub.row(0), full.row(2));
        assert_eq!(sub.row(1), full.row(0));
        assert!(full.values().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn matrix_rejects_out_of_range() {
        assert!(PreferenceMatrix::from_values(1, 2, alloc::vec![0.5, 1.5]).is_err());
        assert!(PreferenceMatrix::from_values(1, 2, alloc::vec![0.5]).is_err());
    }
}
