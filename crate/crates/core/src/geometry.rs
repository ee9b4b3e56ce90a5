//! Parametric model families, minimal-sample fitting and residuals.

use alloc::vec::Vec;

use nalgebra::{Matrix2, Matrix3, SMatrix, Vector2, Vector3};
use rand::seq::index;

use crate::rng::Rng;
use crate::{Error, Result};

/// Determinant / singular-value ratio below which a minimal sample is rejected.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Label {
    Genuine,
    Anomaly,
}

impl Label {
    pub fn is_anomaly(self) -> bool {
        self == Label::Anomaly
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Label::Genuine => 0,
            Label::Anomaly => 1,
        }
    }
}

/// Points with ground-truth labels, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    dim: usize,
    coords: Vec<f64>,
    labels: Vec<Label>,
    structure: Option<Vec<i32>>,
    noise_sigma: f64,
}

impl LabeledDataset {
    pub fn new(
        dim: usize,
        coords: Vec<f64>,
        labels: Vec<Label>,
        structure: Option<Vec<i32>>,
        noise_sigma: f64,
    ) -> Result<Self> {
        if dim < 2 {
            return Err(Error::InvalidDataset("ambient dimension must be at least 2"));
        }
        if coords.len() != dim * labels.len() {
            return Err(Error::InvalidDataset("points and labels differ in length"));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidDataset("non-finite coordinate"));
        }
        if !(noise_sigma > 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidDataset("noise sigma must be positive"));
        }
        if let Some(ids) = &structure {
            if ids.len() != labels.len() {
                return Err(Error::InvalidDataset("structure ids differ in length"));
            }
            if ids.iter().zip(&labels).any(|(&s, l)| l.is_anomaly() && s != -1) {
                return Err(Error::InvalidDataset("anomalies must have structure id -1"));
            }
        }
        Ok(Self { dim, coords, labels, structure, noise_sigma })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn structure(&self) -> Option<&[i32]> {
        self.structure.as_deref()
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn with_noise_sigma(mut self, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidDataset("noise sigma must be positive"));
        }
        self.noise_sigma = sigma;
        Ok(self)
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_anomaly()).count()
    }

    /// Coordinates as `f32` rows, the representation the isolation forests consume.
    pub fn to_rows(&self) -> Vec<Vec<f32>> {
        self.points().map(|p| p.iter().map(|&c| c as f32).collect()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelFamily {
    Line2d,
    Circle2d,
    Plane3d,
    Sphere3d,
    Quadric3d,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::Line2d,
        ModelFamily::Circle2d,
        ModelFamily::Plane3d,
        ModelFamily::Sphere3d,
        ModelFamily::Quadric3d,
    ];

    pub fn min_sample_size(self) -> usize {
        match self {
            ModelFamily::Line2d => 2,
            ModelFamily::Circle2d | ModelFamily::Plane3d => 3,
            ModelFamily::Sphere3d => 4,
            ModelFamily::Quadric3d => 9,
        }
    }

    pub fn ambient_dim(self) -> usize {
        match self {
            ModelFamily::Line2d | ModelFamily::Circle2d => 2,
            _ => 3,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Line2d => "line2d",
            ModelFamily::Circle2d => "circle2d",
            ModelFamily::Plane3d => "plane3d",
            ModelFamily::Sphere3d => "sphere3d",
            ModelFamily::Quadric3d => "quadric3d",
        }
    }
}

/// A fitted model. Lines and planes keep a unit normal and offset
/// (`n·x = offset`), circles and spheres keep centre and radius, quadrics keep
/// the unit-norm coefficient vector of
/// `a x² + b y² + c z² + d xy + e xz + f yz + g x + h y + i z + j`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelInstance {
    Line2d { normal: [f64; 2], offset: f64 },
    Circle2d { center: [f64; 2], radius: f64 },
    Plane3d { normal: [f64; 3], offset: f64 },
    Sphere3d { center: [f64; 3], radius: f64 },
    Quadric3d { coeffs: [f64; 10] },
}

impl ModelInstance {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelInstance::Line2d { .. } => ModelFamily::Line2d,
            ModelInstance::Circle2d { .. } => ModelFamily::Circle2d,
            ModelInstance::Plane3d { .. } => ModelFamily::Plane3d,
            ModelInstance::Sphere3d { .. } => ModelFamily::Sphere3d,
            ModelInstance::Quadric3d { .. } => ModelFamily::Quadric3d,
        }
    }

    /// Flat parameter vector.
    pub fn theta(&self) -> Vec<f64> {
        match *self {
            ModelInstance::Line2d { normal, offset } => alloc::vec![normal[0], normal[1], offset],
            ModelInstance::Circle2d { center, radius } => alloc::vec![center[0], center[1], radius],
            ModelInstance::Plane3d { normal, offset } => {
                alloc::vec![normal[0], normal[1], normal[2], offset]
            }
            ModelInstance::Sphere3d { center, radius } => {
                alloc::vec![center[0], center[1], center[2], radius]
            }
            ModelInstance::Quadric3d { coeffs } => coeffs.to_vec(),
        }
    }

    /// Non-negative residual of `x`; zero exactly on the model manifold.
    pub fn residual(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.family().ambient_dim());
        match *self {
            ModelInstance::Line2d { normal, offset } => {
                libm::fabs(normal[0] * x[0] + normal[1] * x[1] - offset)
            }
            ModelInstance::Circle2d { center, radius } => {
                let dx = x[0] - center[0];
                let dy = x[1] - center[1];
                libm::fabs(libm::sqrt(dx * dx + dy * dy) - radius)
            }
            ModelInstance::Plane3d { normal, offset } => {
                libm::fabs(normal[0] * x[0] + normal[1] * x[1] + normal[2] * x[2] - offset)
            }
            ModelInstance::Sphere3d { center, radius } => {
                let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
                libm::fabs(libm::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) - radius)
            }
            ModelInstance::Quadric3d { coeffs: q } => {
                let (x, y, z) = (x[0], x[1], x[2]);
                let value = q[0] * x * x
                    + q[1] * y * y
                    + q[2] * z * z
                    + q[3] * x * y
                    + q[4] * x * z
                    + q[5] * y * z
                    + q[6] * x
                    + q[7] * y
                    + q[8] * z
                    + q[9];
                let gx = 2.0 * q[0] * x + q[3] * y + q[4] * z + q[6];
                let gy = 2.0 * q[1] * y + q[3] * x + q[5] * z + q[7];
                let gz = 2.0 * q[2] * z + q[4] * x + q[5] * y + q[8];
                let grad = libm::sqrt(gx * gx + gy * gy + gz * gz);
                if grad > f64::MIN_POSITIVE {
                    libm::fabs(value) / grad
                } else {
                    libm::fabs(value)
                }
            }
        }
    }
}

/// Free-function form of [`ModelInstance::residual`].
pub fn residual(model: &ModelInstance, x: &[f64]) -> f64 {
    model.residual(x)
}

/// Fits the unique model of `family` through a minimal sample.
pub fn fit_minimal(family: ModelFamily, sample: &[&[f64]]) -> Result<ModelInstance> {
    if sample.len() != family.min_sample_size() {
        return Err(Error::InvalidParameter("sample size differs from the family's minimal sample"));
    }
    let dim = family.ambient_dim();
    if let Some(p) = sample.iter().find(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch { expected: dim, got: p.len() });
    }
    let degenerate = Err(Error::DegenerateSample(family.name()));
    match family {
        ModelFamily::Line2d => {
            let a = Vector2::new(sample[0][0], sample[0][1]);
            let b = Vector2::new(sample[1][0], sample[1][1]);
            let dir = b - a;
            let len = dir.norm();
            if len < DEGENERACY_TOL {
                return degenerate;
            }
            let normal = Vector2::new(-dir.y, dir.x) / len;
            Ok(ModelInstance::Line2d { normal: [normal.x, normal.y], offset: normal.dot(&a) })
        }
        ModelFamily::Circle2d => {
            let p: [Vector2<f64>; 3] =
                core::array::from_fn(|i| Vector2::new(sample[i][0], sample[i][1]));
            let u = p[1] - p[0];
            let v = p[2] - p[0];
            let a = Matrix2::new(u.x, u.y, v.x, v.y) * 2.0;
            if libm::fabs(a.determinant()) < DEGENERACY_TOL {
                return degenerate;
            }
            let rhs = Vector2::new(
                p[1].norm_squared() - p[0].norm_squared(),
                p[2].norm_squared() - p[0].norm_squared(),
            );
            let center = a.lu().solve(&rhs).ok_or(Error::DegenerateSample(family.name()))?;
            let radius = (p[0] - center).norm();
            if !(radius > 0.0 && radius.is_finite()) {
                return degenerate;
            }
            Ok(ModelInstance::Circle2d { center: [center.x, center.y], radius })
        }
        ModelFamily::Plane3d => {
            let p: [Vector3<f64>; 3] = core::array::from_fn(|i| vec3(sample[i]));
            let n = (p[1] - p[0]).cross(&(p[2] - p[0]));
            let len = n.norm();
            if len < DEGENERACY_TOL {
                return degenerate;
            }
            let n = n / len;
            Ok(ModelInstance::Plane3d { normal: [n.x, n.y, n.z], offset: n.dot(&p[0]) })
        }
        ModelFamily::Sphere3d => {
            let p: [Vector3<f64>; 4] = core::array::from_fn(|i| vec3(sample[i]));
            let rows: [Vector3<f64>; 3] = core::array::from_fn(|i| (p[i + 1] - p[0]) * 2.0);
            let a = Matrix3::from_rows(&[rows[0].transpose(), rows[1].transpose(), rows[2].transpose()]);
            if libm::fabs(a.determinant()) < DEGENERACY_TOL {
                return degenerate;
            }
            let rhs = Vector3::from_fn(|i, _| p[i + 1].norm_squared() - p[0].norm_squared());
            let center = a.lu().solve(&rhs).ok_or(Error::DegenerateSample(family.name()))?;
            let radius = (p[0] - center).norm();
            if !(radius > 0.0 && radius.is_finite()) {
                return degenerate;
            }
            Ok(ModelInstance::Sphere3d { center: [center.x, center.y, center.z], radius })
        }
        ModelFamily::Quadric3d => {
            // Nine monomial rows padded with a zero row so the SVD exposes the
            // full right singular basis.
            let mut design = SMatrix::<f64, 10, 10>::zeros();
            for (r, s) in sample.iter().enumerate() {
                let (x, y, z) = (s[0], s[1], s[2]);
                let row = [x * x, y * y, z * z, x * y, x * z, y * z, x, y, z, 1.0];
                for (c, v) in row.iter().enumerate() {
                    design[(r, c)] = *v;
                }
            }
            let svd = design.svd(false, true);
            let v_t = svd.v_t.ok_or(Error::DegenerateSample(family.name()))?;
            let mut order: [usize; 10] = core::array::from_fn(|i| i);
            order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
            let largest = svd.singular_values[order[9]];
            let second = svd.singular_values[order[1]];
            if !(largest > 0.0) || second / largest < DEGENERACY_TOL {
                return degenerate;
            }
            let null = v_t.row(order[0]);
            let norm = null.norm();
            let coeffs: [f64; 10] = core::array::from_fn(|i| null[i] / norm);
            Ok(ModelInstance::Quadric3d { coeffs })
        }
    }
}

fn vec3(p: &[f64]) -> Vector3<f64> {
    Vector3::new(p[0], p[1], p[2])
}

/// RanSaC-style hypothesis pool: `m` models, each fitted on a uniformly drawn
/// minimal set (taken from `locality` when given). Degenerate draws are
/// retried; more than `100·m` failures in total abort with
/// [`Error::SamplingExhausted`].
pub fn sample_models(
    data: &LabeledDataset,
    family: ModelFamily,
    m: usize,
    rng: &mut Rng,
    locality: Option<&[usize]>,
) -> Result<Vec<ModelInstance>> {
    if data.dim() != family.ambient_dim() {
        return Err(Error::DimensionMismatch { expected: family.ambient_dim(), got: data.dim() });
    }
    let k = family.min_sample_size();
    let pool_len = locality.map_or(data.len(), <[usize]>::len);
    if pool_len < k {
        return Err(Error::InvalidParameter("fewer points than the minimal sample size"));
    }
    if let Some(ids) = locality {
        if ids.iter().any(|&i| i >= data.len()) {
            return Err(Error::InvalidParameter("locality index out of range"));
        }
    }
    let budget = 100 * m;
    let mut failures = 0usize;
    let mut models = Vec::with_capacity(m);
    let mut sample: Vec<&[f64]> = Vec::with_capacity(k);
    while models.len() < m {
        sample.clear();
        for i in index::sample(rng, pool_len, k) {
            let row = locality.map_or(i, |ids| ids[i]);
            sample.push(data.point(row));
        }
        match fit_minimal(family, &sample) {
            Ok(model) => models.push(model),
            Err(Error::DegenerateSample(_)) => {
                failures += 1;
                if failures > budget {
                    return Err(Error::SamplingExhausted { attempts: failures });
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(models)
}
