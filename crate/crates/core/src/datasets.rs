//! Seeded synthetic benchmarks: 2D structure datasets, range images of smooth
//! surfaces with an optional pit, and labelled Gaussian-mixture streams.
//!
//! The 2D geometry lives on the square `[0, S]²` with `S = CANVAS`:
//!
//! - `stairK`: `K` segments of length `L = S/⌈K/2⌉` starting at the origin,
//!   alternating rightward and upward.
//! - `starK`: `K` segments of length `S` through the centre at angles `π·i/K`.
//! - `circleK`: `K` circles of radius `S/4` whose centres sit on the circle of
//!   radius `S/4` around the centre.
//!
//! Each structure contributes 50 points, except `stair3` and `circle3`,
//! which use 70, 50 and 30. Anomalies are as many as the genuine points and
//! uniform over the genuine bounding box.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;
use core::str::FromStr;

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::geometry::{Label, LabeledDataset};
use crate::rng::{self, streams, Rng};
use crate::sliding::RangeImage;
use crate::{Error, Result};

/// Side of the square holding the 2D structures.
pub const CANVAS: f64 = 5.0;

/// Noise level of the 2D generators.
pub const PRIMITIVE_SIGMA: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PrimitiveKind {
    Stair3,
    Stair4,
    Star5,
    Star11,
    Circle3,
    Circle4,
    Circle5,
}

impl PrimitiveKind {
    pub const ALL: [PrimitiveKind; 7] = [
        PrimitiveKind::Stair3,
        PrimitiveKind::Stair4,
        PrimitiveKind::Star5,
        PrimitiveKind::Star11,
        PrimitiveKind::Circle3,
        PrimitiveKind::Circle4,
        PrimitiveKind::Circle5,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PrimitiveKind::Stair3 => "stair3",
            PrimitiveKind::Stair4 => "stair4",
            PrimitiveKind::Star5 => "star5",
            PrimitiveKind::Star11 => "star11",
            PrimitiveKind::Circle3 => "circle3",
            PrimitiveKind::Circle4 => "circle4",
            PrimitiveKind::Circle5 => "circle5",
        }
    }

    /// Number of structures.
    pub fn structures(self) -> usize {
        match self {
            PrimitiveKind::Stair3 | PrimitiveKind::Circle3 => 3,
            PrimitiveKind::Stair4 | PrimitiveKind::Circle4 => 4,
            PrimitiveKind::Star5 | PrimitiveKind::Circle5 => 5,
            PrimitiveKind::Star11 => 11,
        }
    }

    pub fn is_circular(self) -> bool {
        matches!(self, PrimitiveKind::Circle3 | PrimitiveKind::Circle4 | PrimitiveKind::Circle5)
    }

    pub fn structure_sizes(self) -> Vec<usize> {
        match self {
            PrimitiveKind::Stair3 | PrimitiveKind::Circle3 => alloc::vec![70, 50, 30],
            k => alloc::vec![50; k.structures()],
        }
    }
}

impl fmt::Display for PrimitiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PrimitiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PrimitiveKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or(Error::InvalidParameter("unknown dataset kind"))
    }
}

enum Shape {
    Segment { from: [f64; 2], to: [f64; 2] },
    Circle { center: [f64; 2], radius: f64 },
}

impl Shape {
    fn sample(&self, rng: &mut Rng) -> [f64; 2] {
        let t: f64 = rng.random();
        match self {
            Shape::Segment { from, to } => [from[0] + t * (to[0] - from[0]), from[1] + t * (to[1] - from[1])],
            Shape::Circle { center, radius } => {
                let a = 2.0 * PI * t;
                [center[0] + radius * libm::cos(a), center[1] + radius * libm::sin(a)]
            }
        }
    }
}

fn shapes(kind: PrimitiveKind) -> Vec<Shape> {
    let k = kind.structures();
    let mid = 0.5 * CANVAS;
    match kind {
        PrimitiveKind::Stair3 | PrimitiveKind::Stair4 => {
            let len = CANVAS / k.div_ceil(2) as f64;
            let mut at = [0.0, 0.0];
            (0..k)
                .map(|i| {
                    let to = if i % 2 == 0 { [at[0] + len, at[1]] } else { [at[0], at[1] + len] };
                    let s = Shape::Segment { from: at, to };
                    at = to;
                    s
                })
                .collect()
        }
        PrimitiveKind::Star5 | PrimitiveKind::Star11 => (0..k)
            .map(|i| {
                let a = PI * i as f64 / k as f64;
                let (dx, dy) = (mid * libm::cos(a), mid * libm::sin(a));
                Shape::Segment { from: [mid - dx, mid - dy], to: [mid + dx, mid + dy] }
            })
            .collect(),
        _ => (0..k)
            .map(|i| {
                let a = 2.0 * PI * i as f64 / k as f64;
                let r = 0.25 * CANVAS;
                Shape::Circle { center: [mid + r * libm::cos(a), mid + r * libm::sin(a)], radius: r }
            })
            .collect(),
    }
}

/// One of the seven 2D structure datasets; genuine points come first.
pub fn generate_primitive_2d(kind: PrimitiveKind, seed: u64) -> LabeledDataset {
    generate_primitive_2d_scaled(kind, 1, seed)
}

/// [`generate_primitive_2d`] with every structure `factor` times larger.
pub fn generate_primitive_2d_scaled(kind: PrimitiveKind, factor: usize, seed: u64) -> LabeledDataset {
    let mut rng = rng::stream(seed, streams::NOISE);
    let noise = Normal::new(0.0, PRIMITIVE_SIGMA).expect("positive sigma");
    let mut coords = Vec::new();
    let mut structure = Vec::new();
    for (id, (shape, count)) in shapes(kind).iter().zip(kind.structure_sizes()).enumerate() {
        for _ in 0..count * factor {
            let p = shape.sample(&mut rng);
            coords.push(p[0] + noise.sample(&mut rng));
            coords.push(p[1] + noise.sample(&mut rng));
            structure.push(id as i32);
        }
    }
    let genuine = structure.len();
    let (lo, hi) = bbox(&coords, 2);
    let mut arng = rng::stream(seed, streams::ANOMALIES);
    for _ in 0..genuine {
        for j in 0..2 {
            coords.push(lo[j] + (hi[j] - lo[j]) * arng.random::<f64>());
        }
        structure.push(-1);
    }
    let mut labels = alloc::vec![Label::Genuine; genuine];
    labels.resize(2 * genuine, Label::Anomaly);
    LabeledDataset::new(2, coords, labels, Some(structure), PRIMITIVE_SIGMA).expect("generator output is valid")
}

fn bbox(coords: &[f64], d: usize) -> (Vec<f64>, Vec<f64>) {
    let mut lo = alloc::vec![f64::INFINITY; d];
    let mut hi = alloc::vec![f64::NEG_INFINITY; d];
    for row in coords.chunks_exact(d) {
        for j in 0..d {
            lo[j] = lo[j].min(row[j]);
            hi[j] = hi[j].max(row[j]);
        }
    }
    (lo, hi)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SurfaceShape {
    Plane,
    Paraboloid,
    SphereCap,
}

impl SurfaceShape {
    pub fn name(self) -> &'static str {
        match self {
            SurfaceShape::Plane => "plane",
            SurfaceShape::Paraboloid => "paraboloid",
            SurfaceShape::SphereCap => "sphere_cap",
        }
    }

    /// Height over the unit square.
    pub fn height(self, x: f64, y: f64) -> f64 {
        let (u, v) = (x - 0.5, y - 0.5);
        match self {
            SurfaceShape::Plane => 0.2 * x + 0.1 * y,
            SurfaceShape::Paraboloid => 2.0 * (u * u + v * v),
            SurfaceShape::SphereCap => libm::sqrt(1.0 - u * u - v * v) - 1.0,
        }
    }
}

impl FromStr for SurfaceShape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plane" => Ok(SurfaceShape::Plane),
            "paraboloid" => Ok(SurfaceShape::Paraboloid),
            "sphere_cap" | "sphere-cap" => Ok(SurfaceShape::SphereCap),
            _ => Err(Error::InvalidParameter("unknown surface shape")),
        }
    }
}

/// A flat-bottomed pit: pixels within `radius_px` of `center` (row, col) are
/// lowered by `depth_sigmas·σ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Defect {
    pub center: (f64, f64),
    pub radius_px: f64,
    pub depth_sigmas: f64,
}

/// A `side × side` range image of `shape` with Gaussian height noise `sigma`.
/// Pixel `(r, c)` sits at `x = (c + 0.5)/side`, `y = (r + 0.5)/side`.
pub fn generate_surface_grid(
    shape: SurfaceShape,
    side: usize,
    sigma: f64,
    defect: Option<Defect>,
    seed: u64,
) -> Result<RangeImage> {
    if side < 16 {
        return Err(Error::InvalidParameter("surface side must be at least 16 pixels"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter("surface noise must be nonnegative"));
    }
    let noise = Normal::new(0.0, sigma).map_err(|_| Error::InvalidParameter("surface noise must be nonnegative"))?;
    let mut rng = rng::stream(seed, streams::NOISE);
    let mut xyz = Vec::with_capacity(side * side * 3);
    let mut gt = alloc::vec![false; side * side];
    for r in 0..side {
        for c in 0..side {
            let x = (c as f64 + 0.5) / side as f64;
            let y = (r as f64 + 0.5) / side as f64;
            let mut z = shape.height(x, y) + noise.sample(&mut rng);
            if let Some(d) = &defect {
                let (dr, dc) = (r as f64 - d.center.0, c as f64 - d.center.1);
                if dr * dr + dc * dc <= d.radius_px * d.radius_px {
                    z -= d.depth_sigmas * sigma;
                    gt[r * side + c] = true;
                }
            }
            xyz.extend_from_slice(&[x as f32, y as f32, z as f32]);
        }
    }
    RangeImage::new(side, side, xyz, alloc::vec![true; side * side], Some(gt))
}

/// Gaussian component of a stream: isotropic with standard deviation `scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    pub mean: Vec<f64>,
    pub scale: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamSpec {
    pub n: usize,
    pub d: usize,
    pub clusters: Vec<Cluster>,
    pub anomaly_rate: f64,
    /// `(index, clusters)`: from `index` on, points come from `clusters`.
    pub drift: Vec<(usize, Vec<Cluster>)>,
}

impl StreamSpec {
    /// Two unit-variance Gaussians centred at `±3` on every axis.
    pub fn two_gaussians(n: usize, d: usize, anomaly_rate: f64) -> Self {
        let cluster = |c: f64| Cluster { mean: alloc::vec![c; d], scale: 1.0, weight: 0.5 };
        Self { n, d, clusters: alloc::vec![cluster(-3.0), cluster(3.0)], anomaly_rate, drift: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidParameter("stream dimension must be at least 2"));
        }
        if !(0.0..0.5).contains(&self.anomaly_rate) {
            return Err(Error::InvalidParameter("anomaly rate must lie in [0, 0.5)"));
        }
        let check = |set: &[Cluster]| -> Result<()> {
            if set.is_empty() {
                return Err(Error::InvalidParameter("stream needs at least one cluster"));
            }
            if set.iter().any(|c| c.mean.len() != self.d || !(c.scale > 0.0) || !(c.weight >= 0.0)) {
                return Err(Error::InvalidParameter("cluster mean, scale or weight is invalid"));
            }
            let total: f64 = set.iter().map(|c| c.weight).sum();
            if (total - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidParameter("cluster weights must sum to 1"));
            }
            Ok(())
        };
        check(&self.clusters)?;
        for (at, set) in &self.drift {
            if *at > self.n {
                return Err(Error::InvalidParameter("drift index beyond the stream"));
            }
            check(set)?;
        }
        if self.drift.windows(2).any(|w| w[0].0 > w[1].0) {
            return Err(Error::InvalidParameter("drift events must be ordered"));
        }
        Ok(())
    }

    /// Number of anomalies, `round(n·rate)`.
    pub fn anomaly_count(&self) -> usize {
        libm::round(self.n as f64 * self.anomaly_rate) as usize
    }
}

/// Stream of `spec.n` points. Anomaly positions are a uniform random subset
/// of the indices; anomalies are uniform over the box spanning every cluster
/// set's `mean ± 4·scale`, widened by a quarter of its extent on each side.
pub fn generate_stream(spec: &StreamSpec, seed: u64) -> Result<LabeledDataset> {
    spec.validate()?;
    let d = spec.d;
    let mut lo = alloc::vec![f64::INFINITY; d];
    let mut hi = alloc::vec![f64::NEG_INFINITY; d];
    for c in spec.clusters.iter().chain(spec.drift.iter().flat_map(|(_, s)| s.iter())) {
        for j in 0..d {
            lo[j] = lo[j].min(c.mean[j] - 4.0 * c.scale);
            hi[j] = hi[j].max(c.mean[j] + 4.0 * c.scale);
        }
    }
    for j in 0..d {
        let pad = 0.25 * (hi[j] - lo[j]);
        lo[j] -= pad;
        hi[j] += pad;
    }
    let mut labels = alloc::vec![Label::Genuine; spec.n];
    let mut arng = rng::stream(seed, streams::ANOMALIES);
    for i in index::sample(&mut arng, spec.n, spec.anomaly_count()) {
        labels[i] = Label::Anomaly;
    }
    let mut rng = rng::stream(seed, streams::NOISE);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut coords = Vec::with_capacity(spec.n * d);
    let mut structure = Vec::with_capacity(spec.n);
    let mut active = &spec.clusters;
    let mut next_drift = 0;
    for (i, label) in labels.iter().enumerate() {
        while next_drift < spec.drift.len() && spec.drift[next_drift].0 <= i {
            active = &spec.drift[next_drift].1;
            next_drift += 1;
        }
        if label.is_anomaly() {
            for j in 0..d {
                coords.push(lo[j] + (hi[j] - lo[j]) * arng.random::<f64>());
            }
            structure.push(-1);
            continue;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut pick = active.len() - 1;
        for (k, c) in active.iter().enumerate() {
            acc += c.weight;
            if u < acc {
                pick = k;
                break;
            }
        }
        let c = &active[pick];
        for j in 0..d {
            coords.push(c.mean[j] + c.scale * std.sample(&mut rng));
        }
        structure.push(pick as i32);
    }
    let sigma = spec.clusters.iter().map(|c| c.scale).fold(f64::INFINITY, f64::min);
    LabeledDataset::new(d, coords, labels, Some(structure), sigma)
}
