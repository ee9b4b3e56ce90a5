//! Sliding-window PIF over range images.
//!
//! The image is covered by square windows overlapping by half their side.
//! Each window samples its own model pool from its own pixels, so models stay
//! local, and scores its pixels with a forest of its own. A pixel's score is
//! the mean over the windows that scored it.

use alloc::vec::Vec;

use rand::seq::index;

use crate::geometry::{fit_minimal, sample_models, Label, LabeledDataset, ModelFamily};
use crate::isolation::DepthHistogram;
use crate::pif::{isolate, Engine, ModelCount, PifConfig};
use crate::preference::{embed, PreferenceConfig, PreferenceMode};
use crate::rng::{self, streams, Rng};
use crate::{Error, Result};

/// Per-pixel 3D positions with a validity mask and optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeImage {
    height: usize,
    width: usize,
    xyz: Vec<f32>,
    valid: Vec<bool>,
    gt_mask: Option<Vec<bool>>,
}

impl RangeImage {
    pub fn new(height: usize, width: usize, xyz: Vec<f32>, valid: Vec<bool>, gt_mask: Option<Vec<bool>>) -> Result<Self> {
        let n = height * width;
        if xyz.len() != 3 * n {
            return Err(Error::InvalidDataset("position tensor does not match the image size"));
        }
        if valid.len() != n || gt_mask.as_ref().is_some_and(|g| g.len() != n) {
            return Err(Error::InvalidDataset("mask does not match the image size"));
        }
        if valid.iter().enumerate().any(|(i, &v)| v && xyz[3 * i..3 * i + 3].iter().any(|c| !c.is_finite())) {
            return Err(Error::InvalidDataset("non-finite position on a valid pixel"));
        }
        Ok(Self { height, width, xyz, valid, gt_mask })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn xyz(&self) -> &[f32] {
        &self.xyz
    }

    pub fn position(&self, row: usize, col: usize) -> [f32; 3] {
        let i = 3 * (row * self.width + col);
        [self.xyz[i], self.xyz[i + 1], self.xyz[i + 2]]
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn gt_mask(&self) -> Option<&[bool]> {
        self.gt_mask.as_deref()
    }

    /// Ground truth of the valid pixels, in row-major order.
    pub fn valid_labels(&self) -> Option<Vec<Label>> {
        let gt = self.gt_mask.as_ref()?;
        Some(
            gt.iter()
                .zip(&self.valid)
                .filter(|(_, v)| **v)
                .map(|(g, _)| if *g { Label::Anomaly } else { Label::Genuine })
                .collect(),
        )
    }
}

/// Window placement: top-left corners at multiples of the stride, the last
/// one per axis reaching the border. Edge windows are clipped.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WindowGrid {
    pub window_side: usize,
    pub stride: usize,
    pub windows: Vec<(usize, usize)>,
    height: usize,
    width: usize,
}

impl WindowGrid {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// `(row0, row1, col0, col1)` half-open pixel ranges of window `i`.
    pub fn extent(&self, i: usize) -> (usize, usize, usize, usize) {
        let (r, c) = self.windows[i];
        (r, (r + self.window_side).min(self.height), c, (c + self.window_side).min(self.width))
    }
}

fn starts(len: usize, omega: usize, stride: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut s = 0;
    loop {
        out.push(s);
        if s + omega >= len {
            return out;
        }
        s += stride;
    }
}

/// Half-overlapping windows of side `omega`, stride `⌈ω/2⌉`.
pub fn enumerate_windows(height: usize, width: usize, omega: usize) -> Result<WindowGrid> {
    if omega == 0 || omega > height.min(width) {
        return Err(Error::InvalidParameter("window side must lie in [1, min(height, width)]"));
    }
    let stride = omega.div_ceil(2);
    let rows = starts(height, omega, stride);
    let cols = starts(width, omega, stride);
    let windows = rows.iter().flat_map(|&r| cols.iter().map(move |&c| (r, c))).collect();
    Ok(WindowGrid { window_side: omega, stride, windows, height, width })
}

/// `⌊budget / (s·(δ/k)²·(2k−1)²)⌋` with `s = s_bits/8` bytes: models per
/// window when a `δ × δ` image is cut into windows of side `δ/k`.
pub fn models_per_window(s_bits: u64, budget_bytes: u64, delta: u64, k: u64) -> Result<usize> {
    if s_bits == 0 || budget_bytes == 0 || delta == 0 || k == 0 {
        return Err(Error::InvalidParameter("memory model inputs must be positive"));
    }
    let num = budget_bytes as u128 * 8 * (k as u128).pow(2);
    let den = s_bits as u128 * (delta as u128).pow(2) * (2 * k as u128 - 1).pow(2);
    Ok((num / den) as usize)
}

/// Models per window for an arbitrary grid: the budget split evenly over
/// every window's `ω²` entries per model. Matches [`models_per_window`] on
/// square images whose side is a multiple of the window.
pub fn grid_models_per_window(s_bits: u64, budget_bytes: u64, grid: &WindowGrid) -> usize {
    let per_model_bits = s_bits as u128 * (grid.window_side as u128).pow(2) * grid.len() as u128;
    ((budget_bytes as u128 * 8) / per_model_bits.max(1)) as usize
}

/// How each window's noise scale is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaMode {
    /// `1.4826·median|r|` of the least-median-of-squares plane.
    Robust,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingConfig {
    pub family: ModelFamily,
    pub omega: usize,
    pub engine: Engine,
    pub trees: usize,
    pub psi: usize,
    pub branching: usize,
    pub budget_bytes: u64,
    pub entry_bits: u64,
    /// Overrides the budget-derived pool size when set.
    pub models: Option<usize>,
    pub sigma: SigmaMode,
    pub k_multiplier: f64,
    pub mode: PreferenceMode,
}

impl SlidingConfig {
    /// RzHash engine, 100 trees, `ψ = 256`, `b = 2`, 32-bit entries, 1 GiB.
    pub fn new(family: ModelFamily, omega: usize) -> Self {
        Self {
            family,
            omega,
            engine: Engine::RzHash,
            trees: 100,
            psi: 256,
            branching: 2,
            budget_bytes: 1 << 30,
            entry_bits: 32,
            models: None,
            sigma: SigmaMode::Robust,
            k_multiplier: 3.0,
            mode: PreferenceMode::Continuous,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.family.ambient_dim() != 3 {
            return Err(Error::InvalidParameter("sliding windows need a 3D model family"));
        }
        if let SigmaMode::Fixed(s) = self.sigma {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::InvalidParameter("fixed sigma must be positive"));
            }
        }
        if self.entry_bits == 0 {
            return Err(Error::InvalidParameter("entry size must be positive"));
        }
        self.pif_config(1.0).validate()
    }

    fn pif_config(&self, sigma: f64) -> PifConfig {
        PifConfig {
            sigma: Some(sigma),
            k_multiplier: self.k_multiplier,
            mode: self.mode,
            trees: self.trees,
            psi: self.psi,
            branching: self.branching,
            models: ModelCount::Fixed(self.models.unwrap_or(1)),
            ..PifConfig::new(self.family, self.engine)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlidingOutput {
    pub height: usize,
    pub width: usize,
    /// Row-major per-pixel scores; NaN where no window scored the pixel.
    pub scores: Vec<f64>,
    pub windows: usize,
    /// Top-left corners of skipped windows with the reason.
    pub skipped: Vec<((usize, usize), Error)>,
    pub models_per_window: usize,
    pub depth_histogram: DepthHistogram,
}

impl SlidingOutput {
    pub fn score(&self, row: usize, col: usize) -> f64 {
        self.scores[row * self.width + col]
    }

    /// Scores of the valid pixels, in row-major order.
    pub fn valid_scores(&self, image: &RangeImage) -> Vec<f64> {
        self.scores.iter().zip(image.valid()).filter(|(_, v)| **v).map(|(s, _)| *s).collect()
    }
}

const ROBUST_TRIALS: usize = 32;

/// Least-median-of-squares plane scale over `data`, from `ROBUST_TRIALS`
/// random minimal samples.
pub fn robust_sigma(data: &LabeledDataset, rng: &mut Rng) -> Result<f64> {
    let n = data.len();
    if n < 3 {
        return Err(Error::InvalidParameter("fewer points than the minimal sample size"));
    }
    let mut residuals = alloc::vec![0.0; n];
    let mut best = f64::INFINITY;
    let mut failures = 0;
    let mut fitted = 0;
    while fitted < ROBUST_TRIALS {
        let ids = index::sample(rng, n, 3);
        let sample: Vec<&[f64]> = ids.iter().map(|i| data.point(i)).collect();
        let Ok(plane) = fit_minimal(ModelFamily::Plane3d, &sample) else {
            failures += 1;
            if failures > 100 * ROBUST_TRIALS {
                return Err(Error::SamplingExhausted { attempts: failures });
            }
            continue;
        };
        fitted += 1;
        for (r, x) in residuals.iter_mut().zip(data.points()) {
            *r = plane.residual(x);
        }
        let mid = n / 2;
        let (_, median, _) = residuals.select_nth_unstable_by(mid, f64::total_cmp);
        best = best.min(*median);
    }
    Ok((1.4826 * best).max(1e-9))
}

/// Per-pixel mean of window scores. A pixel lies in at most four windows;
/// their scores are summed in sorted order so the mean does not depend on
/// the order windows arrive in.
#[derive(Debug, Clone)]
pub struct ScoreAccumulator {
    values: Vec<[f64; MAX_COVER]>,
    count: Vec<u8>,
}

const MAX_COVER: usize = 4;

impl ScoreAccumulator {
    pub fn new(pixels: usize) -> Self {
        Self { values: alloc::vec![[0.0; MAX_COVER]; pixels], count: alloc::vec![0; pixels] }
    }

    /// # Panics
    ///
    /// If a pixel receives more than four scores.
    pub fn add(&mut self, pixels: &[usize], scores: &[f64]) {
        for (&p, &s) in pixels.iter().zip(scores) {
            let c = &mut self.count[p];
            assert!((*c as usize) < MAX_COVER, "pixel {p} covered by more than {MAX_COVER} windows");
            self.values[p][*c as usize] = s;
            *c += 1;
        }
    }

    /// Means, NaN for pixels that received nothing.
    pub fn finish(self) -> Vec<f64> {
        self.values
            .into_iter()
            .zip(self.count)
            .map(|(mut v, c)| {
                let v = &mut v[..c as usize];
                if v.is_empty() {
                    return f64::NAN;
                }
                v.sort_unstable_by(f64::total_cmp);
                v.iter().sum::<f64>() / v.len() as f64
            })
            .collect()
    }
}

/// Scores every valid pixel of `image` window by window.
pub fn sliding_pif(image: &RangeImage, config: &SlidingConfig, seed: u64) -> Result<SlidingOutput> {
    config.validate()?;
    let (h, w) = (image.height(), image.width());
    let grid = enumerate_windows(h, w, config.omega)?;
    let m = config.models.unwrap_or_else(|| grid_models_per_window(config.entry_bits, config.budget_bytes, &grid));
    if m == 0 {
        return Err(Error::InvalidParameter("memory budget leaves no models per window"));
    }
    let mut acc = ScoreAccumulator::new(h * w);
    let mut skipped = Vec::new();
    let mut depth_histogram = DepthHistogram::default();
    let mut master = rng::stream(seed, streams::MODELS);
    for i in 0..grid.len() {
        let mut wrng = rng::fork(&mut master);
        let (r0, r1, c0, c1) = grid.extent(i);
        let pixels: Vec<usize> = (r0..r1)
            .flat_map(|r| (c0..c1).map(move |c| r * w + c))
            .filter(|&p| image.valid()[p])
            .collect();
        let need = config.family.min_sample_size();
        if pixels.len() < need {
            skipped.push((grid.windows[i], Error::WindowTooSparse { valid: pixels.len(), required: need }));
            continue;
        }
        match score_window(image, &pixels, config, m, &mut wrng) {
            Ok((scores, hist)) => {
                acc.add(&pixels, &scores);
                depth_histogram.merge(&hist);
            }
            Err(e @ Error::SamplingExhausted { .. }) => skipped.push((grid.windows[i], e)),
            Err(e) => return Err(e),
        }
    }
    let scores = acc.finish();
    Ok(SlidingOutput { height: h, width: w, scores, windows: grid.len(), skipped, models_per_window: m, depth_histogram })
}

fn score_window(
    image: &RangeImage,
    pixels: &[usize],
    config: &SlidingConfig,
    m: usize,
    rng: &mut Rng,
) -> Result<(Vec<f64>, DepthHistogram)> {
    let coords: Vec<f64> = pixels.iter().flat_map(|&p| image.xyz()[3 * p..3 * p + 3].iter().map(|&v| v as f64)).collect();
    let labels = alloc::vec![Label::Genuine; pixels.len()];
    let data = LabeledDataset::new(3, coords, labels, None, 1.0)?;
    let sigma = match config.sigma {
        SigmaMode::Fixed(s) => s,
        SigmaMode::Robust => robust_sigma(&data, rng)?,
    };
    let models = sample_models(&data, config.family, m, rng, None)?;
    let pref = PreferenceConfig::new(sigma, config.k_multiplier, config.mode)?;
    let matrix = embed(&data, &models, &pref)?;
    drop(models);
    isolate(&matrix, &config.pif_config(sigma), rng)
}
