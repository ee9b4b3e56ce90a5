//! End-to-end Preference Isolation Forest: sample a model pool, embed the
//! points into preference space, isolate them there.

use alloc::vec::Vec;

use crate::baseline::IsolationForest;
use crate::geometry::{sample_models, LabeledDataset, ModelFamily};
use crate::isolation::{DepthHistogram, Normalization, Rows};
use crate::preference::{embed, Distance, PreferenceConfig, PreferenceMatrix, PreferenceMode};
use crate::rng::{self, streams, Rng};
use crate::ruzhash::{rzhash_scores, RzForestParams};
use crate::voronoi::{VoronoiForest, VoronoiParams};
use crate::{Error, Result};

/// Isolation engine run on the embedded (or ambient) points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Voronoi(Distance),
    RzHash,
    /// Axis-parallel isolation forest.
    IForest,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Engine::Voronoi(_) => "vifor",
            Engine::RzHash => "rzhash",
            Engine::IForest => "baseline",
        }
    }
}

/// Where the engine runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Space {
    #[default]
    Preference,
    /// Skip the embedding and isolate the raw coordinates.
    Ambient,
}

/// Pool size `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelCount {
    /// `m = ⌈factor·|X|⌉`.
    Factor(f64),
    Fixed(usize),
}

impl ModelCount {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            ModelCount::Factor(f) => libm::ceil(f * n as f64) as usize,
            ModelCount::Fixed(m) => m,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PifConfig {
    pub family: ModelFamily,
    pub models: ModelCount,
    /// Noise scale; `None` takes the dataset's.
    pub sigma: Option<f64>,
    pub k_multiplier: f64,
    pub mode: PreferenceMode,
    pub engine: Engine,
    pub space: Space,
    pub trees: usize,
    pub psi: usize,
    pub branching: usize,
    pub normalization: Normalization,
}

impl PifConfig {
    /// `m = 10|X|`, `k = 3`, continuous preferences, 100 trees, `ψ = 256`, `b = 2`.
    pub fn new(family: ModelFamily, engine: Engine) -> Self {
        Self {
            family,
            models: ModelCount::Factor(10.0),
            sigma: None,
            k_multiplier: 3.0,
            mode: PreferenceMode::Continuous,
            engine,
            space: Space::Preference,
            trees: 100,
            psi: 256,
            branching: 2,
            normalization: Normalization::AverageDepth,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.trees == 0 {
            return Err(Error::InvalidParameter("number of trees must be at least 1"));
        }
        if self.branching < 2 || self.branching > self.psi {
            return Err(Error::InvalidParameter("branching factor must lie in [2, psi]"));
        }
        if let ModelCount::Factor(f) = self.models {
            if !(f > 0.0 && f.is_finite()) {
                return Err(Error::InvalidParameter("model factor must be positive"));
            }
        }
        if self.models == ModelCount::Fixed(0) && self.space == Space::Preference {
            return Err(Error::InvalidParameter("the model pool must be nonempty"));
        }
        if self.space == Space::Ambient && self.engine == Engine::RzHash {
            return Err(Error::InvalidParameter("rzhash needs preference vectors"));
        }
        if self.engine == Engine::IForest && self.branching != 2 {
            return Err(Error::InvalidParameter("the baseline forest is binary"));
        }
        PreferenceConfig::new(self.sigma.unwrap_or(1.0), self.k_multiplier, self.mode)?;
        Ok(())
    }

    pub fn preference_config(&self, data: &LabeledDataset) -> Result<PreferenceConfig> {
        PreferenceConfig::new(self.sigma.unwrap_or(data.noise_sigma()), self.k_multiplier, self.mode)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PifOutput {
    pub scores: Vec<f64>,
    pub depth_histogram: DepthHistogram,
    pub models: usize,
}

/// Samples the model pool and embeds every point.
pub fn preference_matrix(data: &LabeledDataset, config: &PifConfig, rng: &mut Rng) -> Result<PreferenceMatrix> {
    let m = config.models.resolve(data.len());
    let models = sample_models(data, config.family, m, rng, None)?;
    embed(data, &models, &config.preference_config(data)?)
}

/// Runs the configured engine on already embedded rows.
pub fn isolate<R: Rows + ?Sized>(rows: &R, config: &PifConfig, rng: &mut Rng) -> Result<(Vec<f64>, DepthHistogram)> {
    match config.engine {
        Engine::Voronoi(metric) => {
            let params = VoronoiParams { normalization: config.normalization, ..VoronoiParams::new(config.trees, config.psi, config.branching, metric) };
            let forest = VoronoiForest::build(rows, &params, rng)?;
            Ok((forest.anomaly_scores(rows), forest.depth_histogram()))
        }
        Engine::RzHash => {
            let params = RzForestParams { normalization: config.normalization, ..RzForestParams::new(config.trees, config.psi, config.branching) };
            rzhash_scores(rows, &params, rng)
        }
        Engine::IForest => {
            let forest = IsolationForest::build(rows, config.trees, config.psi, rng)?;
            Ok((forest.score_rows(rows), forest.depth_histogram()))
        }
    }
}

/// Scores every point of `data`. Model sampling and the forest draw from
/// separate streams of `seed`.
pub fn run_pif(data: &LabeledDataset, config: &PifConfig, seed: u64) -> Result<PifOutput> {
    config.validate()?;
    let mut forest_rng = rng::stream(seed, streams::FOREST);
    match config.space {
        Space::Preference => {
            let matrix = preference_matrix(data, config, &mut rng::stream(seed, streams::MODELS))?;
            let (scores, depth_histogram) = isolate(&matrix, config, &mut forest_rng)?;
            Ok(PifOutput { scores, depth_histogram, models: matrix.cols() })
        }
        Space::Ambient => {
            let rows = data.to_rows();
            let (scores, depth_histogram) = isolate(&rows, config, &mut forest_rng)?;
            Ok(PifOutput { scores, depth_histogram, models: 0 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Label;
    use crate::metrics::roc_auc;
    use rand::Rng as _;

    /// Two noisy lines plus 20% far anomalies.
    fn two_lines(seed: u64) -> LabeledDataset {
        let mut rng = rng::from_seed(seed);
        let mut coords = Vec::new();
        let mut labels = Vec::new();
        for i in 0..160 {
            let t: f64 = rng.random();
            let e = 0.01 * (rng.random::<f64>() - 0.5);
            if i % 2 == 0 {
                coords.extend_from_slice(&[t, 0.2 + e]);
            } else {
                coords.extend_from_slice(&[0.3 + e, t]);
            }
            labels.push(Label::Genuine);
        }
        for _ in 0..40 {
            coords.extend_from_slice(&[2.0 + rng.random::<f64>(), 2.0 + rng.random::<f64>()]);
            labels.push(Label::Anomaly);
        }
        LabeledDataset::new(2, coords, labels, None, 0.005).unwrap()
    }

    #[test]
    fn anomalies_outscore_genuine_points() {
        let data = two_lines(3);
        let config = PifConfig { trees: 50, ..PifConfig::new(ModelFamily::Line2d, Engine::Voronoi(Distance::Tanimoto)) };
        let out = run_pif(&data, &config, 1).unwrap();
        assert_eq!(out.models, 2000);
        let mean = |want: Label| {
            let v: Vec<f64> = out.scores.iter().zip(data.labels()).filter(|(_, l)| **l == want).map(|(s, _)| *s).collect();
            v.iter().sum::<f64>() / v.len() as f64
        };
        assert!(mean(Label::Anomaly) > mean(Label::Genuine));
        assert!(roc_auc(&out.scores, data.labels()).unwrap() > 0.9);
    }

    #[test]
    fn every_engine_runs_and_replays() {
        let data = two_lines(4);
        for (engine, space) in [
            (Engine::Voronoi(Distance::Euclidean), Space::Ambient),
            (Engine::Voronoi(Distance::Ruzicka), Space::Preference),
            (Engine::RzHash, Space::Preference),
            (Engine::IForest, Space::Preference),
        ] {
            let config = PifConfig { trees: 10, models: ModelCount::Fixed(200), space, ..PifConfig::new(ModelFamily::Line2d, engine) };
            let a = run_pif(&data, &config, 9).unwrap();
            assert_eq!(a, run_pif(&data, &config, 9).unwrap());
            assert!(a.scores.iter().all(|s| *s > 0.0 && *s <= 1.0));
        }
    }

    #[test]
    fn invalid_configs() {
        let base = PifConfig::new(ModelFamily::Line2d, Engine::RzHash);
        assert!(PifConfig { space: Space::Ambient, ..base.clone() }.validate().is_err());
        assert!(PifConfig { branching: 1, ..base.clone() }.validate().is_err());
        assert!(PifConfig { models: ModelCount::Fixed(0), ..base.clone() }.validate().is_err());
        assert!(PifConfig { k_multiplier: -1.0, ..base.clone() }.validate().is_err());
        let data = two_lines(1);
        let plane = PifConfig::new(ModelFamily::Plane3d, Engine::RzHash);
        assert!(run_pif(&data, &plane, 0).is_err());
    }
}
