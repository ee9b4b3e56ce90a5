#[path = "support/shadow.rs"]
mod shadow;

use isoprefs_core::datasets::{generate_stream, StreamSpec};
use isoprefs_core::geometry::LabeledDataset;
use isoprefs_core::online::{OnlineForest, OnlineParams};
use isoprefs_core::rng;

fn stream(n: usize, seed: u64) -> LabeledDataset {
    generate_stream(&StreamSpec::two_gaussians(n, 4, 0.02), seed).unwrap()
}

fn forest(trees: usize, omega: usize, eta: usize, seed: u64) -> OnlineForest {
    OnlineForest::new(OnlineParams::new(trees, omega, eta), 4, &mut rng::from_seed(seed)).unwrap()
}

#[test]
fn incremental_state_matches_the_shadow() {
    let data = stream(3000, 11);
    let mut f = forest(8, 512, 16, 3);
    assert_eq!(f.depth_cap(), 5);
    for (i, x) in data.points().enumerate() {
        f.process(x).unwrap();
        let a = shadow::audit(&f);
        assert!(a.is_clean(), "step {i}: {:?}", &a.violations[..a.violations.len().min(5)]);
    }
}

#[test]
fn batched_updates_match_the_shadow() {
    let data = stream(2500, 12);
    let mut f = forest(6, 400, 20, 5);
    let rows: Vec<Vec<f64>> = data.points().map(<[f64]>::to_vec).collect();
    for chunk in rows.chunks(37) {
        f.process_batch(chunk).unwrap();
        let a = shadow::audit(&f);
        assert!(a.is_clean(), "after {} points: {:?}", f.processed(), &a.violations[..a.violations.len().min(5)]);
    }
}

#[test]
fn draining_leaves_a_full_window() {
    let omega = 256;
    let data = stream(omega + 700, 13);
    let mut f = forest(4, omega, 8, 8);
    for x in data.points() {
        f.process(x).unwrap();
    }
    for root in f.roots() {
        assert_eq!(root.height(), omega);
    }
    assert!(shadow::audit(&f).is_clean());
}

#[test]
fn scores_lie_in_the_unit_interval() {
    let data = stream(2000, 14);
    let mut f = forest(10, 300, 10, 2);
    for x in data.points() {
        let s = f.process(x).unwrap();
        assert!(s > 0.0 && s <= 1.0, "{s}");
    }
}

#[test]
fn a_constant_stream_scores_constantly() {
    let mut f = forest(5, 128, 8, 4);
    let x = [0.5, -1.0, 2.0, 0.0];
    let scores: Vec<f64> = (0..600).map(|_| f.process(&x).unwrap()).collect();
    assert!(scores[200..].windows(2).all(|w| w[0] == w[1]));
    assert!(shadow::audit(&f).is_clean());
}
