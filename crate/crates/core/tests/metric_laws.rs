use isoprefs_core::preference::{jaccard, ruzicka, tanimoto, Distance};
use isoprefs_core::rng;
use proptest::prelude::*;
use rand::Rng as _;

type Metric = fn(&[f32], &[f32]) -> isoprefs_core::Result<f64>;
const METRICS: [(&str, Metric); 3] = [("jaccard", jaccard), ("ruzicka", ruzicka), ("tanimoto", tanimoto)];
const SLACK: f64 = 1e-12;

/// Nonnegative vector with roughly half of its entries zero.
fn random_vector(rng: &mut rng::Rng, m: usize, binary: bool) -> Vec<f32> {
    (0..m)
        .map(|_| match (rng.random::<bool>(), binary) {
            (false, _) => 0.0,
            (true, true) => 1.0,
            (true, false) => rng.random::<f32>(),
        })
        .collect()
}

#[test]
fn ten_thousand_pairs_and_triples() {
    let mut rng = rng::from_seed(2024);
    let mut violations = Vec::new();
    for trial in 0..10_000 {
        let m = rng.random_range(1..40);
        let binary = trial % 4 == 0;
        let p = random_vector(&mut rng, m, binary);
        let q = random_vector(&mut rng, m, binary);
        let r = random_vector(&mut rng, m, binary);
        for (name, d) in METRICS {
            let (pq, qp) = (d(&p, &q).unwrap(), d(&q, &p).unwrap());
            let (pr, qr) = (d(&p, &r).unwrap(), d(&q, &r).unwrap());
            if !(0.0..=1.0).contains(&pq) {
                violations.push(format!("{name} range {pq}"));
            }
            if d(&p, &p).unwrap() != 0.0 {
                violations.push(format!("{name} identity"));
            }
            if pq != qp {
                violations.push(format!("{name} symmetry {pq} {qp}"));
            }
            if (name != "tanimoto" || binary) && pr > pq + qr + SLACK {
                violations.push(format!("{name} triangle {pr} > {pq} + {qr}"));
            }
            let disjoint = p.iter().zip(&q).all(|(a, b)| *a == 0.0 || *b == 0.0);
            let nonzero = p.iter().any(|v| *v > 0.0) || q.iter().any(|v| *v > 0.0);
            if disjoint && nonzero && pq != 1.0 {
                violations.push(format!("{name} disjoint supports {pq}"));
            }
        }
        if binary {
            let j = jaccard(&p, &q).unwrap();
            if ruzicka(&p, &q).unwrap() != j || tanimoto(&p, &q).unwrap() != j {
                violations.push("binary reduction".into());
            }
        }
    }
    assert!(violations.is_empty(), "{} violations, first: {:?}", violations.len(), violations.first());
}

#[test]
fn tanimoto_breaks_the_triangle_on_real_vectors() {
    let (p, q, r) = ([1.0f32], [0.7f32], [0.49f32]);
    let (pq, qr, pr) = (tanimoto(&p, &q).unwrap(), tanimoto(&q, &r).unwrap(), tanimoto(&p, &r).unwrap());
    assert!(pr > pq + qr + 0.1, "{pr} vs {pq} + {qr}");
    assert!(ruzicka(&p, &r).unwrap() <= ruzicka(&p, &q).unwrap() + ruzicka(&q, &r).unwrap() + SLACK);
}

#[test]
fn eval_matches_checked_functions() {
    let mut rng = rng::from_seed(5);
    for _ in 0..200 {
        let p = random_vector(&mut rng, 17, false);
        let q = random_vector(&mut rng, 17, false);
        assert_eq!(Distance::Jaccard.eval(&p, &q), jaccard(&p, &q).unwrap());
        assert_eq!(Distance::Ruzicka.eval(&p, &q), ruzicka(&p, &q).unwrap());
        assert_eq!(Distance::Tanimoto.eval(&p, &q), tanimoto(&p, &q).unwrap());
    }
}

fn vectors(len: usize) -> impl Strategy<Value = Vec<f32>> {
    prop::collection::vec(prop_oneof![Just(0.0f32), 0.0f32..=1.0, Just(1.0f32)], len)
}

proptest! {
    #[test]
    fn metric_axioms(
        (p, q, r) in (1usize..24).prop_flat_map(|m| (vectors(m), vectors(m), vectors(m)))
    ) {
        for (name, d) in METRICS {
            let pq = d(&p, &q).unwrap();
            prop_assert!((0.0..=1.0).contains(&pq));
            prop_assert_eq!(pq, d(&q, &p).unwrap());
            prop_assert_eq!(d(&p, &p).unwrap(), 0.0);
            if name != "tanimoto" {
                prop_assert!(d(&p, &r).unwrap() <= pq + d(&q, &r).unwrap() + SLACK);
            }
        }
    }

    #[test]
    fn binary_vectors_agree(
        (p, q) in (1usize..64).prop_flat_map(|m| (prop::collection::vec(prop::bool::ANY, m), prop::collection::vec(prop::bool::ANY, m)))
    ) {
        let f = |v: &[bool]| v.iter().map(|&b| f32::from(u8::from(b))).collect::<Vec<f32>>();
        let (p, q) = (f(&p), f(&q));
        let j = jaccard(&p, &q).unwrap();
        prop_assert_eq!(ruzicka(&p, &q).unwrap(), j);
        prop_assert_eq!(tanimoto(&p, &q).unwrap(), j);
    }

    #[test]
    fn binary_tanimoto_triangle(
        (p, q, r) in (1usize..48).prop_flat_map(|m| (prop::collection::vec(0u8..2, m), prop::collection::vec(0u8..2, m), prop::collection::vec(0u8..2, m)))
    ) {
        let f = |v: &[u8]| v.iter().map(|&b| f32::from(b)).collect::<Vec<f32>>();
        let (p, q, r) = (f(&p), f(&q), f(&r));
        prop_assert!(tanimoto(&p, &r).unwrap() <= tanimoto(&p, &q).unwrap() + tanimoto(&q, &r).unwrap() + SLACK);
    }
}
