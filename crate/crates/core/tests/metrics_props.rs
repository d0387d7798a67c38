use powermap::metrics::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_distribution(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| if rng.random::<f64>() < 0.1 { 0.0 } else { rng.random::<f64>() }).collect();
    let s: f64 = v.iter().sum::<f64>().max(1e-300);
    v.iter().map(|x| x / s).collect()
}

#[test]
fn divergence_identities_over_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..1000 {
        let n = rng.random_range(1..20);
        let a = random_distribution(&mut rng, n);
        let b = random_distribution(&mut rng, n);
        assert!(kl_divergence(&a, &b).unwrap() >= 0.0);
        assert!(kl_divergence(&b, &a).unwrap() >= 0.0);
        for form in [JsForm::Symmetrized, JsForm::Mixture] {
            let ab = js_divergence_with(&a, &b, form, SMOOTHING).unwrap();
            let ba = js_divergence_with(&b, &a, form, SMOOTHING).unwrap();
            assert_eq!(ab.to_bits(), ba.to_bits());
            assert!(ab >= 0.0);
            assert_eq!(js_divergence_with(&a, &a, form, SMOOTHING).unwrap(), 0.0);
        }
        let mixture = js_divergence_with(&a, &b, JsForm::Mixture, SMOOTHING).unwrap();
        assert!(mixture <= std::f64::consts::LN_2 + 1e-12);
    }
    assert!(kl_divergence(&[0.5, 0.5], &[0.5]).is_err());
}

proptest! {
    #[test]
    fn f1_permutation_invariant(labels in prop::collection::vec((0u8..2, 0u8..2), 1..60), seed in any::<u64>()) {
        let (p, t): (Vec<u8>, Vec<u8>) = labels.iter().copied().unzip();
        let mut idx: Vec<usize> = (0..p.len()).collect();
        use rand::seq::SliceRandom;
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let pp: Vec<u8> = idx.iter().map(|&i| p[i]).collect();
        let tt: Vec<u8> = idx.iter().map(|&i| t[i]).collect();
        prop_assert_eq!(f1_score(&p, &t).unwrap(), f1_score(&pp, &tt).unwrap());
        let f = f1_score(&p, &t).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
    }

    #[test]
    fn cascade_c1_is_plain_evaluation(power in prop::collection::vec(0.0f64..=1.0, 1..80), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c1: Vec<u8> = power.iter().map(|_| u8::from(rng.random::<bool>())).collect();
        let c2: Vec<u8> = power.iter().map(|_| u8::from(rng.random::<bool>())).collect();
        let r = cascade_evaluate(&c1, &c2, &power, 0.8, 0.6).unwrap();
        let truth: Vec<u8> = power.iter().map(|p| u8::from(*p > 0.8)).collect();
        prop_assert_eq!(r.c1.f1, f1_score(&c1, &truth).unwrap());
        prop_assert_eq!(r.c2_rows.len(), c1.iter().filter(|v| **v == 0).count());
    }
}

#[test]
fn oracle_cascade_scores_one() {
    let power = [0.95, 0.7, 0.3, 0.85, 0.65, 0.1];
    let c1: Vec<u8> = power.iter().map(|p| u8::from(*p > 0.8)).collect();
    let c2: Vec<u8> = power.iter().map(|p| u8::from(*p > 0.6)).collect();
    let r = cascade_evaluate(&c1, &c2, &power, 0.8, 0.6).unwrap();
    assert_eq!((r.c1.f1, r.c2.f1), (1.0, 1.0));
}

#[test]
fn random_c1_hands_half_to_c2() {
    let power: Vec<f64> = (0..400).map(|i| if i % 2 == 0 { 0.9 } else { 0.3 }).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut share = 0.0;
    for _ in 0..50 {
        let c1: Vec<u8> = power.iter().map(|_| u8::from(rng.random::<bool>())).collect();
        share += cascade_evaluate(&c1, &c1, &power, 0.8, 0.6).unwrap().c2_rows.len() as f64 / 400.0;
    }
    share /= 50.0;
    assert!((share - 0.5).abs() < 0.02, "share {share}");
}

#[test]
fn bootstrap_coverage_of_bernoulli_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let p = 0.3;
    let trials = 500;
    let mut covered = 0;
    for _ in 0..trials {
        let s: Vec<f64> = (0..100).map(|_| f64::from(u8::from(rng.random::<f64>() < p))).collect();
        let (lo, hi) = confidence_interval_95(&s, &mut rng).unwrap();
        if lo <= p && p <= hi {
            covered += 1;
        }
    }
    let rate = covered as f64 / trials as f64;
    assert!((0.91..=0.98).contains(&rate), "coverage {rate}");
}
