#![allow(clippy::needless_range_loop)]

use powermap::features::*;
use powermap::rng::standard_normal;
use powermap::sampler::{p_sampler, SamplerConfig};
use powermap::{ParameterPoint, RngStream};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Cyclic Jacobi eigenvalue iteration on a small symmetric matrix.
fn jacobi(mut a: Vec<Vec<f64>>) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for _ in 0..100 {
        let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i][j] * a[i][j]).sum();
        if off < 1e-26 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    ((0..n).map(|i| a[i][i]).collect(), v)
}

fn random_rows(seed: u64, n: usize, p: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let base = standard_normal(&mut rng);
            (0..p).map(|j| base * (j as f64 - 1.0) + standard_normal(&mut rng) * (1.0 + j as f64) + 5.0 * j as f64).collect()
        })
        .collect()
}

#[test]
fn eigenvalues_match_jacobi_oracle() {
    for seed in 0..10 {
        let x = random_rows(seed, 40, 5);
        let model = pca_fit(&x, 1.0).unwrap();
        let n = x.len() as f64;
        let z: Vec<Vec<f64>> = x
            .iter()
            .map(|r| r.iter().enumerate().map(|(j, v)| (v - model.means[j]) / model.stds[j]).collect())
            .collect();
        let corr: Vec<Vec<f64>> =
            (0..5).map(|a| (0..5).map(|b| z.iter().map(|r| r[a] * r[b]).sum::<f64>() / n).collect()).collect();
        let (vals, vecs) = jacobi(corr);
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
        for (c, &i) in order.iter().enumerate() {
            assert!((model.eigenvalues[c] - vals[i]).abs() < 1e-8);
            // compare axes up to sign
            let dot: f64 = (0..5).map(|k| model.components[k][c] * vecs[k][i]).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-8, "seed {seed} component {c}: |dot| = {}", dot.abs());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn components_orthonormal_and_round_trip(seed in any::<u64>(), n in 6usize..60, p in 2usize..7) {
        let x = random_rows(seed, n, p);
        let (model, t) = pca_fit_transform(&x, 1.0).unwrap();
        let r = model.n_components();
        for a in 0..r {
            for b in 0..r {
                let dot: f64 = (0..p).map(|k| model.components[k][a] * model.components[k][b]).sum();
                prop_assert!((dot - f64::from(u8::from(a == b))).abs() < 1e-8);
            }
        }
        if r == p {
            for (row, scores) in x.iter().zip(&t) {
                for j in 0..p {
                    let back: f64 = (0..p).map(|c| scores[c] * model.components[j][c]).sum::<f64>() * model.stds[j] + model.means[j];
                    prop_assert!((back - row[j]).abs() < 1e-8 * (1.0 + row[j].abs()));
                }
            }
        }
        let ratio_sum: f64 = model.explained_ratios.iter().sum();
        prop_assert!((ratio_sum - 1.0).abs() < 1e-12);
        prop_assert!(model.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn retained_variance_reaches_target(seed in any::<u64>(), target in 0.3f64..1.0) {
        let x = random_rows(seed, 30, 6);
        let model = pca_fit(&x, target).unwrap();
        let r = model.n_components();
        let kept: f64 = model.explained_ratios[..r].iter().sum();
        prop_assert!(kept >= target - 1e-12);
        if r > 1 {
            let fewer: f64 = model.explained_ratios[..r - 1].iter().sum();
            prop_assert!(fewer < target - 1e-12);
        }
    }

    #[test]
    fn dataset_csv_round_trip(seed in any::<u64>(), rows in 1usize..30) {
        let cfg = SamplerConfig::uniform_box(3, [0.1, 0.3], [10.0, 200.0], rows, 2, 0.02);
        let points = p_sampler(&cfg, &RngStream::new(seed)).unwrap();
        let data: Vec<DatasetRow> = points
            .into_iter()
            .enumerate()
            .map(|(i, point)| DatasetRow { point, power: (i % 11) as f64 / 10.0 })
            .collect();
        let base: Vec<Vec<f64>> = data.iter().map(|r| base_features(&r.point)).collect();
        let pca = pca_fit(&base, DEFAULT_VARIANCE_TARGET).unwrap();
        let text = write_dataset_csv(3, &data, &pca).unwrap();
        let back = parse_dataset_csv(&text).unwrap();
        prop_assert_eq!(back.len(), data.len());
        for (a, b) in back.iter().zip(&data) {
            prop_assert_eq!(a.point.n, b.point.n);
            prop_assert!((a.power - b.power).abs() <= 1e-10);
            for (x, y) in a.point.beta.iter().zip(&b.point.beta) {
                prop_assert!((x - y).abs() <= 1e-9 * y.abs());
            }
        }
    }
}

#[test]
fn pca_ignores_power() {
    let rows: Vec<DatasetRow> = (0..20)
        .map(|i| DatasetRow { point: ParameterPoint::new(vec![0.01 * i as f64, 0.2 - 0.005 * i as f64], 10 + 3 * i), power: 0.0 })
        .collect();
    let mut shuffled = rows.clone();
    for (i, r) in shuffled.iter_mut().enumerate() {
        r.power = ((i * 7) % 20) as f64 / 20.0;
    }
    let (a, fa, _) = featurize_split(&rows, &[], 0.99).unwrap();
    let (b, fb, _) = featurize_split(&shuffled, &[], 0.99).unwrap();
    assert_eq!(a, b);
    assert_eq!(fa.rows, fb.rows);
}

#[test]
fn test_rows_use_training_projection() {
    let rows: Vec<DatasetRow> = (0..30)
        .map(|i| DatasetRow { point: ParameterPoint::new(vec![0.1 + 0.003 * i as f64, 0.3 - 0.002 * (i % 5) as f64], 20 + i), power: 0.5 })
        .collect();
    let (pca, _, test) = featurize_split(&rows[..20], &rows[20..], 0.99).unwrap();
    let expect = pca.transform_row(&base_features(&rows[25].point)).unwrap();
    assert_eq!(&test.rows[5][4..], &expect[..]);
}
