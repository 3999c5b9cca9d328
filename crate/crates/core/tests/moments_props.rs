use mpcs_core::model::sample;
use mpcs_core::moments::{cor_matrix, max_cov, pair_cov, solve_weight, PairCovTarget};
use mpcs_core::pois::PoissonRate;
use mpcs_core::streams::stream_rng;
use mpcs_core::ModelParams;
use proptest::prelude::*;

fn rate(v: f64) -> PoissonRate {
    PoissonRate::new(v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn max_cov_increases_with_weight(li in 0.2f64..10.0, lj in 0.2f64..10.0, a in 0.05f64..1.0) {
        let mut prev = max_cov(rate(a * li), rate(0.0));
        prop_assert_eq!(prev, 0.0);
        for g in 1..=100 {
            let w = g as f64 / 100.0;
            let v = max_cov(rate(a * li), rate(w * lj));
            prop_assert!(v > prev, "w = {w}: {v} <= {prev}");
            prev = v;
        }
    }

    #[test]
    fn pair_cov_is_bounded(
        lambdas in prop::collection::vec(0.2f64..8.0, 3),
        w in prop::collection::vec(0.0f64..1.0, 3),
    ) {
        let w31 = w[1] * (1.0 - w[2]);
        let w32 = w[2] * (1.0 - w31).min(1.0 - w[1]).max(0.0);
        let p = ModelParams::from_lower(lambdas.clone(), &[vec![w[0]], vec![w31, w32]]).unwrap();
        for (i, j) in [(0, 1), (0, 2), (1, 2)] {
            let c = pair_cov(i, j, &p).unwrap();
            let top = max_cov(rate(lambdas[i]), rate(lambdas[j]));
            prop_assert!(c >= 0.0 && c <= top + 1e-12, "({i},{j}) {c} vs {top}");
        }
        let r = cor_matrix(&p);
        for i in 0..3 {
            prop_assert_eq!(r[i][i], 1.0);
            for j in 0..3 {
                prop_assert_eq!(r[i][j], r[j][i]);
                prop_assert!((0.0..=1.0).contains(&r[i][j]));
            }
        }
    }

    #[test]
    fn solver_inverts_max_cov(li in 0.3f64..10.0, lj in 0.3f64..10.0, a in 0.1f64..1.0, w in 0.0f64..1.0) {
        let target = PairCovTarget {
            i: 0,
            j: 1,
            sample_cov: max_cov(rate(a * li), rate(w * lj)),
            residual_weight_i: a,
        };
        let sol = solve_weight(&target, rate(li), rate(lj)).unwrap();
        prop_assert!((sol.weight - w).abs() < 1e-6, "{} vs {w}", sol.weight);
    }
}

/// Standard error of the sample covariance of columns `i`, `j`.
fn cov_se(data: &mpcs_core::CountMatrix, i: usize, j: usize) -> f64 {
    let m = data.column_means();
    let n = data.n_rows() as f64;
    let prods: Vec<f64> = data
        .rows()
        .map(|r| (f64::from(r[i]) - m[i]) * (f64::from(r[j]) - m[j]))
        .collect();
    let mean = prods.iter().sum::<f64>() / n;
    (prods.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
}

#[test]
fn sample_dependence_matches_the_model() {
    // at 10^6 draws a covariance on the λ = (4, 6, 8) scale has SE near 0.007,
    // so covariances get a 4-SE bound and correlations the fixed ±0.01
    let settings = [[0.9, 0.7, 0.1], [0.25, 0.1, 0.6], [0.075, 0.075, 0.1]];
    for (s, w) in settings.iter().enumerate() {
        for (t, lambdas) in [[1.0, 2.0, 3.0], [4.0, 6.0, 8.0]].iter().enumerate() {
            let p = ModelParams::from_lower(lambdas.to_vec(), &[vec![w[0]], vec![w[1], w[2]]]).unwrap();
            let data = sample(&p, 1_000_000, &mut stream_rng(7, (2 * s + t) as u64)).unwrap();
            let r = cor_matrix(&p);
            for (i, j) in [(0, 1), (0, 2), (1, 2)] {
                let got = data.sample_cov(i, j);
                let want = pair_cov(i, j, &p).unwrap();
                let se = cov_se(&data, i, j);
                assert!((got - want).abs() <= 4.0 * se, "setting {s}{t} ({i},{j}): {got} vs {want}, se {se}");
                let rho = got / (data.sample_cov(i, i) * data.sample_cov(j, j)).sqrt();
                assert!((rho - r[i][j]).abs() <= 0.01, "setting {s}{t} ({i},{j}): {rho} vs {}", r[i][j]);
            }
        }
    }
}
