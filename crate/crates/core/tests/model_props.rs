use mpcs_core::model::{bivariate_pmf, joint_cdf, joint_pmf, sample, JointPmfEvaluator};
use mpcs_core::pois::{pois_cdf, pois_pmf, pois_quantile, PoissonRate};
use mpcs_core::streams::stream_rng;
use mpcs_core::ModelParams;
use proptest::prelude::*;

fn rate(v: f64) -> PoissonRate {
    PoissonRate::new(v).unwrap()
}

/// Random valid parameters: rates in `(0.2, 8)`, rows drawn on the simplex
/// with occasional exact zeros.
fn params(d: usize) -> impl Strategy<Value = ModelParams> {
    (
        prop::collection::vec(0.2f64..8.0, d),
        prop::collection::vec(prop::collection::vec(0.0f64..1.0, d), d),
        prop::collection::vec(any::<bool>(), d * d),
    )
        .prop_map(move |(lambdas, raw, zero)| {
            let weights = (0..d)
                .map(|i| {
                    let mut row: Vec<f64> = (0..=i)
                        .map(|j| if zero[i * d + j] && j < i { 0.0 } else { raw[i][j] + 1e-3 })
                        .collect();
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|w| *w /= s);
                    row
                })
                .collect();
            ModelParams::new(lambdas, weights).unwrap()
        })
}

fn quantile(u: f64, l: f64) -> u32 {
    pois_quantile(u, rate(l)).unwrap() as u32
}

fn boxes(bounds: &[u32]) -> Vec<Vec<u32>> {
    let mut out = vec![vec![]];
    for &b in bounds {
        out = out
            .into_iter()
            .flat_map(|p| {
                (0..=b).map(move |v| {
                    let mut q = p.clone();
                    q.push(v);
                    q
                })
            })
            .collect();
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn margins_are_poisson(p in (2usize..=3).prop_flat_map(params)) {
        let bounds: Vec<u32> = p.lambdas().iter().map(|&l| quantile(1.0 - 1e-13, l)).collect();
        let eval = JointPmfEvaluator::new(&p, &bounds).unwrap();
        let mut margins: Vec<Vec<f64>> = bounds.iter().map(|&b| vec![0.0; b as usize + 1]).collect();
        for x in boxes(&bounds) {
            let f = eval.pmf(&x);
            for (k, &v) in x.iter().enumerate() {
                margins[k][v as usize] += f;
            }
        }
        for (k, m) in margins.iter().enumerate() {
            for (v, &got) in m.iter().enumerate() {
                let g = pois_pmf(v as i64, rate(p.lambda(k))).unwrap();
                prop_assert!((got - g).abs() < 1e-9, "margin {k} at {v}: {got} vs {g}");
            }
        }
    }

    #[test]
    fn normalizes_on_the_far_quantile_box(p in (2usize..=3).prop_flat_map(params)) {
        let bounds: Vec<u32> = p.lambdas().iter().map(|&l| quantile(1.0 - 1e-8, l)).collect();
        let eval = JointPmfEvaluator::new(&p, &bounds).unwrap();
        let total: f64 = boxes(&bounds).iter().map(|x| eval.pmf(x)).sum();
        prop_assert!(total >= 1.0 - 1e-6, "{total}");
    }

    #[test]
    fn cdf_differences_give_the_pmf(p in (2usize..=3).prop_flat_map(params), seed in any::<u64>()) {
        let d = p.dim();
        let x: Vec<i64> = sample(&p, 1, &mut stream_rng(seed, 0)).unwrap().row(0).iter().map(|&v| v as i64).collect();
        let mut acc = 0.0;
        for mask in 0u32..(1 << d) {
            let y: Vec<i64> = (0..d).map(|k| x[k] - i64::from(mask >> k & 1)).collect();
            let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * joint_cdf(&y, &p).unwrap();
        }
        let f = joint_pmf(&x, &p).unwrap();
        prop_assert!((acc - f).abs() < 1e-9, "{acc} vs {f}");
    }

    #[test]
    fn cdf_respects_frechet_bounds(p in (2usize..=3).prop_flat_map(params), xs in prop::collection::vec(0i64..12, 3)) {
        let x = &xs[..p.dim()];
        let margins: Vec<f64> = x.iter().enumerate().map(|(k, &v)| pois_cdf(v, rate(p.lambda(k)))).collect();
        let lower = (margins.iter().sum::<f64>() - (p.dim() as f64 - 1.0)).max(0.0);
        let upper = margins.iter().copied().fold(1.0, f64::min);
        let f = joint_cdf(x, &p).unwrap();
        prop_assert!(f >= lower - 1e-12 && f <= upper + 1e-12, "{lower} <= {f} <= {upper}");
    }

    #[test]
    fn pair_ignores_the_split_of_later_shocks(
        p in params(3),
        t in 0.0f64..1.0,
        xi in 0i64..6,
        xj in 0i64..8,
    ) {
        // pair (1, 3): ω_32 and ω_33 can trade mass without changing f_13
        let w = p.weights();
        let tail = w[2][1] + w[2][2];
        let moved = ModelParams::new(
            p.lambdas().to_vec(),
            vec![w[0].clone(), w[1].clone(), vec![w[2][0], t * tail, (1.0 - t) * tail]],
        )
        .unwrap();
        let a = bivariate_pmf(0, 2, xi, xj, &p).unwrap();
        let b = bivariate_pmf(0, 2, xi, xj, &moved).unwrap();
        prop_assert!((a - b).abs() < 1e-14, "{a} vs {b}");
    }
}

#[test]
fn pair_matches_marginalized_trivariate() {
    let p = ModelParams::from_lower(vec![1.0, 2.0, 3.0], &[vec![0.25], vec![0.1, 0.6]]).unwrap();
    let b2 = quantile(1.0 - 1e-15, 2.0) as i64 + 4;
    for x1 in 0..6 {
        for x3 in 0..9 {
            let m: f64 = (0..=b2).map(|x2| joint_pmf(&[x1, x2, x3], &p).unwrap()).sum();
            let f = bivariate_pmf(0, 2, x1, x3, &p).unwrap();
            assert!((m - f).abs() < 1e-10, "({x1},{x3}): {m} vs {f}");
        }
    }
}

#[test]
fn sampler_cell_frequencies_match_pmf() {
    let p = ModelParams::from_lower(vec![1.0, 2.0, 3.0], &[vec![0.25], vec![0.1, 0.6]]).unwrap();
    let n = 200_000;
    let data = sample(&p, n, &mut stream_rng(99, 0)).unwrap();
    let mut freq = std::collections::HashMap::new();
    for row in data.rows() {
        *freq.entry(row.to_vec()).or_insert(0usize) += 1;
    }
    let bounds: Vec<u32> = (0..3).map(|c| data.column_max(c)).collect();
    let eval = JointPmfEvaluator::new(&p, &bounds).unwrap();
    for x in boxes(&bounds) {
        let f = eval.pmf(&x);
        if f < 1e-3 {
            continue;
        }
        let got = *freq.get(&x).unwrap_or(&0) as f64 / n as f64;
        let se = (f * (1.0 - f) / n as f64).sqrt();
        assert!((got - f).abs() <= 4.0 * se, "{x:?}: {got} vs {f}");
    }
}
