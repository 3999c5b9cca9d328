//! Full maximum likelihood and the two-step (margins first) variant.

use crate::error::Result;
use crate::model::{log_likelihood_table, CountMatrix, CountTable, ModelParams};

use super::nelder_mead::{nelder_mead, NelderMeadOptions};
use super::reparam::{from_unconstrained, to_unconstrained, UnconstrainedPoint};
use super::{check_data, FitResult, Method};

/// Starting logits are pulled inside this range so the first simplex is not
/// lost on a flat shoulder of the softmax. The unclamped start is still
/// compared against the optimum at the end.
const START_ALPHA_LIMIT: f64 = 8.0;

fn objective(table: &CountTable, point: &UnconstrainedPoint) -> f64 {
    match from_unconstrained(point).and_then(|p| log_likelihood_table(table, &p)) {
        Ok(ll) => -ll,
        Err(_) => f64::INFINITY,
    }
}

fn clamp_alphas(point: &mut UnconstrainedPoint) {
    for row in &mut point.alphas {
        row.iter_mut()
            .for_each(|a| *a = a.clamp(-START_ALPHA_LIMIT, START_ALPHA_LIMIT));
    }
}

/// Finished fit, falling back to `start` when it scores at least as well as
/// the optimizer's point.
fn finish(
    table: &CountTable,
    method: Method,
    found: ModelParams,
    start: ModelParams,
    converged: bool,
    iterations: usize,
) -> Result<FitResult> {
    let ll_found = log_likelihood_table(table, &found)?;
    let ll_start = log_likelihood_table(table, &start)?;
    let (params, loglik) = if ll_start > ll_found {
        (start, ll_start)
    } else {
        (found, ll_found)
    };
    Ok(FitResult {
        params,
        method,
        loglik: Some(loglik),
        converged,
        iterations,
        capped_indices: Vec::new(),
        warnings: Vec::new(),
    })
}

/// Maximizes the joint log-likelihood over all rates and weights.
pub fn fit_ml(data: &CountMatrix, start: &ModelParams) -> Result<FitResult> {
    check_data(data, 1)?;
    let start = start.clone().validate()?;
    let table = data.tabulate();
    let d = data.dim();
    let (mut x0, _) = to_unconstrained(&start);
    clamp_alphas(&mut x0);

    let report = nelder_mead(
        |v| match UnconstrainedPoint::from_vec(d, v) {
            Ok(p) => objective(&table, &p),
            Err(_) => f64::INFINITY,
        },
        &x0.to_vec(),
        &NelderMeadOptions::default(),
    );
    let found = from_unconstrained(&UnconstrainedPoint::from_vec(d, &report.x)?)?;
    finish(&table, Method::Ml, found, start, report.converged, report.iterations)
}

/// Rates fixed at the column means; weights maximize the joint
/// log-likelihood. Only the weights of `start` are used.
pub fn fit_2s(data: &CountMatrix, start: &ModelParams) -> Result<FitResult> {
    let means = check_data(data, 1)?;
    let start = ModelParams::new(means, start.weights().to_vec())?;
    let table = data.tabulate();
    let (mut x0, _) = to_unconstrained(&start);
    clamp_alphas(&mut x0);

    let report = nelder_mead(
        |a| objective(&table, &x0.with_alphas(a)),
        &x0.alpha_vec(),
        &NelderMeadOptions::default(),
    );
    let mut found = from_unconstrained(&x0.with_alphas(&report.x))?;
    // decode exp(log mean) can differ from the mean in the last bit
    found = ModelParams::new(start.lambdas().to_vec(), found.weights().to_vec())?;
    finish(&table, Method::TwoStep, found, start, report.converged, report.iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{log_likelihood, sample};
    use crate::streams::stream_rng;

    #[test]
    fn univariate_ml_is_the_sample_mean() {
        let data = CountMatrix::new(1, vec![0, 3, 2, 5, 1, 4, 2, 2]).unwrap();
        let start = ModelParams::independent(vec![1.0]).unwrap();
        let fit = fit_ml(&data, &start).unwrap();
        assert!(fit.converged);
        assert!((fit.params.lambda(0) - 2.375).abs() < 1e-5, "{}", fit.params.lambda(0));
    }

    #[test]
    fn two_step_keeps_column_means() {
        let p = ModelParams::from_lower(vec![1.0, 2.0], &[vec![0.5]]).unwrap();
        let data = sample(&p, 300, &mut stream_rng(3, 0)).unwrap();
        let fit = fit_2s(&data, &ModelParams::independent(vec![1.0, 1.0]).unwrap()).unwrap();
        assert_eq!(fit.params.lambdas(), data.column_means().as_slice());
        let ll = log_likelihood(&data, &fit.params).unwrap();
        assert!((fit.loglik.unwrap() - ll).abs() < 1e-9);
    }

    #[test]
    fn ml_improves_on_two_step() {
        let p = ModelParams::from_lower(vec![1.0, 2.0, 3.0], &[vec![0.25], vec![0.1, 0.6]]).unwrap();
        let data = sample(&p, 400, &mut stream_rng(11, 0)).unwrap();
        let two = fit_2s(&data, &p).unwrap();
        let ml = fit_ml(&data, &two.params).unwrap();
        assert!(ml.loglik.unwrap() >= two.loglik.unwrap() - 1e-6);
    }

    #[test]
    fn independence_data_gives_small_weight() {
        let p = ModelParams::independent(vec![2.0, 3.0]).unwrap();
        let data = sample(&p, 1000, &mut stream_rng(17, 0)).unwrap();
        let fit = crate::estimate::fit(&data, Method::Ml).unwrap();
        assert!(fit.params.weight(1, 0) <= 0.05, "{:?}", fit.params);
    }

    #[test]
    fn comonotonic_data_pushes_weight_to_boundary() {
        let p = ModelParams::comonotonic(vec![2.0, 2.0]).unwrap();
        let data = sample(&p, 1000, &mut stream_rng(19, 0)).unwrap();
        let fit = fit_2s(&data, &ModelParams::from_lower(vec![1.0, 1.0], &[vec![0.5]]).unwrap()).unwrap();
        assert!(fit.params.weight(1, 0) >= 0.95, "{:?}", fit.params);
    }
}
