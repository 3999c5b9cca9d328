//! Constraint-free coordinates for the likelihood optimizers.
//!
//! Rates map through `η = log λ`. Each weight row `(ω_{i0}, ..., ω_{ii})` lives
//! on a simplex and maps through the multinomial logit with the diagonal as
//! reference, `α_{ij} = log(ω_{ij} / ω_{ii})`, so every finite point decodes to
//! a valid row and no part of the search space is a zero-likelihood plateau.

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Weights below this are floored before taking logs; `|α|` is bounded by
/// `-ln(1e-16) ≈ 36.84` as a result.
pub const WEIGHT_FLOOR: f64 = 1e-16;

#[derive(Debug, Clone, PartialEq)]
pub struct UnconstrainedPoint {
    /// `log λ_i`.
    pub etas: Vec<f64>,
    /// `alphas[i]` holds the `i` logits of row `i` (empty for row 0).
    pub alphas: Vec<Vec<f64>>,
}

impl UnconstrainedPoint {
    pub fn dim(&self) -> usize {
        self.etas.len()
    }

    /// All alphas, row by row.
    pub fn alpha_vec(&self) -> Vec<f64> {
        self.alphas.iter().flatten().copied().collect()
    }

    /// `[etas..., alphas...]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.etas.clone();
        v.extend(self.alpha_vec());
        v
    }

    pub fn from_vec(d: usize, v: &[f64]) -> Result<Self> {
        if v.len() != d + d * (d - 1) / 2 {
            return Err(Error::domain(format!(
                "expected {} coordinates for d = {d}, got {}",
                d + d * (d - 1) / 2,
                v.len()
            )));
        }
        let etas = v[..d].to_vec();
        Ok(UnconstrainedPoint {
            etas,
            alphas: split_alphas(d, &v[d..]),
        })
    }

    /// Replaces the alphas, keeping the etas.
    pub fn with_alphas(&self, flat: &[f64]) -> Self {
        UnconstrainedPoint {
            etas: self.etas.clone(),
            alphas: split_alphas(self.dim(), flat),
        }
    }
}

fn split_alphas(d: usize, flat: &[f64]) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(d);
    let mut at = 0;
    for i in 0..d {
        out.push(flat[at..at + i].to_vec());
        at += i;
    }
    out
}

/// Encodes `params`; the flag reports whether any weight had to be floored
/// at [`WEIGHT_FLOOR`] (boundary parameters have no finite image).
pub fn to_unconstrained(params: &ModelParams) -> (UnconstrainedPoint, bool) {
    let mut clamped = false;
    let etas = params.lambdas().iter().map(|l| l.ln()).collect();
    let alphas = params
        .weights()
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut floor = |w: f64| {
                if w < WEIGHT_FLOOR {
                    clamped = true;
                    WEIGHT_FLOOR
                } else {
                    w
                }
            };
            let reference = floor(row[i]);
            row[..i].iter().map(|&w| (floor(w) / reference).ln()).collect()
        })
        .collect();
    (UnconstrainedPoint { etas, alphas }, clamped)
}

/// Decodes a point; every finite input yields rows on the simplex.
pub fn from_unconstrained(point: &UnconstrainedPoint) -> Result<ModelParams> {
    let d = point.dim();
    if point.alphas.len() != d || point.alphas.iter().enumerate().any(|(i, a)| a.len() != i) {
        return Err(Error::domain("alpha rows do not match the dimension"));
    }
    if point.etas.iter().chain(point.alphas.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::domain("unconstrained coordinates must be finite"));
    }
    let lambdas = point.etas.iter().map(|e| e.exp()).collect();
    let weights = point.alphas.iter().map(|a| softmax_with_reference(a)).collect();
    ModelParams::new(lambdas, weights)
}

/// `(e^{a_0}, ..., e^{a_{k-1}}, 1) / (1 + Σ e^{a})`, evaluated stably.
fn softmax_with_reference(a: &[f64]) -> Vec<f64> {
    let shift = a.iter().copied().fold(0.0f64, f64::max);
    let mut row: Vec<f64> = a.iter().map(|&v| (v - shift).exp()).collect();
    row.push((-shift).exp());
    let total: f64 = row.iter().sum();
    row.iter_mut().for_each(|w| *w /= total);
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_rows_have_zero_alphas() {
        let p = ModelParams::new(
            vec![1.0, 2.0, 3.0],
            vec![vec![1.0], vec![0.5, 0.5], vec![1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]],
        )
        .unwrap();
        let (u, clamped) = to_unconstrained(&p);
        assert!(!clamped);
        assert!(u.alpha_vec().iter().all(|a| a.abs() < 1e-15));
    }

    #[test]
    fn zero_eta_is_unit_rate() {
        let u = UnconstrainedPoint {
            etas: vec![0.0],
            alphas: vec![vec![]],
        };
        assert_eq!(from_unconstrained(&u).unwrap().lambdas(), &[1.0]);
    }

    #[test]
    fn round_trip_on_interior_params() {
        let p = ModelParams::from_lower(vec![1.0, 2.0, 3.0], &[vec![0.25], vec![0.1, 0.6]]).unwrap();
        let (u, clamped) = to_unconstrained(&p);
        assert!(!clamped);
        let back = from_unconstrained(&u).unwrap();
        for (a, b) in p.lambdas().iter().zip(back.lambdas()) {
            assert!((a - b).abs() < 1e-12);
        }
        for (ra, rb) in p.weights().iter().zip(back.weights()) {
            for (a, b) in ra.iter().zip(rb) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        let v = u.to_vec();
        assert_eq!(UnconstrainedPoint::from_vec(3, &v).unwrap(), u);
    }

    #[test]
    fn boundary_params_are_clamped_and_flagged() {
        let p = ModelParams::comonotonic(vec![1.0, 1.0, 1.0]).unwrap();
        let (u, clamped) = to_unconstrained(&p);
        assert!(clamped);
        let limit = -(WEIGHT_FLOOR.ln());
        assert!(u.alpha_vec().iter().all(|a| a.abs() <= limit + 1e-12));
        let back = from_unconstrained(&u).unwrap();
        assert!((back.weight(2, 0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn extreme_points_still_decode_to_valid_rows() {
        let u = UnconstrainedPoint {
            etas: vec![0.3, -0.2],
            alphas: vec![vec![], vec![800.0]],
        };
        let p = from_unconstrained(&u).unwrap();
        assert_eq!(p.weights()[1], vec![1.0, 0.0]);
        let bad = UnconstrainedPoint {
            etas: vec![f64::NAN],
            alphas: vec![vec![]],
        };
        assert!(from_unconstrained(&bad).is_err());
    }
}
