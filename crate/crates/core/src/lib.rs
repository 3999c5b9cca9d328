//! Multivariate Poisson model built from convolutions of comonotonic shocks.
//!
//! * [`pois`]: univariate Poisson primitives and comonotonic Poisson vectors.
//! * [`model`]: parameters, exact joint/bivariate probabilities, likelihoods
//!   and the sampler.
//! * [`moments`]: implied covariances and correlations, and the monotone
//!   weight solver used by the method of moments.
//! * [`estimate`]: moment, full-likelihood, two-step and sequential pairwise
//!   estimators, the bootstrap, and a Poisson goodness-of-fit test.

pub mod error;
pub mod estimate;
pub mod model;
pub mod moments;
pub mod pois;
pub mod streams;

pub use error::{Error, Result};
pub use estimate::{bootstrap, fit, BootstrapResult, FitResult, Method};
pub use model::{CountMatrix, ModelParams};
