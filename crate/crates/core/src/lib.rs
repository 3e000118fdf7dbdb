//! State-varying latent factor models.
//!
//! Loadings Λ_i(S_t) depend on an observed state S_t. They are estimated at a state
//! value `s` by principal components of the kernel-reweighted panel. The crate also
//! covers feasible standard errors, a test for changes in the loading span between
//! two states, a Monte Carlo lab, out-of-sample evaluation and a CLI.

pub mod cli;
pub mod error;
pub mod estimator;
pub mod evalkit;
pub mod inference;
pub mod io;
pub mod numerics;
pub mod scalar;
pub mod simlab;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Fit = estimator::ConditionalFit<f64>;
pub type NormalizedFit = estimator::NormalizedFit<f64>;
pub type CommonComponents = estimator::CommonComponentResult<f64>;
pub type Weights = numerics::KernelWeights<f64>;
pub type Matrix = nalgebra::DMatrix<f64>;
pub type Vector = nalgebra::DVector<f64>;
