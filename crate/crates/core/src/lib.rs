//! Multiple correlation coefficients for a whole set of variables.
//!
//! The central quantity is `ψ = sqrt(1 − det(V)^{2/p})` for a `p × p`
//! correlation matrix `V`. The crate provides the sample estimator, its
//! bias correction and asymptotic interval, a test of `ψ = 0`, resampling
//! alternatives, and a stochastic approximation Monte Carlo sampler for
//! very small p-values.

// `!(x > 0.0)` is used on purpose so that NaN fails the check too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod coefficient;
pub mod datagen;
pub mod error;
pub mod linalg;
pub mod normal;
pub mod resampling;
pub mod samc;
pub mod simulation;
pub mod statistic;

#[cfg(test)]
mod testutil;

pub use asymptotics::{full_estimate, ConfidenceInterval, EstimateFlags, PsiEstimate, TestResult};
pub use coefficient::{classical_rho, psi_hat, psi_star, PsiValue, RhoAggregate};
pub use datagen::{ComponentDistribution, CovarianceCase, SigmaSpec};
pub use error::{Error, Result};
pub use linalg::{CorrelationMatrix, DataMatrix, SymmetricMatrix};
