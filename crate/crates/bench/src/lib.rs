//! Fixtures shared by the benchmarks.

use mcorr_core::datagen::{sample_icm, solve_phi_for_psi};
use mcorr_core::{ComponentDistribution, CovarianceCase, DataMatrix, SigmaSpec};

/// AR(1) data with population ψ = 0.5 (or independent columns when `null`).
pub fn fixture(n: usize, p: usize, null: bool, seed: u64) -> DataMatrix {
    let phi = if null { 0.0 } else { solve_phi_for_psi(CovarianceCase::Autoregressive, p, 0.5).expect("reachable") };
    let spec = SigmaSpec::new(CovarianceCase::Autoregressive, phi, p).expect("valid spec");
    sample_icm(n, &spec, ComponentDistribution::StandardNormal, seed).expect("sampling")
}
