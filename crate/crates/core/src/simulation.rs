//! Coverage study for the asymptotic interval.
//!
//! Each replication draws from the independent component model, builds the
//! bias-corrected estimate and its interval, and records whether the
//! interval covers the true ψ. Replication `r` uses stream `r` of the seed,
//! so results do not depend on the thread count.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{estimate_ci, full_estimate, z_from_log_complement, z_test_pvalue};
use crate::datagen::{solve_phi_for_psi, stream_rng, ComponentDistribution, CovarianceCase, IcmSampler, SigmaSpec};
use crate::error::{Error, Result};

/// How the dimension is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    Fixed(usize),
    /// `p = round(q · n)`.
    Ratio(f64),
}

impl Dimension {
    pub fn resolve(self, n: usize) -> Result<usize> {
        let p = match self {
            Dimension::Fixed(p) => p,
            Dimension::Ratio(q) => {
                if !(q > 0.0 && q < 1.0) {
                    return Err(Error::InvalidParameter(format!("ratio q = {q} not in (0, 1)")));
                }
                (q * n as f64).round() as usize
            }
        };
        if p < 2 || p >= n {
            return Err(Error::InvalidParameter(format!("need 2 <= p < n, got p = {p}, n = {n}")));
        }
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoverageDesign {
    pub case: CovarianceCase,
    pub psi: f64,
    pub dimension: Dimension,
    pub n: usize,
    pub distribution: ComponentDistribution,
    pub reps: usize,
    pub level: f64,
    pub seed: u64,
}

/// One replication.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Replicate {
    pub psi_hat: f64,
    pub psi_bc: f64,
    pub lower: f64,
    pub upper: f64,
    pub covered: bool,
    pub z: f64,
    pub kappa_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub design: CoverageDesign,
    pub p: usize,
    pub phi: f64,
    pub coverage_pct: f64,
    pub avg_length: f64,
    /// Binomial standard error of `coverage_pct`, in percentage points.
    pub mc_stderr: f64,
    pub mean_psi_hat: f64,
    pub mean_psi_bc: f64,
    pub runtime_secs: f64,
    pub warnings: Vec<String>,
}

/// Resolves `(p, φ)` for a design.
pub fn design_point(design: &CoverageDesign) -> Result<(usize, f64)> {
    if design.reps == 0 {
        return Err(Error::InvalidParameter("need at least one replication".into()));
    }
    let p = design.dimension.resolve(design.n)?;
    let phi = solve_phi_for_psi(design.case, p, design.psi)?;
    Ok((p, phi))
}

/// All replications in order.
pub fn run_replicates(design: &CoverageDesign) -> Result<Vec<Replicate>> {
    let (p, phi) = design_point(design)?;
    let sampler = IcmSampler::new(&SigmaSpec::new(design.case, phi, p)?, design.distribution)?;
    (0..design.reps as u64)
        .into_par_iter()
        .map(|r| {
            let data = sampler.sample(design.n, &mut stream_rng(design.seed, r))?;
            let est = full_estimate(&data)?;
            let ci = estimate_ci(&est, design.level)?;
            Ok(Replicate {
                psi_hat: est.psi_hat,
                psi_bc: est.psi_bc,
                lower: ci.lower,
                upper: ci.upper,
                covered: ci.contains(design.psi),
                z: z_from_log_complement(est.log_complement, design.n, p)?,
                kappa_hat: est.kappa_hat,
            })
        })
        .collect()
}

pub fn run_coverage(design: &CoverageDesign) -> Result<CoverageReport> {
    let start = Instant::now();
    let (p, phi) = design_point(design)?;
    let mut warnings = Vec::new();
    if !design.distribution.has_finite_fourth_moment() {
        warnings.push(format!(
            "{:?} components have no finite fourth moment; the asymptotic interval is not justified",
            design.distribution
        ));
    }
    let reps = run_replicates(design)?;
    let k = reps.len() as f64;
    let hits = reps.iter().filter(|r| r.covered).count() as f64;
    let cover = hits / k;
    let mean = |f: fn(&Replicate) -> f64| reps.iter().map(f).sum::<f64>() / k;
    Ok(CoverageReport {
        design: *design,
        p,
        phi,
        coverage_pct: 100.0 * cover,
        avg_length: mean(|r| r.upper - r.lower),
        mc_stderr: 100.0 * (cover * (1.0 - cover) / k).sqrt(),
        mean_psi_hat: mean(|r| r.psi_hat),
        mean_psi_bc: mean(|r| r.psi_bc),
        runtime_secs: start.elapsed().as_secs_f64(),
        warnings,
    })
}

/// Type-I error of the two-sided asymptotic test over null replications.
pub fn null_rejection_rate(replicates: &[Replicate], alpha: f64) -> f64 {
    let rejected = replicates.iter().filter(|r| z_test_pvalue(r.z).p_value < alpha).count();
    rejected as f64 / replicates.len() as f64
}
