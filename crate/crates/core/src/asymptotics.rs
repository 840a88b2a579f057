//! Plug-in asymptotics for `log(1 − ψ̂²)`.
//!
//! Under the independent component model with finite fourth moments,
//!
//! ```text
//! [log(1 − ψ̂²) − log(1 − ψ²) − δ_ν] / σ_ν  →  N(0, 1)
//! ```
//!
//! with
//!
//! ```text
//! δ_ν  = 2[1 − n/p + 3/(2p)] log(1 − p/n) − 2 + 2/n + (κ − 3)(τ/p − 1)/n
//! σ_ν² = −8[log(1 − p/n)/p² + 1/(np)] + 8η/(np²)
//! ```
//!
//! where κ is the average fourth moment of the components,
//! τ = ‖V^{1/2} ∗ V^{1/2}‖²_F and η = ‖V − I‖²_F. This module estimates κ, τ
//! and η from data, and builds the bias-corrected estimator, the asymptotic
//! confidence interval and the independence z-test on top of them.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coefficient::PsiValue;
use crate::error::{Error, Result};
use crate::linalg::{
    correlation_from_cov, frobenius_norm_sq, hadamard, log_det_psd, sample_mean_cov, sqrt_psd, CorrelationMatrix,
    DataMatrix, SymmetricMatrix,
};
use crate::normal;

/// Default confidence level.
pub const DEFAULT_LEVEL: f64 = 0.95;

/// Point estimates and every plug-in quantity behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiEstimate {
    pub n: usize,
    pub p: usize,
    pub psi_hat: f64,
    pub psi_bc: f64,
    pub kappa_hat: f64,
    pub tau_hat: f64,
    pub eta_hat: f64,
    pub delta_hat: f64,
    pub sigma_hat: f64,
    /// `log(1 − ψ̂²) = (2/p) log det V̂`, kept at full precision.
    pub log_complement: f64,
    pub flags: EstimateFlags,
}

/// Diagnostics raised while estimating.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateFlags {
    /// V̂ was numerically singular and ψ̂ was set to 1.
    pub singular: bool,
    /// `3 + (ν̂ − 2ς̂)/ω̂` fell below 1.
    pub kappa_clamped: bool,
    pub eta_clamped: bool,
    /// The bias-correction bracket left `[0, 1]`.
    pub bc_clamped: bool,
}

impl PsiEstimate {
    /// `[log(1 − ψ̂²) − log(1 − ψ²) − δ̂_ν] / σ̂_ν` for a hypothesised ψ.
    pub fn studentized(&self, psi: f64) -> f64 {
        let target = (-psi * psi).ln_1p();
        (self.log_complement - target - self.delta_hat) / self.sigma_hat
    }

    /// Bias-corrected estimate on the `log(1 − ψ²)` scale.
    pub fn corrected_log_complement(&self) -> f64 {
        self.log_complement - self.delta_hat
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    /// An endpoint bracket had to be clamped into `[0, 1]`.
    pub clamped: bool,
}

impl ConfidenceInterval {
    pub fn contains(&self, psi: f64) -> bool {
        self.lower <= psi && psi <= self.upper
    }

    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub z: f64,
    pub p_value: f64,
    /// ψ̂ was 1, so `Z = −∞` and the p-value is reported as 0.
    pub sentinel: bool,
}

/// How κ̂ treats the column means.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centering {
    /// Subtract each column's sample mean before forming ν̂ and ω̂.
    #[default]
    SampleMean,
    /// Use the raw values; only valid if the data are known to have zero mean.
    AssumeZeroMean,
}

fn clamp_unit(x: f64) -> (f64, bool) {
    let c = x.clamp(0.0, 1.0);
    (c, c != x)
}

fn check_regime(n: usize, p: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::Dimension(format!("need p >= 2, got {p}")));
    }
    if p >= n {
        return Err(Error::Domain(format!("the asymptotic formulas need p < n (got p = {p}, n = {n})")));
    }
    Ok(())
}

/// `−log(1 − x) − x` for `x ∈ [0, 1)`, accurate for small `x`.
fn log_excess(x: f64) -> f64 {
    if x < 0.01 {
        // x²/2 + x³/3 + … ; 12 terms reach double precision at x = 0.01
        let mut term = x;
        let mut sum = 0.0;
        for k in 2..=14 {
            term *= x;
            sum += term / k as f64;
        }
        sum
    } else {
        -(-x).ln_1p() - x
    }
}

/// τ̂ = tr[(V̂^{1/2} ∗ V̂^{1/2})²] − (1/n)[tr(V̂^{1/2} ∗ V̂^{1/2})]².
pub fn estimate_tau(v_hat: &CorrelationMatrix, n: usize) -> Result<f64> {
    let h = hadamard_square_of_root(v_hat.as_symmetric())?;
    // h is symmetric, so tr(h²) = ‖h‖²_F
    Ok(frobenius_norm_sq(&h) - h.trace().powi(2) / n as f64)
}

/// Population τ = ‖V^{1/2} ∗ V^{1/2}‖²_F.
pub fn population_tau(v: &CorrelationMatrix) -> Result<f64> {
    Ok(frobenius_norm_sq(&hadamard_square_of_root(v.as_symmetric())?))
}

fn hadamard_square_of_root(v: &SymmetricMatrix) -> Result<DMatrix<f64>> {
    let root = sqrt_psd(v)?;
    hadamard(root.matrix(), root.matrix())
}

/// η̂ = tr[(V̂ − I)²] − (1/n)[tr(V̂ − I)]², clamped at zero.
///
/// The trace term vanishes for a unit-diagonal matrix, leaving ‖V̂ − I‖²_F.
pub fn estimate_eta(v_hat: &CorrelationMatrix, n: usize) -> f64 {
    estimate_eta_flagged(v_hat, n).0
}

fn estimate_eta_flagged(v_hat: &CorrelationMatrix, n: usize) -> (f64, bool) {
    let p = v_hat.dim();
    let d = v_hat.matrix() - DMatrix::identity(p, p);
    let raw = frobenius_norm_sq(&d) - d.trace().powi(2) / n as f64;
    (raw.max(0.0), raw < 0.0)
}

/// Population η = ‖V − I‖²_F.
pub fn population_eta(v: &CorrelationMatrix) -> f64 {
    frobenius_norm_sq(&(v.matrix() - DMatrix::identity(v.dim(), v.dim())))
}

/// κ̂ = max(3 + (ν̂ − 2ς̂)/ω̂, 1), with columns centered at their sample means.
pub fn estimate_kappa(data: &DataMatrix) -> Result<f64> {
    let (_, cov) = sample_mean_cov(data)?;
    Ok(kappa_parts(data, &cov, Centering::SampleMean)?.0)
}

pub fn estimate_kappa_with(data: &DataMatrix, centering: Centering) -> Result<f64> {
    let (_, cov) = sample_mean_cov(data)?;
    Ok(kappa_parts(data, &cov, centering)?.0)
}

fn kappa_parts(data: &DataMatrix, cov: &SymmetricMatrix, centering: Centering) -> Result<(f64, bool)> {
    let (n, p) = (data.nrows(), data.ncols());
    if n < 3 {
        return Err(Error::InsufficientSample { n });
    }
    let nf = n as f64;
    let mut row_sq = vec![0.0; n];
    let mut omega = 0.0;
    for j in 0..p {
        let col = data.column(j);
        let mu = match centering {
            Centering::SampleMean => col.iter().sum::<f64>() / nf,
            Centering::AssumeZeroMean => 0.0,
        };
        let mut second = 0.0;
        for (acc, &x) in row_sq.iter_mut().zip(col) {
            let c = (x - mu) * (x - mu);
            *acc += c;
            second += c;
        }
        omega += (second / nf).powi(2);
    }
    if omega <= 0.0 {
        return Err(Error::NumericDegeneracy("ω̂ = 0 in the κ estimator".into()));
    }
    let mean_sq = row_sq.iter().sum::<f64>() / nf;
    let nu = row_sq.iter().map(|s| (s - mean_sq).powi(2)).sum::<f64>() / (nf - 1.0);
    let s = cov.matrix();
    let varsigma = frobenius_norm_sq(s) - s.trace().powi(2) / nf;
    let raw = 3.0 + (nu - 2.0 * varsigma) / omega;
    Ok((raw.max(1.0), raw < 1.0))
}

/// Asymptotic bias δ_ν of `log(1 − ψ̂²)`.
pub fn delta_nu(n: usize, p: usize, kappa: f64, tau: f64) -> Result<f64> {
    check_regime(n, p)?;
    let (nf, pf) = (n as f64, p as f64);
    let x = pf / nf;
    // 2[1 − n/p + 3/(2p)] log(1−x) − 2 rearranged as
    // 2[1 + 3/(2p)] log(1−x) + 2[−log(1−x)/x − 1], the second bracket being log_excess(x)/x
    let main = 2.0 * (1.0 + 1.5 / pf) * (-x).ln_1p() + 2.0 * log_excess(x) / x;
    Ok(main + 2.0 / nf + (kappa - 3.0) * (tau / pf - 1.0) / nf)
}

/// Asymptotic standard deviation σ_ν of `log(1 − ψ̂²)`.
pub fn sigma_nu(n: usize, p: usize, eta: f64) -> Result<f64> {
    check_regime(n, p)?;
    let (nf, pf) = (n as f64, p as f64);
    // −8[log(1−x)/p² + 1/(np)] = 8 log_excess(x) / p² since 1/(np) = x/p²
    let var = 8.0 * log_excess(pf / nf) / (pf * pf) + 8.0 * eta / (nf * pf * pf);
    if !(var > 0.0) || !var.is_finite() {
        return Err(Error::NumericDegeneracy(format!("σ²_ν = {var} for n = {n}, p = {p}")));
    }
    Ok(var.sqrt())
}

/// ψ̂_bc = [1 − (1 − ψ̂²) exp(−δ̂_ν)]^{1/2}, bracket clamped into `[0, 1]`.
pub fn bias_corrected_psi(psi_hat: f64, delta_hat: f64) -> f64 {
    bias_corrected_flagged(psi_hat, delta_hat).0
}

fn bias_corrected_flagged(psi_hat: f64, delta_hat: f64) -> (f64, bool) {
    if delta_hat == 0.0 {
        return (psi_hat, false);
    }
    let (b, clamped) = clamp_unit(1.0 - (1.0 - psi_hat * psi_hat) * (-delta_hat).exp());
    (b.sqrt(), clamped)
}

/// Same correction applied on the log scale, which keeps precision when ψ̂ is tiny.
fn bias_corrected_from_log(log_complement: f64, delta_hat: f64) -> (f64, bool) {
    let (b, clamped) = clamp_unit(-(log_complement - delta_hat).exp_m1());
    (b.sqrt(), clamped)
}

/// Asymptotic interval
/// `L = [1 − (1 − ψ̂²_bc) exp(z σ̂)]^{1/2}`, `U = [1 − (1 − ψ̂²_bc) exp(−z σ̂)]^{1/2}`.
pub fn asymptotic_ci(psi_bc: f64, sigma_hat: f64, level: f64) -> Result<ConfidenceInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level {level} not in (0, 1)")));
    }
    if !(sigma_hat >= 0.0) {
        return Err(Error::InvalidParameter(format!("σ̂ = {sigma_hat} must be nonnegative")));
    }
    if sigma_hat == 0.0 {
        return Ok(ConfidenceInterval { lower: psi_bc, upper: psi_bc, level, clamped: false });
    }
    let z = normal::two_sided_critical(level);
    let comp = 1.0 - psi_bc * psi_bc;
    let (lo, c1) = clamp_unit(1.0 - comp * (z * sigma_hat).exp());
    let (hi, c2) = clamp_unit(1.0 - comp * (-z * sigma_hat).exp());
    // rounding near 0 or 1 can otherwise put ψ̂_bc just outside
    let (lower, upper) = (lo.sqrt().min(psi_bc), hi.sqrt().max(psi_bc));
    Ok(ConfidenceInterval { lower, upper, level, clamped: c1 || c2 })
}

/// Null-calibrated test statistic for `H₀: ψ = 0`:
///
/// ```text
/// Z = {log(1 − ψ̂²) − 2[1 − n/p + 3/(2p)] log(1 − p/n) + 2 − 2/n}
///     / √{−8[log(1 − p/n)/p² + 1/(np)]}
/// ```
///
/// `ψ̂ = 1` gives `Z = −∞`.
pub fn z_statistic(psi_hat: f64, n: usize, p: usize) -> Result<f64> {
    z_from_log_complement((-psi_hat * psi_hat).ln_1p(), n, p)
}

/// [`z_statistic`] taking `log(1 − ψ̂²)` directly.
pub fn z_from_log_complement(log_complement: f64, n: usize, p: usize) -> Result<f64> {
    Ok(NullCalibration::new(n, p)?.z(log_complement))
}

/// Precomputed centering and scale of `Z` for fixed `(n, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullCalibration {
    pub n: usize,
    pub p: usize,
    center: f64,
    scale: f64,
}

impl NullCalibration {
    pub fn new(n: usize, p: usize) -> Result<Self> {
        check_regime(n, p)?;
        let (nf, pf) = (n as f64, p as f64);
        let x = pf / nf;
        let l = (-x).ln_1p();
        // the centering term of the numerator, in the cancellation-free form
        let center = 2.0 * (1.0 + 1.5 / pf) * l + 2.0 * log_excess(x) / x + 2.0 / nf;
        let scale = (8.0 * log_excess(x)).sqrt() / pf;
        if !(scale > 0.0) {
            return Err(Error::NumericDegeneracy("null scale of Z is zero".into()));
        }
        Ok(Self { n, p, center, scale })
    }

    pub fn z(&self, log_complement: f64) -> f64 {
        (log_complement - self.center) / self.scale
    }

    /// `Z` from `log det V̂`.
    pub fn z_from_log_det(&self, log_det: f64) -> f64 {
        self.z(2.0 * log_det / self.p as f64)
    }
}

/// Two-sided p-value `2[1 − Φ(|z|)]`.
pub fn z_test_pvalue(z: f64) -> TestResult {
    if z.is_infinite() {
        return TestResult { z, p_value: 0.0, sentinel: true };
    }
    TestResult { z, p_value: normal::two_sided_p(z), sentinel: false }
}

/// Options for [`full_estimate_with`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EstimateOptions {
    pub centering: Centering,
}

/// ψ̂, κ̂, τ̂, η̂, δ̂_ν, σ̂_ν and ψ̂_bc for one sample.
pub fn full_estimate(data: &DataMatrix) -> Result<PsiEstimate> {
    full_estimate_with(data, EstimateOptions::default())
}

pub fn full_estimate_with(data: &DataMatrix, options: EstimateOptions) -> Result<PsiEstimate> {
    let (n, p) = (data.nrows(), data.ncols());
    check_regime(n, p)?;
    let (_, cov) = sample_mean_cov(data)?;
    let v_hat = correlation_from_cov(&cov)?;

    let log_det = log_det_psd(v_hat.as_symmetric());
    let singular = log_det == f64::NEG_INFINITY;
    let log_complement = 2.0 * log_det / p as f64;
    let psi_hat = PsiValue::from_log_complement(log_complement).value;

    let (kappa_hat, kappa_clamped) = kappa_parts(data, &cov, options.centering)?;
    let tau_hat = estimate_tau(&v_hat, n)?;
    let (eta_hat, eta_clamped) = estimate_eta_flagged(&v_hat, n);
    let delta_hat = delta_nu(n, p, kappa_hat, tau_hat)?;
    let sigma_hat = sigma_nu(n, p, eta_hat)?;
    let (psi_bc, bc_clamped) = if singular { (1.0, false) } else { bias_corrected_from_log(log_complement, delta_hat) };

    Ok(PsiEstimate {
        n,
        p,
        psi_hat,
        psi_bc,
        kappa_hat,
        tau_hat,
        eta_hat,
        delta_hat,
        sigma_hat,
        log_complement,
        flags: EstimateFlags { singular, kappa_clamped, eta_clamped, bc_clamped },
    })
}

impl PsiValue {
    pub(crate) fn from_log_complement(lc: f64) -> Self {
        if lc == f64::NEG_INFINITY {
            return Self { value: 1.0, singular: true };
        }
        Self { value: (-lc.exp_m1()).clamp(0.0, 1.0).sqrt(), singular: false }
    }
}

/// Asymptotic interval from a full estimate.
pub fn estimate_ci(est: &PsiEstimate, level: f64) -> Result<ConfidenceInterval> {
    asymptotic_ci(est.psi_bc, est.sigma_hat, level)
}

/// Asymptotic independence test from a full estimate.
pub fn estimate_test(est: &PsiEstimate) -> Result<TestResult> {
    Ok(z_test_pvalue(z_from_log_complement(est.log_complement, est.n, est.p)?))
}
