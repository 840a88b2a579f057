//! Independent component model sampler.
//!
//! Rows are drawn as `xᵢ = Σ^{1/2} yᵢ`, where `yᵢ` has independent
//! components standardized to mean 0 and variance 1. Σ comes from one of
//! three templates (AR(1), compound symmetry, 1-dependent band), each with
//! unit diagonal, so Σ is also the population correlation matrix.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::coefficient::psi_from_correlation;
use crate::error::{Error, Result};
use crate::linalg::{correlation_from_cov, log_det_sym, sqrt_psd, CorrelationMatrix, DataMatrix, SymmetricMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovarianceCase {
    /// `σᵢⱼ = φ^{|i−j|}`
    Autoregressive,
    /// `Σ = (1 − φ) I + φ 11ᵀ`
    CompoundSymmetry,
    /// `σᵢᵢ = 1`, `σᵢⱼ = φ` for `|i − j| = 1`, zero otherwise
    MDependent,
}

impl CovarianceCase {
    pub const ALL: [CovarianceCase; 3] =
        [CovarianceCase::Autoregressive, CovarianceCase::CompoundSymmetry, CovarianceCase::MDependent];

    /// Supremum of the nonnegative φ for which Σ is positive semidefinite.
    ///
    /// For the band matrix the eigenvalues are `1 + 2φ cos(kπ/(p+1))`, so
    /// the bound is `1 / (2 cos(π/(p+1)))`, slightly above 1/2.
    pub fn phi_upper_bound(self, p: usize) -> f64 {
        match self {
            CovarianceCase::Autoregressive | CovarianceCase::CompoundSymmetry => 1.0,
            CovarianceCase::MDependent => 1.0 / (2.0 * (std::f64::consts::PI / (p as f64 + 1.0)).cos()),
        }
    }

    fn phi_lower_bound(self, p: usize) -> f64 {
        match self {
            CovarianceCase::Autoregressive => -1.0,
            CovarianceCase::CompoundSymmetry => -1.0 / (p as f64 - 1.0),
            CovarianceCase::MDependent => -self.phi_upper_bound(p),
        }
    }

    fn matrix(self, phi: f64, p: usize) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| {
            let d = i.abs_diff(j);
            match (self, d) {
                (_, 0) => 1.0,
                (CovarianceCase::Autoregressive, d) => phi.powi(d as i32),
                (CovarianceCase::CompoundSymmetry, _) => phi,
                (CovarianceCase::MDependent, 1) => phi,
                (CovarianceCase::MDependent, _) => 0.0,
            }
        })
    }
}

/// A covariance template with its parameter and dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaSpec {
    pub case: CovarianceCase,
    pub phi: f64,
    pub p: usize,
}

impl SigmaSpec {
    pub fn new(case: CovarianceCase, phi: f64, p: usize) -> Result<Self> {
        if p < 2 {
            return Err(Error::Dimension(format!("need p >= 2, got {p}")));
        }
        let (lo, hi) = (case.phi_lower_bound(p), case.phi_upper_bound(p));
        let open_lower = matches!(case, CovarianceCase::CompoundSymmetry);
        let ok = phi.is_finite() && phi <= hi && if open_lower { phi > lo } else { phi >= lo };
        if !ok {
            return Err(Error::InvalidParameter(format!(
                "phi = {phi} outside the valid range for {case:?} with p = {p}"
            )));
        }
        Ok(Self { case, phi, p })
    }

    /// Σ for this spec, after checking that its smallest eigenvalue is ≥ −1e-10.
    pub fn build_sigma(&self) -> Result<SymmetricMatrix> {
        build_sigma(self)
    }

    /// Population ψ of Σ.
    pub fn psi(&self) -> Result<f64> {
        Ok(psi_from_correlation(&CorrelationMatrix::new(self.case.matrix(self.phi, self.p))?)?.value)
    }
}

pub fn build_sigma(spec: &SigmaSpec) -> Result<SymmetricMatrix> {
    let sigma = SymmetricMatrix::new(spec.case.matrix(spec.phi, spec.p))?;
    let min = sigma.eigenvalues()[0];
    if min < -1e-10 {
        return Err(Error::InvalidParameter(format!(
            "{:?} with phi = {} is not positive semidefinite (min eigenvalue {min:e})",
            spec.case, spec.phi
        )));
    }
    Ok(sigma)
}

fn psi_of_phi(case: CovarianceCase, p: usize, phi: f64) -> f64 {
    let ld = log_det_sym(&case.matrix(phi, p));
    if ld == f64::NEG_INFINITY || ld.is_nan() {
        return 1.0;
    }
    (-(2.0 * ld / p as f64).exp_m1()).clamp(0.0, 1.0).sqrt()
}

/// Nonnegative φ whose Σ has the given ψ, found by bisection on the
/// increasing map φ ↦ ψ.
pub fn solve_phi_for_psi(case: CovarianceCase, p: usize, target_psi: f64) -> Result<f64> {
    if p < 2 {
        return Err(Error::Dimension(format!("need p >= 2, got {p}")));
    }
    if !(target_psi > 0.0 && target_psi < 1.0) {
        return Err(Error::InvalidParameter(format!("target psi {target_psi} not in (0, 1)")));
    }
    let (mut lo, mut hi) = (0.0, case.phi_upper_bound(p));
    let mut best_below = 0.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let psi = psi_of_phi(case, p, mid);
        if (psi - target_psi).abs() <= 1e-13 {
            return Ok(mid);
        }
        if psi < target_psi {
            lo = mid;
            best_below = best_below.max(psi);
        } else {
            hi = mid;
        }
    }
    let phi = 0.5 * (lo + hi);
    if (psi_of_phi(case, p, phi) - target_psi).abs() <= 1e-10 {
        return Ok(phi);
    }
    Err(Error::UnreachableTarget { target: target_psi, max_achievable: best_below })
}

/// Marginal law of the independent components before mixing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComponentDistribution {
    StandardNormal,
    Beta66,
    T6,
    /// Infinite fourth moment; outside the scope of the asymptotic theory.
    T4,
    /// Components `1..=⌈p/2⌉` are t(6), the rest beta(6, 6).
    HalfT6HalfBeta66,
}

impl ComponentDistribution {
    /// Average fourth moment κ of the standardized components, if finite.
    pub fn kappa(self, p: usize) -> Option<f64> {
        match self {
            ComponentDistribution::StandardNormal => Some(3.0),
            ComponentDistribution::Beta66 => Some(2.6),
            ComponentDistribution::T6 => Some(6.0),
            ComponentDistribution::T4 => None,
            ComponentDistribution::HalfT6HalfBeta66 => {
                let t = p.div_ceil(2) as f64;
                Some((6.0 * t + 2.6 * (p as f64 - t)) / p as f64)
            }
        }
    }

    pub fn has_finite_fourth_moment(self) -> bool {
        self.kappa(2).is_some()
    }

    fn marginals(self, p: usize) -> Vec<Marginal> {
        (0..p)
            .map(|j| match self {
                ComponentDistribution::StandardNormal => Marginal::Normal,
                ComponentDistribution::Beta66 => Marginal::beta66(),
                ComponentDistribution::T6 => Marginal::t(6.0),
                ComponentDistribution::T4 => Marginal::t(4.0),
                ComponentDistribution::HalfT6HalfBeta66 => {
                    if j < p.div_ceil(2) {
                        Marginal::t(6.0)
                    } else {
                        Marginal::beta66()
                    }
                }
            })
            .collect()
    }
}

/// A standardized marginal: `(raw − shift) · scale`.
#[derive(Debug, Clone, Copy)]
enum Marginal {
    Normal,
    Beta { dist: Beta<f64>, shift: f64, scale: f64 },
    T { dist: StudentT<f64>, scale: f64 },
}

impl Marginal {
    fn beta66() -> Self {
        // mean 1/2, variance ab/((a+b)²(a+b+1)) = 1/52
        Marginal::Beta { dist: Beta::new(6.0, 6.0).expect("valid beta"), shift: 0.5, scale: 52f64.sqrt() }
    }

    fn t(dof: f64) -> Self {
        // variance ν/(ν−2)
        Marginal::T { dist: StudentT::new(dof).expect("valid t"), scale: ((dof - 2.0) / dof).sqrt() }
    }

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Marginal::Normal => Distribution::<f64>::sample(&StandardNormal, rng),
            Marginal::Beta { dist, shift, scale } => (dist.sample(rng) - shift) * scale,
            Marginal::T { dist, scale } => dist.sample(rng) * scale,
        }
    }
}

/// Reusable sampler holding `Σ^{1/2}` for repeated draws.
#[derive(Debug, Clone)]
pub struct IcmSampler {
    spec: SigmaSpec,
    dist: ComponentDistribution,
    root: Option<DMatrix<f64>>,
    marginals: Vec<Marginal>,
}

impl IcmSampler {
    pub fn new(spec: &SigmaSpec, dist: ComponentDistribution) -> Result<Self> {
        let sigma = build_sigma(spec)?;
        let identity = sigma.matrix() == &DMatrix::identity(spec.p, spec.p);
        let root = if identity { None } else { Some(sqrt_psd(&sigma)?.into_matrix()) };
        Ok(Self { spec: *spec, dist, root, marginals: dist.marginals(spec.p) })
    }

    pub fn spec(&self) -> &SigmaSpec {
        &self.spec
    }

    pub fn distribution(&self) -> ComponentDistribution {
        self.dist
    }

    /// Draws `n` rows. Components are drawn row by row, left to right.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<DataMatrix> {
        let p = self.spec.p;
        let mut y = DMatrix::zeros(n, p);
        for i in 0..n {
            for (j, m) in self.marginals.iter().enumerate() {
                y[(i, j)] = m.sample(rng);
            }
        }
        // rows are xᵢᵀ = yᵢᵀ Σ^{1/2} since the root is symmetric
        let x = match &self.root {
            Some(root) => y * root,
            None => y,
        };
        DataMatrix::new(x)
    }
}

/// Draws `n` rows from the model with a generator seeded by `seed`.
pub fn sample_icm(n: usize, spec: &SigmaSpec, dist: ComponentDistribution, seed: u64) -> Result<DataMatrix> {
    IcmSampler::new(spec, dist)?.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// Independent generator for replication `index` under `seed`: ChaCha8 with
/// the key derived from `seed` and the 64-bit stream id set to `index`.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Correlation matrix of a Wishart draw with `p + 3` degrees of freedom.
pub fn random_correlation_matrix<R: Rng + ?Sized>(p: usize, rng: &mut R) -> CorrelationMatrix {
    let g = DMatrix::<f64>::from_fn(p, p + 3, |_, _| StandardNormal.sample(rng));
    let w = SymmetricMatrix::symmetrized(&g * g.transpose());
    correlation_from_cov(&w).expect("Wishart draws have a positive diagonal")
}
