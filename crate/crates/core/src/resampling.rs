//! Permutation and bootstrap inference.
//!
//! The null p-value resamples each column on its own, which breaks the
//! dependence between columns and keeps the marginals. The bootstrap
//! interval resamples whole rows and so keeps the dependence.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::asymptotics::{full_estimate, ConfidenceInterval};
use crate::datagen::stream_rng;
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;
use crate::statistic::{observed, standardize_in_place, NullStatistic};

/// Minimum number of replications a plan accepts.
pub const MIN_REPLICATIONS: usize = 100;

/// Redraws allowed when a bootstrap resample has a constant column.
pub const MAX_REDRAWS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ResampleMethod {
    /// Without replacement within each column.
    Permutation,
    /// With replacement within each column.
    Bootstrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResamplePlan {
    pub method: ResampleMethod,
    pub replications: usize,
    pub seed: u64,
}

impl ResamplePlan {
    pub fn new(method: ResampleMethod, replications: usize, seed: u64) -> Result<Self> {
        if replications < MIN_REPLICATIONS {
            return Err(Error::InvalidParameter(format!(
                "need at least {MIN_REPLICATIONS} replications, got {replications}"
            )));
        }
        Ok(Self { method, replications, seed })
    }
}

/// Outcome of a null resampling run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullResample {
    pub p_value: f64,
    pub z1_abs: f64,
    /// Number of resamples with `|Z_b| ≥ |Z₁|`.
    pub exceedances: usize,
    pub replications: usize,
}

/// `(1 + #{|Z_b| ≥ |Z₁|}) / (B + 1)`.
pub fn pvalue_from_null(z1_abs: f64, null_abs_z: &[f64]) -> f64 {
    let count = null_abs_z.iter().filter(|&&z| z >= z1_abs).count();
    (1 + count) as f64 / (null_abs_z.len() + 1) as f64
}

fn resample_column(dst: &mut [f64], src: &[f64], method: ResampleMethod, rng: &mut ChaCha8Rng) {
    match method {
        ResampleMethod::Permutation => {
            dst.copy_from_slice(src);
            dst.shuffle(rng);
        }
        ResampleMethod::Bootstrap => {
            let n = src.len();
            for d in dst.iter_mut() {
                *d = src[rng.random_range(0..n)];
            }
        }
    }
}

/// One null replicate of `|Z|`, drawn from stream `index`.
///
/// `base` holds standardized columns. Permutations keep the standardization;
/// bootstrap draws are re-standardized and redrawn if a column comes out
/// constant.
fn null_replicate(
    stat: &NullStatistic,
    base: &DMatrix<f64>,
    scratch: &mut DMatrix<f64>,
    method: ResampleMethod,
    seed: u64,
    index: u64,
) -> Result<f64> {
    let mut rng = stream_rng(seed, index);
    let p = base.ncols();
    for _ in 0..=MAX_REDRAWS {
        // the first column can stay fixed: a common row permutation leaves V̂ unchanged
        let start = if method == ResampleMethod::Permutation { 1 } else { 0 };
        scratch.column_mut(0).copy_from(&base.column(0));
        for j in start..p {
            let src = base.column(j);
            let mut dst = scratch.column_mut(j);
            resample_column(dst.as_mut_slice(), src.as_slice(), method, &mut rng);
        }
        match method {
            ResampleMethod::Permutation => return Ok(stat.abs_z_standardized(scratch)),
            ResampleMethod::Bootstrap => match standardize_in_place(scratch) {
                Ok(()) => return Ok(stat.abs_z_standardized(scratch)),
                Err(Error::DegenerateVariable { .. }) => continue,
                Err(e) => return Err(e),
            },
        }
    }
    Err(Error::ResampleExhausted { retries: MAX_REDRAWS })
}

/// `|Z_b|` for `b = 0..B`, each from its own random stream.
pub fn null_distribution(data: &DataMatrix, plan: &ResamplePlan) -> Result<Vec<f64>> {
    let (stat, base, _) = observed(data)?;
    null_distribution_standardized(&stat, &base, plan)
}

pub(crate) fn null_distribution_standardized(
    stat: &NullStatistic,
    base: &DMatrix<f64>,
    plan: &ResamplePlan,
) -> Result<Vec<f64>> {
    (0..plan.replications as u64)
        .into_par_iter()
        .map_init(|| base.clone(), |scratch, b| null_replicate(stat, base, scratch, plan.method, plan.seed, b))
        .collect()
}

/// The data behind replicate `index` of a permutation plan with `seed`.
pub fn permutation_replicate(data: &DataMatrix, seed: u64, index: u64) -> Result<DataMatrix> {
    let mut rng = stream_rng(seed, index);
    let mut out = data.clone();
    for j in 1..data.ncols() {
        out.column_mut(j).shuffle(&mut rng);
    }
    Ok(out)
}

/// Resampling p-value for `H₀: ψ = 0`.
pub fn null_resample_pvalue(data: &DataMatrix, plan: &ResamplePlan) -> Result<f64> {
    Ok(null_resample(data, plan)?.p_value)
}

pub fn null_resample(data: &DataMatrix, plan: &ResamplePlan) -> Result<NullResample> {
    if data.ncols() >= data.nrows() {
        return Err(Error::Domain(format!("need p < n, got p = {}, n = {}", data.ncols(), data.nrows())));
    }
    let (stat, base, z1) = observed(data)?;
    let null = null_distribution_standardized(&stat, &base, plan)?;
    let exceedances = null.iter().filter(|&&z| z >= z1).count();
    Ok(NullResample {
        p_value: (1 + exceedances) as f64 / (plan.replications + 1) as f64,
        z1_abs: z1,
        exceedances,
        replications: plan.replications,
    })
}

/// Bootstrap interval with the per-resample values it was built from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapInterval {
    pub interval: ConfidenceInterval,
    /// `log(1 − ψ̂_b²) − δ̂_b`, in resample order.
    pub replicates: Vec<f64>,
    /// `(log(1 − ψ̂_b²) − δ̂_b − log(1 − ψ̂_bc²)) / σ̂_b`, in resample order.
    pub studentized: Vec<f64>,
    /// Resamples that had to be redrawn because of a constant column.
    pub redraws: usize,
}

/// Row bootstrap percentile interval for ψ built on the `log(1 − ψ²)` scale.
pub fn bootstrap_ci(data: &DataMatrix, replications: usize, level: f64, seed: u64) -> Result<ConfidenceInterval> {
    Ok(bootstrap_ci_detailed(data, replications, level, seed)?.interval)
}

pub fn bootstrap_ci_detailed(
    data: &DataMatrix,
    replications: usize,
    level: f64,
    seed: u64,
) -> Result<BootstrapInterval> {
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidParameter(format!("confidence level {level} not in (0, 1)")));
    }
    if replications < 2 {
        return Err(Error::InvalidParameter(format!("need at least 2 replications, got {replications}")));
    }
    if replications < 1000 {
        log::warn!("bootstrap interval with only {replications} replications");
    }
    let center = full_estimate(data)?.corrected_log_complement();
    let x = data.values();
    let (n, p) = (x.nrows(), x.ncols());

    let draws: Vec<(f64, f64, usize)> = (0..replications as u64)
        .into_par_iter()
        .map(|b| {
            let mut rng = stream_rng(seed, b);
            for attempt in 0..=MAX_REDRAWS {
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let resample = DMatrix::from_fn(n, p, |i, j| x[(rows[i], j)]);
                let resample = DataMatrix::new(resample)?;
                match full_estimate(&resample) {
                    Ok(est) => {
                        let v = est.corrected_log_complement();
                        return Ok((v, (v - center) / est.sigma_hat, attempt));
                    }
                    Err(Error::DegenerateVariable { .. }) => continue,
                    Err(e) => return Err(e),
                }
            }
            Err(Error::ResampleExhausted { retries: MAX_REDRAWS })
        })
        .collect::<Result<_>>()?;

    let replicates: Vec<f64> = draws.iter().map(|d| d.0).collect();
    let studentized: Vec<f64> = draws.iter().map(|d| d.1).collect();
    let redraws = draws.iter().map(|d| d.2).sum();

    let mut sorted = replicates.clone();
    sorted.sort_by(f64::total_cmp);
    let alpha = 1.0 - level;
    let lo_log = percentile(&sorted, alpha / 2.0);
    let hi_log = percentile(&sorted, 1.0 - alpha / 2.0);
    let (a, ca) = back_transform(lo_log);
    let (b, cb) = back_transform(hi_log);
    let interval = ConfidenceInterval { lower: a.min(b), upper: a.max(b), level, clamped: ca || cb };
    Ok(BootstrapInterval { interval, replicates, studentized, redraws })
}

/// `ψ = √(1 − eᵛ)`, clamped to `[0, 1]`.
fn back_transform(v: f64) -> (f64, bool) {
    if v.is_nan() {
        return (f64::NAN, false);
    }
    let s = -v.exp_m1();
    if s < 0.0 {
        (0.0, true)
    } else {
        (s.min(1.0).sqrt(), s > 1.0)
    }
}

/// Linear interpolation between order statistics (type 7).
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    let (a, b) = (sorted[lo], sorted[hi]);
    if lo == hi || a == b {
        a
    } else {
        a + (h - lo as f64) * (b - a)
    }
}
