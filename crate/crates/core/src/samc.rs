//! Stochastic approximation Monte Carlo for small permutation p-values.
//!
//! The chain lives on within-column permutations of the observed data. The
//! range of `|Z|` is cut into `m` regions, the last one being `[|Z₁|, ∞)`,
//! and adaptive log-weights `θ` push the chain to spend equal time in each
//! region. The tail probability is then read off the weights.

use nalgebra::DMatrix;
use rand::seq::{index, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::stream_rng;
use crate::error::{Error, Result};
use crate::linalg::DataMatrix;
use crate::statistic::{gram, observed, NullStatistic};

/// Accepted moves between full recomputations of `UᵀU` on the incremental path.
const REFRESH_EVERY: u64 = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamcConfig {
    /// Number of regions.
    pub m: usize,
    /// Gain schedule `γ_t = min(1, t₀/t)`.
    pub t0: f64,
    pub iterations: u64,
    /// Proportion of rows and columns touched by each proposal.
    pub varpi: f64,
    pub seed: u64,
    /// Update `UᵀU` from the moved entries instead of recomputing it.
    pub incremental: bool,
}

impl Default for SamcConfig {
    fn default() -> Self {
        Self { m: 300, t0: 1000.0, iterations: 1_000_000, varpi: 0.2, seed: 0, incremental: false }
    }
}

impl SamcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParameter(format!("need m >= 2 regions, got {}", self.m)));
        }
        if !(self.t0 > 0.0) {
            return Err(Error::InvalidParameter(format!("t0 = {} must be positive", self.t0)));
        }
        if (self.iterations as f64) < self.t0 {
            return Err(Error::InvalidParameter(format!("T = {} must be at least t0 = {}", self.iterations, self.t0)));
        }
        if !(self.varpi > 0.0 && self.varpi <= 1.0) {
            return Err(Error::InvalidParameter(format!("varpi = {} not in (0, 1]", self.varpi)));
        }
        Ok(())
    }
}

/// Equally spaced regions of `|Z|`: `[0, c₁), …, [c_{m−2}, |Z₁|), [|Z₁|, ∞)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    cuts: Vec<f64>,
    z1_abs: f64,
}

impl RegionPartition {
    pub fn m(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn z1_abs(&self) -> f64 {
        self.z1_abs
    }

    /// The `m − 1` cut points in increasing order; the last equals `|Z₁|`.
    pub fn cuts(&self) -> &[f64] {
        &self.cuts
    }

    /// Zero-based region index. A value on a cut belongs to the region above it.
    pub fn region_of(&self, z_abs: f64) -> usize {
        self.cuts.partition_point(|&c| c <= z_abs)
    }
}

pub fn build_regions(z1_abs: f64, m: usize) -> Result<RegionPartition> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("need m >= 2 regions, got {m}")));
    }
    if z1_abs == 0.0 {
        return Err(Error::DegenerateStatistic);
    }
    if !(z1_abs > 0.0 && z1_abs.is_finite()) {
        return Err(Error::NumericDegeneracy(format!("observed |Z| = {z1_abs} cannot be partitioned")));
    }
    let k = (m - 1) as f64;
    let mut cuts: Vec<f64> = (1..m - 1).map(|i| z1_abs * (i as f64 / k)).collect();
    cuts.push(z1_abs);
    Ok(RegionPartition { cuts, z1_abs })
}

/// Number of entries each proposal touches: `(n*, p*)`.
pub fn proposal_sizes(n: usize, p: usize, varpi: f64) -> (usize, usize) {
    let n_star = ((n as f64 * varpi).round() as usize).clamp(2.min(n), n);
    let p_star = ((p as f64 * varpi).round() as usize).clamp(1, p);
    (n_star, p_star)
}

/// A within-column move: the values at `rows` are rearranged so that
/// `rows[k]` receives the value previously at `rows[perm[k]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ColumnMove {
    pub column: usize,
    pub rows: Vec<usize>,
    pub perm: Vec<usize>,
}

pub fn draw_moves<R: Rng + ?Sized>(n: usize, p: usize, varpi: f64, rng: &mut R) -> Vec<ColumnMove> {
    let (n_star, p_star) = proposal_sizes(n, p, varpi);
    index::sample(rng, p, p_star)
        .into_iter()
        .map(|column| {
            let rows = index::sample(rng, n, n_star).into_vec();
            let mut perm: Vec<usize> = (0..n_star).collect();
            perm.shuffle(rng);
            ColumnMove { column, rows, perm }
        })
        .collect()
}

/// Applies a move to one column and returns the values it overwrote.
fn apply_move(col: &mut [f64], mv: &ColumnMove) -> Vec<f64> {
    let old: Vec<f64> = mv.rows.iter().map(|&r| col[r]).collect();
    for (k, &r) in mv.rows.iter().enumerate() {
        col[r] = old[mv.perm[k]];
    }
    old
}

fn restore(col: &mut [f64], mv: &ColumnMove, old: &[f64]) {
    for (&r, &v) in mv.rows.iter().zip(old) {
        col[r] = v;
    }
}

/// One `(nϖ, pϖ)`-out-of-`(n, p)` proposal from `x_t`.
pub fn propose_update<R: Rng + ?Sized>(x_t: &DataMatrix, varpi: f64, rng: &mut R) -> DataMatrix {
    let mut out = x_t.clone();
    for mv in draw_moves(x_t.nrows(), x_t.ncols(), varpi, rng) {
        apply_move(out.column_mut(mv.column), &mv);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamcResult {
    pub p_value: f64,
    pub theta: Vec<f64>,
    /// Visits per region, counting the starting sample.
    pub visit_counts: Vec<u64>,
    /// Regions never visited (`m₀`).
    pub empty_regions: usize,
    pub acceptance_rate: f64,
    pub z1_abs: f64,
    pub iterations: u64,
}

/// `exp(θ_m)(1/m + Δ) / Σ_{nonempty i} exp(θ_i)(1/m + Δ)` with `Δ = m₀ / (m(m − m₀))`.
pub fn pvalue_from_weights(theta: &[f64], visit_counts: &[u64]) -> Result<f64> {
    let m = theta.len();
    if m < 2 || visit_counts.len() != m {
        return Err(Error::Internal("θ and visit counts must have the same length m >= 2".into()));
    }
    let m0 = visit_counts.iter().filter(|&&c| c == 0).count();
    if m0 == m || visit_counts[m - 1] == 0 {
        return Err(Error::Internal("the tail region holds the starting sample but has no visits".into()));
    }
    let mf = m as f64;
    let delta = m0 as f64 / (mf * (m - m0) as f64);
    let weight = 1.0 / mf + delta;
    let shift =
        theta.iter().zip(visit_counts).filter(|(_, &c)| c > 0).map(|(t, _)| *t).fold(f64::NEG_INFINITY, f64::max);
    let den: f64 =
        theta.iter().zip(visit_counts).filter(|(_, &c)| c > 0).map(|(t, _)| (t - shift).exp() * weight).sum();
    Ok((theta[m - 1] - shift).exp() * weight / den)
}

/// `θᵢ += γ(I(i = region) − 1/m)`.
pub fn theta_update(theta: &mut [f64], region: usize, gamma: f64) {
    let step = gamma / theta.len() as f64;
    for t in theta.iter_mut() {
        *t -= step;
    }
    theta[region] += gamma;
}

/// Gram matrix kept in step with `U` through the moved entries only.
struct IncrementalGram {
    g: DMatrix<f64>,
    scratch: DMatrix<f64>,
    since_refresh: u64,
}

impl IncrementalGram {
    fn new(u: &DMatrix<f64>) -> Self {
        let g = gram(u);
        Self { scratch: g.clone(), g, since_refresh: 0 }
    }

    /// Fills `scratch` with the Gram matrix of `u`, which differs from the
    /// current state by `moves` (with `olds` the overwritten values).
    fn propose(&mut self, u: &DMatrix<f64>, moves: &[ColumnMove], olds: &[Vec<f64>]) -> &DMatrix<f64> {
        let p = u.ncols();
        self.scratch.copy_from(&self.g);
        let mut moved = vec![false; p];
        for mv in moves {
            moved[mv.column] = true;
        }
        for (a, mv) in moves.iter().enumerate() {
            let c = mv.column;
            let col_c = u.column(c);
            for k in (0..p).filter(|&k| !moved[k]) {
                let col_k = u.column(k);
                let d: f64 = mv.rows.iter().zip(&olds[a]).map(|(&r, &o)| (col_c[r] - o) * col_k[r]).sum();
                let v = self.g[(c, k)] + d;
                self.scratch[(c, k)] = v;
                self.scratch[(k, c)] = v;
            }
            for mv2 in &moves[a + 1..] {
                let k = mv2.column;
                let v = col_c.dot(&u.column(k));
                self.scratch[(c, k)] = v;
                self.scratch[(k, c)] = v;
            }
        }
        &self.scratch
    }

    fn accept(&mut self, u: &DMatrix<f64>) {
        std::mem::swap(&mut self.g, &mut self.scratch);
        self.since_refresh += 1;
        if self.since_refresh >= REFRESH_EVERY {
            self.g = gram(u);
            self.since_refresh = 0;
        }
    }
}

/// Runs one chain from standardized columns `u`, returning the result and
/// the final state. `trace` receives `|Z(x*)|` for every proposal.
pub(crate) fn run_chain(
    mut u: DMatrix<f64>,
    stat: &NullStatistic,
    z1_abs: f64,
    config: &SamcConfig,
    rng: &mut ChaCha8Rng,
    mut trace: Option<&mut Vec<f64>>,
) -> Result<(SamcResult, DMatrix<f64>)> {
    config.validate()?;
    let regions = build_regions(z1_abs, config.m)?;
    let (n, p, m) = (u.nrows(), u.ncols(), config.m);
    let mut theta = vec![0.0f64; m];
    let mut visits = vec![0u64; m];
    let mut current = regions.region_of(z1_abs);
    if current != m - 1 {
        return Err(Error::Internal("the observed sample is not in the tail region".into()));
    }
    visits[current] += 1;
    let mut inc = config.incremental.then(|| IncrementalGram::new(&u));
    let mut accepted = 0u64;

    for t in 1..=config.iterations {
        let moves = draw_moves(n, p, config.varpi, rng);
        let olds: Vec<Vec<f64>> =
            moves.iter().map(|mv| apply_move(u.column_mut(mv.column).as_mut_slice(), mv)).collect();
        let z = match inc.as_mut() {
            Some(ig) => stat.abs_z_from_correlation(ig.propose(&u, &moves, &olds)),
            None => stat.abs_z_standardized(&u),
        };
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(z);
        }
        let proposed = regions.region_of(z);
        let log_r = theta[current] - theta[proposed];
        let draw: f64 = rng.random();
        if draw < log_r.exp() {
            current = proposed;
            accepted += 1;
            if let Some(ig) = inc.as_mut() {
                ig.accept(&u);
            }
        } else {
            for (mv, old) in moves.iter().zip(&olds).rev() {
                restore(u.column_mut(mv.column).as_mut_slice(), mv, old);
            }
        }
        let gamma = (config.t0 / t as f64).min(1.0);
        theta_update(&mut theta, current, gamma);
        visits[current] += 1;
    }

    let p_value = pvalue_from_weights(&theta, &visits)?;
    let empty_regions = visits.iter().filter(|&&c| c == 0).count();
    let result = SamcResult {
        p_value,
        theta,
        visit_counts: visits,
        empty_regions,
        acceptance_rate: accepted as f64 / config.iterations as f64,
        z1_abs,
        iterations: config.iterations,
    };
    Ok((result, u))
}

fn prepare(data: &DataMatrix, config: &SamcConfig) -> Result<(NullStatistic, DMatrix<f64>, f64)> {
    config.validate()?;
    if data.ncols() >= data.nrows() {
        return Err(Error::Domain(format!("need p < n, got p = {}, n = {}", data.ncols(), data.nrows())));
    }
    let (stat, u, z1) = observed(data)?;
    build_regions(z1, config.m)?;
    Ok((stat, u, z1))
}

/// SAMC estimate of `P(|Z| ≥ |Z₁|)` under within-column permutation.
///
/// The chain starts at the observed data and uses stream 0 of `config.seed`.
pub fn samc_pvalue(data: &DataMatrix, config: &SamcConfig) -> Result<SamcResult> {
    let (stat, u, z1) = prepare(data, config)?;
    Ok(run_chain(u, &stat, z1, config, &mut stream_rng(config.seed, 0), None)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiChainResult {
    pub chains: Vec<SamcResult>,
    pub median_p_value: f64,
}

/// Independent chains on streams `0..chains` of `config.seed`; chain 0
/// reproduces [`samc_pvalue`].
pub fn samc_chains(data: &DataMatrix, config: &SamcConfig, chains: usize) -> Result<MultiChainResult> {
    if chains == 0 {
        return Err(Error::InvalidParameter("need at least one chain".into()));
    }
    let (stat, u, z1) = prepare(data, config)?;
    let chains: Vec<SamcResult> = (0..chains as u64)
        .into_par_iter()
        .map(|c| Ok(run_chain(u.clone(), &stat, z1, config, &mut stream_rng(config.seed, c), None)?.0))
        .collect::<Result<_>>()?;
    let mut ps: Vec<f64> = chains.iter().map(|c| c.p_value).collect();
    ps.sort_by(f64::total_cmp);
    let k = ps.len();
    let median_p_value = if k % 2 == 1 { ps[k / 2] } else { 0.5 * (ps[k / 2 - 1] + ps[k / 2]) };
    Ok(MultiChainResult { chains, median_p_value })
}
