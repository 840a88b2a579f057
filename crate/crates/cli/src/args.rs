use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mcorr_core::datagen::{ComponentDistribution, CovarianceCase};
use serde::{Deserialize, Serialize};

#[derive(Debug, Parser)]
#[command(
    name = "mcorr",
    version,
    about = "Multiple correlation of a set of variables: estimate, interval, test, simulate"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub output: OutputFormat,

    /// Worker threads for resampling and simulation (default: available cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Random seed; every run with the same seed gives the same output.
    #[arg(long, global = true, default_value_t = 1)]
    pub seed: u64,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Point estimate with the asymptotic interval and test.
    Estimate(DataArgs),
    /// Confidence interval for ψ.
    Ci(CiArgs),
    /// Test of ψ = 0.
    Test(TestArgs),
    /// SAMC p-value for ψ = 0 with per-chain detail.
    Samc(SamcCmdArgs),
    /// Coverage study of the asymptotic interval on simulated data.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    /// CSV file, one observation per row.
    #[arg(long)]
    pub input: PathBuf,

    /// The first row holds column names (default).
    #[arg(long, overrides_with = "no_header")]
    pub header: bool,

    /// The first row is data.
    #[arg(long = "no-header", overrides_with = "header")]
    pub no_header: bool,

    /// Confidence level.
    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

impl DataArgs {
    pub fn has_header(&self) -> bool {
        !self.no_header
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CiMethod {
    Asymptotic,
    Bootstrap,
}

#[derive(Debug, Args)]
pub struct CiArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum, default_value_t = CiMethod::Asymptotic)]
    pub method: CiMethod,

    /// Bootstrap replications.
    #[arg(long, default_value_t = 2000)]
    pub reps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Asymptotic,
    Permutation,
    Bootstrap,
    Samc,
}

#[derive(Debug, Clone, Args)]
pub struct SamcArgs {
    /// Proportion of rows and columns moved per SAMC proposal.
    #[arg(long, default_value_t = 0.2)]
    pub varpi: f64,

    /// Number of SAMC regions.
    #[arg(long, default_value_t = 300)]
    pub m: usize,

    /// Gain schedule constant.
    #[arg(long, default_value_t = 1000.0)]
    pub t0: f64,

    /// SAMC iterations per chain.
    #[arg(long = "T", default_value_t = 1_000_000)]
    pub iterations: u64,

    /// Independent SAMC chains; the reported p-value is their median.
    #[arg(long, default_value_t = 1)]
    pub chains: usize,

    /// Update the sample correlation matrix from the moved entries only.
    #[arg(long)]
    pub incremental: bool,
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[arg(long, value_enum, default_value_t = TestMethod::Asymptotic)]
    pub method: TestMethod,

    /// Resampling replications for the permutation and bootstrap tests.
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,

    #[command(flatten)]
    pub samc: SamcArgs,
}

#[derive(Debug, Args)]
pub struct SamcCmdArgs {
    #[command(flatten)]
    pub data: DataArgs,

    #[command(flatten)]
    pub samc: SamcArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dist {
    Normal,
    Beta,
    T6,
    T4,
    Mixed,
}

impl From<Dist> for ComponentDistribution {
    fn from(d: Dist) -> Self {
        match d {
            Dist::Normal => ComponentDistribution::StandardNormal,
            Dist::Beta => ComponentDistribution::Beta66,
            Dist::T6 => ComponentDistribution::T6,
            Dist::T4 => ComponentDistribution::T4,
            Dist::Mixed => ComponentDistribution::HalfT6HalfBeta66,
        }
    }
}

#[derive(Debug, Args)]
#[command(group(clap::ArgGroup::new("dimension").required(true).args(["p", "q"])))]
pub struct SimulateArgs {
    /// Covariance template: 1 = AR(1), 2 = compound symmetry, 3 = 1-dependent band.
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    pub case: u8,

    /// True ψ.
    #[arg(long)]
    pub psi: f64,

    /// Number of variables.
    #[arg(long)]
    pub p: Option<usize>,

    /// Ratio p / n.
    #[arg(long)]
    pub q: Option<f64>,

    /// Sample size.
    #[arg(long)]
    pub n: usize,

    #[arg(long, value_enum, default_value_t = Dist::Normal)]
    pub dist: Dist,

    #[arg(long, default_value_t = 1000)]
    pub reps: usize,

    #[arg(long, default_value_t = 0.95)]
    pub level: f64,
}

impl SimulateArgs {
    pub fn covariance_case(&self) -> CovarianceCase {
        match self.case {
            1 => CovarianceCase::Autoregressive,
            2 => CovarianceCase::CompoundSymmetry,
            _ => CovarianceCase::MDependent,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutputFormat {
    Json,
    Csv,
    Table,
}
