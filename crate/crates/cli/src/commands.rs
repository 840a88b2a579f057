use mcorr_core::asymptotics::{estimate_ci, estimate_test, full_estimate, PsiEstimate};
use mcorr_core::resampling::{bootstrap_ci, null_resample, ResampleMethod, ResamplePlan};
use mcorr_core::samc::{samc_chains, SamcConfig};
use mcorr_core::simulation::{run_coverage, CoverageDesign, Dimension};
use mcorr_core::{ConfidenceInterval, DataMatrix};

use crate::args::{CiMethod, Cli, Command, DataArgs, SamcArgs, SimulateArgs, TestMethod};
use crate::error::CliError;
use crate::ingest::ingest_csv;
use crate::report::{
    render, ChainRecord, CiRecord, Record, RunConfig, SamcDetail, SamcSettings, SimulateSettings, SimulationRecord,
    TestRecord,
};

/// Runs a parsed command line and returns the rendered output.
pub fn run(cli: Cli) -> Result<String, CliError> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // fails only if a pool already exists, which is fine for repeated calls in tests
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    let mut config = RunConfig {
        command: String::new(),
        input: None,
        header: None,
        level: 0.95,
        seed: cli.seed,
        threads: rayon::current_num_threads(),
        output: cli.output,
        method: None,
        reps: None,
        samc: None,
        simulate: None,
    };
    match &cli.command {
        Command::Estimate(a) => {
            config.command = "estimate".into();
            let (data, est) = load(a, &mut config)?;
            let rec = base_record(&data, &est, config, a.level)?;
            render(&rec, cli.output)
        }
        Command::Ci(a) => {
            config.command = "ci".into();
            config.method = Some(method_name(a.method));
            let (data, est) = load(&a.data, &mut config)?;
            let mut warnings = Vec::new();
            let ci = match a.method {
                CiMethod::Asymptotic => estimate_ci(&est, a.data.level)?,
                CiMethod::Bootstrap => {
                    config.reps = Some(a.reps);
                    if a.reps < 1000 {
                        warnings.push(format!("only {} bootstrap replications; 1000 or more recommended", a.reps));
                    }
                    bootstrap_ci(&data, a.reps, a.data.level, cli.seed)?
                }
            };
            let mut rec = base_record(&data, &est, config, a.data.level)?;
            rec.ci = ci_record(&ci, &method_name(a.method));
            rec.warnings.extend(warnings);
            render(&rec, cli.output)
        }
        Command::Test(a) => {
            config.command = "test".into();
            config.method = Some(method_name(a.method));
            let (data, est) = load(&a.data, &mut config)?;
            let mut rec;
            match a.method {
                TestMethod::Asymptotic => rec = base_record(&data, &est, config, a.data.level)?,
                TestMethod::Permutation | TestMethod::Bootstrap => {
                    config.reps = Some(a.reps);
                    let method = if a.method == TestMethod::Permutation {
                        ResampleMethod::Permutation
                    } else {
                        ResampleMethod::Bootstrap
                    };
                    let out = null_resample(&data, &ResamplePlan::new(method, a.reps, cli.seed)?)?;
                    rec = base_record(&data, &est, config, a.data.level)?;
                    rec.test.p_value = out.p_value;
                    rec.test.method = method_name(a.method);
                    rec.test.replications = Some(out.replications as u64);
                }
                TestMethod::Samc => {
                    rec = samc_record(&data, &est, config, &a.samc, a.data.level, cli.seed)?;
                }
            }
            render(&rec, cli.output)
        }
        Command::Samc(a) => {
            config.command = "samc".into();
            config.method = Some("samc".into());
            let (data, est) = load(&a.data, &mut config)?;
            let rec = samc_record(&data, &est, config, &a.samc, a.data.level, cli.seed)?;
            render(&rec, cli.output)
        }
        Command::Simulate(a) => {
            config.command = "simulate".into();
            config.level = a.level;
            config.reps = Some(a.reps);
            config.simulate =
                Some(SimulateSettings { case: a.case, psi: a.psi, p: a.p, q: a.q, n: a.n, dist: method_name(a.dist) });
            let rec = simulate(a, config, cli.seed)?;
            render(&rec, cli.output)
        }
    }
}

fn method_name<T: serde::Serialize>(m: T) -> String {
    match serde_json::to_value(m) {
        Ok(serde_json::Value::String(s)) => s,
        _ => String::new(),
    }
}

fn load(a: &DataArgs, config: &mut RunConfig) -> Result<(DataMatrix, PsiEstimate), CliError> {
    config.input = Some(a.input.display().to_string());
    config.header = Some(a.has_header());
    config.level = a.level;
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("--level {} must be in (0, 1)", a.level)));
    }
    let data = ingest_csv(&a.input, a.has_header())?;
    log::info!("{}: read {} x {} from {}", config.command, data.nrows(), data.ncols(), a.input.display());
    let est = full_estimate(&data)?;
    Ok((data, est))
}

fn ci_record(ci: &ConfidenceInterval, method: &str) -> CiRecord {
    CiRecord { lower: ci.lower, upper: ci.upper, level: ci.level, method: method.into() }
}

/// Estimate with the asymptotic interval and test.
fn base_record(data: &DataMatrix, est: &PsiEstimate, config: RunConfig, level: f64) -> Result<Record, CliError> {
    let ci = estimate_ci(est, level)?;
    let test = estimate_test(est)?;
    let mut warnings = Vec::new();
    if est.flags.singular {
        warnings.push("the sample correlation matrix is singular; psi_hat is 1 and Z is -infinity".into());
    }
    if est.flags.kappa_clamped {
        warnings.push("the fourth moment estimate was clamped at 1".into());
    }
    if est.flags.eta_clamped {
        warnings.push("the estimate of ||V - I||_F^2 was clamped at 0".into());
    }
    if est.flags.bc_clamped {
        warnings.push("the bias correction left [0, 1] and was clamped".into());
    }
    if ci.clamped {
        warnings.push("an interval endpoint was clamped to [0, 1]".into());
    }
    if data.ncols() * 2 > data.nrows() {
        warnings.push(format!(
            "p / n = {:.3}; the asymptotic approximations are less accurate",
            data.ncols() as f64 / data.nrows() as f64
        ));
    }
    Ok(Record {
        n: est.n,
        p: est.p,
        psi_hat: est.psi_hat,
        psi_bc: est.psi_bc,
        kappa_hat: est.kappa_hat,
        tau_hat: est.tau_hat,
        eta_hat: est.eta_hat,
        delta_hat: est.delta_hat,
        sigma_hat: est.sigma_hat,
        ci: ci_record(&ci, "asymptotic"),
        test: TestRecord {
            z: test.z.is_finite().then_some(test.z),
            p_value: test.p_value,
            method: "asymptotic".into(),
            replications: None,
        },
        warnings,
        seed: config.seed,
        samc: None,
        config,
    })
}

fn samc_record(
    data: &DataMatrix,
    est: &PsiEstimate,
    mut config: RunConfig,
    a: &SamcArgs,
    level: f64,
    seed: u64,
) -> Result<Record, CliError> {
    config.samc = Some(SamcSettings {
        varpi: a.varpi,
        m: a.m,
        t0: a.t0,
        iterations: a.iterations,
        chains: a.chains,
        incremental: a.incremental,
    });
    let samc =
        SamcConfig { m: a.m, t0: a.t0, iterations: a.iterations, varpi: a.varpi, seed, incremental: a.incremental };
    log::info!("samc: {} chain(s) of {} iterations, m = {}", a.chains, a.iterations, a.m);
    let out = samc_chains(data, &samc, a.chains)?;
    let mut rec = base_record(data, est, config, level)?;
    let empty: usize = out.chains.iter().map(|c| c.empty_regions).max().unwrap_or(0);
    if empty > 0 {
        rec.warnings.push(format!("up to {empty} of {} SAMC regions were never visited", a.m));
    }
    rec.test.p_value = out.median_p_value;
    rec.test.method = "samc".into();
    rec.test.replications = Some(a.iterations * a.chains as u64);
    rec.samc = Some(SamcDetail {
        z1_abs: out.chains[0].z1_abs,
        median_p_value: out.median_p_value,
        chains: out
            .chains
            .iter()
            .enumerate()
            .map(|(i, c)| ChainRecord {
                chain: i as u64,
                p_value: c.p_value,
                acceptance_rate: c.acceptance_rate,
                empty_regions: c.empty_regions,
            })
            .collect(),
    });
    Ok(rec)
}

fn simulate(a: &SimulateArgs, config: RunConfig, seed: u64) -> Result<SimulationRecord, CliError> {
    let dimension = match (a.p, a.q) {
        (Some(p), None) => Dimension::Fixed(p),
        (None, Some(q)) => Dimension::Ratio(q),
        _ => return Err(CliError::Usage("give exactly one of --p and --q".into())),
    };
    if !(a.level > 0.0 && a.level < 1.0) {
        return Err(CliError::Usage(format!("--level {} must be in (0, 1)", a.level)));
    }
    let design = CoverageDesign {
        case: a.covariance_case(),
        psi: a.psi,
        dimension,
        n: a.n,
        distribution: a.dist.into(),
        reps: a.reps,
        level: a.level,
        seed,
    };
    log::info!("simulate: {} replications on {} thread(s)", a.reps, rayon::current_num_threads());
    let r = run_coverage(&design)?;
    Ok(SimulationRecord {
        case: a.case,
        psi: a.psi,
        p: r.p,
        n: a.n,
        phi: r.phi,
        dist: method_name(a.dist),
        reps: a.reps,
        level: a.level,
        coverage_pct: r.coverage_pct,
        avg_length: r.avg_length,
        mc_stderr: r.mc_stderr,
        mean_psi_hat: r.mean_psi_hat,
        mean_psi_bc: r.mean_psi_bc,
        runtime_secs: r.runtime_secs,
        warnings: r.warnings,
        seed,
        config,
    })
}
