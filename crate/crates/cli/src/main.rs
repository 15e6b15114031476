#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use config::ExperimentConfig;
use output::Artifacts;
use std::path::PathBuf;
use std::process::ExitCode;

/// Reproducible experiments on complex sample covariance spectra.
#[derive(Parser)]
#[command(name = "rmtlab", version)]
struct Cli {
    /// JSON config file with flat keys; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: RMTLAB_THREADS, else all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Exit with status 2 when the run misses its acceptance threshold.
    #[arg(long, global = true)]
    check: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one matrix and write its spectrum.
    SampleSpectrum(ExperimentConfig),
    /// Kolmogorov distance to the Marchenko-Pastur law over trials.
    MpCheck(ExperimentConfig),
    /// Stieltjes-transform deviations on the bulk and their tail table.
    Concentration(ExperimentConfig),
    /// Conjugated correlation kernel on a grid of (u, v).
    KernelEval(ExperimentConfig),
    /// Rescaled kernel against the sine kernel across matrix sizes.
    SineLimit(ExperimentConfig),
    /// Gap probability, spacing density and distribution function.
    Fredholm(ExperimentConfig),
    /// Empirical spacing distribution against the limit.
    Spacing(ExperimentConfig),
    /// Two-point local statistic against its limit.
    TwoPoint(ExperimentConfig),
    /// Agreement of the Bessel evaluation regimes.
    BesselCheck(ExperimentConfig),
    /// Chi-square scaling of the one-dimensional Ornstein-Uhlenbeck approximation.
    OuApprox(ExperimentConfig),
}

impl Command {
    fn parts(&self) -> (&'static str, &ExperimentConfig) {
        match self {
            Command::SampleSpectrum(c) => ("sample-spectrum", c),
            Command::MpCheck(c) => ("mp-check", c),
            Command::Concentration(c) => ("concentration", c),
            Command::KernelEval(c) => ("kernel-eval", c),
            Command::SineLimit(c) => ("sine-limit", c),
            Command::Fredholm(c) => ("fredholm", c),
            Command::Spacing(c) => ("spacing", c),
            Command::TwoPoint(c) => ("two-point", c),
            Command::BesselCheck(c) => ("bessel-check", c),
            Command::OuApprox(c) => ("ou-approx", c),
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("RMTLAB_THREADS") {
        Ok(v) => Ok(Some(v.trim().parse().with_context(|| format!("RMTLAB_THREADS = {v:?} is not a thread count"))?)),
        Err(_) => Ok(None),
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    if let Some(t) = thread_count(cli.threads)? {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let (name, flags) = cli.command.parts();
    let base = match &cli.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    base.check_command(name)?;
    let cfg = base.overridden_by(flags)?;
    let out_dir = PathBuf::from(cfg.out_dir.clone().unwrap_or_else(|| ".".into()));
    let art = Artifacts::new(&out_dir, name)?;
    let (mut resolver, outcome) = commands::run(name, &cfg, &art, cli.check)?;
    resolver.record("out_dir", &out_dir);
    resolver.record("check", &cli.check);
    let check = cli.check.then_some(&outcome.check);
    art.write_summary(name, resolver.used, outcome.results, check)?;
    if cli.check {
        let tag = if outcome.check.passed { "PASS" } else { "FAIL" };
        eprintln!("{tag} {name}: {}", outcome.check.criterion);
    }
    Ok(outcome.check.passed || !cli.check)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
