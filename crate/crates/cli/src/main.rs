//! Batch driver: reads a JSON experiment config, runs one experiment and writes
//! a JSON report (plus CSV data for some commands).
//!
//! Exit status: 0 when every assertion passed, 1 when a mathematical assertion
//! failed, 2 on configuration or numerical errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context as _, Result};
use clap::{Parser, Subcommand};

use crate::commands::Context;
use crate::config::{BetaSpec, ExperimentConfig, SourceSpec};
use crate::output::{Report, Sink};

#[derive(Debug, Parser)]
#[command(name = "robin-shape", version, about = "Ball stability experiments for Robin heat-convection energies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON experiment config.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for reports and CSV files.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps and profile batches (0 = all cores).
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Radius of the second disk in the two-disk example.
    #[arg(long, global = true)]
    eps: Option<f64>,
    /// Robin coefficient.
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Width of a Gaussian source (replaces the configured source).
    #[arg(long, global = true)]
    delta: Option<f64>,
    /// Space dimension.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Ball radius.
    #[arg(long = "r-ball", global = true)]
    r_ball: Option<f64>,
    /// Single spherical-harmonic degree for `modes`.
    #[arg(long = "mode-l", global = true)]
    mode_l: Option<u32>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Stability criterion, A0/A1/A2 decomposition and verdict.
    Stability,
    /// Instability window (β1, β2) of a radially decreasing source.
    Thresholds,
    /// Second variation per spherical-harmonic degree.
    Modes,
    /// Finite-difference second variation along a flow against the closed form.
    TranslateCheck,
    /// Finite elements against the spectral disk solver.
    FemCompare,
    /// Two-disk counterexample.
    Counterexample,
    /// Rearrangement domination and Talenti comparisons.
    RearrangeCheck,
    /// Constant insulation against random profiles of the same mass.
    Insulation,
    /// Stability classification over a (β, δ, R) grid.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Stability => "stability",
            Command::Thresholds => "thresholds",
            Command::Modes => "modes",
            Command::TranslateCheck => "translate-check",
            Command::FemCompare => "fem-compare",
            Command::Counterexample => "counterexample",
            Command::RearrangeCheck => "rearrange-check",
            Command::Insulation => "insulation",
            Command::Sweep => "sweep",
        }
    }
}

fn configure(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => config::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(name) = &cfg.command {
        if name != cli.command.name() {
            bail!("config is for `{name}`, not `{}`", cli.command.name());
        }
    }
    if let Some(b) = cli.beta {
        cfg.problem.beta = BetaSpec::Robin(b);
    }
    if let Some(d) = cli.delta {
        cfg.source = Some(SourceSpec::Gaussian { delta: d });
    }
    if let Some(n) = cli.n {
        cfg.problem.n = n;
    }
    if let Some(r) = cli.r_ball {
        cfg.problem.radius = r;
    }
    if let Some(e) = cli.eps {
        cfg.eps = Some(e);
    }
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<Report> {
    let cfg = configure(cli)?;
    let sink = Sink::new(&cli.out)?;
    let report_name = cfg
        .output
        .report
        .clone()
        .unwrap_or_else(|| format!("{}.json", cli.command.name()));
    let ctx = Context {
        cfg,
        mode_l: cli.mode_l,
        sink: &sink,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs)
        .build()
        .context("starting worker threads")?;
    let report = pool.install(|| match cli.command {
        Command::Stability => commands::stability(&ctx),
        Command::Thresholds => commands::thresholds(&ctx),
        Command::Modes => commands::modes(&ctx),
        Command::TranslateCheck => commands::translate_check(&ctx),
        Command::FemCompare => commands::fem_compare(&ctx),
        Command::Counterexample => commands::counterexample(&ctx),
        Command::RearrangeCheck => commands::rearrange_check(&ctx),
        Command::Insulation => commands::insulation(&ctx),
        Command::Sweep => commands::sweep(&ctx),
    })?;
    sink.write_json(&report_name, &report)?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(report) => {
            match serde_json::to_string_pretty(&report) {
                Ok(s) => println!("{s}"),
                Err(e) => eprintln!("error: {e}"),
            }
            for a in report.assertions.iter().filter(|a| !a.passed) {
                eprintln!("assertion failed: {} ({})", a.name, a.detail);
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
