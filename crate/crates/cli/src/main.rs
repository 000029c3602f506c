//! `ncpfr`: reproducible experiments over Jacobi matrices of balanced
//! measures.
//!
//! Each subcommand reads an optional TOML config, applies the command-line
//! overrides, writes CSV tables, SVG plots and `<command>.summary.json` to
//! the output directory, and exits with 0 when every assertion passes,
//! 1 when one fails and 2 on a configuration or runtime error.
//!
//! The worker thread count is read from `NCPFR_THREADS`. Results do not
//! depend on it.

mod commands;
mod config;
mod output;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};
use ncpfr::jacobi::Precision;

use config::ExperimentConfig;
use output::{Artifacts, Summary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Pressure curve, its root and the two-sided check.
    Pressure,
    /// Growth of the Lipschitz constants L_n over a t grid.
    Lipschitz,
    /// Fitted contraction rate of L_n.
    Contraction,
    /// Norms of the two-weight Hilbert matrix over (t, n, x).
    HilbertNorm,
    /// Dyadic Poisson profiles, doubling and random intervals.
    TestConditions,
    /// Flow equation residuals and the D and R identities.
    FlowCheck,
    /// Renormalization equation, contraction, fixed point and defects.
    Renorm,
    /// Decay of differences of integrals of a Hölder function.
    WeakPfr,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Pressure => "pressure",
            Command::Lipschitz => "lipschitz",
            Command::Contraction => "contraction",
            Command::HilbertNorm => "hilbert-norm",
            Command::TestConditions => "test-conditions",
            Command::FlowCheck => "flow-check",
            Command::Renorm => "renorm",
            Command::WeakPfr => "weak-pfr",
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PrecisionArg {
    Double,
    Extended,
}

#[derive(Debug, Parser)]
#[command(name = "ncpfr", version, about = "Jacobi matrices of balanced measures: experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    precision: Option<PrecisionArg>,
    /// Largest matrix size any step may build.
    #[arg(long = "max-d", global = true)]
    max_d: Option<usize>,
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(value) = std::env::var("NCPFR_THREADS") else {
        return Ok(());
    };
    let threads: usize = value
        .trim()
        .parse()
        .with_context(|| format!("NCPFR_THREADS must be a positive integer, got {value:?}"))?;
    anyhow::ensure!(threads > 0, "NCPFR_THREADS must be positive");
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn run(cli: Cli) -> anyhow::Result<Summary> {
    configure_threads()?;
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = cli.out {
        cfg.out = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(p) = cli.precision {
        cfg.precision = Some(match p {
            PrecisionArg::Double => Precision::Double,
            PrecisionArg::Extended => Precision::Extended,
        });
    }
    if let Some(max_d) = cli.max_d {
        cfg.max_d = max_d;
    }
    let p = cfg.polynomial.build().context("building the polynomial")?;
    let cfg = cfg.resolve(cli.command, &p)?;
    let hash = cfg.hash()?;
    let mut out = Artifacts::new(&cfg.out, cli.command.name(), &hash)?;
    out.config(&toml::to_string(&cfg)?)?;
    let (headline, assertions) = match cli.command {
        Command::Pressure => commands::pressure(&cfg, &p, &mut out),
        Command::Lipschitz => commands::lipschitz(&cfg, &p, &mut out),
        Command::Contraction => commands::contraction(&cfg, &p, &mut out),
        Command::HilbertNorm => commands::hilbert_norm(&cfg, &p, &mut out),
        Command::TestConditions => commands::test_conditions(&cfg, &p, &mut out),
        Command::FlowCheck => commands::flow_check(&cfg, &p, &mut out),
        Command::Renorm => commands::renorm(&cfg, &p, &mut out),
        Command::WeakPfr => commands::weak_pfr(&cfg, &p, &mut out),
    }?;
    out.finish(headline, assertions)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    match run(cli) {
        Ok(summary) => {
            println!("{command}: {}", summary.headline);
            for a in summary.assertions.iter().filter(|a| !a.pass) {
                eprintln!("  failed: {} = {} (needs {})", a.name, output::num(a.value), a.threshold);
            }
            if summary.pass {
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
