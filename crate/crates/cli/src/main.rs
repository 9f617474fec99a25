//! `vch`: landscapes, optimization, readout and self-checks for branched
//! history states.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use vch_core::estimators::Part;
use vch_core::verify::Mutation;

use config::{ConfigError, Overrides, ShotsArg};

#[derive(Debug, Parser)]
#[command(name = "vch", version, about = "Variational search for consistent histories")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Master seed; overrides the file.
    #[arg(long)]
    seed: Option<u64>,
    /// `exact` or a shot count per estimate; overrides the file.
    #[arg(long)]
    shots: Option<ShotsArg>,
    /// Worker threads (defaults to all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PartArg {
    #[value(alias = "real")]
    Re,
    #[value(alias = "imaginary")]
    Im,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum InjectArg {
    SignFlip,
    DephasePermutation,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cost over a parameter grid, as CSV.
    Landscape(Common),
    /// Restarted simplex minimization with a readout report per minimum, as JSON.
    Optimize(Common),
    /// History probabilities and bounds at `[ansatz] params`, as JSON.
    Probabilities(Common),
    /// One decoherence-matrix element at `[ansatz] params`, as JSON.
    Element {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        b: Option<String>,
        #[arg(long, value_enum)]
        part: Option<PartArg>,
    },
    /// Route-equivalence and cost-identity checks on a random model corpus.
    Verify {
        #[arg(long, default_value_t = 100)]
        cases: u64,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, hide = true)]
        inject: Option<InjectArg>,
    },
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(anyhow!(ConfigError("workers must be at least 1".into())));
        }
        b = b.num_threads(n);
    }
    Ok(b.build()?)
}

fn load(c: &Common) -> Result<config::RunConfig> {
    config::load(&c.config, &Overrides { seed: c.seed, shots: c.shots, workers: c.workers })
}

/// Runs the command; `Ok(false)` means verification failed.
fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify { cases, workers, out, inject } => {
            let mutation = match inject {
                None => Mutation::None,
                Some(InjectArg::SignFlip) => Mutation::SignFlip,
                Some(InjectArg::DephasePermutation) => Mutation::DephasePermutation,
            };
            let (text, rep) = pool(workers)?.install(|| commands::verify(cases, mutation))?;
            output::emit(out.as_deref(), &text)?;
            Ok(rep.passed())
        }
        Command::Element { common, a, b, part } => {
            let cfg = load(&common)?;
            let part = part.map(|p| match p {
                PartArg::Re => Part::Real,
                PartArg::Im => Part::Imaginary,
            });
            let text = pool(cfg.workers)?.install(|| commands::element(&cfg, a.as_deref(), b.as_deref(), part))?;
            output::emit(common.out.as_deref(), &text)?;
            Ok(true)
        }
        Command::Landscape(common) => tabulate(&common, commands::landscape),
        Command::Optimize(common) => tabulate(&common, commands::optimize_cmd),
        Command::Probabilities(common) => tabulate(&common, commands::probabilities),
    }
}

fn tabulate(common: &Common, f: fn(&config::RunConfig) -> Result<String>) -> Result<bool> {
    let cfg = load(common)?;
    let text = pool(cfg.workers)?.install(|| f(&cfg))?;
    output::emit(common.out.as_deref(), &text)?;
    Ok(true)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(vch_core::Error::InvalidState(_)) = cause.downcast_ref::<vch_core::Error>() {
            return 3;
        }
    }
    2
}

fn main() -> ExitCode {
    let result = run(Cli::parse());
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
