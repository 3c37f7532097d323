use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spinquench_cli::run::{self, Common};
use spinquench_cli::{Backend, CliError, Format};

const EXIT_CODES: &str = "\
Exit codes:
  0  success
  2  config, input or i/o error
  3  numeric failure
  4  insufficient data (too little decay or too short a window to fit)";

#[derive(Parser)]
#[command(name = "spinquench", version, about = "Single-spin quench dynamics, phases and fits", after_help = EXIT_CODES)]
struct Cli {
    /// Output file; stdout when absent. A `.meta.json` sidecar is written next to it.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Override the backend named in the config.
    #[arg(long, global = true, value_enum)]
    backend: Option<Backend>,
    /// Table format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evolve one quench and write t, Bloch vector, angles and phases.
    Quench {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit the open two-level model to a trajectory table and classify it.
    Fit {
        /// Table written by `quench` (CSV, or JSON with a .json extension).
        trajectory: PathBuf,
    },
    /// Classify quenches along one post-quench coupling.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
    /// Azimuth divergence between a run and a reference run.
    Compare {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        reference: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        threshold: f64,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    let common = Common { out: cli.out, format: cli.format, backend: cli.backend };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool.build().map_err(|e| CliError::Config(e.to_string()))?;
    pool.install(|| match &cli.cmd {
        Cmd::Quench { config } => run::quench(&common, config),
        Cmd::Fit { trajectory } => run::fit(&common, trajectory),
        Cmd::Sweep { config } => run::sweep(&common, config),
        Cmd::Compare { config, reference, threshold } => run::compare(&common, config, reference, *threshold),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
