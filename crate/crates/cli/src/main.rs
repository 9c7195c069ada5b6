//! `eteso` — manifest-driven front end for the event-triggered observer
//! simulation library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use eteso_cli::{commands, CliError, Manifest, WORKERS_ENV};

#[derive(Parser, Debug)]
#[command(
    name = "eteso",
    version,
    about = "Event-triggered extended state observers for stochastic integrator chains: design reports, simulations, ensembles, gain sweeps and observer comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Run manifest (TOML).
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,

    /// Output directory for CSV/JSON artifacts.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Path-count override.
    #[arg(long, global = true)]
    paths: Option<usize>,

    /// Worker-thread count (default: ETESO_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Print and serialize all design-time quantities.
    Design,
    /// Simulate one sample path; write trajectory and trigger CSVs.
    Run,
    /// Simulate an ensemble; write mean-square error series.
    Ensemble,
    /// Sweep the tuning gain; write tail errors and fitted slopes.
    Sweep,
    /// Paired linear/nonlinear comparison on shared noise.
    Compare,
    /// Re-validate every manifest invariant without simulating.
    Validate,
}

fn resolve_workers(flag: Option<usize>) -> Option<usize> {
    flag.or_else(|| {
        std::env::var(WORKERS_ENV)
            .ok()
            .and_then(|v| v.parse::<usize>().ok())
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let manifest_path = cli
        .manifest
        .as_ref()
        .ok_or_else(|| CliError::Manifest("--manifest <path> is required".into()))?;
    let manifest = Manifest::load(manifest_path)?;
    let workers = resolve_workers(cli.workers);
    let ctx = commands::Context {
        manifest,
        out: cli.out.clone(),
        seed: cli.seed,
        paths: cli.paths,
        workers,
    };
    let body = || -> Result<(), CliError> {
        match cli.command {
            Command::Design => commands::design(&ctx),
            Command::Run => commands::run(&ctx),
            Command::Ensemble => commands::ensemble(&ctx),
            Command::Sweep => commands::sweep(&ctx),
            Command::Compare => commands::compare(&ctx),
            Command::Validate => commands::validate(&ctx),
        }
    };
    match workers {
        Some(w) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(w)
                .build()
                .map_err(|e| CliError::Io(format!("building worker pool: {e}")))?;
            pool.install(body)
        }
        None => body(),
    }
}
