use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::Parser;
use membrane_homog_cli::{commit, plan, run, Command, ExperimentConfig};

/// Homogenization workbench for membrane conductivity problems.
#[derive(Debug, Parser)]
#[command(name = "membrane-homog", version)]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// Experiment configuration (TOML, or JSON by extension); defaults apply without one.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output.dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed, overriding `monte_carlo.master_seed` and any explicit seed list.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true, env = "MEMBRANE_HOMOG_JOBS")]
    jobs: Option<usize>,
    /// Print the resolved plan as JSON and exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.override_seed(seed);
    }
    let out = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    let jobs = match cli.jobs {
        Some(0) => anyhow::bail!("--jobs must be at least 1"),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    if cli.dry_run {
        let text = serde_json::to_string_pretty(&plan(cli.command, &cfg, &out, jobs))?;
        // a closed pipe (e.g. `| head`) is not an error for a dry run
        let _ = writeln!(std::io::stdout(), "{text}");
        return Ok(());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building the worker pool")?;
    let artifacts = pool.install(|| run(cli.command, &cfg))?;
    let written = commit(&out, &artifacts).with_context(|| format!("writing outputs to {}", out.display()))?;
    let mut stdout = std::io::stdout().lock();
    for path in written {
        let _ = writeln!(stdout, "{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
