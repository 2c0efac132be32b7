//! Thin command-line front end over the library pipeline. All heavy lifting
//! lives in `tdqmc::pipeline`; this binary only resolves the configuration,
//! sizes the worker pool, and maps failures to a nonzero exit code with the
//! failing stage on stderr.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use tdqmc::config::{load_config, preset_config, ExperimentConfig, PRESET_NAMES};
use tdqmc::output::RunManifest;
use tdqmc::{pipeline, Error, Result};

#[derive(Parser)]
#[command(
    name = "tdqmc",
    version,
    about = "Time-dependent quantum Monte Carlo for two interacting electrons in 1D"
)]
struct Cli {
    /// Worker threads for the walker loops (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON configuration file; may reference a preset and override fields.
    #[arg(long, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Preset name instead of a file (one of the built-in experiments).
    #[arg(long)]
    preset: Option<String>,
    /// Output directory (overrides the configuration).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override for the walker streams.
    #[arg(long)]
    seed: Option<u64>,
    /// Allow writing into a non-empty output directory.
    #[arg(long)]
    force: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(path), None) => load_config(path)?,
            (None, Some(name)) => preset_config(name)?,
            (None, None) => {
                return Err(Error::Config(format!(
                    "pass --config <file> or --preset <name> (presets: {})",
                    PRESET_NAMES.join(", ")
                )))
            }
            (Some(_), Some(_)) => unreachable!("clap rejects --config with --preset"),
        };
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Prepare the ground state and write its artifacts.
    Ground(ConfigArgs),
    /// Full TDQMC run (ground state, release, evolution) without the exact
    /// reference.
    Evolve(ConfigArgs),
    /// Exact two-body reference only.
    Exact(ConfigArgs),
    /// Ground-state energy as a function of the kernel width multiplier.
    ScanAlpha(ConfigArgs),
    /// Recompute derived metrics from an existing run directory.
    Analyze {
        /// Run directory containing density CSVs and density matrices.
        #[arg(long)]
        out: PathBuf,
        /// Overwrite an existing analysis.json.
        #[arg(long)]
        force: bool,
    },
    /// Full experiment: TDQMC plus the exact reference and comparisons.
    Run(ConfigArgs),
}

fn report(manifest: &RunManifest) {
    println!(
        "{}: {} files in {} ({:.1} s)",
        manifest.status,
        manifest.files.len(),
        manifest.config.out_dir.display(),
        manifest.wall_seconds
    );
}

fn dispatch(cli: &Cli) -> Result<()> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    match &cli.command {
        Command::Ground(args) => report(&pipeline::run_ground(&args.resolve()?, args.force)?),
        Command::Evolve(args) => report(&pipeline::run_evolve(&args.resolve()?, args.force)?),
        Command::Exact(args) => report(&pipeline::run_exact_only(&args.resolve()?, args.force)?),
        Command::ScanAlpha(args) => report(&pipeline::run_scan(&args.resolve()?, args.force)?),
        Command::Analyze { out, force } => {
            let report = pipeline::analyze_dir(out, *force)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Run(args) => report(&pipeline::run_experiment(&args.resolve()?, args.force)?),
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error [stage: {}]: {err}", err.stage_name().unwrap_or("setup"));
            ExitCode::FAILURE
        }
    }
}
