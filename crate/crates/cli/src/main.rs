use std::panic;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rmac_cli::commands;
use rmac_cli::{CliError, CliResult, RunConfig};
use rmac_core::synthetic::SyntheticConfig;

/// R-MAC+ descriptors and db-regions retrieval over pre-extracted feature maps.
#[derive(Debug, Parser)]
#[command(name = "rmac", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Overrides {
    /// Run configuration file (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Region detector: rmac_plus or tolias_baseline.
    #[arg(long, global = true)]
    detector: Option<String>,
    /// Aggregate base, up25 and down25 maps (true/false).
    #[arg(long, global = true)]
    multires: Option<String>,
    /// Retrieval mode: plain or db_regions.
    #[arg(long, global = true)]
    retrieval: Option<String>,
    /// Query expansion: off, rmac, db_regions or db_regions_global.
    #[arg(long, global = true)]
    qe: Option<String>,
    #[arg(long = "qe-k", global = true)]
    qe_k: Option<String>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    jobs: Option<String>,
    #[arg(long = "output-dir", global = true)]
    output_dir: Option<String>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit PCA-whitening on gallery region descriptors.
    FitWhitening,
    /// Describe the gallery and write the index.
    BuildIndex,
    /// Rank the gallery for every query.
    Query,
    /// Compute per-query AP and mAP from written rankings.
    Evaluate,
    /// fit-whitening, build-index, query and evaluate in sequence.
    All,
    /// Write a small synthetic dataset and a matching run.conf.
    Synth {
        dir: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Also write up25 and down25 maps (and set multires in run.conf).
        #[arg(long)]
        multires_maps: bool,
        #[arg(long, default_value_t = 4)]
        clutter_blobs: usize,
    },
}

fn resolve_config(o: &Overrides) -> CliResult<RunConfig> {
    let mut cfg = match &o.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let cwd = Path::new("");
    for (key, value) in [
        ("detector", &o.detector),
        ("multires", &o.multires),
        ("retrieval", &o.retrieval),
        ("qe", &o.qe),
        ("qe_k", &o.qe_k),
        ("jobs", &o.jobs),
        ("output_dir", &o.output_dir),
    ] {
        if let Some(v) = value {
            cfg.set(key, v, cwd)?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> CliResult<()> {
    if let Command::Synth {
        dir,
        seed,
        multires_maps,
        clutter_blobs,
    } = &cli.command
    {
        let synth = SyntheticConfig {
            seed: *seed,
            multiresolution: *multires_maps,
            clutter_blobs: *clutter_blobs,
            ..Default::default()
        };
        return commands::write_synthetic(dir, &synth);
    }
    let cfg = resolve_config(&cli.overrides)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    pool.install(|| match cli.command {
        Command::FitWhitening => commands::fit_whitening(&cfg).map(drop),
        Command::BuildIndex => commands::build(&cfg).map(drop),
        Command::Query => commands::query(&cfg).map(drop),
        Command::Evaluate => commands::evaluate(&cfg).map(drop),
        Command::All => commands::run_all(&cfg).map(drop),
        Command::Synth { .. } => unreachable!(),
    })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("rmac: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(4),
    }
}
