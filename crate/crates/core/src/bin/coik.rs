use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use coik::experiment::{self, RunConfig, RunPlan, Stage};
use coik::johansen::StatVariant;
use coik::{Error, Result};

#[derive(Parser)]
#[command(name = "coik", version, about = "Cointegration analysis of linear Kuramoto-type cluster networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    opts: Options,
}

#[derive(Subcommand)]
enum Command {
    /// Build the ground-truth system and simulate a sample path
    Simulate,
    /// Select the cointegration rank by sequential bootstrap testing
    Ranktest,
    /// Compare the coupling matrix estimators against the truth
    Estimate,
    /// Recover the cluster network from the symmetric estimate
    Cluster,
    /// Run every stage end to end
    Reproduce,
}

#[derive(Args)]
struct Options {
    /// JSON run configuration; defaults reproduce the reference experiment
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed (overrides the configuration)
    #[arg(long, global = true, env = "COIK_SEED")]
    seed: Option<u64>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    bootstrap_samples: Option<usize>,
    /// Test level
    #[arg(long, global = true)]
    level: Option<f64>,
    /// Rank used for estimation and clustering instead of the tested one
    #[arg(long, global = true)]
    rank: Option<usize>,
    /// Trace statistic variant
    #[arg(long, global = true, value_parser = parse_variant)]
    variant: Option<StatVariant>,
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// First stage of `reproduce`; earlier outputs are read from the output directory
    #[arg(long, global = true, value_parser = parse_stage)]
    stage: Option<Stage>,
}

fn parse_variant(s: &str) -> std::result::Result<StatVariant, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_stage(s: &str) -> std::result::Result<Stage, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn load_config(opts: &Options) -> Result<RunConfig> {
    let mut cfg = match &opts.config {
        Some(path) => RunConfig::load(path).map_err(|e| match e {
            Error::Io { path, source } => Error::Config(format!("cannot read {}: {source}", path.display())),
            other => other,
        })?,
        None => RunConfig::default(),
    };
    if let Some(seed) = opts.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = &opts.out {
        cfg.output_dir = out.clone();
    }
    if let Some(b) = opts.bootstrap_samples {
        cfg.bootstrap.samples = b;
    }
    if let Some(level) = opts.level {
        cfg.bootstrap.level = level;
    }
    if let Some(v) = opts.variant {
        cfg.bootstrap.variant = v;
    }
    if let Some(t) = opts.threads {
        cfg.threads = Some(t);
    }
    Ok(cfg)
}

fn execute(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli.opts)?;
    let plan = match cli.command {
        Command::Simulate => RunPlan::only(Stage::Simulate),
        Command::Ranktest => RunPlan::only(Stage::Ranktest),
        Command::Estimate => RunPlan::only(Stage::Estimate),
        Command::Cluster => RunPlan::only(Stage::Cluster),
        Command::Reproduce => RunPlan::from_stage(cli.opts.stage.unwrap_or(Stage::Simulate)),
    };
    let manifest = experiment::run(
        &cfg,
        RunPlan {
            rank: cli.opts.rank,
            ..plan
        },
    )?;
    for w in &manifest.warnings {
        log::warn!("{w}");
    }
    let files: usize = manifest.stages.iter().map(|s| s.files.len()).sum();
    println!("wrote {files} files to {}", manifest.runtime.output_dir.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
