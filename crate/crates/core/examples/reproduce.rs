//! Run the whole pipeline and write every table and figure.
//!
//!     cargo run --release --example reproduce -- <out-dir> [config.json]
//!
//! Without a configuration file this runs the full reference experiment,
//! which takes several minutes on a single core.

use std::path::PathBuf;

use coik::experiment::{self, RunConfig, RunPlan};

fn main() -> coik::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let mut args = std::env::args().skip(1);
    let out = PathBuf::from(args.next().unwrap_or_else(|| "coik-out".into()));
    let mut cfg = match args.next() {
        Some(path) => RunConfig::load(path.as_ref())?,
        None => RunConfig::default(),
    };
    cfg.output_dir = out;

    let manifest = experiment::run(&cfg, RunPlan::full())?;
    for stage in &manifest.stages {
        let seconds = manifest
            .runtime
            .timings
            .iter()
            .find(|t| t.stage == stage.stage)
            .map_or(0.0, |t| t.seconds);
        println!("{:<9} {:>7.2}s", stage.stage, seconds);
        for f in &stage.files {
            println!("    {:<28} {}", f.path, &f.sha256[..16]);
        }
    }
    for w in &manifest.warnings {
        println!("warning: {w}");
    }
    Ok(())
}
