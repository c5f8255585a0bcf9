//! Compare the OLS, reduced-rank, projected and symmetric low-rank estimators
//! of the coupling matrix on the reference network.
//!
//!     cargo run --release --example estimators -- [seed] [rank...]

use coik::experiment::{self, RunConfig};
use coik::linmodel;
use coik::lowrank::ComparisonRow;

fn main() -> coik::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let mut ranks: Vec<usize> = args.map(|s| s.parse().expect("rank")).collect();
    if ranks.is_empty() {
        ranks = vec![71, 81, 91];
    }

    let cfg = RunConfig {
        master_seed: seed,
        ..RunConfig::default()
    }
    .resolved();
    let sim = experiment::simulate(&cfg)?;
    let stats = linmodel::suffstats(&sim.series)?;
    let mask = sim.system.zero_mask();

    println!("{:>4} {:>9} {:>8} {:>10} {:>12}", "r", "estimator", "angle", "off-std", "lrt vs ols");
    for r in ranks {
        let ests = experiment::estimators_at(&stats, r)?;
        for est in &ests {
            let row = ComparisonRow::new(est, &ests[0], &sim.system.pi, &mask)?;
            println!(
                "{r:>4} {:>9} {:>8.4} {:>10.5} {:>12.1}",
                row.label, row.angle, row.offblock_std, row.lrt_vs_ols
            );
        }
    }
    Ok(())
}
