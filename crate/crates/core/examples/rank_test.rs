//! Sequential wild-bootstrap rank selection on a small cluster network.
//!
//!     cargo run --release --example rank_test -- [seed] [B]

use coik::johansen::{self, StatVariant};
use coik::kuramoto::{self, KuramotoSpec};
use coik::linmodel::{self, VecmModel};
use coik::rankboot::{self, BootstrapConfig};
use nalgebra::DVector;

fn main() -> coik::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(7, |s| s.parse().expect("seed"));
    let samples: usize = args.next().map_or(199, |s| s.parse().expect("B"));

    let spec = KuramotoSpec {
        cluster_sizes: vec![5, 4, 3, 1, 1],
        couplings: vec![1.5, 1.0, 0.5, 0.0, 0.0],
        permutation: None,
        seed,
        strict: true,
    };
    let system = kuramoto::build_system(&spec)?;
    let model = VecmModel::with_identity_noise(system.pi.clone())?;
    let series = linmodel::simulate_vecm(&model, 1000, &DVector::zeros(system.dim()), seed)?;

    let stats = linmodel::suffstats(&series)?;
    let sol = johansen::rrr_solve(&stats)?;
    println!("canonical correlations: {:.4}", sol.eigenvalues.transpose());

    let cfg = BootstrapConfig {
        samples,
        seed,
        ..Default::default()
    };
    let decision = rankboot::sequential_rank(&series, &cfg)?;
    println!("{:>3} {:>12} {:>12} {:>7}", "r", "trace", "critical", "p");
    for rec in &decision.per_rank {
        println!("{:>3} {:>12.3} {:>12.3} {:>7.3}", rec.rank, rec.observed, rec.quantile, rec.p_value);
    }
    println!("selected rank {} (true rank {})", decision.selected_rank, system.true_rank);

    let literal = johansen::trace_stat(&sol, decision.selected_rank, StatVariant::PaperLiteral)?;
    println!("sum of the remaining eigenvalues at the selected rank: {literal:.4}");
    Ok(())
}
