//! Build the reference cluster network, check the I(1) condition and simulate it.
//!
//!     cargo run --release --example simulate_kuramoto -- [seed] [N]

use coik::kuramoto::{self, KuramotoSpec};
use coik::linmodel::{self, VecmModel};
use nalgebra::DVector;

fn main() -> coik::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().map_or(1, |s| s.parse().expect("seed"));
    let n: usize = args.next().map_or(2000, |s| s.parse().expect("N"));

    let spec = KuramotoSpec::reproduction(seed);
    let system = kuramoto::build_system(&spec)?;
    println!("dimension {}, true rank {}", system.dim(), system.true_rank);
    for (label, (size, kappa)) in system.cluster_sizes.iter().zip(&system.couplings).enumerate() {
        println!("cluster {:>2}: size {size}, coupling {kappa:.3}", label + 1);
    }
    let i1 = kuramoto::i1_condition(&system.pi)?;
    println!("spectral radius of I + Pi restricted to the cointegrating space: {:.6} (I(1): {})", i1.radius, i1.satisfied);
    for w in spec.boundary_warnings() {
        println!("warning: {w}");
    }

    let model = VecmModel::with_identity_noise(system.pi.clone())?;
    let series = linmodel::simulate_vecm(&model, n, &DVector::zeros(system.dim()), seed)?;
    let last = series.path().column(n - 1);
    println!("simulated {n} steps; final |y| = {:.3}", last.norm());

    let stats = linmodel::suffstats(&series)?;
    let ols = linmodel::ols_pi(&stats)?;
    println!(
        "OLS estimate: max |error| {:.4}, log-likelihood {:.2}",
        (&ols - &system.pi).abs().max(),
        linmodel::profile_loglik(&stats, &ols)?
    );
    Ok(())
}
