//! Alternating projection between a structure set and the rank-r matrices.
//!
//! For the symmetric matrices the first round already lands on a symmetric
//! rank-r matrix, which is the closed-form symmetric low-rank estimate.

use coik::lowrank::{self, SubspaceProjector, SymmetricProjector};
use nalgebra::DMatrix;

/// Symmetric matrices with a zero diagonal.
struct HollowSymmetric;

impl SubspaceProjector for HollowSymmetric {
    fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut s = lowrank::hermitian_part(m);
        s.fill_diagonal(0.0);
        s
    }
}

fn main() -> coik::Result<()> {
    let target = DMatrix::from_row_slice(4, 4, &[
        -1.0, 0.6, 0.1, 0.0, //
        0.4, -1.2, 0.0, 0.2, //
        0.0, 0.1, -0.5, 0.5, //
        0.1, 0.0, 0.4, -0.6,
    ]);
    let r = 2;

    let sym = lowrank::project_and_lift(&target, &SymmetricProjector, r, 1e-10, 100)?;
    let closed = lowrank::truncate_symmetric(&lowrank::hermitian_part(&target), r)?;
    println!(
        "symmetric: {} iteration(s), distance to closed form {:.2e}",
        sym.iterations,
        (&sym.matrix - &closed).norm()
    );

    match lowrank::project_and_lift(&target, &HollowSymmetric, r, 1e-10, 20) {
        Ok(res) => println!("hollow symmetric: converged after {} iterations", res.iterations),
        Err(coik::Error::IterationLimit { iterations, residual, last }) => println!(
            "hollow symmetric: stopped after {iterations} iterations, residual {residual:.2e}, max diagonal {:.2e}",
            last.diagonal().abs().max()
        ),
        Err(e) => return Err(e),
    }
    Ok(())
}
