//! Reduced-rank regression for the VECM: the canonical-correlation eigenvalue
//! problem `|λ S11 − S10 S00⁻¹ S01| = 0`, trace statistics and rank-r fits.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kuramoto::{self, I1Condition};
use crate::linalg;
use crate::linmodel::{self, SufficientStats};

/// Form of the likelihood-ratio trace statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StatVariant {
    /// `−N Σ_{i>r} log(1 − λ̂_i)`.
    #[default]
    Standard,
    /// `Σ_{i>r} λ̂_i`, without the sample-size scaling.
    PaperLiteral,
}

impl std::str::FromStr for StatVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "paper-literal" => Ok(Self::PaperLiteral),
            other => Err(Error::Config(format!("unknown statistic variant `{other}`"))),
        }
    }
}

/// Solution of the reduced-rank eigenproblem for one dataset.
#[derive(Debug, Clone)]
pub struct RrrSolution {
    /// `λ̂_1 ≥ … ≥ λ̂_p`.
    pub eigenvalues: DVector<f64>,
    /// Columns `v_i` with `Vᵀ S11 V = I`.
    pub eigenvectors: DMatrix<f64>,
    pub stats: SufficientStats,
}

impl RrrSolution {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }
}

/// Solve `|λ S11 − S10 S00⁻¹ S01| = 0` through the Cholesky factor `S11 = L Lᵀ`:
/// the eigenvalues are those of the symmetric `C Cᵀ` with `C = L⁻¹ S10 K⁻ᵀ`, `S00 = K Kᵀ`.
pub fn rrr_solve(stats: &SufficientStats) -> Result<RrrSolution> {
    let l11 = linalg::guarded_cholesky(&stats.s11, "S11")?;
    let l00 = linalg::guarded_cholesky(&stats.s00, "S00")?;
    let m = canonical_matrix(stats, &l11, &l00);
    let p = stats.dim();

    let eig = linalg::refined_symmetric_eigen(&m);
    let l = l11.l();
    // V = L⁻ᵀ W
    let v = l
        .transpose()
        .solve_upper_triangular(&eig.eigenvectors)
        .ok_or_else(|| Error::InvalidInput("singular Cholesky factor".into()))?;

    let mut cols: Vec<(f64, DVector<f64>)> = (0..p)
        .map(|i| {
            let mut c = v.column(i).into_owned();
            linalg::fix_sign(&mut c);
            (eig.eigenvalues[i], c)
        })
        .collect();
    cols.sort_by(|(la, va), (lb, vb)| {
        lb.total_cmp(la).then_with(|| {
            va.iter()
                .zip(vb.iter())
                .map(|(a, b)| b.total_cmp(a))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });

    let eigenvalues = DVector::from_iterator(p, cols.iter().map(|(l, _)| *l));
    let mut eigenvectors = DMatrix::zeros(p, p);
    for (j, (_, c)) in cols.iter().enumerate() {
        eigenvectors.set_column(j, c);
    }
    Ok(RrrSolution {
        eigenvalues,
        eigenvectors,
        stats: stats.clone(),
    })
}

fn canonical_matrix(
    stats: &SufficientStats,
    l11: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    l00: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
) -> DMatrix<f64> {
    // C = L⁻¹ S10 K⁻ᵀ, i.e. Cᵀ = K⁻¹ S01 L⁻ᵀ
    let a = l11
        .l_dirty()
        .solve_lower_triangular(&stats.s10)
        .expect("Cholesky factor has a positive diagonal");
    let c = l00
        .l_dirty()
        .solve_lower_triangular(&a.transpose())
        .expect("Cholesky factor has a positive diagonal")
        .transpose();
    let mut m = &c * c.transpose();
    linalg::symmetrize_mut(&mut m);
    m
}

/// Descending eigenvalues only, with a cheap conditioning guard. Used inside bootstrap loops.
pub fn rrr_eigenvalues(stats: &SufficientStats) -> Result<Vec<f64>> {
    let l11 = linalg::cholesky_fast(&stats.s11, "S11")?;
    let l00 = linalg::cholesky_fast(&stats.s00, "S00")?;
    let m = canonical_matrix(stats, &l11, &l00);
    Ok(linalg::sym_eigenvalues_desc(&m))
}

/// Trace statistic for `H_r` against `H_p` from sorted eigenvalues.
pub fn trace_from_eigenvalues(eigenvalues: &[f64], n: usize, r: usize, variant: StatVariant) -> Result<f64> {
    let p = eigenvalues.len();
    if r > p {
        return Err(Error::InvalidInput(format!("rank {r} exceeds dimension {p}")));
    }
    let tail = eigenvalues[r..].iter();
    Ok(match variant {
        StatVariant::Standard => -(n as f64) * tail.map(|&l| (1.0 - l.clamp(0.0, 1.0)).ln()).sum::<f64>(),
        StatVariant::PaperLiteral => tail.map(|&l| l.max(0.0)).sum(),
    })
}

pub fn trace_stat(sol: &RrrSolution, r: usize, variant: StatVariant) -> Result<f64> {
    trace_from_eigenvalues(sol.eigenvalues.as_slice(), sol.stats.n, r, variant)
}

/// Maximum-likelihood fit under `rank(Π) ≤ r`.
#[derive(Debug, Clone)]
pub struct JohansenEstimate {
    pub rank: usize,
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub pi: DMatrix<f64>,
    /// Constant term; zero unless the statistics were built with a constant.
    pub mu: DVector<f64>,
    pub omega: DMatrix<f64>,
    pub loglik: f64,
    pub i1: I1Condition,
}

pub fn fit_rank(stats: &SufficientStats, r: usize) -> Result<JohansenEstimate> {
    fit_rank_from(&rrr_solve(stats)?, r)
}

/// Rank-r fit reusing an existing eigen-solution.
pub fn fit_rank_from(sol: &RrrSolution, r: usize) -> Result<JohansenEstimate> {
    let p = sol.dim();
    if r > p {
        return Err(Error::InvalidInput(format!("rank {r} exceeds dimension {p}")));
    }
    let stats = &sol.stats;
    let beta = sol.eigenvectors.columns(0, r).into_owned();
    let gram = beta.transpose() * &stats.s11 * &beta;
    let alpha = if r == 0 {
        DMatrix::zeros(p, 0)
    } else {
        let chol = gram
            .cholesky()
            .ok_or_else(|| Error::InvalidInput("singular beta' S11 beta".into()))?;
        // α = S01 β (βᵀ S11 β)⁻¹
        chol.solve(&(beta.transpose() * &stats.s10)).transpose()
    };
    let pi = &alpha * beta.transpose();
    let omega = linmodel::omega_given_pi(stats, &pi)?;
    let loglik = linmodel::loglik_from_omega(stats.n, &omega)?;
    let mu = &stats.mean_diff - &pi * &stats.mean_lag;
    let i1 = kuramoto::i1_condition_factors(&alpha, &beta)?;
    Ok(JohansenEstimate {
        rank: r,
        alpha,
        beta,
        pi,
        mu,
        omega,
        loglik,
        i1,
    })
}

/// `β* = β (cᵀβ)⁻¹` with `c = (I_r, 0)ᵀ`.
pub fn normalize_beta(beta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let r = beta.ncols();
    if r > beta.nrows() {
        return Err(Error::DimensionMismatch(format!("beta is {:?}", beta.shape())));
    }
    if r == 0 {
        return Ok(beta.clone());
    }
    let top = beta.rows(0, r).into_owned();
    let lu = top.lu();
    // Reject blocks that are singular to working precision.
    let scale = beta.rows(0, r).abs().max().max(f64::MIN_POSITIVE);
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= (scale * 1e-12).powi(r as i32) {
        return Err(Error::NormalizationInvalid { rank: r });
    }
    // β* = β T⁻¹  ⇔  Tᵀ β*ᵀ = βᵀ
    let top_t = beta.rows(0, r).transpose();
    let sol = top_t
        .lu()
        .solve(&beta.transpose())
        .ok_or(Error::NormalizationInvalid { rank: r })?;
    Ok(sol.transpose())
}

/// Write `r,lambda,trace_standard,trace_literal` for `r = 0..=p`, where `lambda`
/// is `λ̂_{r+1}` (empty for `r = p`).
pub fn write_rank_profile<W: Write>(sol: &RrrSolution, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["r", "lambda", "trace_standard", "trace_literal"])?;
    let p = sol.dim();
    for r in 0..=p {
        let lambda = if r < p { format!("{:e}", sol.eigenvalues[r]) } else { String::new() };
        w.write_record([
            r.to_string(),
            lambda,
            format!("{:e}", trace_stat(sol, r, StatVariant::Standard)?),
            format!("{:e}", trace_stat(sol, r, StatVariant::PaperLiteral)?),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{simulate_vecm, suffstats, VecmModel};

    fn toy_stats() -> SufficientStats {
        let pi = DMatrix::from_row_slice(3, 3, &[-0.5, 0.5, 0.0, 0.5, -0.5, 0.0, 0.0, 0.0, 0.0]);
        let model = VecmModel::with_identity_noise(pi).unwrap();
        suffstats(&simulate_vecm(&model, 300, &DVector::zeros(3), 9).unwrap()).unwrap()
    }

    #[test]
    fn eigen_invariants() {
        let stats = toy_stats();
        let sol = rrr_solve(&stats).unwrap();
        let v = &sol.eigenvectors;
        let gram = v.transpose() * &stats.s11 * v;
        assert!((gram - DMatrix::identity(3, 3)).norm() < 1e-9);
        let target = &stats.s10 * stats.s00.clone().try_inverse().unwrap() * &stats.s01;
        for i in 0..3 {
            let l = sol.eigenvalues[i];
            assert!((-1e-10..1.0).contains(&l));
            let resid = (&stats.s11 * l - &target) * v.column(i);
            assert!(resid.norm() <= 1e-8 * stats.s11.norm());
            if i > 0 {
                assert!(sol.eigenvalues[i - 1] >= l);
            }
        }
    }

    #[test]
    fn trace_edge_cases() {
        let sol = rrr_solve(&toy_stats()).unwrap();
        for v in [StatVariant::Standard, StatVariant::PaperLiteral] {
            assert_eq!(trace_stat(&sol, 3, v).unwrap(), 0.0);
            assert!(trace_stat(&sol, 4, v).is_err());
            for r in 0..3 {
                assert!(trace_stat(&sol, r, v).unwrap() >= trace_stat(&sol, r + 1, v).unwrap());
            }
        }
    }

    #[test]
    fn rank_zero_and_full() {
        let stats = toy_stats();
        let f0 = fit_rank(&stats, 0).unwrap();
        assert_eq!(f0.pi, DMatrix::zeros(3, 3));
        assert!((&f0.omega - &stats.s00).norm() < 1e-15);
        let f3 = fit_rank(&stats, 3).unwrap();
        let ols = linmodel::ols_pi(&stats).unwrap();
        assert!((&f3.pi - ols).norm() < 1e-8);
    }

    #[test]
    fn normalize_examples() {
        let beta = DMatrix::from_row_slice(3, 1, &[1.0, 2.0, 3.0]);
        assert_eq!(normalize_beta(&beta).unwrap(), beta);
        let beta = DMatrix::from_row_slice(3, 1, &[2.0, 2.0, 3.0]);
        assert_eq!(normalize_beta(&beta).unwrap(), DMatrix::from_row_slice(3, 1, &[1.0, 1.0, 1.5]));
        let beta = DMatrix::from_row_slice(3, 1, &[0.0, 2.0, 3.0]);
        assert!(matches!(normalize_beta(&beta), Err(Error::NormalizationInvalid { rank: 1 })));
    }

    #[test]
    fn variant_parse() {
        assert_eq!("paper-literal".parse::<StatVariant>().unwrap(), StatVariant::PaperLiteral);
        assert!("x".parse::<StatVariant>().is_err());
    }
}
