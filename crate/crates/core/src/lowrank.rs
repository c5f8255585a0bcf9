//! Symmetric low-rank estimation of the coupling matrix.
//!
//! The symmetric rank-r estimator first projects the OLS estimate onto the
//! symmetric matrices (its Hermitian part) and then keeps the `r` leading
//! singular triplets. For a symmetric matrix the singular values are the
//! absolute eigenvalues, so the truncation is done with a symmetric
//! eigen-decomposition, which keeps the result exactly symmetric.

use std::fmt;
use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::johansen::JohansenEstimate;
use crate::linalg::{self, EigenOrder};
use crate::linmodel::{self, SufficientStats};

/// Relative threshold (times `p · σ₁`) for counting effective rank.
pub const EFFECTIVE_RANK_TOL: f64 = 1e-12;

/// Which estimator produced a [`PiEstimate`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorLabel {
    /// Unrestricted full-rank OLS.
    Ols,
    /// Reduced-rank (non-symmetric) maximum likelihood.
    Johansen,
    /// Rank-r truncation of the Hermitian part of the Johansen estimate.
    Proj,
    /// Rank-r truncation of the Hermitian part of the OLS estimate.
    Sym,
}

impl EstimatorLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ols => "ols",
            Self::Johansen => "johansen",
            Self::Proj => "proj",
            Self::Sym => "sym",
        }
    }
}

impl fmt::Display for EstimatorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

#[derive(Debug, Clone)]
pub struct PiEstimate {
    pub label: EstimatorLabel,
    pub pi: DMatrix<f64>,
    /// Requested rank (`p` for OLS).
    pub requested_rank: usize,
    /// Singular values above `p · σ₁ · 1e-12`.
    pub rank: usize,
    pub omega: DMatrix<f64>,
    pub loglik: f64,
}

impl PiEstimate {
    fn assemble(label: EstimatorLabel, stats: &SufficientStats, pi: DMatrix<f64>, requested_rank: usize) -> Result<Self> {
        let omega = linmodel::omega_given_pi(stats, &pi)?;
        let loglik = linmodel::loglik_from_omega(stats.n, &omega)?;
        let rank = linalg::numerical_rank(&pi, EFFECTIVE_RANK_TOL);
        Ok(Self {
            label,
            pi,
            requested_rank,
            rank,
            omega,
            loglik,
        })
    }
}

/// `(M + Mᵀ)/2`.
pub fn hermitian_part(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut h = (m + m.transpose()) * 0.5;
    linalg::symmetrize_mut(&mut h);
    h
}

/// Best Frobenius approximation of rank at most `r`. Symmetric input is routed
/// through [`truncate_symmetric`] and stays exactly symmetric.
pub fn svd_truncate(m: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let (rows, cols) = m.shape();
    if r > rows.min(cols) {
        return Err(Error::InvalidInput(format!("rank {r} exceeds matrix size {rows}x{cols}")));
    }
    if r == 0 {
        return Ok(DMatrix::zeros(rows, cols));
    }
    if m.is_square() && linalg::asymmetry(m) == 0.0 {
        return truncate_symmetric(m, r);
    }
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let vt = svd.v_t.expect("requested V");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut out = DMatrix::zeros(rows, cols);
    for &k in idx.iter().take(r) {
        let s = svd.singular_values[k];
        out += u.column(k) * vt.row(k) * s;
    }
    Ok(out)
}

/// Keep the `r` eigenpairs of largest magnitude of a symmetric matrix.
pub fn truncate_symmetric(m: &DMatrix<f64>, r: usize) -> Result<DMatrix<f64>> {
    let p = m.nrows();
    if !m.is_square() || r > p {
        return Err(Error::InvalidInput(format!("rank {r} invalid for {:?}", m.shape())));
    }
    if r == 0 {
        return Ok(DMatrix::zeros(p, p));
    }
    if r == p {
        return Ok(m.clone());
    }
    let eig = linalg::sym_eigen(m, EigenOrder::DescendingMagnitude);
    let v = eig.vectors.columns(0, r);
    let scaled = DMatrix::from_fn(p, r, |i, j| v[(i, j)] * eig.values[j]);
    let mut out = scaled * v.transpose();
    linalg::symmetrize_mut(&mut out);
    Ok(out)
}

/// Unrestricted OLS estimate.
pub fn estimate_ols(stats: &SufficientStats) -> Result<PiEstimate> {
    let pi = linmodel::ols_pi(stats)?;
    PiEstimate::assemble(EstimatorLabel::Ols, stats, pi, stats.dim())
}

/// Reduced-rank fit wrapped as a [`PiEstimate`].
pub fn estimate_johansen(fit: &JohansenEstimate, stats: &SufficientStats) -> Result<PiEstimate> {
    PiEstimate::assemble(EstimatorLabel::Johansen, stats, fit.pi.clone(), fit.rank)
}

/// Rank-r truncation of the Hermitian part of the OLS estimate.
pub fn estimate_sym(stats: &SufficientStats, r: usize) -> Result<PiEstimate> {
    let ols = linmodel::ols_pi(stats)?;
    let pi = truncate_symmetric(&hermitian_part(&ols), r)?;
    PiEstimate::assemble(EstimatorLabel::Sym, stats, pi, r)
}

/// Rank-r truncation of the Hermitian part of a reduced-rank fit.
pub fn estimate_proj(fit: &JohansenEstimate, stats: &SufficientStats, r: usize) -> Result<PiEstimate> {
    if r > fit.rank {
        log::warn!("proj estimator at rank {r} from a rank-{} fit", fit.rank);
    }
    let pi = truncate_symmetric(&hermitian_part(&fit.pi), r)?;
    PiEstimate::assemble(EstimatorLabel::Proj, stats, pi, r)
}

/// A projection onto a closed set of matrices, used by [`project_and_lift`].
pub trait SubspaceProjector {
    fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64>;
}

/// Orthogonal projection onto the symmetric matrices.
#[derive(Debug, Clone, Copy, Default)]
pub struct SymmetricProjector;

impl SubspaceProjector for SymmetricProjector {
    fn project(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        hermitian_part(m)
    }
}

#[derive(Debug, Clone)]
pub struct ProjectLiftResult {
    pub matrix: DMatrix<f64>,
    /// Number of project/lift rounds performed.
    pub iterations: usize,
    pub residual: f64,
}

/// Alternate projection onto the structure set and rank-r truncation, starting
/// from `target`. Stops once an iterate is feasible for the projector
/// (projection moves it by less than `tol`) or two iterates differ by less than `tol`.
pub fn project_and_lift<P: SubspaceProjector>(
    target: &DMatrix<f64>,
    projector: &P,
    r: usize,
    tol: f64,
    max_iter: usize,
) -> Result<ProjectLiftResult> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let mut current = target.clone();
    let mut residual = f64::INFINITY;
    for i in 1..=max_iter {
        let projected = projector.project(&current);
        let lifted = svd_truncate(&projected, r)?;
        let step = (&lifted - &current).norm();
        let infeasibility = (projector.project(&lifted) - &lifted).norm();
        residual = step.min(infeasibility);
        current = lifted;
        if infeasibility < tol || step < tol {
            return Ok(ProjectLiftResult {
                matrix: current,
                iterations: i,
                residual,
            });
        }
    }
    Err(Error::IterationLimit {
        iterations: max_iter,
        residual,
        last: Box::new(current),
    })
}

/// `Θ(U, V) = arccos(⟨U,V⟩_F / (‖U‖_F ‖V‖_F))`, with `π/2` if either is zero.
pub fn matrix_angle(u: &DMatrix<f64>, v: &DMatrix<f64>) -> Result<f64> {
    if u.shape() != v.shape() {
        return Err(Error::DimensionMismatch(format!("{:?} vs {:?}", u.shape(), v.shape())));
    }
    let nu = u.norm();
    let nv = v.norm();
    if nu == 0.0 || nv == 0.0 {
        return Ok(std::f64::consts::FRAC_PI_2);
    }
    Ok((u.dot(v) / (nu * nv)).clamp(-1.0, 1.0).acos())
}

/// Population standard deviation of the entries of `est` where `zero_mask` is set.
pub fn offblock_std(est: &DMatrix<f64>, zero_mask: &[Vec<bool>]) -> Result<f64> {
    let (rows, cols) = est.shape();
    if zero_mask.len() != rows || zero_mask.iter().any(|r| r.len() != cols) {
        return Err(Error::DimensionMismatch("mask shape differs from estimate".into()));
    }
    let vals: Vec<f64> = (0..rows)
        .flat_map(|i| (0..cols).map(move |j| (i, j)))
        .filter(|&(i, j)| zero_mask[i][j])
        .map(|(i, j)| est[(i, j)])
        .collect();
    if vals.is_empty() {
        return Err(Error::UndefinedMeasure("off-block mask is empty".into()));
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64;
    Ok(var.sqrt())
}

/// Factor a symmetric matrix as `β δ βᵀ` with `β` the `r` leading-magnitude
/// eigenvectors and `δ` the diagonal of their eigenvalues.
pub fn sym_factorize(pi: &DMatrix<f64>, r: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let p = pi.nrows();
    if !pi.is_square() || r > p {
        return Err(Error::InvalidInput(format!("rank {r} invalid for {:?}", pi.shape())));
    }
    let scale = pi.abs().max().max(1.0);
    if linalg::asymmetry(pi) > 1e-10 * scale {
        return Err(Error::InvalidInput("matrix is not symmetric".into()));
    }
    if r == 0 {
        return Ok((DMatrix::zeros(p, 0), DMatrix::zeros(0, 0)));
    }
    let eig = linalg::sym_eigen(pi, EigenOrder::DescendingMagnitude);
    let beta = eig.vectors.columns(0, r).into_owned();
    let delta = DMatrix::from_diagonal(&DVector::from_iterator(r, eig.values.iter().take(r).copied()));
    Ok((beta, delta))
}

/// Stationary point for a symmetric `δ` given `β` and `Ω`:
/// `δ = ½ (βᵀS11β)⁻¹ βᵀ(S10 Ω⁻¹ + Ω⁻¹ S01)β (βᵀΩ⁻¹β)⁻¹`.
/// Only a diagnostic; the returned flag reports whether the result is symmetric.
pub fn symmetric_delta_diagnostic(
    stats: &SufficientStats,
    beta: &DMatrix<f64>,
    omega: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, f64)> {
    let omega_inv = omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::DegenerateLikelihood("Omega is not positive definite".into()))?
        .inverse();
    let a = (beta.transpose() * &stats.s11 * beta)
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular beta' S11 beta".into()))?;
    let b = (beta.transpose() * &omega_inv * beta)
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("singular beta' Omega^-1 beta".into()))?;
    let middle = beta.transpose() * (&stats.s10 * &omega_inv + &omega_inv * &stats.s01) * beta;
    let delta = a * middle * b * 0.5;
    let asym = linalg::asymmetry(&delta);
    Ok((delta, asym))
}

/// One row of the estimator comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: EstimatorLabel,
    pub rank: usize,
    pub angle: f64,
    pub offblock_std: f64,
    pub loglik: f64,
    pub lrt_vs_ols: f64,
}

impl ComparisonRow {
    pub fn new(est: &PiEstimate, ols: &PiEstimate, truth: &DMatrix<f64>, zero_mask: &[Vec<bool>]) -> Result<Self> {
        Ok(Self {
            label: est.label,
            rank: est.requested_rank,
            angle: matrix_angle(&est.pi, truth)?,
            offblock_std: offblock_std(&est.pi, zero_mask)?,
            loglik: est.loglik,
            lrt_vs_ols: 2.0 * (ols.loglik - est.loglik),
        })
    }
}

/// CSV `label,rank,angle,offblock_std,loglik,lrt_vs_ols`.
pub fn write_comparison<W: Write>(rows: &[ComparisonRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "rank", "angle", "offblock_std", "loglik", "lrt_vs_ols"])?;
    for r in rows {
        w.write_record([
            r.label.to_string(),
            r.rank.to_string(),
            format!("{:e}", r.angle),
            format!("{:e}", r.offblock_std),
            format!("{:e}", r.loglik),
            format!("{:e}", r.lrt_vs_ols),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv>", e))?;
    Ok(())
}
