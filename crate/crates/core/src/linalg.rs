//! Small dense linear-algebra helpers shared by the estimators.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Condition-number ceiling for moment matrices that must be inverted.
pub const CONDITION_BOUND: f64 = 1e12;

/// Eigen-decomposition of a symmetric matrix with a fixed ordering and sign convention.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

/// How to order eigenpairs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenOrder {
    /// Largest value first.
    Descending,
    /// Largest absolute value first.
    DescendingMagnitude,
}

/// Symmetric eigen-decomposition, sorted; ties keep the solver's original index order.
/// Every eigenvector is flipped so that its largest-magnitude entry is positive.
pub fn sym_eigen(m: &DMatrix<f64>, order: EigenOrder) -> SortedEigen {
    let eig = refined_symmetric_eigen(m);
    let n = eig.eigenvalues.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let key = |i: usize| match order {
        EigenOrder::Descending => eig.eigenvalues[i],
        EigenOrder::DescendingMagnitude => eig.eigenvalues[i].abs(),
    };
    idx.sort_by(|&a, &b| key(b).total_cmp(&key(a)).then(a.cmp(&b)));

    let mut values = DVector::zeros(n);
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in idx.iter().enumerate() {
        values[dst] = eig.eigenvalues[src];
        let mut col = eig.eigenvectors.column(src).into_owned();
        fix_sign(&mut col);
        vectors.set_column(dst, &col);
    }
    SortedEigen { values, vectors }
}

/// Symmetric eigen-decomposition (unsorted) polished by cyclic Jacobi sweeps on
/// `Qᵀ M Q`. The QR solver alone can leave reconstruction errors far above
/// round-off on rank-deficient input.
pub fn refined_symmetric_eigen(m: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    let mut eig = SymmetricEigen::new(m.clone());
    let mut q = eig.eigenvectors;
    let mut t = q.transpose() * m * &q;
    symmetrize_mut(&mut t);
    let n = t.nrows();
    let scale = t.norm();
    for _ in 0..20 {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += t[(i, j)] * t[(i, j)];
            }
        }
        if off.sqrt() <= f64::EPSILON * scale * 1e-2 || scale == 0.0 {
            break;
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let apq = t[(i, j)];
                if apq == 0.0 {
                    continue;
                }
                let tau = (t[(j, j)] - t[(i, i)]) / (2.0 * apq);
                let tan = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + tan * tan).sqrt();
                let s = tan * c;
                for k in 0..n {
                    let (a, b) = (t[(k, i)], t[(k, j)]);
                    t[(k, i)] = c * a - s * b;
                    t[(k, j)] = s * a + c * b;
                }
                for k in 0..n {
                    let (a, b) = (t[(i, k)], t[(j, k)]);
                    t[(i, k)] = c * a - s * b;
                    t[(j, k)] = s * a + c * b;
                }
                for k in 0..n {
                    let (a, b) = (q[(k, i)], q[(k, j)]);
                    q[(k, i)] = c * a - s * b;
                    q[(k, j)] = s * a + c * b;
                }
            }
        }
    }
    eig.eigenvalues = t.diagonal();
    eig.eigenvectors = q;
    eig
}

/// Flip `v` so that its largest-magnitude entry (first one on ties) is positive.
pub fn fix_sign(v: &mut DVector<f64>) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
}

/// Symmetric eigenvalues only, descending.
pub fn sym_eigenvalues_desc(m: &DMatrix<f64>) -> Vec<f64> {
    let mut vals: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    vals.sort_by(|a, b| b.total_cmp(a));
    vals
}

/// 2-norm condition number of a symmetric positive semi-definite matrix.
pub fn spd_condition(m: &DMatrix<f64>) -> f64 {
    let vals = sym_eigenvalues_desc(m);
    match (vals.first(), vals.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        (Some(_), Some(_)) => f64::INFINITY,
        _ => 1.0,
    }
}

/// Cholesky factor of a symmetric positive definite matrix, guarded by [`CONDITION_BOUND`].
pub fn guarded_cholesky(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let condition = spd_condition(m);
    if !(condition <= CONDITION_BOUND) {
        return Err(Error::RankDeficient {
            what,
            condition,
            bound: CONDITION_BOUND,
        });
    }
    Cholesky::new(m.clone()).ok_or(Error::RankDeficient {
        what,
        condition,
        bound: CONDITION_BOUND,
    })
}

/// Cholesky with a cheap diagonal-ratio guard, for hot loops where a full
/// eigen-decomposition per call is too expensive. The squared ratio of the
/// extreme diagonal entries of L is a lower bound on the condition number.
pub fn cholesky_fast(m: &DMatrix<f64>, what: &'static str) -> Result<Cholesky<f64, Dyn>> {
    let fail = |condition| Error::RankDeficient {
        what,
        condition,
        bound: CONDITION_BOUND,
    };
    let chol = Cholesky::new(m.clone()).ok_or(fail(f64::INFINITY))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let condition = (hi / lo).powi(2);
    if !(condition <= CONDITION_BOUND) {
        return Err(fail(condition));
    }
    Ok(chol)
}

/// log-determinant of a symmetric positive definite matrix; `None` if not PD.
pub fn log_det_spd(m: &DMatrix<f64>) -> Option<f64> {
    let chol = Cholesky::new(m.clone())?;
    let ld = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>() * 2.0;
    ld.is_finite().then_some(ld)
}

/// Replace `m` by `(m + mᵀ)/2` in place.
pub fn symmetrize_mut(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for j in 0..n {
        for i in (j + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Count of singular values above `p · σ₁ · rel_tol`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.clone().singular_values();
    let top = sv.iter().fold(0.0f64, |a, &b| a.max(b));
    if top == 0.0 {
        return 0;
    }
    let cut = m.nrows().max(m.ncols()) as f64 * top * rel_tol;
    sv.iter().filter(|&&s| s > cut).count()
}

/// Maximum absolute asymmetry `max |m_ij − m_ji|`.
pub fn asymmetry(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in (j + 1)..n {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

/// Permutation matrix `P` with `P[perm[i], i] = 1`, so `(P x)[perm[i]] = x[i]`.
pub fn permutation_matrix(perm: &[usize]) -> DMatrix<f64> {
    let n = perm.len();
    let mut p = DMatrix::zeros(n, n);
    for (i, &pi) in perm.iter().enumerate() {
        p[(pi, i)] = 1.0;
    }
    p
}

/// Inverse of a permutation given as an index map.
pub fn invert_permutation(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &pi) in perm.iter().enumerate() {
        inv[pi] = i;
    }
    inv
}

/// `out[perm[i], perm[j]] = m[i, j]`.
pub fn permute_symmetric(m: &DMatrix<f64>, perm: &[usize]) -> DMatrix<f64> {
    let n = m.nrows();
    let mut out = DMatrix::zeros(n, n);
    for j in 0..n {
        for i in 0..n {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

/// Principal submatrix on the given coordinates.
pub fn select_square(m: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |i, j| m[(idx[i], idx[j])])
}

/// Column-wise Kahan accumulator for matrices of a fixed shape.
#[derive(Debug, Clone)]
pub struct CompensatedSum {
    sum: DMatrix<f64>,
    comp: DMatrix<f64>,
}

impl CompensatedSum {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self {
            sum: DMatrix::zeros(rows, cols),
            comp: DMatrix::zeros(rows, cols),
        }
    }

    pub fn add(&mut self, term: &DMatrix<f64>) {
        for ((s, c), &t) in self
            .sum
            .iter_mut()
            .zip(self.comp.iter_mut())
            .zip(term.iter())
        {
            let y = t - *c;
            let next = *s + y;
            *c = (next - *s) - y;
            *s = next;
        }
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.sum
    }
}
