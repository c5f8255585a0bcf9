//! Ground-truth coupling matrices for linear Kuramoto-type cluster networks.
//!
//! A system is a set of independent fully-coupled clusters. A cluster of
//! size `p_i` with coupling `κ_i` contributes the block
//! `(κ_i / p_i) (1 1ᵀ − p_i I)`, whose nonzero eigenvalue is `−κ_i`
//! with multiplicity `p_i − 1`. Singleton clusters contribute a zero block.
//! The assembled matrix is then scrambled by a coordinate permutation.

use nalgebra::{Complex, DMatrix};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::seed;

/// Cluster sizes, couplings, and how to scramble coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KuramotoSpec {
    pub cluster_sizes: Vec<usize>,
    pub couplings: Vec<f64>,
    /// `permutation[i]` is the scrambled position of block-ordered coordinate `i`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutation: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: u64,
    /// Require every coupling to lie strictly inside `(0, 2)`.
    #[serde(default)]
    pub strict: bool,
}

impl KuramotoSpec {
    /// Twelve 8-clusters with couplings from 2.00 down to 0.50 in equal steps, plus four singletons.
    pub fn reproduction(seed: u64) -> Self {
        let mut cluster_sizes = vec![8; 12];
        let mut couplings: Vec<f64> = (0..12).map(|i| 2.0 - 1.5 * i as f64 / 11.0).collect();
        cluster_sizes.extend([1; 4]);
        couplings.extend([0.0; 4]);
        Self {
            cluster_sizes,
            couplings,
            permutation: None,
            seed,
            strict: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.cluster_sizes.iter().sum()
    }

    /// `c_i = κ_i / p_i`.
    pub fn scaled_couplings(&self) -> Vec<f64> {
        self.cluster_sizes
            .iter()
            .zip(&self.couplings)
            .map(|(&p, &k)| k / p as f64)
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.cluster_sizes.is_empty() {
            return Err(Error::InvalidInput("no clusters given".into()));
        }
        if self.cluster_sizes.len() != self.couplings.len() {
            return Err(Error::InvalidInput(format!(
                "{} cluster sizes but {} couplings",
                self.cluster_sizes.len(),
                self.couplings.len()
            )));
        }
        for (i, (&p, &k)) in self.cluster_sizes.iter().zip(&self.couplings).enumerate() {
            match p {
                0 => return Err(Error::InvalidInput(format!("cluster {i} is empty"))),
                1 if k != 0.0 => {
                    return Err(Error::InvalidInput(format!(
                        "singleton cluster {i} must have zero coupling, got {k}"
                    )))
                }
                1 => {}
                _ if !(k > 0.0 && k.is_finite()) => {
                    return Err(Error::InvalidInput(format!("cluster {i} needs positive coupling, got {k}")))
                }
                _ if self.strict && k >= 2.0 => {
                    return Err(Error::InvalidInput(format!(
                        "cluster {i}: coupling {k} outside (0, 2) violates the I(1) condition"
                    )))
                }
                _ => {}
            }
        }
        if let Some(perm) = &self.permutation {
            let mut seen = vec![false; self.dim()];
            if perm.len() != self.dim() {
                return Err(Error::InvalidInput(format!(
                    "permutation has length {}, system has {}",
                    perm.len(),
                    self.dim()
                )));
            }
            for &j in perm {
                if j >= seen.len() || std::mem::replace(&mut seen[j], true) {
                    return Err(Error::InvalidInput("permutation is not a bijection".into()));
                }
            }
        }
        Ok(())
    }

    /// Couplings at or beyond the I(1) boundary `κ = 2`.
    pub fn boundary_warnings(&self) -> Vec<String> {
        self.couplings
            .iter()
            .enumerate()
            .filter(|(_, &k)| k >= 2.0)
            .map(|(i, &k)| {
                format!(
                    "cluster {} has coupling {k:.2}: spectral radius |1 - kappa| = {:.3} is not below 1",
                    i + 1,
                    (1.0 - k).abs()
                )
            })
            .collect()
    }
}

/// Assembled ground truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KuramotoSystem {
    /// Coupling matrix in scrambled order.
    #[serde(skip)]
    pub pi: DMatrix<f64>,
    /// p×r block factor in block order.
    #[serde(skip)]
    pub beta: DMatrix<f64>,
    /// r×r block-diagonal core, including the `κ_i / p_i` scaling.
    #[serde(skip)]
    pub delta: DMatrix<f64>,
    pub true_rank: usize,
    /// Cluster label (1-based) of each scrambled coordinate.
    pub assignment: Vec<usize>,
    pub permutation: Vec<usize>,
    pub cluster_sizes: Vec<usize>,
    pub couplings: Vec<f64>,
}

impl KuramotoSystem {
    pub fn dim(&self) -> usize {
        self.pi.nrows()
    }

    /// Coupling matrix in block order.
    pub fn block_pi(&self) -> DMatrix<f64> {
        linalg::permute_symmetric(&self.pi, &linalg::invert_permutation(&self.permutation))
    }

    /// Entries where the true matrix is structurally zero (off the cluster blocks).
    pub fn zero_mask(&self) -> Vec<Vec<bool>> {
        let p = self.dim();
        (0..p)
            .map(|i| (0..p).map(|j| self.assignment[i] != self.assignment[j]).collect())
            .collect()
    }

    /// Coordinates of each cluster (scrambled indices), in label order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_sizes.len()];
        for (coord, &label) in self.assignment.iter().enumerate() {
            out[label - 1].push(coord);
        }
        out
    }

    /// Scrambled coordinate order that lists clusters contiguously (inverse scrambling).
    pub fn block_order(&self) -> Vec<usize> {
        self.permutation.clone()
    }
}

/// `(κ/p)(1 1ᵀ − p I)`: diagonal `κ(1 − p)/p`, off-diagonal `κ/p`.
pub fn build_cluster_block(size: usize, kappa: f64) -> Result<DMatrix<f64>> {
    if size < 2 {
        return Err(Error::InvalidInput(format!("cluster block needs size >= 2, got {size}")));
    }
    let c = kappa / size as f64;
    let diag = kappa * (1.0 - size as f64) / size as f64;
    Ok(DMatrix::from_fn(size, size, |i, j| if i == j { diag } else { c }))
}

/// `β_i = [I_r; −1ᵀ]` and `δ_i` with `−r` on the diagonal and `1` elsewhere, `r = p_i − 1`.
pub fn build_factors(size: usize) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if size < 2 {
        return Err(Error::InvalidInput(format!("cluster factors need size >= 2, got {size}")));
    }
    let r = size - 1;
    let beta = DMatrix::from_fn(size, r, |i, j| {
        if i == r {
            -1.0
        } else if i == j {
            1.0
        } else {
            0.0
        }
    });
    let delta = DMatrix::from_fn(r, r, |i, j| if i == j { -(r as f64) } else { 1.0 });
    Ok((beta, delta))
}

/// Draw a uniform permutation of `0..p` by Fisher–Yates.
pub fn random_permutation(p: usize, seed: u64) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..p).collect();
    perm.shuffle(&mut seed::rng(seed::derive(seed, &[seed::tag::PERMUTATION])));
    perm
}

/// Assemble the block-diagonal coupling matrix and scramble it.
pub fn build_system(spec: &KuramotoSpec) -> Result<KuramotoSystem> {
    spec.validate()?;
    for w in spec.boundary_warnings() {
        log::warn!("{w}");
    }
    let p = spec.dim();
    let k = spec.cluster_sizes.len();
    let true_rank = p - k;

    let mut block = DMatrix::zeros(p, p);
    let mut beta = DMatrix::zeros(p, true_rank);
    let mut delta = DMatrix::zeros(true_rank, true_rank);
    let mut block_labels = Vec::with_capacity(p);
    let (mut row, mut col) = (0, 0);
    for (label, (&size, &kappa)) in spec.cluster_sizes.iter().zip(&spec.couplings).enumerate() {
        block_labels.extend(std::iter::repeat(label + 1).take(size));
        if size >= 2 {
            let r = size - 1;
            block
                .view_mut((row, row), (size, size))
                .copy_from(&build_cluster_block(size, kappa)?);
            let (b, d) = build_factors(size)?;
            beta.view_mut((row, col), (size, r)).copy_from(&b);
            delta
                .view_mut((col, col), (r, r))
                .copy_from(&(d * (kappa / size as f64)));
            col += r;
        }
        row += size;
    }

    let permutation = spec
        .permutation
        .clone()
        .unwrap_or_else(|| random_permutation(p, spec.seed));
    let pi = linalg::permute_symmetric(&block, &permutation);
    let mut assignment = vec![0; p];
    for (i, &dst) in permutation.iter().enumerate() {
        assignment[dst] = block_labels[i];
    }

    Ok(KuramotoSystem {
        pi,
        beta,
        delta,
        true_rank,
        assignment,
        permutation,
        cluster_sizes: spec.cluster_sizes.clone(),
        couplings: spec.couplings.clone(),
    })
}

/// Spectral radius `ρ(I_r + βᵀα)` and whether it is strictly below one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct I1Condition {
    pub radius: f64,
    pub satisfied: bool,
}

/// Slack below 1 required for the condition to count as satisfied.
const I1_MARGIN: f64 = 1e-10;

impl I1Condition {
    fn from_radius(radius: f64) -> Self {
        Self {
            radius,
            satisfied: radius < 1.0 - I1_MARGIN,
        }
    }
}

/// I(1) condition from loadings and cointegration vectors.
pub fn i1_condition_factors(alpha: &DMatrix<f64>, beta: &DMatrix<f64>) -> Result<I1Condition> {
    if alpha.shape() != beta.shape() {
        return Err(Error::DimensionMismatch(format!(
            "alpha {:?} vs beta {:?}",
            alpha.shape(),
            beta.shape()
        )));
    }
    let r = alpha.ncols();
    if r == 0 {
        return Ok(I1Condition::from_radius(0.0));
    }
    let m = DMatrix::identity(r, r) + beta.transpose() * alpha;
    Ok(I1Condition::from_radius(spectral_radius(&m)))
}

/// I(1) condition for a coupling matrix: the nonzero eigenvalues of `Π = αβᵀ`
/// coincide with those of `βᵀα`, so the radius is `max |1 + λ|` over them.
pub fn i1_condition(pi: &DMatrix<f64>) -> Result<I1Condition> {
    if !pi.is_square() {
        return Err(Error::DimensionMismatch(format!("Pi is {:?}", pi.shape())));
    }
    let p = pi.nrows();
    let scale = pi.abs().max();
    if scale == 0.0 {
        return Ok(I1Condition::from_radius(0.0));
    }
    let cut = p as f64 * scale * 1e-10;
    let eigen: Vec<Complex<f64>> = if linalg::asymmetry(pi) <= 1e-12 * scale {
        pi.clone()
            .symmetric_eigenvalues()
            .iter()
            .map(|&v| Complex::new(v, 0.0))
            .collect()
    } else {
        pi.complex_eigenvalues().iter().copied().collect()
    };
    let radius = eigen
        .iter()
        .filter(|z| z.norm() > cut)
        .map(|z| (Complex::new(1.0, 0.0) + z).norm())
        .fold(0.0f64, f64::max);
    Ok(I1Condition::from_radius(radius))
}

fn spectral_radius(m: &DMatrix<f64>) -> f64 {
    m.complex_eigenvalues().iter().map(|z| z.norm()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_block() {
        let b = build_cluster_block(2, 1.0).unwrap();
        assert_eq!(b, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));
        assert!(build_cluster_block(1, 1.0).is_err());
    }

    #[test]
    fn three_block_matches_integer_form() {
        let b = build_cluster_block(3, 3.0).unwrap();
        let (beta, delta) = build_factors(3).unwrap();
        assert_eq!(b, &beta * &delta * beta.transpose());
        assert_eq!(b[(0, 0)], -2.0);
        assert_eq!(b[(0, 1)], 1.0);
    }

    #[test]
    fn smallest_factors() {
        let (beta, delta) = build_factors(2).unwrap();
        assert_eq!(beta, DMatrix::from_column_slice(2, 1, &[1.0, -1.0]));
        assert_eq!(delta, DMatrix::from_element(1, 1, -1.0));
        assert_eq!(&beta * &delta * beta.transpose(), DMatrix::from_row_slice(2, 2, &[-1.0, 1.0, 1.0, -1.0]));
    }

    #[test]
    fn identity_permutation_two_cluster() {
        let spec = KuramotoSpec {
            cluster_sizes: vec![2],
            couplings: vec![1.0],
            permutation: Some(vec![0, 1]),
            seed: 0,
            strict: false,
        };
        let sys = build_system(&spec).unwrap();
        assert_eq!(sys.pi, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));
        assert_eq!(sys.true_rank, 1);
    }

    #[test]
    fn spec_validation() {
        let mut spec = KuramotoSpec::reproduction(1);
        spec.couplings[12] = 0.1;
        assert!(build_system(&spec).is_err());
        let mut spec = KuramotoSpec::reproduction(1);
        spec.couplings.pop();
        assert!(build_system(&spec).is_err());
        let mut spec = KuramotoSpec::reproduction(1);
        spec.strict = true;
        assert!(build_system(&spec).is_err());
        let mut spec = KuramotoSpec::reproduction(1);
        spec.permutation = Some(vec![0; 100]);
        assert!(build_system(&spec).is_err());
    }

    #[test]
    fn reproduction_grid() {
        let spec = KuramotoSpec::reproduction(0);
        let printed = [2.00, 1.86, 1.73, 1.59, 1.45, 1.32, 1.18, 1.05, 0.91, 0.77, 0.64, 0.50];
        for (k, want) in spec.couplings.iter().zip(printed) {
            assert_eq!(format!("{k:.2}"), format!("{want:.2}"));
        }
        assert_eq!(spec.boundary_warnings().len(), 1);
    }

    #[test]
    fn i1_two_cluster() {
        let pi = build_cluster_block(2, 1.0).unwrap();
        let c = i1_condition(&pi).unwrap();
        assert!(c.radius.abs() < 1e-12 && c.satisfied);
        let pi = build_cluster_block(2, 2.0).unwrap();
        let c = i1_condition(&pi).unwrap();
        assert!((c.radius - 1.0).abs() < 1e-12 && !c.satisfied);
        let c = i1_condition(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(c.radius, 0.0);
        assert!(c.satisfied);
    }

    #[test]
    fn i1_from_factors() {
        let alpha = DMatrix::from_column_slice(2, 1, &[-0.5, 0.5]);
        let beta = DMatrix::from_column_slice(2, 1, &[1.0, -1.0]);
        let c = i1_condition_factors(&alpha, &beta).unwrap();
        assert!(c.radius.abs() < 1e-12);
        let c = i1_condition_factors(&DMatrix::zeros(3, 0), &DMatrix::zeros(3, 0)).unwrap();
        assert!(c.satisfied);
    }
}
