//! First-order vector error-correction model: data container, simulation,
//! moment matrices, the OLS estimator and the concentrated likelihood.

use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{self, CompensatedSum};
use crate::seed;

/// Columns per block when accumulating the moment matrices.
const ACCUMULATION_BLOCK: usize = 256;

/// A p-dimensional sample path `y_1..y_N` together with its initial value `y_0`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    y0: DVector<f64>,
    path: DMatrix<f64>,
}

impl TimeSeries {
    /// `path` is p×N, one column per time point.
    pub fn new(y0: DVector<f64>, path: DMatrix<f64>) -> Result<Self> {
        if y0.is_empty() {
            return Err(Error::InvalidInput("series dimension must be at least 1".into()));
        }
        if path.nrows() != y0.len() {
            return Err(Error::DimensionMismatch(format!(
                "y0 has length {} but path has {} rows",
                y0.len(),
                path.nrows()
            )));
        }
        if path.ncols() < 2 {
            return Err(Error::InvalidInput(format!(
                "series needs at least 2 transitions, got {}",
                path.ncols()
            )));
        }
        if !y0.iter().chain(path.iter()).all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("series contains non-finite entries".into()));
        }
        Ok(Self { y0, path })
    }

    pub fn dim(&self) -> usize {
        self.y0.len()
    }

    /// Number of transitions N.
    pub fn len(&self) -> usize {
        self.path.ncols()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn y0(&self) -> &DVector<f64> {
        &self.y0
    }

    pub fn path(&self) -> &DMatrix<f64> {
        &self.path
    }

    /// Lagged levels `[y_0, …, y_{N−1}]` as a p×N matrix.
    pub fn lagged(&self) -> DMatrix<f64> {
        let (p, n) = self.path.shape();
        let mut out = DMatrix::zeros(p, n);
        out.set_column(0, &self.y0);
        out.columns_mut(1, n - 1)
            .copy_from(&self.path.columns(0, n - 1));
        out
    }

    /// Differences `Δy_n = y_n − y_{n−1}` as a p×N matrix.
    pub fn differences(&self) -> DMatrix<f64> {
        &self.path - self.lagged()
    }

    /// Restrict to a subset of coordinates (in the given order).
    pub fn select(&self, coords: &[usize]) -> Result<Self> {
        if let Some(&bad) = coords.iter().find(|&&c| c >= self.dim()) {
            return Err(Error::InvalidInput(format!("coordinate {bad} out of range")));
        }
        let y0 = DVector::from_iterator(coords.len(), coords.iter().map(|&c| self.y0[c]));
        let path = self.path.select_rows(coords);
        Self::new(y0, path)
    }

    /// Write as CSV with header `t,y1,..,yp`; row `t = 0` holds `y0`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        header.extend((1..=self.dim()).map(|i| format!("y{i}")));
        w.write_record(&header)?;
        let mut row = Vec::with_capacity(self.dim() + 1);
        for t in 0..=self.len() {
            row.clear();
            row.push(t.to_string());
            let col = if t == 0 {
                self.y0.as_slice().to_vec()
            } else {
                self.path.column(t - 1).iter().copied().collect()
            };
            // `{:e}` on f64 prints the shortest representation that round-trips.
            row.extend(col.iter().map(|v| format!("{v:e}")));
            w.write_record(&row)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    /// Read the format produced by [`TimeSeries::write_csv`].
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers()?.clone();
        let p = header.len().saturating_sub(1);
        if p == 0 || &header[0] != "t" {
            return Err(Error::InvalidInput("series CSV header must be `t,y1,..,yp`".into()));
        }
        let mut cols: Vec<Vec<f64>> = Vec::new();
        for (expected_t, rec) in r.records().enumerate() {
            let rec = rec?;
            let t: usize = rec[0]
                .trim()
                .parse()
                .map_err(|_| Error::InvalidInput(format!("bad time index `{}`", &rec[0])))?;
            if t != expected_t {
                return Err(Error::InvalidInput(format!(
                    "time index {t} out of sequence (expected {expected_t})"
                )));
            }
            let vals = (1..=p)
                .map(|i| {
                    rec.get(i)
                        .ok_or_else(|| Error::InvalidInput(format!("row {t} is short")))?
                        .trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("bad value in row {t}")))
                })
                .collect::<Result<Vec<_>>>()?;
            cols.push(vals);
        }
        if cols.len() < 3 {
            return Err(Error::InvalidInput("series CSV needs y0 plus at least 2 rows".into()));
        }
        let y0 = DVector::from_vec(cols.remove(0));
        let n = cols.len();
        let path = DMatrix::from_iterator(p, n, cols.into_iter().flatten());
        Self::new(y0, path)
    }
}

/// Deterministic term handling in estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeterministicTerm {
    /// `μ = 0`.
    #[default]
    None,
    /// Unrestricted constant, concentrated out by demeaning `Δy_n` and `y_{n−1}`.
    Constant,
}

/// `Δy_n = Π y_{n−1} + μ + ε_n`, `ε_n ~ N(0, Ω)`.
#[derive(Debug, Clone)]
pub struct VecmModel {
    pi: DMatrix<f64>,
    mu: DVector<f64>,
    omega: DMatrix<f64>,
}

impl VecmModel {
    pub fn new(pi: DMatrix<f64>, mu: DVector<f64>, omega: DMatrix<f64>) -> Result<Self> {
        let p = pi.nrows();
        if pi.ncols() != p || mu.len() != p || omega.shape() != (p, p) {
            return Err(Error::DimensionMismatch(format!(
                "Pi {:?}, mu {}, Omega {:?}",
                pi.shape(),
                mu.len(),
                omega.shape()
            )));
        }
        if linalg::asymmetry(&omega) > 1e-12 {
            return Err(Error::InvalidInput("Omega is not symmetric".into()));
        }
        if omega.clone().cholesky().is_none() {
            return Err(Error::InvalidInput("Omega is not positive definite".into()));
        }
        Ok(Self { pi, mu, omega })
    }

    /// `μ = 0`, `Ω = I`.
    pub fn with_identity_noise(pi: DMatrix<f64>) -> Result<Self> {
        let p = pi.nrows();
        Self::new(pi, DVector::zeros(p), DMatrix::identity(p, p))
    }

    pub fn dim(&self) -> usize {
        self.pi.nrows()
    }
    pub fn pi(&self) -> &DMatrix<f64> {
        &self.pi
    }
    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }
}

/// Iterate `Δy_n = Π y_{n−1} + μ + L z_n` with `Ω = L Lᵀ` and `z_n` standard normal.
pub fn simulate_vecm(model: &VecmModel, n: usize, y0: &DVector<f64>, seed: u64) -> Result<TimeSeries> {
    let p = model.dim();
    if y0.len() != p {
        return Err(Error::DimensionMismatch(format!("y0 has length {}, model has {p}", y0.len())));
    }
    if n < 2 {
        return Err(Error::InvalidInput(format!("need N >= 2, got {n}")));
    }
    let chol = model
        .omega
        .clone()
        .cholesky()
        .ok_or_else(|| Error::InvalidInput("Omega is not positive definite".into()))?;
    let lower = chol.l();
    let mut rng = seed::rng(seed);
    let companion = &model.pi + DMatrix::identity(p, p);

    let mut path = DMatrix::zeros(p, n);
    let mut prev = y0.clone();
    let mut z = DVector::zeros(p);
    let mut next = DVector::zeros(p);
    for t in 0..n {
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        next.copy_from(&model.mu);
        next.gemv(1.0, &lower, &z, 1.0);
        next.gemv(1.0, &companion, &prev, 1.0);
        path.set_column(t, &next);
        std::mem::swap(&mut prev, &mut next);
    }
    TimeSeries::new(y0.clone(), path)
}

/// The four moment matrices of the concentrated VECM likelihood.
#[derive(Debug, Clone)]
pub struct SufficientStats {
    pub s00: DMatrix<f64>,
    pub s01: DMatrix<f64>,
    pub s10: DMatrix<f64>,
    pub s11: DMatrix<f64>,
    /// Sample size N.
    pub n: usize,
    pub term: DeterministicTerm,
    /// Sample means of `Δy_n` and `y_{n−1}` (zero when `term` is `None`).
    pub mean_diff: DVector<f64>,
    pub mean_lag: DVector<f64>,
}

impl SufficientStats {
    pub fn dim(&self) -> usize {
        self.s00.nrows()
    }

    /// Build statistics from moment matrices directly. `S10` is set to `S01ᵀ`.
    pub fn from_moments(s00: DMatrix<f64>, s01: DMatrix<f64>, s11: DMatrix<f64>, n: usize) -> Result<Self> {
        let p = s00.nrows();
        if s00.shape() != (p, p) || s01.shape() != (p, p) || s11.shape() != (p, p) {
            return Err(Error::DimensionMismatch("moment matrices must be square and equal-sized".into()));
        }
        Ok(Self {
            s10: s01.transpose(),
            s00,
            s01,
            s11,
            n,
            term: DeterministicTerm::None,
            mean_diff: DVector::zeros(p),
            mean_lag: DVector::zeros(p),
        })
    }
}

/// Moment matrices with `μ = 0`.
pub fn suffstats(series: &TimeSeries) -> Result<SufficientStats> {
    suffstats_with(series, DeterministicTerm::None)
}

/// Moment matrices `S_ij = N⁻¹ Σ R_in R_jnᵀ`, with `R_0 = Δy`, `R_1 = y_{−1}` (demeaned
/// under [`DeterministicTerm::Constant`]). Accumulated blockwise with compensated summation.
pub fn suffstats_with(series: &TimeSeries, term: DeterministicTerm) -> Result<SufficientStats> {
    let p = series.dim();
    let n = series.len();
    if n < 2 {
        return Err(Error::InvalidInput("need N >= 2".into()));
    }
    let mut lag = series.lagged();
    let mut diff = &series.path - &lag;
    if !diff.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("series contains non-finite entries".into()));
    }

    let (mean_diff, mean_lag) = match term {
        DeterministicTerm::None => (DVector::zeros(p), DVector::zeros(p)),
        DeterministicTerm::Constant => {
            let md = diff.column_mean();
            let ml = lag.column_mean();
            for mut c in diff.column_iter_mut() {
                c -= &md;
            }
            for mut c in lag.column_iter_mut() {
                c -= &ml;
            }
            (md, ml)
        }
    };

    let mut a00 = CompensatedSum::new(p, p);
    let mut a01 = CompensatedSum::new(p, p);
    let mut a11 = CompensatedSum::new(p, p);
    let mut start = 0;
    while start < n {
        let len = ACCUMULATION_BLOCK.min(n - start);
        let d = diff.columns(start, len);
        let l = lag.columns(start, len);
        let lt = l.transpose();
        a00.add(&(d * d.transpose()));
        a01.add(&(d * &lt));
        a11.add(&(l * &lt));
        start += len;
    }
    let scale = 1.0 / n as f64;
    let mut s00 = a00.into_inner() * scale;
    let s01 = a01.into_inner() * scale;
    let mut s11 = a11.into_inner() * scale;
    linalg::symmetrize_mut(&mut s00);
    linalg::symmetrize_mut(&mut s11);
    Ok(SufficientStats {
        s10: s01.transpose(),
        s00,
        s01,
        s11,
        n,
        term,
        mean_diff,
        mean_lag,
    })
}

/// `Π̂_ols = S01 S11⁻¹`.
pub fn ols_pi(stats: &SufficientStats) -> Result<DMatrix<f64>> {
    let chol = linalg::guarded_cholesky(&stats.s11, "S11")?;
    // Π S11 = S01  ⇔  S11 Πᵀ = S10
    Ok(chol.solve(&stats.s10).transpose())
}

/// `Ω_Π = S00 − Π S10 − S01 Πᵀ + Π S11 Πᵀ`, symmetrized.
pub fn omega_given_pi(stats: &SufficientStats, pi: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let p = stats.dim();
    if pi.shape() != (p, p) {
        return Err(Error::DimensionMismatch(format!("Pi is {:?}, statistics are {p}x{p}", pi.shape())));
    }
    let pi_s10 = pi * &stats.s10;
    let mut omega = &stats.s00 - &pi_s10 - pi_s10.transpose() + pi * &stats.s11 * pi.transpose();
    linalg::symmetrize_mut(&mut omega);
    Ok(omega)
}

/// `−(N/2) log det Ω_Π`, constants omitted.
pub fn profile_loglik(stats: &SufficientStats, pi: &DMatrix<f64>) -> Result<f64> {
    let omega = omega_given_pi(stats, pi)?;
    loglik_from_omega(stats.n, &omega)
}

pub(crate) fn loglik_from_omega(n: usize, omega: &DMatrix<f64>) -> Result<f64> {
    let ld = linalg::log_det_spd(omega)
        .ok_or_else(|| Error::DegenerateLikelihood("residual covariance is not positive definite".into()))?;
    Ok(-0.5 * n as f64 * ld)
}

/// `−2 log Q = N (log det Ω(Π_restricted) − log det Ω(Π_full))`. Not clamped at zero.
pub fn lrt_between(stats: &SufficientStats, pi_restricted: &DMatrix<f64>, pi_full: &DMatrix<f64>) -> Result<f64> {
    let restricted = profile_loglik(stats, pi_restricted)?;
    let full = profile_loglik(stats, pi_full)?;
    Ok(2.0 * (full - restricted))
}
