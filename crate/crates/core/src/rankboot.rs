//! Wild-bootstrap rank determination.
//!
//! For each hypothesis `H_r` the data are refitted under rank `r`, and
//! bootstrap samples are rebuilt recursively from the restricted fit with
//! residuals multiplied by i.i.d. standard normal scalars (one per time
//! point). The trace statistic is recomputed on every sample and the
//! observed value is compared to the empirical `1 − level` quantile. Ranks are
//! tested upwards from zero until the first non-rejection.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::johansen::{self, JohansenEstimate, RrrSolution, StatVariant};
use crate::linmodel::{self, DeterministicTerm, TimeSeries};
use crate::seed;

/// Largest tolerated fraction of failed bootstrap replicates.
pub const MAX_FAILURE_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    /// Replicates per tested rank.
    pub samples: usize,
    pub level: f64,
    pub variant: StatVariant,
    pub seed: u64,
    pub max_rank: Option<usize>,
    pub term: DeterministicTerm,
    /// Keep every replicate statistic in the decision.
    pub keep_replicates: bool,
    /// Extra ranks tested after the selected one, for plotting only.
    pub continue_past: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            samples: 300,
            level: 0.05,
            variant: StatVariant::Standard,
            seed: 0,
            max_rank: None,
            term: DeterministicTerm::None,
            keep_replicates: false,
            continue_past: 0,
        }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("bootstrap needs at least one replicate".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!("test level must be in (0, 1), got {}", self.level)));
        }
        Ok(())
    }

    /// 1-based order statistic used as the critical value: `ceil((1 − level) · B)`.
    pub fn quantile_index(&self, samples: usize) -> usize {
        (((1.0 - self.level) * samples as f64).ceil() as usize).clamp(1, samples)
    }
}

/// Outcome of testing `H_r` against `H_p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRecord {
    pub rank: usize,
    pub observed: f64,
    pub quantile: f64,
    pub p_value: f64,
    pub rejected: bool,
    pub failed_replicates: usize,
    /// `ρ(I_r + β̂ᵀα̂)` of the restricted fit used to generate the samples.
    pub i1_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replicates: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDecision {
    pub selected_rank: usize,
    pub dim: usize,
    pub n: usize,
    /// Records for `r = 0..=selected_rank`.
    pub per_rank: Vec<RankRecord>,
    /// Records for ranks past the selection (plotting only).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extended: Vec<RankRecord>,
    pub config: BootstrapConfig,
    #[serde(default)]
    pub warnings: Vec<String>,
}

/// Residuals `ε̂_n = Δy_n − Π̂ y_{n−1} − μ̂` as a p×N matrix.
pub fn residuals(series: &TimeSeries, fit: &JohansenEstimate) -> DMatrix<f64> {
    let lag = series.lagged();
    let mut eps = series.differences() - &fit.pi * lag;
    for mut c in eps.column_iter_mut() {
        c -= &fit.mu;
    }
    eps
}

/// One wild-bootstrap sample from a restricted fit.
pub fn wild_resample(series: &TimeSeries, fit: &JohansenEstimate, seed: u64) -> Result<TimeSeries> {
    if fit.pi.nrows() != series.dim() {
        return Err(Error::DimensionMismatch(format!(
            "fit has dimension {}, series {}",
            fit.pi.nrows(),
            series.dim()
        )));
    }
    let eps = residuals(series, fit);
    let companion = &fit.pi + DMatrix::identity(series.dim(), series.dim());
    resample_path(series.y0(), &companion, &fit.mu, &eps, seed)
}

fn resample_path(
    y0: &DVector<f64>,
    companion: &DMatrix<f64>,
    mu: &DVector<f64>,
    eps: &DMatrix<f64>,
    seed: u64,
) -> Result<TimeSeries> {
    let (p, n) = eps.shape();
    let mut rng = seed::rng(seed);
    let mut path = DMatrix::zeros(p, n);
    let mut prev = y0.clone();
    let mut next = DVector::zeros(p);
    for t in 0..n {
        let w: f64 = StandardNormal.sample(&mut rng);
        next.copy_from(mu);
        next.axpy(w, &eps.column(t), 1.0);
        next.gemv(1.0, companion, &prev, 1.0);
        path.set_column(t, &next);
        std::mem::swap(&mut prev, &mut next);
    }
    TimeSeries::new(y0.clone(), path)
}

/// Shared state for testing several ranks on the same data.
pub struct RankTester<'a> {
    series: &'a TimeSeries,
    sol: RrrSolution,
    cfg: BootstrapConfig,
}

impl<'a> RankTester<'a> {
    pub fn new(series: &'a TimeSeries, cfg: &BootstrapConfig) -> Result<Self> {
        cfg.validate()?;
        let stats = linmodel::suffstats_with(series, cfg.term)?;
        let sol = johansen::rrr_solve(&stats)?;
        Ok(Self {
            series,
            sol,
            cfg: cfg.clone(),
        })
    }

    pub fn solution(&self) -> &RrrSolution {
        &self.sol
    }

    pub fn observed(&self, r: usize) -> Result<f64> {
        johansen::trace_stat(&self.sol, r, self.cfg.variant)
    }

    /// Bootstrap test of `H_r` against `H_p`.
    pub fn test(&self, r: usize) -> Result<RankRecord> {
        let p = self.series.dim();
        if r >= p {
            return Err(Error::InvalidInput(format!("cannot test rank {r} against full rank {p}")));
        }
        let observed = self.observed(r)?;
        let fit = johansen::fit_rank_from(&self.sol, r)?;
        if !fit.i1.satisfied {
            log::warn!(
                "rank {r}: restricted fit has spectral radius {:.4} >= 1; bootstrap samples may diverge",
                fit.i1.radius
            );
        }
        let eps = residuals(self.series, &fit);
        let companion = &fit.pi + DMatrix::identity(p, p);
        let n = self.series.len();
        let variant = self.cfg.variant;
        let term = self.cfg.term;

        let draws: Vec<Option<f64>> = (0..self.cfg.samples)
            .into_par_iter()
            .map(|m| {
                let s = seed::derive(self.cfg.seed, &[seed::tag::BOOTSTRAP, r as u64, m as u64]);
                let stat = resample_path(self.series.y0(), &companion, &fit.mu, &eps, s)
                    .and_then(|ts| linmodel::suffstats_with(&ts, term))
                    .and_then(|st| johansen::rrr_eigenvalues(&st))
                    .and_then(|ev| johansen::trace_from_eigenvalues(&ev, n, r, variant));
                stat.ok().filter(|v| v.is_finite())
            })
            .collect();

        let total = draws.len();
        let mut ok: Vec<f64> = draws.iter().flatten().copied().collect();
        let failed = total - ok.len();
        if failed as f64 > MAX_FAILURE_FRACTION * total as f64 || ok.is_empty() {
            return Err(Error::BootstrapFailures { rank: r, failed, total });
        }
        if failed > 0 {
            log::warn!("rank {r}: {failed} of {total} bootstrap replicates failed");
        }
        let replicates = self.cfg.keep_replicates.then(|| ok.clone());
        ok.sort_by(f64::total_cmp);
        let quantile = ok[self.cfg.quantile_index(ok.len()) - 1];
        let exceed = ok.iter().filter(|&&v| v >= observed).count();
        Ok(RankRecord {
            rank: r,
            observed,
            quantile,
            p_value: exceed as f64 / ok.len() as f64,
            rejected: observed > quantile,
            failed_replicates: failed,
            i1_radius: fit.i1.radius,
            replicates,
        })
    }

    fn full_rank_record(&self) -> RankRecord {
        RankRecord {
            rank: self.series.dim(),
            observed: 0.0,
            quantile: 0.0,
            p_value: 1.0,
            rejected: false,
            failed_replicates: 0,
            i1_radius: f64::NAN,
            replicates: None,
        }
    }
}

/// Single bootstrap test of `H_r`.
pub fn bootstrap_test(series: &TimeSeries, r: usize, cfg: &BootstrapConfig) -> Result<RankRecord> {
    RankTester::new(series, cfg)?.test(r)
}

/// Test `r = 0, 1, …` and stop at the first non-rejection (or at `p`, or at `max_rank`).
pub fn sequential_rank(series: &TimeSeries, cfg: &BootstrapConfig) -> Result<RankDecision> {
    let tester = RankTester::new(series, cfg)?;
    let p = series.dim();
    let cap = cfg.max_rank.unwrap_or(p).min(p);
    let mut per_rank = Vec::new();
    let mut warnings = Vec::new();
    let mut selected = cap;
    for r in 0..cap {
        let rec = tester.test(r)?;
        log::info!(
            "H_{r}: observed {:.3}, quantile {:.3}, p = {:.3}{}",
            rec.observed,
            rec.quantile,
            rec.p_value,
            if rec.rejected { ", rejected" } else { "" }
        );
        note_record(&rec, &mut warnings);
        let rejected = rec.rejected;
        per_rank.push(rec);
        if !rejected {
            selected = r;
            break;
        }
    }
    if selected == p {
        per_rank.push(tester.full_rank_record());
    }
    let mut extended = Vec::new();
    for r in (selected + 1)..(selected + 1 + cfg.continue_past).min(p) {
        let rec = tester.test(r)?;
        note_record(&rec, &mut warnings);
        extended.push(rec);
    }
    Ok(RankDecision {
        selected_rank: selected,
        dim: p,
        n: series.len(),
        per_rank,
        extended,
        config: cfg.clone(),
        warnings,
    })
}

fn note_record(rec: &RankRecord, warnings: &mut Vec<String>) {
    if rec.i1_radius >= 1.0 {
        warnings.push(format!(
            "rank {}: bootstrap generated from a fit with spectral radius {:.4}",
            rec.rank, rec.i1_radius
        ));
    }
    if rec.failed_replicates > 0 {
        warnings.push(format!("rank {}: {} replicates failed", rec.rank, rec.failed_replicates));
    }
}

impl RankDecision {
    /// CSV `r,observed,quantile,pvalue,rejected` (selection path only).
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["r", "observed", "quantile", "pvalue", "rejected"])?;
        for rec in &self.per_rank {
            w.write_record([
                rec.rank.to_string(),
                format!("{:e}", rec.observed),
                format!("{:e}", rec.quantile),
                format!("{:e}", rec.p_value),
                rec.rejected.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::{simulate_vecm, VecmModel};

    fn two_cluster(n: usize, seed: u64) -> TimeSeries {
        let pi = DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]);
        simulate_vecm(&VecmModel::with_identity_noise(pi).unwrap(), n, &DVector::zeros(2), seed).unwrap()
    }

    #[test]
    fn quantile_index_definition() {
        let cfg = BootstrapConfig::default();
        assert_eq!(cfg.quantile_index(300), 285);
        assert_eq!(cfg.quantile_index(199), 190);
        assert_eq!(cfg.quantile_index(1), 1);
    }

    #[test]
    fn config_validation() {
        let mut cfg = BootstrapConfig::default();
        cfg.samples = 0;
        assert!(cfg.validate().is_err());
        let cfg = BootstrapConfig { level: 1.0, ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn exact_fit_gives_skeleton() {
        // Noise-free path generated by the fitted model itself.
        let series = two_cluster(50, 1);
        let fit = johansen::fit_rank(&linmodel::suffstats(&series).unwrap(), 1).unwrap();
        let companion = &fit.pi + DMatrix::identity(2, 2);
        let zero = DMatrix::zeros(2, 50);
        let y0 = DVector::from_vec(vec![1.0, -1.0]);
        let a = resample_path(&y0, &companion, &fit.mu, &zero, 1).unwrap();
        let b = resample_path(&y0, &companion, &fit.mu, &zero, 2).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn resample_deterministic() {
        let series = two_cluster(100, 3);
        let fit = johansen::fit_rank(&linmodel::suffstats(&series).unwrap(), 1).unwrap();
        assert_eq!(wild_resample(&series, &fit, 5).unwrap(), wild_resample(&series, &fit, 5).unwrap());
        assert_ne!(wild_resample(&series, &fit, 5).unwrap(), wild_resample(&series, &fit, 6).unwrap());
    }

    #[test]
    fn observed_independent_of_b() {
        let series = two_cluster(200, 4);
        let a = bootstrap_test(&series, 0, &BootstrapConfig { samples: 9, ..Default::default() }).unwrap();
        let b = bootstrap_test(&series, 0, &BootstrapConfig { samples: 29, ..Default::default() }).unwrap();
        assert_eq!(a.observed, b.observed);
        assert!((0.0..=1.0).contains(&a.p_value));
    }

    #[test]
    fn decision_shape() {
        let series = two_cluster(300, 7);
        let cfg = BootstrapConfig { samples: 49, seed: 3, ..Default::default() };
        let d = sequential_rank(&series, &cfg).unwrap();
        assert_eq!(d.per_rank.len(), d.selected_rank + 1);
        for rec in &d.per_rank[..d.selected_rank] {
            assert!(rec.rejected);
        }
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), d.selected_rank + 2);
    }
}
