//! End-to-end experiment runs.
//!
//! A run is described by a single JSON [`RunConfig`] whose defaults describe
//! the reference experiment: a 100-dimensional system of twelve 8-clusters and
//! four singletons, `N = 2000` observations, 300 bootstrap replicates at level
//! 0.05, and estimator comparisons at ranks 71, 81 and 91.
//!
//! The pipeline has four stages (simulate, rank test, estimate, cluster). Each
//! stage writes its tables as CSV/JSON and its figures as SVG into the output
//! directory. A `manifest.json` records every file written with its SHA-256
//! checksum. Everything except the `runtime` section of the manifest is a pure
//! function of the configuration and the master seed.

pub mod svg;

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::community::{self, ClusterAssignment, RecoveryReport};
use crate::error::{Error, Result};
use crate::johansen;
use crate::kuramoto::{self, I1Condition, KuramotoSpec, KuramotoSystem};
use crate::linmodel::{self, TimeSeries, VecmModel};
use crate::lowrank::{self, ComparisonRow, PiEstimate};
use crate::rankboot::{self, BootstrapConfig, RankDecision};
use crate::seed;

pub const SERIES_FILE: &str = "series.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const RANK_DECISION_FILE: &str = "rank_decision.json";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: KuramotoSpec,
    #[serde(rename = "N", alias = "observations")]
    pub observations: usize,
    pub bootstrap: BootstrapConfig,
    pub estimator_ranks: Vec<usize>,
    pub output_dir: PathBuf,
    /// Drives the coordinate scrambling, the simulation and the bootstrap.
    pub master_seed: u64,
    /// Worker threads; `None` uses every available core.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    /// Score the true partition instead of running community detection.
    pub cluster_from_truth: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            system: KuramotoSpec::reproduction(1),
            observations: 2000,
            bootstrap: BootstrapConfig::default(),
            estimator_ranks: vec![71, 81, 91],
            output_dir: PathBuf::from("coik-out"),
            master_seed: 1,
            threads: None,
            cluster_from_truth: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.system.validate().map_err(as_config)?;
        self.bootstrap.validate()?;
        if self.observations < 2 {
            return Err(Error::Config(format!("need N >= 2 observations, got {}", self.observations)));
        }
        let p = self.system.dim();
        if let Some(&r) = self.estimator_ranks.iter().find(|&&r| r > p) {
            return Err(Error::Config(format!("estimator rank {r} exceeds dimension {p}")));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }

    /// Copy with every sub-seed tied to the master seed.
    pub fn resolved(&self) -> Self {
        let mut cfg = self.clone();
        cfg.system.seed = self.master_seed;
        cfg.bootstrap.seed = self.master_seed;
        cfg
    }

    pub fn simulation_seed(&self) -> u64 {
        seed::derive(self.master_seed, &[seed::tag::SIMULATE])
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidInput(m) | Error::DimensionMismatch(m) => Error::Config(m),
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Simulate,
    Ranktest,
    Estimate,
    Cluster,
}

impl Stage {
    pub const ALL: [Stage; 4] = [Stage::Simulate, Stage::Ranktest, Stage::Estimate, Stage::Cluster];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Simulate => "simulate",
            Stage::Ranktest => "ranktest",
            Stage::Estimate => "estimate",
            Stage::Cluster => "cluster",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown stage `{s}` (expected simulate, ranktest, estimate or cluster)")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileEntry {
    fn of(path: &str, contents: &[u8]) -> Self {
        let digest = Sha256::digest(contents);
        Self {
            path: path.to_string(),
            sha256: digest.iter().map(|b| format!("{b:02x}")).collect(),
            bytes: contents.len() as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub stage: Stage,
    pub files: Vec<FileEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: Stage,
    pub seconds: f64,
}

/// Values that legitimately differ between otherwise identical runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuntimeInfo {
    pub output_dir: PathBuf,
    pub threads: usize,
    pub timings: Vec<StageTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    /// Resolved configuration without the runtime-only fields.
    pub config: RunConfig,
    pub stages: Vec<StageRecord>,
    /// Cached inputs read instead of recomputed.
    pub reused: Vec<FileEntry>,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    /// Files written by a stage that then failed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub incomplete: Vec<FileEntry>,
    pub runtime: RuntimeInfo,
}

/// Writes files under one directory and remembers their checksums.
#[derive(Debug)]
pub struct Artifacts {
    root: PathBuf,
    written: Vec<FileEntry>,
}

impl Artifacts {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self { root, written: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    pub fn write_bytes(&mut self, name: &str, contents: &[u8]) -> Result<()> {
        let path = self.path(name);
        fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.written.retain(|f| f.path != name);
        self.written.push(FileEntry::of(name, contents));
        Ok(())
    }

    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
        let mut buf = Vec::new();
        f(&mut buf)?;
        self.write_bytes(name, &buf)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut buf = serde_json::to_vec_pretty(value)?;
        buf.push(b'\n');
        self.write_bytes(name, &buf)
    }

    pub fn read(&self, name: &str) -> Result<(Vec<u8>, FileEntry)> {
        let path = self.path(name);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let entry = FileEntry::of(name, &bytes);
        Ok((bytes, entry))
    }

    /// Files written since the last call.
    pub fn take(&mut self) -> Vec<FileEntry> {
        std::mem::take(&mut self.written)
    }
}

/// Ground truth written next to the simulated series.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TruthRecord {
    pub dim: usize,
    pub true_rank: usize,
    pub cluster_sizes: Vec<usize>,
    pub couplings: Vec<f64>,
    pub permutation: Vec<usize>,
    pub assignment: Vec<usize>,
    pub i1: I1Condition,
    pub simulation_seed: u64,
    /// Coupling matrix in scrambled coordinates, row by row.
    pub pi: Vec<Vec<f64>>,
}

pub struct Simulated {
    pub system: KuramotoSystem,
    pub series: TimeSeries,
    pub warnings: Vec<String>,
}

fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

/// Build the ground-truth system and simulate it from `y0 = 0` with `Ω = I`.
pub fn simulate(cfg: &RunConfig) -> Result<Simulated> {
    let system = kuramoto::build_system(&cfg.system).map_err(as_config)?;
    let model = VecmModel::with_identity_noise(system.pi.clone())?;
    let y0 = DVector::zeros(system.dim());
    let series = linmodel::simulate_vecm(&model, cfg.observations, &y0, cfg.simulation_seed())?;
    Ok(Simulated {
        warnings: cfg.system.boundary_warnings(),
        system,
        series,
    })
}

/// One coordinate per cluster, in cluster order.
fn representative_coords(system: &KuramotoSystem) -> Vec<usize> {
    system.members().iter().filter_map(|m| m.first().copied()).collect()
}

/// Simulate and write the series CSV, the ground truth JSON and a sample-path figure.
pub fn cmd_simulate(cfg: &RunConfig, out: &mut Artifacts) -> Result<Simulated> {
    let sim = simulate(cfg)?;
    let truth = TruthRecord {
        dim: sim.system.dim(),
        true_rank: sim.system.true_rank,
        cluster_sizes: sim.system.cluster_sizes.clone(),
        couplings: sim.system.couplings.clone(),
        permutation: sim.system.permutation.clone(),
        assignment: sim.system.assignment.clone(),
        i1: kuramoto::i1_condition(&sim.system.pi)?,
        simulation_seed: cfg.simulation_seed(),
        pi: matrix_rows(&sim.system.pi),
    };
    out.write_with(SERIES_FILE, |w| sim.series.write_csv(w))?;
    out.write_json(TRUTH_FILE, &truth)?;
    let coords = representative_coords(&sim.system);
    out.write_bytes(
        "fig_sample_paths.svg",
        svg::sample_paths(&sim.series, &coords, "Sample paths, one coordinate per cluster").as_bytes(),
    )?;
    Ok(sim)
}

/// Sequential bootstrap rank test; writes the trajectory CSV, the full decision
/// JSON, the eigenvalue profile and the trajectory figure.
pub fn cmd_ranktest(cfg: &RunConfig, series: &TimeSeries, true_rank: Option<usize>, out: &mut Artifacts) -> Result<RankDecision> {
    let decision = rankboot::sequential_rank(series, &cfg.bootstrap)?;
    out.write_with("rank_trajectory.csv", |w| decision.write_csv(w))?;
    out.write_json(RANK_DECISION_FILE, &decision)?;
    let stats = linmodel::suffstats_with(series, cfg.bootstrap.term)?;
    let sol = johansen::rrr_solve(&stats)?;
    out.write_with("rank_profile.csv", |w| johansen::write_rank_profile(&sol, w))?;
    out.write_bytes("fig_rank_trajectory.svg", svg::rank_trajectory(&decision, true_rank).as_bytes())?;
    Ok(decision)
}

/// The four estimators at one rank, in the order ols, johansen, proj, sym.
pub fn estimators_at(stats: &linmodel::SufficientStats, r: usize) -> Result<[PiEstimate; 4]> {
    let ols = lowrank::estimate_ols(stats)?;
    let fit = johansen::fit_rank(stats, r)?;
    let jo = lowrank::estimate_johansen(&fit, stats)?;
    let proj = lowrank::estimate_proj(&fit, stats, r)?;
    let sym = lowrank::estimate_sym(stats, r)?;
    Ok([ols, jo, proj, sym])
}

pub struct EstimateOutcome {
    pub rows: Vec<ComparisonRow>,
    /// Symmetric estimate at the heatmap rank, used for clustering.
    pub sym: PiEstimate,
}

/// Compare the estimators at every requested rank against the truth and draw
/// heatmaps (truth unscrambled and each estimate in the same order) at `focus_rank`.
pub fn cmd_estimate(
    cfg: &RunConfig,
    system: &KuramotoSystem,
    series: &TimeSeries,
    focus_rank: usize,
    out: &mut Artifacts,
) -> Result<EstimateOutcome> {
    check_dims(system, series)?;
    let stats = linmodel::suffstats_with(series, cfg.bootstrap.term)?;
    let mask = system.zero_mask();
    let mut rows = Vec::with_capacity(4 * cfg.estimator_ranks.len());
    for &r in &cfg.estimator_ranks {
        let ests = estimators_at(&stats, r)?;
        for est in &ests {
            let mut row = ComparisonRow::new(est, &ests[0], &system.pi, &mask)?;
            row.rank = r;
            rows.push(row);
        }
    }
    out.write_with("estimator_comparison.csv", |w| lowrank::write_comparison(&rows, w))?;

    let order = system.block_order();
    out.write_bytes(
        "fig_heatmap_truth.svg",
        svg::heatmap(&system.pi, &order, "True coupling matrix (unscrambled)").as_bytes(),
    )?;
    let [ols, jo, proj, sym] = estimators_at(&stats, focus_rank)?;
    for est in [&ols, &jo, &proj, &sym] {
        let title = format!("{} estimate, r = {focus_rank} (true order)", est.label);
        out.write_bytes(
            &format!("fig_heatmap_{}.svg", est.label),
            svg::heatmap(&est.pi, &order, &title).as_bytes(),
        )?;
    }
    Ok(EstimateOutcome { rows, sym })
}

/// Clusters by descending mean within-cluster weight; members ascending.
pub fn cnm_plot_order(weights: &DMatrix<f64>, assignment: &ClusterAssignment) -> Vec<usize> {
    let members = assignment.members();
    let mean_weight = |m: &Vec<usize>| {
        if m.len() < 2 {
            return 0.0;
        }
        let total: f64 = m.iter().flat_map(|&i| m.iter().map(move |&j| (i, j))).filter(|(i, j)| i != j).map(|(i, j)| weights[(i, j)]).sum();
        total / (m.len() * (m.len() - 1)) as f64
    };
    let mut idx: Vec<(usize, f64)> = members.iter().enumerate().map(|(l, m)| (l, mean_weight(m))).collect();
    idx.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    idx.into_iter().flat_map(|(l, _)| members[l].clone()).collect()
}

/// Community detection on a symmetric estimate, recovery scoring against the
/// truth, and per-cluster re-estimation.
pub fn cmd_cluster(
    cfg: &RunConfig,
    system: &KuramotoSystem,
    series: &TimeSeries,
    pi_sym: &DMatrix<f64>,
    rank: usize,
    out: &mut Artifacts,
) -> Result<(RecoveryReport, Vec<String>)> {
    check_dims(system, series)?;
    let graph = community::graph_from_pi(pi_sym)?;
    let truth = ClusterAssignment::new(system.assignment.clone())?.with_modularity(&graph).map_err(zero_guidance)?;
    let estimated = if cfg.cluster_from_truth {
        truth.clone()
    } else {
        community::cnm_cluster(&graph).map_err(zero_guidance)?
    };
    let mut report = community::score_recovery(&truth, &estimated)?;
    report.expected_clusters_hint = Some(system.dim() - rank);
    let reest = community::per_cluster_reestimate(series, &estimated)?;
    let warnings: Vec<String> = reest
        .failures
        .iter()
        .map(|(l, m)| format!("cluster {l}: re-estimation failed: {m}"))
        .collect();

    #[derive(Serialize)]
    struct ClusterFile<'a> {
        rank: usize,
        assignment: &'a ClusterAssignment,
        report: &'a RecoveryReport,
        reestimate_failures: &'a [(usize, String)],
    }
    out.write_json(
        "cluster_report.json",
        &ClusterFile {
            rank,
            assignment: &estimated,
            report: &report,
            reestimate_failures: &reest.failures,
        },
    )?;
    out.write_with("cluster_recovery.csv", |w| {
        community::write_recovery_table(&report, &system.couplings, w)
    })?;

    let order = cnm_plot_order(graph.weights(), &estimated);
    out.write_bytes(
        "fig_cluster_truth.svg",
        svg::heatmap(&system.pi, &system.block_order(), "True coupling matrix").as_bytes(),
    )?;
    out.write_bytes(
        "fig_cluster_estimate.svg",
        svg::heatmap(pi_sym, &order, &format!("sym estimate, r = {rank}, detected clusters")).as_bytes(),
    )?;
    out.write_bytes(
        "fig_cluster_reestimate.svg",
        svg::heatmap(&reest.pi, &order, "Per-cluster re-estimate").as_bytes(),
    )?;
    Ok((report, warnings))
}

fn zero_guidance(e: Error) -> Error {
    match e {
        Error::UndefinedMeasure(m) => Error::UndefinedMeasure(format!(
            "{m}; the symmetric estimate has no off-diagonal weight, so there is nothing to cluster (a rank of 0 gives the zero matrix; pass a positive --rank)"
        )),
        other => other,
    }
}

fn check_dims(system: &KuramotoSystem, series: &TimeSeries) -> Result<()> {
    if system.dim() != series.dim() {
        return Err(Error::DimensionMismatch(format!(
            "series has {} coordinates but the configured system has {}",
            series.dim(),
            system.dim()
        )));
    }
    Ok(())
}

/// Which stages to run and how to pick the rank for estimation and clustering.
#[derive(Debug, Clone, Copy)]
pub struct RunPlan {
    pub first: Stage,
    pub last: Stage,
    /// Overrides the tested (or cached) rank.
    pub rank: Option<usize>,
}

impl RunPlan {
    pub fn full() -> Self {
        Self {
            first: Stage::Simulate,
            last: Stage::Cluster,
            rank: None,
        }
    }

    pub fn only(stage: Stage) -> Self {
        Self {
            first: stage,
            last: stage,
            rank: None,
        }
    }

    pub fn from_stage(stage: Stage) -> Self {
        Self {
            first: stage,
            ..Self::full()
        }
    }
}

fn rank_from_cache(out: &Artifacts, reused: &mut Vec<FileEntry>) -> Result<usize> {
    let (bytes, entry) = out.read(RANK_DECISION_FILE).map_err(|e| match e {
        Error::Io { path, source } => Error::Io {
            path,
            source: std::io::Error::new(source.kind(), format!("{source}; run the ranktest stage first or pass --rank")),
        },
        other => other,
    })?;
    let value: serde_json::Value = serde_json::from_slice(&bytes)?;
    let rank = value
        .get("selected_rank")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Config(format!("{RANK_DECISION_FILE} has no selected_rank")))?;
    reused.push(entry);
    Ok(rank as usize)
}

/// Run the planned stages, writing `manifest.json` whether or not they succeed.
pub fn run(cfg: &RunConfig, plan: RunPlan) -> Result<RunManifest> {
    cfg.validate()?;
    let cfg = cfg.resolved();
    if plan.first > plan.last {
        return Err(Error::Config(format!("stage {} comes after {}", plan.first, plan.last)));
    }
    if let Some(r) = plan.rank {
        if r > cfg.system.dim() {
            return Err(Error::Config(format!("rank {r} exceeds dimension {}", cfg.system.dim())));
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cfg.threads {
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let mut out = Artifacts::create(&cfg.output_dir)?;

    let mut echo = cfg.clone();
    echo.output_dir = PathBuf::new();
    echo.threads = None;
    let mut manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: echo,
        stages: Vec::new(),
        reused: Vec::new(),
        warnings: Vec::new(),
        error: None,
        incomplete: Vec::new(),
        runtime: RuntimeInfo {
            output_dir: cfg.output_dir.clone(),
            threads: pool.current_num_threads(),
            timings: Vec::new(),
        },
    };

    let result = pool.install(|| run_stages(&cfg, plan, &mut out, &mut manifest));
    if let Err(e) = &result {
        manifest.error = Some(e.to_string());
        manifest.incomplete = out.take();
    }
    write_manifest(&out, &manifest)?;
    result.map(|()| manifest)
}

fn write_manifest(out: &Artifacts, manifest: &RunManifest) -> Result<()> {
    let path = out.path(MANIFEST_FILE);
    let mut buf = serde_json::to_vec_pretty(manifest)?;
    buf.push(b'\n');
    fs::write(&path, buf).map_err(|e| Error::io(&path, e))
}

fn run_stages(cfg: &RunConfig, plan: RunPlan, out: &mut Artifacts, manifest: &mut RunManifest) -> Result<()> {
    let active = |s: Stage| plan.first <= s && s <= plan.last;
    let needs_series = Stage::ALL.iter().any(|&s| s != Stage::Simulate && active(s));

    let finish = |stage: Stage, started: Instant, out: &mut Artifacts, manifest: &mut RunManifest| {
        manifest.stages.push(StageRecord { stage, files: out.take() });
        manifest.runtime.timings.push(StageTiming {
            stage,
            seconds: started.elapsed().as_secs_f64(),
        });
    };

    let system;
    let mut series = None;
    if active(Stage::Simulate) {
        let t = Instant::now();
        log::info!("simulating {} observations", cfg.observations);
        let sim = cmd_simulate(cfg, out)?;
        manifest.warnings.extend(sim.warnings);
        system = sim.system;
        series = Some(sim.series);
        finish(Stage::Simulate, t, out, manifest);
    } else {
        system = kuramoto::build_system(&cfg.system).map_err(as_config)?;
        if needs_series {
            let (bytes, entry) = out.read(SERIES_FILE).map_err(|e| match e {
                Error::Io { path, source } => Error::Io {
                    path,
                    source: std::io::Error::new(source.kind(), format!("{source}; run the simulate stage first")),
                },
                other => other,
            })?;
            series = Some(TimeSeries::read_csv(bytes.as_slice())?);
            manifest.reused.push(entry);
        }
    }

    let mut rank = plan.rank;
    if active(Stage::Ranktest) {
        let t = Instant::now();
        let series = series.as_ref().expect("series loaded");
        log::info!("testing rank with {} bootstrap samples per hypothesis", cfg.bootstrap.samples);
        let decision = cmd_ranktest(cfg, series, Some(system.true_rank), out)?;
        manifest.warnings.extend(decision.warnings.iter().cloned());
        log::info!("selected rank {}", decision.selected_rank);
        rank = rank.or(Some(decision.selected_rank));
        finish(Stage::Ranktest, t, out, manifest);
    }
    if plan.last < Stage::Estimate {
        return Ok(());
    }
    let rank = match rank {
        Some(r) => r,
        None => rank_from_cache(out, &mut manifest.reused)?,
    };
    let series = series.as_ref().expect("series loaded");

    let mut sym = None;
    if active(Stage::Estimate) {
        let t = Instant::now();
        log::info!("comparing estimators at ranks {:?}", cfg.estimator_ranks);
        sym = Some(cmd_estimate(cfg, &system, series, rank, out)?.sym);
        finish(Stage::Estimate, t, out, manifest);
    }
    if active(Stage::Cluster) {
        let t = Instant::now();
        let pi_sym = match sym {
            Some(est) => est.pi,
            None => {
                let stats = linmodel::suffstats_with(series, cfg.bootstrap.term)?;
                lowrank::estimate_sym(&stats, rank)?.pi
            }
        };
        log::info!("detecting clusters in the rank-{rank} symmetric estimate");
        let (report, warnings) = cmd_cluster(cfg, &system, series, &pi_sym, rank, out)?;
        log::info!(
            "{} clusters, modularity {:.4}, {} misplaced",
            report.estimated_clusters,
            report.modularity,
            report.total_misplaced
        );
        manifest.warnings.extend(warnings);
        finish(Stage::Cluster, t, out, manifest);
    }
    Ok(())
}

/// Full pipeline with the given configuration, starting at `from`.
pub fn cmd_reproduce(cfg: &RunConfig, from: Stage, rank: Option<usize>) -> Result<RunManifest> {
    run(
        cfg,
        RunPlan {
            rank,
            ..RunPlan::from_stage(from)
        },
    )
}
