use std::collections::BTreeSet;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use coik::experiment::RunManifest;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "system": {"cluster_sizes": [4, 4, 3, 1], "couplings": [1.5, 1.0, 0.6, 0.0]},
  "N": 300,
  "bootstrap": {"samples": 39},
  "estimator_ranks": [7, 8, 12],
  "threads": 1
}"#;

fn coik(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coik"))
        .args(args)
        .env_remove("COIK_SEED")
        .env("RUST_LOG", "warn")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn with_config() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("small.json"), SMALL).unwrap();
    dir
}

fn manifest(out: &Path) -> RunManifest {
    serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap()
}

fn listed(m: &RunManifest) -> BTreeSet<String> {
    m.stages.iter().flat_map(|s| s.files.iter().map(|f| f.path.clone())).collect()
}

#[test]
fn invalid_configuration_exits_with_2() {
    let dir = with_config();
    let out = coik(&["simulate", "--config", "missing.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("bad.json"), r#"{"N": 1}"#).unwrap();
    let out = coik(&["simulate", "--config", "bad.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    fs::write(dir.path().join("typo.json"), r#"{"observatons": 100}"#).unwrap();
    let out = coik(&["simulate", "--config", "typo.json", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = coik(&["ranktest", "--config", "small.json", "--variant", "bogus"], dir.path());
    assert_eq!(out.status.code(), Some(2));

    let out = coik(&["ranktest", "--config", "small.json", "--level", "1.5", "--out", "o"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_inputs_exit_with_4() {
    let dir = with_config();
    let out = coik(&["estimate", "--config", "small.json", "--out", "empty"], dir.path());
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&dir.path().join("empty"));
    assert!(m.error.is_some());
}

#[test]
fn environment_seed_matches_flag() {
    let dir = with_config();
    let flag = coik(&["simulate", "--config", "small.json", "--seed", "77", "--out", "a"], dir.path());
    assert!(flag.status.success());
    let env = Command::new(env!("CARGO_BIN_EXE_coik"))
        .args(["simulate", "--config", "small.json", "--out", "b"])
        .env("COIK_SEED", "77")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert!(env.status.success());
    let other = coik(&["simulate", "--config", "small.json", "--seed", "78", "--out", "c"], dir.path());
    assert!(other.status.success());

    let read = |d: &str| fs::read(dir.path().join(d).join("series.csv")).unwrap();
    assert_eq!(read("a"), read("b"));
    assert_ne!(read("a"), read("c"));
    assert_eq!(manifest(&dir.path().join("b")).config.master_seed, 77);
}

#[test]
fn reproduce_writes_everything_the_manifest_lists() {
    let dir = with_config();
    let out = coik(&["reproduce", "--config", "small.json", "--out", "run"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let root = dir.path().join("run");
    let m = manifest(&root);
    assert!(m.error.is_none());
    assert_eq!(m.stages.len(), 4);

    let on_disk: BTreeSet<String> = fs::read_dir(&root)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n != "manifest.json")
        .collect();
    assert_eq!(listed(&m), on_disk);
    for stage in &m.stages {
        for f in &stage.files {
            assert_eq!(fs::metadata(root.join(&f.path)).unwrap().len(), f.bytes);
        }
    }

    let decision: serde_json::Value = serde_json::from_slice(&fs::read(root.join("rank_decision.json")).unwrap()).unwrap();
    let selected = decision["selected_rank"].as_u64().unwrap() as usize;
    let dim = decision["dim"].as_u64().unwrap() as usize;
    let trajectory = fs::read_to_string(root.join("rank_trajectory.csv")).unwrap();
    let rows = trajectory.lines().count() - 1;
    assert_eq!(rows, if selected < dim { selected + 1 } else { dim });

    // at full rank the reduced-rank fit is the unrestricted one
    let table = fs::read_to_string(root.join("estimator_comparison.csv")).unwrap();
    let full: Vec<Vec<&str>> = table
        .lines()
        .skip(1)
        .map(|l| l.split(',').collect::<Vec<_>>())
        .filter(|r| r[1] == "12" && (r[0] == "ols" || r[0] == "johansen"))
        .collect();
    assert_eq!(full.len(), 2);
    for col in 2..5 {
        let a: f64 = full[0][col].parse().unwrap();
        let b: f64 = full[1][col].parse().unwrap();
        assert!((a - b).abs() <= 1e-8 * (1.0 + a.abs()), "column {col}: {a} vs {b}");
    }
}

#[test]
fn later_stages_reuse_cached_outputs() {
    let dir = with_config();
    assert!(coik(&["reproduce", "--config", "small.json", "--out", "run"], dir.path()).status.success());
    let root = dir.path().join("run");
    let first = fs::read(root.join("estimator_comparison.csv")).unwrap();

    let out = coik(&["reproduce", "--config", "small.json", "--out", "run", "--stage", "estimate"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = manifest(&root);
    let reused: BTreeSet<&str> = m.reused.iter().map(|f| f.path.as_str()).collect();
    assert!(reused.contains("series.csv"));
    assert!(reused.contains("rank_decision.json"));
    assert_eq!(m.stages.len(), 2);
    assert_eq!(fs::read(root.join("estimator_comparison.csv")).unwrap(), first);

    let out = coik(&["cluster", "--config", "small.json", "--out", "run", "--rank", "8"], dir.path());
    assert!(out.status.success());
    assert_eq!(manifest(&root).stages.len(), 1);
}
