//! Independent oracles for the estimation, testing and clustering layers.

use coik::community::{self, ClusterAssignment, WeightedGraph};
use coik::johansen::{self, StatVariant};
use coik::kuramoto::{self, KuramotoSpec};
use coik::linmodel::{self, SufficientStats, TimeSeries, VecmModel};
use coik::lowrank::{self, SymmetricProjector};
use coik::rankboot::{self, BootstrapConfig};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn simulate(pi: DMatrix<f64>, n: usize, seed: u64) -> TimeSeries {
    let p = pi.nrows();
    let model = VecmModel::with_identity_noise(pi).unwrap();
    linmodel::simulate_vecm(&model, n, &DVector::zeros(p), seed).unwrap()
}

fn two_cluster(kappa: f64) -> DMatrix<f64> {
    kuramoto::build_cluster_block(2, kappa).unwrap()
}

#[test]
fn ols_is_consistent_under_pure_random_walk() {
    let series = simulate(DMatrix::zeros(3, 3), 10_000, 11);
    let stats = linmodel::suffstats(&series).unwrap();
    let pi = linmodel::ols_pi(&stats).unwrap();
    assert!(pi.norm() < 0.1, "{}", pi.norm());
}

#[test]
fn omega_at_ols_is_the_schur_complement() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pi = gaussian(&mut rng, 4, 4) * 0.05 - DMatrix::identity(4, 4) * 0.2;
    let stats = linmodel::suffstats(&simulate(pi, 500, 3)).unwrap();
    let ols = linmodel::ols_pi(&stats).unwrap();
    let omega = linmodel::omega_given_pi(&stats, &ols).unwrap();
    let s11_inv = stats.s11.clone().try_inverse().unwrap();
    let schur = &stats.s00 - &stats.s01 * s11_inv * &stats.s10;
    assert!((omega - schur).norm() < 1e-10);
}

#[test]
fn ols_maximises_profile_likelihood() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pi = kuramoto::build_cluster_block(4, 1.2).unwrap();
    let stats = linmodel::suffstats(&simulate(pi, 400, 5)).unwrap();
    let ols = linmodel::ols_pi(&stats).unwrap();
    let best = linmodel::profile_loglik(&stats, &ols).unwrap();
    for _ in 0..100 {
        let e = gaussian(&mut rng, 4, 4);
        let perturbed = &ols + e * 1e-3;
        assert!(linmodel::profile_loglik(&stats, &perturbed).unwrap() <= best);
    }
}

#[test]
fn random_walk_variance_grows_linearly() {
    let n = 200;
    let model = VecmModel::with_identity_noise(DMatrix::zeros(2, 2)).unwrap();
    let finals: Vec<f64> = (0..1000)
        .flat_map(|seed| {
            let s = linmodel::simulate_vecm(&model, n, &DVector::zeros(2), seed).unwrap();
            let last = s.path().column(n - 1).into_owned();
            last.iter().map(|v| v / (n as f64).sqrt()).collect::<Vec<_>>()
        })
        .collect();
    let mean = finals.iter().sum::<f64>() / finals.len() as f64;
    let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (finals.len() - 1) as f64;
    assert!((var - 1.0).abs() < 0.1, "variance {var}");
}

#[test]
fn cluster_block_spectrum() {
    let kappa = 1.5;
    let block = kuramoto::build_cluster_block(8, kappa).unwrap();
    let ones = DVector::from_element(8, 1.0);
    assert!((&block * &ones).norm() < 1e-12);
    // any vector orthogonal to the ones vector is an eigenvector for −κ
    for k in 1..8 {
        let v = DVector::from_fn(8, |i, _| if i == 0 { 1.0 } else if i == k { -1.0 } else { 0.0 });
        assert!((&block * &v + &v * kappa).norm() < 1e-12);
    }
}

#[test]
fn cluster_cores_are_nonsingular() {
    for size in 2..=10 {
        let (_, delta) = kuramoto::build_factors(size).unwrap();
        let r = size - 1;
        assert_eq!(delta, delta.transpose());
        // eigenvalues −1 (once) and −(r + 1) (r − 1 times)
        let expected = (-1f64).powi(r as i32) * (size as f64).powi(r as i32 - 1);
        let det = delta.clone().lu().determinant();
        assert!((det - expected).abs() < 1e-9 * expected.abs(), "size {size}: {det} vs {expected}");
    }
}

#[test]
fn single_cluster_radius_is_distance_from_one() {
    for kappa in [0.5, 1.0, 1.5, 1.99] {
        for size in [2, 5, 8] {
            let spec = KuramotoSpec {
                cluster_sizes: vec![size],
                couplings: vec![kappa],
                permutation: None,
                seed: 1,
                strict: false,
            };
            let sys = kuramoto::build_system(&spec).unwrap();
            let cond = kuramoto::i1_condition(&sys.pi).unwrap();
            assert!((cond.radius - (1.0 - kappa).abs()).abs() < 1e-10, "kappa {kappa}, size {size}");
            assert!(cond.satisfied);
        }
    }
    let cond = kuramoto::i1_condition(&two_cluster(2.0)).unwrap();
    assert!((cond.radius - 1.0).abs() < 1e-12);
    assert!(!cond.satisfied);
}

#[test]
fn canonical_correlations_vanish_under_the_null() {
    let stats = linmodel::suffstats(&simulate(DMatrix::zeros(2, 2), 5000, 17)).unwrap();
    let sol = johansen::rrr_solve(&stats).unwrap();
    assert!(sol.eigenvalues.iter().all(|&l| (0.0..0.01).contains(&l)), "{}", sol.eigenvalues);
}

#[test]
fn canonical_correlations_stay_positive_for_stationary_var() {
    // Δy = (A − I) y + ε with A = 0.5 I
    let stats = linmodel::suffstats(&simulate(DMatrix::identity(3, 3) * -0.5, 5000, 19)).unwrap();
    let sol = johansen::rrr_solve(&stats).unwrap();
    assert!(sol.eigenvalues.iter().all(|&l| l > 0.2), "{}", sol.eigenvalues);
}

#[test]
fn trace_variants_agree_to_first_order() {
    let stats = linmodel::suffstats(&simulate(DMatrix::zeros(3, 3), 5000, 23)).unwrap();
    let sol = johansen::rrr_solve(&stats).unwrap();
    assert!(sol.eigenvalues.iter().all(|&l| l < 0.01));
    let n = stats.n as f64;
    let standard = johansen::trace_stat(&sol, 0, StatVariant::Standard).unwrap();
    let literal = johansen::trace_stat(&sol, 0, StatVariant::PaperLiteral).unwrap();
    let second_order: f64 = sol.eigenvalues.iter().map(|l| n * l * l).sum();
    assert!((standard - n * literal).abs() <= second_order + 1e-9);
}

#[test]
fn full_rank_fit_equals_ols() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let pi = gaussian(&mut rng, 5, 5) * 0.05 - DMatrix::identity(5, 5) * 0.3;
    let stats = linmodel::suffstats(&simulate(pi, 300, 29)).unwrap();
    let fit = johansen::fit_rank(&stats, 5).unwrap();
    let ols = linmodel::ols_pi(&stats).unwrap();
    assert!((&fit.pi - &ols).norm() < 1e-8);
}

#[test]
fn normalisation_preserves_the_column_space() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for _ in 0..20 {
        let beta = gaussian(&mut rng, 6, 3);
        let normed = johansen::normalize_beta(&beta).unwrap();
        let proj = |b: &DMatrix<f64>| b * b.clone().pseudo_inverse(1e-14).unwrap();
        assert!((proj(&beta) - proj(&normed)).norm() < 1e-10);
        assert!((normed.rows(0, 3) - DMatrix::<f64>::identity(3, 3)).norm() < 1e-10);
    }
}

#[test]
fn wild_residuals_have_zero_mean() {
    let pi = two_cluster(1.0);
    let series = simulate(pi, 50, 37);
    let stats = linmodel::suffstats(&series).unwrap();
    let fit = johansen::fit_rank(&stats, 1).unwrap();
    let eps = rankboot::residuals(&series, &fit);
    let companion = &fit.pi + DMatrix::identity(2, 2);
    let reps = 10_000;
    let mut sum = DMatrix::zeros(2, 50);
    for m in 0..reps {
        let boot = rankboot::wild_resample(&series, &fit, m).unwrap();
        let mut prev = boot.y0().clone();
        for t in 0..50 {
            let cur = boot.path().column(t).into_owned();
            let e = &cur - &companion * &prev - &fit.mu;
            sum.set_column(t, &(sum.column(t) + e));
            prev = cur;
        }
    }
    let mean = sum / reps as f64;
    // |mean| within five standard errors of zero
    for t in 0..50 {
        for i in 0..2 {
            let se = eps[(i, t)].abs() / (reps as f64).sqrt();
            assert!(mean[(i, t)].abs() <= 5.0 * se + 1e-12, "({i}, {t}): {} vs {se}", mean[(i, t)]);
        }
    }
}

fn bootstrap_rate(pi: DMatrix<f64>, r: usize, reps: u64, reject: bool) -> f64 {
    let hits = (0..reps)
        .filter(|&s| {
            let series = simulate(pi.clone(), 1000, 1000 + s);
            let cfg = BootstrapConfig {
                samples: 199,
                seed: s,
                ..Default::default()
            };
            let rec = rankboot::bootstrap_test(&series, r, &cfg).unwrap();
            (rec.p_value < 0.05) == reject
        })
        .count();
    hits as f64 / reps as f64
}

#[test]
fn bootstrap_rejects_rank_zero_for_a_coupled_pair() {
    assert!(bootstrap_rate(two_cluster(1.0), 0, 30, true) >= 0.9);
}

#[test]
fn bootstrap_keeps_the_true_rank() {
    assert!(bootstrap_rate(two_cluster(1.0), 1, 30, false) >= 0.9);
}

fn selection_rate(pi: DMatrix<f64>, expected: usize, reps: u64) -> f64 {
    let hits = (0..reps)
        .filter(|&s| {
            let series = simulate(pi.clone(), 1000, 2000 + s);
            let cfg = BootstrapConfig {
                samples: 199,
                seed: s,
                ..Default::default()
            };
            rankboot::sequential_rank(&series, &cfg).unwrap().selected_rank == expected
        })
        .count();
    hits as f64 / reps as f64
}

#[test]
fn sequential_test_finds_no_cointegration_in_random_walks() {
    assert!(selection_rate(DMatrix::zeros(3, 3), 0, 30) >= 0.9);
}

#[test]
fn sequential_test_finds_a_coupled_pair() {
    assert!(selection_rate(two_cluster(1.0), 1, 30) >= 0.9);
}

#[test]
fn nearest_symmetric_beats_random_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..100 {
        let m = gaussian(&mut rng, 5, 5);
        let best = (&m - lowrank::hermitian_part(&m)).norm();
        for k in 0..1000 {
            let g = gaussian(&mut rng, 5, 5);
            let mut cand = (&g + g.transpose()) * 0.5;
            if k % 2 == 0 {
                // local candidates around the optimum
                cand = lowrank::hermitian_part(&m) + cand * 1e-3;
            }
            assert!(best <= (&m - cand).norm() + 1e-12);
        }
    }
}

#[test]
fn truncation_beats_random_low_rank_candidates() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for trial in 0..100 {
        let m = gaussian(&mut rng, 5, 5);
        let r = 1 + trial % 4;
        let trunc = lowrank::svd_truncate(&m, r).unwrap();
        let best = (&m - &trunc).norm();
        let svd = trunc.clone().svd(true, true);
        let (u, v) = (svd.u.unwrap(), svd.v_t.unwrap());
        let sv = svd.singular_values;
        let mut order: Vec<usize> = (0..5).collect();
        order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
        for k in 0..1000 {
            let cand = if k % 2 == 0 {
                gaussian(&mut rng, 5, r) * gaussian(&mut rng, r, 5)
            } else {
                // perturb the factors of the optimum, staying at rank r
                let mut c = DMatrix::zeros(5, 5);
                for &i in order.iter().take(r) {
                    let du = gaussian(&mut rng, 5, 1) * 1e-3;
                    let dv = gaussian(&mut rng, 1, 5) * 1e-3;
                    c += (u.column(i) + du) * (v.row(i) + dv) * sv[i];
                }
                c
            };
            assert!(best <= (&m - cand).norm() + 1e-12, "trial {trial}, r {r}");
        }
    }
}

#[test]
fn symmetric_factorisation_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for trial in 0..100 {
        let p = 3 + trial % 6;
        let r = 1 + trial % p;
        let b = gaussian(&mut rng, p, r);
        let d = DMatrix::from_diagonal(&DVector::from_fn(r, |_, _| rng.sample::<f64, _>(StandardNormal)));
        let m = &b * d * b.transpose();
        let m = (&m + m.transpose()) * 0.5;
        let (beta, delta) = lowrank::sym_factorize(&m, r).unwrap();
        let err = (&beta * &delta * beta.transpose() - &m).norm();
        assert!(err < 1e-10 * m.norm().max(1.0), "trial {trial}: {err}");
    }
    let block = kuramoto::build_cluster_block(3, 3.0).unwrap();
    let (beta, delta) = lowrank::sym_factorize(&block, 2).unwrap();
    assert!((&beta * &delta * beta.transpose() - &block).norm() < 1e-12);
}

#[test]
fn symmetric_estimator_recovers_noiseless_truth() {
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let b = gaussian(&mut rng, 6, 2);
    let pi = &b * DMatrix::from_diagonal(&DVector::from_vec(vec![-0.8, 0.3])) * b.transpose();
    let g = gaussian(&mut rng, 6, 6);
    let s11 = &g * g.transpose() + DMatrix::identity(6, 6);
    let s01 = &pi * &s11;
    let s00 = &s01 * s11.clone().try_inverse().unwrap() * s01.transpose() + DMatrix::identity(6, 6);
    let stats = SufficientStats::from_moments(s00, s01, s11, 100).unwrap();
    let est = lowrank::estimate_sym(&stats, 2).unwrap();
    assert!((&est.pi - &pi).norm() < 1e-8);
}

#[test]
fn project_and_lift_matches_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(59);
    let target = gaussian(&mut rng, 6, 6);
    let res = lowrank::project_and_lift(&target, &SymmetricProjector, 3, 1e-12, 50).unwrap();
    let composed = lowrank::truncate_symmetric(&lowrank::hermitian_part(&target), 3).unwrap();
    assert!((&res.matrix - composed).norm() < 1e-10);
    assert_eq!(res.iterations, 1);
}

#[test]
fn modularity_hand_cases() {
    let mut edge = DMatrix::zeros(2, 2);
    edge[(0, 1)] = 1.0;
    edge[(1, 0)] = 1.0;
    let g = WeightedGraph::new(edge).unwrap();
    assert!(community::modularity(&g, &[1, 1]).unwrap().abs() < 1e-12);
    assert!((community::modularity(&g, &[1, 2]).unwrap() + 0.5).abs() < 1e-12);

    let mut cliques = DMatrix::zeros(4, 4);
    for (i, j) in [(0, 1), (2, 3)] {
        cliques[(i, j)] = 1.0;
        cliques[(j, i)] = 1.0;
    }
    let g = WeightedGraph::new(cliques).unwrap();
    assert!((community::modularity(&g, &[1, 1, 2, 2]).unwrap() - 0.5).abs() < 1e-12);
    let found = community::cnm_cluster(&g).unwrap();
    assert_eq!(found.k, 2);
    assert!((found.modularity - 0.5).abs() < 1e-12);
}

/// Brute-force modularity straight from the definition.
fn modularity_bruteforce(w: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let p = w.nrows();
    let two_m: f64 = w.iter().sum();
    let s: Vec<f64> = (0..p).map(|i| w.row(i).sum()).collect();
    let mut q = 0.0;
    for i in 0..p {
        for j in 0..p {
            if labels[i] == labels[j] {
                q += w[(i, j)] - s[i] * s[j] / two_m;
            }
        }
    }
    q / two_m
}

#[test]
fn cnm_on_estimated_network_matches_bruteforce_modularity() {
    let spec = KuramotoSpec {
        cluster_sizes: vec![5, 5, 4, 1],
        couplings: vec![1.5, 1.0, 0.7, 0.0],
        permutation: None,
        seed: 61,
        strict: true,
    };
    let sys = kuramoto::build_system(&spec).unwrap();
    let series = simulate(sys.pi.clone(), 1500, 61);
    let stats = linmodel::suffstats(&series).unwrap();
    let est = lowrank::estimate_sym(&stats, sys.true_rank).unwrap();
    let g = community::graph_from_pi(&est.pi).unwrap();
    let found = community::cnm_cluster(&g).unwrap();
    assert!((found.modularity - modularity_bruteforce(g.weights(), &found.labels)).abs() < 1e-10);

    let truth = ClusterAssignment::new(sys.assignment.clone()).unwrap();
    let report = community::score_recovery(&truth, &found).unwrap();
    for m in report.matches.iter().filter(|m| m.true_members.len() > 1) {
        assert!(m.misassignments() <= 1, "{m:?}");
    }
}

#[test]
fn per_cluster_reestimate_edge_cases() {
    let series = simulate(kuramoto::build_cluster_block(4, 1.0).unwrap(), 400, 67);
    let one = ClusterAssignment::new(vec![1; 4]).unwrap();
    let glued = community::per_cluster_reestimate(&series, &one).unwrap();
    let full = lowrank::estimate_sym(&linmodel::suffstats(&series).unwrap(), 3).unwrap();
    assert!((&glued.pi - &full.pi).norm() < 1e-12);

    let singles = ClusterAssignment::new(vec![1, 2, 3, 4]).unwrap();
    let glued = community::per_cluster_reestimate(&series, &singles).unwrap();
    assert_eq!(glued.pi, DMatrix::zeros(4, 4));
}
