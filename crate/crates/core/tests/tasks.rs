mod common;

use common::*;
use nalgebra::DMatrix;
use sngd_core::numerics::push_matrix;
use sngd_core::optim::Objective;
use sngd_core::targets::{LogRegModel, TargetKind};
use sngd_core::tasks::config::best_cell;
use sngd_core::tasks::experiment::{execute, load_task, plan, trace_csv, TRACE_HEADER};
use sngd_core::tasks::synthetic::generate;
use sngd_core::tasks::{initial_theta, Dataset, ExperimentConfig, MleObjective, Reduction, SeedPolicy, ViObjective};
use sngd_core::Error;

fn in_scope_targets() -> Vec<(TargetKind, Vec<f64>)> {
    let r3 = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.4, 1.0, 0.1, -0.2, 0.1, 1.0]);
    let mut copula = Vec::new();
    push_matrix(&r3, &mut copula);
    let mut tcop = copula.clone();
    tcop.push(6.0);
    let sn = vec![0.3, -0.2, 1.2, 0.4, 0.4, 0.9, 1.5, -0.5];
    let mut sn_mix = vec![0.3, 0.7];
    sn_mix.extend(&sn);
    sn_mix.extend([-1.0, 1.0, 0.8, -0.1, -0.1, 1.1, -0.4, 2.0]);
    vec![
        (TargetKind::NegBin, vec![4.0, 0.4]),
        (TargetKind::SkewNormal(2), sn),
        (TargetKind::mixture(2, TargetKind::NegBin).unwrap(), vec![0.4, 0.6, 2.0, 0.5, 30.0, 0.3]),
        (TargetKind::mixture(2, TargetKind::SkewNormal(2)).unwrap(), sn_mix),
        (TargetKind::GaussianCopula(3), copula),
        (TargetKind::TCopula(3), tcop),
    ]
}

fn data_for(target: &TargetKind, theta: &[f64], n: usize, seed: u64) -> Dataset {
    generate(target, theta, n, seed).unwrap().data
}

#[test]
fn single_observation_objective_is_negative_log_density() {
    for (target, theta) in in_scope_targets() {
        let data = data_for(&target, &theta, 1, 1);
        let obj = MleObjective::new(target.clone(), &data, Reduction::Sum).unwrap();
        let expect = -target.log_density(&theta, data.row(0)).unwrap();
        assert!(rel(obj.value(&theta).unwrap(), expect, 1e-300) < 1e-12, "{target}");
    }
}

#[test]
fn duplicating_the_data_doubles_objective_and_gradient() {
    for (target, theta) in in_scope_targets() {
        let data = data_for(&target, &theta, 50, 2);
        let mut twice = data.values().to_vec();
        twice.extend_from_slice(data.values());
        let doubled = Dataset::new(100, data.cols(), twice, data.is_integral()).unwrap();
        let (f1, g1) = MleObjective::new(target.clone(), &data, Reduction::Sum).unwrap().value_grad(&theta).unwrap();
        let (f2, g2) = MleObjective::new(target.clone(), &doubled, Reduction::Sum).unwrap().value_grad(&theta).unwrap();
        assert!(rel(f2, 2.0 * f1, 1e-300) < 1e-12, "{target}");
        let g1x2: Vec<f64> = g1.iter().map(|g| 2.0 * g).collect();
        assert!(vec_rel(&g2, &g1x2, 1e-12) < 1e-12, "{target}");
    }
}

#[test]
fn mle_gradient_matches_directional_differences() {
    let mut r = rng(3);
    for (target, theta) in in_scope_targets() {
        let data = data_for(&target, &theta, 200, 4);
        let obj = MleObjective::new(target.clone(), &data, Reduction::Sum).unwrap();
        // evaluate away from the generating point
        let start = target.random_theta(&mut r);
        let (_, g) = obj.value_grad(&start).unwrap();
        for _ in 0..5 {
            let v = feasible_direction(&target.blocks(), &mut r);
            let h = 1e-6;
            let at = |s: f64| -> Vec<f64> { start.iter().zip(&v).map(|(t, d)| t + s * d).collect() };
            let fd = (obj.value(&at(h)).unwrap() - obj.value(&at(-h)).unwrap()) / (2.0 * h);
            let an: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            assert!(rel(an, fd, 1e-3) < 1e-5, "{target}: analytic {an}, numeric {fd}");
        }
    }
}

#[test]
fn mle_rejects_unsupported_data() {
    let neg = Dataset::new(2, 1, vec![1.0, -1.0], false).unwrap();
    assert!(MleObjective::new(TargetKind::NegBin, &neg, Reduction::Sum).unwrap_err().is_domain());
    let frac = Dataset::new(2, 1, vec![1.0, 2.5], false).unwrap();
    assert!(MleObjective::new(TargetKind::NegBin, &frac, Reduction::Sum).is_err());
    let out = Dataset::new(1, 2, vec![0.5, 1.0], false).unwrap();
    assert!(MleObjective::new(TargetKind::GaussianCopula(2), &out, Reduction::Sum).unwrap_err().is_domain());
    let wide = Dataset::new(1, 2, vec![1.0, 2.0], true).unwrap();
    assert!(matches!(MleObjective::new(TargetKind::NegBin, &wide, Reduction::Sum), Err(Error::Shape(_))));
}

#[test]
fn count_csv_parses() {
    let d = Dataset::parse_csv("3\n5\n0\n", false, true).unwrap();
    assert_eq!((d.rows(), d.cols()), (3, 1));
    assert_eq!(d.values(), &[3.0, 5.0, 0.0]);
    assert!(d.is_integral());
}

#[test]
fn ragged_csv_names_the_line() {
    let err = Dataset::parse_csv("a,b\n1,2\n3,4\n5\n", true, false).unwrap_err();
    match err {
        Error::Parse { line, .. } => assert_eq!(line, 4),
        other => panic!("unexpected {other:?}"),
    }
    let err = Dataset::parse_csv("1\n2.5\n", false, true).unwrap_err();
    assert!(matches!(err, Error::Integrality { line: 2, .. }), "{err:?}");
    let err = Dataset::parse_csv("1\nx\n", false, false).unwrap_err();
    assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
}

#[test]
fn csv_round_trip_is_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    for (target, theta) in in_scope_targets() {
        let data = data_for(&target, &theta, 300, 5);
        let path = dir.path().join("data.csv");
        data.write_csv(&path).unwrap();
        let back = Dataset::load_csv(&path, false, target.is_count()).unwrap();
        assert_eq!((back.rows(), back.cols()), (data.rows(), data.cols()));
        assert!(back.values().iter().zip(data.values()).all(|(a, b)| a.to_bits() == b.to_bits()), "{target}");
    }
}

#[test]
fn single_row_synthetic_is_deterministic() {
    let a = generate(&TargetKind::NegBin, &[4.0, 0.4], 1, 9).unwrap();
    let b = generate(&TargetKind::NegBin, &[4.0, 0.4], 1, 9).unwrap();
    assert_eq!(a.data.rows(), 1);
    assert_eq!(a, b);
    assert_eq!(a.theta, vec![4.0, 0.4]);
}

#[test]
fn negbin_synthetic_mean() {
    let (r, s) = (4.0, 0.4);
    let n = 50_000;
    let data = data_for(&TargetKind::NegBin, &[r, s], n, 10);
    let mean = data.values().iter().sum::<f64>() / n as f64;
    let var = r * (1.0 - s) / (s * s);
    let se = (var / n as f64).sqrt();
    assert!((mean - 6.0).abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn skew_normal_synthetic_covariance() {
    let d = 3;
    let omega = DMatrix::from_row_slice(3, 3, &[1.5, 0.3, -0.2, 0.3, 0.8, 0.1, -0.2, 0.1, 1.2]);
    let mut theta = vec![0.5, -1.0, 2.0];
    push_matrix(&omega, &mut theta);
    theta.extend([0.0; 3]);
    let n = 100_000;
    let data = data_for(&TargetKind::SkewNormal(d), &theta, n, 11);
    let x = DMatrix::from_row_slice(n, d, data.values());
    let mean = x.row_mean();
    let centered = DMatrix::from_fn(n, d, |i, j| x[(i, j)] - mean[j]);
    let cov = centered.transpose() * &centered / (n as f64 - 1.0);
    let err = (&cov - &omega).norm() / omega.norm();
    assert!(err < 0.1, "relative Frobenius error {err}");
}

#[test]
fn initial_points_follow_conventions() {
    let mut r = rng(12);
    for _ in 0..200 {
        let t = initial_theta(&TargetKind::NegBin, None, &mut r).unwrap();
        assert!(t[0] > 0.0 && (0.05..0.95).contains(&t[1]));
        let sn = initial_theta(&TargetKind::SkewNormal(2), None, &mut r).unwrap();
        assert!(sn[..2].iter().chain(&sn[6..]).all(|v| v.abs() < 0.1));
        assert_eq!(&sn[2..6], &[1.0, 0.0, 0.0, 1.0]);
    }
    let data = Dataset::parse_csv("10\n100\n", false, true).unwrap();
    let mix = TargetKind::mixture(3, TargetKind::NegBin).unwrap();
    let t = initial_theta(&mix, Some(&data), &mut r).unwrap();
    mix.validate(&t).unwrap();
    for c in 0..3 {
        let (rr, s) = (t[3 + 2 * c], t[4 + 2 * c]);
        let m = rr * (1.0 - s) / s;
        assert!((10.0..90.0).contains(&m), "component mean {m}");
    }
    assert!(initial_theta(&mix, None, &mut r).is_err());
}

fn vi_model(n: usize, seed: u64) -> LogRegModel {
    LogRegModel::synthetic(n, &[1.0, -0.5], 1.0, &mut rng(seed)).unwrap()
}

fn vi_theta(m: &[f64], sigma: &DMatrix<f64>) -> Vec<f64> {
    let mut t = m.to_vec();
    push_matrix(sigma, &mut t);
    t
}

#[test]
fn vi_fixed_seed_is_deterministic() {
    let obj = ViObjective::new(vi_model(30, 13), 50, 7, SeedPolicy::Fixed).unwrap();
    let theta = vi_theta(&[0.1, 0.2], &DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.5]));
    assert_eq!(obj.value_grad(&theta).unwrap(), obj.value_grad(&theta).unwrap());
    let mut obj2 = obj.clone();
    obj2.reseed(5);
    assert_eq!(obj2.value(&theta).unwrap(), obj.value(&theta).unwrap());
    let mut per = ViObjective::new(vi_model(30, 13), 50, 7, SeedPolicy::PerIteration).unwrap();
    let before = per.value(&theta).unwrap();
    per.reseed(1);
    assert_ne!(per.value(&theta).unwrap(), before);
}

#[test]
fn vi_pathwise_gradient_matches_fixed_noise_differences() {
    let obj = ViObjective::new(vi_model(40, 14), 30, 3, SeedPolicy::Fixed).unwrap();
    let mut r = rng(15);
    for _ in 0..5 {
        let sigma = random_spd(&mut r, 2, 0.3);
        let theta = vi_theta(&[0.3, -0.7], &sigma);
        let (_, g) = obj.value_grad(&theta).unwrap();
        let fd = fd_grad(|t| obj.value(t).unwrap(), &theta, 1e-6);
        assert!(max_rel(&g, &fd, 1e-4) < 1e-5, "{g:?} vs {fd:?}");
    }
    let sigma3 = random_spd(&mut r, 3, 0.3);
    let model3 = LogRegModel::synthetic(40, &[0.5, 1.0, -1.0], 2.0, &mut rng(16)).unwrap();
    let obj3 = ViObjective::new(model3, 20, 4, SeedPolicy::Fixed).unwrap();
    let theta = vi_theta(&[0.1, 0.0, -0.2], &sigma3);
    let (_, g) = obj3.value_grad(&theta).unwrap();
    let fd = fd_grad(|t| obj3.value(t).unwrap(), &theta, 1e-6);
    assert!(max_rel(&g, &fd, 1e-4) < 1e-5, "{g:?} vs {fd:?}");
}

/// Per-coordinate mean and standard error of the per-sample gradients.
fn gradient_stats(obj: &ViObjective, theta: &[f64], seed: u64, samples: usize) -> (Vec<f64>, Vec<f64>) {
    let terms = obj.terms(theta, seed, samples, true).unwrap();
    let n = samples as f64;
    let dim = theta.len();
    let mean: Vec<f64> = (0..dim).map(|i| terms.iter().map(|(_, g)| g[i]).sum::<f64>() / n).collect();
    let se = (0..dim)
        .map(|i| (terms.iter().map(|(_, g)| (g[i] - mean[i]).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt())
        .collect();
    (mean, se)
}

#[test]
fn vi_prior_only_optimum_is_standard_normal() {
    let model = LogRegModel::new(DMatrix::zeros(0, 2), Vec::new(), 1.0).unwrap();
    let obj = ViObjective::new(model, 1000, 17, SeedPolicy::Fixed).unwrap();
    let theta = vi_theta(&[0.0, 0.0], &DMatrix::identity(2, 2));
    let (g, se) = gradient_stats(&obj, &theta, 18, 1000);
    let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    let se_norm = se.iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(norm <= 3.0 * se_norm, "gradient norm {norm}, combined se {se_norm}");
    // q equals the posterior, so every sample has zero log ratio
    assert!(obj.value(&theta).unwrap().abs() < 1e-12);
}

#[test]
fn vi_monte_carlo_gradient_matches_large_sample_differences() {
    let obj = ViObjective::new(vi_model(60, 19), 10, 0, SeedPolicy::Fixed).unwrap();
    let sigma = DMatrix::from_row_slice(2, 2, &[0.6, 0.1, 0.1, 0.4]);
    let theta = vi_theta(&[0.4, -0.3], &sigma);
    let (g, se) = gradient_stats(&obj, &theta, 20, 10_000);
    let big_seed = 21;
    let (_, se_big) = gradient_stats(&obj, &theta, big_seed, 100_000);
    let value = |t: &[f64]| {
        let terms = obj.terms(t, big_seed, 100_000, false).unwrap();
        terms.iter().map(|(v, _)| v).sum::<f64>() / terms.len() as f64
    };
    let fd = fd_grad(value, &theta, 1e-5);
    for i in 0..theta.len() {
        let combined = (se[i].powi(2) + se_big[i].powi(2)).sqrt();
        assert!((g[i] - fd[i]).abs() <= 3.0 * combined, "coordinate {i}: {} vs {} (se {combined})", g[i], fd[i]);
    }
}

const MINIMAL: &str = r#"
name = "demo"
seeds = [0, 1]

[task]
kind = "mle"
map = "negbin"

[data]
source = "synthetic"
n = 200
theta = [4.0, 0.4]

[optimizer]
kind = "sngd"
schedule = "line-search"

[stop]
max_iters = 5
"#;

#[test]
fn config_parses_and_applies_overrides() {
    let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
    assert_eq!(cfg.seeds, vec![0, 1]);
    assert_eq!(cfg.stop.max_iters, 5);
    assert_eq!(cfg.cells().len(), 1);
    let cfg = ExperimentConfig::from_toml_with(
        MINIMAL,
        &["stop.max_iters=0".into(), "optimizer.step_size=[0.1, 0.2, 0.3]".into(), "optimizer.lr=[1e-3, 1e-2]".into()],
    )
    .unwrap();
    assert_eq!(cfg.stop.max_iters, 0);
    assert_eq!(cfg.cells().len(), 6);
    assert_eq!(plan(&cfg).len(), 12);
    let again = ExperimentConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn config_errors_name_the_key() {
    let err = ExperimentConfig::from_toml_with(MINIMAL, &["task.mapp=\"negbin\"".into()]).unwrap_err();
    assert!(err.to_string().contains("mapp"), "{err}");
    let err = ExperimentConfig::from_toml_with(MINIMAL, &["task.map=\"poisson\"".into()]).unwrap_err();
    assert!(err.to_string().contains("poisson"), "{err}");
    let err = ExperimentConfig::from_toml_with(MINIMAL, &["optimizer.step_size=[]".into()]).unwrap_err();
    assert!(err.to_string().contains("optimizer.step_size"), "{err}");
    let err = ExperimentConfig::from_toml_with(MINIMAL, &["task.kind=\"vi\"".into()]).unwrap_err();
    assert!(err.to_string().contains("task.map"), "{err}");
}

#[test]
fn best_cell_uses_worst_seed_average() {
    // cell 0 has a better best seed, cell 1 a better worst seed
    let curves = vec![
        vec![vec![5.0, 1.0, 0.0], vec![9.0, 8.0, 7.0]],
        vec![vec![6.0, 4.0, 3.0], vec![6.0, 5.0]],
    ];
    assert_eq!(best_cell(&curves), Some(1));
    assert_eq!(best_cell(&[vec![vec![f64::NAN]], vec![vec![2.0]]]), Some(1));
    assert_eq!(best_cell(&[]), None);
}

#[test]
fn execute_is_reproducible() {
    let cfg = ExperimentConfig::from_toml(MINIMAL).unwrap();
    let task = load_task(&cfg).unwrap();
    for spec in plan(&cfg) {
        let a = execute(&cfg, &task, &spec);
        let b = execute(&cfg, &task, &spec);
        assert!(!a.trace.status.is_failure(), "{:?}", a.trace.status);
        let csv = trace_csv(&spec.run_id, &a.trace);
        assert_eq!(csv, trace_csv(&spec.run_id, &b.trace));
        assert!(csv.starts_with(TRACE_HEADER));
        for (i, line) in csv.lines().skip(1).enumerate() {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields.len(), 7);
            assert_eq!(fields[1], i.to_string());
            let obj: f64 = fields[3].parse().unwrap();
            assert_eq!(obj, a.trace.rows[i].objective);
        }
    }
}
