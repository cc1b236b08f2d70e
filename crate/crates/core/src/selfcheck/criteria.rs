use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::expfam::{Family, Parameterization};
use crate::maps::MapKind;
use crate::numerics::{push_matrix, solve_spd};
use crate::optim::{
    run, AdamConfig, AuxRule, FnObjective, Gd, LineSearchConfig, INTERIOR_FRACTION, NgdExact, NgdExactConfig, Objective, Schedule, Sngd, Stepper, StopRules,
    Termination, Trace,
};
use crate::targets::{free, free::Block, LogRegModel, TargetKind};
use crate::tasks::synthetic::{generate, skew_normal_params};
use crate::tasks::{initial_theta, KlObjective, MleObjective, Reduction, SeedPolicy, ViObjective};

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A labelled measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct Measure {
    pub label: String,
    pub value: f64,
}

fn measure(label: impl Into<String>, value: f64) -> Measure {
    Measure { label: label.into(), value }
}

/// Largest |a − b| / max(|a|, |b|, floor) over coordinates.
fn worst_rel(a: &[f64], b: &[f64], floor: f64) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor)).fold(0.0, f64::max)
}

fn mean_stats(fam: &Family, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; fam.param_dim()];
    for x in rows {
        acc.iter_mut().zip(fam.sufficient_stats(x)?).for_each(|(a, t)| *a += t);
    }
    Ok(acc.iter().map(|a| a / rows.len() as f64).collect())
}

fn line_search() -> Schedule {
    Schedule::LineSearch(LineSearchConfig { boundary_fraction: INTERIOR_FRACTION, ..Default::default() })
}

/// Families used by the single-step and round-trip criteria.
pub fn criterion_families() -> Vec<Family> {
    vec![
        Family::Gamma,
        Family::Normal(1),
        Family::Normal(3),
        Family::ZeroMeanNormal(2),
        Family::mixture(3, Family::Gamma).expect("valid mixture"),
        Family::mixture(3, Family::Normal(2)).expect("valid mixture"),
    ]
}

/// SNGD direction against the Monte Carlo Fisher baseline, both in standard
/// coordinates. The SNGD direction lives in mean coordinates and is carried to
/// the standard form by a central-difference JVP of the inverse link.
/// Reports the worst per-coordinate relative error for each case.
pub fn dual_gradient_identity(samples: usize, seed: u64) -> Result<Vec<Measure>> {
    let mut out = Vec::new();
    let mut r = rng(seed);
    let normal_theta = {
        let cov = DMatrix::from_row_slice(3, 3, &[1.5, 0.3, -0.2, 0.3, 1.0, 0.25, -0.2, 0.25, 0.8]);
        let mut t = vec![0.5, -0.3, 0.2];
        push_matrix(&cov, &mut t);
        t
    };
    let normal_data = {
        let cov = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.0, 0.5, 1.5, -0.4, 0.0, -0.4, 1.2]);
        let mut t = vec![1.0, 0.5, -1.0];
        push_matrix(&cov, &mut t);
        t
    };
    // data are chosen so that no coordinate of the direction is near zero,
    // where a relative comparison would only measure Monte Carlo noise
    let cases = [
        (Family::Gamma, vec![2.0, 1.0], vec![3.0, 2.0]),
        (Family::Normal(3), normal_theta, normal_data),
    ];
    for (fam, theta, data_theta) in cases {
        let target = TargetKind::ExpFamily(fam.clone());
        let data = generate(&target, &data_theta, 1000, r.random())?.data;
        let obj = MleObjective::new(target.clone(), &data, Reduction::Mean)?;
        let s = Sngd::from_theta(MapKind::Canonical(fam.clone()), Parameterization::Mean, &theta, Schedule::Constant(1.0))?;
        let (_, dir, _) = s.direction(&obj)?;
        let mu = fam.mean_from_std(&theta)?;
        let scale = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
        let h = 1e-6;
        let at = |sign: f64| -> Result<Vec<f64>> {
            let m: Vec<f64> = mu.iter().zip(&dir).map(|(m, d)| m + sign * h * d / scale).collect();
            fam.std_from_mean(&m)
        };
        let (plus, minus) = (at(1.0)?, at(-1.0)?);
        let sngd: Vec<f64> = plus.iter().zip(&minus).map(|(p, m)| (p - m) / (2.0 * h) * scale).collect();
        let cfg = NgdExactConfig { samples, ridge: 1e-8, seed: r.random() };
        let (_, exact) = NgdExact::new(target, &theta, Schedule::Constant(1.0), cfg)?.direction(&obj)?;
        out.push(measure(fam.to_string(), worst_rel(&sngd, &exact, 1e-12)));
    }
    Ok(out)
}

/// One undamped mean-parameterized step on each family's averaged MLE
/// objective; worst relative distance to the mean sufficient statistic.
pub fn single_step_mle() -> Result<Vec<Measure>> {
    let mut r = rng(2);
    let mut out = Vec::new();
    for fam in criterion_families() {
        let target = TargetKind::ExpFamily(fam.clone());
        let truth = fam.random_std(&mut r);
        let rows = target.sample(&truth, 500, &mut r)?;
        let data = crate::tasks::Dataset::from_rows(&rows, false)?;
        let obj = MleObjective::new(target, &data, Reduction::Mean)?;
        let mu_star = mean_stats(&fam, &rows)?;
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let start = fam.random_std(&mut r);
            let mut s =
                Sngd::from_theta(MapKind::Canonical(fam.clone()), Parameterization::Mean, &start, Schedule::Constant(1.0))?;
            s.evaluate(&obj)?;
            s.step(&obj)?;
            worst = worst.max(worst_rel(s.point(), &mu_star, 1e-300));
        }
        out.push(measure(fam.to_string(), worst));
    }
    Ok(out)
}

/// One undamped natural-parameterized step on KL(q_η ‖ q_η*).
pub fn kl_single_step() -> Result<Vec<Measure>> {
    let mut r = rng(3);
    let mut out = Vec::new();
    for fam in [Family::Gamma, Family::Normal(2)] {
        let mut worst: f64 = 0.0;
        for _ in 0..5 {
            let eta_star = fam.natural_from_std(&fam.random_std(&mut r))?;
            let obj = KlObjective::new(fam.clone(), eta_star.clone())?;
            let start = fam.random_std(&mut r);
            let mut s = Sngd::from_theta(
                MapKind::Canonical(fam.clone()),
                Parameterization::Natural,
                &start,
                Schedule::Constant(1.0),
            )?;
            s.evaluate(&obj)?;
            s.step(&obj)?;
            worst = worst.max(worst_rel(s.point(), &eta_star, 1e-300));
        }
        out.push(measure(fam.to_string(), worst));
    }
    Ok(out)
}

/// to_natural ∘ to_mean on random natural parameters, error relative to max(|η|, 1).
pub fn round_trips(points: usize) -> Result<Vec<Measure>> {
    let mut r = rng(4);
    let mut out = Vec::new();
    for fam in criterion_families() {
        let mut worst: f64 = 0.0;
        for _ in 0..points {
            let eta = fam.natural_from_std(&fam.random_std(&mut r))?;
            let back = fam.to_natural(&fam.to_mean(&eta)?)?;
            worst = worst.max(worst_rel(&back, &eta, 1.0));
        }
        out.push(measure(fam.to_string(), worst));
    }
    Ok(out)
}

/// A random direction in natural coordinates with symmetric matrix blocks.
fn natural_probe<R: Rng + ?Sized>(fam: &Family, r: &mut R) -> Vec<f64> {
    let sym = |r: &mut R, d: usize| {
        let m = DMatrix::from_fn(d, d, |_, _| r.random_range(-1.0..1.0));
        let s = (&m + m.transpose()) * 0.5;
        s.iter().copied().collect::<Vec<f64>>()
    };
    match fam {
        Family::Gamma => (0..2).map(|_| r.random_range(-1.0..1.0)).collect(),
        Family::Normal(d) => {
            let mut v: Vec<f64> = (0..*d).map(|_| r.random_range(-1.0..1.0)).collect();
            v.extend(sym(r, *d));
            v
        }
        Family::ZeroMeanNormal(d) => sym(r, *d),
        Family::Mixture(k, c) => {
            let mut v: Vec<f64> = (0..k - 1).map(|_| r.random_range(-1.0..1.0)).collect();
            for _ in 0..*k {
                v.extend(natural_probe(c, r));
            }
            v
        }
    }
}

/// Per family: (worst error of a central-difference ∇A against to_mean,
/// worst asymmetry of ⟨u, ∇²A v⟩ against ⟨v, ∇²A u⟩).
pub fn log_partition_checks(points: usize) -> Result<Vec<(String, f64, f64)>> {
    let mut r = rng(5);
    let mut out = Vec::new();
    for fam in criterion_families() {
        let (mut grad_err, mut sym_err): (f64, f64) = (0.0, 0.0);
        for _ in 0..points {
            let eta = fam.natural_from_std(&fam.random_std(&mut r))?;
            let mu = fam.to_mean(&eta)?;
            // directional differences along every coordinate, symmetric pairs moved together
            let n = eta.len();
            let mut fd = vec![0.0; n];
            for i in 0..n {
                let h = 1e-6 * eta[i].abs().max(1.0);
                let mut p = eta.clone();
                let mut m = eta.clone();
                p[i] += h;
                m[i] -= h;
                fd[i] = (fam.log_partition(&p)? - fam.log_partition(&m)?) / (2.0 * h);
            }
            grad_err = grad_err.max(worst_rel(&fd, &mu, 1e-3));
            let u = natural_probe(&fam, &mut r);
            let v = natural_probe(&fam, &mut r);
            let hv = fam.through_to_mean(&eta, &v)?;
            let hu = fam.through_to_mean(&eta, &u)?;
            let a: f64 = u.iter().zip(&hv).map(|(x, y)| x * y).sum();
            let b: f64 = v.iter().zip(&hu).map(|(x, y)| x * y).sum();
            sym_err = sym_err.max((a - b).abs() / a.abs().max(b.abs()).max(1e-3));
        }
        out.push((fam.to_string(), grad_err, sym_err));
    }
    Ok(out)
}

/// ‖Jᵀ∇f‖ at the final SNGD point, with J the central-difference Jacobian of
/// the map over (θ̃, λ). An independent check of the stopping statistic.
pub fn pulled_back_norm(s: &Sngd, obj: &dyn Objective) -> Result<f64> {
    let map = s.map();
    let p = s.parameterization();
    let point = s.point();
    let n = point.len();
    let joint = [point, s.aux()].concat();
    let (_, g) = obj.value_grad(&map.forward_from(point, p, s.aux())?)?;
    let mut total = 0.0;
    for j in 0..joint.len() {
        let h = 1e-7 * joint[j].abs().max(1e-2);
        let mut plus = joint.clone();
        let mut minus = joint.clone();
        plus[j] += h;
        minus[j] -= h;
        let tp = map.forward_from(&plus[..n], p, &plus[n..])?;
        let tm = map.forward_from(&minus[..n], p, &minus[n..])?;
        let d: f64 = tp.iter().zip(&tm).zip(&g).map(|((a, b), gi)| (a - b) / (2.0 * h) * gi).sum();
        total += d * d;
    }
    Ok(total.sqrt())
}

/// One seed of the negative-binomial desk experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DeskRun {
    pub seed: u64,
    /// NLL at the converged GD optimum.
    pub f_star: f64,
    /// First SNGD iteration within the tolerance of `f_star`.
    pub sngd_iters: Option<usize>,
    /// First GD iteration within the tolerance of `f_star`.
    pub gd_iters: Option<usize>,
    pub gd_status: Termination,
    pub sngd_status: Termination,
    /// Independent stationarity check at the final SNGD point.
    pub pulled_back_norm: f64,
    pub grad_norm_tol: f64,
}

/// SNGD gradient tolerance per observation in the desk runs; the summed
/// objective scales it by n. It sits well below the NLL gap being timed.
pub const SNGD_DESK_TOL: f64 = 1e-6;

/// Per-observation gradient tolerance of the recovery fits: about 1% of the
/// sampling noise of a mean gradient at n = 10⁴.
pub const RECOVERY_TOL: f64 = 1e-4;
const RECOVERY_LINE_SEARCH_TOL: f64 = 1e-4;
const RECOVERY_AUX_LR: f64 = 0.1;

fn first_within(trace: &Trace, f_star: f64, tol: f64) -> Option<usize> {
    trace.rows.iter().find(|r| r.objective - f_star <= tol).map(|r| r.iteration)
}

/// SNGD and GD, both with exact line search, on summed negative-binomial
/// NLL from the same initialization, against the GD optimum.
pub fn negbin_desk(seeds: &[u64], n: usize, tol: f64) -> Result<Vec<DeskRun>> {
    let mut out = Vec::new();
    for &seed in seeds {
        let data = generate(&TargetKind::NegBin, &[4.0, 0.4], n, 1000 + seed)?.data;
        let mut obj = MleObjective::new(TargetKind::NegBin, &data, Reduction::Sum)?;
        let theta0 = initial_theta(&TargetKind::NegBin, Some(&data), &mut rng(2000 + seed))?;

        let mut gd = Gd::new(TargetKind::NegBin.blocks(), &theta0, line_search())?;
        let gd_trace = run(&mut gd, &mut obj, &StopRules { max_iters: 100_000, grad_norm_tol: 1e-7, rel_obj_tol: 0.0 }, false);
        if let Termination::Failed(e) = &gd_trace.status {
            return Err(e.clone());
        }
        let f_star = gd_trace.last().map(|r| r.objective).unwrap_or(f64::NAN);

        let mut s = Sngd::from_theta(MapKind::NegBin, Parameterization::Mean, &theta0, line_search())?;
        let stop = StopRules { max_iters: 200, grad_norm_tol: SNGD_DESK_TOL * n as f64, rel_obj_tol: 0.0 };
        let sngd_trace = run(&mut s, &mut obj, &stop, false);
        out.push(DeskRun {
            seed,
            f_star,
            sngd_iters: first_within(&sngd_trace, f_star, tol),
            gd_iters: first_within(&gd_trace, f_star, tol),
            gd_status: gd_trace.status,
            sngd_status: sngd_trace.status,
            pulled_back_norm: pulled_back_norm(&s, &obj)?,
            grad_norm_tol: stop.grad_norm_tol,
        });
    }
    Ok(out)
}

/// Outcome of one recovery experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Recovery {
    pub name: String,
    /// Largest |θ̂ − θ| / SE over minimal coordinates.
    pub max_z: f64,
    pub status: Termination,
    pub pulled_back_norm: f64,
    pub grad_norm_tol: f64,
}

/// Standard errors from the inverse observed information of a summed NLL,
/// in minimal coordinates, by central differences of the analytic gradient.
pub fn standard_errors(obj: &dyn Objective, blocks: &[Block], theta: &[f64]) -> Result<Vec<f64>> {
    let n = free::tangent_dim(blocks);
    let mut h_mat = DMatrix::zeros(n, n);
    let values = free::tangent_values(blocks, theta);
    for j in 0..n {
        let h = 1e-5 * values[j].abs().max(1e-2);
        let mut e = vec![0.0; n];
        e[j] = h;
        let step = free::tangent_lift(blocks, &e);
        let plus: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t + s).collect();
        let minus: Vec<f64> = theta.iter().zip(&step).map(|(t, s)| t - s).collect();
        let gp = free::tangent_project(blocks, &obj.value_grad(&plus)?.1);
        let gm = free::tangent_project(blocks, &obj.value_grad(&minus)?.1);
        for i in 0..n {
            h_mat[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
        }
    }
    let h_sym = (&h_mat + h_mat.transpose()) * 0.5;
    let mut se = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let col = solve_spd(&h_sym, &e)?;
        se.push(col[i].sqrt());
    }
    Ok(se)
}

fn negbin_mixture_truth() -> Vec<f64> {
    // component means 4, 30 and 120
    let comp = |mean: f64, s: f64| [mean * s / (1.0 - s), s];
    let mut t = vec![0.3, 0.3, 0.4];
    t.extend(comp(4.0, 0.5));
    t.extend(comp(30.0, 0.2));
    t.extend(comp(120.0, 0.1));
    t
}

/// Reorders negative-binomial mixture components by mean.
fn sort_negbin_mixture(k: usize, theta: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..k).collect();
    let mean = |i: usize| {
        let (r, s) = (theta[k + 2 * i], theta[k + 2 * i + 1]);
        r * (1.0 - s) / s
    };
    idx.sort_by(|a, b| mean(*a).total_cmp(&mean(*b)));
    let mut out: Vec<f64> = idx.iter().map(|&i| theta[i]).collect();
    for &i in &idx {
        out.extend_from_slice(&theta[k + 2 * i..k + 2 * i + 2]);
    }
    out
}

fn fit(map: &MapKind, obj: &mut MleObjective, theta0: &[f64], stop: &StopRules) -> Result<(Sngd, Trace)> {
    // Adam on λ: plain line-searched steps stall near the zero-slant stationary
    // point of the skew-normal, where the λ gradient is tiny
    let ls = LineSearchConfig { tol: RECOVERY_LINE_SEARCH_TOL, boundary_fraction: INTERIOR_FRACTION, ..Default::default() };
    let mut s = Sngd::from_theta(map.clone(), Parameterization::Mean, theta0, Schedule::LineSearch(ls))?
        .with_aux_rule(AuxRule::Adam(AdamConfig::with_lr(RECOVERY_AUX_LR)));
    let trace = run(&mut s, obj, stop, false);
    Ok((s, trace))
}

/// SNGD MLE on synthetic data; the estimate is compared with the generating
/// parameters in units of its standard error.
pub fn parameter_recovery() -> Result<Vec<Recovery>> {
    let mut out = Vec::new();
    let copula_truth = {
        let r = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 1.0]);
        let mut t = Vec::new();
        push_matrix(&r, &mut t);
        t
    };
    let cases: Vec<(MapKind, Vec<f64>, usize, usize)> = vec![
        (MapKind::NegBin, vec![4.0, 0.4], 10_000, 1),
        (MapKind::SkewNormal(3), skew_normal_params(3, &mut rng(6)), 20_000, 1),
        (MapKind::NegBinMixture(3), negbin_mixture_truth(), 10_000, 5),
        (MapKind::GaussianCopula(3), copula_truth, 10_000, 1),
    ];
    for (i, (map, truth, n, restarts)) in cases.into_iter().enumerate() {
        let target = map.target();
        let data = generate(&target, &truth, n, 3000 + i as u64)?.data;
        let mut sum_obj = MleObjective::new(target.clone(), &data, Reduction::Sum)?;
        let stop = StopRules { max_iters: 5000, grad_norm_tol: RECOVERY_TOL * n as f64, rel_obj_tol: 0.0 };
        // restarts guard mixtures against poor local optima; the lowest NLL wins
        let mut best: Option<(f64, Sngd, Trace)> = None;
        for k in 0..restarts {
            let theta0 = initial_theta(&target, Some(&data), &mut rng(4000 + 10 * i as u64 + k as u64))?;
            let (s, trace) = fit(&map, &mut sum_obj, &theta0, &stop)?;
            let f = trace.last().map_or(f64::INFINITY, |r| r.objective);
            if best.as_ref().is_none_or(|(bf, _, _)| f < *bf) {
                best = Some((f, s, trace));
            }
        }
        let (_, s, trace) = best.expect("at least one restart");
        let mut estimate = s.theta()?;
        let mut truth = truth;
        if let MapKind::NegBinMixture(k) = map {
            estimate = sort_negbin_mixture(k, &estimate);
            truth = sort_negbin_mixture(k, &truth);
        }
        let blocks = target.blocks();
        let se = standard_errors(&sum_obj, &blocks, &estimate)?;
        let est_v = free::tangent_values(&blocks, &estimate);
        let true_v = free::tangent_values(&blocks, &truth);
        let max_z = est_v.iter().zip(&true_v).zip(&se).map(|((a, b), s)| (a - b).abs() / s).fold(0.0, f64::max);
        out.push(Recovery {
            name: map.to_string(),
            max_z,
            status: trace.status,
            pulled_back_norm: pulled_back_norm(&s, &sum_obj)?,
            grad_norm_tol: stop.grad_norm_tol,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DomainSafety {
    pub trials: usize,
    pub violations: usize,
    pub backtracks: usize,
}

/// Negative-binomial starts within 10⁻² of β = 1 with steps up to 10³.
pub fn domain_safety(trials: usize) -> Result<DomainSafety> {
    let data = generate(&TargetKind::NegBin, &[4.0, 0.4], 500, 7)?.data;
    let obj = MleObjective::new(TargetKind::NegBin, &data, Reduction::Sum)?;
    let mut r = rng(8);
    let (mut violations, mut backtracks) = (0, 0);
    for _ in 0..trials {
        let s_val = 1.0 - 10f64.powf(r.random_range(-6.0..-2.0));
        let r_val = r.random_range(0.5..20.0);
        let eps = 10f64.powf(r.random_range(0.0..3.0));
        let mut s = Sngd::from_theta(MapKind::NegBin, Parameterization::Mean, &[r_val, s_val], Schedule::Constant(eps))?;
        s.evaluate(&obj)?;
        let stepped = s.step(&obj);
        match stepped {
            Ok(o) => backtracks += o.backtracks,
            Err(_) => violations += 1,
        }
        let inside = MapKind::NegBin.domain_check_in(s.point(), Parameterization::Mean)
            && s.theta().and_then(|t| TargetKind::NegBin.validate(&t)).is_ok();
        if !inside {
            violations += 1;
        }
    }
    Ok(DomainSafety { trials, violations, backtracks })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ViSanity {
    pub median_initial: f64,
    pub median_final: f64,
    /// Largest |m − w_MAP| over seeds and coordinates.
    pub max_mean_gap: f64,
    pub failures: usize,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
}

/// Deterministic MAP of a logistic-regression model by GD with line search.
pub fn logreg_map(model: &LogRegModel) -> Result<Vec<f64>> {
    let d = model.dim();
    let m1 = model.clone();
    let m2 = model.clone();
    let mut obj = FnObjective::new(
        d,
        move |w: &[f64]| -m1.log_joint_grad(w).map_or(f64::NAN, |r| r.0),
        move |w: &[f64]| m2.log_joint_grad(w).map_or(vec![f64::NAN; w.len()], |r| r.1.iter().map(|g| -g).collect()),
    );
    let mut gd = Gd::new(vec![Block::Real(d)], &vec![0.0; d], line_search())?;
    let trace = run(&mut gd, &mut obj, &StopRules { max_iters: 10_000, grad_norm_tol: 1e-10, rel_obj_tol: 0.0 }, false);
    if let Termination::Failed(e) = trace.status {
        return Err(e);
    }
    gd.theta()
}

/// Natural-parameterized SNGD on the normal-posterior ELBO of a seeded
/// logistic regression, across seeds.
pub fn vi_sanity(seeds: &[u64], iterations: usize, step: f64, samples: usize, eval_samples: usize) -> Result<ViSanity> {
    let model = LogRegModel::synthetic(60, &[1.0, -0.5], 1.0, &mut rng(9))?;
    let w_map = logreg_map(&model)?;
    let target = TargetKind::ExpFamily(Family::Normal(2));
    let (mut initial, mut fin) = (Vec::new(), Vec::new());
    let mut gap: f64 = 0.0;
    let mut failures = 0;
    for &seed in seeds {
        let mut obj = ViObjective::new(model.clone(), samples, seed, SeedPolicy::PerIteration)?;
        let theta0 = initial_theta(&target, None, &mut rng(5000 + seed))?;
        let eval_seed = 6000 + seed;
        initial.push(obj.estimate(&theta0, eval_seed, eval_samples)?.0);
        let mut s = Sngd::from_theta(MapKind::ViNormalIdentity(2), Parameterization::Natural, &theta0, Schedule::Constant(step))?;
        let stop = StopRules { max_iters: iterations, grad_norm_tol: 0.0, rel_obj_tol: 0.0 };
        let trace = run(&mut s, &mut obj, &stop, false);
        if trace.status.is_failure() {
            failures += 1;
            continue;
        }
        let theta = s.theta()?;
        fin.push(obj.estimate(&theta, eval_seed, eval_samples)?.0);
        gap = theta[..2].iter().zip(&w_map).map(|(a, b)| (a - b).abs()).fold(gap, f64::max);
    }
    Ok(ViSanity {
        median_initial: median(initial),
        median_final: if fin.is_empty() { f64::NAN } else { median(fin) },
        max_mean_gap: gap,
        failures,
    })
}
