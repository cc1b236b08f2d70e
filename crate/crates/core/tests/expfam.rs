mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use sngd_core::expfam::{gamma_hessian, standard, Family};
use sngd_core::numerics::{digamma, lgamma};
use std::f64::consts::PI;

fn families() -> Vec<Family> {
    vec![
        Family::Gamma,
        Family::Normal(1),
        Family::Normal(3),
        Family::ZeroMeanNormal(2),
        Family::mixture(3, Family::Gamma).unwrap(),
        Family::mixture(3, Family::Normal(2)).unwrap(),
        Family::mixture(2, Family::ZeroMeanNormal(2)).unwrap(),
    ]
}

/// (offset, d) of every matrix block in a natural/mean vector.
fn matrix_blocks(fam: &Family) -> Vec<(usize, usize)> {
    match fam {
        Family::Gamma => vec![],
        Family::Normal(d) => vec![(*d, *d)],
        Family::ZeroMeanNormal(d) => vec![(0, *d)],
        Family::Mixture(k, c) => {
            let p = c.param_dim();
            matrix_blocks(c).into_iter().flat_map(|(o, d)| (0..*k).map(move |i| (k - 1 + i * p + o, d))).collect()
        }
    }
}

fn random_symmetric_cotangent(fam: &Family, rng: &mut impl Rng) -> Vec<f64> {
    let mut c: Vec<f64> = (0..fam.param_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    symmetrize_blocks(&mut c, &matrix_blocks(fam));
    c
}

#[test]
fn gamma_to_mean_reference() {
    let mu = Family::Gamma.to_mean(&[-1.0, 2.0]).unwrap();
    assert_eq!(mu[0], 2.0);
    // ψ(2) = 1 − γ
    assert!((mu[1] - 0.422_784_335_098_467_1).abs() < 1e-14);
    assert!((mu[1] - digamma(2.0)).abs() == 0.0);
}

#[test]
fn gamma_to_natural_reference() {
    let eta = Family::Gamma.to_natural(&[2.0, digamma(2.0)]).unwrap();
    assert!((eta[0] + 1.0).abs() < 1e-12 && (eta[1] - 2.0).abs() < 1e-12, "{eta:?}");
}

#[test]
fn normal_standard_examples() {
    let fam = Family::Normal(2);
    let std = standard::normal(&[0.0, 0.0], &DMatrix::identity(2, 2));
    let eta = fam.natural_from_std(&std).unwrap();
    assert_eq!(eta, vec![0.0, 0.0, -0.5, 0.0, 0.0, -0.5]);
    assert_eq!(fam.to_mean(&eta).unwrap(), vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]);
    assert_eq!(fam.to_natural(&[0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap(), eta);
    assert_eq!(fam.std_from_natural(&eta).unwrap(), std);
}

#[test]
fn gamma_standard_round_trip_is_exact() {
    let eta = Family::Gamma.natural_from_std(&[3.0, 2.0]).unwrap();
    assert_eq!(eta, vec![-2.0, 3.0]);
    assert_eq!(Family::Gamma.std_from_natural(&eta).unwrap(), vec![3.0, 2.0]);
}

#[test]
fn mixture_mean_layout() {
    let fam = Family::mixture(2, Family::Gamma).unwrap();
    let std = standard::mixture(&[0.3, 0.7], &[vec![2.0, 1.0], vec![5.0, 0.5]]);
    let mu = fam.mean_from_std(&std).unwrap();
    let m1 = Family::Gamma.mean_from_std(&[2.0, 1.0]).unwrap();
    let m2 = Family::Gamma.mean_from_std(&[5.0, 0.5]).unwrap();
    let expected = [0.3, 0.3 * m1[0], 0.3 * m1[1], 0.7 * m2[0], 0.7 * m2[1]];
    assert!(vec_rel(&mu, &expected, 1.0) < 1e-15);
    // to_mean through natural form agrees with the standard-form route.
    let eta = fam.natural_from_std(&std).unwrap();
    assert!(vec_rel(&fam.to_mean(&eta).unwrap(), &expected, 1.0) < 1e-12);
}

#[test]
fn mixture_natural_weights_follow_the_log_ratio_formula() {
    let fam = Family::mixture(3, Family::Gamma).unwrap();
    let comps = [vec![2.0, 1.0], vec![0.7, 3.0], vec![9.0, 0.4]];
    let pi = [0.2, 0.5, 0.3];
    let eta = fam.natural_from_std(&standard::mixture(&pi, &comps)).unwrap();
    let a: Vec<f64> = comps.iter().map(|c| lgamma(c[0]) - c[0] * c[1].ln()).collect();
    for i in 0..2 {
        let expected = (pi[i] / pi[2]).ln() - a[i] + a[2];
        assert!((eta[i] - expected).abs() < 1e-13);
    }
}

#[test]
fn log_partition_examples() {
    assert_eq!(Family::Gamma.log_partition(&[-1.0, 1.0]).unwrap(), 0.0);
    let a = Family::Normal(2).log_partition(&[0.0, 0.0, -0.5, 0.0, 0.0, -0.5]).unwrap();
    // Oracle: ∫ exp(−x²/2) dx by quadrature at d = 1, doubled by additivity.
    let z1 = simpson(|x| (-0.5 * x * x).exp(), -12.0, 12.0, 4000);
    assert!((a - 2.0 * z1.ln()).abs() < 1e-10);
    assert!((a - 1.837_877_066_409_345_5).abs() < 1e-12);
}

#[test]
fn round_trips_on_random_points() {
    let mut r = rng(1);
    for fam in families() {
        for _ in 0..100 {
            let std = fam.random_std(&mut r);
            let eta = fam.natural_from_std(&std).unwrap();
            let back = fam.to_natural(&fam.to_mean(&eta).unwrap()).unwrap();
            assert!(vec_rel(&back, &eta, 1e-3) < 1e-9, "{fam}: {eta:?} -> {back:?}");
            let mu = fam.to_mean(&eta).unwrap();
            let mu_back = fam.to_mean(&fam.to_natural(&mu).unwrap()).unwrap();
            assert!(vec_rel(&mu_back, &mu, 1e-3) < 1e-10, "{fam}");
            let std_back = fam.std_from_natural(&eta).unwrap();
            assert!(vec_rel(&std_back, &std, 1e-3) < 1e-12, "{fam}");
        }
    }
}

#[test]
fn log_partition_gradient_is_mean() {
    let mut r = rng(2);
    for fam in families() {
        for _ in 0..10 {
            let eta = fam.natural_from_std(&fam.random_std(&mut r)).unwrap();
            let fd = fd_grad(|e| fam.log_partition(e).unwrap(), &eta, 1e-6);
            let mu = fam.to_mean(&eta).unwrap();
            assert!(vec_rel(&fd, &mu, 1e-3) < 1e-5, "{fam}: fd {fd:?} mu {mu:?}");
        }
    }
}

#[test]
fn through_to_mean_matches_jacobian_of_to_mean() {
    let mut r = rng(3);
    for fam in families() {
        for _ in 0..5 {
            let eta = fam.natural_from_std(&fam.random_std(&mut r)).unwrap();
            let c = random_symmetric_cotangent(&fam, &mut r);
            let analytic = fam.through_to_mean(&eta, &c).unwrap();
            let fd = fd_vjp(|e| fam.to_mean(e).unwrap(), &eta, &c, 1e-6);
            assert!(vec_rel(&analytic, &fd, 1e-3) < 1e-5, "{fam}: {analytic:?} vs {fd:?}");
        }
    }
}

#[test]
fn through_to_natural_matches_jacobian_of_to_natural() {
    let mut r = rng(4);
    for fam in families() {
        for _ in 0..5 {
            let mu = fam.mean_from_std(&fam.random_std(&mut r)).unwrap();
            let c = random_symmetric_cotangent(&fam, &mut r);
            let analytic = fam.through_to_natural(&mu, &c).unwrap();
            let fd = fd_vjp(|m| fam.to_natural(m).unwrap(), &mu, &c, 1e-7);
            assert!(vec_rel(&analytic, &fd, 1e-3) < 1e-5, "{fam}: {analytic:?} vs {fd:?}");
        }
    }
}

#[test]
fn gamma_hessian_matches_finite_differences_at_two_one() {
    let eta = [-1.0, 2.0];
    let h = gamma_hessian(&eta).unwrap();
    for j in 0..2 {
        let mut e = [0.0; 2];
        e[j] = 1.0;
        let analytic = Family::Gamma.through_to_mean(&eta, &e).unwrap();
        let fd = fd_vjp(|x| Family::Gamma.to_mean(x).unwrap(), &eta, &e, 1e-6);
        assert!(vec_rel(&analytic, &fd, 1.0) < 1e-5);
        assert!(vec_rel(&analytic, &[h[0][j], h[1][j]], 1.0) < 1e-14);
    }
}

#[test]
fn dual_pullbacks_compose_to_identity() {
    let mut r = rng(5);
    for fam in families() {
        for _ in 0..10 {
            let eta = fam.natural_from_std(&fam.random_std(&mut r)).unwrap();
            let mu = fam.to_mean(&eta).unwrap();
            let c = random_symmetric_cotangent(&fam, &mut r);
            let there = fam.through_to_mean(&eta, &c).unwrap();
            let back = fam.through_to_natural(&mu, &there).unwrap();
            assert!(vec_rel(&back, &c, 1e-12) < 1e-8, "{fam}");
            let other = fam.through_to_mean(&eta, &fam.through_to_natural(&mu, &c).unwrap()).unwrap();
            assert!(vec_rel(&other, &c, 1e-12) < 1e-8, "{fam}");
        }
    }
}

#[test]
fn zero_cotangent_pulls_back_to_zero() {
    let fam = Family::Normal(2);
    let eta = [0.0, 0.0, -0.5, 0.0, 0.0, -0.5];
    assert!(fam.through_to_mean(&eta, &[0.0; 6]).unwrap().iter().all(|&v| v == 0.0));
}

#[test]
fn fisher_is_symmetric_and_positive() {
    let mut r = rng(6);
    for fam in families() {
        for _ in 0..10 {
            let eta = fam.natural_from_std(&fam.random_std(&mut r)).unwrap();
            let a = random_symmetric_cotangent(&fam, &mut r);
            let b = random_symmetric_cotangent(&fam, &mut r);
            let ha = fam.through_to_mean(&eta, &a).unwrap();
            let hb = fam.through_to_mean(&eta, &b).unwrap();
            let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
            let (bha, ahb) = (dot(&b, &ha), dot(&a, &hb));
            assert!(rel(bha, ahb, 1e-3) < 1e-9, "{fam}: {bha} vs {ahb}");
            assert!(dot(&a, &ha) > 0.0, "{fam}");
        }
    }
}

#[test]
fn monte_carlo_fisher_matches_hessian_for_gamma() {
    let mut r = rng(7);
    let n = 100_000;
    let eta = [-1.0, 2.0];
    let mu = Family::Gamma.to_mean(&eta).unwrap();
    let mut f = [[0.0; 2]; 2];
    for _ in 0..n {
        let x = Family::Gamma.sample(&[2.0, 1.0], &mut r).unwrap();
        // ∇_η log q = t(x) − μ
        let g = [x[0] - mu[0], x[0].ln() - mu[1]];
        for i in 0..2 {
            for j in 0..2 {
                f[i][j] += g[i] * g[j] / n as f64;
            }
        }
    }
    let h = gamma_hessian(&eta).unwrap();
    for i in 0..2 {
        for j in 0..2 {
            assert!(rel(f[i][j], h[i][j], 0.0) < 0.05, "F[{i}][{j}] = {} vs {}", f[i][j], h[i][j]);
        }
    }
}

#[test]
fn kl_examples() {
    let fam = Family::Gamma;
    assert_eq!(fam.kl(&[-1.0, 2.0], &[-1.0, 2.0]).unwrap(), 0.0);

    // (α, β) = (1, 1) vs (1, 2): quadrature of q₁ log(q₁/q₂).
    let kl = fam.kl(&[-1.0, 1.0], &[-2.0, 1.0]).unwrap();
    let q1 = |x: f64| (-x).exp();
    let q2 = |x: f64| 2.0 * (-2.0 * x).exp();
    let quad = simpson(|x| q1(x) * (q1(x) / q2(x)).ln(), 0.0, 60.0, 20_000);
    assert!((kl - quad).abs() < 1e-4, "{kl} vs {quad}");

    let nfam = Family::Normal(2);
    let eye = DMatrix::identity(2, 2);
    let m = [0.7, -1.3];
    let e1 = nfam.natural_from_std(&standard::normal(&[0.0, 0.0], &eye)).unwrap();
    let e2 = nfam.natural_from_std(&standard::normal(&m, &eye)).unwrap();
    let expected = 0.5 * (m[0] * m[0] + m[1] * m[1]);
    assert!((nfam.kl(&e1, &e2).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn kl_is_nonnegative_on_random_pairs() {
    let mut r = rng(8);
    for fam in families() {
        for _ in 0..20 {
            let e1 = fam.natural_from_std(&fam.random_std(&mut r)).unwrap();
            let e2 = fam.natural_from_std(&fam.random_std(&mut r)).unwrap();
            assert!(fam.kl(&e1, &e2).unwrap() > 0.0, "{fam}");
        }
    }
}

#[test]
fn mixture_joint_density_is_normalized_and_marginalizes() {
    let fam = Family::mixture(2, Family::Gamma).unwrap();
    let comps = [vec![2.0, 1.0], vec![6.0, 0.8]];
    let pi = [0.35, 0.65];
    let eta = fam.natural_from_std(&standard::mixture(&pi, &comps)).unwrap();
    let joint = |z: usize, x: f64| fam.log_density(&eta, &[z as f64, x]).unwrap().exp();
    let total: f64 = (0..2).map(|z| simpson(|x| if x > 0.0 { joint(z, x) } else { 0.0 }, 0.0, 80.0, 40_000)).sum();
    assert!((total - 1.0).abs() < 1e-3, "{total}");

    let gamma_pdf = |c: &[f64], x: f64| {
        (c[0] * c[1].ln() + (c[0] - 1.0) * x.ln() - c[1] * x - lgamma(c[0])).exp()
    };
    for i in 1..200 {
        let x = i as f64 * 0.1;
        let marginal = joint(0, x) + joint(1, x);
        let direct = pi[0] * gamma_pdf(&comps[0], x) + pi[1] * gamma_pdf(&comps[1], x);
        assert!(rel(marginal, direct, 1e-300) < 1e-12, "x={x}: {marginal} vs {direct}");
    }
}

#[test]
fn domain_errors() {
    assert!(Family::Gamma.to_natural(&[2.0, 2f64.ln()]).is_err());
    assert!(Family::Gamma.log_partition(&[1.0, 2.0]).is_err());
    assert!(Family::Normal(1).to_natural(&[1.0, 0.5]).is_err());
    assert!(Family::Normal(1).log_partition(&[0.0, 0.5]).is_err());
    let mix = Family::mixture(2, Family::Gamma).unwrap();
    assert!(mix.to_natural(&[1.2, 1.0, 0.0, 1.0, 0.0]).is_err());
    assert!(mix.validate_std(&[0.5, 0.6, 1.0, 1.0, 1.0, 1.0]).is_err());
    assert!(Family::Gamma.to_mean(&[-1.0]).is_err());
}

#[test]
fn sample_moments_match_means() {
    let mut r = rng(9);
    let fam = Family::mixture(2, Family::Normal(2)).unwrap();
    let std = fam.random_std(&mut r);
    let mu = fam.mean_from_std(&std).unwrap();
    let n = 50_000;
    let mut acc = vec![0.0; mu.len()];
    for _ in 0..n {
        let x = fam.sample(&std, &mut r).unwrap();
        for (a, t) in acc.iter_mut().zip(fam.sufficient_stats(&x).unwrap()) {
            *a += t / n as f64;
        }
    }
    assert!(vec_rel(&acc, &mu, 1.0) < 0.05, "{acc:?} vs {mu:?}");
}

#[test]
fn single_component_mixture_reduces_to_component() {
    let fam = Family::mixture(1, Family::Gamma).unwrap();
    let eta = fam.natural_from_std(&[1.0, 2.0, 1.5]).unwrap();
    assert_eq!(eta, vec![-1.5, 2.0]);
    let a = fam.log_partition(&eta).unwrap();
    assert!((a - Family::Gamma.log_partition(&eta).unwrap()).abs() < 1e-15);
    assert!((Family::Gamma.log_density(&eta, &[1.0]).unwrap() - (2.0 * 1.5f64.ln() - 1.5 - lgamma(2.0))).abs() < 1e-14);
    let _ = PI;
}
