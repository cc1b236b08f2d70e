mod common;

use common::*;
use nalgebra::DMatrix;
use rand::Rng;
use sngd_core::expfam::{standard, Family, Parameterization};
use sngd_core::maps::{bundled, MapKind, MAP_IDS};
use sngd_core::numerics::push_matrix;
use sngd_core::targets::{free::Block, TargetKind};

fn all_maps() -> Vec<MapKind> {
    let mut maps = bundled(3, 3);
    maps.push(MapKind::SkewNormal(1));
    maps.push(MapKind::SkewNormalMixture(2, 2));
    maps.push(MapKind::ViNormalIdentity(2));
    maps.push(MapKind::Canonical(Family::Gamma));
    maps
}

/// (offset, d) of every matrix block in a target layout.
fn matrix_blocks(target: &TargetKind) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut off = 0;
    for b in target.blocks() {
        if let Block::Spd(d) | Block::Corr(d) = b {
            out.push((off, d));
        }
        off += b.theta_len();
    }
    out
}

fn random_cotangent(rng: &mut impl Rng, target: &TargetKind) -> Vec<f64> {
    let mut g: Vec<f64> = (0..target.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    symmetrize_blocks(&mut g, &matrix_blocks(target));
    g
}

#[test]
fn forward_examples() {
    assert_eq!(MapKind::NegBin.forward(&[3.0, 0.5], &[]).unwrap(), vec![6.0, 0.5]);

    let sigma = standard::zero_mean_normal(&DMatrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 9.0]));
    let r = MapKind::GaussianCopula(2).forward(&sigma, &[]).unwrap();
    assert_eq!(r[0], 1.0);
    assert_eq!(r[3], 1.0);
    assert!((r[1] - 1.0 / 3.0).abs() < 1e-15 && (r[2] - 1.0 / 3.0).abs() < 1e-15);

    let r = MapKind::TCopula(2).forward(&sigma, &[3f64.ln()]).unwrap();
    assert!((r[4] - 5.0).abs() < 1e-14);

    let mut rng = rng(1);
    let (std, aux) = MapKind::SkewNormal(3).random_point(&mut rng);
    let theta = MapKind::SkewNormal(3).forward(&std, &aux).unwrap();
    assert_eq!(&theta[..12], &std[..]);
    assert_eq!(&theta[12..], &aux[..]);
}

#[test]
fn pullback_examples() {
    let (gs, ga) = MapKind::NegBin.pullback(&[3.0, 0.5], &[], &[1.0, 0.0]).unwrap();
    assert_eq!(gs, vec![2.0, 12.0]);
    assert!(ga.is_empty());
    let fd = fd_vjp(|v| MapKind::NegBin.forward(v, &[]).unwrap(), &[3.0, 0.5], &[1.0, 0.0], 1e-6);
    assert!(max_rel(&gs, &fd, 1e-8) < 1e-8);

    let mut rng = rng(2);
    for map in [MapKind::ViNormalIdentity(2), MapKind::Canonical(Family::Gamma)] {
        let (std, aux) = map.random_point(&mut rng);
        let g = random_cotangent(&mut rng, &map.target());
        assert_eq!(map.pullback(&std, &aux, &g).unwrap().0, g);
    }
}

#[test]
fn corr_pullback_matches_finite_differences() {
    let mut rng = rng(3);
    let map = MapKind::GaussianCopula(3);
    for _ in 0..10 {
        let mut sigma = Vec::new();
        push_matrix(&random_spd(&mut rng, 3, 0.3), &mut sigma);
        let g = random_cotangent(&mut rng, &map.target());
        let (gs, _) = map.pullback(&sigma, &[], &g).unwrap();
        let fd = fd_vjp(|v| map.forward(v, &[]).unwrap(), &sigma, &g, 1e-6);
        assert!(vec_rel(&gs, &fd, 1e-8) < 1e-5, "{gs:?} vs {fd:?}");
        let m = DMatrix::from_row_slice(3, 3, &gs);
        assert!((&m - m.transpose()).amax() < 1e-15);
    }
}

#[test]
fn pullback_matches_finite_differences_for_every_map() {
    let mut rng = rng(4);
    for map in all_maps() {
        for _ in 0..10 {
            let (std, aux) = map.random_point(&mut rng);
            let g = random_cotangent(&mut rng, &map.target());
            let (gs, ga) = map.pullback(&std, &aux, &g).unwrap();
            // the standard-form weights live on the simplex, so they are held fixed
            // and checked as the pass-through they are
            let k = match &map {
                MapKind::NegBinMixture(k) | MapKind::SkewNormalMixture(k, _) => *k,
                _ => 0,
            };
            assert_eq!(&gs[..k], &g[..k]);
            let n = std.len();
            let joint = [std[k..].to_vec(), aux.clone()].concat();
            let eval = |v: &[f64]| {
                let s = [&std[..k], &v[..n - k]].concat();
                map.forward(&s, &v[n - k..]).unwrap()
            };
            let fd = fd_vjp(eval, &joint, &g, 1e-6);
            let got = [gs[k..].to_vec(), ga].concat();
            assert!(max_rel(&got, &fd, 1e-3) < 1e-4, "{map}: {got:?} vs {fd:?}");
        }
    }
}

#[test]
fn forward_lands_in_target_domain() {
    let mut rng = rng(5);
    for map in all_maps() {
        let target = map.target();
        for _ in 0..100 {
            let (std, aux) = map.random_point(&mut rng);
            let theta = map.forward(&std, &aux).unwrap();
            target.validate(&theta).unwrap_or_else(|e| panic!("{map}: {e}"));
        }
    }
}

#[test]
fn inverse_round_trips() {
    let mut rng = rng(6);
    for map in all_maps() {
        for _ in 0..10 {
            let theta = map.target().random_theta(&mut rng);
            let (std, aux) = map.inverse(&theta).unwrap();
            let back = map.forward(&std, &aux).unwrap();
            assert!(vec_rel(&back, &theta, 1.0) < 1e-13, "{map}");
        }
    }
}

#[test]
fn domain_check_examples() {
    let fam = Family::Gamma;
    let mean = |a: f64, b: f64| fam.mean_from_std(&standard::gamma(a, b)).unwrap();
    assert!(MapKind::NegBin.domain_check(&mean(2.0, 0.5)));
    assert!(!MapKind::NegBin.domain_check(&mean(2.0, 1.5)));
    // ψ(α) − ln β must stay below ln(α/β): Jensen
    assert!(!MapKind::NegBin.domain_check(&[2.0, 1.0]));

    let d = 2;
    let map = MapKind::SkewNormal(d);
    let mut mu = vec![1.0, 0.0];
    push_matrix(&DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]), &mut mu);
    assert!(map.domain_check(&mu));
    // μ₂ − μ₁μ₁ᵀ has a zero eigenvalue along the first axis
    mu[2] = 1.0;
    assert!(!map.domain_check(&mu));

    let mix = MapKind::NegBinMixture(2);
    let std = standard::mixture(&[0.3, 0.7], &[standard::gamma(2.0, 0.5), standard::gamma(1.0, 1.2)]);
    let m = mix.surrogate().mean_from_std(&std).unwrap();
    assert!(!mix.domain_check(&m));
    let std = standard::mixture(&[0.3, 0.7], &[standard::gamma(2.0, 0.5), standard::gamma(1.0, 0.2)]);
    let m = mix.surrogate().mean_from_std(&std).unwrap();
    assert!(mix.domain_check(&m));
}

#[test]
fn predicate_violations_are_domain_errors() {
    let err = MapKind::NegBin.forward(&[3.0, 1.0], &[]).unwrap_err();
    assert!(err.is_domain());
    let err = MapKind::NegBin.pullback(&[3.0, 1.5], &[], &[1.0, 1.0]).unwrap_err();
    assert!(err.is_domain());
    assert!(MapKind::TCopula(2).forward(&[1.0, 0.0, 0.0, 1.0], &[]).is_err());
    assert!(MapKind::TCopula(2).forward(&[1.0, 0.0, 0.0, 1.0], &[f64::NAN]).is_err());
}

#[test]
fn fused_route_matches_unfused() {
    let mut rng = rng(7);
    for map in all_maps() {
        let fam = map.surrogate();
        for _ in 0..10 {
            let (std, aux) = map.random_point(&mut rng);
            let g = random_cotangent(&mut rng, &map.target());
            for p in [Parameterization::Natural, Parameterization::Mean] {
                let v = match p {
                    Parameterization::Natural => fam.natural_from_std(&std).unwrap(),
                    Parameterization::Mean => fam.mean_from_std(&std).unwrap(),
                };
                let unfused_std = fam.std_from(&v, p).unwrap();
                let fused = map.forward_from(&v, p, &aux).unwrap();
                let unfused = map.forward(&unfused_std, &aux).unwrap();
                assert!(vec_rel(&fused, &unfused, 1.0) < 1e-12, "{map} {p:?}");

                let (gv, ga) = map.pullback_from(&v, p, &aux, &g).unwrap();
                let (gs, ga2) = map.pullback(&unfused_std, &aux, &g).unwrap();
                let gv2 = fam.std_from_vjp(&v, p, &gs).unwrap();
                assert!(vec_rel(&gv, &gv2, 1.0) < 1e-12, "{map} {p:?}");
                assert_eq!(ga, ga2);
            }
        }
    }
}

#[test]
fn chain_through_dual_parameters_matches_finite_differences() {
    let mut rng = rng(8);
    for map in all_maps() {
        let fam = map.surrogate();
        let target = map.target();
        let (std, aux) = map.random_point(&mut rng);
        let theta0 = map.forward(&std, &aux).unwrap();
        let data = target.sample(&theta0, 5, &mut rng).unwrap();
        let f = |theta: &[f64]| -> f64 { -data.iter().map(|x| target.log_density(theta, x).unwrap()).sum::<f64>() };
        let mut g = vec![0.0; target.dim()];
        for x in &data {
            let (_, gx) = target.log_density_grad(&theta0, x).unwrap();
            for (a, b) in g.iter_mut().zip(gx) {
                *a -= b;
            }
        }
        for p in [Parameterization::Natural, Parameterization::Mean] {
            let v = match p {
                Parameterization::Natural => fam.natural_from_std(&std).unwrap(),
                Parameterization::Mean => fam.mean_from_std(&std).unwrap(),
            };
            let (gv, ga) = map.pullback_from(&v, p, &aux, &g).unwrap();
            let n = v.len();
            let joint = [v.clone(), aux.clone()].concat();
            let fd = fd_grad(|w| f(&map.forward_from(&w[..n], p, &w[n..]).unwrap()), &joint, 1e-6);
            let got = [gv, ga].concat();
            assert!(max_rel(&got, &fd, 1e-2) < 1e-4, "{map} {p:?}: {got:?} vs {fd:?}");
        }
    }
}

#[test]
fn identifiers_are_stable() {
    for id in MAP_IDS {
        let map = MapKind::from_id(id, 2, 3).unwrap();
        assert_eq!(map.id(), id);
        assert_eq!(map.aux_dim(), match id {
            "skew-normal" => 3,
            "skew-normal-mixture" => 6,
            "t-copula" => 1,
            _ => 0,
        });
    }
    let err = MapKind::from_id("skew-t", 1, 1).unwrap_err();
    assert!(err.to_string().contains("skew-t"));
    assert!(MapKind::from_id("negbin-mixture", 0, 1).is_err());
}
