//! Starting points. Every optimizer in a comparison starts from the same θ₀.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::numerics::{corr_from_cov, push_matrix};
use crate::targets::TargetKind;

use super::Dataset;

fn small_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    0.01 * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn equal_weights(k: usize) -> Vec<f64> {
    let mut w = vec![1.0 / k as f64; k];
    w[k - 1] = 1.0 - w[..k - 1].iter().sum::<f64>();
    w
}

/// Draws θ₀ for `target`. Mixture starts read the largest observation from `data`.
pub fn initial_theta<R: Rng + ?Sized>(target: &TargetKind, data: Option<&Dataset>, rng: &mut R) -> Result<Vec<f64>> {
    Ok(match target {
        TargetKind::NegBin => {
            let s = rng.random_range(0.05..0.95);
            let r = Gamma::new(6.25, 1.0 / 1.25).expect("valid gamma").sample(rng);
            vec![r, s]
        }
        TargetKind::SkewNormal(d) => skew_normal_start(*d, rng),
        TargetKind::Mixture(k, comp) => {
            let mut out = equal_weights(*k);
            match comp.as_ref() {
                TargetKind::NegBin => {
                    let x_max = data
                        .map(Dataset::max)
                        .filter(|m| *m > 0.0)
                        .ok_or_else(|| Error::Config("negbin mixture initialization needs data with a positive maximum".into()))?;
                    for _ in 0..*k {
                        let m = rng.random_range(0.1 * x_max..0.9 * x_max);
                        let inv_o = rng.random_range(0.001..0.02);
                        // mean m and variance m·o: s = 1/o, r = m s/(1 − s)
                        let s = inv_o;
                        out.extend([m * s / (1.0 - s), s]);
                    }
                }
                TargetKind::SkewNormal(d) => {
                    for _ in 0..*k {
                        out.extend(skew_normal_start(*d, rng));
                    }
                }
                other => return Err(Error::Unsupported(format!("mixture of {other}"))),
            }
            out
        }
        TargetKind::GaussianCopula(d) => copula_start(*d, rng),
        TargetKind::TCopula(d) => {
            let mut out = copula_start(*d, rng);
            out.push(50.0);
            out
        }
        TargetKind::ExpFamily(Family::Normal(d)) => {
            let mut out: Vec<f64> = (0..*d).map(|_| small_normal(rng)).collect();
            push_matrix(&DMatrix::identity(*d, *d), &mut out);
            out
        }
        TargetKind::ExpFamily(f) => f.random_std(rng),
    })
}

fn skew_normal_start<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut out: Vec<f64> = (0..d).map(|_| small_normal(rng)).collect();
    push_matrix(&DMatrix::identity(d, d), &mut out);
    out.extend((0..d).map(|_| small_normal(rng)));
    out
}

fn copula_start<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let w = DMatrix::from_fn(d, d, |_, _| small_normal(rng));
    let r = corr_from_cov(&(DMatrix::identity(d, d) + w.transpose() * &w)).expect("I + WᵀW is positive definite");
    let mut out = Vec::new();
    push_matrix(&r, &mut out);
    out
}
