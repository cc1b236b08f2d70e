use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::numerics::push_matrix;
use crate::targets::TargetKind;

use super::Dataset;

/// A generated dataset with the parameters that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub target: TargetKind,
    pub theta: Vec<f64>,
    pub data: Dataset,
}

/// Draws `n` observations from `target` at `theta`.
pub fn generate(target: &TargetKind, theta: &[f64], n: usize, seed: u64) -> Result<Synthetic> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = target.sample(theta, n, &mut rng)?;
    let cols = target.obs_dim();
    let data = Dataset::new(n, cols, rows.concat(), target.is_count())?;
    Ok(Synthetic { target: target.clone(), theta: theta.to_vec(), data })
}

/// Skew-normal parameters for synthetic data: ξ and the slant from N(0, I),
/// Ω = d⁻¹WᵀW + 10⁻⁴I with standard-normal W.
pub fn skew_normal_params<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    let mut out: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let w = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    let omega = w.transpose() * &w / d as f64 + DMatrix::identity(d, d) * 1e-4;
    push_matrix(&omega, &mut out);
    out.extend((0..d).map(|_| -> f64 { StandardNormal.sample(rng) }));
    out
}
