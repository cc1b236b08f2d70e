use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::numerics::{read_matrix, push_matrix, symmetrize, SpdMatrix, LN_2PI};
use crate::optim::Objective;
use crate::targets::{LogRegModel, TargetKind};

/// How the Monte Carlo noise changes between iterations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SeedPolicy {
    /// Fresh noise every iteration, derived from the base seed.
    #[default]
    PerIteration,
    /// The same noise on every call.
    Fixed,
}

/// Negative ELBO of a full-covariance normal q = N(m, Σ) against a Bayesian
/// logistic-regression posterior, estimated with reparameterized samples
/// x = m + Lε, LLᵀ = Σ. θ is the normal's standard form (m, Σ).
#[derive(Debug, Clone)]
pub struct ViObjective {
    model: LogRegModel,
    samples: usize,
    base_seed: u64,
    policy: SeedPolicy,
    seed: u64,
    target: TargetKind,
}

pub(crate) fn mix_seed(seed: u64, stream: u64) -> u64 {
    // splitmix64 finalizer over the pair
    let mut z = seed ^ stream.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ViObjective {
    pub fn new(model: LogRegModel, samples: usize, seed: u64, policy: SeedPolicy) -> Result<Self> {
        if samples == 0 {
            return Err(Error::Config("VI needs at least one Monte Carlo sample".into()));
        }
        let d = model.dim();
        Ok(ViObjective { model, samples, base_seed: seed, policy, seed: mix_seed(seed, 0), target: TargetKind::ExpFamily(Family::Normal(d)) })
    }

    pub fn model(&self) -> &LogRegModel {
        &self.model
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    /// Per-sample (value, gradient) terms whose average is [`Objective::value_grad`].
    pub fn terms(&self, theta: &[f64], seed: u64, samples: usize, with_grad: bool) -> Result<Vec<(f64, Vec<f64>)>> {
        let d = self.model.dim();
        if theta.len() != d + d * d {
            return Err(Error::shape(format!("VI parameters have length {}, expected {}", theta.len(), d + d * d)));
        }
        let m = DVector::from_column_slice(&theta[..d]);
        let sigma = SpdMatrix::from_symmetrized(&read_matrix(&theta[d..], d))?;
        let l = sigma.chol().matrix().clone();
        let half_logdet = 0.5 * sigma.logdet();
        let sigma_inv = if with_grad { sigma.inverse() } else { DMatrix::zeros(0, 0) };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(samples);
        for _ in 0..samples {
            let eps = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let x = &m + &l * &eps;
            let (lp, g) = self.model.log_joint_grad(x.as_slice())?;
            let log_q = -0.5 * d as f64 * LN_2PI - half_logdet - 0.5 * eps.norm_squared();
            let value = log_q - lp;
            if !with_grad {
                out.push((value, Vec::new()));
                continue;
            }
            let g = DVector::from_vec(g);
            let mut grad: Vec<f64> = (-&g).iter().copied().collect();
            // ∂/∂L of −log p(m + Lε) is −g εᵀ restricted to the lower triangle
            let l_bar = DMatrix::from_fn(d, d, |i, j| if j <= i { -g[i] * eps[j] } else { 0.0 });
            let sigma_bar = cholesky_pullback(&l, &l_bar) - &sigma_inv * 0.5;
            push_matrix(&sigma_bar, &mut grad);
            out.push((value, grad));
        }
        Ok(out)
    }

    /// Monte Carlo mean and its standard error with `samples` draws from `seed`.
    pub fn estimate(&self, theta: &[f64], seed: u64, samples: usize) -> Result<(f64, f64)> {
        let t = self.terms(theta, seed, samples, false)?;
        let n = t.len() as f64;
        let mean = t.iter().map(|(v, _)| v).sum::<f64>() / n;
        let var = t.iter().map(|(v, _)| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
        Ok((mean, (var / n).sqrt()))
    }

    pub fn current_seed(&self) -> u64 {
        self.seed
    }
}

/// Symmetric Σ̄ from L̄ for Σ = LLᵀ: L⁻ᵀ Φ(LᵀL̄) L⁻¹, symmetrized, where Φ keeps
/// the lower triangle and halves the diagonal.
fn cholesky_pullback(l: &DMatrix<f64>, l_bar: &DMatrix<f64>) -> DMatrix<f64> {
    let d = l.nrows();
    let p = l.transpose() * l_bar;
    let phi = DMatrix::from_fn(d, d, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Greater => p[(i, j)],
        std::cmp::Ordering::Equal => 0.5 * p[(i, j)],
        std::cmp::Ordering::Less => 0.0,
    });
    let lt = l.transpose();
    // L⁻ᵀ Φ L⁻¹ via two triangular solves
    let a = lt.solve_upper_triangular(&phi).expect("Cholesky factor has a positive diagonal");
    let s = lt.solve_upper_triangular(&a.transpose()).expect("Cholesky factor has a positive diagonal").transpose();
    symmetrize(&s)
}

impl Objective for ViObjective {
    fn dim(&self) -> usize {
        let d = self.model.dim();
        d + d * d
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let t = self.terms(theta, self.seed, self.samples, false)?;
        Ok(t.iter().map(|(v, _)| v).sum::<f64>() / self.samples as f64)
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let t = self.terms(theta, self.seed, self.samples, true)?;
        let n = self.samples as f64;
        let mut g = vec![0.0; self.dim()];
        let mut f = 0.0;
        for (v, gi) in &t {
            f += v / n;
            for (a, b) in g.iter_mut().zip(gi) {
                *a += b / n;
            }
        }
        Ok((f, g))
    }

    fn is_stochastic(&self) -> bool {
        true
    }

    fn reseed(&mut self, iteration: usize) {
        if self.policy == SeedPolicy::PerIteration {
            self.seed = mix_seed(self.base_seed, iteration as u64);
        }
    }

    fn target(&self) -> Option<&TargetKind> {
        Some(&self.target)
    }
}
