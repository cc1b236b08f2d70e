use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::numerics::solve_spd;
use crate::targets::free::{self, Block};
use crate::targets::TargetKind;

use super::{choose_step, norm, Evaluation, Objective, Schedule, StepOutcome, Stepper};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig::with_lr(1e-3)
    }
}

/// Adam first and second moments with the step count for bias correction.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct AdamMoments {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl AdamMoments {
    pub(crate) fn new(n: usize) -> Self {
        AdamMoments { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    /// Advances the moments with gradient `g` and returns the updated point.
    pub(crate) fn update(&mut self, cfg: &AdamConfig, x: &[f64], g: &[f64]) -> Vec<f64> {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        let mut out = Vec::with_capacity(x.len());
        for i in 0..x.len() {
            self.m[i] = cfg.beta1 * self.m[i] + (1.0 - cfg.beta1) * g[i];
            self.v[i] = cfg.beta2 * self.v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            out.push(x[i] - cfg.lr * mh / (vh.sqrt() + cfg.eps));
        }
        out
    }
}

fn evaluate_free(blocks: &[Block], z: &[f64], obj: &dyn Objective) -> Result<(f64, Vec<f64>)> {
    let theta = free::from_free(blocks, z)?;
    let (f, g) = obj.value_grad(&theta)?;
    if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("objective or gradient at the current point".into()));
    }
    Ok((f, free::pullback(blocks, z, &g)?))
}

fn value_free(blocks: &[Block], z: &[f64], obj: &dyn Objective) -> Result<f64> {
    obj.value(&free::from_free(blocks, z)?)
}

/// Gradient descent in unconstrained coordinates.
pub struct Gd {
    blocks: Vec<Block>,
    z: Vec<f64>,
    schedule: Schedule,
    last_step: f64,
    cached: Option<(f64, Vec<f64>)>,
}

impl Gd {
    pub fn new(blocks: Vec<Block>, theta: &[f64], schedule: Schedule) -> Result<Self> {
        let z = free::to_free(&blocks, theta)?;
        Ok(Gd { blocks, z, schedule, last_step: 0.0, cached: None })
    }

    pub fn free_point(&self) -> &[f64] {
        &self.z
    }
}

impl Stepper for Gd {
    fn name(&self) -> &'static str {
        "gd"
    }

    fn evaluate(&mut self, obj: &dyn Objective) -> Result<Evaluation> {
        let (f, g) = evaluate_free(&self.blocks, &self.z, obj)?;
        let grad_norm = norm(&g);
        self.cached = Some((f, g));
        Ok(Evaluation { objective: f, grad_norm })
    }

    fn step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        self.schedule.check(obj)?;
        let (f0, g) = self.cached.take().ok_or_else(|| Error::Config("step called before evaluate".into()))?;
        let cand = |eps: f64| -> Vec<f64> { self.z.iter().zip(&g).map(|(z, g)| z - eps * g).collect() };
        let phi = |eps: f64| if eps == 0.0 { Ok(f0) } else { value_free(&self.blocks, &cand(eps), obj) };
        let feasible = |eps: f64| cand(eps).iter().all(|v| v.is_finite());
        let out = choose_step(&self.schedule, self.last_step, phi, feasible, !obj.is_stochastic())?;
        self.z = cand(out.step_size);
        if out.step_size > 0.0 {
            self.last_step = out.step_size;
        }
        Ok(out)
    }

    fn theta(&self) -> Result<Vec<f64>> {
        free::from_free(&self.blocks, &self.z)
    }
}

/// Adam in unconstrained coordinates.
pub struct Adam {
    blocks: Vec<Block>,
    z: Vec<f64>,
    cfg: AdamConfig,
    moments: AdamMoments,
    cached: Option<Vec<f64>>,
}

impl Adam {
    pub fn new(blocks: Vec<Block>, theta: &[f64], cfg: AdamConfig) -> Result<Self> {
        let z = free::to_free(&blocks, theta)?;
        let moments = AdamMoments::new(z.len());
        Ok(Adam { blocks, z, cfg, moments, cached: None })
    }
}

impl Stepper for Adam {
    fn name(&self) -> &'static str {
        "adam"
    }

    fn evaluate(&mut self, obj: &dyn Objective) -> Result<Evaluation> {
        let (f, g) = evaluate_free(&self.blocks, &self.z, obj)?;
        let grad_norm = norm(&g);
        self.cached = Some(g);
        Ok(Evaluation { objective: f, grad_norm })
    }

    fn step(&mut self, _obj: &dyn Objective) -> Result<StepOutcome> {
        let g = self.cached.take().ok_or_else(|| Error::Config("step called before evaluate".into()))?;
        let next = self.moments.update(&self.cfg, &self.z, &g);
        if next.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("adam update".into()));
        }
        self.z = next;
        Ok(StepOutcome { step_size: self.cfg.lr, backtracks: 0 })
    }

    fn theta(&self) -> Result<Vec<f64>> {
        free::from_free(&self.blocks, &self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NgdExactConfig {
    pub samples: usize,
    /// Ridge as a multiple of trace(F̂)/dim.
    pub ridge: f64,
    pub seed: u64,
}

impl Default for NgdExactConfig {
    fn default() -> Self {
        NgdExactConfig { samples: 10_000, ridge: 1e-8, seed: 0 }
    }
}

/// Largest minimal parameter dimension the exact-Fisher baseline accepts.
pub const NGD_EXACT_MAX_DIM: usize = 50;

/// NGD on the target itself, with the Fisher estimated by Monte Carlo from
/// the target's sampler.
///
/// Raw θ repeats symmetric matrix entries and carries fixed unit diagonals and
/// a dependent last weight, so the Fisher is formed in minimal coordinates:
/// one entry per free matrix element, k − 1 weights.
pub struct NgdExact {
    target: TargetKind,
    blocks: Vec<Block>,
    theta: Vec<f64>,
    schedule: Schedule,
    cfg: NgdExactConfig,
    iteration: u64,
    last_step: f64,
    cached: Option<(f64, Vec<f64>)>,
}

impl NgdExact {
    pub fn new(target: TargetKind, theta: &[f64], schedule: Schedule, cfg: NgdExactConfig) -> Result<Self> {
        target.validate(theta)?;
        let blocks = target.blocks();
        let dim = free::tangent_dim(&blocks);
        if dim > NGD_EXACT_MAX_DIM {
            return Err(Error::Unsupported(format!("exact-Fisher NGD needs at most {NGD_EXACT_MAX_DIM} parameters, {target} has {dim}")));
        }
        if cfg.samples == 0 {
            return Err(Error::Config("exact-Fisher NGD needs at least one sample".into()));
        }
        Ok(NgdExact { target, blocks, theta: theta.to_vec(), schedule, cfg, iteration: 0, last_step: 0.0, cached: None })
    }

    /// F̂⁻¹∇f at the current point, in raw θ layout, together with f.
    pub fn direction(&self, obj: &dyn Objective) -> Result<(f64, Vec<f64>)> {
        let (f, g) = obj.value_grad(&self.theta)?;
        let gp = free::tangent_project(&self.blocks, &g);
        let fisher = self.fisher()?;
        let d = solve_spd(&fisher, &DVector::from_vec(gp)).map_err(|_| Error::SingularSystem("ridged Fisher estimate".into()))?;
        Ok((f, free::tangent_lift(&self.blocks, d.as_slice())))
    }

    /// Monte Carlo Fisher in minimal coordinates, ridge included.
    pub fn fisher(&self) -> Result<DMatrix<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed ^ self.iteration.wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let prepared = self.target.prepare(&self.theta)?;
        let n = free::tangent_dim(&self.blocks);
        let mut f = DMatrix::zeros(n, n);
        let mut raw = vec![0.0; self.target.dim()];
        for _ in 0..self.cfg.samples {
            let x = prepared.sample(&mut rng)?;
            raw.iter_mut().for_each(|v| *v = 0.0);
            prepared.eval(&x, 1.0, Some(&mut raw))?;
            let score = prepared.finish(raw.clone())?;
            let s = DVector::from_vec(free::tangent_project(&self.blocks, &score));
            f.ger(1.0, &s, &s, 1.0);
        }
        f /= self.cfg.samples as f64;
        let tau = self.cfg.ridge * f.trace() / n as f64;
        for i in 0..n {
            f[(i, i)] += tau;
        }
        Ok(f)
    }
}

impl Stepper for NgdExact {
    fn name(&self) -> &'static str {
        "ngd-exact"
    }

    fn evaluate(&mut self, obj: &dyn Objective) -> Result<Evaluation> {
        let (f, d) = self.direction(obj)?;
        if !f.is_finite() || d.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective or natural gradient".into()));
        }
        let (_, g) = obj.value_grad(&self.theta)?;
        let grad_norm = norm(&free::tangent_project(&self.blocks, &g));
        self.cached = Some((f, d));
        Ok(Evaluation { objective: f, grad_norm })
    }

    fn step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        self.schedule.check(obj)?;
        let (f0, d) = self.cached.take().ok_or_else(|| Error::Config("step called before evaluate".into()))?;
        let cand = |eps: f64| -> Vec<f64> { self.theta.iter().zip(&d).map(|(t, d)| t - eps * d).collect() };
        let phi = |eps: f64| if eps == 0.0 { Ok(f0) } else { obj.value(&cand(eps)) };
        let feasible = |eps: f64| self.target.validate(&cand(eps)).is_ok();
        let out = choose_step(&self.schedule, self.last_step, phi, feasible, !obj.is_stochastic())?;
        self.theta = cand(out.step_size);
        self.iteration += 1;
        if out.step_size > 0.0 {
            self.last_step = out.step_size;
        }
        Ok(out)
    }

    fn theta(&self) -> Result<Vec<f64>> {
        Ok(self.theta.clone())
    }
}
