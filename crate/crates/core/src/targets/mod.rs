//! Target distributions: log-densities with analytic gradients in their
//! standard parameters, validity checks, and samplers.
//!
//! Parameter layouts (flat, matrices row-major):
//! - `negbin`: (r, s)
//! - `skew-normal(d)`: (ξ, Ω, η)
//! - `mixture(k, c)`: (π₁..πₖ, θ₁..θₖ), with the weights as free coordinates
//! - `gaussian-copula(d)`: R
//! - `t-copula(d)`: (R, ν)
//! - `ef(family)`: the family's standard form
//!
//! Matrix entries are read through symmetrization, so gradients are the
//! symmetric matrix gradient and agree with raw-entry finite differences.

pub mod copula;
pub mod free;
pub mod logreg;
pub mod negbin;
pub mod skewnormal;

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::expfam::Family;
use crate::numerics::{corr_from_cov, log_sum_exp, push_matrix, read_matrix, symmetrize, SpdMatrix};

pub use free::Block;
pub use logreg::LogRegModel;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum TargetKind {
    NegBin,
    SkewNormal(usize),
    Mixture(usize, Box<TargetKind>),
    GaussianCopula(usize),
    TCopula(usize),
    /// A member of an exponential family, parameterized by its standard form.
    ExpFamily(Family),
}

impl TargetKind {
    /// Mixture constructor; components must be negbin or skew-normal.
    pub fn mixture(k: usize, component: TargetKind) -> Result<TargetKind> {
        if k == 0 {
            return Err(Error::Config("a mixture needs at least one component".into()));
        }
        if !matches!(component, TargetKind::NegBin | TargetKind::SkewNormal(_)) {
            return Err(Error::Unsupported(format!("mixture of {component}")));
        }
        Ok(TargetKind::Mixture(k, Box::new(component)))
    }

    pub fn dim(&self) -> usize {
        match self {
            TargetKind::NegBin => 2,
            TargetKind::SkewNormal(d) => skewnormal::dim(*d),
            TargetKind::Mixture(k, c) => k + k * c.dim(),
            TargetKind::GaussianCopula(d) => d * d,
            TargetKind::TCopula(d) => d * d + 1,
            TargetKind::ExpFamily(f) => f.std_dim(),
        }
    }

    /// Length of one observation.
    pub fn obs_dim(&self) -> usize {
        match self {
            TargetKind::NegBin => 1,
            TargetKind::SkewNormal(d) | TargetKind::GaussianCopula(d) | TargetKind::TCopula(d) => *d,
            TargetKind::Mixture(_, c) => c.obs_dim(),
            TargetKind::ExpFamily(f) => f.obs_dim(),
        }
    }

    /// True when observations must be nonnegative integers.
    pub fn is_count(&self) -> bool {
        match self {
            TargetKind::NegBin => true,
            TargetKind::Mixture(_, c) => c.is_count(),
            _ => false,
        }
    }

    /// Parameter blocks, used for the unconstrained baseline coordinates.
    pub fn blocks(&self) -> Vec<Block> {
        match self {
            TargetKind::NegBin => vec![Block::Positive, Block::Unit],
            TargetKind::SkewNormal(d) => vec![Block::Real(*d), Block::Spd(*d), Block::Real(*d)],
            TargetKind::Mixture(k, c) => {
                let mut out = vec![Block::Simplex(*k)];
                for _ in 0..*k {
                    out.extend(c.blocks());
                }
                out
            }
            TargetKind::GaussianCopula(d) => vec![Block::Corr(*d)],
            TargetKind::TCopula(d) => vec![Block::Corr(*d), Block::Above2],
            TargetKind::ExpFamily(f) => family_blocks(f),
        }
    }

    /// Full validity check, including unit diagonals and simplex sums.
    pub fn validate(&self, theta: &[f64]) -> Result<()> {
        self.check_len(theta)?;
        match self {
            TargetKind::NegBin => negbin::validate(theta),
            TargetKind::SkewNormal(d) => SpdMatrix::new(read_matrix(&theta[*d..], *d)).map(|_| ()),
            TargetKind::Mixture(k, c) => {
                let pi = &theta[..*k];
                if pi.iter().any(|w| !(*w > 0.0)) || (pi.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return Err(Error::domain("mixture weights must lie in the open simplex"));
                }
                (0..*k).try_for_each(|i| c.validate(&theta[k + i * c.dim()..k + (i + 1) * c.dim()]))
            }
            TargetKind::GaussianCopula(d) | TargetKind::TCopula(d) => {
                let r = read_matrix(theta, *d);
                if !copula::has_unit_diagonal(&r) {
                    return Err(Error::domain("correlation matrix must have a unit diagonal"));
                }
                SpdMatrix::new(r)?;
                if matches!(self, TargetKind::TCopula(_)) && !(theta[d * d] > 2.0) {
                    return Err(Error::domain(format!("t copula needs nu > 2, got {}", theta[d * d])));
                }
                Ok(())
            }
            TargetKind::ExpFamily(f) => f.validate_std(theta),
        }
    }

    fn check_len(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.dim() {
            return Err(Error::shape(format!("{self}: expected {} parameters, got {}", self.dim(), theta.len())));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("{self} parameters")));
        }
        Ok(())
    }

    /// Precomputes parameter-only quantities for repeated density evaluation.
    /// Only checks what the density formula needs, so finite differences may
    /// step off unit diagonals or the simplex.
    pub fn prepare(&self, theta: &[f64]) -> Result<Prepared> {
        self.check_len(theta)?;
        Ok(match self {
            TargetKind::NegBin => {
                negbin::validate(theta)?;
                Prepared::NegBin([theta[0], theta[1]])
            }
            TargetKind::SkewNormal(d) => Prepared::SkewNormal(skewnormal::Prepared::new(*d, theta)?),
            TargetKind::Mixture(k, c) => {
                let pi = &theta[..*k];
                if pi.iter().any(|w| !(*w > 0.0)) {
                    return Err(Error::domain("mixture weights must be positive"));
                }
                let comps = (0..*k)
                    .map(|i| c.prepare(&theta[k + i * c.dim()..k + (i + 1) * c.dim()]))
                    .collect::<Result<_>>()?;
                Prepared::Mixture { log_w: pi.iter().map(|w| w.ln()).collect(), weights: pi.to_vec(), comps, comp_dim: c.dim() }
            }
            TargetKind::GaussianCopula(d) => Prepared::Gaussian(copula::Gaussian::new(*d, theta)?),
            TargetKind::TCopula(d) => Prepared::StudentT(copula::StudentT::new(*d, theta)?),
            TargetKind::ExpFamily(f) => {
                let eta = f.natural_from_std(theta)?;
                Prepared::ExpFamily {
                    family: f.clone(),
                    std: theta.to_vec(),
                    mu: f.to_mean(&eta)?,
                    a: f.log_partition(&eta)?,
                    eta,
                }
            }
        })
    }

    pub fn log_density(&self, theta: &[f64], x: &[f64]) -> Result<f64> {
        self.prepare(theta)?.eval(x, 0.0, None)
    }

    /// (log q_θ(x), ∇θ log q_θ(x)).
    pub fn log_density_grad(&self, theta: &[f64], x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let prep = self.prepare(theta)?;
        let mut g = vec![0.0; self.dim()];
        let lp = prep.eval(x, 1.0, Some(&mut g))?;
        Ok((lp, prep.finish(g)?))
    }

    /// Draws `count` observations deterministically from `rng`.
    pub fn sample<R: Rng + ?Sized>(&self, theta: &[f64], count: usize, rng: &mut R) -> Result<Vec<Vec<f64>>> {
        self.validate(theta)?;
        let prep = self.prepare(theta)?;
        (0..count).map(|_| prep.sample(rng)).collect()
    }
}

impl TargetKind {
    /// A random well-conditioned parameter vector, for tests and gradient checks.
    pub fn random_theta<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let spd = |rng: &mut R, d: usize| {
            let m = nalgebra::DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
            m.transpose() * &m + nalgebra::DMatrix::identity(d, d) * 0.5
        };
        match self {
            TargetKind::NegBin => vec![rng.random_range(0.5..10.0), rng.random_range(0.1..0.9)],
            TargetKind::SkewNormal(d) => {
                let mut out: Vec<f64> = (0..*d).map(|_| rng.random_range(-1.0..1.0)).collect();
                push_matrix(&spd(rng, *d), &mut out);
                out.extend((0..*d).map(|_| rng.random_range(-2.0..2.0)));
                out
            }
            TargetKind::Mixture(k, c) => {
                let raw: Vec<f64> = (0..*k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut out: Vec<f64> = raw.iter().map(|w| w / total).collect();
                let head: f64 = out[..k - 1].iter().sum();
                out[k - 1] = 1.0 - head;
                for _ in 0..*k {
                    out.extend(c.random_theta(rng));
                }
                out
            }
            TargetKind::GaussianCopula(d) | TargetKind::TCopula(d) => {
                let mut out = Vec::new();
                push_matrix(&corr_from_cov(&spd(rng, *d)).expect("SPD has a positive diagonal"), &mut out);
                if matches!(self, TargetKind::TCopula(_)) {
                    out.push(rng.random_range(3.0..30.0));
                }
                out
            }
            TargetKind::ExpFamily(f) => f.random_std(rng),
        }
    }
}

fn family_blocks(f: &Family) -> Vec<Block> {
    match f {
        Family::Gamma => vec![Block::Positive, Block::Positive],
        Family::Normal(d) => vec![Block::Real(*d), Block::Spd(*d)],
        Family::ZeroMeanNormal(d) => vec![Block::Spd(*d)],
        Family::Mixture(k, c) => {
            let mut out = vec![Block::Simplex(*k)];
            for _ in 0..*k {
                out.extend(family_blocks(c));
            }
            out
        }
    }
}

/// A target with parameter-only work done once.
pub enum Prepared {
    NegBin([f64; 2]),
    SkewNormal(skewnormal::Prepared),
    Mixture { log_w: Vec<f64>, weights: Vec<f64>, comps: Vec<Prepared>, comp_dim: usize },
    Gaussian(copula::Gaussian),
    StudentT(copula::StudentT),
    ExpFamily { family: Family, std: Vec<f64>, eta: Vec<f64>, mu: Vec<f64>, a: f64 },
}

impl Prepared {
    /// Log density at `x`. When `grad` is given, adds `weight`·(gradient) into
    /// it in an internal layout; call [`Prepared::finish`] once at the end.
    pub fn eval(&self, x: &[f64], weight: f64, grad: Option<&mut [f64]>) -> Result<f64> {
        match self {
            Prepared::NegBin(theta) => {
                let (lp, g) = negbin::logpmf_grad(theta, x[0])?;
                if let Some(acc) = grad {
                    acc[0] += weight * g[0];
                    acc[1] += weight * g[1];
                }
                Ok(lp)
            }
            Prepared::SkewNormal(p) => Ok(p.eval(x, weight, grad)),
            Prepared::Gaussian(p) => p.eval(x, weight, grad),
            Prepared::StudentT(p) => p.eval(x, weight, grad),
            Prepared::ExpFamily { family, eta, mu, a, .. } => {
                let t = family.sufficient_stats(x)?;
                let lp = family.log_base_measure(x)? + t.iter().zip(eta).map(|(p, q)| p * q).sum::<f64>() - a;
                if let Some(acc) = grad {
                    for ((g, ti), mi) in acc.iter_mut().zip(&t).zip(mu) {
                        *g += weight * (ti - mi);
                    }
                }
                Ok(lp)
            }
            Prepared::Mixture { log_w, weights, comps, comp_dim } => {
                let k = comps.len();
                let mut terms = Vec::with_capacity(k);
                let mut local: Vec<Vec<f64>> = Vec::new();
                for (i, c) in comps.iter().enumerate() {
                    if grad.is_some() {
                        let mut g = vec![0.0; *comp_dim];
                        terms.push(log_w[i] + c.eval(x, 1.0, Some(&mut g))?);
                        local.push(g);
                    } else {
                        terms.push(log_w[i] + c.eval(x, 1.0, None)?);
                    }
                }
                let lp = log_sum_exp(&terms);
                if let Some(acc) = grad {
                    for i in 0..k {
                        let resp = (terms[i] - lp).exp();
                        acc[i] += weight * resp / weights[i];
                        let off = k + i * comp_dim;
                        for (a, g) in acc[off..off + comp_dim].iter_mut().zip(&local[i]) {
                            *a += weight * resp * g;
                        }
                    }
                }
                Ok(lp)
            }
        }
    }

    /// Maps an accumulated internal gradient to the θ layout.
    pub fn finish(&self, grad: Vec<f64>) -> Result<Vec<f64>> {
        match self {
            Prepared::ExpFamily { family, std, .. } => family.natural_from_std_vjp(std, &grad[..family.param_dim()]),
            Prepared::Mixture { comps, comp_dim, .. } => {
                let k = comps.len();
                let mut out = grad[..k].to_vec();
                for (i, c) in comps.iter().enumerate() {
                    out.extend(c.finish(grad[k + i * comp_dim..k + (i + 1) * comp_dim].to_vec())?);
                }
                Ok(out)
            }
            _ => Ok(grad),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        match self {
            Prepared::NegBin(theta) => Ok(vec![negbin::sample(theta, rng)?]),
            Prepared::SkewNormal(p) => p.sample(rng),
            Prepared::Gaussian(p) => Ok(p.sample(rng)),
            Prepared::StudentT(p) => p.sample(rng),
            Prepared::ExpFamily { family, std, .. } => family.sample(std, rng),
            Prepared::Mixture { weights, comps, .. } => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut z = comps.len() - 1;
                for (i, w) in weights.iter().enumerate() {
                    acc += w;
                    if u < acc {
                        z = i;
                        break;
                    }
                }
                comps[z].sample(rng)
            }
        }
    }
}

/// Symmetrized d×d block of a flat parameter vector.
pub fn matrix_block(theta: &[f64], offset: usize, d: usize) -> nalgebra::DMatrix<f64> {
    symmetrize(&read_matrix(&theta[offset..], d))
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TargetKind::NegBin => write!(f, "negbin"),
            TargetKind::SkewNormal(d) => write!(f, "skew-normal({d})"),
            TargetKind::Mixture(k, c) => write!(f, "mixture({k}, {c})"),
            TargetKind::GaussianCopula(d) => write!(f, "gaussian-copula({d})"),
            TargetKind::TCopula(d) => write!(f, "t-copula({d})"),
            TargetKind::ExpFamily(fam) => write!(f, "ef({fam})"),
        }
    }
}

impl FromStr for TargetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown target '{s}'"));
        if s == "negbin" {
            return Ok(TargetKind::NegBin);
        }
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let dim = |t: &str| t.trim().parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(bad);
        match head.trim() {
            "skew-normal" => Ok(TargetKind::SkewNormal(dim(inner)?)),
            "gaussian-copula" => Ok(TargetKind::GaussianCopula(dim(inner)?)),
            "t-copula" => Ok(TargetKind::TCopula(dim(inner)?)),
            "ef" => Ok(TargetKind::ExpFamily(inner.parse()?)),
            "mixture" => {
                let (k, comp) = inner.split_once(',').ok_or_else(bad)?;
                TargetKind::mixture(dim(k)?, comp.parse()?)
            }
            _ => Err(bad()),
        }
    }
}
