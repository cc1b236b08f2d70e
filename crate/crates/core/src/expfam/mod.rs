//! Exponential families: parameter domains, mean/natural/standard conversions
//! and their cotangent pullbacks, log-partitions and KL divergences.
//!
//! Every parameter vector is flat. The dual pullbacks are built from four
//! primitive conversions per family (standard to and from natural and mean),
//! which lets the optimizer chain map pullbacks directly into either
//! parameterization without forming a Fisher matrix.

mod gamma;
mod mixture;
mod normal;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{push_matrix, read_matrix, SpdMatrix};

pub use gamma::{hessian as gamma_hessian, invert_shape as gamma_invert_shape};

use mixture::Mixture;
use normal::Layout;

/// An exponential family and its fixed sufficient-statistic layout.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Family {
    /// t(x) = (x, log x); η = (−β, α).
    Gamma,
    /// t(x) = (x, xxᵀ); η = (Σ⁻¹m, −½Σ⁻¹).
    Normal(usize),
    /// t(x) = xxᵀ; η = −½Σ⁻¹.
    ZeroMeanNormal(usize),
    /// Joint over (z, x); see the mixture submodule for the layout.
    Mixture(usize, Box<Family>),
}

/// Which parameterization a vector lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Parameterization {
    Natural,
    Mean,
}

impl Family {
    /// Mixture constructor that rejects k = 0 and nested mixtures.
    pub fn mixture(k: usize, component: Family) -> Result<Family> {
        if k == 0 {
            return Err(Error::Config("a mixture needs at least one component".into()));
        }
        if matches!(component, Family::Mixture(..)) {
            return Err(Error::Unsupported("mixtures of mixtures".into()));
        }
        Ok(Family::Mixture(k, Box::new(component)))
    }

    fn layout(&self) -> Option<Layout> {
        match *self {
            Family::Normal(d) => Some(Layout { d, centered: false }),
            Family::ZeroMeanNormal(d) => Some(Layout { d, centered: true }),
            _ => None,
        }
    }

    fn as_mixture(&self) -> Option<Mixture<'_>> {
        match self {
            Family::Mixture(k, comp) => Some(Mixture { k: *k, comp }),
            _ => None,
        }
    }

    /// Length of natural and mean vectors (and of t(x)).
    pub fn param_dim(&self) -> usize {
        match self {
            Family::Gamma => 2,
            Family::Normal(d) => d + d * d,
            Family::ZeroMeanNormal(d) => d * d,
            Family::Mixture(k, c) => k - 1 + k * c.param_dim(),
        }
    }

    /// Length of the standard-form vector.
    pub fn std_dim(&self) -> usize {
        match self {
            Family::Mixture(k, c) => k + k * c.std_dim(),
            _ => self.param_dim(),
        }
    }

    /// Length of one observation. Mixture observations carry the label first.
    pub fn obs_dim(&self) -> usize {
        match self {
            Family::Gamma => 1,
            Family::Normal(d) | Family::ZeroMeanNormal(d) => *d,
            Family::Mixture(_, c) => 1 + c.obs_dim(),
        }
    }

    fn check_len(&self, v: &[f64], expected: usize, what: &str) -> Result<()> {
        if v.len() != expected {
            return Err(Error::shape(format!("{self}: {what} has length {}, expected {expected}", v.len())));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err(Error::domain(format!("{self}: {what} entry {i} is not finite")));
        }
        Ok(())
    }

    pub fn validate_natural(&self, eta: &[f64]) -> Result<()> {
        self.check_len(eta, self.param_dim(), "natural vector")?;
        match self {
            Family::Gamma => gamma::validate_natural(eta),
            Family::Mixture(..) => self.as_mixture().unwrap().validate_natural(eta),
            _ => self.layout().unwrap().validate_natural(eta),
        }
    }

    pub fn validate_mean(&self, mu: &[f64]) -> Result<()> {
        self.check_len(mu, self.param_dim(), "mean vector")?;
        match self {
            Family::Gamma => gamma::validate_mean(mu),
            Family::Mixture(..) => self.as_mixture().unwrap().validate_mean(mu),
            _ => self.layout().unwrap().validate_mean(mu),
        }
    }

    pub fn validate_std(&self, std: &[f64]) -> Result<()> {
        self.check_len(std, self.std_dim(), "standard vector")?;
        match self {
            Family::Gamma => gamma::validate_std(std),
            Family::Mixture(..) => self.as_mixture().unwrap().validate_std(std),
            _ => self.layout().unwrap().validate_std(std),
        }
    }

    pub fn log_partition(&self, eta: &[f64]) -> Result<f64> {
        self.check_len(eta, self.param_dim(), "natural vector")?;
        match self {
            Family::Gamma => gamma::log_partition(eta),
            Family::Mixture(..) => self.as_mixture().unwrap().log_partition(eta),
            _ => self.layout().unwrap().log_partition(eta),
        }
    }

    pub fn std_from_natural(&self, eta: &[f64]) -> Result<Vec<f64>> {
        self.check_len(eta, self.param_dim(), "natural vector")?;
        match self {
            Family::Gamma => gamma::std_from_natural(eta),
            Family::Mixture(..) => self.as_mixture().unwrap().std_from_natural(eta),
            _ => self.layout().unwrap().std_from_natural(eta),
        }
    }

    /// Pulls a standard-form cotangent back to natural coordinates.
    pub fn std_from_natural_vjp(&self, eta: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(eta, self.param_dim(), "natural vector")?;
        self.check_len(g, self.std_dim(), "standard cotangent")?;
        match self {
            Family::Gamma => gamma::std_from_natural_vjp(eta, g),
            Family::Mixture(..) => self.as_mixture().unwrap().std_from_natural_vjp(eta, g),
            _ => self.layout().unwrap().std_from_natural_vjp(eta, g),
        }
    }

    pub fn natural_from_std(&self, std: &[f64]) -> Result<Vec<f64>> {
        self.check_len(std, self.std_dim(), "standard vector")?;
        match self {
            Family::Gamma => gamma::natural_from_std(std),
            Family::Mixture(..) => self.as_mixture().unwrap().natural_from_std(std),
            _ => self.layout().unwrap().natural_from_std(std),
        }
    }

    pub fn natural_from_std_vjp(&self, std: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(std, self.std_dim(), "standard vector")?;
        self.check_len(g, self.param_dim(), "natural cotangent")?;
        match self {
            Family::Gamma => gamma::natural_from_std_vjp(std, g),
            Family::Mixture(..) => self.as_mixture().unwrap().natural_from_std_vjp(std, g),
            _ => self.layout().unwrap().natural_from_std_vjp(std, g),
        }
    }

    pub fn mean_from_std(&self, std: &[f64]) -> Result<Vec<f64>> {
        self.check_len(std, self.std_dim(), "standard vector")?;
        match self {
            Family::Gamma => gamma::mean_from_std(std),
            Family::Mixture(..) => self.as_mixture().unwrap().mean_from_std(std),
            _ => self.layout().unwrap().mean_from_std(std),
        }
    }

    pub fn mean_from_std_vjp(&self, std: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.check_len(std, self.std_dim(), "standard vector")?;
        self.check_len(c, self.param_dim(), "mean cotangent")?;
        match self {
            Family::Gamma => gamma::mean_from_std_vjp(std, c),
            Family::Mixture(..) => self.as_mixture().unwrap().mean_from_std_vjp(std, c),
            _ => self.layout().unwrap().mean_from_std_vjp(std, c),
        }
    }

    pub fn std_from_mean(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.check_len(mu, self.param_dim(), "mean vector")?;
        match self {
            Family::Gamma => gamma::std_from_mean(mu),
            Family::Mixture(..) => self.as_mixture().unwrap().std_from_mean(mu),
            _ => self.layout().unwrap().std_from_mean(mu),
        }
    }

    /// Pulls a standard-form cotangent back to mean coordinates. For the
    /// gamma family this goes through the implicit-function theorem.
    pub fn std_from_mean_vjp(&self, mu: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.check_len(mu, self.param_dim(), "mean vector")?;
        self.check_len(g, self.std_dim(), "standard cotangent")?;
        match self {
            Family::Gamma => gamma::std_from_mean_vjp(mu, g),
            Family::Mixture(..) => self.as_mixture().unwrap().std_from_mean_vjp(mu, g),
            _ => self.layout().unwrap().std_from_mean_vjp(mu, g),
        }
    }

    /// μ = ∇A(η).
    pub fn to_mean(&self, eta: &[f64]) -> Result<Vec<f64>> {
        self.mean_from_std(&self.std_from_natural(eta)?)
    }

    /// η(μ), the inverse of [`Family::to_mean`].
    pub fn to_natural(&self, mu: &[f64]) -> Result<Vec<f64>> {
        self.natural_from_std(&self.std_from_mean(mu)?)
    }

    /// Jacobian-transpose of μ(·) at η applied to `c`, i.e. ∇²A(η)·c.
    pub fn through_to_mean(&self, eta: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        let std = self.std_from_natural(eta)?;
        self.std_from_natural_vjp(eta, &self.mean_from_std_vjp(&std, c)?)
    }

    /// Jacobian-transpose of η(·) at μ applied to `c`, i.e. ∇²A(η(μ))⁻¹·c.
    pub fn through_to_natural(&self, mu: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        let std = self.std_from_mean(mu)?;
        self.std_from_mean_vjp(mu, &self.natural_from_std_vjp(&std, c)?)
    }

    /// Converts a vector between parameterizations of this family.
    pub fn convert(&self, v: &[f64], from: Parameterization, to: Parameterization) -> Result<Vec<f64>> {
        match (from, to) {
            (Parameterization::Natural, Parameterization::Mean) => self.to_mean(v),
            (Parameterization::Mean, Parameterization::Natural) => self.to_natural(v),
            _ => Ok(v.to_vec()),
        }
    }

    pub fn std_from(&self, v: &[f64], from: Parameterization) -> Result<Vec<f64>> {
        match from {
            Parameterization::Natural => self.std_from_natural(v),
            Parameterization::Mean => self.std_from_mean(v),
        }
    }

    pub fn std_from_vjp(&self, v: &[f64], from: Parameterization, g: &[f64]) -> Result<Vec<f64>> {
        match from {
            Parameterization::Natural => self.std_from_natural_vjp(v, g),
            Parameterization::Mean => self.std_from_mean_vjp(v, g),
        }
    }

    pub fn validate(&self, v: &[f64], p: Parameterization) -> Result<()> {
        match p {
            Parameterization::Natural => self.validate_natural(v),
            Parameterization::Mean => self.validate_mean(v),
        }
    }

    /// KL(q_η₁ ‖ q_η₂) = A(η₂) − A(η₁) − (η₂ − η₁)ᵀ∇A(η₁).
    pub fn kl(&self, eta1: &[f64], eta2: &[f64]) -> Result<f64> {
        let mu1 = self.to_mean(eta1)?;
        let lin: f64 = eta2.iter().zip(eta1).zip(&mu1).map(|((a, b), m)| (a - b) * m).sum();
        Ok(self.log_partition(eta2)? - self.log_partition(eta1)? - lin)
    }

    pub fn sufficient_stats(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x, self.obs_dim(), "observation")?;
        match self {
            Family::Gamma => gamma::stats(x),
            Family::Mixture(..) => self.as_mixture().unwrap().stats(x),
            _ => Ok(self.layout().unwrap().stats(x)),
        }
    }

    pub fn log_base_measure(&self, x: &[f64]) -> Result<f64> {
        self.check_len(x, self.obs_dim(), "observation")?;
        match self {
            Family::Gamma => gamma::log_base_measure(x),
            Family::Mixture(..) => self.as_mixture().unwrap().log_base_measure(x),
            _ => Ok(0.0),
        }
    }

    /// log q_η(x) = log ν(x) + t(x)ᵀη − A(η).
    pub fn log_density(&self, eta: &[f64], x: &[f64]) -> Result<f64> {
        let t = self.sufficient_stats(x)?;
        let dot: f64 = t.iter().zip(eta).map(|(a, b)| a * b).sum();
        Ok(self.log_base_measure(x)? + dot - self.log_partition(eta)?)
    }

    /// Draws one observation from the member with standard form `std`.
    pub fn sample<R: Rng + ?Sized>(&self, std: &[f64], rng: &mut R) -> Result<Vec<f64>> {
        self.validate_std(std)?;
        match self {
            Family::Gamma => {
                let g = rand_distr::Gamma::new(std[0], 1.0 / std[1])
                    .map_err(|e| Error::domain(e.to_string()))?;
                Ok(vec![g.sample(rng)])
            }
            Family::Normal(d) | Family::ZeroMeanNormal(d) => {
                let d = *d;
                let off = std.len() - d * d;
                let sigma = SpdMatrix::new(read_matrix(&std[off..], d))?;
                let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
                let mut x = sigma.chol().mul_vec(&z);
                if off == d {
                    x += DVector::from_column_slice(&std[..d]);
                }
                Ok(x.iter().copied().collect())
            }
            Family::Mixture(k, comp) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                let mut z = k - 1;
                for (i, w) in std[..*k].iter().enumerate() {
                    acc += w;
                    if u < acc {
                        z = i;
                        break;
                    }
                }
                let s = comp.std_dim();
                let mut out = vec![z as f64];
                out.extend(comp.sample(&std[k + z * s..k + (z + 1) * s], rng)?);
                Ok(out)
            }
        }
    }
}

impl Family {
    /// A random well-conditioned member in standard form, for tests and
    /// initialization. Gamma shapes lie in [0.3, 20], normal covariances are
    /// MᵀM + ½I with M uniform on [−1, 1], mixture weights are at least 0.05/k.
    pub fn random_std<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match self {
            Family::Gamma => vec![rng.random_range(0.3..20.0), rng.random_range(0.1..5.0)],
            Family::Normal(d) | Family::ZeroMeanNormal(d) => {
                let d = *d;
                let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                let cov = m.transpose() * &m + DMatrix::identity(d, d) * 0.5;
                let mut out: Vec<f64> = if matches!(self, Family::Normal(_)) {
                    (0..d).map(|_| rng.random_range(-2.0..2.0)).collect()
                } else {
                    Vec::new()
                };
                push_matrix(&cov, &mut out);
                out
            }
            Family::Mixture(k, comp) => {
                let raw: Vec<f64> = (0..*k).map(|_| rng.random_range(0.05..1.0)).collect();
                let total: f64 = raw.iter().sum();
                let mut out: Vec<f64> = raw.iter().map(|w| w / total).collect();
                // Put the rounding residue on the last weight so the sum is 1.
                let head: f64 = out[..k - 1].iter().sum();
                out[k - 1] = 1.0 - head;
                for _ in 0..*k {
                    out.extend(comp.random_std(rng));
                }
                out
            }
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Family::Gamma => write!(f, "gamma"),
            Family::Normal(d) => write!(f, "normal({d})"),
            Family::ZeroMeanNormal(d) => write!(f, "zero-mean-normal({d})"),
            Family::Mixture(k, c) => write!(f, "mixture({k}, {c})"),
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    /// Parses the [`fmt::Display`] form, e.g. `mixture(3, normal(2))`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Config(format!("unknown family '{s}'"));
        if s == "gamma" {
            return Ok(Family::Gamma);
        }
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let dim = |t: &str| t.trim().parse::<usize>().ok().filter(|&d| d > 0).ok_or_else(bad);
        match head.trim() {
            "normal" => Ok(Family::Normal(dim(inner)?)),
            "zero-mean-normal" => Ok(Family::ZeroMeanNormal(dim(inner)?)),
            "mixture" => {
                let (k, comp) = inner.split_once(',').ok_or_else(bad)?;
                Family::mixture(dim(k)?, comp.parse()?)
            }
            _ => Err(bad()),
        }
    }
}

/// Standard-form builders and accessors.
pub mod standard {
    use super::*;

    pub fn gamma(alpha: f64, beta: f64) -> Vec<f64> {
        vec![alpha, beta]
    }

    pub fn normal(mean: &[f64], cov: &DMatrix<f64>) -> Vec<f64> {
        let mut out = mean.to_vec();
        push_matrix(cov, &mut out);
        out
    }

    pub fn zero_mean_normal(cov: &DMatrix<f64>) -> Vec<f64> {
        let mut out = Vec::new();
        push_matrix(cov, &mut out);
        out
    }

    pub fn mixture(weights: &[f64], components: &[Vec<f64>]) -> Vec<f64> {
        let mut out = weights.to_vec();
        for c in components {
            out.extend_from_slice(c);
        }
        out
    }

    /// (weights, component blocks) of a mixture standard vector.
    pub fn split_mixture<'a>(k: usize, comp: &Family, std: &'a [f64]) -> (&'a [f64], Vec<&'a [f64]>) {
        let s = comp.std_dim();
        let blocks = (0..k).map(|i| &std[k + i * s..k + (i + 1) * s]).collect();
        (&std[..k], blocks)
    }

    /// (mean, covariance) of a normal standard vector; the mean is empty when centered.
    pub fn split_normal(d: usize, std: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let off = std.len() - d * d;
        (std[..off].to_vec(), read_matrix(&std[off..], d))
    }
}
