//! Negative binomial with size r and success probability s:
//! log p(x) = lgamma(x + r) − lgamma(x + 1) − lgamma(r) + x log(1 − s) + r log s.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};

use crate::error::{Error, Result};
use crate::numerics::{digamma, lgamma};

pub fn validate(theta: &[f64]) -> Result<()> {
    let (r, s) = (theta[0], theta[1]);
    if !(r > 0.0) || !r.is_finite() || !(s > 0.0 && s < 1.0) {
        return Err(Error::domain(format!("negative binomial needs r > 0 and 0 < s < 1, got ({r}, {s})")));
    }
    Ok(())
}

pub fn check_count(x: f64) -> Result<()> {
    if !(x >= 0.0) || x.fract() != 0.0 || !x.is_finite() {
        return Err(Error::domain(format!("negative binomial support is the nonnegative integers, got {x}")));
    }
    Ok(())
}

/// Log pmf and its gradient with respect to (r, s).
pub fn logpmf_grad(theta: &[f64], x: f64) -> Result<(f64, [f64; 2])> {
    validate(theta)?;
    check_count(x)?;
    let (r, s) = (theta[0], theta[1]);
    let lp = lgamma(x + r) - lgamma(x + 1.0) - lgamma(r) + x * (-s).ln_1p() + r * s.ln();
    let gr = digamma(x + r) - digamma(r) + s.ln();
    let gs = -x / (1.0 - s) + r / s;
    Ok((lp, [gr, gs]))
}

/// Gamma–Poisson compounding: λ ~ Gamma(r, scale (1 − s)/s), x ~ Poisson(λ).
pub fn sample<R: Rng + ?Sized>(theta: &[f64], rng: &mut R) -> Result<f64> {
    validate(theta)?;
    let (r, s) = (theta[0], theta[1]);
    let lambda = Gamma::new(r, (1.0 - s) / s).map_err(|e| Error::domain(e.to_string()))?.sample(rng);
    if lambda <= 0.0 {
        return Ok(0.0);
    }
    Ok(Poisson::new(lambda).map_err(|e| Error::domain(e.to_string()))?.sample(rng))
}
