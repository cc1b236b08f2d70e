//! Gamma family with statistic t(x) = (x, log x) and base measure 1/x.
//!
//! natural η = (−β, α), mean μ = (α/β, ψ(α) − log β), standard (α, β).

use crate::error::{Error, Result};
use crate::numerics::{digamma, lgamma, log_minus_digamma, trigamma, trigamma_minus_inv};

const NEWTON_TOL: f64 = 1e-12;
const NEWTON_CAP: usize = 50;

fn check_std(std: &[f64]) -> Result<(f64, f64)> {
    let (a, b) = (std[0], std[1]);
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!("gamma needs alpha > 0 and beta > 0, got ({a}, {b})")));
    }
    Ok((a, b))
}

pub(super) fn validate_natural(eta: &[f64]) -> Result<()> {
    check_std(&[eta[1], -eta[0]]).map(|_| ())
}

pub(super) fn validate_mean(mu: &[f64]) -> Result<()> {
    let (m1, m2) = (mu[0], mu[1]);
    if !(m1 > 0.0) || !m1.is_finite() || !m2.is_finite() || !(m1.ln() - m2 > 0.0) {
        return Err(Error::domain(format!("gamma mean parameters need mu1 > 0 and mu2 < log mu1, got ({m1}, {m2})")));
    }
    Ok(())
}

pub(super) fn validate_std(std: &[f64]) -> Result<()> {
    check_std(std).map(|_| ())
}

pub(super) fn log_partition(eta: &[f64]) -> Result<f64> {
    validate_natural(eta)?;
    Ok(lgamma(eta[1]) - eta[1] * (-eta[0]).ln())
}

pub(super) fn std_from_natural(eta: &[f64]) -> Result<Vec<f64>> {
    validate_natural(eta)?;
    Ok(vec![eta[1], -eta[0]])
}

pub(super) fn std_from_natural_vjp(_eta: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    Ok(vec![-g[1], g[0]])
}

pub(super) fn natural_from_std(std: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = check_std(std)?;
    Ok(vec![-b, a])
}

pub(super) fn natural_from_std_vjp(_std: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    Ok(vec![g[1], -g[0]])
}

pub(super) fn mean_from_std(std: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = check_std(std)?;
    Ok(vec![a / b, digamma(a) - b.ln()])
}

pub(super) fn mean_from_std_vjp(std: &[f64], c: &[f64]) -> Result<Vec<f64>> {
    let (a, b) = check_std(std)?;
    Ok(vec![c[0] / b + c[1] * trigamma(a), -c[0] * a / (b * b) - c[1] / b])
}

/// Solves log α − ψ(α) = s for α by Newton's method on 1/α.
pub fn invert_shape(s: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::domain(format!("gamma shape inversion needs log mu1 - mu2 > 0, got {s}")));
    }
    let mut alpha = (3.0 - s + ((s - 3.0) * (s - 3.0) + 24.0 * s).sqrt()) / (12.0 * s);
    for _ in 0..NEWTON_CAP {
        let resid = s - log_minus_digamma(alpha);
        let slope = alpha * alpha * trigamma_minus_inv(alpha);
        let inv = 1.0 / alpha + resid / slope;
        let next = if inv > 0.0 && inv.is_finite() { 1.0 / inv } else { 0.5 * alpha };
        if (next - alpha).abs() <= NEWTON_TOL * next {
            return Ok(next);
        }
        alpha = next;
    }
    Err(Error::NonConvergence { what: "gamma mean-to-natural inversion", iterations: NEWTON_CAP })
}

pub(super) fn std_from_mean(mu: &[f64]) -> Result<Vec<f64>> {
    validate_mean(mu)?;
    let alpha = invert_shape(mu[0].ln() - mu[1])?;
    Ok(vec![alpha, alpha / mu[0]])
}

/// Pullback through the iterative inverse via the implicit-function theorem.
pub(super) fn std_from_mean_vjp(mu: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let std = std_from_mean(mu)?;
    let (alpha, m1) = (std[0], mu[0]);
    // d/dα [log α − ψ(α) − s] = 1/α − ψ'(α) < 0
    let slope = -trigamma_minus_inv(alpha);
    if !(slope < 0.0) || !slope.is_finite() {
        return Err(Error::SingularSystem(format!("gamma inverse map is singular at alpha = {alpha}")));
    }
    let g_alpha = g[0] + g[1] / m1;
    let g_s = g_alpha / slope;
    Ok(vec![g_s / m1 - g[1] * alpha / (m1 * m1), -g_s])
}

pub(super) fn stats(x: &[f64]) -> Result<Vec<f64>> {
    let v = x[0];
    if !(v > 0.0) || !v.is_finite() {
        return Err(Error::domain(format!("gamma support is x > 0, got {v}")));
    }
    Ok(vec![v, v.ln()])
}

pub(super) fn log_base_measure(x: &[f64]) -> Result<f64> {
    stats(x).map(|t| -t[1])
}

/// Closed-form ∇²A(η) used by the tests and diagnostics.
pub fn hessian(eta: &[f64]) -> Result<[[f64; 2]; 2]> {
    validate_natural(eta)?;
    let (e1, e2) = (eta[0], eta[1]);
    Ok([[e2 / (e1 * e1), -1.0 / e1], [-1.0 / e1, trigamma(e2)]])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inversion_round_trips_over_wide_range() {
        for &alpha in &[1e-3f64, 0.05, 0.5, 1.0, 2.0, 17.0, 400.0, 1e5] {
            let s = log_minus_digamma(alpha);
            let back = invert_shape(s).unwrap();
            assert!((back - alpha).abs() <= 1e-10 * alpha, "alpha={alpha} back={back}");
        }
    }

    #[test]
    fn inversion_rejects_invalid() {
        assert!(invert_shape(0.0).is_err());
        assert!(invert_shape(-1.0).is_err());
        assert!(std_from_mean(&[2.0, 2f64.ln()]).is_err());
        assert!(std_from_mean(&[-1.0, 0.0]).is_err());
    }

    #[test]
    fn hessian_matches_closed_form() {
        let h = hessian(&[-1.0, 2.0]).unwrap();
        assert_eq!(h[0][0], 2.0);
        assert_eq!(h[0][1], 1.0);
        assert!((h[1][1] - trigamma(2.0)).abs() < 1e-15);
    }
}
