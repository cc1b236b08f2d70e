//! Special functions: the log-gamma family, the standard normal and the
//! univariate Student-t distribution.

use std::f64::consts::{LN_2, PI};

use statrs::function::erf::{erfc, erfc_inv};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;
const RECURRENCE_FLOOR: f64 = 8.0;

/// `(ln Γ(x), ψ(x), ψ'(x))` evaluated together.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGammaFamily {
    pub lgamma: f64,
    pub digamma: f64,
    pub trigamma: f64,
}

/// Checked evaluation of ln Γ, digamma and trigamma at `x > 0`.
pub fn log_gamma_family(x: f64) -> Result<LogGammaFamily> {
    if !x.is_finite() || x <= 0.0 {
        return Err(Error::domain(format!("log-gamma family needs finite x > 0, got {x}")));
    }
    Ok(LogGammaFamily { lgamma: lgamma(x), digamma: digamma(x), trigamma: trigamma(x) })
}

/// ln Γ(x) for x > 0. Returns NaN outside the domain.
pub fn lgamma(x: f64) -> f64 {
    if !(x > 0.0) {
        return f64::NAN;
    }
    // Pin the two zeros exactly; the Lanczos sum is off by an ulp there.
    if x == 1.0 || x == 2.0 {
        return 0.0;
    }
    ln_gamma(x)
}

/// Digamma ψ(x) for x > 0, by upward recurrence and the asymptotic series.
pub fn digamma(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    let mut acc = 0.0;
    let mut z = x;
    while z < RECURRENCE_FLOOR {
        acc -= 1.0 / z;
        z += 1.0;
    }
    let r = 1.0 / (z * z);
    // Bernoulli-number tail: B_2k / (2k z^2k)
    let series = r
        * (1.0 / 12.0
            - r * (1.0 / 120.0
                - r * (1.0 / 252.0
                    - r * (1.0 / 240.0
                        - r * (1.0 / 132.0 - r * (691.0 / 32760.0 - r * (1.0 / 12.0)))))));
    acc + z.ln() - 0.5 / z - series
}

/// log x − ψ(x) without cancellation for large x.
pub fn log_minus_digamma(x: f64) -> f64 {
    if x < 12.0 {
        return x.ln() - digamma(x);
    }
    let r = 1.0 / (x * x);
    let series = r * (1.0 / 12.0 - r * (1.0 / 120.0 - r * (1.0 / 252.0 - r * (1.0 / 240.0 - r * (1.0 / 132.0 - r * 691.0 / 32760.0)))));
    0.5 / x + series
}

/// ψ'(x) − 1/x without cancellation for large x.
pub fn trigamma_minus_inv(x: f64) -> f64 {
    if x < 12.0 {
        return trigamma(x) - 1.0 / x;
    }
    let r = 1.0 / (x * x);
    let series = r * (1.0 / 6.0 - r * (1.0 / 30.0 - r * (1.0 / 42.0 - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * 691.0 / 2730.0)))));
    0.5 * r + series / x
}

/// Trigamma ψ'(x) for x > 0, by upward recurrence and the asymptotic series.
pub fn trigamma(x: f64) -> f64 {
    if !(x > 0.0) || !x.is_finite() {
        return f64::NAN;
    }
    let mut acc = 0.0;
    let mut z = x;
    while z < RECURRENCE_FLOOR {
        acc += 1.0 / (z * z);
        z += 1.0;
    }
    let r = 1.0 / (z * z);
    let series = 1.0 / 6.0
        - r * (1.0 / 30.0
            - r * (1.0 / 42.0
                - r * (1.0 / 30.0 - r * (5.0 / 66.0 - r * (691.0 / 2730.0 - r * (7.0 / 6.0))))));
    acc + 1.0 / z + 0.5 * r + series * r / z
}

/// Standard normal log density.
pub fn norm_log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// log Φ(x), accurate far into the lower tail.
pub fn norm_log_cdf(x: f64) -> f64 {
    if x > -30.0 {
        norm_cdf(x).ln()
    } else {
        // Mills-ratio expansion of the lower tail.
        let r = 1.0 / (x * x);
        norm_log_pdf(x) - (-x).ln() + (1.0 - r * (1.0 - r * (3.0 - 15.0 * r))).ln()
    }
}

/// φ(x)/Φ(x), the derivative of log Φ.
pub fn norm_inv_mills(x: f64) -> f64 {
    if x > -30.0 {
        (norm_log_pdf(x) - norm_log_cdf(x)).exp()
    } else {
        let r = 1.0 / (x * x);
        -x / (1.0 - r * (1.0 - r * (3.0 - 15.0 * r)))
    }
}

/// Standard normal quantile Φ⁻¹(p) for p in (0, 1).
pub fn norm_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("normal quantile needs p in (0,1), got {p}")));
    }
    Ok(-std::f64::consts::SQRT_2 * erfc_inv(2.0 * p))
}

/// Standard normal `(log_pdf, cdf, quantile)` bundle at one point.
///
/// The quantile slot is evaluated at `x` interpreted as a probability and is
/// `None` when `x` is not in (0, 1).
pub fn gaussian_functions(x: f64) -> (f64, f64, Option<f64>) {
    (norm_log_pdf(x), norm_cdf(x), norm_quantile(x).ok())
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0) || !nu.is_finite() {
        return Err(Error::domain(format!("student-t degrees of freedom must be > 0, got {nu}")));
    }
    Ok(())
}

/// Log density of the univariate Student-t with `nu` degrees of freedom.
pub fn student_t_log_pdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    Ok(lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu) - 0.5 * (nu * PI).ln()
        - 0.5 * (nu + 1.0) * (x * x / nu).ln_1p())
}

/// Student-t CDF via the regularized incomplete beta function.
pub fn student_t_cdf(x: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    let lower = half_tail(x, nu)?;
    Ok(if x <= 0.0 { lower } else { 1.0 - lower })
}

/// P(T ≤ −|t|) for T ~ t_ν.
fn half_tail(t: f64, nu: f64) -> Result<f64> {
    let t2 = t * t;
    Ok(0.5 * beta_reg_pair(0.5 * nu, 0.5, nu / (nu + t2), t2 / (nu + t2))?)
}

/// Student-t quantile by a bracketed Newton iteration on the CDF.
pub fn student_t_quantile(p: f64, nu: f64) -> Result<f64> {
    check_nu(nu)?;
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("student-t quantile needs p in (0,1), got {p}")));
    }
    if p == 0.5 {
        return Ok(0.0);
    }
    if p > 0.5 {
        return Ok(-lower_tail_quantile(1.0 - p, nu)?);
    }
    lower_tail_quantile(p, nu)
}

/// Solves F(t) = p for p < 0.5, so t < 0 and F is evaluated without cancellation.
fn lower_tail_quantile(p: f64, nu: f64) -> Result<f64> {
    let cdf = |t: f64| -> Result<f64> { half_tail(t, nu) };
    let mut hi = 0.0;
    let mut lo = -1.0;
    let mut expansions = 0;
    while cdf(lo)? > p {
        hi = lo;
        lo *= 2.0;
        expansions += 1;
        if expansions > 1100 {
            return Err(Error::NonConvergence { what: "student-t quantile bracket", iterations: expansions });
        }
    }
    // Start from the normal quantile clipped into the bracket.
    let mut t = norm_quantile(p)?.clamp(lo, hi);
    if t <= lo || t >= hi {
        t = 0.5 * (lo + hi);
    }
    for _ in 0..400 {
        let f = cdf(t)? - p;
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if f == 0.0 {
            return Ok(t);
        }
        let dens = student_t_log_pdf(t, nu)?.exp();
        let step = f / dens;
        let newton = t - step;
        if dens > 0.0 && step.abs() <= 1e-13 * t.abs().max(1.0) {
            return Ok(newton);
        }
        if (hi - lo) <= 1e-12 * t.abs().max(1.0) {
            // a last Newton polish keeps quantiles smooth in nu
            return Ok(if newton > lo && newton < hi { newton } else { t });
        }
        t = if newton > lo && newton < hi && dens > 0.0 { newton } else { 0.5 * (lo + hi) };
    }
    Err(Error::NonConvergence { what: "student-t quantile", iterations: 400 })
}

/// `(log_pdf, quantile)` of the Student-t; `quantile` is evaluated at `x` as a probability.
pub fn student_t_functions(x: f64, nu: f64) -> Result<(f64, Option<f64>)> {
    let lp = student_t_log_pdf(x, nu)?;
    let q = if x > 0.0 && x < 1.0 { Some(student_t_quantile(x, nu)?) } else { None };
    Ok((lp, q))
}

/// Regularized incomplete beta I_x(a, b) by Lentz's continued fraction.
pub fn beta_reg(a: f64, b: f64, x: f64) -> Result<f64> {
    beta_reg_pair(a, b, x, 1.0 - x)
}

/// I_x(a, b) with the complement y = 1 − x supplied separately, so callers
/// holding an accurate y avoid the cancellation in 1 − x.
pub(crate) fn beta_reg_pair(a: f64, b: f64, x: f64, y: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) || !(0.0..=1.0).contains(&x) || !(0.0..=1.0).contains(&y) {
        return Err(Error::domain(format!("incomplete beta needs a,b > 0 and x in [0,1]: a={a} b={b} x={x}")));
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if y == 0.0 {
        return Ok(1.0);
    }
    let ln_x = if x > 0.5 { (-y).ln_1p() } else { x.ln() };
    let ln_y = if y > 0.5 { (-x).ln_1p() } else { y.ln() };
    let ln_front = -ln_beta(a, b) + a * ln_x + b * ln_y;
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok((ln_front.exp() * beta_cf(a, b, x)?) / a)
    } else {
        Ok(1.0 - (ln_front.exp() * beta_cf(b, a, y)?) / b)
    }
}

/// Stirling remainder lnΓ(z) − [(z − ½) ln z − z + ½ ln 2π], for z ≥ 20.
fn stirling_corr(z: f64) -> f64 {
    let r = 1.0 / (z * z);
    (1.0 / 12.0 - r * (1.0 / 360.0 - r * (1.0 / 1260.0 - r / 1680.0))) / z
}

/// ln B(a, b), keeping precision when one argument is large.
fn ln_beta(a: f64, b: f64) -> f64 {
    let (big, small) = if a >= b { (a, b) } else { (b, a) };
    if big < 20.0 {
        return lgamma(a) + lgamma(b) - lgamma(a + b);
    }
    // lnΓ(big + small) − lnΓ(big) without subtracting two large numbers.
    let diff = (big - 0.5) * (small / big).ln_1p() + small * (big + small).ln() - small
        + stirling_corr(big + small)
        - stirling_corr(big);
    lgamma(small) - diff
}

fn beta_cf(a: f64, b: f64, x: f64) -> Result<f64> {
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 20_000;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence { what: "incomplete beta continued fraction", iterations: MAX_ITER })
}

/// log(1 + exp(x)) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Logistic sigmoid.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log Σ exp(v) with max subtraction.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + v.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) const LN_2PI: f64 = 2.0 * LN_SQRT_2PI;
pub(crate) const LN_TWO: f64 = LN_2;
