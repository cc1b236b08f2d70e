//! Joint EF over (z, x) whose marginal in x is a k-component mixture.
//!
//! Statistics: (𝕀₁(z), …, 𝕀ₖ₋₁(z), 𝕀₁(z)t(x), …, 𝕀ₖ(z)t(x)).
//! Natural:    (ν₁, …, νₖ₋₁, η₁, …, ηₖ) with νᵢ = log(πᵢ/πₖ) − A(ηᵢ) + A(ηₖ).
//! Mean:       (π₁, …, πₖ₋₁, π₁μ₁, …, πₖμₖ).
//! Standard:   (π₁, …, πₖ, s₁, …, sₖ) with sᵢ the component standard form.
//! A = logsumexp(νᵢ + A(ηᵢ)) with νₖ = 0.

use crate::error::{Error, Result};
use crate::numerics::log_sum_exp;

use super::Family;

pub(super) struct Mixture<'a> {
    pub k: usize,
    pub comp: &'a Family,
}

impl Mixture<'_> {
    fn p(&self) -> usize {
        self.comp.param_dim()
    }

    fn s(&self) -> usize {
        self.comp.std_dim()
    }

    fn block<'v>(&self, v: &'v [f64], i: usize) -> &'v [f64] {
        let off = self.k - 1 + i * self.p();
        &v[off..off + self.p()]
    }

    fn std_block<'v>(&self, v: &'v [f64], i: usize) -> &'v [f64] {
        let off = self.k + i * self.s();
        &v[off..off + self.s()]
    }

    /// aᵢ = νᵢ + A(ηᵢ), the log of the unnormalized weights.
    fn logits(&self, eta: &[f64]) -> Result<Vec<f64>> {
        (0..self.k)
            .map(|i| {
                let nu = if i + 1 < self.k { eta[i] } else { 0.0 };
                if !nu.is_finite() {
                    return Err(Error::domain(format!("mixture logit {i} is not finite")));
                }
                Ok(nu + self.comp.log_partition(self.block(eta, i))?)
            })
            .collect()
    }

    fn weights(&self, eta: &[f64]) -> Result<Vec<f64>> {
        let a = self.logits(eta)?;
        let lse = log_sum_exp(&a);
        Ok(a.iter().map(|ai| (ai - lse).exp()).collect())
    }

    pub fn validate_natural(&self, eta: &[f64]) -> Result<()> {
        self.logits(eta).map(|_| ())
    }

    pub fn validate_std(&self, std: &[f64]) -> Result<()> {
        let pi = &std[..self.k];
        if pi.iter().any(|&w| !(w > 0.0 && w < 1.0 || self.k == 1 && w == 1.0)) {
            return Err(Error::domain("mixture weights must lie in the open simplex"));
        }
        let total: f64 = pi.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("mixture weights sum to {total}, not 1")));
        }
        for i in 0..self.k {
            self.comp.validate_std(self.std_block(std, i))?;
        }
        Ok(())
    }

    /// Full weight vector (πₖ = 1 − Σ others) from mean parameters.
    fn mean_weights(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let mut pi: Vec<f64> = mu[..self.k - 1].to_vec();
        let last = 1.0 - pi.iter().sum::<f64>();
        pi.push(last);
        if pi.iter().any(|&w| !(w > 0.0) || !w.is_finite()) {
            return Err(Error::domain("mixture mean weights must lie in the open simplex"));
        }
        Ok(pi)
    }

    fn component_mean(&self, mu: &[f64], pi: &[f64], i: usize) -> Vec<f64> {
        self.block(mu, i).iter().map(|v| v / pi[i]).collect()
    }

    pub fn log_partition(&self, eta: &[f64]) -> Result<f64> {
        Ok(log_sum_exp(&self.logits(eta)?))
    }

    pub fn std_from_natural(&self, eta: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.weights(eta)?;
        for i in 0..self.k {
            out.extend(self.comp.std_from_natural(self.block(eta, i))?);
        }
        Ok(out)
    }

    pub fn std_from_natural_vjp(&self, eta: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let pi = self.weights(eta)?;
        let gpi = &g[..self.k];
        let dot: f64 = pi.iter().zip(gpi).map(|(p, q)| p * q).sum();
        let ga: Vec<f64> = pi.iter().zip(gpi).map(|(p, q)| p * (q - dot)).collect();
        let mut out = ga[..self.k - 1].to_vec();
        for i in 0..self.k {
            let eta_i = self.block(eta, i);
            let mu_i = self.comp.to_mean(eta_i)?;
            let gi = self.comp.std_from_natural_vjp(eta_i, self.std_block(g, i))?;
            out.extend(gi.iter().zip(&mu_i).map(|(a, m)| a + ga[i] * m));
        }
        Ok(out)
    }

    pub fn natural_from_std(&self, std: &[f64]) -> Result<Vec<f64>> {
        self.validate_std(std)?;
        let pi = &std[..self.k];
        let etas: Vec<Vec<f64>> = (0..self.k)
            .map(|i| self.comp.natural_from_std(self.std_block(std, i)))
            .collect::<Result<_>>()?;
        let a: Vec<f64> = etas.iter().map(|e| self.comp.log_partition(e)).collect::<Result<_>>()?;
        let last = self.k - 1;
        let mut out: Vec<f64> = (0..last).map(|i| (pi[i] / pi[last]).ln() - a[i] + a[last]).collect();
        for e in etas {
            out.extend(e);
        }
        Ok(out)
    }

    pub fn natural_from_std_vjp(&self, std: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.validate_std(std)?;
        let pi = &std[..self.k];
        let last = self.k - 1;
        let gnu = &g[..last];
        let gnu_sum: f64 = gnu.iter().sum();
        let mut out: Vec<f64> = (0..last).map(|i| gnu[i] / pi[i]).collect();
        out.push(-gnu_sum / pi[last]);
        for i in 0..self.k {
            let s_i = self.std_block(std, i);
            let eta_i = self.comp.natural_from_std(s_i)?;
            let mu_i = self.comp.to_mean(&eta_i)?;
            let g_a = if i < last { -gnu[i] } else { gnu_sum };
            let g_eta: Vec<f64> = self.block(g, i).iter().zip(&mu_i).map(|(a, m)| a + g_a * m).collect();
            out.extend(self.comp.natural_from_std_vjp(s_i, &g_eta)?);
        }
        Ok(out)
    }

    pub fn mean_from_std(&self, std: &[f64]) -> Result<Vec<f64>> {
        self.validate_std(std)?;
        let pi = &std[..self.k];
        let mut out = pi[..self.k - 1].to_vec();
        for i in 0..self.k {
            let m = self.comp.mean_from_std(self.std_block(std, i))?;
            out.extend(m.iter().map(|v| pi[i] * v));
        }
        Ok(out)
    }

    pub fn mean_from_std_vjp(&self, std: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        self.validate_std(std)?;
        let pi = &std[..self.k];
        let mut gpi: Vec<f64> = c[..self.k - 1].to_vec();
        gpi.push(0.0);
        let mut tail = Vec::with_capacity(self.k * self.s());
        for i in 0..self.k {
            let s_i = self.std_block(std, i);
            let c_i = self.block(c, i);
            let m_i = self.comp.mean_from_std(s_i)?;
            gpi[i] += c_i.iter().zip(&m_i).map(|(a, b)| a * b).sum::<f64>();
            let scaled: Vec<f64> = c_i.iter().map(|v| pi[i] * v).collect();
            tail.extend(self.comp.mean_from_std_vjp(s_i, &scaled)?);
        }
        gpi.extend(tail);
        Ok(gpi)
    }

    pub fn std_from_mean(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let mut out = self.mean_weights(mu)?;
        let pi = out.clone();
        for i in 0..self.k {
            out.extend(self.comp.std_from_mean(&self.component_mean(mu, &pi, i))?);
        }
        Ok(out)
    }

    pub fn std_from_mean_vjp(&self, mu: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let pi = self.mean_weights(mu)?;
        let last = self.k - 1;
        // Cotangent on the full weight vector, with πₖ treated as free for now.
        let mut gpi: Vec<f64> = g[..self.k].to_vec();
        let mut tail = Vec::with_capacity(self.k * self.p());
        for i in 0..self.k {
            let mu_i = self.component_mean(mu, &pi, i);
            let gmu = self.comp.std_from_mean_vjp(&mu_i, self.std_block(g, i))?;
            gpi[i] -= gmu.iter().zip(&mu_i).map(|(a, b)| a * b).sum::<f64>() / pi[i];
            tail.extend(gmu.iter().map(|v| v / pi[i]));
        }
        let mut out: Vec<f64> = (0..last).map(|i| gpi[i] - gpi[last]).collect();
        out.extend(tail);
        Ok(out)
    }

    pub fn validate_mean(&self, mu: &[f64]) -> Result<()> {
        self.std_from_mean(mu).map(|_| ())
    }

    /// x = (z, x_z) with z a 0-based component index stored as a real.
    pub fn component_index(&self, x: &[f64]) -> Result<usize> {
        let z = x[0];
        if z.fract() != 0.0 || z < 0.0 || z >= self.k as f64 {
            return Err(Error::domain(format!("mixture label {z} is not in 0..{}", self.k)));
        }
        Ok(z as usize)
    }

    pub fn stats(&self, x: &[f64]) -> Result<Vec<f64>> {
        let z = self.component_index(x)?;
        let t = self.comp.sufficient_stats(&x[1..])?;
        let mut out = vec![0.0; self.k - 1 + self.k * self.p()];
        if z + 1 < self.k {
            out[z] = 1.0;
        }
        let off = self.k - 1 + z * self.p();
        out[off..off + self.p()].copy_from_slice(&t);
        Ok(out)
    }

    pub fn log_base_measure(&self, x: &[f64]) -> Result<f64> {
        self.component_index(x)?;
        self.comp.log_base_measure(&x[1..])
    }
}
