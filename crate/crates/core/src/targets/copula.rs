//! Gaussian and Student-t copula densities on the open unit cube.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{
    lgamma, norm_cdf, norm_quantile, read_matrix, student_t_cdf, student_t_log_pdf,
    student_t_quantile, symmetrize, SpdMatrix,
};

fn check_interior(u: &[f64]) -> Result<()> {
    if let Some(v) = u.iter().find(|v| !(**v > 0.0 && **v < 1.0)) {
        return Err(Error::domain(format!("copula inputs must lie strictly inside (0, 1), got {v}")));
    }
    Ok(())
}

/// True when `r` has unit diagonal within 1e-12.
pub fn has_unit_diagonal(r: &DMatrix<f64>) -> bool {
    (0..r.nrows()).all(|i| (r[(i, i)] - 1.0).abs() <= 1e-12)
}

struct Corr {
    d: usize,
    r: SpdMatrix,
    r_inv: DMatrix<f64>,
}

impl Corr {
    fn new(d: usize, block: &[f64]) -> Result<Self> {
        let r = SpdMatrix::new(symmetrize(&read_matrix(block, d)))?;
        Ok(Corr { d, r_inv: r.inverse(), r })
    }

    /// Adds weight·(c·vvᵀ − ½R⁻¹) into a row-major gradient block.
    fn add_grad(&self, g: &mut [f64], weight: f64, v: &DVector<f64>, c: f64) {
        for i in 0..self.d {
            for j in 0..self.d {
                g[i * self.d + j] += weight * (c * v[i] * v[j] - 0.5 * self.r_inv[(i, j)]);
            }
        }
    }
}

pub struct Gaussian(Corr);

impl Gaussian {
    pub fn new(d: usize, theta: &[f64]) -> Result<Self> {
        Ok(Gaussian(Corr::new(d, theta)?))
    }

    /// log c(u) = −½ log|R| − ½ zᵀ(R⁻¹ − I)z with z = Φ⁻¹(u).
    pub fn eval(&self, u: &[f64], weight: f64, grad: Option<&mut [f64]>) -> Result<f64> {
        check_interior(u)?;
        let z = DVector::from_iterator(u.len(), u.iter().map(|&p| norm_quantile(p).unwrap()));
        let v = &self.0.r_inv * &z;
        if let Some(g) = grad {
            self.0.add_grad(g, weight, &v, 0.5);
        }
        Ok(-0.5 * self.0.r.logdet() - 0.5 * (z.dot(&v) - z.dot(&z)))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let g = DVector::from_fn(self.0.d, |_, _| StandardNormal.sample(rng));
        self.0.r.chol().mul_vec(&g).iter().map(|&z| norm_cdf(z)).collect()
    }
}

pub struct StudentT {
    corr: Corr,
    nu: f64,
}

impl StudentT {
    /// θ = (R [d×d], ν) with ν > 2.
    pub fn new(d: usize, theta: &[f64]) -> Result<Self> {
        let nu = theta[d * d];
        if !(nu > 2.0) || !nu.is_finite() {
            return Err(Error::domain(format!("t copula needs nu > 2, got {nu}")));
        }
        Ok(StudentT { corr: Corr::new(d, &theta[..d * d])?, nu })
    }

    /// Log density at a given ν, plus (R⁻¹z, zᵀR⁻¹z) for the R-gradient.
    fn log_density_at(&self, u: &[f64], nu: f64) -> Result<(f64, DVector<f64>, f64)> {
        let d = self.corr.d as f64;
        let mut z = DVector::zeros(u.len());
        let mut marginals = 0.0;
        for (i, &p) in u.iter().enumerate() {
            z[i] = student_t_quantile(p, nu)?;
            marginals += student_t_log_pdf(z[i], nu)?;
        }
        let v = &self.corr.r_inv * &z;
        let q = z.dot(&v);
        let joint = lgamma(0.5 * (nu + d)) - lgamma(0.5 * nu) - 0.5 * d * (nu * std::f64::consts::PI).ln()
            - 0.5 * self.corr.r.logdet()
            - 0.5 * (nu + d) * (q / nu).ln_1p();
        Ok((joint - marginals, v, q))
    }

    /// Gradient layout (R [d×d], ν). The ν entry is a central difference of
    /// the whole density, quantiles included, with step max(1e-4, 1e-4·ν).
    pub fn eval(&self, u: &[f64], weight: f64, grad: Option<&mut [f64]>) -> Result<f64> {
        check_interior(u)?;
        let (lp, v, q) = self.log_density_at(u, self.nu)?;
        if let Some(g) = grad {
            let d = self.corr.d;
            let c = 0.5 * (self.nu + d as f64) / (self.nu + q);
            self.corr.add_grad(&mut g[..d * d], weight, &v, c);
            let h = (1e-4 * self.nu).max(1e-4);
            let up = self.log_density_at(u, self.nu + h)?.0;
            let down = self.log_density_at(u, self.nu - h)?.0;
            g[d * d] += weight * (up - down) / (2.0 * h);
        }
        Ok(lp)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let g = DVector::from_fn(self.corr.d, |_, _| StandardNormal.sample(rng));
        let chi: f64 = ChiSquared::new(self.nu).map_err(|e| Error::domain(e.to_string()))?.sample(rng);
        let scale = (chi / self.nu).sqrt();
        self.corr
            .r
            .chol()
            .mul_vec(&g)
            .iter()
            .map(|&y| student_t_cdf(y / scale, self.nu))
            .collect()
    }
}
