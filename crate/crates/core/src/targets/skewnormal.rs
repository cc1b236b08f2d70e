//! Multivariate skew-normal: q(x) = 2 N_d(x; ξ, Ω) Φ(ηᵀ(x − ξ)).
//!
//! θ layout: (ξ [d], Ω [d×d row-major], η [d]).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::Result;
use crate::numerics::{norm_inv_mills, norm_log_cdf, read_matrix, symmetrize, SpdMatrix, LN_2PI, LN_TWO};

pub fn dim(d: usize) -> usize {
    2 * d + d * d
}

pub struct Prepared {
    d: usize,
    xi: DVector<f64>,
    omega: SpdMatrix,
    omega_inv: DMatrix<f64>,
    slant: DVector<f64>,
    constant: f64,
}

impl Prepared {
    pub fn new(d: usize, theta: &[f64]) -> Result<Self> {
        let xi = DVector::from_column_slice(&theta[..d]);
        let omega = SpdMatrix::new(symmetrize(&read_matrix(&theta[d..], d)))?;
        let slant = DVector::from_column_slice(&theta[d + d * d..]);
        let constant = LN_TWO - 0.5 * omega.logdet() - 0.5 * d as f64 * LN_2PI;
        Ok(Prepared { d, omega_inv: omega.inverse(), xi, omega, slant, constant })
    }

    /// Log density at `x`; when `grad` is given, adds weight·∇θ log q into it.
    pub fn eval(&self, x: &[f64], weight: f64, grad: Option<&mut [f64]>) -> f64 {
        let d = self.d;
        let u = DVector::from_column_slice(x) - &self.xi;
        let w = &self.omega_inv * &u;
        let a = self.slant.dot(&u);
        let lp = self.constant - 0.5 * u.dot(&w) + norm_log_cdf(a);
        if let Some(g) = grad {
            let m = norm_inv_mills(a);
            for i in 0..d {
                g[i] += weight * (w[i] - m * self.slant[i]);
                g[d + d * d + i] += weight * m * u[i];
                for j in 0..d {
                    g[d + i * d + j] += weight * 0.5 * (w[i] * w[j] - self.omega_inv[(i, j)]);
                }
            }
        }
        lp
    }

    /// Additive representation x = ξ + δ|u₀| + chol(Ω − δδᵀ)·w with δ = Ωη/√(1 + ηᵀΩη).
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let om = self.omega.matrix();
        let os = om * &self.slant;
        let delta = &os / (1.0 + self.slant.dot(&os)).sqrt();
        let resid = SpdMatrix::new(symmetrize(&(om - &delta * delta.transpose())))?;
        let u0: f64 = StandardNormal.sample(rng);
        let w = DVector::from_fn(self.d, |_, _| StandardNormal.sample(rng));
        let x = &self.xi + &delta * u0.abs() + resid.chol().mul_vec(&w);
        Ok(x.iter().copied().collect())
    }
}
