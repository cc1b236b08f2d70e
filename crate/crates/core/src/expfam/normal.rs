//! Multivariate normal with t(x) = (x, xxᵀ), and its zero-mean variant with t(x) = xxᵀ.
//!
//! Matrix blocks are stored full and row-major. Every function reads them
//! through symmetrization and emits symmetric cotangents, so the Frobenius
//! pairing on raw entries is consistent with finite differences.
//!
//! A(η) carries the (d/2)·log 2π constant, so the base measure is 1.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::numerics::{push_matrix, read_matrix, symmetrize, SpdMatrix, LN_2PI};

/// Layout helper: `centered` drops the first-moment block.
#[derive(Debug, Clone, Copy)]
pub(super) struct Layout {
    pub d: usize,
    pub centered: bool,
}

impl Layout {
    fn off(&self) -> usize {
        if self.centered {
            0
        } else {
            self.d
        }
    }

    fn vec_part(&self, v: &[f64]) -> DVector<f64> {
        if self.centered {
            DVector::zeros(self.d)
        } else {
            DVector::from_column_slice(&v[..self.d])
        }
    }

    fn mat_part(&self, v: &[f64]) -> DMatrix<f64> {
        symmetrize(&read_matrix(&v[self.off()..], self.d))
    }

    fn pack(&self, v: &DVector<f64>, m: &DMatrix<f64>) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.off() + self.d * self.d);
        if !self.centered {
            out.extend(v.iter());
        }
        push_matrix(m, &mut out);
        out
    }

    /// (m, Σ) from a standard-form vector.
    fn std_parts(&self, std: &[f64]) -> Result<(DVector<f64>, SpdMatrix)> {
        Ok((self.vec_part(std), SpdMatrix::new(self.mat_part(std))?))
    }

    pub fn validate_std(&self, std: &[f64]) -> Result<()> {
        self.std_parts(std).map(|_| ())
    }

    pub fn validate_natural(&self, eta: &[f64]) -> Result<()> {
        SpdMatrix::new(self.mat_part(eta) * -2.0).map(|_| ())
    }

    pub fn validate_mean(&self, mu: &[f64]) -> Result<()> {
        self.std_from_mean(mu).map(|_| ())
    }

    pub fn log_partition(&self, eta: &[f64]) -> Result<f64> {
        let p = SpdMatrix::new(self.mat_part(eta) * -2.0)?;
        let e1 = self.vec_part(eta);
        Ok(0.5 * p.inv_quad(&e1) - 0.5 * p.logdet() + 0.5 * self.d as f64 * LN_2PI)
    }

    pub fn std_from_natural(&self, eta: &[f64]) -> Result<Vec<f64>> {
        let p = SpdMatrix::new(self.mat_part(eta) * -2.0)?;
        let m = p.solve(&self.vec_part(eta));
        Ok(self.pack(&m, &p.inverse()))
    }

    pub fn std_from_natural_vjp(&self, eta: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let p = SpdMatrix::new(self.mat_part(eta) * -2.0)?;
        let sigma = p.inverse();
        let e1 = self.vec_part(eta);
        let gm = self.vec_part(g);
        let mut gs = self.mat_part(g);
        if !self.centered {
            gs += (&gm * e1.transpose() + &e1 * gm.transpose()) * 0.5;
        }
        let g_eta1 = &sigma * &gm;
        let g_eta2 = symmetrize(&(&sigma * gs * &sigma)) * 2.0;
        Ok(self.pack(&g_eta1, &g_eta2))
    }

    pub fn natural_from_std(&self, std: &[f64]) -> Result<Vec<f64>> {
        let (m, sigma) = self.std_parts(std)?;
        let p = sigma.inverse();
        Ok(self.pack(&(&p * m), &(p * -0.5)))
    }

    pub fn natural_from_std_vjp(&self, std: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        let (m, sigma) = self.std_parts(std)?;
        let p = sigma.inverse();
        let g1 = self.vec_part(g);
        let mut gp = self.mat_part(g) * -0.5;
        if !self.centered {
            gp += (&g1 * m.transpose() + &m * g1.transpose()) * 0.5;
        }
        let gm = &p * &g1;
        let gs = symmetrize(&(&p * gp * &p)) * -1.0;
        Ok(self.pack(&gm, &gs))
    }

    pub fn mean_from_std(&self, std: &[f64]) -> Result<Vec<f64>> {
        let (m, sigma) = self.std_parts(std)?;
        Ok(self.pack(&m, &(sigma.matrix() + &m * m.transpose())))
    }

    pub fn mean_from_std_vjp(&self, std: &[f64], c: &[f64]) -> Result<Vec<f64>> {
        let (m, _) = self.std_parts(std)?;
        let c2 = self.mat_part(c);
        let gm = self.vec_part(c) + (&c2 * &m) * 2.0;
        Ok(self.pack(&gm, &c2))
    }

    pub fn std_from_mean(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let m = self.vec_part(mu);
        let sigma = SpdMatrix::new(self.mat_part(mu) - &m * m.transpose())?;
        Ok(self.pack(&m, sigma.matrix()))
    }

    pub fn std_from_mean_vjp(&self, mu: &[f64], g: &[f64]) -> Result<Vec<f64>> {
        self.std_from_mean(mu)?;
        let m = self.vec_part(mu);
        let gs = self.mat_part(g);
        let gm = self.vec_part(g) - (&gs * &m) * 2.0;
        Ok(self.pack(&gm, &gs))
    }

    pub fn stats(&self, x: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(&x[..self.d]);
        self.pack(&v, &(&v * v.transpose()))
    }
}
