//! Bayesian logistic regression with an isotropic Gaussian prior.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::numerics::{sigmoid, softplus, LN_2PI};

#[derive(Debug, Clone, PartialEq)]
pub struct LogRegModel {
    x: DMatrix<f64>,
    y: Vec<f64>,
    reg: f64,
}

impl LogRegModel {
    /// `x` is n×d, labels are ±1, `reg` is the prior precision.
    pub fn new(x: DMatrix<f64>, y: Vec<f64>, reg: f64) -> Result<Self> {
        if x.nrows() != y.len() {
            return Err(Error::shape(format!("design has {} rows but {} labels", x.nrows(), y.len())));
        }
        if let Some(v) = y.iter().find(|v| **v != 1.0 && **v != -1.0) {
            return Err(Error::domain(format!("labels must be +1 or -1, got {v}")));
        }
        if !(reg > 0.0) || !reg.is_finite() {
            return Err(Error::domain(format!("regularization must be positive, got {reg}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("design matrix".into()));
        }
        Ok(LogRegModel { x, y, reg })
    }

    pub fn dim(&self) -> usize {
        self.x.ncols()
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn reg(&self) -> f64 {
        self.reg
    }

    pub fn design(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn labels(&self) -> &[f64] {
        &self.y
    }

    /// log p(𝒟, w) = Σ log σ(yᵢ xᵢᵀw) + log N(w; 0, I/reg), and its gradient.
    pub fn log_joint_grad(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        let d = self.dim();
        if w.len() != d {
            return Err(Error::shape(format!("weight vector has length {}, expected {d}", w.len())));
        }
        let wv = DVector::from_column_slice(w);
        let margins = &self.x * &wv;
        let mut lp = 0.5 * d as f64 * (self.reg.ln() - LN_2PI) - 0.5 * self.reg * wv.norm_squared();
        let mut g = -self.reg * &wv;
        for i in 0..self.len() {
            let m = self.y[i] * margins[i];
            lp -= softplus(-m);
            let c = self.y[i] * sigmoid(-m);
            for j in 0..d {
                g[j] += c * self.x[(i, j)];
            }
        }
        Ok((lp, g.iter().copied().collect()))
    }

    /// Synthetic data: features N(0, I), labels drawn from σ(xᵀw_true).
    pub fn synthetic<R: Rng + ?Sized>(n: usize, w_true: &[f64], reg: f64, rng: &mut R) -> Result<Self> {
        let d = w_true.len();
        let x = DMatrix::from_fn(n, d, |_, _| StandardNormal.sample(rng));
        let wv = DVector::from_column_slice(w_true);
        let margins = &x * &wv;
        let y = margins.iter().map(|&m| if rng.random::<f64>() < sigmoid(m) { 1.0 } else { -1.0 }).collect();
        LogRegModel::new(x, y, reg)
    }
}
