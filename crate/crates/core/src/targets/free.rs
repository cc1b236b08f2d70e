//! Unconstrained coordinates for target parameters, used by the first-order
//! baselines: log for positive scalars, logit for probabilities, log(ν − 2),
//! softmax logits (last fixed at 0) for weights, and a lower Cholesky factor
//! with log diagonal for covariance and correlation blocks.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::numerics::{cholesky, corr_from_cov, corr_pullback, push_matrix, read_matrix, sigmoid, symmetrize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    Real(usize),
    Positive,
    Unit,
    Above2,
    Spd(usize),
    Corr(usize),
    Simplex(usize),
}

impl Block {
    pub fn theta_len(&self) -> usize {
        match *self {
            Block::Real(n) => n,
            Block::Positive | Block::Unit | Block::Above2 => 1,
            Block::Spd(d) | Block::Corr(d) => d * d,
            Block::Simplex(k) => k,
        }
    }

    pub fn free_len(&self) -> usize {
        match *self {
            Block::Spd(d) | Block::Corr(d) => d * (d + 1) / 2,
            Block::Simplex(k) => k - 1,
            _ => self.theta_len(),
        }
    }
}

fn factor_from_free(d: usize, z: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for j in 0..=i {
            l[(i, j)] = if i == j { z[idx].exp() } else { z[idx] };
            idx += 1;
        }
    }
    l
}

fn factor_to_free(l: &DMatrix<f64>, out: &mut Vec<f64>) {
    for i in 0..l.nrows() {
        for j in 0..=i {
            out.push(if i == j { l[(i, j)].ln() } else { l[(i, j)] });
        }
    }
}

/// Cotangent on Σ = LLᵀ pulled back to the free factor entries.
fn factor_pullback(l: &DMatrix<f64>, g_sigma: &DMatrix<f64>, out: &mut Vec<f64>) {
    let gl = symmetrize(g_sigma) * l * 2.0;
    for i in 0..l.nrows() {
        for j in 0..=i {
            out.push(if i == j { gl[(i, j)] * l[(i, j)] } else { gl[(i, j)] });
        }
    }
}

fn softmax_last_zero(a: &[f64]) -> Vec<f64> {
    let mx = a.iter().copied().fold(0.0, f64::max);
    let mut e: Vec<f64> = a.iter().map(|v| (v - mx).exp()).collect();
    e.push((-mx).exp());
    let total: f64 = e.iter().sum();
    e.iter().map(|v| v / total).collect()
}

pub fn total_theta_len(blocks: &[Block]) -> usize {
    blocks.iter().map(Block::theta_len).sum()
}

pub fn total_free_len(blocks: &[Block]) -> usize {
    blocks.iter().map(Block::free_len).sum()
}

fn check(blocks: &[Block], v: &[f64], free: bool) -> Result<()> {
    let n = if free { total_free_len(blocks) } else { total_theta_len(blocks) };
    if v.len() != n {
        return Err(Error::shape(format!("expected {n} parameters, got {}", v.len())));
    }
    Ok(())
}

pub fn to_free(blocks: &[Block], theta: &[f64]) -> Result<Vec<f64>> {
    check(blocks, theta, false)?;
    let mut out = Vec::new();
    let mut off = 0;
    for b in blocks {
        let t = &theta[off..off + b.theta_len()];
        match *b {
            Block::Real(_) => out.extend_from_slice(t),
            Block::Positive => out.push(t[0].ln()),
            Block::Unit => out.push((t[0] / (1.0 - t[0])).ln()),
            Block::Above2 => out.push((t[0] - 2.0).ln()),
            Block::Spd(d) | Block::Corr(d) => factor_to_free(cholesky(&symmetrize(&read_matrix(t, d)))?.matrix(), &mut out),
            Block::Simplex(k) => out.extend((0..k - 1).map(|i| (t[i] / t[k - 1]).ln())),
        }
        off += b.theta_len();
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("parameters lie outside the domain of the free coordinates"));
    }
    Ok(out)
}

pub fn from_free(blocks: &[Block], z: &[f64]) -> Result<Vec<f64>> {
    check(blocks, z, true)?;
    let mut out = Vec::new();
    let mut off = 0;
    for b in blocks {
        let f = &z[off..off + b.free_len()];
        match *b {
            Block::Real(_) => out.extend_from_slice(f),
            Block::Positive => out.push(f[0].exp()),
            Block::Unit => out.push(sigmoid(f[0])),
            Block::Above2 => out.push(2.0 + f[0].exp()),
            Block::Spd(d) => {
                let l = factor_from_free(d, f);
                push_matrix(&(&l * l.transpose()), &mut out);
            }
            Block::Corr(d) => {
                let l = factor_from_free(d, f);
                push_matrix(&corr_from_cov(&(&l * l.transpose()))?, &mut out);
            }
            Block::Simplex(_) => out.extend(softmax_last_zero(f)),
        }
        off += b.free_len();
    }
    Ok(out)
}

/// Pulls a θ-cotangent back to free coordinates at `z`.
pub fn pullback(blocks: &[Block], z: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    check(blocks, z, true)?;
    check(blocks, g, false)?;
    let mut out = Vec::new();
    let (mut zo, mut go) = (0, 0);
    for b in blocks {
        let f = &z[zo..zo + b.free_len()];
        let gt = &g[go..go + b.theta_len()];
        match *b {
            Block::Real(_) => out.extend_from_slice(gt),
            Block::Positive => out.push(gt[0] * f[0].exp()),
            Block::Unit => {
                let s = sigmoid(f[0]);
                out.push(gt[0] * s * (1.0 - s));
            }
            Block::Above2 => out.push(gt[0] * f[0].exp()),
            Block::Spd(d) => factor_pullback(&factor_from_free(d, f), &read_matrix(gt, d), &mut out),
            Block::Corr(d) => {
                let l = factor_from_free(d, f);
                let g_sigma = corr_pullback(&(&l * l.transpose()), &read_matrix(gt, d))?;
                factor_pullback(&l, &g_sigma, &mut out);
            }
            Block::Simplex(k) => {
                let pi = softmax_last_zero(f);
                let dot: f64 = pi.iter().zip(gt).map(|(p, q)| p * q).sum();
                out.extend((0..k - 1).map(|i| pi[i] * (gt[i] - dot)));
            }
        }
        zo += b.free_len();
        go += b.theta_len();
    }
    Ok(out)
}

// Tangent coordinates: the minimal linear coordinates of raw θ. Symmetric
// blocks keep one entry per pair (correlations drop the fixed diagonal) and
// weights drop the last entry, which the others determine.

/// Number of tangent coordinates.
pub fn tangent_dim(blocks: &[Block]) -> usize {
    blocks
        .iter()
        .map(|b| match *b {
            Block::Spd(d) => d * (d + 1) / 2,
            Block::Corr(d) => d * (d - 1) / 2,
            Block::Simplex(k) => k - 1,
            _ => b.theta_len(),
        })
        .sum()
}

/// Entries of θ that the minimal coordinates move: upper triangles of
/// covariance blocks, strict upper triangles of correlations, leading weights.
pub fn tangent_values(blocks: &[Block], theta: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut off = 0;
    for b in blocks {
        match *b {
            Block::Spd(d) | Block::Corr(d) => {
                let strict = matches!(b, Block::Corr(_));
                for i in 0..d {
                    for j in i..d {
                        if !(strict && i == j) {
                            out.push(theta[off + i * d + j]);
                        }
                    }
                }
            }
            Block::Simplex(k) => out.extend_from_slice(&theta[off..off + k - 1]),
            other => out.extend_from_slice(&theta[off..off + other.theta_len()]),
        }
        off += b.theta_len();
    }
    out
}

/// Jᵀg for the linear embedding of tangent coordinates into raw θ.
pub fn tangent_project(blocks: &[Block], g: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut off = 0;
    for b in blocks {
        match *b {
            Block::Spd(d) | Block::Corr(d) => {
                let strict = matches!(b, Block::Corr(_));
                for i in 0..d {
                    for j in i..d {
                        if i == j {
                            if !strict {
                                out.push(g[off + i * d + i]);
                            }
                        } else {
                            out.push(g[off + i * d + j] + g[off + j * d + i]);
                        }
                    }
                }
            }
            Block::Simplex(k) => {
                for i in 0..k - 1 {
                    out.push(g[off + i] - g[off + k - 1]);
                }
            }
            _ => out.extend_from_slice(&g[off..off + b.theta_len()]),
        }
        off += b.theta_len();
    }
    out
}

/// J·d: a tangent-coordinate direction written out in raw θ layout.
pub fn tangent_lift(blocks: &[Block], d: &[f64]) -> Vec<f64> {
    let mut out = Vec::new();
    let mut idx = 0;
    for b in blocks {
        match *b {
            Block::Spd(n) | Block::Corr(n) => {
                let strict = matches!(b, Block::Corr(_));
                let mut m = vec![0.0; n * n];
                for i in 0..n {
                    for j in i..n {
                        if i == j && strict {
                            continue;
                        }
                        m[i * n + j] = d[idx];
                        m[j * n + i] = d[idx];
                        idx += 1;
                    }
                }
                out.extend(m);
            }
            Block::Simplex(k) => {
                let head = &d[idx..idx + k - 1];
                out.extend_from_slice(head);
                out.push(-head.iter().sum::<f64>());
                idx += k - 1;
            }
            _ => {
                out.extend_from_slice(&d[idx..idx + b.theta_len()]);
                idx += b.theta_len();
            }
        }
    }
    out
}
