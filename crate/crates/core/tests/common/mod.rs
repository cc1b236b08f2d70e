#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// |a − b| / max(|a|, |b|, floor)
pub fn rel(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

pub fn max_rel(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| rel(*x, *y, floor)).fold(0.0, f64::max)
}

/// Relative error of whole vectors: ‖a − b‖∞ / max(‖a‖∞, ‖b‖∞, floor).
pub fn vec_rel(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let scale = a.iter().chain(b).map(|x| x.abs()).fold(floor, f64::max);
    diff / scale
}

/// Central-difference gradient of a scalar function.
pub fn fd_grad(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let step = h * x[i].abs().max(1.0);
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[i] += step;
            m[i] -= step;
            (f(&p) - f(&m)) / (2.0 * step)
        })
        .collect()
}

/// Central-difference Jacobian, returned as columns: out[j] = ∂f/∂x_j.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> Vec<Vec<f64>> {
    (0..x.len())
        .map(|j| {
            let step = h * x[j].abs().max(1.0);
            let mut p = x.to_vec();
            let mut m = x.to_vec();
            p[j] += step;
            m[j] -= step;
            f(&p).iter().zip(f(&m)).map(|(a, b)| (a - b) / (2.0 * step)).collect()
        })
        .collect()
}

/// Jᵀc from finite-difference columns.
pub fn fd_vjp(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], c: &[f64], h: f64) -> Vec<f64> {
    fd_jacobian(f, x, h)
        .iter()
        .map(|col| col.iter().zip(c).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn random_spd(rng: &mut impl Rng, d: usize, jitter: f64) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    m.transpose() * &m + DMatrix::identity(d, d) * jitter
}

pub fn random_sym(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
    (&m + m.transpose()) * 0.5
}

/// Random vector with symmetric matrix blocks wherever the layout has them.
/// `blocks` lists (offset, d) of each d×d block.
pub fn symmetrize_blocks(v: &mut [f64], blocks: &[(usize, usize)]) {
    for &(off, d) in blocks {
        for i in 0..d {
            for j in 0..i {
                let a = 0.5 * (v[off + i * d + j] + v[off + j * d + i]);
                v[off + i * d + j] = a;
                v[off + j * d + i] = a;
            }
        }
    }
}

/// Composite Simpson rule on [a, b] with n (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// A random direction that keeps θ inside its layout: symmetric matrix
/// blocks, zero correlation diagonals and zero-sum simplex weights.
pub fn feasible_direction(blocks: &[sngd_core::targets::free::Block], rng: &mut impl Rng) -> Vec<f64> {
    use sngd_core::targets::free::Block;
    let mut out = Vec::new();
    for b in blocks {
        match *b {
            Block::Real(n) => out.extend((0..n).map(|_| rng.random_range(-1.0..1.0))),
            Block::Positive | Block::Unit | Block::Above2 => out.push(rng.random_range(-1.0..1.0)),
            Block::Spd(d) => out.extend(random_sym(rng, d).transpose().iter().copied()),
            Block::Corr(d) => {
                let mut m = random_sym(rng, d);
                m.fill_diagonal(0.0);
                out.extend(m.transpose().iter().copied());
            }
            Block::Simplex(k) => {
                let mut w: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..1.0)).collect();
                let mean = w.iter().sum::<f64>() / k as f64;
                w.iter_mut().for_each(|x| *x -= mean);
                out.extend(w);
            }
        }
    }
    out
}
