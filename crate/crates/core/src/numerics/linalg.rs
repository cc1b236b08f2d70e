//! Dense symmetric-positive-definite kernels on row-major flat storage.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Lower-triangular Cholesky factor with a strictly positive diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular(DMatrix<f64>);

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    /// 2 Σ log L_ii.
    pub fn logdet(&self) -> f64 {
        2.0 * (0..self.dim()).map(|i| self.0[(i, i)].ln()).sum::<f64>()
    }

    /// Solves L y = b.
    pub fn forward(&self, b: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut y = b.clone();
        for i in 0..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.0[(i, k)] * y[k];
            }
            y[i] = s / self.0[(i, i)];
        }
        y
    }

    /// Solves Lᵀ x = y.
    pub fn backward(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.dim();
        let mut x = y.clone();
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in i + 1..n {
                s -= self.0[(k, i)] * x[k];
            }
            x[i] = s / self.0[(i, i)];
        }
        x
    }

    /// L · v
    pub fn mul_vec(&self, v: &DVector<f64>) -> DVector<f64> {
        &self.0 * v
    }
}

/// Cholesky factorization. Fails with [`Error::NotPositiveDefinite`] on the first pivot ≤ 0.
pub fn cholesky(a: &DMatrix<f64>) -> Result<LowerTriangular> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::shape(format!("cholesky of a {}x{} matrix", n, a.ncols())));
    }
    let mut l = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NotPositiveDefinite { pivot: j, value: d });
        }
        let djj = d.sqrt();
        l[(j, j)] = djj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / djj;
        }
    }
    Ok(LowerTriangular(l))
}

/// Symmetric positive-definite matrix together with its Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdMatrix {
    matrix: DMatrix<f64>,
    chol: LowerTriangular,
}

impl SpdMatrix {
    /// Validates symmetry (1e-12 relative) and positive definiteness.
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        let n = matrix.nrows();
        if matrix.ncols() != n || n == 0 {
            return Err(Error::shape(format!("SPD matrix must be square and nonempty, got {}x{}", n, matrix.ncols())));
        }
        let scale = matrix.amax().max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..i {
                if (matrix[(i, j)] - matrix[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::domain(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        let chol = cholesky(&matrix)?;
        Ok(SpdMatrix { matrix, chol })
    }

    /// Replaces the input by ½(A + Aᵀ) before validation.
    pub fn from_symmetrized(matrix: &DMatrix<f64>) -> Result<Self> {
        SpdMatrix::new(symmetrize(matrix))
    }

    /// Reads a row-major d×d block and symmetrizes it.
    pub fn from_flat(values: &[f64], d: usize) -> Result<Self> {
        if values.len() != d * d {
            return Err(Error::shape(format!("expected {} entries for a {d}x{d} matrix, got {}", d * d, values.len())));
        }
        SpdMatrix::from_symmetrized(&read_matrix(values, d))
    }

    pub fn identity(d: usize) -> Self {
        SpdMatrix::new(DMatrix::identity(d, d)).expect("identity is SPD")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn chol(&self) -> &LowerTriangular {
        &self.chol
    }

    pub fn logdet(&self) -> f64 {
        self.chol.logdet()
    }

    /// Solves S x = b.
    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.backward(&self.chol.forward(b))
    }

    /// Solves S X = B column by column.
    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            let col = self.solve(&b.column(j).into_owned());
            out.set_column(j, &col);
        }
        out
    }

    /// S⁻¹, symmetrized.
    pub fn inverse(&self) -> DMatrix<f64> {
        let n = self.dim();
        symmetrize(&self.solve_matrix(&DMatrix::identity(n, n)))
    }

    /// xᵀ S⁻¹ x
    pub fn inv_quad(&self, x: &DVector<f64>) -> f64 {
        self.chol.forward(x).norm_squared()
    }
}

/// Everything `spd_kernels` exposes for one matrix: factor, log-determinant and a solver.
pub fn spd_kernels(s: &SpdMatrix) -> (LowerTriangular, f64, impl Fn(&DVector<f64>) -> DVector<f64> + '_) {
    (s.chol().clone(), s.logdet(), move |b: &DVector<f64>| s.solve(b))
}

/// ½(A + Aᵀ)
pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Row-major d×d block to a matrix.
pub fn read_matrix(values: &[f64], d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(d, d, &values[..d * d])
}

/// Appends a matrix to `out` in row-major order.
pub fn push_matrix(m: &DMatrix<f64>, out: &mut Vec<f64>) {
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(m[(i, j)]);
        }
    }
}

/// Writes a matrix into a row-major slice.
pub fn write_matrix(m: &DMatrix<f64>, out: &mut [f64]) {
    let c = m.ncols();
    for i in 0..m.nrows() {
        for j in 0..c {
            out[i * c + j] = m[(i, j)];
        }
    }
}

/// Solves a dense symmetric positive-definite system, adding no regularization.
pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let l = cholesky(&symmetrize(a))?;
    Ok(l.backward(&l.forward(b)))
}

/// corr(Σ) = D^(−½) Σ D^(−½) with D = diag(Σ); the diagonal is set to exactly 1.
pub fn corr_from_cov(sigma: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    let s: Vec<f64> = (0..n).map(|i| sigma[(i, i)].sqrt()).collect();
    if let Some(i) = s.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        return Err(Error::domain(format!("covariance diagonal entry {i} is not positive")));
    }
    let mut r = DMatrix::from_fn(n, n, |i, j| 0.5 * (sigma[(i, j)] + sigma[(j, i)]) / (s[i] * s[j]));
    r.fill_diagonal(1.0);
    Ok(r)
}

/// Pullback of [`corr_from_cov`]: gΣ = G ⊘ ssᵀ − diag_k(Σⱼ G_kj R_kj / Σ_kk), with G symmetrized.
pub fn corr_pullback(sigma: &DMatrix<f64>, g: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = sigma.nrows();
    let r = corr_from_cov(sigma)?;
    let g = symmetrize(g);
    let s: Vec<f64> = (0..n).map(|i| sigma[(i, i)].sqrt()).collect();
    let mut out = DMatrix::from_fn(n, n, |i, j| g[(i, j)] / (s[i] * s[j]));
    for k in 0..n {
        let acc: f64 = (0..n).map(|j| g[(k, j)] * r[(k, j)]).sum();
        out[(k, k)] -= acc / sigma[(k, k)];
    }
    Ok(out)
}
