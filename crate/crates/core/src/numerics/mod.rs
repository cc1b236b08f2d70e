//! Special functions and dense SPD linear algebra shared by every other module.

mod linalg;
mod special;

pub use linalg::{
    cholesky, corr_from_cov, corr_pullback, push_matrix, read_matrix, solve_spd, spd_kernels, symmetrize, write_matrix,
    LowerTriangular, SpdMatrix,
};
pub use special::{
    beta_reg, digamma, gaussian_functions, lgamma, log_gamma_family, log_minus_digamma, log_sum_exp, norm_cdf,
    norm_inv_mills, norm_log_cdf, norm_log_pdf, norm_quantile, sigmoid, softplus, student_t_cdf,
    student_t_functions, student_t_log_pdf, student_t_quantile, trigamma, trigamma_minus_inv, LogGammaFamily,
};
pub(crate) use special::{LN_2PI, LN_TWO};
