use crate::error::Result;

/// Worst coordinate of an analytic-vs-central-difference comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub worst_index: usize,
    pub worst_error: f64,
    pub analytic: Vec<f64>,
    pub numeric: Vec<f64>,
    pub passed: bool,
}

/// Compares `grad` against central differences of `f` at `theta`.
///
/// Coordinate i is perturbed by step · max(1, |θᵢ|). The error per coordinate
/// is |a − n| / max(|a|, |n|, floor) with floor = 1e-3, so coordinates whose
/// true derivative is zero are judged on an absolute scale.
pub fn grad_check(
    f: impl Fn(&[f64]) -> Result<f64>,
    grad: &[f64],
    theta: &[f64],
    step: f64,
    tolerance: f64,
) -> Result<GradCheckReport> {
    let mut numeric = Vec::with_capacity(theta.len());
    let mut x = theta.to_vec();
    for i in 0..theta.len() {
        let h = step * theta[i].abs().max(1.0);
        x[i] = theta[i] + h;
        let fp = f(&x)?;
        x[i] = theta[i] - h;
        let fm = f(&x)?;
        x[i] = theta[i];
        numeric.push((fp - fm) / (2.0 * h));
    }
    let mut worst_index = 0;
    let mut worst_error = 0.0f64;
    for (i, (a, n)) in grad.iter().zip(&numeric).enumerate() {
        let e = (a - n).abs() / a.abs().max(n.abs()).max(1e-3);
        if !(e <= worst_error) {
            worst_error = e;
            worst_index = i;
        }
    }
    if grad.len() != numeric.len() {
        worst_error = f64::INFINITY;
    }
    Ok(GradCheckReport { worst_index, worst_error, analytic: grad.to_vec(), numeric, passed: worst_error <= tolerance })
}
