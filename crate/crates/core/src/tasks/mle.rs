use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::optim::Objective;
use crate::targets::TargetKind;

use super::Dataset;

/// Whether the negative log-likelihood is summed or averaged over rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Reduction {
    #[default]
    Sum,
    Mean,
}

/// f(θ) = −Σᵢ log q_θ(xᵢ), or its average.
///
/// Repeated rows are evaluated once with a multiplicity weight, which makes
/// count data with few distinct values cheap.
#[derive(Debug, Clone)]
pub struct MleObjective {
    target: TargetKind,
    rows: Vec<Vec<f64>>,
    weights: Vec<f64>,
    scale: f64,
}

impl MleObjective {
    pub fn new(target: TargetKind, data: &Dataset, reduction: Reduction) -> Result<Self> {
        if data.rows() == 0 {
            return Err(Error::Config("the dataset is empty".into()));
        }
        if data.cols() != target.obs_dim() {
            return Err(Error::shape(format!(
                "{target} observes {} values per row, the dataset has {}",
                target.obs_dim(),
                data.cols()
            )));
        }
        check_support(&target, data)?;
        let mut counts: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
        for row in data.iter_rows() {
            *counts.entry(row.iter().map(|v| v.to_bits()).collect()).or_insert(0.0) += 1.0;
        }
        let (rows, weights) =
            counts.into_iter().map(|(k, w)| (k.into_iter().map(f64::from_bits).collect::<Vec<_>>(), w)).unzip();
        let scale = match reduction {
            Reduction::Sum => 1.0,
            Reduction::Mean => 1.0 / data.rows() as f64,
        };
        Ok(MleObjective { target, rows, weights, scale })
    }

    pub fn distinct_rows(&self) -> usize {
        self.rows.len()
    }
}

fn check_support(target: &TargetKind, data: &Dataset) -> Result<()> {
    let bad = |i: usize, what: &str| Err(Error::domain(format!("row {} lies outside the support of {target}: {what}", i + 1)));
    for (i, row) in data.iter_rows().enumerate() {
        match target {
            t if t.is_count() => {
                if row.iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                    return bad(i, "expected nonnegative integers");
                }
            }
            TargetKind::GaussianCopula(_) | TargetKind::TCopula(_) => {
                if row.iter().any(|v| !(*v > 0.0 && *v < 1.0)) {
                    return bad(i, "expected values in (0, 1)");
                }
            }
            _ => {}
        }
    }
    Ok(())
}

impl Objective for MleObjective {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let prep = self.target.prepare(theta)?;
        let mut total = 0.0;
        for (x, w) in self.rows.iter().zip(&self.weights) {
            total += w * prep.eval(x, 0.0, None)?;
        }
        Ok(-self.scale * total)
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let prep = self.target.prepare(theta)?;
        let mut acc = vec![0.0; self.target.dim()];
        let mut total = 0.0;
        for (x, w) in self.rows.iter().zip(&self.weights) {
            total += w * prep.eval(x, *w, Some(&mut acc))?;
        }
        let g = prep.finish(acc)?;
        Ok((-self.scale * total, g.into_iter().map(|v| -self.scale * v).collect()))
    }

    fn target(&self) -> Option<&TargetKind> {
        Some(&self.target)
    }
}
