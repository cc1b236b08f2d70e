use crate::error::Result;
use crate::expfam::Family;
use crate::optim::Objective;
use crate::targets::TargetKind;

/// f(θ) = KL(q_η(θ) ‖ q_η*) over the standard form θ of an exponential family.
#[derive(Debug, Clone)]
pub struct KlObjective {
    target: TargetKind,
    family: Family,
    eta_star: Vec<f64>,
}

impl KlObjective {
    pub fn new(family: Family, eta_star: Vec<f64>) -> Result<Self> {
        family.validate_natural(&eta_star)?;
        Ok(KlObjective { target: TargetKind::ExpFamily(family.clone()), family, eta_star })
    }
}

impl Objective for KlObjective {
    fn dim(&self) -> usize {
        self.family.std_dim()
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        let eta = self.family.natural_from_std(theta)?;
        self.family.kl(&eta, &self.eta_star)
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let eta = self.family.natural_from_std(theta)?;
        let f = self.family.kl(&eta, &self.eta_star)?;
        // ∇_η KL = ∇²A(η)(η − η*)
        let diff: Vec<f64> = eta.iter().zip(&self.eta_star).map(|(a, b)| a - b).collect();
        let g_eta = self.family.through_to_mean(&eta, &diff)?;
        Ok((f, self.family.natural_from_std_vjp(theta, &g_eta)?))
    }

    fn target(&self) -> Option<&TargetKind> {
        Some(&self.target)
    }
}
