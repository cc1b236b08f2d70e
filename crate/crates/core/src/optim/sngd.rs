use crate::error::{Error, Result};
use crate::expfam::{Family, Parameterization};
use crate::maps::MapKind;

use super::baseline::{AdamConfig, AdamMoments};
use super::{choose_step, norm, Evaluation, Objective, Schedule, StepOutcome, Stepper};

/// How the natural-gradient direction is assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Route {
    /// Pull the target gradient back through g and the dual conversion in one
    /// pass: the plain gradient with respect to the dual parameters.
    #[default]
    Fused,
    /// Gradient with respect to θ̃ first, then the Fisher-inverse product via
    /// the log-partition Hessian.
    Unfused,
}

/// First-order rule for the auxiliary parameters λ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuxRule {
    /// λ ← λ − step · ∇_λ.
    Gd { step: f64 },
    /// λ ← λ − ratio · ε · ∇_λ with ε the θ̃ step actually taken, so λ moves
    /// under the same backtracking or line search as θ̃.
    Shared { ratio: f64 },
    Adam(AdamConfig),
}

impl Default for AuxRule {
    fn default() -> Self {
        AuxRule::Shared { ratio: 1.0 }
    }
}

struct Cached {
    objective: f64,
    direction: Vec<f64>,
    grad_aux: Vec<f64>,
}

/// Surrogate natural gradient descent.
///
/// θ̃ lives in `param` coordinates of the map's surrogate family. The update
/// direction is the gradient of f(g(·)) taken with respect to the *other*
/// parameterization, which equals the Fisher-preconditioned gradient.
pub struct Sngd {
    map: MapKind,
    family: Family,
    param: Parameterization,
    point: Vec<f64>,
    aux: Vec<f64>,
    schedule: Schedule,
    aux_rule: AuxRule,
    route: Route,
    aux_moments: AdamMoments,
    last_step: f64,
    iteration: usize,
    cached: Option<Cached>,
}

fn dual(p: Parameterization) -> Parameterization {
    match p {
        Parameterization::Mean => Parameterization::Natural,
        Parameterization::Natural => Parameterization::Mean,
    }
}

impl Sngd {
    pub fn new(map: MapKind, param: Parameterization, point: Vec<f64>, aux: Vec<f64>, schedule: Schedule) -> Result<Self> {
        let family = map.surrogate();
        family.validate(&point, param)?;
        if !map.domain_check_in(&point, param) {
            return Err(Error::domain(format!("initial point is outside the domain of map {map}")));
        }
        if aux.len() != map.aux_dim() {
            return Err(Error::shape(format!("map {map} takes {} auxiliary parameters, got {}", map.aux_dim(), aux.len())));
        }
        let aux_moments = AdamMoments::new(aux.len());
        Ok(Sngd {
            map,
            family,
            param,
            point,
            aux,
            schedule,
            aux_rule: AuxRule::default(),
            route: Route::default(),
            aux_moments,
            last_step: 0.0,
            iteration: 0,
            cached: None,
        })
    }

    /// Starts from target parameters θ via the map's inverse.
    pub fn from_theta(map: MapKind, param: Parameterization, theta: &[f64], schedule: Schedule) -> Result<Self> {
        let (std, aux) = map.inverse(theta)?;
        let fam = map.surrogate();
        let point = match param {
            Parameterization::Natural => fam.natural_from_std(&std)?,
            Parameterization::Mean => fam.mean_from_std(&std)?,
        };
        Sngd::new(map, param, point, aux, schedule)
    }

    pub fn with_aux_rule(mut self, rule: AuxRule) -> Self {
        self.aux_rule = rule;
        self
    }

    pub fn with_route(mut self, route: Route) -> Self {
        self.route = route;
        self
    }

    pub fn point(&self) -> &[f64] {
        &self.point
    }

    pub fn aux(&self) -> &[f64] {
        &self.aux
    }

    pub fn map(&self) -> &MapKind {
        &self.map
    }

    pub fn parameterization(&self) -> Parameterization {
        self.param
    }

    /// Steps taken so far.
    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// The natural-gradient direction for θ̃ and the plain gradient for λ at the current point.
    pub fn direction(&self, obj: &dyn Objective) -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let theta = self.map.forward_from(&self.point, self.param, &self.aux)?;
        let (f, g) = obj.value_grad(&theta)?;
        let (dir, ga) = self.natural_direction(&g)?;
        Ok((f, dir, ga))
    }

    fn natural_direction(&self, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let other = dual(self.param);
        let w = self.family.convert(&self.point, self.param, other)?;
        match self.route {
            Route::Fused => self.map.pullback_from(&w, other, &self.aux, g),
            Route::Unfused => {
                let (gv, ga) = self.map.pullback_from(&self.point, self.param, &self.aux, g)?;
                let dir = match self.param {
                    Parameterization::Mean => self.family.through_to_mean(&w, &gv)?,
                    Parameterization::Natural => self.family.through_to_natural(&w, &gv)?,
                };
                Ok((dir, ga))
            }
        }
    }

    /// Plain gradient of f(g(θ̃, λ)) with respect to (θ̃, λ).
    pub fn surrogate_gradient(&self, obj: &dyn Objective) -> Result<(Vec<f64>, Vec<f64>)> {
        let theta = self.map.forward_from(&self.point, self.param, &self.aux)?;
        let (_, g) = obj.value_grad(&theta)?;
        self.map.pullback_from(&self.point, self.param, &self.aux, &g)
    }

    fn aux_after(&self, eps: f64, ga: &[f64], fixed: &Option<Vec<f64>>) -> Vec<f64> {
        match (&self.aux_rule, fixed) {
            (AuxRule::Shared { ratio }, _) => self.aux.iter().zip(ga).map(|(l, g)| l - ratio * eps * g).collect(),
            (_, Some(a)) => a.clone(),
            (_, None) => self.aux.clone(),
        }
    }
}

impl Stepper for Sngd {
    fn name(&self) -> &'static str {
        "sngd"
    }

    fn evaluate(&mut self, obj: &dyn Objective) -> Result<Evaluation> {
        let theta = self.map.forward_from(&self.point, self.param, &self.aux)?;
        let (f, g) = obj.value_grad(&theta)?;
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("objective or gradient at the current point".into()));
        }
        let (gv, ga) = self.map.pullback_from(&self.point, self.param, &self.aux, &g)?;
        let (direction, _) = self.natural_direction(&g)?;
        if direction.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("natural gradient".into()));
        }
        let grad_norm = (norm(&gv).powi(2) + norm(&ga).powi(2)).sqrt();
        self.cached = Some(Cached { objective: f, direction, grad_aux: ga });
        Ok(Evaluation { objective: f, grad_norm })
    }

    fn step(&mut self, obj: &dyn Objective) -> Result<StepOutcome> {
        self.schedule.check(obj)?;
        let c = self.cached.take().ok_or_else(|| Error::Config("step called before evaluate".into()))?;
        // rules with their own step size move λ once, independent of ε
        let fixed_aux = match self.aux_rule {
            AuxRule::Gd { step } => Some(self.aux.iter().zip(&c.grad_aux).map(|(l, g)| l - step * g).collect()),
            AuxRule::Adam(cfg) => Some(self.aux_moments.update(&cfg, &self.aux, &c.grad_aux)),
            AuxRule::Shared { .. } => None,
        };
        let candidate =
            |eps: f64| -> Vec<f64> { self.point.iter().zip(&c.direction).map(|(v, d)| v - eps * d).collect() };
        let feasible = |eps: f64| self.map.domain_check_in(&candidate(eps), self.param);
        let phi = |eps: f64| -> Result<f64> {
            if eps == 0.0 && fixed_aux.is_none() {
                return Ok(c.objective);
            }
            let theta = self.map.forward_from(&candidate(eps), self.param, &self.aux_after(eps, &c.grad_aux, &fixed_aux))?;
            obj.value(&theta)
        };
        let out = choose_step(&self.schedule, self.last_step, phi, feasible, !obj.is_stochastic())?;
        let next = candidate(out.step_size);
        let aux = self.aux_after(out.step_size, &c.grad_aux, &fixed_aux);
        self.point = next;
        self.aux = aux;
        self.iteration += 1;
        if out.step_size > 0.0 {
            self.last_step = out.step_size;
        }
        Ok(out)
    }

    fn theta(&self) -> Result<Vec<f64>> {
        self.map.forward_from(&self.point, self.param, &self.aux)
    }
}
