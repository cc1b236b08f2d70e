//! Optimizers, the run loop and the finite-difference gradient checker.

mod baseline;
mod gradcheck;
mod linesearch;
mod sngd;

use std::time::Instant;

pub use baseline::{Adam, AdamConfig, Gd, NgdExact, NgdExactConfig};
pub use gradcheck::{grad_check, GradCheckReport};
pub use linesearch::{exact_line_search, LineSearchConfig, LineSearchResult, INTERIOR_FRACTION};
pub use sngd::{AuxRule, Route, Sngd};

use crate::error::{Error, Result};
use crate::targets::TargetKind;
use linesearch::recoverable;

/// Halvings allowed before a step is declared unrecoverable.
pub const MAX_HALVINGS: usize = 30;

/// A scalar objective over target parameters θ.
pub trait Objective: Send + Sync {
    /// Length of θ.
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> Result<f64>;

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)>;

    /// Stochastic objectives draw fresh Monte Carlo noise per iteration.
    fn is_stochastic(&self) -> bool {
        false
    }

    /// Called by the run loop before each iteration's evaluation.
    fn reseed(&mut self, _iteration: usize) {}

    /// The distribution whose parameters θ are; needed by the exact-Fisher baseline.
    fn target(&self) -> Option<&TargetKind> {
        None
    }
}

/// An objective from a pair of closures, mostly for tests.
pub struct FnObjective<F, G> {
    dim: usize,
    f: F,
    g: G,
}

impl<F, G> FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    pub fn new(dim: usize, f: F, g: G) -> Self {
        FnObjective { dim, f, g }
    }
}

impl<F, G> Objective for FnObjective<F, G>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> Result<f64> {
        Ok((self.f)(theta))
    }

    fn value_grad(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok(((self.f)(theta), (self.g)(theta)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant(f64),
    LineSearch(LineSearchConfig),
}

impl Schedule {
    fn check(&self, obj: &dyn Objective) -> Result<()> {
        match self {
            Schedule::Constant(e) if !(*e >= 0.0 && e.is_finite()) => {
                Err(Error::Config(format!("step size must be finite and nonnegative, got {e}")))
            }
            Schedule::LineSearch(_) if obj.is_stochastic() => {
                Err(Error::Config("exact line search needs a deterministic objective".into()))
            }
            _ => Ok(()),
        }
    }
}

/// What an optimizer reports about its current point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub objective: f64,
    pub grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub step_size: f64,
    pub backtracks: usize,
}

pub trait Stepper {
    fn name(&self) -> &'static str;

    /// Evaluates objective and gradient at the current point and caches the
    /// search direction for the next [`Stepper::step`].
    fn evaluate(&mut self, obj: &dyn Objective) -> Result<Evaluation>;

    /// Moves along the cached direction.
    fn step(&mut self, obj: &dyn Objective) -> Result<StepOutcome>;

    /// Current target parameters.
    fn theta(&self) -> Result<Vec<f64>>;
}

/// Picks a step along a fixed direction: either a constant step halved until
/// the candidate is feasible, or an exact line search.
pub(crate) fn choose_step(
    schedule: &Schedule,
    last_step: f64,
    phi: impl Fn(f64) -> Result<f64>,
    feasible: impl Fn(f64) -> bool,
    deterministic: bool,
) -> Result<StepOutcome> {
    match schedule {
        Schedule::Constant(e) => {
            let mut eps = *e;
            let mut backtracks = 0;
            if eps == 0.0 {
                return Ok(StepOutcome { step_size: 0.0, backtracks });
            }
            loop {
                let ok = feasible(eps)
                    && (!deterministic
                        || match phi(eps) {
                            Ok(v) => v.is_finite(),
                            Err(e) if recoverable(&e) => false,
                            Err(e) => return Err(e),
                        });
                if ok {
                    return Ok(StepOutcome { step_size: eps, backtracks });
                }
                if backtracks == MAX_HALVINGS {
                    return Err(Error::BacktrackExhausted { halvings: MAX_HALVINGS });
                }
                eps *= 0.5;
                backtracks += 1;
            }
        }
        Schedule::LineSearch(cfg) => {
            let cfg = LineSearchConfig { initial: if last_step > 0.0 { last_step } else { cfg.initial }, ..*cfg };
            let r = exact_line_search(phi, feasible, &cfg)?;
            Ok(StepOutcome { step_size: r.step, backtracks: r.backtracks })
        }
    }
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Stopping rules checked after every iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopRules {
    pub max_iters: usize,
    /// Stop once the reported gradient norm is at most this.
    pub grad_norm_tol: f64,
    /// Stop once |f_t − f_{t−1}| ≤ tol · |f_{t−1}|; zero disables the rule.
    pub rel_obj_tol: f64,
}

impl Default for StopRules {
    fn default() -> Self {
        StopRules { max_iters: 10_000, grad_norm_tol: 1e-8, rel_obj_tol: 1e-12 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub wall_ms: f64,
    pub objective: f64,
    pub grad_norm: f64,
    pub step_size: f64,
    pub backtracks: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    GradNorm,
    RelativeObjective,
    MaxIters,
    /// The line search found no decrease: the direction is at round-off level.
    Stalled,
    Failed(Error),
}

impl Termination {
    pub fn is_failure(&self) -> bool {
        matches!(self, Termination::Failed(_))
    }

    pub fn label(&self) -> String {
        match self {
            Termination::GradNorm => "grad_norm".into(),
            Termination::RelativeObjective => "rel_obj".into(),
            Termination::MaxIters => "max_iters".into(),
            Termination::Stalled => "stalled".into(),
            Termination::Failed(e) => format!("failed: {e}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub rows: Vec<TraceRow>,
    pub status: Termination,
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn iterations(&self) -> usize {
        self.rows.last().map_or(0, |r| r.iteration)
    }
}

/// Runs `stepper` until a stopping rule fires. Errors end the run and are
/// recorded in the trace status alongside the rows gathered so far.
pub fn run(stepper: &mut dyn Stepper, obj: &mut dyn Objective, stop: &StopRules, wall_clock: bool) -> Trace {
    let start = Instant::now();
    let elapsed = || if wall_clock { start.elapsed().as_secs_f64() * 1e3 } else { 0.0 };
    let mut rows = Vec::new();
    let fail = |rows: Vec<TraceRow>, e: Error| Trace { rows, status: Termination::Failed(e) };

    obj.reseed(0);
    let mut eval = match stepper.evaluate(obj) {
        Ok(e) => e,
        Err(e) => return fail(rows, e),
    };
    rows.push(TraceRow {
        iteration: 0,
        wall_ms: elapsed(),
        objective: eval.objective,
        grad_norm: eval.grad_norm,
        step_size: 0.0,
        backtracks: 0,
    });
    if eval.grad_norm <= stop.grad_norm_tol {
        return Trace { rows, status: Termination::GradNorm };
    }
    for t in 1..=stop.max_iters {
        let out = match stepper.step(obj) {
            Ok(o) => o,
            Err(Error::NoDecrease) => return Trace { rows, status: Termination::Stalled },
            Err(e) => return fail(rows, e),
        };
        obj.reseed(t);
        let prev = eval.objective;
        eval = match stepper.evaluate(obj) {
            Ok(e) => e,
            Err(e) => return fail(rows, e),
        };
        rows.push(TraceRow {
            iteration: t,
            wall_ms: elapsed(),
            objective: eval.objective,
            grad_norm: eval.grad_norm,
            step_size: out.step_size,
            backtracks: out.backtracks,
        });
        if eval.grad_norm <= stop.grad_norm_tol {
            return Trace { rows, status: Termination::GradNorm };
        }
        if stop.rel_obj_tol > 0.0 && (eval.objective - prev).abs() <= stop.rel_obj_tol * prev.abs() {
            return Trace { rows, status: Termination::RelativeObjective };
        }
    }
    Trace { rows, status: Termination::MaxIters }
}
