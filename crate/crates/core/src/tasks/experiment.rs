use std::fmt::Write as _;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::optim::{
    run, Adam, AdamConfig, AuxRule, Gd, LineSearchConfig, NgdExact, NgdExactConfig, Objective, Route, Schedule, Sngd,
    Stepper, Trace,
};
use crate::targets::{LogRegModel, TargetKind};

use super::config::{AuxRuleKind, Cell, DataSource, ExperimentConfig, OptimizerKind, ScheduleKind, TaskKind};
use super::synthetic::{generate, skew_normal_params};
use super::vi::{mix_seed, SeedPolicy, ViObjective};
use super::{initial_theta, Dataset, MleObjective, Reduction};

/// Data shared by every run of an experiment.
#[derive(Debug, Clone)]
pub enum TaskData {
    Mle { target: TargetKind, data: Dataset, truth: Option<Vec<f64>> },
    Vi { model: LogRegModel },
}

/// One (grid cell, seed) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub run_id: String,
    pub cell_index: usize,
    pub cell: Cell,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub spec: RunSpec,
    pub trace: Trace,
    pub theta: Option<Vec<f64>>,
}

/// Every run of the experiment, cells outermost.
pub fn plan(cfg: &ExperimentConfig) -> Vec<RunSpec> {
    let mut out = Vec::new();
    for (c, cell) in cfg.cells().into_iter().enumerate() {
        for &seed in &cfg.seeds {
            out.push(RunSpec { run_id: format!("cell{c}-seed{seed}"), cell_index: c, cell, seed });
        }
    }
    out
}

/// Loads or generates the experiment's data.
pub fn load_task(cfg: &ExperimentConfig) -> Result<TaskData> {
    let map = cfg.map()?;
    let target = map.target();
    match cfg.task.kind {
        TaskKind::Vi => {
            let d = cfg.task.dim;
            let data = cfg.data.clone();
            let (n, seed, reg, weights) = match &data {
                Some(s) => (s.n, s.seed, s.reg, s.weights.clone()),
                None => (60, 0, 1.0, None),
            };
            let w = weights.unwrap_or_else(|| vec![1.0; d]);
            if w.len() != d {
                return Err(Error::Config(format!("data.weights: expected {d} values, got {}", w.len())));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(TaskData::Vi { model: LogRegModel::synthetic(n, &w, reg, &mut rng)? })
        }
        TaskKind::Mle => {
            let spec = cfg.data.as_ref().ok_or_else(|| Error::Config("data: missing section".into()))?;
            match spec.source {
                DataSource::Csv => {
                    let path = spec.path.as_ref().ok_or_else(|| Error::Config("data.path: missing".into()))?;
                    let data = Dataset::load_csv(path, spec.header, target.is_count())?;
                    Ok(TaskData::Mle { target, data, truth: None })
                }
                DataSource::Synthetic => {
                    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, 0xDA7A));
                    let theta = match (&spec.theta, &target) {
                        (Some(t), _) => t.clone(),
                        (None, TargetKind::SkewNormal(d)) => skew_normal_params(*d, &mut rng),
                        (None, _) => {
                            return Err(Error::Config(format!("data.theta: generating parameters for {target} are required")));
                        }
                    };
                    target.validate(&theta).map_err(|e| Error::Config(format!("data.theta: {e}")))?;
                    let syn = generate(&target, &theta, spec.n, mix_seed(spec.seed, 1))?;
                    Ok(TaskData::Mle { target, data: syn.data, truth: Some(theta) })
                }
            }
        }
    }
}

fn reduction(cfg: &ExperimentConfig) -> Reduction {
    if cfg.task.reduction == "mean" {
        Reduction::Mean
    } else {
        Reduction::Sum
    }
}

/// Builds the objective for one run; VI noise is seeded from the run seed.
pub fn build_objective(cfg: &ExperimentConfig, task: &TaskData, seed: u64) -> Result<Box<dyn Objective>> {
    Ok(match task {
        TaskData::Mle { target, data, .. } => Box::new(MleObjective::new(target.clone(), data, reduction(cfg))?),
        TaskData::Vi { model } => {
            Box::new(ViObjective::new(model.clone(), cfg.vi.samples, mix_seed(seed, 2), SeedPolicy::PerIteration)?)
        }
    })
}

/// θ₀ for a run: the same for every optimizer given the seed.
pub fn initial_point(cfg: &ExperimentConfig, task: &TaskData, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 3));
    match task {
        TaskData::Mle { target, data, .. } => initial_theta(target, Some(data), &mut rng),
        TaskData::Vi { .. } => initial_theta(&cfg.map()?.target(), None, &mut rng),
    }
}

pub fn build_stepper(cfg: &ExperimentConfig, cell: &Cell, theta0: &[f64], seed: u64) -> Result<Box<dyn Stepper>> {
    let map = cfg.map()?;
    let target = map.target();
    let o = &cfg.optimizer;
    let schedule = match o.schedule {
        ScheduleKind::Constant => Schedule::Constant(cell.step_size),
        ScheduleKind::LineSearch => Schedule::LineSearch(LineSearchConfig { tol: o.line_search_tol, boundary_fraction: o.boundary_fraction, ..Default::default() }),
    };
    Ok(match o.kind {
        OptimizerKind::Sngd => {
            let rule = match o.aux_rule {
                AuxRuleKind::Gd => AuxRule::Gd { step: cell.aux_step },
                AuxRuleKind::Adam => AuxRule::Adam(AdamConfig::with_lr(cell.aux_step)),
                AuxRuleKind::Shared => AuxRule::Shared { ratio: cell.aux_step },
            };
            let route = if o.unfused { Route::Unfused } else { Route::Fused };
            Box::new(Sngd::from_theta(map, cfg.parameterization()?, theta0, schedule)?.with_aux_rule(rule).with_route(route))
        }
        OptimizerKind::Gd => Box::new(Gd::new(target.blocks(), theta0, schedule)?),
        OptimizerKind::Adam => Box::new(Adam::new(target.blocks(), theta0, AdamConfig::with_lr(cell.lr))?),
        OptimizerKind::NgdExact => {
            let ncfg = NgdExactConfig { samples: o.fisher_samples, ridge: o.ridge, seed: mix_seed(seed, 4) };
            Box::new(NgdExact::new(target, theta0, schedule, ncfg)?)
        }
    })
}

/// Runs one (cell, seed). Setup failures are reported in the trace status.
pub fn execute(cfg: &ExperimentConfig, task: &TaskData, spec: &RunSpec) -> RunResult {
    let setup = || -> Result<(Box<dyn Objective>, Box<dyn Stepper>)> {
        let obj = build_objective(cfg, task, spec.seed)?;
        let theta0 = initial_point(cfg, task, spec.seed)?;
        let stepper = build_stepper(cfg, &spec.cell, &theta0, spec.seed)?;
        Ok((obj, stepper))
    };
    match setup() {
        Ok((mut obj, mut stepper)) => {
            let trace = run(stepper.as_mut(), obj.as_mut(), &cfg.stop_rules(), cfg.output.wall_clock);
            let theta = stepper.theta().ok();
            RunResult { spec: spec.clone(), trace, theta }
        }
        Err(e) => RunResult {
            spec: spec.clone(),
            trace: Trace { rows: Vec::new(), status: crate::optim::Termination::Failed(e) },
            theta: None,
        },
    }
}

pub const TRACE_HEADER: &str = "run_id,iteration,wall_ms,objective,grad_norm,step_size,backtracks";

fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Training-curve CSV: one header line, then one row per iteration with
/// floats written to 17 significant digits.
pub fn trace_csv(run_id: &str, trace: &Trace) -> String {
    let mut out = String::with_capacity(64 * (trace.rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in &trace.rows {
        let _ = writeln!(
            out,
            "{run_id},{},{},{},{},{},{}",
            r.iteration,
            fmt_f64(r.wall_ms),
            fmt_f64(r.objective),
            fmt_f64(r.grad_norm),
            fmt_f64(r.step_size),
            r.backtracks
        );
    }
    out
}

pub fn write_trace_csv(path: &Path, run_id: &str, trace: &Trace) -> Result<()> {
    std::fs::write(path, trace_csv(run_id, trace)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

/// Manifest entry for one run.
#[derive(Debug, Clone, Serialize)]
pub struct ManifestRun {
    pub run_id: String,
    pub cell: usize,
    pub seed: u64,
    pub csv: String,
    pub status: String,
    pub iterations: usize,
    pub final_objective: Option<f64>,
    pub params: std::collections::BTreeMap<&'static str, f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub name: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_cell: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_theta: Option<Vec<f64>>,
    pub config: ExperimentConfig,
    pub runs: Vec<ManifestRun>,
}

impl Manifest {
    pub fn build(cfg: &ExperimentConfig, task: &TaskData, results: &[RunResult]) -> Manifest {
        let cells = cfg.cells();
        let mut curves: Vec<Vec<Vec<f64>>> = vec![Vec::new(); cells.len()];
        let mut runs = Vec::new();
        for r in results {
            curves[r.spec.cell_index].push(r.trace.rows.iter().map(|row| row.objective).collect());
            runs.push(ManifestRun {
                run_id: r.spec.run_id.clone(),
                cell: r.spec.cell_index,
                seed: r.spec.seed,
                csv: format!("{}.csv", r.spec.run_id),
                status: r.trace.status.label(),
                iterations: r.trace.iterations(),
                final_objective: r.trace.last().map(|row| row.objective),
                params: super::config::cell_labels(cfg, &r.spec.cell),
                theta: r.theta.clone(),
            });
        }
        let best_cell = super::config::best_cell(&curves);
        let true_theta = match task {
            TaskData::Mle { truth, .. } => truth.clone(),
            TaskData::Vi { .. } => None,
        };
        Manifest {
            name: cfg.name.clone(),
            ok: results.iter().all(|r| !r.trace.status.is_failure()),
            best_cell,
            true_theta,
            config: cfg.clone(),
            runs,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifests serialize")
    }
}
