use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expfam::Parameterization;
use crate::maps::MapKind;
use crate::optim::{LineSearchConfig, StopRules};

/// A scalar or a grid of values to sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Sweep {
    One(f64),
    Many(Vec<f64>),
}

impl Sweep {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Sweep::One(v) => vec![*v],
            Sweep::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Mle,
    Vi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    Sngd,
    Gd,
    Adam,
    NgdExact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AuxRuleKind {
    Gd,
    Adam,
    Shared,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    Synthetic,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSection {
    pub kind: TaskKind,
    pub map: String,
    #[serde(default = "one")]
    pub components: usize,
    #[serde(default = "one")]
    pub dim: usize,
    /// "mean" or "natural"; defaults to mean for MLE and natural for VI.
    #[serde(default)]
    pub parameterization: Option<String>,
    /// "sum" or "mean".
    #[serde(default = "default_reduction")]
    pub reduction: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    #[serde(default = "default_source")]
    pub source: DataSource,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub header: bool,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Generating parameters; when absent the documented protocol is used.
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    /// Logistic-regression prior precision (VI).
    #[serde(default = "default_reg")]
    pub reg: f64,
    /// Logistic-regression generating weights (VI).
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSection {
    pub kind: OptimizerKind,
    #[serde(default = "default_schedule")]
    pub schedule: ScheduleKind,
    #[serde(default = "default_step")]
    pub step_size: Sweep,
    #[serde(default = "default_lr")]
    pub lr: Sweep,
    #[serde(default = "default_aux_rule")]
    pub aux_rule: AuxRuleKind,
    #[serde(default = "default_lr")]
    pub aux_step: Sweep,
    #[serde(default)]
    pub unfused: bool,
    #[serde(default = "default_fisher_samples")]
    pub fisher_samples: usize,
    #[serde(default = "default_ridge")]
    pub ridge: f64,
    #[serde(default = "default_ls_tol")]
    pub line_search_tol: f64,
    /// Share of the largest feasible step taken when the line search runs
    /// into the domain boundary.
    #[serde(default = "default_boundary_fraction")]
    pub boundary_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViSection {
    #[serde(default = "default_vi_samples")]
    pub samples: usize,
    #[serde(default = "default_eval_samples")]
    pub eval_samples: usize,
}

impl Default for ViSection {
    fn default() -> Self {
        ViSection { samples: default_vi_samples(), eval_samples: default_eval_samples() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSection {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_grad_tol")]
    pub grad_norm_tol: f64,
    #[serde(default = "default_rel_tol")]
    pub rel_obj_tol: f64,
}

impl Default for StopSection {
    fn default() -> Self {
        StopSection { max_iters: default_max_iters(), grad_norm_tol: default_grad_tol(), rel_obj_tol: default_rel_tol() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    /// Wall-clock timestamps make CSVs differ between otherwise identical runs.
    #[serde(default)]
    pub wall_clock: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: default_out(), wall_clock: false }
    }
}

/// A whole experiment: one task, one optimizer, a grid of hyperparameters and a set of seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_name")]
    pub name: String,
    /// Run seeds; every grid cell is run once per seed.
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    pub task: TaskSection,
    #[serde(default)]
    pub data: Option<DataSection>,
    pub optimizer: OptimizerSection,
    #[serde(default)]
    pub vi: ViSection,
    #[serde(default)]
    pub stop: StopSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn one() -> usize {
    1
}
fn default_reduction() -> String {
    "sum".into()
}
fn default_source() -> DataSource {
    DataSource::Synthetic
}
fn default_n() -> usize {
    1000
}
fn default_reg() -> f64 {
    1.0
}
fn default_schedule() -> ScheduleKind {
    ScheduleKind::Constant
}
fn default_step() -> Sweep {
    Sweep::One(0.1)
}
fn default_lr() -> Sweep {
    Sweep::One(1e-2)
}
fn default_aux_rule() -> AuxRuleKind {
    AuxRuleKind::Adam
}
fn default_fisher_samples() -> usize {
    10_000
}
fn default_ridge() -> f64 {
    1e-8
}
fn default_ls_tol() -> f64 {
    LineSearchConfig::default().tol
}
fn default_boundary_fraction() -> f64 {
    crate::optim::INTERIOR_FRACTION
}
fn default_vi_samples() -> usize {
    20
}
fn default_eval_samples() -> usize {
    1000
}
fn default_max_iters() -> usize {
    StopRules::default().max_iters
}
fn default_grad_tol() -> f64 {
    StopRules::default().grad_norm_tol
}
fn default_rel_tol() -> f64 {
    StopRules::default().rel_obj_tol
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_name() -> String {
    "experiment".into()
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// Hyperparameters of one grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Cell {
    pub step_size: f64,
    pub lr: f64,
    pub aux_step: f64,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Parses `text` after applying `key.path=value` overrides.
    pub fn from_toml_with(text: &str, overrides: &[String]) -> Result<Self> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: ExperimentConfig =
            toml::Value::Table(table).try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_with(&text, overrides)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize")
    }

    pub fn map(&self) -> Result<MapKind> {
        MapKind::from_id(&self.task.map, self.task.components, self.task.dim)
            .map_err(|e| match e {
                Error::Config(m) => Error::Config(format!("task.map: {m}")),
                other => Error::Config(format!("task.map: {other}")),
            })
    }

    pub fn parameterization(&self) -> Result<Parameterization> {
        match self.task.parameterization.as_deref() {
            None => Ok(match self.task.kind {
                TaskKind::Mle => Parameterization::Mean,
                TaskKind::Vi => Parameterization::Natural,
            }),
            Some("mean") => Ok(Parameterization::Mean),
            Some("natural") => Ok(Parameterization::Natural),
            Some(other) => Err(Error::Config(format!("task.parameterization: expected 'mean' or 'natural', got '{other}'"))),
        }
    }

    pub fn stop_rules(&self) -> StopRules {
        StopRules { max_iters: self.stop.max_iters, grad_norm_tol: self.stop.grad_norm_tol, rel_obj_tol: self.stop.rel_obj_tol }
    }

    /// The cross product of every swept hyperparameter, in a fixed order.
    pub fn cells(&self) -> Vec<Cell> {
        let o = &self.optimizer;
        let mut out = Vec::new();
        for step_size in o.step_size.values() {
            for lr in o.lr.values() {
                for aux_step in o.aux_step.values() {
                    out.push(Cell { step_size, lr, aux_step });
                }
            }
        }
        out
    }

    fn check(&self) -> Result<()> {
        let map = self.map()?;
        self.parameterization()?;
        if !matches!(self.task.reduction.as_str(), "sum" | "mean") {
            return Err(Error::Config(format!("task.reduction: expected 'sum' or 'mean', got '{}'", self.task.reduction)));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("seeds: at least one seed is needed".into()));
        }
        for (key, sweep) in [("optimizer.step_size", &self.optimizer.step_size), ("optimizer.lr", &self.optimizer.lr), ("optimizer.aux_step", &self.optimizer.aux_step)] {
            let v = sweep.values();
            if v.is_empty() {
                return Err(Error::Config(format!("{key}: grid is empty")));
            }
            if v.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
                return Err(Error::Config(format!("{key}: values must be finite and nonnegative")));
            }
        }
        let f = self.optimizer.boundary_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(Error::Config(format!("optimizer.boundary_fraction: expected a value in (0, 1], got {f}")));
        }
        match self.task.kind {
            TaskKind::Vi => {
                if !matches!(map, MapKind::ViNormalIdentity(_)) {
                    return Err(Error::Config(format!("task.map: VI supports vi-normal-identity only, got '{}'", self.task.map)));
                }
                if self.optimizer.schedule == ScheduleKind::LineSearch {
                    return Err(Error::Config("optimizer.schedule: line search needs a deterministic objective".into()));
                }
            }
            TaskKind::Mle => {
                if matches!(map, MapKind::ViNormalIdentity(_)) {
                    return Err(Error::Config("task.map: vi-normal-identity belongs to VI tasks".into()));
                }
                let data = self.data.as_ref().ok_or_else(|| Error::Config("data: MLE tasks need a [data] section".into()))?;
                if data.source == DataSource::Csv && data.path.is_none() {
                    return Err(Error::Config("data.path: required when data.source = \"csv\"".into()));
                }
            }
        }
        Ok(())
    }
}

/// Sets `a.b.c = value` in `table`. The value is read as TOML, falling back to a string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => toml::Value::String(raw.to_string()),
    };
    let parts: Vec<&str> = key.split('.').collect();
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| Error::Config(format!("override '{key}': '{p}' is not a section")))?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

/// Picks the grid cell with the best average over iterations of the worst
/// value over seeds. `curves[c][s]` is the objective curve of cell c, seed s;
/// shorter curves are held at their last value. Lower is better.
pub fn best_cell(curves: &[Vec<Vec<f64>>]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (c, seeds) in curves.iter().enumerate() {
        let len = seeds.iter().map(Vec::len).max().unwrap_or(0);
        if len == 0 || seeds.iter().any(Vec::is_empty) {
            continue;
        }
        let mut total = 0.0;
        for t in 0..len {
            let worst = seeds
                .iter()
                .map(|curve| curve[t.min(curve.len() - 1)])
                .fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || a.is_nan() { f64::NAN } else { a.max(b) });
            total += worst;
        }
        let score = total / len as f64;
        if score.is_nan() {
            continue;
        }
        if best.is_none_or(|(_, s)| score < s) {
            best = Some((c, score));
        }
    }
    best.map(|(c, _)| c)
}

/// Named values used to label a cell in manifests.
pub fn cell_labels(cfg: &ExperimentConfig, cell: &Cell) -> BTreeMap<&'static str, f64> {
    let mut out = BTreeMap::new();
    match cfg.optimizer.kind {
        OptimizerKind::Adam => {
            out.insert("lr", cell.lr);
        }
        _ => {
            if cfg.optimizer.schedule == ScheduleKind::Constant {
                out.insert("step_size", cell.step_size);
            }
        }
    }
    if cfg.optimizer.kind == OptimizerKind::Sngd && cfg.map().is_ok_and(|m| m.aux_dim() > 0) {
        out.insert("aux_step", cell.aux_step);
    }
    out
}
