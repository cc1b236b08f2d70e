//! Finite-difference gradient suites and the measurements behind the
//! acceptance properties, shared by the `sngd` binary and the test suite.

mod criteria;
mod gradients;

pub use criteria::{
    criterion_families, domain_safety, dual_gradient_identity, kl_single_step, log_partition_checks, logreg_map,
    negbin_desk, parameter_recovery, pulled_back_norm, round_trips, single_step_mle, standard_errors, vi_sanity,
    DeskRun, DomainSafety, Measure, Recovery, ViSanity, SNGD_DESK_TOL, RECOVERY_TOL,
};
pub use gradients::{gradient_suite, suite_maps, suite_targets, Fault, GradItem, Scope, GRAD_STEP, GRAD_TOLERANCE};

use crate::error::Result;

/// One summarized property check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub id: usize,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

fn worst(ms: &[Measure]) -> f64 {
    ms.iter().map(|m| m.value).fold(0.0, f64::max)
}

fn check(id: usize, name: &'static str, r: Result<(bool, String)>) -> Check {
    match r {
        Ok((passed, detail)) => Check { id, name, passed, detail },
        Err(e) => Check { id, name, passed: false, detail: format!("error: {e}") },
    }
}

/// Runs every property check with its documented tolerance.
pub fn run_all() -> Vec<Check> {
    let mut out = Vec::new();
    out.push(check(1, "dual-gradient identity", dual_gradient_identity(100_000, 1).map(|m| {
        let w = worst(&m);
        (w <= 0.05, format!("worst per-coordinate relative error {w:.3e} (tolerance 5e-2)"))
    })));
    out.push(check(2, "single-step MLE", single_step_mle().map(|m| {
        let w = worst(&m);
        (w <= 1e-8, format!("worst relative error {w:.3e} (tolerance 1e-8)"))
    })));
    out.push(check(3, "KL single step", kl_single_step().map(|m| {
        let w = worst(&m);
        (w <= 1e-8, format!("worst relative error {w:.3e} (tolerance 1e-8)"))
    })));
    out.push(check(4, "dual round trips", round_trips(100).map(|m| {
        let w = worst(&m);
        (w <= 1e-9, format!("worst error {w:.3e} (tolerance 1e-9)"))
    })));
    out.push(check(5, "log-partition gradient and symmetry", log_partition_checks(20).map(|v| {
        let g = v.iter().map(|x| x.1).fold(0.0, f64::max);
        let s = v.iter().map(|x| x.2).fold(0.0, f64::max);
        (g <= 1e-5 && s <= 1e-9, format!("gradient error {g:.3e} (1e-5), asymmetry {s:.3e} (1e-9)"))
    })));
    out.push(check(6, "gradient suite", gradient_suite(Scope::All, 10, None).map(|items| {
        let w = items.iter().map(|i| i.worst_error).fold(0.0, f64::max);
        (items.iter().all(GradItem::passed), format!("{} items, worst relative error {w:.3e} (tolerance 1e-4)", items.len()))
    })));
    let seeds: Vec<u64> = (0..10).collect();
    let desk = negbin_desk(&seeds, 5000, 1e-6);
    out.push(check(7, "negbin desk experiment", desk.as_ref().map_err(Clone::clone).map(|runs| {
        let ok = runs.iter().all(|r| matches!((r.sngd_iters, r.gd_iters), (Some(s), Some(g)) if s <= 5 && g > s));
        let worst_sngd = runs.iter().map(|r| r.sngd_iters.map_or(usize::MAX, |v| v)).max().unwrap_or(0);
        let fewest_gd = runs.iter().map(|r| r.gd_iters.map_or(usize::MAX, |v| v)).min().unwrap_or(0);
        (ok, format!("SNGD at most {worst_sngd} iterations, GD at least {fewest_gd}"))
    })));
    let recovery = parameter_recovery();
    out.push(check(8, "parameter recovery", recovery.as_ref().map_err(Clone::clone).map(|rs| {
        let z = rs.iter().map(|r| r.max_z).fold(0.0, f64::max);
        (z <= 3.0, format!("largest |error|/SE {z:.2} (tolerance 3)"))
    })));
    out.push(check(9, "domain safety", domain_safety(100).map(|d| {
        (d.violations == 0 && d.backtracks >= 1, format!("{} violations, {} backtracks over {} starts", d.violations, d.backtracks, d.trials))
    })));
    out.push(check(10, "VI sanity", vi_sanity(&seeds, 200, 0.1, 100, 1000).map(|v| {
        let ok = v.failures == 0 && v.median_final < v.median_initial && v.max_mean_gap <= 0.1;
        (ok, format!(
            "median negative ELBO {:.4} -> {:.4}, largest |m - MAP| {:.3e} (tolerance 0.1)",
            v.median_initial, v.median_final, v.max_mean_gap
        ))
    })));
    let stationarity = || -> Result<(bool, String)> {
        let mut ratios: Vec<f64> = Vec::new();
        let mut converged = true;
        for r in desk.as_ref().map_err(Clone::clone)? {
            converged &= r.sngd_status == crate::optim::Termination::GradNorm;
            ratios.push(r.pulled_back_norm / r.grad_norm_tol);
        }
        for r in recovery.as_ref().map_err(Clone::clone)? {
            converged &= r.status == crate::optim::Termination::GradNorm;
            ratios.push(r.pulled_back_norm / r.grad_norm_tol);
        }
        let w = ratios.iter().copied().fold(0.0, f64::max);
        Ok((converged && w <= 10.0, format!("largest pulled-back norm / tolerance {w:.3} (tolerance 10), all converged: {converged}")))
    };
    out.push(check(11, "target-space stationarity", stationarity()));
    out
}
