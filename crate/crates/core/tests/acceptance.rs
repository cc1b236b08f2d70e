//! Acceptance properties. Runs as a plain binary so that every criterion
//! prints one PASS/FAIL line in ordinary `cargo test` output.

use std::process::ExitCode;
use std::thread;
use std::time::{Duration, Instant};

use sngd_core::optim::Termination;
use sngd_core::selfcheck::{
    domain_safety, dual_gradient_identity, gradient_suite, kl_single_step, log_partition_checks, negbin_desk,
    parameter_recovery, round_trips, single_step_mle, vi_sanity, DeskRun, Measure, Recovery, Scope,
};

// Tolerances, one per criterion.
const DUAL_IDENTITY_REL: f64 = 0.05;
const DUAL_IDENTITY_SAMPLES: usize = 100_000;
const DUAL_IDENTITY_SEED: u64 = 1;
const SINGLE_STEP_REL: f64 = 1e-8;
const KL_STEP_REL: f64 = 1e-8;
const ROUND_TRIP_TOL: f64 = 1e-9;
const ROUND_TRIP_POINTS: usize = 100;
const LOG_PARTITION_GRAD_TOL: f64 = 1e-5;
const HESSIAN_SYMMETRY_TOL: f64 = 1e-9;
const GRADIENT_SUITE_TOL: f64 = 1e-4;
const GRADIENT_SUITE_POINTS: usize = 10;
const DESK_N: usize = 5000;
const DESK_NLL_TOL: f64 = 1e-6;
const DESK_MAX_SNGD_ITERS: usize = 5;
const DESK_SEEDS: u64 = 10;
const RECOVERY_SE: f64 = 3.0;
const DOMAIN_TRIALS: usize = 100;
const VI_SEEDS: u64 = 10;
const VI_ITERS: usize = 200;
const VI_EVAL_SAMPLES: usize = 1000;
const VI_TRAIN_SAMPLES: usize = 100;
const VI_STEP: f64 = 0.1;
const VI_MAP_GAP: f64 = 0.1;
const STATIONARITY_FACTOR: f64 = 10.0;
const SUITE_BUDGET: Duration = Duration::from_secs(300);

struct Line {
    id: usize,
    passed: bool,
    detail: String,
    elapsed: Duration,
    budget: Duration,
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let t = Instant::now();
    let v = f();
    (v, t.elapsed())
}

fn worst(ms: &[Measure]) -> (f64, String) {
    ms.iter().fold((0.0, String::new()), |(w, l), m| if m.value > w { (m.value, m.label.clone()) } else { (w, l) })
}

fn line(id: usize, budget_s: u64, elapsed: Duration, r: sngd_core::Result<(bool, String)>) -> Line {
    let budget = Duration::from_secs(budget_s);
    let (passed, detail) = match r {
        Ok((p, d)) => (p && elapsed < budget, d),
        Err(e) => (false, format!("error: {e}")),
    };
    Line { id, passed, detail, elapsed, budget }
}

fn c1() -> Line {
    let (r, t) = timed(|| dual_gradient_identity(DUAL_IDENTITY_SAMPLES, DUAL_IDENTITY_SEED));
    line(1, 5, t, r.map(|m| {
        let (w, at) = worst(&m);
        (w <= DUAL_IDENTITY_REL, format!("dual-gradient identity: worst per-coordinate relative error {w:.3e} ({at})"))
    }))
}

fn c2() -> Line {
    let (r, t) = timed(single_step_mle);
    line(2, 1, t, r.map(|m| {
        let (w, at) = worst(&m);
        (w <= SINGLE_STEP_REL, format!("single-step MLE: worst relative error {w:.3e} ({at})"))
    }))
}

fn c3() -> Line {
    let (r, t) = timed(kl_single_step);
    line(3, 1, t, r.map(|m| {
        let (w, at) = worst(&m);
        (w <= KL_STEP_REL, format!("KL single step: worst relative error {w:.3e} ({at})"))
    }))
}

fn c4() -> Line {
    let (r, t) = timed(|| round_trips(ROUND_TRIP_POINTS));
    line(4, 5, t, r.map(|m| {
        let (w, at) = worst(&m);
        let families = m.iter().map(|x| x.label.as_str()).collect::<Vec<_>>().join(", ");
        (w <= ROUND_TRIP_TOL, format!("round trips over [{families}]: worst error {w:.3e} ({at})"))
    }))
}

fn c5() -> Line {
    let (r, t) = timed(|| log_partition_checks(20));
    line(5, 5, t, r.map(|v| {
        let g = v.iter().map(|x| x.1).fold(0.0, f64::max);
        let s = v.iter().map(|x| x.2).fold(0.0, f64::max);
        (g <= LOG_PARTITION_GRAD_TOL && s <= HESSIAN_SYMMETRY_TOL, format!("grad A vs mean: {g:.3e}; Hessian asymmetry: {s:.3e}"))
    }))
}

fn c6() -> Line {
    let (r, t) = timed(|| gradient_suite(Scope::All, GRADIENT_SUITE_POINTS, None));
    line(6, 30, t, r.map(|items| {
        let bad: Vec<String> =
            items.iter().filter(|i| i.worst_error > GRADIENT_SUITE_TOL).map(|i| format!("{}/{}", i.suite, i.name)).collect();
        let w = items.iter().map(|i| i.worst_error).fold(0.0, f64::max);
        let chain = items.iter().filter(|i| i.suite == "chain").count();
        (bad.is_empty() && chain >= 6, format!("gradient suite: {} items ({chain} chain), worst {w:.3e}, failing {bad:?}", items.len()))
    }))
}

fn c7(runs: &sngd_core::Result<Vec<DeskRun>>, elapsed: Duration) -> Line {
    let r = runs.as_ref().map_err(Clone::clone).map(|runs| {
        let ok = runs.len() as u64 == DESK_SEEDS
            && runs.iter().all(|r| matches!((r.sngd_iters, r.gd_iters), (Some(s), Some(g)) if s <= DESK_MAX_SNGD_ITERS && g > s));
        let per: Vec<String> = runs
            .iter()
            .map(|r| format!("{}:{}/{}", r.seed, opt(r.sngd_iters), opt(r.gd_iters)))
            .collect();
        (ok, format!("negbin desk (seed:SNGD/GD iterations to {DESK_NLL_TOL:e}) {}", per.join(" ")))
    });
    line(7, 30, elapsed, r)
}

fn opt(v: Option<usize>) -> String {
    v.map_or("-".into(), |v| v.to_string())
}

fn c8(rs: &sngd_core::Result<Vec<Recovery>>, elapsed: Duration) -> Line {
    let r = rs.as_ref().map_err(Clone::clone).map(|rs| {
        let ok = rs.len() == 4 && rs.iter().all(|r| r.max_z <= RECOVERY_SE);
        let per: Vec<String> = rs.iter().map(|r| format!("{} {:.2}", r.name, r.max_z)).collect();
        (ok, format!("parameter recovery, max |error|/SE: {}", per.join(", ")))
    });
    line(8, 60, elapsed, r)
}

fn c9() -> Line {
    let (r, t) = timed(|| domain_safety(DOMAIN_TRIALS));
    line(9, 5, t, r.map(|d| {
        (
            d.trials == DOMAIN_TRIALS && d.violations == 0 && d.backtracks >= 1,
            format!("domain safety: {} violations, {} backtracks over {} starts", d.violations, d.backtracks, d.trials),
        )
    }))
}

fn c10() -> Line {
    let seeds: Vec<u64> = (0..VI_SEEDS).collect();
    let (r, t) = timed(|| vi_sanity(&seeds, VI_ITERS, VI_STEP, VI_TRAIN_SAMPLES, VI_EVAL_SAMPLES));
    line(10, 60, t, r.map(|v| {
        (
            v.failures == 0 && v.median_final < v.median_initial && v.max_mean_gap <= VI_MAP_GAP,
            format!(
                "VI: median negative ELBO {:.4} -> {:.4}; largest |m - MAP| {:.3e}; failed runs {}",
                v.median_initial, v.median_final, v.max_mean_gap, v.failures
            ),
        )
    }))
}

fn c11(desk: &sngd_core::Result<Vec<DeskRun>>, rec: &sngd_core::Result<Vec<Recovery>>, elapsed: Duration) -> Line {
    let r = (|| {
        let mut entries: Vec<(String, bool, f64)> = Vec::new();
        for d in desk.as_ref().map_err(Clone::clone)? {
            entries.push((format!("desk{}", d.seed), d.sngd_status == Termination::GradNorm, d.pulled_back_norm / d.grad_norm_tol));
        }
        for r in rec.as_ref().map_err(Clone::clone)? {
            entries.push((r.name.clone(), r.status == Termination::GradNorm, r.pulled_back_norm / r.grad_norm_tol));
        }
        let unconverged: Vec<&str> = entries.iter().filter(|e| !e.1).map(|e| e.0.as_str()).collect();
        let w = entries.iter().filter(|e| e.1).map(|e| e.2).fold(0.0, f64::max);
        Ok((
            unconverged.is_empty() && w <= STATIONARITY_FACTOR,
            format!("stationarity: largest pulled-back norm / tolerance {w:.3}; unconverged {unconverged:?}"),
        ))
    })();
    line(11, 90, elapsed, r)
}

fn main() -> ExitCode {
    let start = Instant::now();
    let mut lines = thread::scope(|s| {
        let quick: Vec<_> = [c1 as fn() -> Line, c2, c3, c4, c5, c6, c9, c10].into_iter().map(|f| s.spawn(f)).collect();
        let desk = s.spawn(|| {
            let seeds: Vec<u64> = (0..DESK_SEEDS).collect();
            timed(|| negbin_desk(&seeds, DESK_N, DESK_NLL_TOL))
        });
        let rec = s.spawn(|| timed(parameter_recovery));
        let mut lines: Vec<Line> = quick.into_iter().map(|h| h.join().expect("criterion thread")).collect();
        let (desk, t7) = desk.join().expect("desk thread");
        let (rec, t8) = rec.join().expect("recovery thread");
        lines.push(c7(&desk, t7));
        lines.push(c8(&rec, t8));
        lines.push(c11(&desk, &rec, t7 + t8));
        lines
    });
    lines.sort_by_key(|l| l.id);
    let mut failed = 0;
    for l in &lines {
        let tag = if l.passed { "PASS" } else { "FAIL" };
        println!(
            "criterion {:>2} {tag} [{:.2}s / {}s] {}",
            l.id,
            l.elapsed.as_secs_f64(),
            l.budget.as_secs(),
            l.detail
        );
        failed += usize::from(!l.passed);
    }
    let total = start.elapsed();
    let total_ok = total <= SUITE_BUDGET;
    println!("acceptance total {:.1}s (budget {}s) {}", total.as_secs_f64(), SUITE_BUDGET.as_secs(), if total_ok { "PASS" } else { "FAIL" });
    if failed == 0 && total_ok {
        println!("acceptance: all {} criteria passed", lines.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failed} of {} criteria failed", lines.len());
        ExitCode::FAILURE
    }
}
