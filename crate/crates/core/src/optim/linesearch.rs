use crate::error::{Error, Result};

/// Settings for [`exact_line_search`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchConfig {
    /// First trial step.
    pub initial: f64,
    /// Bracket expansion factor.
    pub growth: f64,
    /// Golden-section stop: bracket width ≤ tol · max(1, ε).
    pub tol: f64,
    /// Total objective evaluations allowed.
    pub max_evals: usize,
    /// Share of the largest feasible step taken when φ still decreases at
    /// the edge of the domain. Below 1 keeps iterates strictly interior.
    pub boundary_fraction: f64,
}

impl Default for LineSearchConfig {
    fn default() -> Self {
        LineSearchConfig { initial: 1.0, growth: 2.0, tol: 1e-9, max_evals: 200, boundary_fraction: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineSearchResult {
    pub step: f64,
    pub value: f64,
    pub evals: usize,
    /// Halvings spent pulling trial steps back into the feasible region.
    pub backtracks: usize,
}

/// Boundary fraction used by experiments and self-checks.
pub const INTERIOR_FRACTION: f64 = 0.9;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Minimizes `phi` over ε > 0.
///
/// Trial steps for which `feasible` is false, or where `phi` is not finite,
/// are never evaluated as candidates: the bracket's upper end is pulled back
/// to the largest feasible step found by bisection.
pub fn exact_line_search(
    phi: impl Fn(f64) -> Result<f64>,
    feasible: impl Fn(f64) -> bool,
    cfg: &LineSearchConfig,
) -> Result<LineSearchResult> {
    if !(cfg.initial > 0.0 && cfg.growth > 1.0 && cfg.tol > 0.0) {
        return Err(Error::Config("line search needs initial > 0, growth > 1 and tol > 0".into()));
    }
    if !(cfg.boundary_fraction > 0.0 && cfg.boundary_fraction <= 1.0) {
        return Err(Error::Config("line search boundary_fraction must lie in (0, 1]".into()));
    }
    let f0 = phi(0.0)?;
    if !f0.is_finite() {
        return Err(Error::NonFinite("line search start value".into()));
    }
    let mut evals = 1usize;
    let mut backtracks = 0usize;
    // None marks an infeasible or non-finite trial
    let eval = |e: f64, evals: &mut usize| -> Result<Option<f64>> {
        if !feasible(e) {
            return Ok(None);
        }
        *evals += 1;
        match phi(e) {
            Ok(v) if v.is_finite() => Ok(Some(v)),
            Ok(_) => Ok(None),
            Err(err) if recoverable(&err) => Ok(None),
            Err(err) => Err(err),
        }
    };

    // 1. a feasible first trial
    let mut b = cfg.initial;
    let mut fb = loop {
        match eval(b, &mut evals)? {
            Some(v) => break v,
            None => {
                b *= 0.5;
                backtracks += 1;
                if backtracks > 60 || evals >= cfg.max_evals {
                    return Err(Error::BacktrackExhausted { halvings: backtracks });
                }
            }
        }
    };

    // 2. bracket (a, b, c) with phi(b) < phi(a) and phi(b) <= phi(c)
    let (mut a, mut c);
    if fb >= f0 {
        let mut hi = b;
        loop {
            b = hi / cfg.growth;
            if b < f64::EPSILON * cfg.initial.max(1.0) * 1e-6 || evals >= cfg.max_evals {
                return Err(Error::NoDecrease);
            }
            match eval(b, &mut evals)? {
                Some(v) if v < f0 => {
                    fb = v;
                    break;
                }
                _ => hi = b,
            }
        }
        a = 0.0;
        c = hi;
    } else {
        a = 0.0;
        loop {
            let next = b * cfg.growth;
            match eval(next, &mut evals)? {
                Some(v) if v >= fb => {
                    c = next;
                    break;
                }
                Some(v) => {
                    a = b;
                    b = next;
                    fb = v;
                }
                None => {
                    // largest feasible step in (b, next)
                    let (mut lo, mut hi) = (b, next);
                    while hi - lo > cfg.tol * lo.max(1.0) * 1e-3 && evals < cfg.max_evals {
                        let mid = 0.5 * (lo + hi);
                        backtracks += 1;
                        if eval(mid, &mut evals)?.is_some() {
                            lo = mid;
                        } else {
                            hi = mid;
                        }
                    }
                    let flo = eval(lo, &mut evals)?.expect("bisection keeps lo feasible");
                    if flo <= fb {
                        // minimum sits on the boundary of the feasible region
                        if cfg.boundary_fraction < 1.0 {
                            let step = (cfg.boundary_fraction * lo).max(b);
                            if let Some(v) = eval(step, &mut evals)? {
                                return Ok(LineSearchResult { step, value: v, evals, backtracks });
                            }
                        }
                        return Ok(LineSearchResult { step: lo, value: flo, evals, backtracks });
                    }
                    c = lo;
                    break;
                }
            }
            if evals >= cfg.max_evals {
                return Ok(LineSearchResult { step: b, value: fb, evals, backtracks });
            }
        }
    }

    // 3. golden section on [a, c], keeping b as the best point
    let mut best = (b, fb);
    let mut x1 = c - INV_PHI * (c - a);
    let mut x2 = a + INV_PHI * (c - a);
    let mut f1 = eval(x1, &mut evals)?.unwrap_or(f64::INFINITY);
    let mut f2 = eval(x2, &mut evals)?.unwrap_or(f64::INFINITY);
    while (c - a) > cfg.tol * best.0.max(1.0) && evals < cfg.max_evals {
        if f1 <= f2 {
            c = x2;
            x2 = x1;
            f2 = f1;
            x1 = c - INV_PHI * (c - a);
            f1 = eval(x1, &mut evals)?.unwrap_or(f64::INFINITY);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INV_PHI * (c - a);
            f2 = eval(x2, &mut evals)?.unwrap_or(f64::INFINITY);
        }
        for (x, f) in [(x1, f1), (x2, f2)] {
            if f < best.1 {
                best = (x, f);
            }
        }
    }
    Ok(LineSearchResult { step: best.0, value: best.1, evals, backtracks })
}

/// Errors that mean "this trial point is outside the domain".
pub(crate) fn recoverable(err: &Error) -> bool {
    err.is_domain() || matches!(err, Error::NonFinite(_) | Error::NonConvergence { .. })
}
