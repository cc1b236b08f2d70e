use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::expfam::{Family, Parameterization};
use crate::maps::{bundled, MapKind};
use crate::optim::grad_check;
use crate::targets::{free, free::Block, LogRegModel, TargetKind};

/// Relative tolerance shared by every gradient check.
pub const GRAD_TOLERANCE: f64 = 1e-4;

/// Central-difference step, scaled by max(1, |θᵢ|).
pub const GRAD_STEP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Targets,
    Maps,
    Chain,
    All,
}

impl std::str::FromStr for Scope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "targets" => Ok(Scope::Targets),
            "maps" => Ok(Scope::Maps),
            "chain" => Ok(Scope::Chain),
            "all" => Ok(Scope::All),
            other => Err(Error::Config(format!("unknown gradcheck scope '{other}'"))),
        }
    }
}

/// Deliberate defects used to check that the suites catch them.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Fault {
    /// Negates the analytic negative-binomial gradient.
    NegBinSignFlip,
}

impl std::str::FromStr for Fault {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negbin-sign" => Ok(Fault::NegBinSignFlip),
            other => Err(Error::Config(format!("unknown fault '{other}'"))),
        }
    }
}

/// Worst error of one item over its seeded points.
#[derive(Debug, Clone, PartialEq)]
pub struct GradItem {
    pub suite: &'static str,
    pub name: String,
    pub points: usize,
    pub worst_error: f64,
}

impl GradItem {
    pub fn passed(&self) -> bool {
        self.worst_error <= GRAD_TOLERANCE
    }
}

/// Targets with analytic gradients, as exercised by the suites.
pub fn suite_targets() -> Vec<TargetKind> {
    vec![
        TargetKind::NegBin,
        TargetKind::mixture(3, TargetKind::NegBin).expect("valid mixture"),
        TargetKind::SkewNormal(3),
        TargetKind::mixture(2, TargetKind::SkewNormal(2)).expect("valid mixture"),
        TargetKind::GaussianCopula(3),
        TargetKind::TCopula(3),
        TargetKind::ExpFamily(Family::Gamma),
        TargetKind::ExpFamily(Family::Normal(3)),
        TargetKind::ExpFamily(Family::mixture(3, Family::Gamma).expect("valid mixture")),
    ]
}

/// The six bundled maps plus the VI identity map.
pub fn suite_maps() -> Vec<MapKind> {
    let mut maps = bundled(3, 3);
    maps.push(MapKind::ViNormalIdentity(3));
    maps
}

/// Runs the requested suites with `points` seeded points per item.
pub fn gradient_suite(scope: Scope, points: usize, fault: Option<Fault>) -> Result<Vec<GradItem>> {
    let mut out = Vec::new();
    if matches!(scope, Scope::Targets | Scope::All) {
        for (i, t) in suite_targets().into_iter().enumerate() {
            out.push(check_target(&t, points, 100 + i as u64, fault)?);
        }
        out.push(check_logreg(points, 199)?);
    }
    if matches!(scope, Scope::Maps | Scope::All) {
        for (i, m) in suite_maps().into_iter().enumerate() {
            out.push(check_map(&m, points, 200 + i as u64)?);
        }
    }
    if matches!(scope, Scope::Chain | Scope::All) {
        for (i, m) in suite_maps().into_iter().enumerate() {
            out.push(check_chain(&m, points, 300 + i as u64, fault)?);
        }
    }
    Ok(out)
}

fn flips(target: &TargetKind, fault: Option<Fault>) -> bool {
    fault == Some(Fault::NegBinSignFlip) && *target == TargetKind::NegBin
}

/// Σ log q over a few draws at θ₀, and its gradient.
fn log_lik(target: &TargetKind, data: &[Vec<f64>], theta: &[f64]) -> Result<f64> {
    data.iter().map(|x| target.log_density(theta, x)).sum()
}

fn log_lik_grad(target: &TargetKind, data: &[Vec<f64>], theta: &[f64], fault: Option<Fault>) -> Result<Vec<f64>> {
    let mut g = vec![0.0; target.dim()];
    for x in data {
        let (_, gx) = target.log_density_grad(theta, x)?;
        g.iter_mut().zip(gx).for_each(|(a, b)| *a += b);
    }
    if flips(target, fault) {
        g.iter_mut().for_each(|v| *v = -*v);
    }
    Ok(g)
}

fn check_target(target: &TargetKind, points: usize, seed: u64, fault: Option<Fault>) -> Result<GradItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let theta = target.random_theta(&mut rng);
        let data = target.sample(&theta, 5, &mut rng)?;
        let g = log_lik_grad(target, &data, &theta, fault)?;
        // differences run in minimal coordinates so that constrained blocks
        // (simplex, correlation, covariance) stay on their manifolds
        let blocks = target.blocks();
        // centred on the current values so finite-difference steps keep their scale
        let u0 = free::tangent_values(&blocks, &theta);
        let at = |u: &[f64]| -> Vec<f64> {
            let off: Vec<f64> = u.iter().zip(&u0).map(|(a, b)| a - b).collect();
            theta.iter().zip(free::tangent_lift(&blocks, &off)).map(|(t, d)| t + d).collect()
        };
        let g_u = free::tangent_project(&blocks, &g);
        let rep = grad_check(|u| log_lik(target, &data, &at(u)), &g_u, &u0, GRAD_STEP, GRAD_TOLERANCE)?;
        worst = worst.max(rep.worst_error);
    }
    Ok(GradItem { suite: "targets", name: target.to_string(), points, worst_error: worst })
}

fn check_logreg(points: usize, seed: u64) -> Result<GradItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = LogRegModel::synthetic(60, &[1.0, -0.5, 0.25], 1.0, &mut rng)?;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let w: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let (_, g) = model.log_joint_grad(&w)?;
        let rep = grad_check(|t| Ok(model.log_joint_grad(t)?.0), &g, &w, GRAD_STEP, GRAD_TOLERANCE)?;
        worst = worst.max(rep.worst_error);
    }
    Ok(GradItem { suite: "targets", name: "logreg-log-joint".into(), points, worst_error: worst })
}

/// A random cotangent that is symmetric on every matrix block of the layout.
fn symmetric_cotangent<R: Rng + ?Sized>(blocks: &[Block], rng: &mut R) -> Vec<f64> {
    let mut out = Vec::new();
    for b in blocks {
        match *b {
            Block::Spd(d) | Block::Corr(d) => {
                let m = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
                let s = (&m + m.transpose()) * 0.5;
                out.extend(s.iter().copied());
            }
            other => out.extend((0..other.theta_len()).map(|_| rng.random_range(-1.0..1.0))),
        }
    }
    out
}

fn surrogate_point(map: &MapKind, std: &[f64], p: Parameterization) -> Result<Vec<f64>> {
    let fam = map.surrogate();
    match p {
        Parameterization::Natural => fam.natural_from_std(std),
        Parameterization::Mean => fam.mean_from_std(std),
    }
}

/// Pullback of a random cotangent against differences of ⟨g, forward⟩, over
/// both surrogate parameterizations and λ.
fn check_map(map: &MapKind, points: usize, seed: u64) -> Result<GradItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks = map.target().blocks();
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (std, aux) = map.random_point(&mut rng);
        let g = symmetric_cotangent(&blocks, &mut rng);
        for p in [Parameterization::Natural, Parameterization::Mean] {
            let v = surrogate_point(map, &std, p)?;
            let n = v.len();
            let (gv, ga) = map.pullback_from(&v, p, &aux, &g)?;
            let f = |w: &[f64]| -> Result<f64> {
                let theta = map.forward_from(&w[..n], p, &w[n..])?;
                Ok(theta.iter().zip(&g).map(|(a, b)| a * b).sum())
            };
            let rep = grad_check(f, &[gv, ga].concat(), &[v, aux.clone()].concat(), GRAD_STEP, GRAD_TOLERANCE)?;
            worst = worst.max(rep.worst_error);
        }
    }
    Ok(GradItem { suite: "maps", name: map.to_string(), points, worst_error: worst })
}

/// The full composition −Σ log q(x | g(θ̃, λ)) against differences in (θ̃, λ).
fn check_chain(map: &MapKind, points: usize, seed: u64, fault: Option<Fault>) -> Result<GradItem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let target = map.target();
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let (std, aux) = map.random_point(&mut rng);
        let theta0 = map.forward(&std, &aux)?;
        let data = target.sample(&theta0, 5, &mut rng)?;
        let g: Vec<f64> = log_lik_grad(&target, &data, &theta0, fault)?.iter().map(|v| -v).collect();
        for p in [Parameterization::Natural, Parameterization::Mean] {
            let v = surrogate_point(map, &std, p)?;
            let n = v.len();
            let (gv, ga) = map.pullback_from(&v, p, &aux, &g)?;
            let f = |w: &[f64]| -> Result<f64> { Ok(-log_lik(&target, &data, &map.forward_from(&w[..n], p, &w[n..])?)?) };
            let rep = grad_check(f, &[gv, ga].concat(), &[v, aux.clone()].concat(), GRAD_STEP, GRAD_TOLERANCE)?;
            worst = worst.max(rep.worst_error);
        }
    }
    Ok(GradItem { suite: "chain", name: map.to_string(), points, worst_error: worst })
}
