//! Surrogate-to-target parameter maps θ = g(θ̃, λ) with pullbacks.
//!
//! Each map reads the surrogate in its standard form. Auxiliary parameters λ
//! are target parameters with no surrogate counterpart and are stored in
//! unconstrained coordinates: the slant directly, and log(ν − 2) for ν.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::expfam::{standard, Family, Parameterization};
use crate::numerics::{corr_from_cov, corr_pullback, push_matrix, read_matrix};
use crate::targets::TargetKind;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum MapKind {
    /// Gamma (α, β) ↦ (r, s) = (α/(1 − β), β), defined for β < 1.
    NegBin,
    NegBinMixture(usize),
    /// Normal (m, Σ) with slant λ ↦ skew-normal (m, Σ, λ).
    SkewNormal(usize),
    SkewNormalMixture(usize, usize),
    /// Zero-mean normal Σ ↦ R = corr(Σ).
    GaussianCopula(usize),
    /// Zero-mean normal Σ with λ ↦ (corr(Σ), 2 + exp(λ)).
    TCopula(usize),
    /// Normal (m, Σ) ↦ the variational normal (m, Σ).
    ViNormalIdentity(usize),
    /// Identity on the standard form of an exponential family.
    Canonical(Family),
}

/// The stable identifiers accepted in experiment configs.
pub const MAP_IDS: [&str; 7] =
    ["negbin", "negbin-mixture", "skew-normal", "skew-normal-mixture", "gaussian-copula", "t-copula", "vi-normal-identity"];

impl MapKind {
    /// Builds a map from its config identifier; `k` is the component count and `d` the dimension.
    pub fn from_id(id: &str, k: usize, d: usize) -> Result<MapKind> {
        let need = |v: usize, what: &str| {
            if v == 0 {
                Err(Error::Config(format!("map '{id}' needs {what} >= 1")))
            } else {
                Ok(v)
            }
        };
        Ok(match id {
            "negbin" => MapKind::NegBin,
            "negbin-mixture" => MapKind::NegBinMixture(need(k, "components")?),
            "skew-normal" => MapKind::SkewNormal(need(d, "dim")?),
            "skew-normal-mixture" => MapKind::SkewNormalMixture(need(k, "components")?, need(d, "dim")?),
            "gaussian-copula" => MapKind::GaussianCopula(need(d, "dim")?),
            "t-copula" => MapKind::TCopula(need(d, "dim")?),
            "vi-normal-identity" => MapKind::ViNormalIdentity(need(d, "dim")?),
            other => return Err(Error::Config(format!("unknown map identifier '{other}'"))),
        })
    }

    pub fn id(&self) -> &'static str {
        match self {
            MapKind::NegBin => "negbin",
            MapKind::NegBinMixture(_) => "negbin-mixture",
            MapKind::SkewNormal(_) => "skew-normal",
            MapKind::SkewNormalMixture(..) => "skew-normal-mixture",
            MapKind::GaussianCopula(_) => "gaussian-copula",
            MapKind::TCopula(_) => "t-copula",
            MapKind::ViNormalIdentity(_) => "vi-normal-identity",
            MapKind::Canonical(_) => "canonical",
        }
    }

    pub fn surrogate(&self) -> Family {
        match self {
            MapKind::NegBin => Family::Gamma,
            MapKind::NegBinMixture(k) => Family::Mixture(*k, Box::new(Family::Gamma)),
            MapKind::SkewNormal(d) | MapKind::ViNormalIdentity(d) => Family::Normal(*d),
            MapKind::SkewNormalMixture(k, d) => Family::Mixture(*k, Box::new(Family::Normal(*d))),
            MapKind::GaussianCopula(d) | MapKind::TCopula(d) => Family::ZeroMeanNormal(*d),
            MapKind::Canonical(f) => f.clone(),
        }
    }

    pub fn target(&self) -> TargetKind {
        match self {
            MapKind::NegBin => TargetKind::NegBin,
            MapKind::NegBinMixture(k) => TargetKind::Mixture(*k, Box::new(TargetKind::NegBin)),
            MapKind::SkewNormal(d) => TargetKind::SkewNormal(*d),
            MapKind::SkewNormalMixture(k, d) => TargetKind::Mixture(*k, Box::new(TargetKind::SkewNormal(*d))),
            MapKind::GaussianCopula(d) => TargetKind::GaussianCopula(*d),
            MapKind::TCopula(d) => TargetKind::TCopula(*d),
            MapKind::ViNormalIdentity(d) => TargetKind::ExpFamily(Family::Normal(*d)),
            MapKind::Canonical(f) => TargetKind::ExpFamily(f.clone()),
        }
    }

    /// Length of λ.
    pub fn aux_dim(&self) -> usize {
        match self {
            MapKind::SkewNormal(d) => *d,
            MapKind::SkewNormalMixture(k, d) => k * d,
            MapKind::TCopula(_) => 1,
            _ => 0,
        }
    }

    fn check(&self, std: &[f64], aux: &[f64]) -> Result<()> {
        if aux.len() != self.aux_dim() {
            return Err(Error::shape(format!("map {self}: expected {} auxiliary parameters, got {}", self.aux_dim(), aux.len())));
        }
        if aux.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("auxiliary parameters".into()));
        }
        self.surrogate().validate_std(std)?;
        self.predicate(std)
    }

    /// Map-specific restriction on the surrogate, beyond its own domain.
    pub fn predicate(&self, std: &[f64]) -> Result<()> {
        let beta_ok = |b: f64| {
            if b < 1.0 {
                Ok(())
            } else {
                Err(Error::domain(format!("negative binomial map needs beta < 1, got {b}")))
            }
        };
        match self {
            MapKind::NegBin => beta_ok(std[1]),
            MapKind::NegBinMixture(k) => (0..*k).try_for_each(|i| beta_ok(std[k + 2 * i + 1])),
            _ => Ok(()),
        }
    }

    /// True iff the mean parameters convert and satisfy the map predicate.
    pub fn domain_check(&self, mean: &[f64]) -> bool {
        self.surrogate().std_from_mean(mean).and_then(|s| self.predicate(&s)).is_ok()
    }

    /// Same check for a point in either parameterization.
    pub fn domain_check_in(&self, v: &[f64], p: Parameterization) -> bool {
        self.surrogate().std_from(v, p).and_then(|s| self.predicate(&s)).is_ok()
    }

    pub fn forward(&self, std: &[f64], aux: &[f64]) -> Result<Vec<f64>> {
        self.check(std, aux)?;
        Ok(match self {
            MapKind::NegBin => negbin_forward(std).to_vec(),
            MapKind::NegBinMixture(k) => {
                let mut out = std[..*k].to_vec();
                for i in 0..*k {
                    out.extend(negbin_forward(&std[k + 2 * i..k + 2 * i + 2]));
                }
                out
            }
            MapKind::SkewNormal(_) => [std, aux].concat(),
            MapKind::SkewNormalMixture(k, d) => {
                let s = d + d * d;
                let mut out = std[..*k].to_vec();
                for i in 0..*k {
                    out.extend_from_slice(&std[k + i * s..k + (i + 1) * s]);
                    out.extend_from_slice(&aux[i * d..(i + 1) * d]);
                }
                out
            }
            MapKind::GaussianCopula(d) => {
                let mut out = Vec::new();
                push_matrix(&corr_from_cov(&read_matrix(std, *d))?, &mut out);
                out
            }
            MapKind::TCopula(d) => {
                let mut out = Vec::new();
                push_matrix(&corr_from_cov(&read_matrix(std, *d))?, &mut out);
                out.push(2.0 + aux[0].exp());
                out
            }
            MapKind::ViNormalIdentity(_) | MapKind::Canonical(_) => std.to_vec(),
        })
    }

    /// Jacobian-transpose of [`MapKind::forward`]: (cotangent on std, cotangent on λ).
    pub fn pullback(&self, std: &[f64], aux: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(std, aux)?;
        if g.len() != self.target().dim() {
            return Err(Error::shape(format!("map {self}: target cotangent has length {}", g.len())));
        }
        Ok(match self {
            MapKind::NegBin => (negbin_pullback(std, g).to_vec(), vec![]),
            MapKind::NegBinMixture(k) => {
                let mut out = g[..*k].to_vec();
                for i in 0..*k {
                    out.extend(negbin_pullback(&std[k + 2 * i..k + 2 * i + 2], &g[k + 2 * i..k + 2 * i + 2]));
                }
                (out, vec![])
            }
            MapKind::SkewNormal(d) => {
                let s = d + d * d;
                (g[..s].to_vec(), g[s..].to_vec())
            }
            MapKind::SkewNormalMixture(k, d) => {
                let s = d + d * d;
                let mut out = g[..*k].to_vec();
                let mut ga = Vec::with_capacity(k * d);
                for i in 0..*k {
                    let off = k + i * (s + d);
                    out.extend_from_slice(&g[off..off + s]);
                    ga.extend_from_slice(&g[off + s..off + s + d]);
                }
                (out, ga)
            }
            MapKind::GaussianCopula(d) | MapKind::TCopula(d) => {
                let gs = corr_pullback(&read_matrix(std, *d), &read_matrix(g, *d))?;
                let mut out = Vec::new();
                push_matrix(&gs, &mut out);
                let ga = if matches!(self, MapKind::TCopula(_)) { vec![g[d * d] * aux[0].exp()] } else { vec![] };
                (out, ga)
            }
            MapKind::ViNormalIdentity(_) | MapKind::Canonical(_) => (g.to_vec(), vec![]),
        })
    }

    /// Forward from a point in either parameterization. The negbin maps read
    /// natural parameters directly, since (α, β) = (η₂, −η₁).
    pub fn forward_from(&self, v: &[f64], p: Parameterization, aux: &[f64]) -> Result<Vec<f64>> {
        match (self, p) {
            (MapKind::NegBin, Parameterization::Natural) => {
                Family::Gamma.validate_natural(v)?;
                self.check(&[v[1], -v[0]], aux)?;
                Ok(vec![v[1] / (1.0 + v[0]), -v[0]])
            }
            _ => self.forward(&self.surrogate().std_from(v, p)?, aux),
        }
    }

    /// Cotangent of θ pulled back to the parameterization `p` at `v`, plus the λ cotangent.
    pub fn pullback_from(&self, v: &[f64], p: Parameterization, aux: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        match (self, p) {
            (MapKind::NegBin, Parameterization::Natural) => {
                Family::Gamma.validate_natural(v)?;
                self.check(&[v[1], -v[0]], aux)?;
                // r = η₂/(1 + η₁), s = −η₁
                let den = 1.0 + v[0];
                Ok((vec![-g[0] * v[1] / (den * den) - g[1], g[0] / den], vec![]))
            }
            _ => {
                let fam = self.surrogate();
                let std = fam.std_from(v, p)?;
                let (gs, ga) = self.pullback(&std, aux, g)?;
                Ok((fam.std_from_vjp(v, p, &gs)?, ga))
            }
        }
    }

    /// A surrogate standard form and λ that map to `theta`.
    pub fn inverse(&self, theta: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let target = self.target();
        target.validate(theta)?;
        let nb_inv = |t: &[f64]| [t[0] * (1.0 - t[1]), t[1]];
        Ok(match self {
            MapKind::NegBin => (nb_inv(theta).to_vec(), vec![]),
            MapKind::NegBinMixture(k) => {
                let mut out = theta[..*k].to_vec();
                for i in 0..*k {
                    out.extend(nb_inv(&theta[k + 2 * i..k + 2 * i + 2]));
                }
                (out, vec![])
            }
            MapKind::SkewNormal(d) => {
                let s = d + d * d;
                (theta[..s].to_vec(), theta[s..].to_vec())
            }
            MapKind::SkewNormalMixture(k, d) => {
                let s = d + d * d;
                let mut out = theta[..*k].to_vec();
                let mut aux = Vec::new();
                for i in 0..*k {
                    let off = k + i * (s + d);
                    out.extend_from_slice(&theta[off..off + s]);
                    aux.extend_from_slice(&theta[off + s..off + s + d]);
                }
                (out, aux)
            }
            MapKind::GaussianCopula(d) => (theta[..d * d].to_vec(), vec![]),
            MapKind::TCopula(d) => (theta[..d * d].to_vec(), vec![(theta[d * d] - 2.0).ln()]),
            MapKind::ViNormalIdentity(_) | MapKind::Canonical(_) => (theta.to_vec(), vec![]),
        })
    }
}

fn negbin_forward(std: &[f64]) -> [f64; 2] {
    [std[0] / (1.0 - std[1]), std[1]]
}

fn negbin_pullback(std: &[f64], g: &[f64]) -> [f64; 2] {
    let (a, b) = (std[0], std[1]);
    let c = 1.0 / (1.0 - b);
    [g[0] * c, g[0] * a * c * c + g[1]]
}

impl fmt::Display for MapKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MapKind::NegBin => write!(f, "negbin"),
            MapKind::NegBinMixture(k) => write!(f, "negbin-mixture(k={k})"),
            MapKind::SkewNormal(d) => write!(f, "skew-normal(d={d})"),
            MapKind::SkewNormalMixture(k, d) => write!(f, "skew-normal-mixture(k={k}, d={d})"),
            MapKind::GaussianCopula(d) => write!(f, "gaussian-copula(d={d})"),
            MapKind::TCopula(d) => write!(f, "t-copula(d={d})"),
            MapKind::ViNormalIdentity(d) => write!(f, "vi-normal-identity(d={d})"),
            MapKind::Canonical(fam) => write!(f, "canonical({fam})"),
        }
    }
}

/// The six bundled maps at small sizes, used by the gradient suites.
pub fn bundled(d: usize, k: usize) -> Vec<MapKind> {
    vec![
        MapKind::NegBin,
        MapKind::NegBinMixture(k),
        MapKind::SkewNormal(d),
        MapKind::SkewNormalMixture(k, d),
        MapKind::GaussianCopula(d),
        MapKind::TCopula(d),
    ]
}

/// Row-major identity block, handy for initial covariances.
pub fn identity_block(d: usize) -> Vec<f64> {
    standard::zero_mean_normal(&DMatrix::identity(d, d))
}

impl MapKind {
    /// A random valid (surrogate standard form, λ) pair. Copula covariances get
    /// a non-unit diagonal so that corr(·) is exercised.
    pub fn random_point<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> (Vec<f64>, Vec<f64>) {
        let theta = self.target().random_theta(rng);
        let (mut std, aux) = self.inverse(&theta).expect("random target parameters are valid");
        if let MapKind::GaussianCopula(d) | MapKind::TCopula(d) = self {
            let s: Vec<f64> = (0..*d).map(|_| rng.random_range(0.5..2.0)).collect();
            for i in 0..*d {
                for j in 0..*d {
                    std[i * d + j] *= s[i] * s[j];
                }
            }
        }
        (std, aux)
    }
}
