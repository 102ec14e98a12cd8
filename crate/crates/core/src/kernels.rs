//! Symmetric communication kernels and their analytic bounds.
//!
//! A kernel is a declarative [`KernelSpec`] rather than an opaque closure so
//! that the bounds needed by the threshold certificates (`sup φ`, `sup |∇ₓφ|`,
//! `sup |(∇ₓ + ∇ᵧ)φ|`) can be computed in closed form.
//!
//! Every evaluation canonicalizes the pair `(x, y)` (lexicographic order)
//! before touching floating point, so `eval(x, y)` and `eval(y, x)` are
//! bit-identical.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("invalid kernel parameter: {0}")]
    InvalidParameter(String),
    #[error("topological kernel evaluated without a density line")]
    MissingDensity,
    #[error("topological kernels are only supported in one dimension (got n = {0})")]
    UnsupportedDimension(usize),
    #[error("points have mismatched dimensions {0} and {1}")]
    DimensionMismatch(usize, usize),
    #[error("bounds of a topological kernel depend on the density")]
    DensityDependent,
    #[error("truncation radius must be finite and non-negative, got {0}")]
    InvalidRadius(f64),
    #[error("kernel vanishes within radius {0}; truncation floor would be zero")]
    VanishingFloor(f64),
    #[error("kernel is not radial")]
    NotRadial,
}

/// Smooth radial profiles defined on all of `r >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum RadialProfile {
    /// `⟨r⟩^{-power} = (1 + r²)^{-power/2}`.
    Bracket { power: f64 },
    /// `exp(-r² / (2 ℓ²))`.
    Gaussian { length: f64 },
}

impl RadialProfile {
    pub fn value(&self, r: f64) -> f64 {
        match *self {
            RadialProfile::Bracket { power } => (1.0 + r * r).powf(-0.5 * power),
            RadialProfile::Gaussian { length } => (-0.5 * r * r / (length * length)).exp(),
        }
    }

    /// Value at `r = 0`, which is the maximum of both profiles.
    pub fn peak(&self) -> f64 {
        1.0
    }

    /// `sup_r |φ'(r)|`.
    pub fn slope_sup(&self) -> f64 {
        match *self {
            RadialProfile::Bracket { power } => {
                // |φ'| = p r (1+r²)^{-p/2-1}, maximal at r² = 1/(p+1).
                let r = (1.0 / (power + 1.0)).sqrt();
                power * r * (1.0 + r * r).powf(-0.5 * power - 1.0)
            }
            RadialProfile::Gaussian { length } => (-0.5f64).exp() / length,
        }
    }

    fn validate(&self) -> Result<(), KernelError> {
        match *self {
            RadialProfile::Bracket { power } if !(power > 0.0 && power.is_finite()) => Err(
                KernelError::InvalidParameter(format!("bracket power must be positive, got {power}")),
            ),
            RadialProfile::Gaussian { length } if !(length > 0.0 && length.is_finite()) => Err(
                KernelError::InvalidParameter(format!("gaussian length must be positive, got {length}")),
            ),
            _ => Ok(()),
        }
    }
}

/// Radial profiles that vanish for `r >= R`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum CompactProfile {
    /// `(1 - (r/R)²)^power` inside the support; `power >= 2` keeps it C¹.
    Poly { power: f64 },
    /// `(1 - r/R)⁺`. Lipschitz but not differentiable.
    Hat,
}

impl CompactProfile {
    pub fn value(&self, r: f64, radius: f64) -> f64 {
        if r >= radius {
            return 0.0;
        }
        match *self {
            CompactProfile::Poly { power } => {
                let s = r / radius;
                (1.0 - s * s).powf(power)
            }
            CompactProfile::Hat => 1.0 - r / radius,
        }
    }

    fn slope_sup(&self, radius: f64) -> Option<f64> {
        match *self {
            CompactProfile::Poly { power } => {
                let s2 = 1.0 / (2.0 * power - 1.0);
                Some(2.0 * power / radius * s2.sqrt() * (1.0 - s2).powf(power - 1.0))
            }
            CompactProfile::Hat => None,
        }
    }

    fn validate(&self) -> Result<(), KernelError> {
        match *self {
            CompactProfile::Poly { power } if !(power >= 2.0 && power.is_finite()) => Err(
                KernelError::InvalidParameter(format!("compact poly power must be >= 2, got {power}")),
            ),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum KernelVariant {
    Constant {
        phi0: f64,
    },
    Metric {
        profile: RadialProfile,
    },
    /// `C ⟨r⟩^{-θ}` with `θ ∈ (0, 1)`.
    ParetoTail {
        c: f64,
        theta: f64,
    },
    CompactSupport {
        radius: f64,
        profile: CompactProfile,
    },
    /// `φ₁(|x - y|) φ₂(d_ρ(x, y))` where `d_ρ` is the mass between the points.
    Topological1D {
        near: RadialProfile,
        mass: RadialProfile,
    },
    /// `max(base, β)`.
    Truncated {
        base: Box<KernelVariant>,
        beta: f64,
    },
}

/// A kernel together with its alignment amplitude `τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub variant: KernelVariant,
    pub tau: f64,
}

/// Mass contained between two points of a one-dimensional density.
pub trait DensityLine {
    fn mass_between(&self, a: f64, b: f64) -> f64;
}

/// Trapezoid quadrature of a sampled density function.
pub struct SampledDensity<F: Fn(f64) -> f64> {
    pub density: F,
    /// Target panel width; the actual width divides the segment evenly.
    pub spacing: f64,
}

impl<F: Fn(f64) -> f64> DensityLine for SampledDensity<F> {
    fn mass_between(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let len = hi - lo;
        if len == 0.0 {
            return 0.0;
        }
        let panels = ((len / self.spacing).ceil() as usize).max(1);
        let h = len / panels as f64;
        let mut sum = 0.5 * ((self.density)(lo) + (self.density)(hi));
        for k in 1..panels {
            sum += (self.density)(lo + k as f64 * h);
        }
        sum * h
    }
}

/// Bounds used by the amplitude certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelBounds {
    pub phi_plus: f64,
    pub grad_x_sup: f64,
    pub sym_grad_sup: f64,
    /// Set when `grad_x_sup` came from a finite-difference scan rather than
    /// a closed form.
    pub approximate: bool,
}

fn check_positive(name: &str, v: f64) -> Result<(), KernelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(KernelError::InvalidParameter(format!("{name} must be positive, got {v}")))
    }
}

fn canonical<'a>(x: &'a [f64], y: &'a [f64]) -> (&'a [f64], &'a [f64]) {
    for (a, b) in x.iter().zip(y) {
        match a.total_cmp(b) {
            Ordering::Less => return (x, y),
            Ordering::Greater => return (y, x),
            Ordering::Equal => {}
        }
    }
    (x, y)
}

fn distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

impl KernelVariant {
    fn validate(&self) -> Result<(), KernelError> {
        match self {
            KernelVariant::Constant { phi0 } => check_positive("phi0", *phi0),
            KernelVariant::Metric { profile } => profile.validate(),
            KernelVariant::ParetoTail { c, theta } => {
                check_positive("C", *c)?;
                if !(*theta > 0.0 && *theta < 1.0) {
                    return Err(KernelError::InvalidParameter(format!(
                        "θ must lie in (0,1), got {theta}"
                    )));
                }
                Ok(())
            }
            KernelVariant::CompactSupport { radius, profile } => {
                check_positive("radius", *radius)?;
                profile.validate()
            }
            KernelVariant::Topological1D { near, mass } => {
                near.validate()?;
                mass.validate()
            }
            KernelVariant::Truncated { base, beta } => {
                check_positive("beta", *beta)?;
                base.validate()
            }
        }
    }

    fn radial_value(&self, r: f64) -> Option<f64> {
        match self {
            KernelVariant::Constant { phi0 } => Some(*phi0),
            KernelVariant::Metric { profile } => Some(profile.value(r)),
            KernelVariant::ParetoTail { c, theta } => Some(c * (1.0 + r * r).powf(-0.5 * theta)),
            KernelVariant::CompactSupport { radius, profile } => Some(profile.value(r, *radius)),
            KernelVariant::Topological1D { .. } => None,
            KernelVariant::Truncated { base, beta } => base.radial_value(r).map(|v| v.max(*beta)),
        }
    }

    fn eval_canonical(
        &self,
        x: &[f64],
        y: &[f64],
        rho: Option<&dyn DensityLine>,
    ) -> Result<f64, KernelError> {
        match self {
            KernelVariant::Topological1D { near, mass } => {
                if x.len() != 1 {
                    return Err(KernelError::UnsupportedDimension(x.len()));
                }
                let line = rho.ok_or(KernelError::MissingDensity)?;
                let d = line.mass_between(x[0], y[0]);
                Ok(near.value((x[0] - y[0]).abs()) * mass.value(d))
            }
            KernelVariant::Truncated { base, beta } => {
                Ok(base.eval_canonical(x, y, rho)?.max(*beta))
            }
            other => Ok(other
                .radial_value(distance(x, y))
                .expect("non-topological variants are radial")),
        }
    }

    fn bounds(&self) -> Result<KernelBounds, KernelError> {
        let exact = |phi_plus: f64, grad: f64| KernelBounds {
            phi_plus,
            grad_x_sup: grad,
            sym_grad_sup: 0.0,
            approximate: false,
        };
        match self {
            KernelVariant::Constant { phi0 } => Ok(exact(*phi0, 0.0)),
            KernelVariant::Metric { profile } => Ok(exact(profile.peak(), profile.slope_sup())),
            KernelVariant::ParetoTail { c, theta } => {
                let slope = RadialProfile::Bracket { power: *theta }.slope_sup();
                Ok(exact(*c, c * slope))
            }
            KernelVariant::CompactSupport { radius, profile } => match profile.slope_sup(*radius) {
                Some(s) => Ok(exact(1.0, s)),
                None => {
                    let grad = scan_slope(|r| profile.value(r, *radius), *radius);
                    Ok(KernelBounds { approximate: true, ..exact(1.0, grad) })
                }
            },
            KernelVariant::Topological1D { .. } => Err(KernelError::DensityDependent),
            KernelVariant::Truncated { base, beta } => {
                let b = base.bounds()?;
                Ok(KernelBounds { phi_plus: b.phi_plus.max(*beta), ..b })
            }
        }
    }
}

/// Finite-difference scan of `sup |φ'|` over `[0, extent]`, padded so that it
/// over-approximates the Lipschitz constant of piecewise-smooth profiles.
fn scan_slope(f: impl Fn(f64) -> f64, extent: f64) -> f64 {
    const SAMPLES: usize = 20_000;
    let h = extent / SAMPLES as f64;
    let mut best: f64 = 0.0;
    for k in 0..=SAMPLES + 10 {
        let r = k as f64 * h;
        best = best.max(((f(r + h) - f(r)) / h).abs());
    }
    best * (1.0 + 1e-9)
}

impl KernelSpec {
    pub fn new(variant: KernelVariant, tau: f64) -> Result<Self, KernelError> {
        check_positive("tau", tau)?;
        variant.validate()?;
        Ok(Self { variant, tau })
    }

    pub fn constant(phi0: f64, tau: f64) -> Result<Self, KernelError> {
        Self::new(KernelVariant::Constant { phi0 }, tau)
    }

    pub fn pareto(c: f64, theta: f64, tau: f64) -> Result<Self, KernelError> {
        Self::new(KernelVariant::ParetoTail { c, theta }, tau)
    }

    pub fn metric(profile: RadialProfile, tau: f64) -> Result<Self, KernelError> {
        Self::new(KernelVariant::Metric { profile }, tau)
    }

    /// `φ(x, y)`. `rho` is required for topological kernels only.
    pub fn eval(
        &self,
        x: &[f64],
        y: &[f64],
        rho: Option<&dyn DensityLine>,
    ) -> Result<f64, KernelError> {
        if x.len() != y.len() {
            return Err(KernelError::DimensionMismatch(x.len(), y.len()));
        }
        let (a, b) = canonical(x, y);
        self.variant.eval_canonical(a, b, rho)
    }

    /// `φ` as a function of separation, for every variant that has one.
    #[inline]
    pub fn radial_value(&self, r: f64) -> Option<f64> {
        self.variant.radial_value(r)
    }

    pub fn is_radial(&self) -> bool {
        self.variant.radial_value(0.0).is_some()
    }

    /// `φ₀` when the kernel is constant everywhere.
    pub fn constant_value(&self) -> Option<f64> {
        match &self.variant {
            KernelVariant::Constant { phi0 } => Some(*phi0),
            KernelVariant::Truncated { base, beta } => match base.as_ref() {
                KernelVariant::Constant { phi0 } => Some(phi0.max(*beta)),
                _ => None,
            },
            _ => None,
        }
    }

    /// The Pareto envelope `(C, θ)` if the kernel is (a truncation of) a Pareto tail.
    pub fn pareto_envelope(&self) -> Option<(f64, f64)> {
        match &self.variant {
            KernelVariant::ParetoTail { c, theta } => Some((*c, *theta)),
            KernelVariant::Truncated { base, .. } => match base.as_ref() {
                KernelVariant::ParetoTail { c, theta } => Some((*c, *theta)),
                _ => None,
            },
            _ => None,
        }
    }

    pub fn bounds(&self) -> Result<KernelBounds, KernelError> {
        self.variant.bounds()
    }

    /// `φ_β = max(φ, β)` with `β = min_{|x-y| <= r} φ`.
    pub fn truncate(&self, r: f64) -> Result<KernelSpec, KernelError> {
        if !(r >= 0.0 && r.is_finite()) {
            return Err(KernelError::InvalidRadius(r));
        }
        // All built-in radial profiles are non-increasing, so the minimum over
        // the ball sits on its boundary.
        let beta = self.radial_value(r).ok_or(KernelError::NotRadial)?;
        if beta <= 0.0 {
            return Err(KernelError::VanishingFloor(r));
        }
        Ok(KernelSpec {
            variant: KernelVariant::Truncated { base: Box::new(self.variant.clone()), beta },
            tau: self.tau,
        })
    }

    /// Smallest `r >= at_least` with `r · min_{|x-y|<=r} φ >= product`.
    pub fn floor_radius(&self, at_least: f64, product: f64) -> Result<f64, KernelError> {
        let g = |r: f64| -> Result<f64, KernelError> {
            Ok(r * self.radial_value(r).ok_or(KernelError::NotRadial)?)
        };
        let mut hi = at_least.max(1e-12);
        if g(hi)? >= product {
            return Ok(hi);
        }
        let mut lo = hi;
        while g(hi)? < product {
            lo = hi;
            hi *= 2.0;
            if hi > 1e15 {
                return Err(KernelError::VanishingFloor(hi));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if g(mid)? >= product {
                hi = mid;
            } else {
                lo = mid;
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
        Ok(hi)
    }
}

/// `(x, y)` ↦ φ evaluated through [`KernelSpec::eval`]; convenience for
/// free-standing callers.
pub fn eval_kernel(
    spec: &KernelSpec,
    x: &[f64],
    y: &[f64],
    rho: Option<&dyn DensityLine>,
) -> Result<f64, KernelError> {
    spec.eval(x, y, rho)
}

pub fn kernel_bounds(spec: &KernelSpec) -> Result<KernelBounds, KernelError> {
    spec.bounds()
}

pub fn truncate_kernel(spec: &KernelSpec, r: f64) -> Result<KernelSpec, KernelError> {
    spec.truncate(r)
}

/// `⟨r⟩ = (1 + r²)^{1/2}`.
#[inline]
pub fn bracket(r: f64) -> f64 {
    (1.0 + r * r).sqrt()
}
