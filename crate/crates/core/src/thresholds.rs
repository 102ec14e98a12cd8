//! Threshold certificates, a-priori bounds, and runtime monitors.
//!
//! A field state is sub-critical when `min_x λ_min(∇_S u₀) + τρ̄₀ ≥ η_c = τη_φ/2`
//! and its velocity fluctuations satisfy `(8α₀ + 4β₀)m₀ < τη_φ²`. Sub-critical
//! data keep `η ≥ η_c`, `|ω| ≤ γ₀` and `|∇u| ≤ max{|∇u₀|, τη_φ/4, δ₀, τφ₊m₀}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agents::{agent_diagnostics, AgentError, AgentState};
use crate::diagnostics::{tail_log_slope, DiagnosticsRecord};
use crate::euler::{
    energy_fluctuation_field, field_record, sym_gradient_spectrum, thickness, Closure, EulerError, FieldState,
    NonlocalOperator,
};
use crate::kernels::{bracket, KernelError, KernelSpec};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ThresholdError {
    #[error("state has no mass above the vacuum floor; cannot certify")]
    Vacuum,
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Euler(#[from] EulerError),
    #[error(transparent)]
    Agents(#[from] AgentError),
}

/// Certificate of initial data. Gradient-dependent entries are `None` for
/// agent states, where `subcritical` is indeterminate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub eta_min0: Option<f64>,
    pub eta_c: f64,
    pub eta_phi: f64,
    pub alpha0: f64,
    pub beta0: f64,
    pub amplitude_ok: bool,
    pub subcritical: Option<bool>,
    pub predicted_gradient_bound: Option<f64>,
    pub gamma0: Option<f64>,
    pub delta0: Option<f64>,
    pub c0: Option<f64>,
    pub d_inf: Option<f64>,
    pub predicted_flock_rate: Option<f64>,
    /// Kernel gradient bounds came from a finite-difference scan.
    pub bounds_approximate: bool,
    pub tau: f64,
    pub m0: f64,
    pub delta_u0: f64,
    pub kinetic_energy0: f64,
}

/// Input to [`certify`].
#[derive(Debug, Clone, Copy)]
pub enum CertifyInput<'a> {
    Field(&'a FieldState),
    Agents(&'a AgentState),
}

/// `γ₀ = max{max‖Ω₀‖, τη_φ/4}` and `δ₀ = τη_φ/8 + γ₀²/(τη_φ)`.
pub fn vorticity_constants(tau: f64, eta_phi: f64, omega0_max: f64) -> (f64, f64) {
    let te = tau * eta_phi;
    let gamma0 = omega0_max.max(te / 4.0);
    (gamma0, te / 8.0 + gamma0 * gamma0 / te)
}

/// `(C₀, bound)` with `C₀ = max{δ₀, τφ₊m₀}` and
/// `bound = max{max‖∇u₀‖, τη_φ/4, δ₀, τφ₊m₀}`.
pub fn gradient_bound(grad0_max: f64, tau: f64, eta_phi: f64, delta0: f64, phi_plus: f64, m0: f64) -> (f64, f64) {
    let c0 = delta0.max(tau * phi_plus * m0);
    (c0, grad0_max.max(tau * eta_phi / 4.0).max(c0))
}

/// `D_∞ = (H₀/(Cτm₀))^{1/(1−θ)}`, a bound on `⟨D(t)⟩` and hence on `D(t)`.
pub fn pareto_dispersion_bound(c: f64, theta: f64, tau: f64, m0: f64, d0: f64, delta_u0: f64) -> f64 {
    let h0 = c * tau * m0 * bracket(d0).powf(1.0 - theta) + (1.0 - theta) * delta_u0;
    (h0 / (c * tau * m0)).powf(1.0 / (1.0 - theta))
}

/// Predicted decay rate of `δu`: `Cτm₀⟨D_∞⟩^{−θ}` for Pareto tails,
/// `τφ₀m₀` for constant kernels.
fn flock_rate(kernel: &KernelSpec, m0: f64, d_inf: Option<f64>) -> Option<f64> {
    if let Some(phi0) = kernel.constant_value() {
        return Some(kernel.tau * phi0 * m0);
    }
    let (c, theta) = kernel.pareto_envelope()?;
    Some(c * kernel.tau * m0 * bracket(d_inf?).powf(-theta))
}

pub fn certify(input: CertifyInput, kernel: &KernelSpec) -> Result<ThresholdReport, ThresholdError> {
    match input {
        CertifyInput::Field(s) => certify_field(s, kernel),
        CertifyInput::Agents(s) => certify_agents(s, kernel),
    }
}

pub fn certify_field(state: &FieldState, kernel: &KernelSpec) -> Result<ThresholdReport, ThresholdError> {
    let g = &state.grid;
    let tau = kernel.tau;
    let bounds = kernel.bounds()?;
    let floor = state.density_floor();
    let support: Vec<usize> = (0..g.len()).filter(|&c| state.rho[c] > floor).collect();
    if support.is_empty() {
        return Err(ThresholdError::Vacuum);
    }
    let rhobar = thickness(&state.rho, kernel, g)?;
    let spec = sym_gradient_spectrum(state);
    let eta_phi = support.iter().map(|&c| rhobar[c]).fold(f64::INFINITY, f64::min);
    let eta_min0 = support.iter().map(|&c| spec.lambda_min[c] + tau * rhobar[c]).fold(f64::INFINITY, f64::min);
    let omega0 = support.iter().map(|&c| spec.omega[c].abs()).fold(0.0, f64::max);
    let grad0 = support.iter().map(|&c| spec.max_entry[c]).fold(0.0, f64::max);
    let op = NonlocalOperator::new(g, kernel)?;
    let rec = field_record(state, &Closure::MonoKinetic, &op)?;
    let delta_u0 = rec.delta_u.unwrap_or(0.0);
    let m0 = state.mass();
    let kinetic_energy0 = rec.kinetic_energy.unwrap_or(0.0);
    let alpha0 = bounds.grad_x_sup * delta_u0;
    let beta0 = bounds.sym_grad_sup * (2.0 * kinetic_energy0 / m0).sqrt();
    let amplitude_ok = (8.0 * alpha0 + 4.0 * beta0) * m0 < tau * eta_phi * eta_phi;
    let eta_c = tau * eta_phi / 2.0;
    let (gamma0, delta0) = vorticity_constants(tau, eta_phi, omega0);
    let (c0, bound) = gradient_bound(grad0, tau, eta_phi, delta0, bounds.phi_plus, m0);
    Ok(ThresholdReport {
        eta_min0: Some(eta_min0),
        eta_c,
        eta_phi,
        alpha0,
        beta0,
        amplitude_ok,
        subcritical: Some(eta_min0 >= eta_c && amplitude_ok),
        predicted_gradient_bound: Some(bound),
        gamma0: Some(gamma0),
        delta0: Some(delta0),
        c0: Some(c0),
        d_inf: None,
        predicted_flock_rate: flock_rate(kernel, m0, None),
        bounds_approximate: bounds.approximate,
        tau,
        m0,
        delta_u0,
        kinetic_energy0,
    })
}

/// Partial certificate for agents: thickness and amplitude parts only.
pub fn certify_agents(state: &AgentState, kernel: &KernelSpec) -> Result<ThresholdReport, ThresholdError> {
    let tau = kernel.tau;
    let bounds = kernel.bounds()?;
    let rec = agent_diagnostics(state, kernel)?;
    let m0 = 1.0;
    let eta_phi = rec.thickness_min.unwrap();
    let delta_u0 = rec.delta_u.unwrap();
    let kinetic_energy0 = rec.kinetic_energy.unwrap();
    let d0 = rec.diameter.unwrap();
    let alpha0 = bounds.grad_x_sup * delta_u0;
    let beta0 = bounds.sym_grad_sup * (2.0 * kinetic_energy0 / m0).sqrt();
    let d_inf = kernel
        .pareto_envelope()
        .map(|(c, theta)| pareto_dispersion_bound(c, theta, tau, m0, d0, delta_u0));
    Ok(ThresholdReport {
        eta_min0: None,
        eta_c: tau * eta_phi / 2.0,
        eta_phi,
        alpha0,
        beta0,
        amplitude_ok: (8.0 * alpha0 + 4.0 * beta0) * m0 < tau * eta_phi * eta_phi,
        subcritical: None,
        predicted_gradient_bound: None,
        gamma0: None,
        delta0: None,
        c0: None,
        d_inf,
        predicted_flock_rate: flock_rate(kernel, m0, d_inf),
        bounds_approximate: bounds.approximate,
        tau,
        m0,
        delta_u0,
        kinetic_energy0,
    })
}

/// Radius `r` for the truncation `φ_β = max(φ, β)`, `β = min_{|x−y|≤r} φ`,
/// such that every pair distance stays below `r` for all time: `r ≥ 2D₀`
/// and `r β ≥ 2δu₀/(τm₀)`, so that `D(t) ≤ D₀ + δu₀/(τm₀β) ≤ r`.
pub fn reduction_radius(kernel: &KernelSpec, d0: f64, delta_u0: f64, m0: f64) -> Result<f64, KernelError> {
    kernel.floor_radius(2.0 * d0, 2.0 * delta_u0 / (kernel.tau * m0))
}

/// `δE²` for either kind of state; agents carry no internal energy.
pub fn energy_fluctuation(input: CertifyInput, closure: &Closure) -> Result<f64, ThresholdError> {
    match input {
        CertifyInput::Field(s) => Ok(energy_fluctuation_field(s, closure)),
        CertifyInput::Agents(s) => {
            let n = s.len();
            let mut sum = 0.0;
            for i in 0..n {
                for j in 0..n {
                    sum += s.vel(i).iter().zip(s.vel(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
                }
            }
            Ok(0.25 * sum / (n * n) as f64)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonitorTolerances {
    /// Relative slack on `η ≥ η_c` and on `ρ̄ ≥ η_φ`.
    pub eta: f64,
    /// Relative slack on `|ω| ≤ γ₀` and `|∇u| ≤ bound`.
    pub gradient: f64,
}

impl Default for MonitorTolerances {
    fn default() -> Self {
        Self { eta: 1e-2, gradient: 5e-2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorRow {
    pub t: f64,
    pub eta_min: Option<f64>,
    pub omega_max: Option<f64>,
    pub lambda_max: Option<f64>,
    pub grad_max: Option<f64>,
    pub thickness_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorReport {
    pub rows: Vec<MonitorRow>,
    /// Times of the first violation of `η ≥ η_c`, `|ω| ≤ γ₀`, `|∇u| ≤ bound`
    /// and `ρ̄ ≥ η_φ`.
    pub eta_violation: Option<f64>,
    pub omega_violation: Option<f64>,
    pub gradient_violation: Option<f64>,
    pub thickness_violation: Option<f64>,
    /// `∫ min_x ρ̄ dt` over the recorded span (trapezoid rule).
    pub thickness_integral: f64,
}

impl MonitorReport {
    pub fn clean(&self) -> bool {
        self.eta_violation.is_none()
            && self.omega_violation.is_none()
            && self.gradient_violation.is_none()
            && self.thickness_violation.is_none()
    }
}

pub fn monitor(report: &ThresholdReport, records: &[DiagnosticsRecord], tol: MonitorTolerances) -> MonitorReport {
    let first = |pred: &dyn Fn(&DiagnosticsRecord) -> bool| records.iter().find(|r| pred(r)).map(|r| r.t);
    let eta_floor = report.eta_c * (1.0 - tol.eta);
    let grad_cap = report.predicted_gradient_bound.map(|b| b * (1.0 + tol.gradient));
    let omega_cap = report.gamma0.map(|g| g * (1.0 + tol.gradient));
    let thick_floor = report.eta_phi * (1.0 - tol.eta);
    let mut integral = 0.0;
    for w in records.windows(2) {
        if let (Some(a), Some(b)) = (w[0].thickness_min, w[1].thickness_min) {
            integral += 0.5 * (a + b) * (w[1].t - w[0].t);
        }
    }
    MonitorReport {
        rows: records
            .iter()
            .map(|r| MonitorRow {
                t: r.t,
                eta_min: r.eta_min,
                omega_max: r.omega_max,
                lambda_max: r.lambda_max,
                grad_max: r.grad_max,
                thickness_min: r.thickness_min,
            })
            .collect(),
        eta_violation: first(&|r| r.eta_min.is_some_and(|e| e < eta_floor)),
        omega_violation: omega_cap.and_then(|cap| first(&|r| r.omega_max.is_some_and(|w| w > cap))),
        gradient_violation: grad_cap.and_then(|cap| first(&|r| r.grad_max.is_some_and(|g| g > cap))),
        thickness_violation: first(&|r| r.thickness_min.is_some_and(|z| z < thick_floor)),
        thickness_integral: integral,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockingComparison {
    pub predicted_rate: Option<f64>,
    pub observed_rate: Option<f64>,
    /// Observed decay at least as fast as the prediction, within the margin.
    pub rate_ok: bool,
    /// The fit window held fewer than two usable samples.
    pub vacuous: bool,
    pub d_inf: Option<f64>,
    pub max_diameter: Option<f64>,
    pub dispersion_ok: bool,
}

/// Fits `ln δu` on the last half of the records (samples at or below
/// `10⁻¹⁴` are dropped) and compares with the certified rate.
pub fn flocking_predictions(report: &ThresholdReport, records: &[DiagnosticsRecord], margin: f64) -> FlockingComparison {
    let samples: Vec<(f64, f64)> = records.iter().filter_map(|r| r.delta_u.map(|d| (r.t, d))).collect();
    let observed = tail_log_slope(&samples, 1e-14).map(|s| -s);
    let predicted = report.predicted_flock_rate;
    let vacuous = observed.is_none();
    let rate_ok = match (observed, predicted) {
        (Some(o), Some(p)) => o >= p * (1.0 - margin),
        _ => true,
    };
    let max_diameter = records.iter().filter_map(|r| r.diameter).reduce(f64::max);
    let dispersion_ok = match (report.d_inf, max_diameter) {
        (Some(d), Some(m)) => m <= d * (1.0 + margin),
        _ => true,
    };
    FlockingComparison {
        predicted_rate: predicted,
        observed_rate: observed,
        rate_ok,
        vacuous,
        d_inf: report.d_inf,
        max_diameter,
        dispersion_ok,
    }
}
