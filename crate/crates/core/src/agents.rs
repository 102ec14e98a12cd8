//! Cucker-Smale agent system
//! `dv_i/dt = (τ/N) Σ_j φ(x_i, x_j)(v_j − v_i)`, `dx_i/dt = v_i`,
//! with fixed-step RK4 or forward Euler.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::DiagnosticsRecord;
use crate::kernels::{bracket, DensityLine, KernelError, KernelSpec};

/// Below this many agents the pair loop runs on the calling thread.
const PAR_THRESHOLD: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AgentError {
    #[error("invalid agent state: {0}")]
    InvalidState(String),
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),
    #[error("kernel value {value} is not finite for pair ({i}, {j})")]
    NonFiniteKernel { i: usize, j: usize, value: f64 },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Positions and velocities, row-major `N × n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub t: f64,
    pub dim: usize,
    pub x: Vec<f64>,
    pub v: Vec<f64>,
}

impl AgentState {
    pub fn new(t: f64, dim: usize, x: Vec<f64>, v: Vec<f64>) -> Result<Self, AgentError> {
        if dim == 0 {
            return Err(AgentError::InvalidState("dimension must be at least 1".into()));
        }
        if x.is_empty() || !x.len().is_multiple_of(dim) || x.len() != v.len() {
            return Err(AgentError::InvalidState(format!(
                "position/velocity arrays of length {}/{} do not form N×{dim} with N ≥ 1",
                x.len(),
                v.len()
            )));
        }
        let s = Self { t, dim, x, v };
        if !s.is_finite() {
            return Err(AgentError::InvalidState("non-finite entry".into()));
        }
        Ok(s)
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn pos(&self, i: usize) -> &[f64] {
        &self.x[i * self.dim..(i + 1) * self.dim]
    }

    pub fn vel(&self, i: usize) -> &[f64] {
        &self.v[i * self.dim..(i + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().chain(&self.v).all(|z| z.is_finite())
    }

    pub fn mean_velocity(&self) -> Vec<f64> {
        let n = self.len() as f64;
        (0..self.dim)
            .map(|d| self.v.iter().skip(d).step_by(self.dim).sum::<f64>() / n)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    Rk4,
    ForwardEuler,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentRunConfig {
    pub kernel: KernelSpec,
    pub dt: f64,
    pub t_final: f64,
    pub integrator: Integrator,
    pub record_every: usize,
}

impl AgentRunConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(AgentError::InvalidConfig(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final >= 0.0 && self.t_final.is_finite()) {
            return Err(AgentError::InvalidConfig(format!("T must be non-negative, got {}", self.t_final)));
        }
        if self.record_every == 0 {
            return Err(AgentError::InvalidConfig("record_every must be positive".into()));
        }
        Ok(())
    }
}

/// Empirical measure `(1/N) Σ δ_{x_i}` on the line; endpoint atoms count half.
pub struct EmpiricalLine {
    sorted: Vec<f64>,
    weight: f64,
}

impl EmpiricalLine {
    pub fn new(points: &[f64]) -> Self {
        let mut sorted = points.to_vec();
        sorted.sort_by(f64::total_cmp);
        let weight = 1.0 / points.len().max(1) as f64;
        Self { sorted, weight }
    }
}

impl DensityLine for EmpiricalLine {
    fn mass_between(&self, a: f64, b: f64) -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        let lt = |z: f64| self.sorted.partition_point(|&p| p < z);
        let le = |z: f64| self.sorted.partition_point(|&p| p <= z);
        let closed = le(b) - lt(a);
        let ends = (le(a) - lt(a)) + (le(b) - lt(b));
        self.weight * (closed as f64 - 0.5 * ends as f64)
    }
}

/// Evaluates `φ(x_i, x_j)` for every pair without allocating.
struct PairKernel<'a> {
    spec: &'a KernelSpec,
    line: Option<EmpiricalLine>,
}

impl<'a> PairKernel<'a> {
    fn new(spec: &'a KernelSpec, s: &AgentState) -> Result<Self, AgentError> {
        let line = if spec.is_radial() {
            None
        } else {
            if s.dim != 1 {
                return Err(KernelError::UnsupportedDimension(s.dim).into());
            }
            Some(EmpiricalLine::new(&s.x))
        };
        Ok(Self { spec, line })
    }

    #[inline]
    fn phi(&self, s: &AgentState, i: usize, j: usize) -> Result<f64, AgentError> {
        let value = match &self.line {
            None => {
                let (xi, xj) = (s.pos(i), s.pos(j));
                let mut r2 = 0.0;
                for d in 0..s.dim {
                    let dx = xi[d] - xj[d];
                    r2 += dx * dx;
                }
                self.spec.radial_value(r2.sqrt()).unwrap_or(f64::NAN)
            }
            Some(line) => self.spec.eval(s.pos(i), s.pos(j), Some(line))?,
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(AgentError::NonFiniteKernel { i, j, value })
        }
    }
}

fn rhs_into(s: &AgentState, k: &PairKernel, out: &mut [f64]) -> Result<(), AgentError> {
    let n = s.len();
    let dim = s.dim;
    let scale = k.spec.tau / n as f64;
    let row = |(i, a): (usize, &mut [f64])| -> Result<(), AgentError> {
        a.fill(0.0);
        let vi = s.vel(i);
        for j in 0..n {
            if j == i {
                continue;
            }
            let phi = k.phi(s, i, j)?;
            let vj = s.vel(j);
            for d in 0..dim {
                a[d] += phi * (vj[d] - vi[d]);
            }
        }
        for ad in a.iter_mut() {
            *ad *= scale;
        }
        Ok(())
    };
    if n < PAR_THRESHOLD {
        // φ is symmetric: evaluate each pair once and apply it to both rows.
        out.fill(0.0);
        for i in 0..n {
            for j in i + 1..n {
                let phi = k.phi(s, i, j)?;
                for d in 0..dim {
                    let dv = phi * (s.v[j * dim + d] - s.v[i * dim + d]);
                    out[i * dim + d] += dv;
                    out[j * dim + d] -= dv;
                }
            }
        }
        out.iter_mut().for_each(|a| *a *= scale);
        return Ok(());
    }
    // Each row is reduced sequentially, so the result does not depend on
    // the thread count; collecting keeps the first error deterministic.
    let results: Vec<Result<(), AgentError>> = out.par_chunks_mut(dim).enumerate().map(row).collect();
    results.into_iter().collect()
}

/// Accelerations `a_i = (τ/N) Σ_j φ(x_i, x_j)(v_j − v_i)`, row-major.
pub fn cs_rhs(state: &AgentState, kernel: &KernelSpec) -> Result<Vec<f64>, AgentError> {
    let k = PairKernel::new(kernel, state)?;
    let mut out = vec![0.0; state.v.len()];
    rhs_into(state, &k, &mut out)?;
    Ok(out)
}

struct Workspace {
    /// Stage accelerations.
    acc: [Vec<f64>; 4],
    /// Stage velocities, which double as position derivatives.
    vel: [Vec<f64>; 4],
    stage: AgentState,
}

impl Workspace {
    fn new(s: &AgentState) -> Self {
        let m = s.v.len();
        Self {
            acc: std::array::from_fn(|_| vec![0.0; m]),
            vel: std::array::from_fn(|_| vec![0.0; m]),
            stage: s.clone(),
        }
    }
}

fn rk_step(
    s: &AgentState,
    h: f64,
    spec: &KernelSpec,
    integrator: Integrator,
    ws: &mut Workspace,
) -> Result<AgentState, AgentError> {
    let mut next = s.clone();
    let m = s.x.len();
    let kern = PairKernel::new(spec, s)?;
    rhs_into(s, &kern, &mut ws.acc[0])?;
    match integrator {
        Integrator::ForwardEuler => {
            for i in 0..m {
                next.x[i] = s.x[i] + h * s.v[i];
                next.v[i] = s.v[i] + h * ws.acc[0][i];
            }
        }
        Integrator::Rk4 => {
            ws.vel[0].copy_from_slice(&s.v);
            for (st, c) in [(1, 0.5 * h), (2, 0.5 * h), (3, h)] {
                for i in 0..m {
                    ws.stage.x[i] = s.x[i] + c * ws.vel[st - 1][i];
                    ws.stage.v[i] = s.v[i] + c * ws.acc[st - 1][i];
                }
                let kern = PairKernel::new(spec, &ws.stage)?;
                rhs_into(&ws.stage, &kern, &mut ws.acc[st])?;
                ws.vel[st].copy_from_slice(&ws.stage.v);
            }
            let (a, v) = (&ws.acc, &ws.vel);
            for i in 0..m {
                next.x[i] = s.x[i] + h / 6.0 * (v[0][i] + 2.0 * v[1][i] + 2.0 * v[2][i] + v[3][i]);
                next.v[i] = s.v[i] + h / 6.0 * (a[0][i] + 2.0 * a[1][i] + 2.0 * a[2][i] + a[3][i]);
            }
        }
    }
    Ok(next)
}

/// Result of [`integrate_agents`].
#[derive(Debug, Clone)]
pub struct AgentRun {
    /// Final state, or the last finite state when the run aborted.
    pub state: AgentState,
    pub records: Vec<DiagnosticsRecord>,
    /// Time at which a non-finite value appeared.
    pub aborted_at: Option<f64>,
}

/// Number of steps and the time of step `k` for a fixed-step run to `t_final`.
pub(crate) fn step_count(t0: f64, t_final: f64, dt: f64) -> usize {
    let span = t_final - t0;
    if span <= 0.0 {
        0
    } else {
        ((span / dt) - 1e-9).ceil().max(1.0) as usize
    }
}

pub(crate) fn step_time(t0: f64, t_final: f64, dt: f64, k: usize, steps: usize) -> f64 {
    if k == steps {
        t_final
    } else {
        t0 + k as f64 * dt
    }
}

/// Advances `state0` to `cfg.t_final`, recording diagnostics at the initial
/// time, every `record_every` steps, and at the final time. `observer` sees
/// each recorded state.
pub fn integrate_agents(
    state0: &AgentState,
    cfg: &AgentRunConfig,
    mut observer: impl FnMut(&AgentState, &DiagnosticsRecord),
) -> Result<AgentRun, AgentError> {
    cfg.validate()?;
    let t0 = state0.t;
    let steps = step_count(t0, cfg.t_final, cfg.dt);
    let mut ws = Workspace::new(state0);
    let mut records = Vec::new();
    let mut record = |s: &AgentState, records: &mut Vec<DiagnosticsRecord>| -> Result<(), AgentError> {
        let r = agent_diagnostics(s, &cfg.kernel)?;
        observer(s, &r);
        records.push(r);
        Ok(())
    };
    record(state0, &mut records)?;
    let mut s = state0.clone();
    for k in 1..=steps {
        let t_next = step_time(t0, cfg.t_final, cfg.dt, k, steps);
        let h = t_next - s.t;
        let mut next = rk_step(&s, h, &cfg.kernel, cfg.integrator, &mut ws)?;
        next.t = t_next;
        if !next.is_finite() {
            log::warn!("non-finite agent state at t = {t_next}; aborting");
            return Ok(AgentRun { state: s, records, aborted_at: Some(t_next) });
        }
        s = next;
        if k % cfg.record_every == 0 || k == steps {
            record(&s, &mut records)?;
        }
    }
    Ok(AgentRun { state: s, records, aborted_at: None })
}

/// `δu`, `D`, mean velocity, kinetic energy, `φ₋`, minimal discrete
/// thickness, the velocity part of `δE²` and, for Pareto kernels, `H(t)`.
pub fn agent_diagnostics(state: &AgentState, kernel: &KernelSpec) -> Result<DiagnosticsRecord, AgentError> {
    let n = state.len();
    let k = PairKernel::new(kernel, state)?;
    let mut delta_u: f64 = 0.0;
    let mut diameter: f64 = 0.0;
    let mut phi_minus = f64::INFINITY;
    let mut thickness_min = f64::INFINITY;
    let mut fluct_sum = 0.0;
    for i in 0..n {
        let mut thick = 0.0;
        for j in 0..n {
            let phi = k.phi(state, i, j)?;
            thick += phi;
            if j == i {
                continue;
            }
            phi_minus = phi_minus.min(phi);
            let (mut dv2, mut dx2) = (0.0, 0.0);
            for d in 0..state.dim {
                let a = state.vel(i)[d] - state.vel(j)[d];
                let b = state.pos(i)[d] - state.pos(j)[d];
                dv2 += a * a;
                dx2 += b * b;
            }
            fluct_sum += dv2;
            delta_u = delta_u.max(dv2.sqrt());
            diameter = diameter.max(dx2.sqrt());
        }
        thickness_min = thickness_min.min(thick / n as f64);
    }
    if n == 1 {
        phi_minus = k.phi(state, 0, 0)?;
    }
    let nf = n as f64;
    let kinetic_energy = state.v.iter().map(|z| z * z).sum::<f64>() / (2.0 * nf);
    // (1/2m₀) ∬ ½|v(x) − v(y)|² dμ dμ with m₀ = 1.
    let energy_fluctuation = 0.25 * fluct_sum / (nf * nf);
    let lyapunov = kernel
        .pareto_envelope()
        .map(|(c, theta)| lyapunov_h(c, theta, kernel.tau, 1.0, diameter, delta_u));
    Ok(DiagnosticsRecord {
        delta_u: Some(delta_u),
        diameter: Some(diameter),
        mean_velocity: Some(state.mean_velocity()),
        kinetic_energy: Some(kinetic_energy),
        phi_minus: Some(phi_minus),
        thickness_min: Some(thickness_min),
        energy_fluctuation: Some(energy_fluctuation),
        lyapunov,
        mass: Some(1.0),
        ..DiagnosticsRecord::at(state.t)
    })
}

/// `H = Cτm₀⟨D⟩^{1−θ} + (1−θ)δu`.
pub fn lyapunov_h(c: f64, theta: f64, tau: f64, m0: f64, diameter: f64, delta_u: f64) -> f64 {
    c * tau * m0 * bracket(diameter).powf(1.0 - theta) + (1.0 - theta) * delta_u
}
