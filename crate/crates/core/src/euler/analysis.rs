//! Derived fields and diagnostics of a [`FieldState`].

use super::nonlocal::NonlocalOperator;
use super::{Closure, EulerError, FieldState, Grid};
use crate::diagnostics::DiagnosticsRecord;

/// Per-cell spectrum of the symmetric gradient and the skew entry.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSpectrum {
    pub lambda_min: Vec<f64>,
    pub lambda_max: Vec<f64>,
    /// `(∂ₓu₂ − ∂ᵧu₁)/2`; `|ω| = ‖Ω‖`. Zero in 1D.
    pub omega: Vec<f64>,
    /// `max_{i,j} |∂u_i/∂x_j|`.
    pub max_entry: Vec<f64>,
}

/// Central-difference velocity gradient `∂u_d/∂x_a` at cell `c`.
fn gradient(state: &FieldState, c: usize) -> [[f64; 2]; 2] {
    let g = &state.grid;
    let dim = g.dim;
    let mut out = [[0.0; 2]; 2];
    for a in 0..dim {
        let (l, r) = (g.neighbor(c, a, -1), g.neighbor(c, a, 1));
        for d in 0..dim {
            out[d][a] = (state.u[r * dim + d] - state.u[l * dim + d]) / (2.0 * g.spacing(a));
        }
    }
    out
}

pub fn sym_gradient_spectrum(state: &FieldState) -> GradientSpectrum {
    let m = state.grid.len();
    let mut s = GradientSpectrum {
        lambda_min: Vec::with_capacity(m),
        lambda_max: Vec::with_capacity(m),
        omega: Vec::with_capacity(m),
        max_entry: Vec::with_capacity(m),
    };
    for c in 0..m {
        let du = gradient(state, c);
        if state.grid.dim == 1 {
            s.lambda_min.push(du[0][0]);
            s.lambda_max.push(du[0][0]);
            s.omega.push(0.0);
            s.max_entry.push(du[0][0].abs());
        } else {
            let (s11, s22) = (du[0][0], du[1][1]);
            let s12 = 0.5 * (du[0][1] + du[1][0]);
            let mean = 0.5 * (s11 + s22);
            let radius = (0.25 * (s11 - s22) * (s11 - s22) + s12 * s12).sqrt();
            s.lambda_min.push(mean - radius);
            s.lambda_max.push(mean + radius);
            s.omega.push(0.5 * (du[1][0] - du[0][1]));
            s.max_entry.push(du.iter().flatten().fold(0.0f64, |m, z| m.max(z.abs())));
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyField {
    /// `ln p − γ ln ρ`; `None` on masked cells.
    pub s: Vec<Option<f64>>,
    pub max_s: f64,
    pub max_p_rho_gamma: f64,
}

/// Specific entropy on cells with `ρ` above the vacuum floor and `p > 0`.
pub fn entropy_field(state: &FieldState, closure: &Closure) -> Result<EntropyField, EulerError> {
    let gamma = closure
        .gamma()
        .ok_or(EulerError::IncompatibleClosure { closure: closure.name(), dim: state.grid.dim })?;
    let p = state.p.as_ref().ok_or_else(|| EulerError::InvalidState("no pressure field".into()))?;
    let floor = state.density_floor();
    let s: Vec<Option<f64>> = state
        .rho
        .iter()
        .zip(p)
        .map(|(r, p)| (*r > floor && *p > 0.0).then(|| p.ln() - gamma * r.ln()))
        .collect();
    let max_s = s.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max_s == f64::NEG_INFINITY {
        return Err(EulerError::EmptySupport);
    }
    Ok(EntropyField { s, max_s, max_p_rho_gamma: max_s.exp() })
}

/// `δE² = (1/2m₀) ∬ (½|u(x) − u(y)|² + e(x) + e(y)) ρ(x)ρ(y)`, evaluated
/// through the centred identity `∬ ½|u(x) − u(y)|² ρρ = m₀ ∫ ρ|u − ū|²`
/// which avoids the O(M²) double sum and its cancellation.
pub fn energy_fluctuation_field(state: &FieldState, closure: &Closure) -> f64 {
    let dim = state.grid.dim;
    let dv = state.grid.cell_volume();
    let m0 = state.mass();
    if m0 <= 0.0 {
        return 0.0;
    }
    let mom = state.momentum();
    let ubar: Vec<f64> = mom.iter().map(|z| z / m0).collect();
    let mut kin = 0.0;
    for (c, r) in state.rho.iter().enumerate() {
        let mut w2 = 0.0;
        for d in 0..dim {
            let w = state.u[c * dim + d] - ubar[d];
            w2 += w * w;
        }
        kin += r * w2;
    }
    let internal = match (closure.gamma(), &state.p) {
        (Some(gamma), Some(p)) => p.iter().sum::<f64>() / (gamma - 1.0),
        _ => 0.0,
    };
    (0.5 * kin + internal) * dv
}

/// Largest pairwise distance among planar points (exact, via the convex hull).
fn point_set_diameter(points: &mut [[f64; 2]]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    points.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    let cross = |o: [f64; 2], a: [f64; 2], b: [f64; 2]| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<[f64; 2]> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> =
            if pass == 0 { Box::new(points.iter()) } else { Box::new(points.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.is_empty() {
        hull.push(points[0]);
    }
    let mut best: f64 = 0.0;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            let (dx, dy) = (hull[i][0] - hull[j][0], hull[i][1] - hull[j][1]);
            best = best.max((dx * dx + dy * dy).sqrt());
        }
    }
    best
}

/// Diagnostics of one field snapshot. Statistics over `η`, `ρ̄` and `S` are
/// restricted to cells above the vacuum floor.
pub fn field_record(
    state: &FieldState,
    closure: &Closure,
    op: &NonlocalOperator,
) -> Result<DiagnosticsRecord, EulerError> {
    let g = &state.grid;
    let dim = g.dim;
    let floor = state.density_floor();
    let support: Vec<usize> = (0..g.len()).filter(|&c| state.rho[c] > floor).collect();
    if support.is_empty() {
        return Err(EulerError::EmptySupport);
    }
    let (rhobar, _) = op.apply(&state.rho, None);
    let spec = sym_gradient_spectrum(state);
    let tau = op.kernel().tau;
    let m0 = state.mass();
    let dv = g.cell_volume();

    let min_over = |f: &dyn Fn(usize) -> f64| support.iter().map(|&c| f(c)).fold(f64::INFINITY, f64::min);
    let max_over = |f: &dyn Fn(usize) -> f64| support.iter().map(|&c| f(c)).fold(f64::NEG_INFINITY, f64::max);

    let delta_u = if dim == 1 {
        max_over(&|c| state.u[c]) - min_over(&|c| state.u[c])
    } else {
        let mut pts: Vec<[f64; 2]> = support.iter().map(|&c| [state.u[2 * c], state.u[2 * c + 1]]).collect();
        point_set_diameter(&mut pts)
    };
    let kinetic_energy = 0.5
        * dv
        * state
            .rho
            .iter()
            .enumerate()
            .map(|(c, r)| r * state.u[c * dim..(c + 1) * dim].iter().map(|z| z * z).sum::<f64>())
            .sum::<f64>();
    let entropy_max = if closure.has_pressure() { Some(entropy_field(state, closure)?.max_s) } else { None };
    Ok(DiagnosticsRecord {
        delta_u: Some(delta_u),
        mean_velocity: Some(state.momentum().iter().map(|z| z / m0).collect()),
        kinetic_energy: Some(kinetic_energy),
        thickness_min: Some(min_over(&|c| rhobar[c])),
        eta_min: Some(min_over(&|c| spec.lambda_min[c] + tau * rhobar[c])),
        omega_max: Some(max_over(&|c| spec.omega[c].abs())),
        lambda_max: Some(max_over(&|c| spec.lambda_max[c])),
        grad_max: Some(max_over(&|c| spec.max_entry[c])),
        entropy_max,
        pressure_integral: state.pressure_integral(),
        energy_fluctuation: Some(energy_fluctuation_field(state, closure)),
        mass: Some(m0),
        ..DiagnosticsRecord::at(state.t)
    })
}

/// Integrated residual of the NSA entropy balance
/// `(−ρS)_t + (−ρuS + σ2 (ln T)_x / C_v)_x = 2τρ̄ρ − σ1 u_x²/(C_v T) − σ2 (T_x/T)²/C_v`
/// for each consecutive pair of snapshots, as `(t_mid, ∫|LHS − RHS| dx)`.
/// The time derivative is a forward difference across the pair and spatial
/// terms are averaged over its ends. Pairs with every cell masked are skipped.
pub fn nsa_entropy_balance_residual(
    history: &[FieldState],
    closure: &Closure,
    op: &NonlocalOperator,
) -> Result<Vec<(f64, f64)>, EulerError> {
    let (gamma, sigma1, sigma2, cv) = match *closure {
        Closure::Nsa { gamma, sigma1, sigma2, cv } => (gamma, sigma1, sigma2, cv),
        other => return Err(EulerError::IncompatibleClosure { closure: other.name(), dim: 1 }),
    };
    if history.len() < 2 {
        return Err(EulerError::InsufficientHistory { needed: 2, got: history.len() });
    }
    let tau = op.kernel().tau;
    struct Terms {
        q: Vec<f64>,
        flux_div: Vec<f64>,
        rhs: Vec<f64>,
        valid: Vec<bool>,
    }
    let terms = |s: &FieldState| -> Result<Terms, EulerError> {
        let g: &Grid = &s.grid;
        if g.dim != 1 {
            return Err(EulerError::IncompatibleClosure { closure: "nsa", dim: g.dim });
        }
        let m = g.len();
        let h = g.spacing(0);
        let p = s.p.as_ref().ok_or_else(|| EulerError::InvalidState("no pressure field".into()))?;
        let floor = s.density_floor();
        let ok: Vec<bool> = (0..m).map(|c| s.rho[c] > floor && s.rho[c] > 0.0 && p[c] > 0.0).collect();
        let (rhobar, _) = op.apply(&s.rho, None);
        let temp: Vec<f64> = (0..m).map(|c| if ok[c] { p[c] / ((gamma - 1.0) * s.rho[c] * cv) } else { 1.0 }).collect();
        let ent: Vec<f64> = (0..m).map(|c| if ok[c] { p[c].ln() - gamma * s.rho[c].ln() } else { 0.0 }).collect();
        let lr = |c: usize| (g.neighbor(c, 0, -1), g.neighbor(c, 0, 1));
        let flux: Vec<f64> = (0..m)
            .map(|c| {
                let (l, r) = lr(c);
                let lnt_x = (temp[r].ln() - temp[l].ln()) / (2.0 * h);
                -s.rho[c] * s.u[c] * ent[c] + sigma2 * lnt_x / cv
            })
            .collect();
        let mut t = Terms { q: vec![0.0; m], flux_div: vec![0.0; m], rhs: vec![0.0; m], valid: vec![false; m] };
        for c in 0..m {
            let (l, r) = lr(c);
            let (l2, r2) = (g.neighbor(c, 0, -2), g.neighbor(c, 0, 2));
            t.valid[c] = ok[c] && ok[l] && ok[r] && ok[l2] && ok[r2];
            t.q[c] = -s.rho[c] * ent[c];
            t.flux_div[c] = (flux[r] - flux[l]) / (2.0 * h);
            let ux = (s.u[r] - s.u[l]) / (2.0 * h);
            let tx = (temp[r] - temp[l]) / (2.0 * h);
            t.rhs[c] = 2.0 * tau * rhobar[c] * s.rho[c]
                - sigma1 * ux * ux / (cv * temp[c])
                - sigma2 * (tx / temp[c]).powi(2) / cv;
        }
        Ok(t)
    };
    let mut out = Vec::new();
    let mut prev = terms(&history[0])?;
    for w in history.windows(2) {
        let next = terms(&w[1])?;
        let dt = w[1].t - w[0].t;
        if !(dt > 0.0) {
            return Err(EulerError::InvalidState("snapshot times must increase".into()));
        }
        let h = w[0].grid.spacing(0);
        let mut total = 0.0;
        let mut any = false;
        for c in 0..prev.q.len() {
            if !(prev.valid[c] && next.valid[c]) {
                continue;
            }
            any = true;
            let lhs = (next.q[c] - prev.q[c]) / dt + 0.5 * (prev.flux_div[c] + next.flux_div[c]);
            let rhs = 0.5 * (prev.rhs[c] + next.rhs[c]);
            total += (lhs - rhs).abs() * h;
        }
        if any {
            out.push((0.5 * (w[0].t + w[1].t), total));
        }
        prev = next;
    }
    Ok(out)
}

/// Characteristic tracers for the 1D mono-kinetic transport invariant
/// `(u_x + τρ̄)/ρ`, advected with Heun's method and linear interpolation.
#[derive(Debug, Clone)]
pub struct Tracers {
    pub positions: Vec<f64>,
    pub initial: Vec<f64>,
}

fn interpolate(g: &Grid, values: &[f64], x: f64) -> f64 {
    let h = g.spacing(0);
    let m = g.cells[0];
    let s = (x / h - 0.5).rem_euclid(m as f64);
    let i = (s.floor() as usize).min(m - 1);
    let w = s - i as f64;
    (1.0 - w) * values[i] + w * values[(i + 1) % m]
}

fn transport_quantity(state: &FieldState, op: &NonlocalOperator) -> Vec<f64> {
    let g = &state.grid;
    let (rhobar, _) = op.apply(&state.rho, None);
    let tau = op.kernel().tau;
    (0..g.len())
        .map(|c| {
            let (l, r) = (g.neighbor(c, 0, -1), g.neighbor(c, 0, 1));
            let ux = (state.u[r] - state.u[l]) / (2.0 * g.spacing(0));
            (ux + tau * rhobar[c]) / state.rho[c]
        })
        .collect()
}

impl Tracers {
    /// `count` tracers evenly spaced over the domain.
    pub fn seed(state: &FieldState, op: &NonlocalOperator, count: usize) -> Result<Self, EulerError> {
        if state.grid.dim != 1 {
            return Err(EulerError::InvalidState("tracers are one-dimensional".into()));
        }
        let len = state.grid.length[0];
        let positions: Vec<f64> = (0..count).map(|k| (k as f64 + 0.5) * len / count as f64).collect();
        let q = transport_quantity(state, op);
        let initial = positions.iter().map(|x| interpolate(&state.grid, &q, *x)).collect();
        Ok(Self { positions, initial })
    }

    pub fn advance(&mut self, prev: &FieldState, next: &FieldState) {
        let g = &prev.grid;
        let dt = next.t - prev.t;
        let len = g.length[0];
        for x in self.positions.iter_mut() {
            let v0 = interpolate(g, &prev.u, *x);
            let guess = *x + dt * v0;
            let v1 = interpolate(g, &next.u, guess);
            *x = (*x + 0.5 * dt * (v0 + v1)).rem_euclid(len);
        }
    }

    /// `max_k |q(x_k(t)) − q(x_k(0))|`.
    pub fn deviation(&self, state: &FieldState, op: &NonlocalOperator) -> f64 {
        let q = transport_quantity(state, op);
        self.positions
            .iter()
            .zip(&self.initial)
            .map(|(x, q0)| (interpolate(&state.grid, &q, *x) - q0).abs())
            .fold(0.0, f64::max)
    }
}
