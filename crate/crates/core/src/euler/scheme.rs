//! Semi-discrete right-hand side and SSP-RK2 time stepping.
//!
//! Mass uses a conservative upwind flux, velocity advection is upwinded per
//! component, and the pressure closures add local Lax-Friedrichs diffusion
//! (coefficient `c Δx / 2`, `c` the sound speed) to the velocity and pressure
//! equations so that the acoustic part stays stable.

use rayon::prelude::*;

use super::nonlocal::NonlocalOperator;
use super::{Closure, EulerError, FieldState};

const PAR_THRESHOLD: usize = 4096;

/// Time derivatives of the state, plus the thickness used to form them.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldRhs {
    pub rho: Vec<f64>,
    pub u: Vec<f64>,
    pub p: Option<Vec<f64>>,
    pub rhobar: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepReport {
    /// Some pressure value went negative and was reset to zero.
    pub pressure_floored: bool,
}

fn check_compatible(state: &FieldState, closure: &Closure) -> Result<(), EulerError> {
    closure.validate(state.grid.dim)?;
    if closure.has_pressure() != state.p.is_some() {
        return Err(EulerError::InvalidState(format!(
            "closure {} {} a pressure field",
            closure.name(),
            if closure.has_pressure() { "requires" } else { "does not take" }
        )));
    }
    Ok(())
}

/// Semi-discrete right-hand side for every unknown.
pub fn pde_rhs(state: &FieldState, closure: &Closure, op: &NonlocalOperator) -> Result<FieldRhs, EulerError> {
    check_compatible(state, closure)?;
    let g = &state.grid;
    let m = g.len();
    let dim = g.dim;
    let floor = state.density_floor();
    let tau = op.kernel().tau;
    let (rhobar, align) = op.apply(&state.rho, Some(&state.u));
    let align = align.unwrap();
    let rho = &state.rho;
    let u = &state.u;

    let gamma = closure.gamma().unwrap_or(0.0);
    let rho_div: Vec<f64> = rho.iter().map(|r| r.max(floor)).collect();
    let sound: Option<Vec<f64>> = state.p.as_ref().map(|p| {
        p.iter().zip(&rho_div).map(|(p, r)| (gamma * p.max(0.0) / r).sqrt()).collect()
    });
    if closure.has_pressure() {
        if let Some(cell) = rho.iter().position(|r| *r < floor || *r == 0.0) {
            return Err(EulerError::Vacuum { cell, rho: rho[cell] });
        }
    }
    let temperature: Option<Vec<f64>> = match (*closure, &state.p) {
        (Closure::Nsa { gamma, cv, .. }, Some(p)) => {
            Some(p.iter().zip(&rho_div).map(|(p, r)| p / ((gamma - 1.0) * r * cv)).collect())
        }
        _ => None,
    };

    let mass_flux = |l: usize, r: usize, a: usize| -> f64 {
        let uf = 0.5 * (u[l * dim + a] + u[r * dim + a]);
        if uf >= 0.0 {
            uf * rho[l]
        } else {
            uf * rho[r]
        }
    };

    let cell = |c: usize| -> (f64, [f64; 2], f64) {
        let mut drho = 0.0;
        let mut du = [0.0; 2];
        let mut dp = 0.0;
        for a in 0..dim {
            let h = g.spacing(a);
            let l = g.neighbor(c, a, -1);
            let r = g.neighbor(c, a, 1);
            drho -= (mass_flux(c, r, a) - mass_flux(l, c, a)) / h;
            let ua = u[c * dim + a];
            for d in 0..dim {
                let grad = if ua > 0.0 {
                    (u[c * dim + d] - u[l * dim + d]) / h
                } else {
                    (u[r * dim + d] - u[c * dim + d]) / h
                };
                du[d] -= ua * grad;
            }
            if let (Some(p), Some(cs)) = (&state.p, &sound) {
                let cr = cs[c].max(cs[r]);
                let cl = cs[c].max(cs[l]);
                du[a] -= (p[r] - p[l]) / (2.0 * h) / rho_div[c];
                for d in 0..dim {
                    du[d] += (cr * (u[r * dim + d] - u[c * dim + d]) - cl * (u[c * dim + d] - u[l * dim + d]))
                        / (2.0 * h);
                }
                let pgrad = if ua > 0.0 { (p[c] - p[l]) / h } else { (p[r] - p[c]) / h };
                dp -= ua * pgrad;
                dp -= gamma * p[c] * (u[r * dim + a] - u[l * dim + a]) / (2.0 * h);
                dp += (cr * (p[r] - p[c]) - cl * (p[c] - p[l])) / (2.0 * h);
            }
        }
        for d in 0..dim {
            du[d] += align[c * dim + d];
        }
        if let Some(p) = &state.p {
            dp -= 2.0 * tau * p[c] * rhobar[c];
        }
        if let (Closure::Nsa { gamma, sigma1, sigma2, .. }, Some(temp)) = (closure, &temperature) {
            let h = g.spacing(0);
            let (l, r) = (g.neighbor(c, 0, -1), g.neighbor(c, 0, 1));
            du[0] += sigma1 * (u[r] - 2.0 * u[c] + u[l]) / (h * h) / rho_div[c];
            let ux = (u[r] - u[l]) / (2.0 * h);
            let txx = (temp[r] - 2.0 * temp[c] + temp[l]) / (h * h);
            dp += (gamma - 1.0) * (sigma1 * ux * ux + sigma2 * txx);
        }
        (drho, du, dp)
    };

    let cells: Vec<(f64, [f64; 2], f64)> = if m >= PAR_THRESHOLD {
        (0..m).into_par_iter().map(cell).collect()
    } else {
        (0..m).map(cell).collect()
    };
    let mut out = FieldRhs {
        rho: Vec::with_capacity(m),
        u: Vec::with_capacity(m * dim),
        p: state.p.as_ref().map(|_| Vec::with_capacity(m)),
        rhobar,
    };
    for (drho, du, dp) in cells {
        out.rho.push(drho);
        out.u.extend_from_slice(&du[..dim]);
        if let Some(p) = out.p.as_mut() {
            p.push(dp);
        }
    }
    Ok(out)
}

fn admissible_with(state: &FieldState, closure: &Closure, tau: f64, rhobar_max: f64, cfl: f64) -> f64 {
    let g = &state.grid;
    let dim = g.dim;
    let floor = state.density_floor();
    let umax = state
        .u
        .chunks(dim)
        .map(|w| w.iter().map(|z| z * z).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    let gamma = closure.gamma().unwrap_or(0.0);
    let rho_min = state.rho.iter().map(|r| r.max(floor)).fold(f64::INFINITY, f64::min);
    let cmax = state
        .p
        .as_ref()
        .map(|p| {
            p.iter().zip(&state.rho).map(|(p, r)| (gamma * p.max(0.0) / r.max(floor)).sqrt()).fold(0.0, f64::max)
        })
        .unwrap_or(0.0);
    let hmin = (0..dim).map(|a| g.spacing(a)).fold(f64::INFINITY, f64::min);
    let mut dt = f64::INFINITY;
    if umax + cmax > 0.0 {
        dt = dt.min(cfl * hmin / (dim as f64 * (umax + cmax)));
    }
    if let Closure::Nsa { sigma1, sigma2, cv, .. } = *closure {
        let nu = (sigma1 / rho_min).max(sigma2 / (rho_min * cv));
        if nu > 0.0 {
            dt = dt.min(0.25 * hmin * hmin / nu);
        }
    }
    if tau * rhobar_max > 0.0 {
        dt = dt.min(0.5 / (tau * rhobar_max));
    }
    dt
}

/// Largest step satisfying the advective/acoustic CFL bound, the NSA
/// diffusion bound `0.25 Δx² / max(σ1/ρ, σ2/(ρ C_v))`, and the alignment
/// relaxation bound `1 / (2τ max ρ̄)`.
pub fn admissible_dt(state: &FieldState, closure: &Closure, op: &NonlocalOperator, cfl: f64) -> f64 {
    let (rhobar, _) = op.apply(&state.rho, None);
    let rbmax = rhobar.iter().cloned().fold(0.0, f64::max);
    admissible_with(state, closure, op.kernel().tau, rbmax, cfl)
}

fn axpy(base: &FieldState, dt: f64, k: &FieldRhs) -> FieldState {
    let mut s = base.clone();
    for (a, b) in s.rho.iter_mut().zip(&k.rho) {
        *a += dt * b;
    }
    for (a, b) in s.u.iter_mut().zip(&k.u) {
        *a += dt * b;
    }
    if let (Some(p), Some(kp)) = (s.p.as_mut(), &k.p) {
        for (a, b) in p.iter_mut().zip(kp) {
            *a += dt * b;
        }
    }
    s
}

fn floor_pressure(s: &mut FieldState) -> bool {
    let mut floored = false;
    if let Some(p) = s.p.as_mut() {
        for z in p.iter_mut() {
            if *z < 0.0 {
                *z = 0.0;
                floored = true;
            }
        }
    }
    floored
}

/// One SSP-RK2 step of size `dt`.
pub fn step(
    state: &FieldState,
    closure: &Closure,
    op: &NonlocalOperator,
    dt: f64,
    cfl: f64,
) -> Result<(FieldState, StepReport), EulerError> {
    let k1 = pde_rhs(state, closure, op)?;
    let rbmax = k1.rhobar.iter().cloned().fold(0.0, f64::max);
    let admissible = admissible_with(state, closure, op.kernel().tau, rbmax, cfl);
    if !(dt > 0.0) || dt > admissible * (1.0 + 1e-12) {
        return Err(EulerError::Cfl { dt, admissible });
    }
    let mut s1 = axpy(state, dt, &k1);
    let mut floored = floor_pressure(&mut s1);
    let k2 = pde_rhs(&s1, closure, op)?;
    let s2 = axpy(&s1, dt, &k2);
    let mut next = state.clone();
    for (i, z) in next.rho.iter_mut().enumerate() {
        *z = 0.5 * (*z + s2.rho[i]);
    }
    for (i, z) in next.u.iter_mut().enumerate() {
        *z = 0.5 * (*z + s2.u[i]);
    }
    if let (Some(p), Some(p2)) = (next.p.as_mut(), &s2.p) {
        for (z, b) in p.iter_mut().zip(p2) {
            *z = 0.5 * (*z + b);
        }
    }
    floored |= floor_pressure(&mut next);
    next.t = state.t + dt;
    if floored {
        log::debug!("pressure floored at t = {}", next.t);
    }
    Ok((next, StepReport { pressure_floored: floored }))
}

/// Face-difference statistics of the velocity used by the blow-up detector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceStatistics {
    /// `max |u_{i+1} − u_i| / Δx` over faces, axes and components; NaN when
    /// any velocity is non-finite.
    pub max_slope: f64,
    /// `max |u_{i+1} − u_i|`.
    pub max_jump: f64,
    /// Largest range `max u_d − min u_d` over components.
    pub range: f64,
}

pub fn face_statistics(state: &FieldState) -> FaceStatistics {
    let g = &state.grid;
    let dim = g.dim;
    let mut out = FaceStatistics { max_slope: 0.0, max_jump: 0.0, range: 0.0 };
    for d in 0..dim {
        let comp = state.u.iter().skip(d).step_by(dim);
        let (lo, hi) = comp.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| (lo.min(*z), hi.max(*z)));
        out.range = out.range.max(hi - lo);
    }
    for c in 0..g.len() {
        for a in 0..dim {
            let r = g.neighbor(c, a, 1);
            let h = g.spacing(a);
            for d in 0..dim {
                let jump = (state.u[r * dim + d] - state.u[c * dim + d]).abs();
                if !jump.is_finite() {
                    out.max_slope = f64::NAN;
                    return out;
                }
                out.max_jump = out.max_jump.max(jump);
                out.max_slope = out.max_slope.max(jump / h);
            }
        }
    }
    out
}

/// `max |u_{i+1} − u_i| / Δx`; NaN when any velocity is non-finite.
pub fn max_face_slope(state: &FieldState) -> f64 {
    face_statistics(state).max_slope
}
