//! Kinetic alignment equation on a periodic-in-`x`, truncated-in-`v` phase grid:
//! `f_t + v f_x + ∂_v(τ f (J − vρ̄)) = σ f_vv`, with `ρ̄ = φ * ρ` and `J = φ * (ρu)`.
//!
//! Transport in `x` is first-order upwind. The velocity flux is of
//! Scharfetter-Gummel type: it reduces to upwinding as `σ → 0` and holds
//! sampled Gaussians at rest exactly. The drift offset of every `x`-row is
//! shifted so that the discrete momentum exchange equals `ρA`, which keeps
//! total momentum conserved for symmetric kernels.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::euler::{EulerError, Grid, NonlocalOperator};
use crate::kernels::{KernelError, KernelSpec};

/// Cells below this value are masked in `f log f`.
pub const MASK_FLOOR: f64 = 1e-30;
/// Boundary cells above this fraction of `max f` flag a clipped velocity domain.
pub const CLIP_FRACTION: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KineticError {
    #[error("invalid phase grid: {0}")]
    InvalidGrid(String),
    #[error("invalid phase state: {0}")]
    InvalidState(String),
    #[error("time step {dt} exceeds the admissible step {admissible}")]
    Cfl { dt: f64, admissible: f64 },
    #[error("need at least {needed} snapshots, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Euler(#[from] EulerError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseGrid {
    pub nx: usize,
    pub nv: usize,
    /// Period in `x`.
    pub length: f64,
    /// Velocities live in `[−vmax, vmax]`.
    pub vmax: f64,
}

impl PhaseGrid {
    pub fn new(nx: usize, nv: usize, length: f64, vmax: f64) -> Result<Self, KineticError> {
        if nx < 3 || nv < 3 {
            return Err(KineticError::InvalidGrid(format!("need at least 3 cells per axis, got {nx}×{nv}")));
        }
        if !(length > 0.0 && length.is_finite() && vmax > 0.0 && vmax.is_finite()) {
            return Err(KineticError::InvalidGrid(format!("length and vmax must be positive, got {length}, {vmax}")));
        }
        Ok(Self { nx, nv, length, vmax })
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dv(&self) -> f64 {
        2.0 * self.vmax / self.nv as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.dx()
    }

    pub fn v(&self, k: usize) -> f64 {
        -self.vmax + (k as f64 + 0.5) * self.dv()
    }

    pub fn x_grid(&self) -> Grid {
        Grid::new_1d(self.nx, self.length).expect("validated phase grid")
    }

    pub fn len(&self) -> usize {
        self.nx * self.nv
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Distribution `f[i * nv + k] ≈ f(x_i, v_k)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub t: f64,
    pub grid: PhaseGrid,
    pub f: Vec<f64>,
    pub sigma: f64,
    /// `None` switches alignment off (`τ = 0`).
    pub kernel: Option<KernelSpec>,
}

impl PhaseState {
    pub fn new(t: f64, grid: PhaseGrid, f: Vec<f64>, sigma: f64, kernel: Option<KernelSpec>) -> Result<Self, KineticError> {
        if f.len() != grid.len() {
            return Err(KineticError::InvalidState(format!("expected {} values, got {}", grid.len(), f.len())));
        }
        if f.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
            return Err(KineticError::InvalidState("f must be finite and non-negative".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(KineticError::InvalidState(format!("σ must be non-negative, got {sigma}")));
        }
        Ok(Self { t, grid, f, sigma, kernel })
    }

    pub fn tau(&self) -> f64 {
        self.kernel.as_ref().map_or(0.0, |k| k.tau)
    }

    fn operator(&self) -> Result<Option<NonlocalOperator>, KineticError> {
        Ok(match &self.kernel {
            Some(k) => Some(NonlocalOperator::new(&self.grid.x_grid(), k)?),
            None => None,
        })
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.f[i * self.grid.nv..(i + 1) * self.grid.nv]
    }

    pub fn mass(&self) -> f64 {
        self.f.iter().sum::<f64>() * self.grid.dx() * self.grid.dv()
    }

    pub fn momentum(&self) -> f64 {
        self.moments().rho_u.iter().sum::<f64>() * self.grid.dx()
    }

    pub fn moments(&self) -> Moments {
        let g = &self.grid;
        let dv = g.dv();
        let mut m = Moments {
            rho: vec![0.0; g.nx],
            rho_u: vec![0.0; g.nx],
            energy: vec![0.0; g.nx],
            pressure: vec![0.0; g.nx],
        };
        for i in 0..g.nx {
            let row = self.row(i);
            let (mut r, mut ru, mut e) = (0.0, 0.0, 0.0);
            for (k, &fk) in row.iter().enumerate() {
                let v = g.v(k);
                r += fk;
                ru += v * fk;
                e += 0.5 * v * v * fk;
            }
            let (r, ru, e) = (r * dv, ru * dv, e * dv);
            m.rho[i] = r;
            m.rho_u[i] = ru;
            m.energy[i] = e;
            m.pressure[i] = if r > 0.0 { 2.0 * e - ru * ru / r } else { 0.0 };
        }
        m
    }

    /// `max f` over the two boundary velocity cells relative to `max f`.
    pub fn tail_fraction(&self) -> f64 {
        let nv = self.grid.nv;
        let peak = self.f.iter().copied().fold(0.0, f64::max);
        if peak == 0.0 {
            return 0.0;
        }
        let edge = (0..self.grid.nx).map(|i| self.f[i * nv].max(self.f[i * nv + nv - 1])).fold(0.0, f64::max);
        edge / peak
    }

    pub fn is_clipped(&self) -> bool {
        self.tail_fraction() > CLIP_FRACTION
    }
}

/// Velocity moments per `x` cell: `ρ`, `ρu`, `∫½v²f` and `P = ∫(v − u)²f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub rho: Vec<f64>,
    pub rho_u: Vec<f64>,
    pub energy: Vec<f64>,
    pub pressure: Vec<f64>,
}

/// `ρ̄ = φ * ρ`, `J = φ * (ρu)` and the alignment force `A = τ(J − uρ̄)`.
struct Drift {
    rhobar: Vec<f64>,
    j: Vec<f64>,
    align: Vec<f64>,
    rho: Vec<f64>,
}

fn drift(state: &PhaseState, op: Option<&NonlocalOperator>) -> Drift {
    let m = state.moments();
    let Some(op) = op else {
        let zero = vec![0.0; m.rho.len()];
        return Drift { rhobar: zero.clone(), j: zero.clone(), align: zero, rho: m.rho };
    };
    let u: Vec<f64> = m.rho.iter().zip(&m.rho_u).map(|(r, ru)| if *r > 0.0 { ru / r } else { 0.0 }).collect();
    let (rhobar, align) = op.apply(&m.rho, Some(&u));
    let align = align.unwrap();
    let tau = op.kernel().tau;
    // A = τ(J − uρ̄) holds for every u where ρ = 0, so J is recovered exactly.
    let j = (0..u.len()).map(|i| align[i] / tau + u[i] * rhobar[i]).collect();
    Drift { rhobar, j, align, rho: m.rho }
}

/// `Q_φ(f, f) = f (J − vρ̄)`.
pub fn collision_term(state: &PhaseState) -> Result<Vec<f64>, KineticError> {
    let g = &state.grid;
    let d = drift(state, state.operator()?.as_ref());
    let mut q = vec![0.0; g.len()];
    for i in 0..g.nx {
        for k in 0..g.nv {
            q[i * g.nv + k] = state.f[i * g.nv + k] * (d.j[i] - g.v(k) * d.rhobar[i]);
        }
    }
    Ok(q)
}

/// `B(z) = z / (e^z − 1)`.
fn bernoulli(z: f64) -> f64 {
    if z.abs() < 1e-8 {
        1.0 - 0.5 * z
    } else {
        z / z.exp_m1()
    }
}

fn bernoulli_prime(z: f64) -> f64 {
    if z.abs() < 1e-3 {
        -0.5 + z / 6.0 - z * z * z / 180.0
    } else if z > 50.0 {
        (1.0 - z) * (-z).exp()
    } else if z < -50.0 {
        -1.0
    } else {
        let em = z.exp_m1();
        (em - z * z.exp()) / (em * em)
    }
}

/// Velocity flux through the face between `fl` and `fr` with drift `a`,
/// and its derivative in `a`.
#[inline]
fn face_flux(a: f64, fl: f64, fr: f64, sigma: f64, dv: f64) -> (f64, f64) {
    if sigma > 0.0 {
        let z = a * dv / sigma;
        let (bm, bp) = (bernoulli(-z), bernoulli(z));
        (sigma / dv * (bm * fl - bp * fr), -bernoulli_prime(-z) * fl - bernoulli_prime(z) * fr)
    } else if a > 0.0 {
        (a * fl, fl)
    } else {
        (a * fr, fr)
    }
}

/// Solves for the row offset `J*` whose face fluxes sum to `target`; the
/// sum is non-decreasing in `J*`.
fn shifted_offset(row: &[f64], j0: f64, rhobar: f64, tau: f64, sigma: f64, g: &PhaseGrid, target: f64) -> f64 {
    let dv = g.dv();
    let eval = |js: f64| {
        let (mut s, mut ds) = (0.0, 0.0);
        for k in 0..g.nv - 1 {
            let a = tau * (js - (g.v(k) + 0.5 * dv) * rhobar);
            let (flux, dflux) = face_flux(a, row[k], row[k + 1], sigma, dv);
            s += flux;
            ds += tau * dflux;
        }
        (s - target, ds)
    };
    let mass: f64 = row.iter().sum();
    if tau == 0.0 || rhobar == 0.0 || mass == 0.0 {
        return j0;
    }
    let tol = 1e-14 * (tau * rhobar * g.vmax * mass + sigma * mass / dv);
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut js = j0;
    let scale = rhobar * dv;
    for _ in 0..100 {
        let (r, dr) = eval(js);
        if r.abs() <= tol {
            break;
        }
        if r < 0.0 {
            lo = lo.max(js);
        } else {
            hi = hi.min(js);
        }
        let mut next = if dr > 0.0 { js - r / dr } else { f64::NAN };
        let bracketed = lo.is_finite() && hi.is_finite();
        if !(next > lo && next < hi) {
            next = if bracketed {
                0.5 * (lo + hi)
            } else if r < 0.0 {
                js + scale.max(2.0 * (js - j0).abs())
            } else {
                js - scale.max(2.0 * (js - j0).abs())
            };
        }
        if bracketed && (hi - lo) <= 1e-15 * (1.0 + js.abs()) {
            break;
        }
        js = next;
    }
    js
}

fn kinetic_rhs(state: &PhaseState, op: Option<&NonlocalOperator>) -> Vec<f64> {
    let g = state.grid;
    let (nx, nv) = (g.nx, g.nv);
    let (dx, dv) = (g.dx(), g.dv());
    let tau = state.tau();
    let sigma = state.sigma;
    let d = drift(state, op);
    let f = &state.f;
    let mut out = vec![0.0; g.len()];
    out.par_chunks_mut(nv).enumerate().for_each(|(i, out_row)| {
        let (im, ip) = ((i + nx - 1) % nx, (i + 1) % nx);
        for (k, o) in out_row.iter_mut().enumerate() {
            let v = g.v(k);
            *o = if v > 0.0 {
                -v * (f[i * nv + k] - f[im * nv + k]) / dx
            } else {
                -v * (f[ip * nv + k] - f[i * nv + k]) / dx
            };
        }
        let row = &f[i * nv..(i + 1) * nv];
        if tau == 0.0 && sigma == 0.0 {
            return;
        }
        let target = d.rho[i] * d.align[i] / dv;
        let js = shifted_offset(row, d.j[i], d.rhobar[i], tau, sigma, &g, target);
        let mut prev = 0.0;
        for k in 0..nv {
            let flux = if k + 1 < nv {
                let a = tau * (js - (g.v(k) + 0.5 * dv) * d.rhobar[i]);
                face_flux(a, row[k], row[k + 1], sigma, dv).0
            } else {
                0.0
            };
            out_row[k] -= (flux - prev) / dv;
            prev = flux;
        }
    });
    out
}

fn admissible_with(state: &PhaseState, op: Option<&NonlocalOperator>, cfl: f64) -> f64 {
    let g = &state.grid;
    let d = drift(state, op);
    let tau = state.tau();
    let amax = (0..g.nx)
        .map(|i| tau * (d.j[i].abs() + g.vmax * d.rhobar[i]))
        .fold(0.0, f64::max);
    let rate = (g.vmax - 0.5 * g.dv()) / g.dx() + amax / g.dv() + 2.0 * state.sigma / (g.dv() * g.dv());
    cfl / rate
}

/// Largest step allowed by the combined transport, drift and diffusion limit
/// `dt (V/Δx + max|a|/Δv + 2σ/Δv²) ≤ cfl`.
pub fn kinetic_admissible_dt(state: &PhaseState, cfl: f64) -> Result<f64, KineticError> {
    Ok(admissible_with(state, state.operator()?.as_ref(), cfl))
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KineticStepReport {
    pub clipped: bool,
}

fn step_with(
    state: &PhaseState,
    op: Option<&NonlocalOperator>,
    dt: f64,
    cfl: f64,
) -> Result<(PhaseState, KineticStepReport), KineticError> {
    let admissible = admissible_with(state, op, cfl);
    if !(dt > 0.0 && dt <= admissible * (1.0 + 1e-12)) {
        return Err(KineticError::Cfl { dt, admissible });
    }
    let l0 = kinetic_rhs(state, op);
    let mut s1 = state.clone();
    s1.f.iter_mut().zip(&l0).for_each(|(z, l)| *z += dt * l);
    let l1 = kinetic_rhs(&s1, op);
    let mut next = state.clone();
    for ((z, a), l) in next.f.iter_mut().zip(&s1.f).zip(&l1) {
        // roundoff below zero is clipped; the scheme is positive under the CFL bound
        *z = (0.5 * *z + 0.5 * (a + dt * l)).max(0.0);
    }
    next.t = state.t + dt;
    let report = KineticStepReport { clipped: next.is_clipped() };
    Ok((next, report))
}

/// One SSP-RK2 step with the default CFL number 0.4.
pub fn kinetic_step(state: &PhaseState, dt: f64) -> Result<(PhaseState, KineticStepReport), KineticError> {
    step_with(state, state.operator()?.as_ref(), dt, 0.4)
}

/// Spatially integrated terms of the kinetic entropy balance at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HSample {
    pub t: f64,
    /// `∬ f log f − f`.
    pub h: f64,
    /// `τ ∫ ρ̄ ρ dx`.
    pub production: f64,
    /// `4σ ∬ |∂_v √f|²`.
    pub dissipation: f64,
    pub mass: f64,
    pub momentum: f64,
}

pub fn h_sample(state: &PhaseState) -> Result<HSample, KineticError> {
    Ok(h_sample_with(state, state.operator()?.as_ref()))
}

fn h_sample_with(state: &PhaseState, op: Option<&NonlocalOperator>) -> HSample {
    let g = &state.grid;
    let (dx, dv) = (g.dx(), g.dv());
    let h = state.f.iter().map(|&z| if z > MASK_FLOOR { z * z.ln() - z } else { -z }).sum::<f64>() * dx * dv;
    let d = drift(state, op);
    let production = state.tau() * d.rhobar.iter().zip(&d.rho).map(|(a, b)| a * b).sum::<f64>() * dx;
    let mut fisher = 0.0;
    for i in 0..g.nx {
        let row = state.row(i);
        for k in 0..g.nv - 1 {
            let s = row[k + 1].sqrt() - row[k].sqrt();
            fisher += s * s;
        }
    }
    HSample {
        t: state.t,
        h,
        production,
        dissipation: 4.0 * state.sigma * fisher / dv * dx,
        mass: d.rho.iter().sum::<f64>() * dx,
        momentum: state.momentum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HBalanceRow {
    pub t: f64,
    pub dh_dt: f64,
    pub production: f64,
    pub dissipation: f64,
    /// `|dH/dt − production + dissipation|`.
    pub residual: f64,
}

/// Balance `dH/dt = τ∫ρ̄ρ − 4σ∬|∂_v√f|²` at every interior sample, with the
/// time derivative taken as a centred difference.
pub fn h_balance(samples: &[HSample]) -> Result<Vec<HBalanceRow>, KineticError> {
    if samples.len() < 3 {
        return Err(KineticError::InsufficientHistory { needed: 3, got: samples.len() });
    }
    Ok(samples
        .windows(3)
        .map(|w| {
            let dh_dt = (w[2].h - w[0].h) / (w[2].t - w[0].t);
            let s = &w[1];
            HBalanceRow {
                t: s.t,
                dh_dt,
                production: s.production,
                dissipation: s.dissipation,
                residual: (dh_dt - s.production + s.dissipation).abs(),
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KineticRunConfig {
    pub t_final: f64,
    /// Fixed step; `None` steps at the admissible limit.
    pub dt: Option<f64>,
    pub cfl: f64,
    pub record_interval: f64,
}

impl Default for KineticRunConfig {
    fn default() -> Self {
        Self { t_final: 1.0, dt: None, cfl: 0.4, record_interval: 0.1 }
    }
}

#[derive(Debug, Clone)]
pub struct KineticRun {
    pub state: PhaseState,
    pub samples: Vec<HSample>,
    pub clipped: bool,
    pub steps: usize,
}

/// Integrates to `t_final`, sampling the entropy terms every
/// `record_interval`; `observer` sees every recorded state.
pub fn integrate_kinetic(
    state0: &PhaseState,
    cfg: &KineticRunConfig,
    mut observer: impl FnMut(&PhaseState, &HSample),
) -> Result<KineticRun, KineticError> {
    if !(cfg.record_interval > 0.0 && cfg.cfl > 0.0 && cfg.t_final.is_finite()) {
        return Err(KineticError::InvalidState("record interval and CFL must be positive".into()));
    }
    let op = state0.operator()?;
    let op = op.as_ref();
    let first = h_sample_with(state0, op);
    observer(state0, &first);
    let mut run = KineticRun { state: state0.clone(), samples: vec![first], clipped: state0.is_clipped(), steps: 0 };
    let mut k_record = 1usize;
    while run.state.t < cfg.t_final {
        let target = (state0.t + k_record as f64 * cfg.record_interval).min(cfg.t_final);
        let s = &run.state;
        let mut h = match cfg.dt {
            Some(dt) => dt,
            None => admissible_with(s, op, cfg.cfl) * (1.0 - 1e-9),
        };
        let remaining = target - s.t;
        let snap = h >= remaining - 1e-9 * h;
        if snap {
            h = remaining;
        }
        let (mut next, report) = step_with(s, op, h, cfg.cfl)?;
        if snap {
            next.t = target;
        }
        run.steps += 1;
        if report.clipped && !run.clipped {
            log::warn!("velocity domain clipped at t = {}", next.t);
        }
        run.clipped |= report.clipped;
        if next.t >= target {
            let sample = h_sample_with(&next, op);
            observer(&next, &sample);
            run.samples.push(sample);
            k_record += 1;
        }
        run.state = next;
    }
    Ok(run)
}

/// `f = ρ(x) N(u(x), θ(x))` sampled at cell centres and renormalised so that
/// each row carries exactly `ρ(x_i)`.
pub fn maxwellian(
    grid: PhaseGrid,
    rho: impl Fn(f64) -> f64,
    u: impl Fn(f64) -> f64,
    theta: impl Fn(f64) -> f64,
) -> Vec<f64> {
    let mut f = vec![0.0; grid.len()];
    for i in 0..grid.nx {
        let x = grid.x(i);
        let (r, m, th) = (rho(x), u(x), theta(x));
        let row = &mut f[i * grid.nv..(i + 1) * grid.nv];
        for (k, z) in row.iter_mut().enumerate() {
            let w = grid.v(k) - m;
            *z = (-0.5 * w * w / th).exp();
        }
        let total: f64 = row.iter().sum::<f64>() * grid.dv();
        if total > 0.0 {
            row.iter_mut().for_each(|z| *z *= r / total);
        }
    }
    f
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialProfile;
    use std::f64::consts::PI;

    fn gaussian_kernel(tau: f64) -> KernelSpec {
        KernelSpec::metric(RadialProfile::Gaussian { length: 0.3 }, tau).unwrap()
    }

    fn smooth_state(nx: usize, nv: usize, sigma: f64, kernel: Option<KernelSpec>) -> PhaseState {
        let g = PhaseGrid::new(nx, nv, 1.0, 6.0).unwrap();
        let f = maxwellian(
            g,
            |x| 1.0 + 0.3 * (2.0 * PI * x).cos(),
            |x| 0.4 * (2.0 * PI * x).sin(),
            |x| 0.5 + 0.1 * (2.0 * PI * x).cos(),
        );
        PhaseState::new(0.0, g, f, sigma, kernel).unwrap()
    }

    #[test]
    fn zero_distribution_has_zero_collision() {
        let g = PhaseGrid::new(8, 8, 1.0, 2.0).unwrap();
        let s = PhaseState::new(0.0, g, vec![0.0; 64], 0.0, Some(gaussian_kernel(1.0))).unwrap();
        assert!(collision_term(&s).unwrap().iter().all(|q| *q == 0.0));
    }

    #[test]
    fn collision_matches_double_integral() {
        let s = smooth_state(16, 16, 0.0, Some(gaussian_kernel(1.3)));
        let g = s.grid;
        let q = collision_term(&s).unwrap();
        let xg = g.x_grid();
        let (dx, dv) = (g.dx(), g.dv());
        for i in 0..16 {
            for k in 0..16 {
                let mut sum = 0.0;
                for j in 0..16 {
                    let phi = s.kernel.as_ref().unwrap().radial_value(xg.periodic_distance(i, j)).unwrap();
                    for l in 0..16 {
                        sum += phi * (g.v(l) - g.v(k)) * s.f[i * 16 + k] * s.f[j * 16 + l];
                    }
                }
                sum *= dx * dv;
                assert!((q[i * 16 + k] - sum).abs() <= 1e-12 * (1.0 + sum.abs()), "{} vs {}", q[i * 16 + k], sum);
            }
        }
    }

    #[test]
    fn narrow_bump_collision_vanishes_at_centre() {
        let g = PhaseGrid::new(16, 33, 1.0, 2.0).unwrap();
        let c = g.v(20);
        let f = maxwellian(g, |x| 1.0 + 0.5 * (2.0 * PI * x).sin(), |_| c, |_| 1e-4);
        let s = PhaseState::new(0.0, g, f, 0.0, Some(gaussian_kernel(1.0))).unwrap();
        let q = collision_term(&s).unwrap();
        let rhobar = NonlocalOperator::new(&g.x_grid(), s.kernel.as_ref().unwrap()).unwrap().apply(&s.moments().rho, None).0;
        for i in 0..16 {
            let peak = s.f[i * 33 + 20];
            assert!(q[i * 33 + 20].abs() <= 1e-9 * peak);
            let k = 19;
            let expect = s.f[i * 33 + k] * rhobar[i] * (c - g.v(k));
            assert!((q[i * 33 + k] - expect).abs() <= 1e-9 * peak);
        }
    }

    #[test]
    fn free_streaming_converges() {
        let err = |nx: usize| {
            let g = PhaseGrid::new(nx, 16, 1.0, 2.0).unwrap();
            let bump = |x: f64| 1.0 + 0.5 * (2.0 * PI * x).cos();
            let f = maxwellian(g, bump, |_| 0.3, |_| 0.5);
            let s = PhaseState::new(0.0, g, f.clone(), 0.0, None).unwrap();
            let run = integrate_kinetic(&s, &KineticRunConfig { t_final: 0.5, ..Default::default() }, |_, _| {}).unwrap();
            let mut e = 0.0;
            for i in 0..nx {
                for k in 0..16 {
                    let shifted = bump(g.x(i) - g.v(k) * 0.5) / bump(g.x(i));
                    e += (run.state.f[i * 16 + k] - f[i * 16 + k] * shifted).abs();
                }
            }
            e * g.dx() * g.dv()
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 0.1);
        let ratio = e1 / e2;
        assert!((1.6..2.4).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn homogeneous_run_conserves_mass_and_momentum() {
        let g = PhaseGrid::new(8, 128, 1.0, 8.0).unwrap();
        let f = maxwellian(g, |_| 1.0, |_| 0.0, |_| 1.0)
            .iter()
            .enumerate()
            .map(|(c, z)| z * (1.0 + 0.5 * (g.v(c % 128)).sin()))
            .collect();
        let s = PhaseState::new(0.0, g, f, 0.3, Some(KernelSpec::constant(1.0, 1.0).unwrap())).unwrap();
        let (m0, p0) = (s.mass(), s.momentum());
        let run = integrate_kinetic(&s, &KineticRunConfig { t_final: 1.0, ..Default::default() }, |_, _| {}).unwrap();
        assert!((run.state.mass() - m0).abs() <= 1e-10);
        assert!((run.state.momentum() - p0).abs() <= 1e-8);
        // the reduced equation relaxes momentum variance toward σ/(τρ̄)
        let m = run.state.moments();
        let theta = m.pressure[0] / m.rho[0];
        let theta0 = s.moments().pressure[0] / s.moments().rho[0];
        assert!((theta - 0.3).abs() < (theta0 - 0.3).abs());
    }

    #[test]
    fn inhomogeneous_run_conserves_momentum() {
        let s = smooth_state(32, 64, 0.2, Some(gaussian_kernel(1.0)));
        let (m0, p0) = (s.mass(), s.momentum());
        let run = integrate_kinetic(&s, &KineticRunConfig { t_final: 0.5, ..Default::default() }, |_, _| {}).unwrap();
        assert!((run.state.mass() - m0).abs() <= 1e-10);
        assert!((run.state.momentum() - p0).abs() <= 1e-8);
        assert!(run.state.f.iter().all(|z| *z >= 0.0));
        assert!(!run.clipped);
    }

    #[test]
    fn stationary_gaussian_is_steady() {
        let (tau, phi0, sigma) = (1.0, 1.0, 0.5);
        let g = PhaseGrid::new(64, 256, 1.0, 5.0).unwrap();
        let theta = sigma / (tau * phi0 * 1.0);
        let f = maxwellian(g, |_| 1.0, |_| 0.25, |_| theta);
        let s = PhaseState::new(0.0, g, f.clone(), sigma, Some(KernelSpec::constant(phi0, tau).unwrap())).unwrap();
        let run = integrate_kinetic(&s, &KineticRunConfig { t_final: 1.0, ..Default::default() }, |_, _| {}).unwrap();
        let l1: f64 = run.state.f.iter().zip(&f).map(|(a, b)| (a - b).abs()).sum::<f64>() * g.dx() * g.dv();
        assert!(l1 <= 1e-3, "L¹ drift {l1}");
        let rows = h_balance(&run.samples).unwrap();
        for r in rows {
            assert!(r.residual <= 0.02 * r.production, "{r:?}");
        }
    }

    #[test]
    fn cfl_is_enforced() {
        let s = smooth_state(16, 16, 0.1, Some(gaussian_kernel(1.0)));
        let dt = kinetic_admissible_dt(&s, 0.4).unwrap();
        assert!(matches!(kinetic_step(&s, 2.0 * dt), Err(KineticError::Cfl { .. })));
        assert!(kinetic_step(&s, dt).is_ok());
    }

    #[test]
    fn h_balance_needs_three_samples() {
        let s = smooth_state(8, 8, 0.1, Some(gaussian_kernel(1.0)));
        let h = h_sample(&s).unwrap();
        assert_eq!(h_balance(&[h, h]), Err(KineticError::InsufficientHistory { needed: 3, got: 2 }));
    }

    #[test]
    fn clipped_tails_are_flagged() {
        let g = PhaseGrid::new(8, 16, 1.0, 1.0).unwrap();
        let f = maxwellian(g, |_| 1.0, |_| 0.0, |_| 1.0);
        let s = PhaseState::new(0.0, g, f, 0.0, Some(gaussian_kernel(1.0))).unwrap();
        assert!(s.is_clipped());
    }

    #[test]
    fn pure_diffusion_dissipates_entropy() {
        let s = smooth_state(16, 64, 0.3, None);
        let cfg = KineticRunConfig { t_final: 0.2, record_interval: 0.02, ..Default::default() };
        let rows = h_balance(&integrate_kinetic(&s, &cfg, |_, _| {}).unwrap().samples).unwrap();
        assert!(rows.iter().all(|r| r.dh_dt < 0.0 && r.production == 0.0));
    }

    #[test]
    fn moments_match_euler_right_side() {
        use crate::euler::{pde_rhs, Closure, FieldState};
        let err = |nx: usize| {
            let kernel = gaussian_kernel(1.0);
            let s = smooth_state(nx, 256, 0.0, Some(kernel.clone()));
            let op = NonlocalOperator::new(&s.grid.x_grid(), &kernel).unwrap();
            let m = s.moments();
            let l = kinetic_rhs(&s, Some(&op));
            let dv = s.grid.dv();
            let u: Vec<f64> = m.rho_u.iter().zip(&m.rho).map(|(a, b)| a / b).collect();
            let field = FieldState::new(0.0, s.grid.x_grid(), m.rho.clone(), u.clone(), Some(m.pressure.clone())).unwrap();
            let r = pde_rhs(&field, &Closure::Isentropic { gamma: 3.0 }, &op).unwrap();
            let mut e: f64 = 0.0;
            for i in 0..nx {
                let row = &l[i * 256..(i + 1) * 256];
                let drho: f64 = row.iter().sum::<f64>() * dv;
                let dmom: f64 = row.iter().enumerate().map(|(k, z)| s.grid.v(k) * z).sum::<f64>() * dv;
                let dmom_euler = r.rho[i] * u[i] + m.rho[i] * r.u[i];
                e = e.max((drho - r.rho[i]).abs()).max((dmom - dmom_euler).abs());
            }
            e
        };
        let (e1, e2) = (err(64), err(128));
        assert!(e1 < 0.5 && e2 < 0.6 * e1, "{e1} {e2}");
    }
}
