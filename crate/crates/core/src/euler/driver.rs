//! Time loop with recording, observers and blow-up detection.

use super::analysis::field_record;
use super::nonlocal::NonlocalOperator;
use super::scheme::{admissible_dt, face_statistics, step, FaceStatistics};
use super::{Closure, EulerError, FieldState};
use crate::diagnostics::DiagnosticsRecord;

#[derive(Debug, Clone, PartialEq)]
pub struct FieldRunConfig {
    pub closure: Closure,
    pub t_final: f64,
    /// Fixed step; `None` steps at the admissible limit.
    pub dt: Option<f64>,
    pub cfl: f64,
    /// Time between diagnostics records.
    pub record_interval: f64,
    /// A run is declared blown up once the maximal face slope exceeds this
    /// multiple of its initial value (or of `τ max ρ̄₀`, whichever is larger),
    pub blowup_factor: f64,
    /// or once a single face jump carries this fraction of the velocity range
    /// (the gradient is no longer resolved by the grid).
    pub shock_fraction: f64,
}

impl Default for FieldRunConfig {
    fn default() -> Self {
        Self {
            closure: Closure::MonoKinetic,
            t_final: 1.0,
            dt: None,
            cfl: 0.4,
            record_interval: 0.1,
            blowup_factor: 100.0,
            shock_fraction: 0.25,
        }
    }
}

/// Hooks into [`integrate_field`]; both methods default to no-ops.
pub trait FieldObserver {
    fn on_step(&mut self, _prev: &FieldState, _next: &FieldState) {}
    /// `prev` is the state one step before `state` (absent at the start).
    fn on_record(&mut self, _prev: Option<&FieldState>, _state: &FieldState, _record: &DiagnosticsRecord) {}
}

impl FieldObserver for () {}

#[derive(Debug, Clone)]
pub struct FieldRun {
    pub state: FieldState,
    pub records: Vec<DiagnosticsRecord>,
    pub blowup_at: Option<f64>,
    pub pressure_floored: bool,
    pub steps: usize,
}

pub fn integrate_field(
    state0: &FieldState,
    cfg: &FieldRunConfig,
    op: &NonlocalOperator,
    observer: &mut dyn FieldObserver,
) -> Result<FieldRun, EulerError> {
    if !(cfg.record_interval > 0.0 && cfg.cfl > 0.0 && cfg.t_final.is_finite()) {
        return Err(EulerError::InvalidState("record interval and CFL must be positive".into()));
    }
    let faces0 = face_statistics(state0);
    // Flat initial velocities have no slope to compare against; the
    // alignment rate τ max ρ̄ has the same units and sets the scale instead.
    let (rhobar0, _) = op.apply(&state0.rho, None);
    let rate = op.kernel().tau * rhobar0.iter().copied().fold(0.0, f64::max);
    let threshold = cfg.blowup_factor * faces0.max_slope.max(rate).max(1e-300);
    // Below this range the jump test would only see roundoff.
    let range_floor = 1e-8 * faces0.range;
    let blown_up = |f: &FaceStatistics| {
        !(f.max_slope <= threshold)
            || (f.range > range_floor && f.max_jump >= cfg.shock_fraction * f.range)
    };
    let mut records = Vec::new();
    let first = field_record(state0, &cfg.closure, op)?;
    observer.on_record(None, state0, &first);
    records.push(first);
    let mut s = state0.clone();
    let mut run = FieldRun { state: s.clone(), records: Vec::new(), blowup_at: None, pressure_floored: false, steps: 0 };
    let mut k_record = 1usize;
    while s.t < cfg.t_final {
        let target = (state0.t + k_record as f64 * cfg.record_interval).min(cfg.t_final);
        let mut h = match cfg.dt {
            Some(dt) => dt,
            None => admissible_dt(&s, &cfg.closure, op, cfg.cfl) * (1.0 - 1e-9),
        };
        let remaining = target - s.t;
        if h >= remaining - 1e-9 * h {
            h = remaining;
        }
        let (mut next, report) = step(&s, &cfg.closure, op, h, cfg.cfl)?;
        run.steps += 1;
        run.pressure_floored |= report.pressure_floored;
        if h == remaining {
            next.t = target;
        }
        let faces = face_statistics(&next);
        if !next.is_finite() || blown_up(&faces) {
            log::info!("blow-up detected at t = {} (slope {:e})", next.t, faces.max_slope);
            run.blowup_at = Some(next.t);
            break;
        }
        observer.on_step(&s, &next);
        if next.t >= target {
            let r = field_record(&next, &cfg.closure, op)?;
            observer.on_record(Some(&s), &next, &r);
            records.push(r);
            k_record += 1;
        }
        s = next;
    }
    run.state = s;
    run.records = records;
    Ok(run)
}
