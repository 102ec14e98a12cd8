//! Named initial-data presets for every system.
//!
//! Random presets draw from a ChaCha8 stream keyed by the run seed, so a
//! rerun with the same seed is bit-identical.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::agents::{AgentError, AgentState};
use crate::config::{RunConfig, System};
use crate::euler::{thickness, Closure, EulerError, FieldState, Grid};
use crate::kinetic::{maxwellian, KineticError, PhaseGrid, PhaseState};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PresetError {
    #[error("preset `{preset}`: {msg}")]
    Invalid { preset: String, msg: String },
    #[error(transparent)]
    Agents(#[from] AgentError),
    #[error(transparent)]
    Euler(#[from] EulerError),
    #[error(transparent)]
    Kinetic(#[from] KineticError),
}

type Params = &'static [(&'static str, Option<f64>)];

const AGENT_PRESETS: &[(&str, Params)] = &[
    ("random", &[("x_spread", Some(1.0)), ("v_spread", Some(1.0))]),
    ("pair", &[("separation", Some(1.0)), ("speed", Some(1.0))]),
];

const EULER1D_PRESETS: &[(&str, Params)] = &[
    ("uniform", &[("rho", Some(1.0)), ("u", Some(0.0)), ("p0", Some(0.0))]),
    (
        "sine",
        &[("rho0", Some(1.0)), ("rho_amp", Some(0.0)), ("u_amp", Some(0.1)), ("waves", Some(1.0)), ("p0", Some(0.0))],
    ),
    (
        "gaussian_bump",
        &[("floor", Some(0.05)), ("amp", Some(1.0)), ("width", Some(0.1)), ("u_amp", Some(0.0)), ("p0", Some(0.0))],
    ),
    ("slope_sine", &[("slope_ratio", Some(-0.5)), ("rho0", Some(1.0)), ("rho_amp", Some(0.0)), ("p0", Some(0.0))]),
];

const EULER2D_PRESETS: &[(&str, Params)] = &[
    ("uniform", &[("rho", Some(1.0)), ("ux", Some(0.0)), ("uy", Some(0.0)), ("p0", Some(0.0))]),
    ("sine", &[("rho_amp", Some(0.0)), ("u_amp", Some(0.1)), ("p0", Some(0.0))]),
    ("vortex", &[("amp", Some(1.0)), ("width", Some(0.1)), ("p0", Some(0.0))]),
];

const KINETIC_PRESETS: &[(&str, Params)] = &[
    ("maxwellian", &[("rho_amp", Some(0.3)), ("u_amp", Some(0.3)), ("theta", Some(0.5))]),
    ("stationary_gaussian", &[("mean", Some(0.0)), ("rho", Some(1.0))]),
];

fn table(system: System) -> &'static [(&'static str, Params)] {
    match system {
        System::Agents => AGENT_PRESETS,
        System::Euler1d => EULER1D_PRESETS,
        System::Euler2d => EULER2D_PRESETS,
        System::Kinetic => KINETIC_PRESETS,
    }
}

pub fn preset_names(system: System) -> Vec<&'static str> {
    table(system).iter().map(|(n, _)| *n).collect()
}

/// Parameter names of a preset with their defaults (`None` = required).
pub fn preset_params(system: System, name: &str) -> Option<Params> {
    table(system).iter().find(|(n, _)| *n == name).map(|(_, p)| *p)
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    Agents(AgentState),
    Field(FieldState),
    Phase(PhaseState),
}

pub fn build_initial(cfg: &RunConfig) -> Result<InitialState, PresetError> {
    let name = cfg.initial.preset.as_str();
    let p = |k: &str| cfg.initial.params[k];
    let invalid = |msg: String| PresetError::Invalid { preset: name.to_string(), msg };
    let kernel = cfg.kernel.build().map_err(&invalid)?;
    match cfg.system {
        System::Agents => {
            let (n, dim) = (cfg.agent_count, cfg.agent_dim);
            let (x, v) = match name {
                "random" => {
                    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
                    let (xs, vs) = (p("x_spread"), p("v_spread"));
                    let x = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0) * xs).collect();
                    let v = (0..n * dim).map(|_| rng.gen_range(-1.0..1.0) * vs).collect();
                    (x, v)
                }
                _ => {
                    let mut x = vec![0.0; 2 * dim];
                    let mut v = vec![0.0; 2 * dim];
                    x[dim] = p("separation");
                    v[0] = p("speed");
                    v[dim] = -p("speed");
                    (x, v)
                }
            };
            Ok(InitialState::Agents(AgentState::new(0.0, dim, x, v)?))
        }
        System::Euler1d => {
            let closure = cfg.closure.build(1);
            let grid = Grid::new_1d(cfg.grid.nx, cfg.grid.lx)?;
            let l = cfg.grid.lx;
            let xs: Vec<f64> = (0..grid.len()).map(|c| grid.center(c)[0]).collect();
            let (rho, u): (Vec<f64>, Vec<f64>) = match name {
                "uniform" => (vec![p("rho"); xs.len()], vec![p("u"); xs.len()]),
                "sine" => {
                    let k = 2.0 * PI * p("waves") / l;
                    xs.iter()
                        .map(|x| (p("rho0") * (1.0 + p("rho_amp") * (k * x).cos()), p("u_amp") * (k * x).sin()))
                        .unzip()
                }
                "gaussian_bump" => xs
                    .iter()
                    .map(|x| {
                        let d = (x - 0.5 * l) / p("width");
                        (p("floor") + p("amp") * (-0.5 * d * d).exp(), p("u_amp") * (2.0 * PI * x / l).sin())
                    })
                    .unzip(),
                _ => {
                    // min u'₀ = slope_ratio · τ · min ρ̄₀, attained at x = L/2
                    let k = 2.0 * PI / l;
                    let rho: Vec<f64> = xs.iter().map(|x| p("rho0") * (1.0 + p("rho_amp") * (k * x).cos())).collect();
                    let kernel = kernel.as_ref().expect("alignment kernel");
                    let rhobar = thickness(&rho, kernel, &grid)?;
                    let eta = rhobar.iter().copied().fold(f64::INFINITY, f64::min);
                    let slope = p("slope_ratio") * kernel.tau * eta;
                    let u = xs.iter().map(|x| slope / k * (k * x).sin()).collect();
                    (rho, u)
                }
            };
            let pressure = pressure_for(&closure, &rho, p("p0"));
            Ok(InitialState::Field(FieldState::new(0.0, grid, rho, u, pressure)?))
        }
        System::Euler2d => {
            let closure = cfg.closure.build(2);
            let grid = Grid::new_2d(cfg.grid.nx, cfg.grid.ny, cfg.grid.lx, cfg.grid.ly)?;
            let (lx, ly) = (cfg.grid.lx, cfg.grid.ly);
            let mut rho = vec![0.0; grid.len()];
            let mut u = vec![0.0; 2 * grid.len()];
            for c in 0..grid.len() {
                let [x, y] = grid.center(c);
                let (kx, ky) = (2.0 * PI * x / lx, 2.0 * PI * y / ly);
                let (r, ux, uy) = match name {
                    "uniform" => (p("rho"), p("ux"), p("uy")),
                    "sine" => (1.0 + p("rho_amp") * kx.cos() * ky.cos(), p("u_amp") * ky.sin(), p("u_amp") * kx.sin()),
                    _ => {
                        let (dx, dy) = (x - 0.5 * lx, y - 0.5 * ly);
                        let w = p("width");
                        let g = p("amp") / w * (-(dx * dx + dy * dy) / (2.0 * w * w)).exp();
                        (1.0, -g * dy, g * dx)
                    }
                };
                rho[c] = r;
                u[2 * c] = ux;
                u[2 * c + 1] = uy;
            }
            let pressure = pressure_for(&closure, &rho, p("p0"));
            Ok(InitialState::Field(FieldState::new(0.0, grid, rho, u, pressure)?))
        }
        System::Kinetic => {
            let g = PhaseGrid::new(cfg.phase.nx, cfg.phase.nv, cfg.phase.length, cfg.phase.vmax)?;
            let sigma = cfg.phase.sigma;
            let k = 2.0 * PI / g.length;
            let f = match name {
                "maxwellian" => {
                    let (ra, ua, th) = (p("rho_amp"), p("u_amp"), p("theta"));
                    if !(th > 0.0) {
                        return Err(invalid(format!("theta must be positive, got {th}")));
                    }
                    maxwellian(g, |x| 1.0 + ra * (k * x).cos(), |x| ua * (k * x).sin(), |_| th)
                }
                _ => {
                    let phi0 = kernel.as_ref().and_then(|k| k.constant_value());
                    let (Some(phi0), true) = (phi0, sigma > 0.0) else {
                        return Err(invalid("needs a constant kernel and σ > 0".into()));
                    };
                    let m0 = p("rho") * g.length;
                    let theta = sigma / (kernel.as_ref().unwrap().tau * phi0 * m0);
                    maxwellian(g, |_| p("rho"), |_| p("mean"), |_| theta)
                }
            };
            Ok(InitialState::Phase(PhaseState::new(0.0, g, f, sigma, kernel)?))
        }
    }
}

/// `p = p₀ ρ^γ` for pressure closures.
fn pressure_for(closure: &Closure, rho: &[f64], p0: f64) -> Option<Vec<f64>> {
    closure.gamma().map(|gamma| rho.iter().map(|r| p0 * r.powf(gamma)).collect())
}
