//! Euler alignment system on a periodic grid in one or two dimensions.
//!
//! Unknowns are cell averages of `ρ`, `u` and, for pressure closures, `p`.
//! Cells are indexed `j * nx + i`; velocities are interleaved per cell.

mod analysis;
mod driver;
mod nonlocal;
mod scheme;

pub use analysis::{
    energy_fluctuation_field, entropy_field, field_record, nsa_entropy_balance_residual,
    sym_gradient_spectrum, EntropyField, GradientSpectrum, Tracers,
};
pub use driver::{integrate_field, FieldObserver, FieldRun, FieldRunConfig};
pub use nonlocal::{alignment_rhs, thickness, NonlocalOperator};
pub use scheme::{
    admissible_dt, face_statistics, max_face_slope, pde_rhs, step, FaceStatistics, FieldRhs, StepReport,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernels::KernelError;

/// Divisions by `ρ` use `max(ρ, VACUUM_FLOOR · mean ρ)`; pressure-coupled
/// cells below it are rejected.
pub const VACUUM_FLOOR: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EulerError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid field state: {0}")]
    InvalidState(String),
    #[error("closure {closure} is not available in {dim}D")]
    IncompatibleClosure { closure: &'static str, dim: usize },
    #[error("density {rho} below the vacuum floor in pressure-coupled cell {cell}")]
    Vacuum { cell: usize, rho: f64 },
    #[error("time step {dt} exceeds the admissible step {admissible}")]
    Cfl { dt: f64, admissible: f64 },
    #[error("every cell is masked; no support to evaluate")]
    EmptySupport,
    #[error("need at least {needed} snapshots, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Uniform periodic grid; in 1D `cells[1] == 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub dim: usize,
    pub cells: [usize; 2],
    pub length: [f64; 2],
}

impl Grid {
    pub fn new_1d(cells: usize, length: f64) -> Result<Self, EulerError> {
        Self::new(1, [cells, 1], [length, 1.0])
    }

    pub fn new_2d(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self, EulerError> {
        Self::new(2, [nx, ny], [lx, ly])
    }

    fn new(dim: usize, cells: [usize; 2], length: [f64; 2]) -> Result<Self, EulerError> {
        for a in 0..dim {
            if cells[a] < 3 {
                return Err(EulerError::InvalidGrid(format!("need at least 3 cells per axis, got {}", cells[a])));
            }
            if !(length[a] > 0.0 && length[a].is_finite()) {
                return Err(EulerError::InvalidGrid(format!("domain length must be positive, got {}", length[a])));
            }
        }
        Ok(Self { dim, cells, length })
    }

    pub fn len(&self) -> usize {
        self.cells[0] * self.cells[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.length[axis] / self.cells[axis] as f64
    }

    pub fn cell_volume(&self) -> f64 {
        (0..self.dim).map(|a| self.spacing(a)).product()
    }

    /// Cell centre of cell `c`.
    pub fn center(&self, c: usize) -> [f64; 2] {
        let (i, j) = (c % self.cells[0], c / self.cells[0]);
        [(i as f64 + 0.5) * self.spacing(0), (j as f64 + 0.5) * self.spacing(1)]
    }

    /// Neighbour of `c` shifted by `offset` cells along `axis`, periodically.
    #[inline]
    pub fn neighbor(&self, c: usize, axis: usize, offset: isize) -> usize {
        let nx = self.cells[0];
        let (i, j) = (c % nx, c / nx);
        if axis == 0 {
            let m = nx as isize;
            j * nx + (i as isize + offset).rem_euclid(m) as usize
        } else {
            let m = self.cells[1] as isize;
            (j as isize + offset).rem_euclid(m) as usize * nx + i
        }
    }

    /// Minimal-image separation of two cell centres.
    pub fn periodic_distance(&self, a: usize, b: usize) -> f64 {
        let nx = self.cells[0];
        let mut r2 = 0.0;
        for (axis, (ia, ib)) in [(a % nx, b % nx), (a / nx, b / nx)].into_iter().enumerate().take(self.dim) {
            let d = ia.abs_diff(ib);
            let d = d.min(self.cells[axis] - d) as f64 * self.spacing(axis);
            r2 += d * d;
        }
        r2.sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "closure", rename_all = "snake_case")]
pub enum Closure {
    MonoKinetic,
    Isentropic { gamma: f64 },
    /// One-dimensional Navier-Stokes alignment with viscosity `σ1`, heat
    /// conductivity `σ2` and `C_v T = e`.
    Nsa { gamma: f64, sigma1: f64, sigma2: f64, cv: f64 },
}

impl Closure {
    /// `γ = 1 + 2/n`.
    pub fn default_gamma(dim: usize) -> f64 {
        1.0 + 2.0 / dim as f64
    }

    pub fn isentropic(dim: usize) -> Self {
        Closure::Isentropic { gamma: Self::default_gamma(dim) }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Closure::MonoKinetic => "mono_kinetic",
            Closure::Isentropic { .. } => "isentropic",
            Closure::Nsa { .. } => "nsa",
        }
    }

    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Closure::MonoKinetic => None,
            Closure::Isentropic { gamma } | Closure::Nsa { gamma, .. } => Some(gamma),
        }
    }

    pub fn has_pressure(&self) -> bool {
        !matches!(self, Closure::MonoKinetic)
    }

    pub fn validate(&self, dim: usize) -> Result<(), EulerError> {
        let bad = |msg: String| Err(EulerError::InvalidState(msg));
        match *self {
            Closure::MonoKinetic => Ok(()),
            Closure::Isentropic { gamma } if !(gamma > 1.0) => bad(format!("γ must exceed 1, got {gamma}")),
            Closure::Isentropic { .. } => Ok(()),
            Closure::Nsa { .. } if dim != 1 => Err(EulerError::IncompatibleClosure { closure: "nsa", dim }),
            Closure::Nsa { gamma, sigma1, sigma2, cv } => {
                if !(gamma > 1.0) {
                    bad(format!("γ must exceed 1, got {gamma}"))
                } else if !(sigma1 >= 0.0 && sigma2 >= 0.0) {
                    bad(format!("σ1, σ2 must be non-negative, got {sigma1}, {sigma2}"))
                } else if !(cv > 0.0) {
                    bad(format!("C_v must be positive, got {cv}"))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Hydrodynamic state on a periodic grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub t: f64,
    pub grid: Grid,
    pub rho: Vec<f64>,
    /// `dim` components per cell.
    pub u: Vec<f64>,
    pub p: Option<Vec<f64>>,
}

impl FieldState {
    pub fn new(
        t: f64,
        grid: Grid,
        rho: Vec<f64>,
        u: Vec<f64>,
        p: Option<Vec<f64>>,
    ) -> Result<Self, EulerError> {
        let m = grid.len();
        if rho.len() != m || u.len() != m * grid.dim || p.as_ref().is_some_and(|p| p.len() != m) {
            return Err(EulerError::InvalidState("array sizes do not match the grid".into()));
        }
        if rho.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(EulerError::InvalidState("density must be finite and non-negative".into()));
        }
        if u.iter().any(|z| !z.is_finite()) {
            return Err(EulerError::InvalidState("velocity must be finite".into()));
        }
        if let Some(p) = &p {
            if p.iter().any(|z| !(z.is_finite() && *z >= 0.0)) {
                return Err(EulerError::InvalidState("pressure must be finite and non-negative".into()));
            }
        }
        Ok(Self { t, grid, rho, u, p })
    }

    pub fn mass(&self) -> f64 {
        self.rho.iter().sum::<f64>() * self.grid.cell_volume()
    }

    pub fn momentum(&self) -> Vec<f64> {
        let dim = self.grid.dim;
        let dv = self.grid.cell_volume();
        (0..dim)
            .map(|d| self.rho.iter().enumerate().map(|(c, r)| r * self.u[c * dim + d]).sum::<f64>() * dv)
            .collect()
    }

    pub fn pressure_integral(&self) -> Option<f64> {
        self.p.as_ref().map(|p| p.iter().sum::<f64>() * self.grid.cell_volume())
    }

    pub(crate) fn density_floor(&self) -> f64 {
        let mean = self.rho.iter().sum::<f64>() / self.rho.len() as f64;
        VACUUM_FLOOR * mean
    }

    pub fn is_finite(&self) -> bool {
        self.rho.iter().chain(&self.u).chain(self.p.iter().flatten()).all(|z| z.is_finite())
    }
}
