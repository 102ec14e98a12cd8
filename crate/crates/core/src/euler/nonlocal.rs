//! Midpoint-rule quadrature of `ρ̄ = φ * ρ` and of the alignment term
//! `A(x) = τ ∫ φ(x, y)(u(y) − u(x)) ρ(y) dy` on the periodic grid.

use rayon::prelude::*;

use super::{EulerError, FieldState, Grid};
use crate::kernels::{KernelError, KernelSpec, KernelVariant};

const PAR_THRESHOLD: usize = 256;

enum Mode {
    Constant(f64),
    /// `φ` at every minimal-image cell offset, laid out like the grid.
    Offsets(Vec<f64>),
    Topological,
}

/// Kernel quadrature bound to one grid. Translation-invariant kernels keep a
/// single row of weights; topological kernels rebuild their weights from the
/// current density on every application.
pub struct NonlocalOperator {
    grid: Grid,
    kernel: KernelSpec,
    mode: Mode,
}

impl NonlocalOperator {
    pub fn new(grid: &Grid, kernel: &KernelSpec) -> Result<Self, EulerError> {
        let mode = if let Some(phi0) = kernel.constant_value() {
            Mode::Constant(phi0)
        } else if kernel.is_radial() {
            Mode::Offsets((0..grid.len()).map(|c| kernel.radial_value(grid.periodic_distance(0, c)).unwrap()).collect())
        } else {
            if grid.dim != 1 {
                return Err(KernelError::UnsupportedDimension(grid.dim).into());
            }
            Mode::Topological
        };
        Ok(Self { grid: *grid, kernel: kernel.clone(), mode })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Returns `ρ̄` and, when `u` is given, the alignment term `A`.
    pub fn apply(&self, rho: &[f64], u: Option<&[f64]>) -> (Vec<f64>, Option<Vec<f64>>) {
        let g = &self.grid;
        let m = g.len();
        let dim = g.dim;
        let dv = g.cell_volume();
        let tau = self.kernel.tau;
        match &self.mode {
            Mode::Constant(phi0) => {
                let mass: f64 = rho.iter().sum();
                let rhobar = vec![phi0 * mass * dv; m];
                let align = u.map(|u| {
                    // Velocities are measured against cell 0 so that a constant
                    // field gives exactly zero.
                    let mut flux = [0.0; 2];
                    for c in 0..m {
                        for d in 0..dim {
                            flux[d] += rho[c] * (u[c * dim + d] - u[d]);
                        }
                    }
                    let mut a = vec![0.0; m * dim];
                    for c in 0..m {
                        for d in 0..dim {
                            a[c * dim + d] = tau * phi0 * dv * (flux[d] - (u[c * dim + d] - u[d]) * mass);
                        }
                    }
                    a
                });
                (rhobar, align)
            }
            Mode::Offsets(w) => self.circulant(w, rho, u),
            Mode::Topological => {
                let mut prefix = Vec::with_capacity(m + 1);
                prefix.push(0.0);
                for r in rho {
                    prefix.push(prefix.last().unwrap() + r);
                }
                let total = prefix[m];
                let h = g.spacing(0);
                let (near, mass) = match &self.kernel.variant {
                    KernelVariant::Topological1D { near, mass } => (near, mass),
                    KernelVariant::Truncated { base, .. } => match base.as_ref() {
                        KernelVariant::Topological1D { near, mass } => (near, mass),
                        _ => unreachable!("non-radial kernels are topological"),
                    },
                    _ => unreachable!("non-radial kernels are topological"),
                };
                let beta = match &self.kernel.variant {
                    KernelVariant::Truncated { beta, .. } => *beta,
                    _ => 0.0,
                };
                self.sweep(rho, u, |a, b| {
                    let (i, k) = if a <= b { (a, b) } else { (b, a) };
                    let ends = 0.5 * (rho[i] + rho[k]);
                    let direct = if i == k { 0.0 } else { prefix[k] - prefix[i + 1] + ends };
                    let wrapped = if i == k { 0.0 } else { total - prefix[k + 1] + prefix[i] + ends };
                    let steps = k - i;
                    let d = match steps.cmp(&(m - steps)) {
                        std::cmp::Ordering::Less => direct,
                        std::cmp::Ordering::Greater => wrapped,
                        std::cmp::Ordering::Equal => 0.5 * (direct + wrapped),
                    } * h;
                    let r = steps.min(m - steps) as f64 * h;
                    (near.value(r) * mass.value(d)).max(beta)
                })
            }
        }
    }

    /// Same sums as `sweep` for translation-invariant weights, with each
    /// source row split into two contiguous runs instead of wrapping indices.
    fn circulant(&self, w: &[f64], rho: &[f64], u: Option<&[f64]>) -> (Vec<f64>, Option<Vec<f64>>) {
        let g = &self.grid;
        let (nx, ny) = (g.cells[0], g.cells[1]);
        let m = g.len();
        let dim = g.dim;
        let dv = g.cell_volume();
        let tau = self.kernel.tau;
        let row = |c: usize| -> (f64, [f64; 2]) {
            let (ti, tj) = (c % nx, c / nx);
            let mut rb = 0.0;
            let mut acc = [0.0; 2];
            let uc = u.map(|u| [u[c * dim], u[c * dim + dim - 1]]);
            for sj in 0..ny {
                let wrow = &w[((sj + ny - tj) % ny) * nx..][..nx];
                let base = sj * nx;
                // sources 0..ti sit at offsets nx−ti.., sources ti.. at 0..
                for (src, off) in [(0..ti, nx - ti), (ti..nx, 0)] {
                    let start = src.start;
                    let ws = &wrow[off..off + src.len()];
                    let rs = &rho[base + start..base + src.end];
                    match (u, uc) {
                        (Some(u), Some(uc)) => {
                            for (q, (wk, rk)) in ws.iter().zip(rs).enumerate() {
                                let k = base + start + q;
                                let wr = wk * rk;
                                rb += wr;
                                for d in 0..dim {
                                    acc[d] += wr * (u[k * dim + d] - uc[d]);
                                }
                            }
                        }
                        _ => {
                            for (wk, rk) in ws.iter().zip(rs) {
                                rb += wk * rk;
                            }
                        }
                    }
                }
            }
            (rb * dv, [acc[0] * tau * dv, acc[1] * tau * dv])
        };
        let rows: Vec<(f64, [f64; 2])> = if m >= PAR_THRESHOLD {
            (0..m).into_par_iter().map(row).collect()
        } else {
            (0..m).map(row).collect()
        };
        let rhobar = rows.iter().map(|r| r.0).collect();
        let align = u.map(|_| {
            let mut a = vec![0.0; m * dim];
            for (c, r) in rows.iter().enumerate() {
                a[c * dim..(c + 1) * dim].copy_from_slice(&r.1[..dim]);
            }
            a
        });
        (rhobar, align)
    }

    fn sweep(
        &self,
        rho: &[f64],
        u: Option<&[f64]>,
        weight: impl Fn(usize, usize) -> f64 + Sync,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let g = &self.grid;
        let m = g.len();
        let dim = g.dim;
        let dv = g.cell_volume();
        let tau = self.kernel.tau;
        let row = |c: usize| -> (f64, [f64; 2]) {
            let mut rb = 0.0;
            let mut acc = [0.0; 2];
            match u {
                None => {
                    for k in 0..m {
                        rb += weight(c, k) * rho[k];
                    }
                }
                Some(u) => {
                    for k in 0..m {
                        let wr = weight(c, k) * rho[k];
                        rb += wr;
                        for d in 0..dim {
                            acc[d] += wr * (u[k * dim + d] - u[c * dim + d]);
                        }
                    }
                }
            }
            (rb * dv, [acc[0] * tau * dv, acc[1] * tau * dv])
        };
        let rows: Vec<(f64, [f64; 2])> = if m >= PAR_THRESHOLD {
            (0..m).into_par_iter().map(row).collect()
        } else {
            (0..m).map(row).collect()
        };
        let rhobar = rows.iter().map(|r| r.0).collect();
        let align = u.map(|_| {
            let mut a = vec![0.0; m * dim];
            for (c, r) in rows.iter().enumerate() {
                a[c * dim..(c + 1) * dim].copy_from_slice(&r.1[..dim]);
            }
            a
        });
        (rhobar, align)
    }
}

/// `ρ̄(x) = ∫ φ(x, y) ρ(y) dy` by the midpoint rule with minimal-image distances.
pub fn thickness(rho: &[f64], kernel: &KernelSpec, grid: &Grid) -> Result<Vec<f64>, EulerError> {
    Ok(NonlocalOperator::new(grid, kernel)?.apply(rho, None).0)
}

/// `A(x) = τ[(φ * ρu)(x) − u(x)(φ * ρ)(x)]`, evaluated in difference form.
pub fn alignment_rhs(state: &FieldState, kernel: &KernelSpec) -> Result<Vec<f64>, EulerError> {
    let op = NonlocalOperator::new(&state.grid, kernel)?;
    Ok(op.apply(&state.rho, Some(&state.u)).1.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::RadialProfile;
    use std::f64::consts::PI;

    fn direct_oracle(g: &Grid, k: &KernelSpec, rho: &[f64], u: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let m = g.len();
        let dim = g.dim;
        let dv = g.cell_volume();
        let mut rb = vec![0.0; m];
        let mut a = vec![0.0; m * dim];
        for c in 0..m {
            for s in 0..m {
                let phi = k.radial_value(g.periodic_distance(c, s)).unwrap();
                rb[c] += phi * rho[s] * dv;
                for d in 0..dim {
                    a[c * dim + d] += k.tau * phi * rho[s] * (u[s * dim + d] - u[c * dim + d]) * dv;
                }
            }
        }
        (rb, a)
    }

    #[test]
    fn zero_density_gives_zero() {
        let g = Grid::new_1d(16, 1.0).unwrap();
        let k = KernelSpec::pareto(1.0, 0.5, 1.0).unwrap();
        assert!(thickness(&[0.0; 16], &k, &g).unwrap().iter().all(|z| *z == 0.0));
        let s = FieldState::new(0.0, g, vec![0.0; 16], (0..16).map(|i| i as f64).collect(), None).unwrap();
        assert!(alignment_rhs(&s, &k).unwrap().iter().all(|z| *z == 0.0));
    }

    #[test]
    fn constant_kernel_thickness_is_flat() {
        let g = Grid::new_1d(32, 2.0).unwrap();
        let rho: Vec<f64> = (0..32).map(|i| 1.0 + (i as f64).sin().abs()).collect();
        let m0 = rho.iter().sum::<f64>() * g.cell_volume();
        let rb = thickness(&rho, &KernelSpec::constant(0.7, 1.0).unwrap(), &g).unwrap();
        for z in rb {
            assert!((z - 0.7 * m0).abs() < 1e-14);
        }
    }

    #[test]
    fn cosine_density_on_torus() {
        let m = 128;
        let g = Grid::new_1d(m, 2.0 * PI).unwrap();
        let m0 = 1.7;
        let rho: Vec<f64> = (0..m).map(|c| (1.0 + g.center(c)[0].cos()) / (2.0 * PI) * m0).collect();
        let rb = thickness(&rho, &KernelSpec::constant(1.0, 1.0).unwrap(), &g).unwrap();
        let oracle: f64 = rho.iter().sum::<f64>() * g.spacing(0);
        for z in rb {
            assert!((z - m0).abs() < 1e-12);
            assert!((z - oracle).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_kernel_alignment_matches_double_sum() {
        let m = 64;
        let g = Grid::new_1d(m, 3.0).unwrap();
        let (tau, phi0) = (1.3, 0.9);
        let k = KernelSpec::constant(phi0, tau).unwrap();
        let rho: Vec<f64> = (0..m).map(|c| 1.0 + 0.5 * (c as f64 * 0.3).cos()).collect();
        let u: Vec<f64> = (0..m).map(|c| (c as f64 * 0.2).sin()).collect();
        let s = FieldState::new(0.0, g, rho.clone(), u.clone(), None).unwrap();
        let a = alignment_rhs(&s, &k).unwrap();
        let (_, oracle) = direct_oracle(&g, &k, &rho, &u);
        let m0 = s.mass();
        let ubar = s.momentum()[0] / m0;
        for c in 0..m {
            assert!((a[c] - oracle[c]).abs() < 1e-12);
            assert!((a[c] - tau * phi0 * (m0 * ubar - u[c] * m0)).abs() < 1e-12);
        }
    }

    #[test]
    fn radial_kernel_matches_direct_sum_in_2d() {
        let g = Grid::new_2d(12, 9, 2.0, 1.5).unwrap();
        let k = KernelSpec::metric(RadialProfile::Bracket { power: 1.0 }, 0.8).unwrap();
        let m = g.len();
        let rho: Vec<f64> = (0..m).map(|c| 1.0 + 0.3 * (c as f64).sin()).collect();
        let u: Vec<f64> = (0..2 * m).map(|c| (c as f64 * 0.37).cos()).collect();
        let s = FieldState::new(0.0, g, rho.clone(), u.clone(), None).unwrap();
        let op = NonlocalOperator::new(&g, &k).unwrap();
        let (rb, a) = op.apply(&s.rho, Some(&s.u));
        let (orb, oa) = direct_oracle(&g, &k, &rho, &u);
        for c in 0..m {
            assert!((rb[c] - orb[c]).abs() < 1e-12);
        }
        for c in 0..2 * m {
            assert!((a.as_ref().unwrap()[c] - oa[c]).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_velocity_gives_exactly_zero_alignment() {
        let g = Grid::new_2d(8, 8, 1.0, 1.0).unwrap();
        let m = g.len();
        let rho: Vec<f64> = (0..m).map(|c| 0.5 + (c as f64 * 0.11).sin().abs()).collect();
        let u: Vec<f64> = (0..m).flat_map(|_| [0.3, -1.1]).collect();
        let s = FieldState::new(0.0, g, rho, u, None).unwrap();
        for k in [KernelSpec::constant(1.0, 1.0).unwrap(), KernelSpec::pareto(1.0, 0.3, 2.0).unwrap()] {
            assert!(alignment_rhs(&s, &k).unwrap().iter().all(|z| *z == 0.0));
        }
    }

    #[test]
    fn topological_weights_are_symmetric_and_uniform_density_reduces_to_distance() {
        let m = 40;
        let g = Grid::new_1d(m, 4.0).unwrap();
        let k = KernelSpec::new(
            KernelVariant::Topological1D {
                near: RadialProfile::Bracket { power: 0.5 },
                mass: RadialProfile::Gaussian { length: 1.0 },
            },
            1.0,
        )
        .unwrap();
        let rho = vec![1.0; m];
        let rb = thickness(&rho, &k, &g).unwrap();
        // uniform density: d_ρ equals the arc length, so ρ̄ is translation invariant
        let oracle: f64 = (0..m)
            .map(|c| {
                let r = g.periodic_distance(0, c);
                (1.0 + r * r).powf(-0.25) * (-0.5 * r * r).exp() * g.spacing(0)
            })
            .sum();
        for z in &rb {
            assert!((z - oracle).abs() < 1e-12);
        }
        let u: Vec<f64> = (0..m).map(|c| (c as f64 * 0.4).sin()).collect();
        let rho: Vec<f64> = (0..m).map(|c| 1.0 + 0.5 * (c as f64 * 0.2).cos()).collect();
        let s = FieldState::new(0.0, g, rho.clone(), u, None).unwrap();
        let a = alignment_rhs(&s, &k).unwrap();
        let momentum_change: f64 = a.iter().zip(&rho).map(|(a, r)| a * r).sum();
        assert!(momentum_change.abs() < 1e-12);
    }
}
