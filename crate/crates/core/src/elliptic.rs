//! Two-point flux-approximation finite-volume solver for the Neumann
//! pressure problem `-div(kappa grad u) = g`, with the zero-mean constraint
//! resolving the singular system, plus velocity post-processing.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;

pub const DEFAULT_TOLERANCE: f64 = 1e-10;

/// Difference of two Gaussian bumps (source minus sink).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub amplitude: f64,
    pub source: (f64, f64),
    pub sink: (f64, f64),
    pub widths: [f64; 2],
}

impl SourceSpec {
    pub fn new(amplitude: f64, source: (f64, f64), sink: (f64, f64), widths: [f64; 2]) -> Result<Self> {
        if widths[0] <= 0.0 || widths[1] <= 0.0 {
            return Err(Error::InvalidArgument("source widths must be positive".into()));
        }
        Ok(Self { amplitude, source, sink, widths })
    }

    /// The reference configuration: `s = 0.5`, bumps of width 20 at the
    /// domain corners `(0,0)` and `(extent, extent)`.
    pub fn corner_default(extent: f64) -> Self {
        Self { amplitude: 0.5, source: (0.0, 0.0), sink: (extent, extent), widths: [20.0, 20.0] }
    }

    fn bump(&self, center: (f64, f64), x: (f64, f64)) -> f64 {
        let dx = (x.0 - center.0) / self.widths[0];
        let dy = (x.1 - center.1) / self.widths[1];
        self.amplitude * (-0.5 * (dx * dx + dy * dy)).exp()
    }
}

/// Evaluates the source/sink field at cell centers and shifts it by its
/// mean so the discrete Neumann compatibility `sum g * area = 0` holds
/// exactly.
pub fn assemble_source(spec: &SourceSpec, grid: &SpatialGrid) -> DVector<f64> {
    let n = grid.n_points();
    let mut g = DVector::from_fn(n, |i, _| {
        let c = grid.center(i);
        spec.bump(spec.source, c) - spec.bump(spec.sink, c)
    });
    let mean = g.sum() / n as f64;
    g.add_scalar_mut(-mean);
    g
}

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    grid: SpatialGrid,
    kappa: DVector<f64>,
    source: DVector<f64>,
    tolerance: f64,
    // interior-face transmissibilities
    tx: Vec<f64>, // (nx-1) * ny, between (ix, iy) and (ix+1, iy)
    ty: Vec<f64>, // nx * (ny-1), between (ix, iy) and (ix, iy+1)
}

impl EllipticProblem {
    pub fn new(
        grid: SpatialGrid,
        kappa: DVector<f64>,
        source: DVector<f64>,
        tolerance: f64,
    ) -> Result<Self> {
        let n = grid.n_points();
        if kappa.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: kappa.len() });
        }
        if source.len() != n {
            return Err(Error::DimensionMismatch { expected: n, actual: source.len() });
        }
        for (cell, &k) in kappa.iter().enumerate() {
            if !(k > 0.0) {
                return Err(Error::NonPositiveTransmissivity { cell, value: k });
            }
        }
        if !(tolerance > 0.0) {
            return Err(Error::InvalidArgument("solver tolerance must be positive".into()));
        }
        // enforce compatibility exactly (idempotent for assembled sources)
        let mut source = source;
        let mean = source.sum() / n as f64;
        source.add_scalar_mut(-mean);

        let (nx, ny) = (grid.nx(), grid.ny());
        let (dx, dy) = (grid.dx(), grid.dy());
        let harmonic = |a: f64, b: f64| 2.0 * a * b / (a + b);
        let mut tx = vec![0.0; (nx.saturating_sub(1)) * ny];
        for iy in 0..ny {
            for ix in 0..nx - 1 {
                let a = kappa[grid.index(ix, iy)];
                let b = kappa[grid.index(ix + 1, iy)];
                tx[iy * (nx - 1) + ix] = harmonic(a, b) * dy / dx;
            }
        }
        let mut ty = vec![0.0; nx * (ny.saturating_sub(1))];
        for iy in 0..ny - 1 {
            for ix in 0..nx {
                let a = kappa[grid.index(ix, iy)];
                let b = kappa[grid.index(ix, iy + 1)];
                ty[iy * nx + ix] = harmonic(a, b) * dx / dy;
            }
        }
        Ok(Self { grid, kappa, source, tolerance, tx, ty })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn kappa(&self) -> &DVector<f64> {
        &self.kappa
    }

    pub fn source(&self) -> &DVector<f64> {
        &self.source
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
    }

    /// `y = A u` where `A` is the TPFA operator (flux divergence).
    fn apply(&self, u: &DVector<f64>, y: &mut DVector<f64>) {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        y.fill(0.0);
        for iy in 0..ny {
            for ix in 0..nx.saturating_sub(1) {
                let t = self.tx[iy * (nx - 1) + ix];
                let l = self.grid.index(ix, iy);
                let r = self.grid.index(ix + 1, iy);
                let f = t * (u[l] - u[r]);
                y[l] += f;
                y[r] -= f;
            }
        }
        for iy in 0..ny.saturating_sub(1) {
            for ix in 0..nx {
                let t = self.ty[iy * nx + ix];
                let b = self.grid.index(ix, iy);
                let tcell = self.grid.index(ix, iy + 1);
                let f = t * (u[b] - u[tcell]);
                y[b] += f;
                y[tcell] -= f;
            }
        }
    }

    fn diagonal(&self) -> DVector<f64> {
        let (nx, ny) = (self.grid.nx(), self.grid.ny());
        let mut d = DVector::zeros(self.grid.n_points());
        for iy in 0..ny {
            for ix in 0..nx.saturating_sub(1) {
                let t = self.tx[iy * (nx - 1) + ix];
                d[self.grid.index(ix, iy)] += t;
                d[self.grid.index(ix + 1, iy)] += t;
            }
        }
        for iy in 0..ny.saturating_sub(1) {
            for ix in 0..nx {
                let t = self.ty[iy * nx + ix];
                d[self.grid.index(ix, iy)] += t;
                d[self.grid.index(ix, iy + 1)] += t;
            }
        }
        d
    }

    /// Per-cell net outward flux `(A u)_c`; conservation means it matches
    /// `g_c * area_c`.
    pub fn flux_divergence(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(u.len());
        self.apply(u, &mut y);
        y
    }
}

/// Solves the singular TPFA system by Jacobi-preconditioned conjugate
/// gradients on the zero-mean subspace; the result has exactly zero
/// area-weighted mean.
pub fn solve_pressure(problem: &EllipticProblem) -> Result<DVector<f64>> {
    let n = problem.grid.n_points();
    let area = problem.grid.cell_area();
    let b = problem.source.clone() * area;
    let b_norm = b.norm();
    if b_norm == 0.0 {
        return Ok(DVector::zeros(n));
    }

    let diag = problem.diagonal();
    let inv_diag = DVector::from_fn(n, |i, _| if diag[i] > 0.0 { 1.0 / diag[i] } else { 1.0 });
    let demean = |v: &mut DVector<f64>| {
        let m = v.sum() / n as f64;
        v.add_scalar_mut(-m);
    };

    let mut x = DVector::zeros(n);
    let mut r = b.clone();
    let mut z = r.component_mul(&inv_diag);
    demean(&mut z);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let mut ap = DVector::zeros(n);

    let max_iter = 40 * n + 200;
    let mut residual = r.norm() / b_norm;
    for _ in 0..max_iter {
        if residual < problem.tolerance {
            demean(&mut x);
            return Ok(x);
        }
        problem.apply(&p, &mut ap);
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        residual = r.norm() / b_norm;
        z = r.component_mul(&inv_diag);
        demean(&mut z);
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * beta;
    }
    if residual < problem.tolerance {
        demean(&mut x);
        return Ok(x);
    }
    Err(Error::SolverDiverged { residual, iterations: max_iter })
}

/// Cell-centered Darcy velocity obtained by averaging TPFA face velocities
/// (boundary faces carry zero flux).
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub vx: DVector<f64>,
    pub vy: DVector<f64>,
}

pub fn velocity(problem: &EllipticProblem, u: &DVector<f64>) -> Result<VelocityField> {
    let grid = problem.grid();
    let n = grid.n_points();
    if u.len() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: u.len() });
    }
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());
    let mut vx = DVector::zeros(n);
    let mut vy = DVector::zeros(n);
    for iy in 0..ny {
        for ix in 0..nx {
            let c = grid.index(ix, iy);
            // west/east face velocities: flux / (face area dy)
            let west = if ix > 0 {
                problem.tx[iy * (nx - 1) + ix - 1] * (u[grid.index(ix - 1, iy)] - u[c]) / dy
            } else {
                0.0
            };
            let east = if ix + 1 < nx {
                problem.tx[iy * (nx - 1) + ix] * (u[c] - u[grid.index(ix + 1, iy)]) / dy
            } else {
                0.0
            };
            vx[c] = 0.5 * (west + east);
            let south = if iy > 0 {
                problem.ty[(iy - 1) * nx + ix] * (u[grid.index(ix, iy - 1)] - u[c]) / dx
            } else {
                0.0
            };
            let north = if iy + 1 < ny {
                problem.ty[iy * nx + ix] * (u[c] - u[grid.index(ix, iy + 1)]) / dx
            } else {
                0.0
            };
            vy[c] = 0.5 * (south + north);
        }
    }
    Ok(VelocityField { vx, vy })
}
