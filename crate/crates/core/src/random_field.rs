//! Squared-exponential covariance kernels, Karhunen-Loeve decomposition
//! with energy truncation, and log-normal transmissivity sampling.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::GaussianSample;
use crate::grid::SpatialGrid;

/// Negative eigenvalues above `-CLIP_FACTOR * lambda_max` are treated as
/// roundoff and clipped to zero.
const CLIP_FACTOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomFieldSpec {
    /// Kernel variance sigma^2.
    pub variance: f64,
    /// Correlation lengths per axis.
    pub lengths: [f64; 2],
    /// Constant mean G_0.
    pub mean: f64,
}

impl RandomFieldSpec {
    pub fn new(variance: f64, lengths: [f64; 2], mean: f64) -> Result<Self> {
        if variance <= 0.0 {
            return Err(Error::InvalidArgument("kernel variance must be positive".into()));
        }
        if lengths[0] <= 0.0 || lengths[1] <= 0.0 {
            return Err(Error::InvalidArgument("correlation lengths must be positive".into()));
        }
        Ok(Self { variance, lengths, mean })
    }
}

/// `sigma^2 exp(-1/2 sum_i (x_i - y_i)^2 / l_i^2)`.
pub fn se_kernel(spec: &RandomFieldSpec, x: (f64, f64), y: (f64, f64)) -> f64 {
    let dx = (x.0 - y.0) / spec.lengths[0];
    let dy = (x.1 - y.1) / spec.lengths[1];
    spec.variance * (-0.5 * (dx * dx + dy * dy)).exp()
}

/// Truncated Karhunen-Loeve basis on a grid. Eigenfunctions are orthonormal
/// under the cell-area weights; eigenvalues carry the area scaling so that
/// `sum_i lambda_i g_i(x) g_i(y)` approximates the kernel.
#[derive(Debug, Clone)]
pub struct KLBasis {
    grid: SpatialGrid,
    mean: DVector<f64>,
    eigenvalues: Vec<f64>,
    eigenfunctions: DMatrix<f64>,
    energy_fraction: f64,
    total_energy: f64,
}

impl KLBasis {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Number of retained modes.
    pub fn n_modes(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `n_points x n_modes`, column `i` is the eigenfunction `g_i`.
    pub fn eigenfunctions(&self) -> &DMatrix<f64> {
        &self.eigenfunctions
    }

    /// Energy fraction actually captured by the retained modes.
    pub fn energy_fraction(&self) -> f64 {
        self.energy_fraction
    }

    pub fn total_energy(&self) -> f64 {
        self.total_energy
    }

    /// Keeps only the leading `m` modes (clamped to the available count).
    pub fn truncated(&self, m: usize) -> KLBasis {
        let m = m.clamp(1, self.n_modes());
        let captured: f64 = self.eigenvalues[..m].iter().sum();
        KLBasis {
            grid: self.grid.clone(),
            mean: self.mean.clone(),
            eigenvalues: self.eigenvalues[..m].to_vec(),
            eigenfunctions: self.eigenfunctions.columns(0, m).into_owned(),
            energy_fraction: captured / self.total_energy,
            total_energy: self.total_energy,
        }
    }

    /// Truncated kernel diagonal `sum_i lambda_i g_i(x)^2` at each point.
    pub fn pointwise_variance(&self) -> DVector<f64> {
        let n = self.grid.n_points();
        DVector::from_fn(n, |x, _| {
            self.eigenvalues
                .iter()
                .enumerate()
                .map(|(i, &l)| l * self.eigenfunctions[(x, i)].powi(2))
                .sum()
        })
    }

    /// Eigenvalue CSV: `mode,eigenvalue,cumulative_energy`.
    pub fn write_eigenvalues_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "mode,eigenvalue,cumulative_energy")?;
        let mut cum = 0.0;
        for (i, &l) in self.eigenvalues.iter().enumerate() {
            cum += l;
            writeln!(w, "{},{:.17e},{:.17e}", i + 1, l, cum / self.total_energy)?;
        }
        Ok(())
    }

    /// Eigenfunction grid CSV: one column per mode, one row per grid cell
    /// (x-fastest), prefixed with the cell-center coordinates.
    pub fn write_eigenfunctions_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let header: Vec<String> =
            (1..=self.n_modes()).map(|i| format!("g{i}")).collect();
        writeln!(w, "x,y,{}", header.join(","))?;
        for pt in 0..self.grid.n_points() {
            let (x, y) = self.grid.center(pt);
            let row: Vec<String> = (0..self.n_modes())
                .map(|i| format!("{:.17e}", self.eigenfunctions[(pt, i)]))
                .collect();
            writeln!(w, "{x},{y},{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save_csv(&self, eigenvalue_path: &Path, eigenfunction_path: &Path) -> Result<()> {
        self.write_eigenvalues_csv(std::fs::File::create(eigenvalue_path)?)?;
        self.write_eigenfunctions_csv(std::fs::File::create(eigenfunction_path)?)
    }
}

/// Nystrom KL decomposition of an arbitrary kernel matrix sampled at cell
/// centers. `kernel` must be symmetric PSD up to roundoff.
pub fn kl_of_matrix(
    kernel: DMatrix<f64>,
    grid: &SpatialGrid,
    mean: DVector<f64>,
    energy_fraction: f64,
) -> Result<KLBasis> {
    if !(energy_fraction > 0.0 && energy_fraction <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "energy fraction must be in (0, 1], got {energy_fraction}"
        )));
    }
    let n = grid.n_points();
    if kernel.nrows() != n || kernel.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, actual: kernel.nrows() });
    }
    let w = grid.cell_area();
    // uniform grid: W^{1/2} K W^{1/2} is just a scalar multiple
    let eig = SymmetricEigen::new(kernel * w);

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b].partial_cmp(&eig.eigenvalues[a]).expect("finite eigenvalues")
    });
    let lambda_max = eig.eigenvalues[order[0]].max(0.0);
    let mut lambdas = Vec::with_capacity(n);
    for &k in &order {
        let l = eig.eigenvalues[k];
        if l < -CLIP_FACTOR * lambda_max {
            return Err(Error::NotPositiveSemiDefinite { value: l });
        }
        lambdas.push(l.max(0.0));
    }
    let total: f64 = lambdas.iter().sum();
    if total <= 0.0 {
        return Err(Error::NotPositiveSemiDefinite { value: 0.0 });
    }

    let mut cum = 0.0;
    let mut m = 0;
    for &l in &lambdas {
        cum += l;
        m += 1;
        if cum >= energy_fraction * total - 1e-15 * total {
            break;
        }
    }
    // never retain a zero mode
    while m > 1 && lambdas[m - 1] == 0.0 {
        m -= 1;
    }

    let inv_sqrt_w = 1.0 / w.sqrt();
    let mut eigenfunctions = DMatrix::zeros(n, m);
    for i in 0..m {
        let col = eig.eigenvectors.column(order[i]);
        let mut best = 0usize;
        for x in 0..n {
            if col[x].abs() > col[best].abs() {
                best = x;
            }
        }
        let sign = if col[best] < 0.0 { -1.0 } else { 1.0 };
        for x in 0..n {
            eigenfunctions[(x, i)] = sign * col[x] * inv_sqrt_w;
        }
    }
    let captured: f64 = lambdas[..m].iter().sum();
    Ok(KLBasis {
        grid: grid.clone(),
        mean,
        eigenvalues: lambdas[..m].to_vec(),
        eigenfunctions,
        energy_fraction: captured / total,
        total_energy: total,
    })
}

/// KL decomposition of the squared-exponential kernel on `grid`, truncated
/// at the smallest mode count reaching `energy_fraction` of the energy.
pub fn kl_decompose(
    spec: &RandomFieldSpec,
    grid: &SpatialGrid,
    energy_fraction: f64,
) -> Result<KLBasis> {
    let n = grid.n_points();
    let centers: Vec<(f64, f64)> = (0..n).map(|i| grid.center(i)).collect();
    let mut kernel = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = se_kernel(spec, centers[i], centers[j]);
            kernel[(i, j)] = v;
            kernel[(j, i)] = v;
        }
    }
    let mean = DVector::from_element(n, spec.mean);
    kl_of_matrix(kernel, grid, mean, energy_fraction)
}

/// `G(x, xi) = G_0(x) + sum_i sqrt(lambda_i) xi_i g_i(x)` on the grid.
pub fn sample_gaussian_field(kl: &KLBasis, xi: &GaussianSample) -> Result<DVector<f64>> {
    if xi.values().len() != kl.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: kl.n_modes(),
            actual: xi.values().len(),
        });
    }
    let mut field = kl.mean.clone();
    for (i, &l) in kl.eigenvalues.iter().enumerate() {
        let amp = l.sqrt() * xi.values()[i];
        if amp != 0.0 {
            field.axpy(amp, &kl.eigenfunctions.column(i).clone_owned(), 1.0);
        }
    }
    Ok(field)
}

/// Log-normal transmissivity `kappa = exp(G)`; isotropic, so the same value
/// applies on both axes.
pub fn sample_transmissivity(kl: &KLBasis, xi: &GaussianSample) -> Result<DVector<f64>> {
    Ok(sample_gaussian_field(kl, xi)?.map(f64::exp))
}
