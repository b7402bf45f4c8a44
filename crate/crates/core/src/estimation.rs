//! Non-intrusive Monte-Carlo projection of chaos coefficients, Gaussian
//! kernel density estimation, and distribution distance metrics.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::ChaosExpansion;
use crate::grid::SpatialGrid;
use crate::hermite::hermite;
use crate::index::IndexSet;

const SAMPLE_BLOCK: usize = 1024;
const MIN_KDE_SAMPLES: usize = 100;

/// Paired Monte-Carlo inputs and model outputs.
#[derive(Debug, Clone)]
pub struct SampleStore {
    inputs: DMatrix<f64>,  // N x d
    outputs: DMatrix<f64>, // N x n_points
    seed: u64,
}

impl SampleStore {
    pub fn new(inputs: DMatrix<f64>, outputs: DMatrix<f64>, seed: u64) -> Result<Self> {
        if inputs.nrows() != outputs.nrows() {
            return Err(Error::DimensionMismatch {
                expected: inputs.nrows(),
                actual: outputs.nrows(),
            });
        }
        Ok(Self { inputs, outputs, seed })
    }

    pub fn n_samples(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn n_points(&self) -> usize {
        self.outputs.ncols()
    }

    pub fn inputs(&self) -> &DMatrix<f64> {
        &self.inputs
    }

    pub fn outputs(&self) -> &DMatrix<f64> {
        &self.outputs
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Output column at a grid point, e.g. for per-probe density estimates.
    pub fn output_column(&self, point: usize) -> Vec<f64> {
        self.outputs.column(point).iter().copied().collect()
    }
}

/// Evaluates every normalized basis polynomial at each sample row of
/// `inputs[rows]`; returns a `rows.len() x |J_p|` matrix.
pub fn basis_matrix(set: &IndexSet, inputs: &DMatrix<f64>, rows: std::ops::Range<usize>) -> DMatrix<f64> {
    let d = set.dim();
    let p = set.max_order() as u32;
    let inv_sqrt_fact: Vec<f64> = set.iter().map(|a| 1.0 / a.sqrt_factorial()).collect();
    let values: Vec<Vec<f64>> = rows
        .clone()
        .into_par_iter()
        .map(|n| {
            // per-sample table of h_k(xi_i)
            let mut table = vec![0.0; d * (p as usize + 1)];
            for i in 0..d {
                for k in 0..=p {
                    table[i * (p as usize + 1) + k as usize] = hermite(k, inputs[(n, i)]);
                }
            }
            set.iter()
                .enumerate()
                .map(|(j, alpha)| {
                    let mut prod = inv_sqrt_fact[j];
                    for (i, &e) in alpha.exponents().iter().enumerate() {
                        if e > 0 {
                            prod *= table[i * (p as usize + 1) + e as usize];
                        }
                    }
                    prod
                })
                .collect()
        })
        .collect();
    DMatrix::from_fn(values.len(), set.len(), |r, c| values[r][c])
}

/// Projection estimator `u_alpha(x) = (1/N) sum_n y(x, xi_n) psi_alpha(xi_n)`.
/// Logs a warning when the ensemble is small relative to the basis.
pub fn fit_coefficients(
    store: &SampleStore,
    set: &IndexSet,
    grid: Option<SpatialGrid>,
) -> Result<ChaosExpansion> {
    if store.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), actual: store.dim() });
    }
    let n = store.n_samples();
    if n == 0 {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    if n < 10 * set.len() {
        log::warn!(
            "projection fit with N = {n} samples for {} basis terms; recommend N >= {}",
            set.len(),
            10 * set.len()
        );
    }
    let mut coeffs = DMatrix::zeros(store.n_points(), set.len());
    let mut start = 0;
    while start < n {
        let end = (start + SAMPLE_BLOCK).min(n);
        let psi = basis_matrix(set, &store.inputs, start..end);
        let y_block = store.outputs.rows(start, end - start);
        // deterministic fixed-order accumulation across blocks
        coeffs.gemm_tr(1.0 / n as f64, &y_block, &psi, 1.0);
        start = end;
    }
    ChaosExpansion::new(set.clone(), coeffs, grid)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KdeSettings {
    /// Number of evaluation abscissae.
    pub resolution: usize,
    /// Fixed bandwidth; `None` selects Silverman's rule.
    pub bandwidth: Option<f64>,
}

impl Default for KdeSettings {
    fn default() -> Self {
        Self { resolution: 401, bandwidth: None }
    }
}

/// A density curve on a uniform abscissa grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub abscissae: Vec<f64>,
    pub values: Vec<f64>,
    pub bandwidth: f64,
    pub n_samples: usize,
}

impl DensityEstimate {
    /// Wraps precomputed density values (e.g. analytic reference curves).
    pub fn from_values(abscissae: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if abscissae.len() != values.len() || abscissae.len() < 2 {
            return Err(Error::InvalidArgument("density curve needs matching abscissae/values".into()));
        }
        Ok(Self { abscissae, values, bandwidth: 0.0, n_samples: 0 })
    }

    /// Trapezoid integral over the covered range.
    pub fn integral(&self) -> f64 {
        trapezoid(&self.abscissae, &self.values)
    }

    /// Linear interpolation, zero outside the covered range.
    pub fn interpolate(&self, x: f64) -> f64 {
        let xs = &self.abscissae;
        if x < xs[0] || x > xs[xs.len() - 1] {
            return 0.0;
        }
        let j = xs.partition_point(|&v| v <= x).min(xs.len() - 1).max(1);
        let (x0, x1) = (xs[j - 1], xs[j]);
        let t = if x1 > x0 { (x - x0) / (x1 - x0) } else { 0.0 };
        self.values[j - 1] * (1.0 - t) + self.values[j] * t
    }

    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x,density")?;
        for (x, v) in self.abscissae.iter().zip(&self.values) {
            writeln!(w, "{x:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1]))
        .sum()
}

/// Silverman's rule of thumb `0.9 min(sigma, IQR/1.34) n^{-1/5}`.
pub fn silverman_bandwidth(samples: &[f64]) -> Result<f64> {
    let n = samples.len();
    let mean = samples.iter().sum::<f64>() / n as f64;
    let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    let std = var.sqrt();
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let quartile = |q: f64| {
        let pos = q * (n - 1) as f64;
        let lo = pos.floor() as usize;
        let t = pos - lo as f64;
        sorted[lo] * (1.0 - t) + sorted[(lo + 1).min(n - 1)] * t
    };
    let iqr = quartile(0.75) - quartile(0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    if !(spread > 0.0) {
        return Err(Error::DegenerateSamples);
    }
    Ok(0.9 * spread * (n as f64).powf(-0.2))
}

/// Gaussian-kernel density estimate; abscissae span the sample range plus
/// three bandwidths on each side.
pub fn kde(samples: &[f64], settings: &KdeSettings) -> Result<DensityEstimate> {
    let n = samples.len();
    if n < MIN_KDE_SAMPLES {
        return Err(Error::TooFewSamples { got: n, need: MIN_KDE_SAMPLES });
    }
    let h = match settings.bandwidth {
        Some(h) if h > 0.0 => h,
        Some(_) => return Err(Error::InvalidArgument("bandwidth must be positive".into())),
        None => silverman_bandwidth(samples)?,
    };
    let resolution = settings.resolution.max(2);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &s in samples {
        lo = lo.min(s);
        hi = hi.max(s);
    }
    if !(hi > lo) {
        return Err(Error::DegenerateSamples);
    }
    let (lo, hi) = (lo - 3.0 * h, hi + 3.0 * h);
    let step = (hi - lo) / (resolution - 1) as f64;
    let abscissae: Vec<f64> = (0..resolution).map(|i| lo + step * i as f64).collect();
    let norm = 1.0 / (n as f64 * h * (2.0 * std::f64::consts::PI).sqrt());
    let values: Vec<f64> = abscissae
        .par_iter()
        .map(|&x| {
            norm * samples
                .iter()
                .map(|&s| {
                    let z = (x - s) / h;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
        })
        .collect();
    Ok(DensityEstimate { abscissae, values, bandwidth: h, n_samples: n })
}

/// Trapezoid `L1` and Hellinger distances between two density curves on
/// interpolated common abscissae (union range, zero outside each support).
pub fn density_distance(p: &DensityEstimate, q: &DensityEstimate) -> Result<(f64, f64)> {
    let (p_lo, p_hi) = (p.abscissae[0], p.abscissae[p.abscissae.len() - 1]);
    let (q_lo, q_hi) = (q.abscissae[0], q.abscissae[q.abscissae.len() - 1]);
    if p_hi < q_lo || q_hi < p_lo {
        return Err(Error::DisjointSupports);
    }
    let lo = p_lo.min(q_lo);
    let hi = p_hi.max(q_hi);
    let resolution = 2 * p.abscissae.len().max(q.abscissae.len());
    let step = (hi - lo) / (resolution - 1) as f64;
    let mut l1 = vec![0.0; resolution];
    let mut hel = vec![0.0; resolution];
    let mut xs = vec![0.0; resolution];
    for i in 0..resolution {
        let x = lo + step * i as f64;
        let pv = p.interpolate(x).max(0.0);
        let qv = q.interpolate(x).max(0.0);
        xs[i] = x;
        l1[i] = (pv - qv).abs();
        hel[i] = (pv.sqrt() - qv.sqrt()).powi(2);
    }
    Ok((trapezoid(&xs, &l1), (0.5 * trapezoid(&xs, &hel)).max(0.0).sqrt()))
}

/// Standard normal CDF.
pub fn standard_normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided Kolmogorov-Smirnov statistic of the samples against
/// `N(mean, std^2)`.
pub fn ks_statistic_normal(samples: &[f64], mean: f64, std: f64) -> Result<f64> {
    let n = samples.len();
    if n == 0 {
        return Err(Error::TooFewSamples { got: 0, need: 1 });
    }
    if !(std > 0.0) {
        return Err(Error::InvalidArgument("std must be positive".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite samples"));
    let mut d: f64 = 0.0;
    for (i, &x) in sorted.iter().enumerate() {
        let f = standard_normal_cdf((x - mean) / std);
        d = d.max((f - i as f64 / n as f64).abs());
        d = d.max((f - (i + 1) as f64 / n as f64).abs());
    }
    Ok(d)
}
