//! Truncated Hermite chaos expansions of scalar quantities on a grid.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::hermite::hermite;
use crate::index::{IndexSet, MultiIndex};

/// One i.i.d. standard normal draw of the input vector, with its seed kept
/// for provenance.
#[derive(Debug, Clone)]
pub struct GaussianSample {
    values: Vec<f64>,
    seed: u64,
}

impl GaussianSample {
    pub fn draw(d: usize, seed: u64) -> Self {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let values = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        Self { values, seed }
    }

    pub fn from_values(values: Vec<f64>, seed: u64) -> Self {
        Self { values, seed }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

impl std::ops::Deref for GaussianSample {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// Normalized multivariate Hermite basis function
/// `psi_alpha(xi) = prod_i h_{alpha_i}(xi_i) / sqrt(alpha!)`.
pub fn psi(alpha: &MultiIndex, xi: &[f64]) -> Result<f64> {
    if xi.len() != alpha.dim() {
        return Err(Error::DimensionMismatch { expected: alpha.dim(), actual: xi.len() });
    }
    let mut prod = 1.0;
    for (&a, &x) in alpha.exponents().iter().zip(xi) {
        if a > 0 {
            prod *= hermite(a, x);
        }
    }
    Ok(prod / alpha.sqrt_factorial())
}

/// Coefficient field `u_alpha(x)` of a truncated chaos expansion: one row per
/// grid point, one column per index-set entry (column 0 is the mean field).
#[derive(Debug, Clone)]
pub struct ChaosExpansion {
    index_set: IndexSet,
    coeffs: DMatrix<f64>,
    grid: Option<SpatialGrid>,
}

impl ChaosExpansion {
    pub fn new(index_set: IndexSet, coeffs: DMatrix<f64>, grid: Option<SpatialGrid>) -> Result<Self> {
        if coeffs.ncols() != index_set.len() {
            return Err(Error::DimensionMismatch {
                expected: index_set.len(),
                actual: coeffs.ncols(),
            });
        }
        if let Some(g) = &grid {
            if coeffs.nrows() != g.n_points() {
                return Err(Error::DimensionMismatch {
                    expected: g.n_points(),
                    actual: coeffs.nrows(),
                });
            }
        }
        Ok(Self { index_set, coeffs, grid })
    }

    /// Expansion of a scalar quantity (a single abstract point).
    pub fn scalar(index_set: IndexSet, coeffs: Vec<f64>) -> Result<Self> {
        let n = coeffs.len();
        Self::new(index_set, DMatrix::from_vec(1, n, coeffs), None)
    }

    pub fn zeros(index_set: IndexSet, n_points: usize, grid: Option<SpatialGrid>) -> Result<Self> {
        let n = index_set.len();
        Self::new(index_set, DMatrix::zeros(n_points, n), grid)
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.coeffs
    }

    pub fn grid(&self) -> Option<&SpatialGrid> {
        self.grid.as_ref()
    }

    pub fn n_points(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn dim(&self) -> usize {
        self.index_set.dim()
    }

    /// Coefficient of `alpha` at grid point `point`.
    pub fn coeff(&self, point: usize, alpha: &MultiIndex) -> Option<f64> {
        self.index_set.position(alpha).map(|j| self.coeffs[(point, j)])
    }

    /// Evaluates the expansion at input `xi` and grid point `point`.
    pub fn eval(&self, xi: &[f64], point: usize) -> Result<f64> {
        if point >= self.n_points() {
            return Err(Error::PointOutOfRange { index: point, n_points: self.n_points() });
        }
        if xi.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), actual: xi.len() });
        }
        let mut acc = 0.0;
        for (j, alpha) in self.index_set.iter().enumerate() {
            let c = self.coeffs[(point, j)];
            if c != 0.0 {
                acc += c * psi(alpha, xi)?;
            }
        }
        Ok(acc)
    }

    /// Mean and variance at `point`: by orthonormality the mean is the
    /// constant coefficient and the variance the sum of squares of the rest.
    pub fn moments(&self, point: usize) -> (f64, f64) {
        let row = self.coeffs.row(point);
        let mean = row[0];
        let variance = row.iter().skip(1).map(|c| c * c).sum();
        (mean, variance)
    }

    /// Writes the columnar on-disk format: a single-line JSON header with
    /// `d`, `p`, the ordering tag and the grid shape, followed by one CSV
    /// row of coefficients per grid point.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = ExpansionHeader {
            d: self.dim(),
            p: self.index_set.max_order(),
            ordering: ORDERING_TAG.to_string(),
            grid: self.grid.clone(),
            n_points: self.n_points(),
        };
        serde_json::to_writer(&mut w, &header)
            .map_err(|e| Error::Format { path: "<writer>".into(), reason: e.to_string() })?;
        writeln!(w)?;
        for i in 0..self.coeffs.nrows() {
            let row: Vec<String> =
                self.coeffs.row(i).iter().map(|v| format!("{v:.17e}")).collect();
            writeln!(w, "{}", row.join(","))?;
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write(BufWriter::new(file))
    }

    pub fn read<R: BufRead>(mut r: R) -> Result<Self> {
        let mut line = String::new();
        r.read_line(&mut line)?;
        let header: ExpansionHeader = serde_json::from_str(line.trim())
            .map_err(|e| Error::Format { path: "<reader>".into(), reason: e.to_string() })?;
        if header.ordering != ORDERING_TAG {
            return Err(Error::Format {
                path: "<reader>".into(),
                reason: format!("unsupported ordering tag {:?}", header.ordering),
            });
        }
        let index_set = IndexSet::new(header.d, header.p)?;
        let mut data = Vec::with_capacity(header.n_points * index_set.len());
        let mut rows = 0;
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split(',') {
                let v: f64 = tok.trim().parse().map_err(|e| Error::Format {
                    path: "<reader>".into(),
                    reason: format!("bad coefficient {tok:?}: {e}"),
                })?;
                data.push(v);
            }
            rows += 1;
        }
        if rows != header.n_points || data.len() != rows * index_set.len() {
            return Err(Error::Format {
                path: "<reader>".into(),
                reason: format!(
                    "expected {} rows of {} coefficients, got {} values in {} rows",
                    header.n_points,
                    index_set.len(),
                    data.len(),
                    rows
                ),
            });
        }
        let coeffs = DMatrix::from_row_iterator(rows, index_set.len(), data);
        Self::new(index_set, coeffs, header.grid)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(BufReader::new(file)).map_err(|e| match e {
            Error::Format { reason, .. } => {
                Error::Format { path: path.display().to_string(), reason }
            }
            other => other,
        })
    }
}

const ORDERING_TAG: &str = "graded-lex";

#[derive(Serialize, Deserialize)]
struct ExpansionHeader {
    d: usize,
    p: usize,
    ordering: String,
    grid: Option<SpatialGrid>,
    n_points: usize,
}
