//! Spatially-varying adaptation isometries, reduced expansions via
//! projection, and the covariance kernel of the adapted input process.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expansion::{psi, ChaosExpansion};
use crate::grid::SpatialGrid;
use crate::index::{IndexSet, MultiIndex};
use crate::rotation::{gram_entry, Isometry, ISOMETRY_TOL};

/// Threshold below which the first-order coefficient vector counts as
/// degenerate for the Gaussian adaptation.
pub const DEGENERATE_NORM: f64 = 1e-14;

/// Gram-Schmidt candidates closer than this to the span of accepted rows
/// are skipped during isometry completion.
const COMPLETION_SKIP_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdaptationScheme {
    Gaussian,
    Quadratic,
    Custom,
}

impl std::fmt::Display for AdaptationScheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AdaptationScheme::Gaussian => write!(f, "gaussian"),
            AdaptationScheme::Quadratic => write!(f, "quadratic"),
            AdaptationScheme::Custom => write!(f, "custom"),
        }
    }
}

/// A per-grid-point family of orthogonal matrices, rows ordered so that the
/// adapted subspace is spanned by the first `rows_retained` rows.
#[derive(Debug, Clone)]
pub struct IsometryField {
    grid: Option<SpatialGrid>,
    rows_retained: usize,
    matrices: Vec<Isometry>,
    scheme: AdaptationScheme,
}

impl IsometryField {
    pub fn new(
        grid: Option<SpatialGrid>,
        rows_retained: usize,
        matrices: Vec<Isometry>,
        scheme: AdaptationScheme,
    ) -> Result<Self> {
        if matrices.is_empty() {
            return Err(Error::InvalidArgument("isometry field needs at least one matrix".into()));
        }
        let d = matrices[0].dim();
        if rows_retained == 0 || rows_retained > d {
            return Err(Error::InvalidArgument(format!(
                "rows_retained must be in 1..={d}, got {rows_retained}"
            )));
        }
        if let Some(g) = &grid {
            if g.n_points() != matrices.len() {
                return Err(Error::DimensionMismatch {
                    expected: g.n_points(),
                    actual: matrices.len(),
                });
            }
        }
        Ok(Self { grid, rows_retained, matrices, scheme })
    }

    pub fn grid(&self) -> Option<&SpatialGrid> {
        self.grid.as_ref()
    }

    pub fn dim(&self) -> usize {
        self.matrices[0].dim()
    }

    pub fn rows_retained(&self) -> usize {
        self.rows_retained
    }

    pub fn scheme(&self) -> AdaptationScheme {
        self.scheme
    }

    pub fn n_points(&self) -> usize {
        self.matrices.len()
    }

    pub fn at(&self, point: usize) -> &Isometry {
        &self.matrices[point]
    }

    pub fn matrices(&self) -> &[Isometry] {
        &self.matrices
    }

    /// Area weight of each point (cell areas, or 1 without a grid).
    fn point_weights(&self) -> DVector<f64> {
        match &self.grid {
            Some(g) => DVector::from_element(g.n_points(), g.cell_area()),
            None => DVector::from_element(self.matrices.len(), 1.0),
        }
    }

    /// On-disk format: single-line JSON header (grid shape, d, n, scheme)
    /// followed by row-major matrix blocks, one CSV line per matrix row.
    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        let header = FieldHeader {
            grid: self.grid.clone(),
            d: self.dim(),
            rows_retained: self.rows_retained,
            scheme: self.scheme,
            n_points: self.n_points(),
        };
        serde_json::to_writer(&mut w, &header)
            .map_err(|e| Error::Format { path: "<writer>".into(), reason: e.to_string() })?;
        writeln!(w)?;
        for iso in &self.matrices {
            for i in 0..iso.dim() {
                let row: Vec<String> =
                    (0..iso.dim()).map(|j| format!("{:.17e}", iso.entry(i, j))).collect();
                writeln!(w, "{}", row.join(","))?;
            }
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
        let header: FieldHeader = serde_json::from_str(line.trim())
            .map_err(|e| Error::Format { path: "<reader>".into(), reason: e.to_string() })?;
        let d = header.d;
        let mut matrices = Vec::with_capacity(header.n_points);
        let mut rows: Vec<f64> = Vec::with_capacity(d * d);
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            for tok in line.split(',') {
                rows.push(tok.trim().parse().map_err(|e| Error::Format {
                    path: "<reader>".into(),
                    reason: format!("bad entry {tok:?}: {e}"),
                })?);
            }
            if rows.len() == d * d {
                let m = DMatrix::from_row_iterator(d, d, rows.drain(..));
                matrices.push(Isometry::new(m)?);
            }
        }
        if matrices.len() != header.n_points || !rows.is_empty() {
            return Err(Error::Format {
                path: "<reader>".into(),
                reason: format!("expected {} matrices of size {d}", header.n_points),
            });
        }
        Self::new(header.grid, header.rows_retained, matrices, header.scheme)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read(BufReader::new(file))
    }
}

#[derive(Serialize, Deserialize)]
struct FieldHeader {
    grid: Option<SpatialGrid>,
    d: usize,
    rows_retained: usize,
    scheme: AdaptationScheme,
    n_points: usize,
}

/// Completes `k` orthonormal rows to a full orthogonal matrix by
/// Gram-Schmidt against the standard basis in index order, skipping
/// near-dependent candidates.
pub fn complete_isometry(rows: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (k, d) = (rows.nrows(), rows.ncols());
    if k > d {
        return Err(Error::InvalidArgument(format!("{k} rows cannot be orthonormal in R^{d}")));
    }
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(d);
    for i in 0..k {
        let r = rows.row(i).transpose();
        let mut v = r.clone();
        for b in &basis {
            v.axpy(-b.dot(&r), b, 1.0);
        }
        if v.norm() > COMPLETION_SKIP_TOL && (r.norm() - 1.0).abs() <= ISOMETRY_TOL {
            // keep the supplied row verbatim; only verify independence
            basis.push(r);
        } else {
            return Err(Error::RankDeficient { row: i });
        }
    }
    let mut candidate = 0;
    while basis.len() < d {
        if candidate == d {
            return Err(Error::RankDeficient { row: basis.len() });
        }
        let mut v = DVector::zeros(d);
        v[candidate] = 1.0;
        candidate += 1;
        for b in &basis {
            let proj = b.dot(&v);
            v.axpy(-proj, b, 1.0);
        }
        let norm = v.norm();
        if norm > COMPLETION_SKIP_TOL {
            // second orthogonalization pass tightens the result
            v /= norm;
            for b in &basis {
                let proj = b.dot(&v);
                v.axpy(-proj, b, 1.0);
            }
            v /= v.norm();
            basis.push(v);
        }
    }
    let mut out = DMatrix::zeros(d, d);
    for (i, b) in basis.iter().enumerate() {
        out.row_mut(i).copy_from(&b.transpose());
    }
    Ok(out)
}

fn first_order_positions(set: &IndexSet) -> Vec<usize> {
    (0..set.dim())
        .map(|i| set.position(&MultiIndex::axis(set.dim(), i, 1)).expect("p >= 1"))
        .collect()
}

/// Gaussian adaptation: at each point the first adapted variable is the
/// normalized first-order (linear) part of the expansion.
pub fn gaussian_adaptation(e: &ChaosExpansion) -> Result<IsometryField> {
    let set = e.index_set();
    if set.max_order() < 1 {
        return Err(Error::InvalidArgument("gaussian adaptation needs order p >= 1".into()));
    }
    let d = set.dim();
    let pos = first_order_positions(set);
    let matrices: Vec<Isometry> = (0..e.n_points())
        .into_par_iter()
        .map(|pt| {
            let mut first = DVector::zeros(d);
            for (i, &p) in pos.iter().enumerate() {
                first[i] = e.coeffs()[(pt, p)];
            }
            let norm = first.norm();
            if norm < DEGENERATE_NORM {
                return Err(Error::DegenerateGaussianPart {
                    point: pt,
                    location: e.grid().map(|g| g.center(pt)),
                    norm,
                });
            }
            first /= norm;
            let full = complete_isometry(&DMatrix::from_rows(&[first.transpose()]))?;
            Isometry::new(full)
        })
        .collect::<Result<_>>()?;
    IsometryField::new(e.grid().cloned(), 1, matrices, AdaptationScheme::Gaussian)
}

/// Builds the symmetric second-order coefficient matrix `S(x)` with diagonal
/// `u_{2 eps_i}/sqrt(2)` and off-diagonal `u_{eps_i + eps_j}/2`, i.e. the
/// matrix of the quadratic form `xi^T S xi` underlying the order-2 block.
/// Diagonalizing this S is what makes the rotated cross terms vanish and the
/// adapted second-order coefficients proportional to the eigenvalues.
pub fn second_order_matrix(e: &ChaosExpansion, point: usize) -> Result<DMatrix<f64>> {
    let set = e.index_set();
    if set.max_order() < 2 {
        return Err(Error::InvalidArgument("quadratic adaptation needs order p >= 2".into()));
    }
    let d = set.dim();
    let mut s = DMatrix::zeros(d, d);
    let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
    for i in 0..d {
        let diag = set.position(&MultiIndex::axis(d, i, 2)).expect("p >= 2");
        s[(i, i)] = e.coeffs()[(point, diag)] * inv_sqrt2;
        for j in (i + 1)..d {
            let mut exps = vec![0u32; d];
            exps[i] = 1;
            exps[j] = 1;
            let off = set.position(&MultiIndex::new(exps)).expect("p >= 2");
            let v = e.coeffs()[(point, off)] * 0.5;
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    Ok(s)
}

/// Quadratic adaptation: rows of `A(x)` are the eigenvectors of `S(x)`,
/// ordered by decreasing eigenvalue magnitude, sign-fixed so the
/// largest-magnitude component of each row is positive.
pub fn quadratic_adaptation(e: &ChaosExpansion, rows_retained: usize) -> Result<IsometryField> {
    let d = e.index_set().dim();
    let matrices: Vec<Isometry> = (0..e.n_points())
        .into_par_iter()
        .map(|pt| {
            let s = second_order_matrix(e, pt)?;
            let eig = SymmetricEigen::new(s);
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| {
                eig.eigenvalues[b]
                    .abs()
                    .partial_cmp(&eig.eigenvalues[a].abs())
                    .expect("eigenvalues are finite")
            });
            let mut m = DMatrix::zeros(d, d);
            for (row, &k) in order.iter().enumerate() {
                let mut v = eig.eigenvectors.column(k).clone_owned();
                fix_sign(&mut v);
                m.row_mut(row).copy_from(&v.transpose());
            }
            Isometry::new(m)
        })
        .collect::<Result<_>>()?;
    IsometryField::new(e.grid().cloned(), rows_retained, matrices, AdaptationScheme::Quadratic)
}

/// Eigenvalues of `S(x)` in the row order of the quadratic adaptation.
pub fn second_order_eigenvalues(e: &ChaosExpansion, point: usize) -> Result<Vec<f64>> {
    let s = second_order_matrix(e, point)?;
    let mut vals: Vec<f64> = SymmetricEigen::new(s).eigenvalues.iter().copied().collect();
    vals.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).expect("finite"));
    Ok(vals)
}

fn fix_sign(v: &mut DVector<f64>) {
    let mut idx = 0;
    let mut best = 0.0;
    for (i, &x) in v.iter().enumerate() {
        if x.abs() > best {
            best = x.abs();
            idx = i;
        }
    }
    if v[idx] < 0.0 {
        *v = -v.clone();
    }
}

/// A projected expansion in the adapted basis: one coefficient column per
/// retained index, rows aligned with the base expansion's grid points.
#[derive(Debug, Clone)]
pub struct AdaptedExpansion {
    index_set: IndexSet,
    retained: Vec<usize>,
    coeffs: DMatrix<f64>,
    grid: Option<SpatialGrid>,
    rows_retained: usize,
}

impl AdaptedExpansion {
    pub fn retained(&self) -> &[usize] {
        &self.retained
    }

    pub fn retained_indices(&self) -> Vec<&MultiIndex> {
        self.retained.iter().map(|&p| self.index_set.index(p)).collect()
    }

    pub fn index_set(&self) -> &IndexSet {
        &self.index_set
    }

    pub fn coeffs(&self) -> &DMatrix<f64> {
        &self.coeffs
    }

    pub fn grid(&self) -> Option<&SpatialGrid> {
        self.grid.as_ref()
    }

    pub fn n_points(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn rows_retained(&self) -> usize {
        self.rows_retained
    }

    /// Evaluates the reduced series at adapted input `eta` (length `d`;
    /// components outside retained supports are ignored).
    pub fn eval(&self, eta: &[f64], point: usize) -> Result<f64> {
        if point >= self.n_points() {
            return Err(Error::PointOutOfRange { index: point, n_points: self.n_points() });
        }
        let mut acc = 0.0;
        for (col, &pos) in self.retained.iter().enumerate() {
            let c = self.coeffs[(point, col)];
            if c != 0.0 {
                acc += c * psi(self.index_set.index(pos), eta)?;
            }
        }
        Ok(acc)
    }
}

/// Projects `e` onto the retained adapted indices under the field `field`:
/// at each point the coefficients are the exact rotation restricted to
/// `retained`.
pub fn project(
    e: &ChaosExpansion,
    field: &IsometryField,
    retained: &[usize],
) -> Result<AdaptedExpansion> {
    let set = e.index_set();
    if field.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), actual: field.dim() });
    }
    if field.n_points() != e.n_points() {
        return Err(Error::DimensionMismatch {
            expected: e.n_points(),
            actual: field.n_points(),
        });
    }
    for &pos in retained {
        if pos >= set.len() {
            return Err(Error::RetainedNotSubset(set.index(pos.min(set.len() - 1)).clone()));
        }
    }

    let rows: Vec<Vec<f64>> = (0..e.n_points())
        .into_par_iter()
        .map(|pt| {
            let a = field.at(pt);
            retained
                .iter()
                .map(|&pos| {
                    let beta = set.index(pos);
                    let mut acc = 0.0;
                    for i in set.order_block(beta.order()) {
                        let u = e.coeffs()[(pt, i)];
                        if u != 0.0 {
                            acc += u * gram_entry(set.index(i), beta, a)?;
                        }
                    }
                    Ok(acc)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;

    let coeffs =
        DMatrix::from_fn(e.n_points(), retained.len(), |i, j| rows[i][j]);
    Ok(AdaptedExpansion {
        index_set: set.clone(),
        retained: retained.to_vec(),
        coeffs,
        grid: e.grid().cloned(),
        rows_retained: field.rows_retained(),
    })
}

/// Coefficient-space residual `(I - C C^T) w` of projecting point `point`
/// onto `retained` under isometry `a`; returns the per-index error vector
/// and its Euclidean norm.
pub fn projection_error(
    e: &ChaosExpansion,
    point: usize,
    a: &Isometry,
    retained: &[usize],
) -> Result<(DVector<f64>, f64)> {
    let set = e.index_set();
    let w = e.coeffs().row(point).transpose();
    let mut err = w.clone();
    for &pos in retained {
        let beta = set.index(pos);
        let block = set.order_block(beta.order());
        // column of C for this beta, nonzero only inside its order block
        let mut col = DVector::zeros(set.len());
        for i in block {
            col[i] = gram_entry(set.index(i), beta, a)?;
        }
        let coef = col.dot(&w);
        err.axpy(-coef, &col, 1.0);
    }
    let norm = err.norm();
    Ok((err, norm))
}

/// `L^2(D)` norm of the projection error over the whole grid, using
/// cell-area quadrature weights.
pub fn global_error_norm(
    e: &ChaosExpansion,
    field: &IsometryField,
    retained: &[usize],
) -> Result<f64> {
    let weights = match e.grid() {
        Some(g) => DVector::from_element(g.n_points(), g.cell_area()),
        None => DVector::from_element(e.n_points(), 1.0),
    };
    let sq: f64 = (0..e.n_points())
        .into_par_iter()
        .map(|pt| {
            let (_, norm) = projection_error(e, pt, field.at(pt), retained)?;
            Ok(weights[pt] * norm * norm)
        })
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum();
    Ok(sq.sqrt())
}

/// Covariance kernel `k_i(x, y) = a_i(x) . a_i(y)` of the adapted variable
/// `eta_i` across grid points.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    row_vectors: DMatrix<f64>,
    weights: DVector<f64>,
    source_row: usize,
}

/// Eigenpairs of the area-weighted kernel operator. Eigenvalues are padded
/// with exact zeros past the rank bound `d`; eigenfunctions are orthonormal
/// under the area weights.
#[derive(Debug, Clone)]
pub struct KernelEigen {
    pub eigenvalues: Vec<f64>,
    pub eigenfunctions: DMatrix<f64>,
}

impl KernelMatrix {
    pub fn source_row(&self) -> usize {
        self.source_row
    }

    pub fn n_points(&self) -> usize {
        self.row_vectors.nrows()
    }

    pub fn value(&self, x: usize, y: usize) -> f64 {
        self.row_vectors.row(x).dot(&self.row_vectors.row(y))
    }

    /// The full symmetric kernel matrix.
    pub fn values(&self) -> DMatrix<f64> {
        &self.row_vectors * self.row_vectors.transpose()
    }

    /// Eigendecomposition of `W^{1/2} K W^{1/2}` through the thin SVD of
    /// `W^{1/2} B` (with `K = B B^T`); exact zeros past rank `d`.
    pub fn eigendecompose(&self) -> KernelEigen {
        let n = self.n_points();
        let d = self.row_vectors.ncols();
        let mut scaled = self.row_vectors.clone();
        for i in 0..n {
            let s = self.weights[i].sqrt();
            for j in 0..d {
                scaled[(i, j)] *= s;
            }
        }
        let svd = SVD::new(scaled, true, false);
        let u = svd.u.expect("requested U");
        let mut pairs: Vec<(f64, DVector<f64>)> = (0..u.ncols())
            .map(|k| {
                let s = svd.singular_values[k];
                let mut v = u.column(k).clone_owned();
                // back to eigenfunctions of the Nystrom operator
                for i in 0..n {
                    v[i] /= self.weights[i].sqrt();
                }
                fix_sign(&mut v);
                (s * s, v)
            })
            .collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).expect("finite"));

        let mut eigenvalues: Vec<f64> = pairs.iter().map(|(l, _)| *l).collect();
        eigenvalues.resize(n, 0.0);
        let eigenfunctions =
            DMatrix::from_fn(n, pairs.len(), |i, k| pairs[k].1[i]);
        KernelEigen { eigenvalues, eigenfunctions }
    }

    /// Discrete Hilbert-Schmidt norm `(iint k^2 dx dy)^{1/2}`.
    pub fn hs_norm(&self) -> f64 {
        let n = self.n_points();
        // sum_xy w_x w_y k(x,y)^2 = ||B^T W B||_F^2
        let mut scaled = self.row_vectors.clone();
        for i in 0..n {
            let s = self.weights[i].sqrt();
            scaled.row_mut(i).scale_mut(s);
        }
        (scaled.transpose() * &scaled).norm()
    }
}

/// Kernel of adapted variable `eta_{i+1}` (row `i` of each `A(x)`).
pub fn eta_kernel(field: &IsometryField, i: usize) -> Result<KernelMatrix> {
    if i >= field.dim() {
        return Err(Error::InvalidArgument(format!(
            "row {i} out of range for dimension {}",
            field.dim()
        )));
    }
    let n = field.n_points();
    let d = field.dim();
    let row_vectors = DMatrix::from_fn(n, d, |pt, j| field.at(pt).entry(i, j));
    Ok(KernelMatrix { row_vectors, weights: field.point_weights(), source_row: i })
}
