//! Exact transformation of chaos coefficients under an isometry of the
//! Gaussian input space.
//!
//! The inner products `<psi_alpha(xi), psi_beta(A xi)>` are evaluated as a
//! Wick/Feynman-diagram sum. Diagrams pairing `|alpha|` copies of the
//! original variables with `|beta|` copies of the rotated ones are grouped
//! by the contingency table `M` of pair counts: `M` has row sums `beta`,
//! column sums `alpha`, each table contributing
//! `(alpha! beta! / prod M_ij!) * prod a_ij^{M_ij}`. Cross-order entries
//! vanish, making the Grammian block-diagonal by total order.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::expansion::ChaosExpansion;
use crate::index::{IndexSet, MultiIndex};

/// Isometry tolerance used everywhere an orthogonal matrix is validated.
pub const ISOMETRY_TOL: f64 = 1e-10;

/// Largest total order accepted by the general Gram-entry enumeration.
/// Diagram counts grow combinatorially; the experiments need order 3.
pub const MAX_GRAM_ORDER: usize = 6;

/// A real orthogonal matrix, validated on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Isometry {
    matrix: DMatrix<f64>,
}

impl Isometry {
    pub fn new(matrix: DMatrix<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let residual = isometry_residual(&matrix);
        if residual > ISOMETRY_TOL {
            return Err(Error::NotIsometry { residual });
        }
        Ok(Self { matrix })
    }

    pub fn identity(d: usize) -> Self {
        Self { matrix: DMatrix::identity(d, d) }
    }

    /// Haar-distributed random orthogonal matrix (QR of a Gaussian matrix
    /// with the sign of the R diagonal fixed).
    pub fn random<R: Rng>(d: usize, rng: &mut R) -> Self {
        let g: DMatrix<f64> = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
        let qr = g.qr();
        let r = qr.r();
        let mut q = qr.q();
        for j in 0..d {
            if r[(j, j)] < 0.0 {
                for i in 0..d {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        Self { matrix: q }
    }

    /// 2-D rotation by `theta`: rows `(cos, sin)` and `(-sin, cos)`.
    pub fn rotation_2d(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { matrix: DMatrix::from_row_slice(2, 2, &[c, s, -s, c]) }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// Row `i` as an owned vector.
    pub fn row(&self, i: usize) -> DVector<f64> {
        self.matrix.row(i).transpose()
    }

    /// `eta = A xi`.
    pub fn apply(&self, xi: &[f64]) -> Vec<f64> {
        let x = DVector::from_column_slice(xi);
        (&self.matrix * x).iter().copied().collect()
    }
}

pub fn isometry_residual(matrix: &DMatrix<f64>) -> f64 {
    let d = matrix.nrows();
    let gram = matrix * matrix.transpose();
    let mut residual: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let target = if i == j { 1.0 } else { 0.0 };
            residual = residual.max((gram[(i, j)] - target).abs());
        }
    }
    residual
}

/// `<psi_alpha(xi), psi_beta(A xi)>` via the diagram sum. Zero across orders.
pub fn gram_entry(alpha: &MultiIndex, beta: &MultiIndex, a: &Isometry) -> Result<f64> {
    let d = a.dim();
    if alpha.dim() != d || beta.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: if alpha.dim() != d { alpha.dim() } else { beta.dim() },
        });
    }
    let n = alpha.order() as usize;
    if n != beta.order() as usize {
        return Ok(0.0);
    }
    if n > MAX_GRAM_ORDER {
        return Err(Error::OrderTooLarge { order: n, bound: MAX_GRAM_ORDER });
    }
    if n == 0 {
        return Ok(1.0);
    }

    // Only the support of beta (rows) and alpha (columns) can carry pairs.
    let rows: Vec<(usize, u32)> =
        beta.support().map(|i| (i, beta.exponents()[i])).collect();
    let cols: Vec<usize> = alpha.support().collect();
    let mut col_remaining: Vec<u32> = cols.iter().map(|&j| alpha.exponents()[j]).collect();

    let norm = (alpha.factorial() as f64 * beta.factorial() as f64).sqrt();
    let fact_product = alpha.factorial() * beta.factorial();

    let mut total = 0.0;
    enumerate_tables(
        a,
        &rows,
        &cols,
        &mut col_remaining,
        0,
        fact_product,
        1.0,
        &mut total,
    );
    Ok(total / norm)
}

/// Walks contingency tables row by row. `multiplicity` carries
/// `alpha! beta! / prod M_ij!` for the cells already placed, `weight` the
/// product of the corresponding matrix entries.
#[allow(clippy::too_many_arguments)]
fn enumerate_tables(
    a: &Isometry,
    rows: &[(usize, u32)],
    cols: &[usize],
    col_remaining: &mut Vec<u32>,
    row_idx: usize,
    multiplicity: u64,
    weight: f64,
    total: &mut f64,
) {
    if row_idx == rows.len() {
        *total += multiplicity as f64 * weight;
        return;
    }
    let (row, budget) = rows[row_idx];
    distribute(
        a, rows, cols, col_remaining, row_idx, row, budget, 0, multiplicity, weight, total,
    );
}

#[allow(clippy::too_many_arguments)]
fn distribute(
    a: &Isometry,
    rows: &[(usize, u32)],
    cols: &[usize],
    col_remaining: &mut Vec<u32>,
    row_idx: usize,
    row: usize,
    budget: u32,
    col_idx: usize,
    multiplicity: u64,
    weight: f64,
    total: &mut f64,
) {
    if col_idx == cols.len() {
        if budget == 0 {
            enumerate_tables(
                a, rows, cols, col_remaining, row_idx + 1, multiplicity, weight, total,
            );
        }
        return;
    }
    let cap = budget.min(col_remaining[col_idx]);
    for m in 0..=cap {
        let mult = multiplicity / crate::index::factorial(m);
        let w = weight * a.entry(row, cols[col_idx]).powi(m as i32);
        col_remaining[col_idx] -= m;
        distribute(
            a,
            rows,
            cols,
            col_remaining,
            row_idx,
            row,
            budget - m,
            col_idx + 1,
            mult,
            w,
            total,
        );
        col_remaining[col_idx] += m;
    }
}

/// Fast path for a one-dimensional target subspace: the unnormalized
/// `<h_alpha(xi), h_n(eta_i)> = n! prod_k a_{i,k}^{alpha_k}`, since every
/// complete diagram takes the same value. Zero when `|alpha| != n`.
pub fn gram_entry_1d(alpha: &MultiIndex, n: u32, i: usize, a: &Isometry) -> Result<f64> {
    if alpha.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), actual: alpha.dim() });
    }
    if alpha.order() != n {
        return Ok(0.0);
    }
    let mut prod = crate::index::factorial(n) as f64;
    for (k, &e) in alpha.exponents().iter().enumerate() {
        if e > 0 {
            prod *= a.entry(i, k).powi(e as i32);
        }
    }
    Ok(prod)
}

/// Normalized variant of [`gram_entry_1d`]:
/// `<psi_alpha(xi), psi_n(eta_i)> = <h_alpha, h_n(eta_i)> / sqrt(alpha! n!)`.
pub fn gram_entry_1d_normalized(alpha: &MultiIndex, n: u32, i: usize, a: &Isometry) -> Result<f64> {
    let raw = gram_entry_1d(alpha, n, i, a)?;
    Ok(raw / (alpha.factorial() as f64 * crate::index::factorial(n) as f64).sqrt())
}

/// Grammian `C_{alpha,beta} = <psi_alpha, psi_beta^A>` over an index set,
/// with columns outside the retained set zeroed.
#[derive(Debug, Clone)]
pub struct GramMatrix {
    entries: DMatrix<f64>,
    retained: Vec<bool>,
}

impl GramMatrix {
    /// Assembles the Grammian for `index_set` under `a`. `retained` lists
    /// positions whose columns are kept; `None` keeps all of them.
    pub fn assemble(index_set: &IndexSet, a: &Isometry, retained: Option<&[usize]>) -> Result<Self> {
        if index_set.dim() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: index_set.dim(),
                actual: a.dim(),
            });
        }
        let n = index_set.len();
        let mut mask = vec![retained.is_none(); n];
        if let Some(keep) = retained {
            for &pos in keep {
                if pos >= n {
                    return Err(Error::InvalidArgument(format!(
                        "retained position {pos} out of range for index set of size {n}"
                    )));
                }
                mask[pos] = true;
            }
        }

        let columns: Vec<(usize, Vec<f64>)> = (0..n)
            .into_par_iter()
            .filter(|&j| mask[j])
            .map(|j| {
                let beta = index_set.index(j);
                let block = index_set.order_block(beta.order());
                let mut col = vec![0.0; n];
                for i in block {
                    col[i] = gram_entry(index_set.index(i), beta, a)?;
                }
                Ok((j, col))
            })
            .collect::<Result<_>>()?;

        let mut entries = DMatrix::zeros(n, n);
        for (j, col) in columns {
            for i in 0..n {
                entries[(i, j)] = col[i];
            }
        }
        Ok(Self { entries, retained: mask })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn retained_mask(&self) -> &[bool] {
        &self.retained
    }

    /// CSV dump with multi-index row/column labels.
    pub fn write_csv<W: Write>(&self, index_set: &IndexSet, mut w: W) -> Result<()> {
        write!(w, "alpha\\beta")?;
        for beta in index_set.iter() {
            write!(w, ",\"{beta}\"")?;
        }
        writeln!(w)?;
        for (i, alpha) in index_set.iter().enumerate() {
            write!(w, "\"{alpha}\"")?;
            for j in 0..index_set.len() {
                write!(w, ",{:.17e}", self.entries[(i, j)])?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

/// Rotates the coefficient field of `e` to the basis `eta = A xi`, keeping
/// only the `retained` positions of the index set (coefficients elsewhere
/// are zero in the result). Exploits the block structure across orders.
pub fn rotate_coefficients(
    e: &ChaosExpansion,
    a: &Isometry,
    retained: &[usize],
) -> Result<ChaosExpansion> {
    let set = e.index_set();
    if a.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), actual: a.dim() });
    }
    for &pos in retained {
        if pos >= set.len() {
            return Err(Error::InvalidArgument(format!(
                "retained position {pos} out of range for index set of size {}",
                set.len()
            )));
        }
    }

    let n_points = e.n_points();
    let columns: Vec<(usize, DVector<f64>)> = retained
        .par_iter()
        .map(|&pos| {
            let beta = set.index(pos);
            let mut col = DVector::zeros(n_points);
            for i in set.order_block(beta.order()) {
                let g = gram_entry(set.index(i), beta, a)?;
                if g != 0.0 {
                    col.axpy(g, &e.coeffs().column(i).clone_owned(), 1.0);
                }
            }
            Ok((pos, col))
        })
        .collect::<Result<_>>()?;

    let mut out = ChaosExpansion::zeros(set.clone(), n_points, e.grid().cloned())?;
    for (pos, col) in columns {
        out.coeffs_mut().set_column(pos, &col);
    }
    Ok(out)
}

/// Closed-form adapted coefficients along a one-dimensional subspace with
/// unit direction `a_row`, for orders `0..=max_order` (at most 3):
/// `u_{n eps_1}^A = sqrt(n!) sum_{|alpha|=n} u_alpha / sqrt(alpha!) *
/// prod_k a_k^{alpha_k}`. Expanding the order-2 and order-3 blocks
/// reproduces the sqrt(2)-, sqrt(3)- and sqrt(6)-weighted mixed sums.
pub fn explicit_coeffs_1d(
    e: &ChaosExpansion,
    a_row: &[f64],
    max_order: usize,
) -> Result<DMatrix<f64>> {
    if max_order > 3 {
        return Err(Error::OrderTooLarge { order: max_order, bound: 3 });
    }
    let set = e.index_set();
    if a_row.len() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), actual: a_row.len() });
    }
    let norm: f64 = a_row.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > ISOMETRY_TOL {
        return Err(Error::NotIsometry { residual: (norm - 1.0).abs() });
    }

    let top = max_order.min(set.max_order());
    let mut out = DMatrix::zeros(e.n_points(), max_order + 1);
    for n in 0..=top as u32 {
        let sqrt_nfact = (crate::index::factorial(n) as f64).sqrt();
        for i in set.order_block(n) {
            let alpha = set.index(i);
            let mut w = sqrt_nfact / alpha.sqrt_factorial();
            for (k, &ex) in alpha.exponents().iter().enumerate() {
                if ex > 0 {
                    w *= a_row[k].powi(ex as i32);
                }
            }
            if w != 0.0 {
                let col = e.coeffs().column(i);
                for pt in 0..e.n_points() {
                    out[(pt, n as usize)] += w * col[pt];
                }
            }
        }
    }
    Ok(out)
}
