//! Expansions with random coefficients: partition the Gaussian input into
//! an adapted block and a parameter block, regroup the coefficients, and
//! adapt conditionally on the parameter block.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::adaptation::{
    gaussian_adaptation, project, quadratic_adaptation, AdaptationScheme, AdaptedExpansion,
    IsometryField,
};
use crate::error::{Error, Result};
use crate::expansion::{psi, ChaosExpansion};
use crate::index::{IndexSet, MultiIndex};

/// Partition of the `d` input variables into the adapted block (xi-hat)
/// and the parameter block (zeta-hat).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub adapted: Vec<usize>,
    pub parameter: Vec<usize>,
}

impl SplitSpec {
    /// The leading `d1` variables adapted, the rest parametric.
    pub fn leading(d: usize, d1: usize) -> Result<Self> {
        if d1 > d {
            return Err(Error::InvalidPartition(format!("adapted block {d1} exceeds dimension {d}")));
        }
        Ok(Self { adapted: (0..d1).collect(), parameter: (d1..d).collect() })
    }

    pub fn validate(&self, d: usize) -> Result<()> {
        if self.adapted.is_empty() {
            return Err(Error::InvalidPartition("adapted block must be non-empty".into()));
        }
        let mut seen = vec![false; d];
        for &i in self.adapted.iter().chain(&self.parameter) {
            if i >= d {
                return Err(Error::InvalidPartition(format!("variable {i} out of range for d = {d}")));
            }
            if seen[i] {
                return Err(Error::InvalidPartition(format!("variable {i} appears twice")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidPartition("partition must cover all variables".into()));
        }
        Ok(())
    }
}

/// A chaos expansion regrouped as `u = sum_alpha U_alpha(x, zeta) psi_alpha(xi)`
/// with coefficient tables `u_{alpha,beta}(x)` over index pairs.
#[derive(Debug, Clone)]
pub struct SplitExpansion {
    base: ChaosExpansion,
    split: SplitSpec,
    xi_set: IndexSet,
    zeta_set: IndexSet,
    /// For each base-set position: positions of its (alpha, beta) parts.
    pairs: Vec<(usize, usize)>,
}

impl SplitExpansion {
    pub fn base(&self) -> &ChaosExpansion {
        &self.base
    }

    pub fn split(&self) -> &SplitSpec {
        &self.split
    }

    pub fn xi_set(&self) -> &IndexSet {
        &self.xi_set
    }

    pub fn zeta_set(&self) -> &IndexSet {
        &self.zeta_set
    }

    pub fn d1(&self) -> usize {
        self.split.adapted.len()
    }

    pub fn d2(&self) -> usize {
        self.split.parameter.len()
    }

    /// Coefficient `u_{alpha,beta}(x)`, zero when `|alpha| + |beta| > p`.
    pub fn pair_coeff(&self, point: usize, alpha_pos: usize, beta_pos: usize) -> f64 {
        for (base_pos, &(a, b)) in self.pairs.iter().enumerate() {
            if a == alpha_pos && b == beta_pos {
                return self.base.coeffs()[(point, base_pos)];
            }
        }
        0.0
    }
}

/// Decomposes every base multi-index into its adapted and parametric parts.
/// Exact: normalized Hermite products factor across disjoint supports, so
/// coefficients carry over unchanged.
pub fn regroup(base: &ChaosExpansion, split: &SplitSpec) -> Result<SplitExpansion> {
    let set = base.index_set();
    let d = set.dim();
    split.validate(d)?;
    let p = set.max_order();
    let d1 = split.adapted.len();
    let d2 = split.parameter.len();
    let xi_set = IndexSet::new(d1, p)?;
    let zeta_set = if d2 > 0 { IndexSet::new(d2, p)? } else { IndexSet::new(1, 0)? };
    let pairs = set
        .iter()
        .map(|gamma| {
            let alpha = MultiIndex::new(
                split.adapted.iter().map(|&i| gamma.exponents()[i]).collect(),
            );
            let beta = if d2 > 0 {
                MultiIndex::new(split.parameter.iter().map(|&i| gamma.exponents()[i]).collect())
            } else {
                MultiIndex::zero(1)
            };
            let a = xi_set.position(&alpha).ok_or_else(|| Error::RetainedNotSubset(alpha.clone()))?;
            let b =
                zeta_set.position(&beta).ok_or_else(|| Error::RetainedNotSubset(beta.clone()))?;
            Ok((a, b))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SplitExpansion { base: base.clone(), split: split.clone(), xi_set, zeta_set, pairs })
}

/// Reassembles the base expansion from the regrouped tables; exact inverse
/// of `regroup`.
pub fn merge(se: &SplitExpansion) -> ChaosExpansion {
    se.base.clone()
}

/// `U_alpha(x, zeta) = sum_beta u_{alpha,beta}(x) psi_beta(zeta)` for every
/// alpha in the adapted-block index set, at one grid point.
pub fn conditional_coefficients(
    se: &SplitExpansion,
    zeta: &[f64],
    point: usize,
) -> Result<DVector<f64>> {
    if zeta.len() != se.d2() {
        return Err(Error::DimensionMismatch { expected: se.d2(), actual: zeta.len() });
    }
    if point >= se.base.n_points() {
        return Err(Error::PointOutOfRange { index: point, n_points: se.base.n_points() });
    }
    let zeta_eval: &[f64] = if se.d2() == 0 { &[0.0] } else { zeta };
    let psi_beta: Vec<f64> = se
        .zeta_set
        .iter()
        .map(|beta| psi(beta, zeta_eval))
        .collect::<Result<_>>()?;
    let mut out = DVector::zeros(se.xi_set.len());
    for (base_pos, &(a, b)) in se.pairs.iter().enumerate() {
        out[a] += se.base.coeffs()[(point, base_pos)] * psi_beta[b];
    }
    Ok(out)
}

/// The full conditional expansion over the adapted block at a fixed zeta:
/// one row per grid point, columns over the `d1`-variable index set.
pub fn conditional_expansion(se: &SplitExpansion, zeta: &[f64]) -> Result<ChaosExpansion> {
    if zeta.len() != se.d2() {
        return Err(Error::DimensionMismatch { expected: se.d2(), actual: zeta.len() });
    }
    let zeta_eval: &[f64] = if se.d2() == 0 { &[0.0] } else { zeta };
    let psi_beta: Vec<f64> = se
        .zeta_set
        .iter()
        .map(|beta| psi(beta, zeta_eval))
        .collect::<Result<_>>()?;
    let n_points = se.base.n_points();
    let mut coeffs = DMatrix::zeros(n_points, se.xi_set.len());
    for (base_pos, &(a, b)) in se.pairs.iter().enumerate() {
        let w = psi_beta[b];
        if w != 0.0 {
            for pt in 0..n_points {
                coeffs[(pt, a)] += se.base.coeffs()[(pt, base_pos)] * w;
            }
        }
    }
    ChaosExpansion::new(se.xi_set.clone(), coeffs, se.base.grid().cloned())
}

/// Conditional adaptation at a fixed zeta draw: builds `A(x, zeta)` from
/// the conditional coefficients, rotates, and projects onto `retained`
/// (positions into the adapted-block index set).
pub fn conditional_adapt(
    se: &SplitExpansion,
    zeta: &[f64],
    scheme: AdaptationScheme,
    retained: &[usize],
) -> Result<(AdaptedExpansion, IsometryField)> {
    let cond = conditional_expansion(se, zeta)?;
    let field = match scheme {
        AdaptationScheme::Gaussian => gaussian_adaptation(&cond)?,
        AdaptationScheme::Quadratic => quadratic_adaptation(&cond, 1)?,
        AdaptationScheme::Custom => {
            return Err(Error::InvalidArgument(
                "conditional adaptation requires the gaussian or quadratic scheme".into(),
            ))
        }
    };
    let adapted = project(&cond, &field, retained)?;
    Ok((adapted, field))
}
