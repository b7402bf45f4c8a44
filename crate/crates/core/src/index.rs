//! Multi-index sets for total-order truncated Hermite chaos bases.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Highest total order supported; factorials stay exact in u64 well past this.
pub const MAX_ORDER: usize = 10;

/// Default cap on `d * |J_p|` coefficient entries a set may imply.
pub const DEFAULT_ENTRY_LIMIT: u128 = 200_000_000;

/// Exponent vector labelling one multivariate Hermite basis function.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex {
    exponents: Vec<u32>,
}

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        Self { exponents }
    }

    /// The zero index of dimension `d` (the constant basis term).
    pub fn zero(d: usize) -> Self {
        Self { exponents: vec![0; d] }
    }

    /// `k * eps_i`: exponent `k` in slot `i`, zero elsewhere.
    pub fn axis(d: usize, i: usize, k: u32) -> Self {
        let mut exponents = vec![0; d];
        exponents[i] = k;
        Self { exponents }
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn dim(&self) -> usize {
        self.exponents.len()
    }

    /// Total order `|alpha|`.
    pub fn order(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn is_zero(&self) -> bool {
        self.exponents.iter().all(|&e| e == 0)
    }

    /// `alpha! = prod alpha_i!`, exact. Safe for total orders up to [`MAX_ORDER`].
    pub fn factorial(&self) -> u64 {
        self.exponents.iter().map(|&e| factorial(e)).product()
    }

    pub fn sqrt_factorial(&self) -> f64 {
        (self.factorial() as f64).sqrt()
    }

    /// Indices of the nonzero exponents.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.exponents.iter().enumerate().filter(|(_, &e)| e > 0).map(|(i, _)| i)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, e) in self.exponents.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, ")")
    }
}

pub fn factorial(n: u32) -> u64 {
    (1..=n as u64).product()
}

pub fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k.min(n));
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// The truncated set `J_p = { alpha : |alpha| <= p }` in graded lexicographic
/// order: grades ascend, and within a grade indices sort lexicographically
/// with the leading variable dominant (so `(n,0,...,0)` opens grade `n`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexSet {
    d: usize,
    p: usize,
    indices: Vec<MultiIndex>,
    positions: HashMap<MultiIndex, usize>,
}

impl IndexSet {
    /// Builds `J_p` for `d` variables and maximum total order `p`.
    pub fn new(d: usize, p: usize) -> Result<Self> {
        Self::with_entry_limit(d, p, DEFAULT_ENTRY_LIMIT)
    }

    pub fn with_entry_limit(d: usize, p: usize, limit: u128) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidArgument("index set dimension must be >= 1".into()));
        }
        if p > MAX_ORDER {
            return Err(Error::InvalidArgument(format!(
                "total order {p} exceeds the supported maximum {MAX_ORDER}"
            )));
        }
        let cardinality = binomial((d + p) as u64, p as u64);
        let entries = d as u128 * cardinality;
        if entries > limit {
            return Err(Error::IndexSetTooLarge { d, p, entries, limit });
        }

        let mut indices = Vec::with_capacity(cardinality as usize);
        for grade in 0..=p {
            push_grade(&mut indices, d, grade as u32);
        }
        let positions =
            indices.iter().cloned().enumerate().map(|(i, idx)| (idx, i)).collect();
        Ok(Self { d, p, indices, positions })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn max_order(&self) -> usize {
        self.p
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn index(&self, i: usize) -> &MultiIndex {
        &self.indices[i]
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    pub fn iter(&self) -> std::slice::Iter<'_, MultiIndex> {
        self.indices.iter()
    }

    /// Position of `alpha` in the set, if present.
    pub fn position(&self, alpha: &MultiIndex) -> Option<usize> {
        self.positions.get(alpha).copied()
    }

    /// Positions of all members of total order `n`. Contiguous by construction.
    pub fn order_block(&self, n: u32) -> std::ops::Range<usize> {
        let start = self.indices.partition_point(|a| a.order() < n);
        let end = self.indices.partition_point(|a| a.order() <= n);
        start..end
    }

    /// Positions of every index supported on the first `n_vars` variables,
    /// up to total order `q`.
    pub fn subset_full(&self, n_vars: usize, q: usize) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, a)| {
                a.order() as usize <= q && a.support().all(|i| i < n_vars)
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Positions of the constant term and every pure one-variable index
    /// `k * eps_i` with `i < n_vars` and `k <= q`. This is the retained set
    /// used by the one-dimensional-terms adapted series.
    pub fn subset_univariate(&self, n_vars: usize, q: usize) -> Vec<usize> {
        self.indices
            .iter()
            .enumerate()
            .filter(|(_, a)| {
                let nz: Vec<usize> = a.support().collect();
                a.order() as usize <= q
                    && (nz.is_empty() || (nz.len() == 1 && nz[0] < n_vars))
            })
            .map(|(i, _)| i)
            .collect()
    }
}

fn push_grade(out: &mut Vec<MultiIndex>, d: usize, grade: u32) {
    let mut current = vec![0u32; d];
    fill(out, &mut current, 0, grade);

    fn fill(out: &mut Vec<MultiIndex>, current: &mut Vec<u32>, slot: usize, remaining: u32) {
        if slot + 1 == current.len() {
            current[slot] = remaining;
            out.push(MultiIndex::new(current.clone()));
            current[slot] = 0;
            return;
        }
        for e in (0..=remaining).rev() {
            current[slot] = e;
            fill(out, current, slot + 1, remaining - e);
        }
        current[slot] = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cardinality_matches_binomial() {
        for d in 1..=25 {
            for p in 0..=5 {
                let set = IndexSet::new(d, p).unwrap();
                assert_eq!(set.len() as u128, binomial((d + p) as u64, p as u64));
            }
        }
    }

    #[test]
    fn paper_scale_cardinality() {
        let set = IndexSet::new(20, 3).unwrap();
        assert_eq!(set.len(), 1771);
    }

    #[test]
    fn single_constant_index() {
        let set = IndexSet::new(1, 0).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.index(0), &MultiIndex::zero(1));
    }

    #[test]
    fn d3_p2_enumeration() {
        // Exhaustive: all alpha in {0..2}^3 with |alpha| <= 2.
        let set = IndexSet::new(3, 2).unwrap();
        assert_eq!(set.len(), 10);
        let mut expected = Vec::new();
        for a in 0..=2u32 {
            for b in 0..=2u32 {
                for c in 0..=2u32 {
                    if a + b + c <= 2 {
                        expected.push(MultiIndex::new(vec![a, b, c]));
                    }
                }
            }
        }
        for e in &expected {
            assert!(set.position(e).is_some(), "missing {e}");
        }
    }

    #[test]
    fn ordering_is_graded_then_lex() {
        let set = IndexSet::new(3, 3).unwrap();
        for w in set.indices().windows(2) {
            let (a, b) = (&w[0], &w[1]);
            assert!(
                a.order() < b.order()
                    || (a.order() == b.order() && a.exponents() > b.exponents())
            );
        }
        // Grade 1 opens with (1,0,0).
        let block = set.order_block(1);
        assert_eq!(set.index(block.start), &MultiIndex::axis(3, 0, 1));
    }

    #[test]
    fn position_is_bijective() {
        let set = IndexSet::new(4, 3).unwrap();
        for i in 0..set.len() {
            assert_eq!(set.position(set.index(i)), Some(i));
        }
    }

    #[test]
    fn rejects_oversized_set() {
        let err = IndexSet::with_entry_limit(20, 3, 1000).unwrap_err();
        assert!(matches!(err, Error::IndexSetTooLarge { .. }));
    }

    #[test]
    fn factorial_is_exact_through_max_order() {
        assert_eq!(factorial(10), 3_628_800);
        let alpha = MultiIndex::new(vec![4, 3, 3]);
        assert_eq!(alpha.factorial(), 24 * 6 * 6);
    }

    #[test]
    fn univariate_subset() {
        let set = IndexSet::new(4, 3).unwrap();
        let sub = set.subset_univariate(2, 2);
        // {0, e1, e2, 2e1, 2e2}
        assert_eq!(sub.len(), 5);
        for pos in sub {
            let a = set.index(pos);
            assert!(a.support().count() <= 1);
        }
    }
}
