//! Shared test oracles: tensorized Gauss-Hermite quadrature for Gaussian
//! expectations, independent of the library's own evaluation paths.

#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};

/// Probabilists' Gauss-Hermite rule (weight `exp(-x^2/2)/sqrt(2 pi)`,
/// weights summing to 1), via the Golub-Welsch eigendecomposition of the
/// Jacobi matrix with off-diagonals `sqrt(k)`.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut jacobi = DMatrix::zeros(n, n);
    for k in 1..n {
        let b = (k as f64).sqrt();
        jacobi[(k - 1, k)] = b;
        jacobi[(k, k - 1)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    (pairs.iter().map(|p| p.0).collect(), pairs.iter().map(|p| p.1).collect())
}

/// `E[f(xi)]` for `xi ~ N(0, I_d)` by a full tensor Gauss-Hermite grid with
/// `n` nodes per dimension (exact for total polynomial degree `< 2n`).
pub fn gaussian_expectation<F: Fn(&[f64]) -> f64>(d: usize, n: usize, f: F) -> f64 {
    let (nodes, weights) = gauss_hermite(n);
    let mut idx = vec![0usize; d];
    let mut point = vec![0.0; d];
    let mut total = 0.0;
    loop {
        let mut w = 1.0;
        for k in 0..d {
            point[k] = nodes[idx[k]];
            w *= weights[idx[k]];
        }
        total += w * f(&point);
        // odometer increment
        let mut k = 0;
        loop {
            if k == d {
                return total;
            }
            idx[k] += 1;
            if idx[k] < n {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn rule_integrates_moments() {
        let (nodes, weights) = gauss_hermite(6);
        let m0: f64 = weights.iter().sum();
        assert!((m0 - 1.0).abs() < 1e-13);
        let m2: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x * x).sum();
        assert!((m2 - 1.0).abs() < 1e-12);
        let m4: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m4 - 3.0).abs() < 1e-11);
        let m6: f64 = nodes.iter().zip(&weights).map(|(x, w)| w * x.powi(6)).sum();
        assert!((m6 - 15.0).abs() < 1e-10);
    }

    #[test]
    fn tensor_rule_is_multiplicative() {
        let v = gaussian_expectation(3, 5, |x| x[0] * x[0] * x[1].powi(4) + 2.0);
        assert!((v - 5.0).abs() < 1e-11);
    }
}
