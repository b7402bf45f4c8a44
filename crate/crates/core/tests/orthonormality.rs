//! Quadrature-verified orthonormality of the multivariate Hermite basis.

mod common;

use chaos_adapt::{psi, IndexSet};
use common::gaussian_expectation;

#[test]
fn basis_is_orthonormal_under_gaussian_measure() {
    for d in 1..=3usize {
        for p in 0..=4usize {
            let set = IndexSet::new(d, p).unwrap();
            let nodes = p + 1; // exact for degree 2p < 2(p+1)
            let mut max_err: f64 = 0.0;
            for (i, alpha) in set.iter().enumerate() {
                for (j, beta) in set.iter().enumerate() {
                    let value = gaussian_expectation(d, nodes, |xi| {
                        psi(alpha, xi).unwrap() * psi(beta, xi).unwrap()
                    });
                    let expected = if i == j { 1.0 } else { 0.0 };
                    max_err = max_err.max((value - expected).abs());
                }
            }
            assert!(max_err < 1e-10, "d={d} p={p}: max deviation {max_err}");
        }
    }
}

#[test]
fn only_the_constant_term_has_nonzero_mean() {
    let set = IndexSet::new(3, 3).unwrap();
    for alpha in set.iter() {
        let mean = gaussian_expectation(3, 4, |xi| psi(alpha, xi).unwrap());
        let expected = if alpha.is_zero() { 1.0 } else { 0.0 };
        assert!((mean - expected).abs() < 1e-12, "alpha = {alpha}");
    }
}

#[test]
fn squared_norm_of_unnormalized_hermite_is_factorial() {
    use chaos_adapt::hermite;
    for n in 0..=6u32 {
        let value = gaussian_expectation(1, 8, |xi| {
            let h = hermite(n, xi[0]);
            h * h
        });
        let fact: f64 = (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        assert!((value / fact - 1.0).abs() < 1e-11, "n = {n}");
    }
}
