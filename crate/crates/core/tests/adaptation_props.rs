//! Statistical and spectral properties of adaptation isometry fields.

use chaos_adapt::adaptation::AdaptationScheme;
use chaos_adapt::{
    eta_kernel, gaussian_adaptation, global_error_norm, quadratic_adaptation,
    rotate_coefficients, ChaosExpansion, GaussianSample, IndexSet, Isometry, IsometryField,
    SpatialGrid,
};
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn random_grid_expansion(d: usize, p: usize, grid: &SpatialGrid, seed: u64) -> ChaosExpansion {
    let set = IndexSet::new(d, p).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coeffs = DMatrix::from_fn(grid.n_points(), set.len(), |_, _| {
        let v: f64 = StandardNormal.sample(&mut rng);
        v
    });
    ChaosExpansion::new(set, coeffs, Some(grid.clone())).unwrap()
}

#[test]
fn adapted_variable_is_standard_normal_in_samples() {
    let grid = SpatialGrid::square(1.0, 4).unwrap();
    let e = random_grid_expansion(6, 2, &grid, 21);
    let field = gaussian_adaptation(&e).unwrap();
    let n = 20_000;
    for &pt in &[0usize, 7, 15] {
        let a = field.at(pt);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for k in 0..n {
            let xi = GaussianSample::draw(6, 1000 + k as u64);
            let eta = a.apply(xi.values())[0];
            sum += eta;
            sum_sq += eta * eta;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let tol = 4.0 / (n as f64).sqrt();
        assert!(mean.abs() < tol, "point {pt}: mean {mean}");
        assert!((var - 1.0).abs() < 2.0 * tol, "point {pt}: var {var}");
    }
}

#[test]
fn kernel_spectrum_is_consistent_with_hs_norm() {
    let grid = SpatialGrid::square(2.0, 5).unwrap();
    let e = random_grid_expansion(4, 2, &grid, 22);
    let field = quadratic_adaptation(&e, 2).unwrap();
    for row in 0..2 {
        let k = eta_kernel(&field, row).unwrap();
        let eig = k.eigendecompose();
        let from_spectrum: f64 = eig.eigenvalues.iter().map(|l| l * l).sum::<f64>().sqrt();
        assert!(
            (k.hs_norm() - from_spectrum).abs() < 1e-10 * from_spectrum.max(1.0),
            "row {row}: {} vs {from_spectrum}",
            k.hs_norm()
        );
    }
}

#[test]
fn kernel_rank_is_bounded_by_dimension() {
    let d = 3;
    let grid = SpatialGrid::square(1.0, 6).unwrap(); // 36 points >> d
    let e = random_grid_expansion(d, 2, &grid, 23);
    let field = gaussian_adaptation(&e).unwrap();
    let k = eta_kernel(&field, 0).unwrap();
    let eig = k.eigendecompose();
    let lmax = eig.eigenvalues[0];
    let positive = eig.eigenvalues.iter().filter(|&&l| l > 1e-10 * lmax).count();
    assert!(positive <= d, "rank {positive} exceeds d = {d}");
    // eigenfunctions orthonormal under the area weights
    let w = grid.cell_area();
    for i in 0..positive {
        for j in i..positive {
            let dot: f64 = (0..grid.n_points())
                .map(|x| eig.eigenfunctions[(x, i)] * eig.eigenfunctions[(x, j)] * w)
                .sum();
            let expected = if i == j { 1.0 } else { 0.0 };
            assert!((dot - expected).abs() < 1e-8, "({i},{j}): {dot}");
        }
    }
}

#[test]
fn rotation_preserves_per_order_variance() {
    // Parseval within each polynomial order block
    let set = IndexSet::new(3, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(24);
    let coeffs = DMatrix::from_fn(2, set.len(), |_, _| StandardNormal.sample(&mut rng));
    let e = ChaosExpansion::new(set.clone(), coeffs, None).unwrap();
    let a = Isometry::random(3, &mut rng);
    let all: Vec<usize> = (0..set.len()).collect();
    let rotated = rotate_coefficients(&e, &a, &all).unwrap();
    for pt in 0..2 {
        for order in 0..=3u32 {
            let block = set.order_block(order);
            let before: f64 = block.clone().map(|i| e.coeffs()[(pt, i)].powi(2)).sum();
            let after: f64 = block.map(|i| rotated.coeffs()[(pt, i)].powi(2)).sum();
            assert!(
                (before - after).abs() < 1e-10 * before.max(1.0),
                "order {order}: {before} vs {after}"
            );
        }
    }
}

#[test]
fn nested_retained_sets_give_monotone_global_error() {
    let grid = SpatialGrid::square(1.0, 3).unwrap();
    let e = random_grid_expansion(4, 3, &grid, 25);
    let field = quadratic_adaptation(&e, 4).unwrap();
    let set = e.index_set();
    let mut prev = f64::INFINITY;
    for n_vars in 1..=4usize {
        let retained = set.subset_full(n_vars, 3);
        let err = global_error_norm(&e, &field, &retained).unwrap();
        assert!(err <= prev + 1e-12, "n = {n_vars}: {err} > {prev}");
        prev = err;
    }
    let full: Vec<usize> = (0..set.len()).collect();
    assert!(global_error_norm(&e, &field, &full).unwrap() < 1e-9);
}

#[test]
fn isometry_field_rejects_mismatched_grid() {
    let grid = SpatialGrid::square(1.0, 3).unwrap();
    let mats = vec![Isometry::identity(2); 4]; // 9 cells expected
    assert!(IsometryField::new(Some(grid), 1, mats, AdaptationScheme::Custom).is_err());
}
