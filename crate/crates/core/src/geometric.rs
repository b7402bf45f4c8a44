//! Analytic benchmark: a quadratic functional of a Gaussian series with
//! geometrically decaying first-order coefficients, its exact 1-D
//! adaptation, and the truncation-before vs. truncation-after variants.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::{density_distance, kde, standard_normal_cdf, KdeSettings};

/// `u(x, xi) = S + S^2` with `S = sum_n b_n(x) xi_n`, `b_n(x) = x^{(n-1)/2}`.
/// `x` is restricted to `[0, 1)`: half-integer powers of negative `x` leave
/// the real line.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricModel {
    pub x: f64,
    pub d: usize,
}

impl GeometricModel {
    pub fn new(x: f64, d: usize) -> Result<Self> {
        check_x(x)?;
        if d == 0 {
            return Err(Error::InvalidArgument("truncation length d must be >= 1".into()));
        }
        Ok(Self { x, d })
    }

    /// `b_n(x)`, 1-based as in the series definition.
    pub fn b(&self, n: usize) -> f64 {
        self.x.powf((n as f64 - 1.0) / 2.0)
    }

    /// `sum_{n<=d} b_n^2 = (1 - x^d)/(1 - x)`.
    pub fn truncated_variance(&self) -> f64 {
        if self.x == 0.0 {
            1.0
        } else {
            (1.0 - self.x.powi(self.d as i32)) / (1.0 - self.x)
        }
    }

    /// `sum_n b_n^2 = 1/(1 - x)`.
    pub fn full_variance(&self) -> f64 {
        1.0 / (1.0 - self.x)
    }
}

fn check_x(x: f64) -> Result<f64> {
    if x < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "x = {x} rejected: coefficients x^((n-1)/2) are complex for negative x"
        )));
    }
    if x >= 1.0 {
        return Err(Error::InvalidArgument(format!("x = {x} out of range [0, 1)")));
    }
    Ok(x)
}

/// Mean of the untruncated model, carried as the constant term so sampled
/// pdfs sit at the right location: `E[S^2] = 1/(1-x)`.
pub fn exact_mean(x: f64) -> Result<f64> {
    check_x(x)?;
    Ok(1.0 / (1.0 - x))
}

/// Closed-form adapted coefficients of the untruncated model:
/// `u1 = 1/sqrt(1-x)`, `u2 = 1/(1+x) + sqrt(2) x/(1-x^2)`.
pub fn exact_adapted_coeffs(x: f64) -> Result<(f64, f64)> {
    check_x(x)?;
    let u1 = 1.0 / (1.0 - x).sqrt();
    let u2 = 1.0 / (1.0 + x) + 2.0_f64.sqrt() * x / (1.0 - x * x);
    Ok((u1, u2))
}

/// Closed-form adapted coefficients after truncating the series at `d`
/// terms (the truncate-then-adapt variant).
pub fn truncated_adapted_coeffs(x: f64, d: usize) -> Result<(f64, f64)> {
    check_x(x)?;
    if d == 0 {
        return Err(Error::InvalidArgument("truncation length d must be >= 1".into()));
    }
    if x == 0.0 {
        return Ok((1.0, 1.0));
    }
    let xd = x.powi(d as i32);
    let x2d = xd * xd;
    let u1 = ((1.0 - xd) / (1.0 - x)).sqrt();
    let u2 = (1.0 - x2d) / ((1.0 - xd) * (1.0 + x))
        + 2.0_f64.sqrt() / (1.0 - xd)
            * (x * (1.0 - x2d) / (1.0 - x * x) - xd * (1.0 - xd) / (1.0 - x));
    Ok((u1, u2))
}

/// Mean of the truncated model: `E[(sum_{n<=d} b_n xi_n)^2] = (1-x^d)/(1-x)`.
pub fn truncated_mean(x: f64, d: usize) -> Result<f64> {
    Ok(GeometricModel::new(x, d)?.truncated_variance())
}

/// Evaluates `u0 + u1 eta + u2 (eta^2 - 1)/sqrt(2)`.
pub fn adapted_eval(u0: f64, u1: f64, u2: f64, eta: f64) -> f64 {
    u0 + u1 * eta + u2 * (eta * eta - 1.0) / 2.0_f64.sqrt()
}

/// Monte-Carlo draws of the three variants and their adapted inputs.
#[derive(Debug, Clone)]
pub struct VariantSamples {
    /// Untruncated adapted model at `eta ~ N(0,1)`.
    pub exact: Vec<f64>,
    /// Truncate-then-adapt: coefficients `u-hat` at `eta_d ~ N(0,1)`.
    pub before: Vec<f64>,
    /// Adapt-then-truncate: exact coefficients at `eta-hat ~ N(0, 1-x^d)`.
    pub after: Vec<f64>,
    pub eta: Vec<f64>,
    pub eta_d: Vec<f64>,
    pub eta_hat: Vec<f64>,
}

pub fn sample_variants(x: f64, d: usize, n: usize, seed: u64) -> Result<VariantSamples> {
    let model = GeometricModel::new(x, d)?;
    let (u1, u2) = exact_adapted_coeffs(x)?;
    let u0 = exact_mean(x)?;
    let (h1, h2) = truncated_adapted_coeffs(x, d)?;
    let h0 = truncated_mean(x, d)?;
    let sigma_d = model.truncated_variance().sqrt();
    let sigma_full = model.full_variance().sqrt();
    let b: Vec<f64> = (1..=d).map(|k| model.b(k)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = VariantSamples {
        exact: Vec::with_capacity(n),
        before: Vec::with_capacity(n),
        after: Vec::with_capacity(n),
        eta: Vec::with_capacity(n),
        eta_d: Vec::with_capacity(n),
        eta_hat: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let eta: f64 = StandardNormal.sample(&mut rng);
        let mut s = 0.0;
        for bk in &b {
            let xi: f64 = StandardNormal.sample(&mut rng);
            s += bk * xi;
        }
        let eta_d = s / sigma_d;
        let eta_hat = s / sigma_full;
        out.exact.push(adapted_eval(u0, u1, u2, eta));
        out.before.push(adapted_eval(h0, h1, h2, eta_d));
        out.after.push(adapted_eval(u0, u1, u2, eta_hat));
        out.eta.push(eta);
        out.eta_d.push(eta_d);
        out.eta_hat.push(eta_hat);
    }
    Ok(out)
}

/// Pdf of `u0 + u1 eta + u2 (eta^2 - 1)/sqrt(2)` with `eta ~ N(0, var)`,
/// in closed form through the roots of the quadratic.
pub fn adapted_density(u0: f64, u1: f64, u2: f64, var: f64, u: f64) -> f64 {
    let sigma = var.sqrt();
    let a = u2 / 2.0_f64.sqrt();
    if a.abs() < 1e-14 {
        let s = u1.abs() * sigma;
        let z = (u - u0) / s;
        return (-0.5 * z * z).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
    }
    let disc = u1 * u1 - 4.0 * a * (u0 - a - u);
    if disc <= 0.0 {
        return 0.0;
    }
    let root = disc.sqrt();
    let mut total = 0.0;
    for eta in [(-u1 - root) / (2.0 * a), (-u1 + root) / (2.0 * a)] {
        let z = eta / sigma;
        let phi = (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt());
        total += phi / (2.0 * a * eta + u1).abs();
    }
    total
}

/// Distribution function of the same law, via the normal CDF at the roots.
pub fn adapted_cdf(u0: f64, u1: f64, u2: f64, var: f64, u: f64) -> f64 {
    let sigma = var.sqrt();
    let a = u2 / 2.0_f64.sqrt();
    if a.abs() < 1e-14 {
        return standard_normal_cdf((u - u0) / (u1.abs() * sigma));
    }
    let disc = u1 * u1 - 4.0 * a * (u0 - a - u);
    if disc <= 0.0 {
        return if a > 0.0 { 0.0 } else { 1.0 };
    }
    let root = disc.sqrt();
    let lo = (-u1 - root) / (2.0 * a);
    let hi = (-u1 + root) / (2.0 * a);
    let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let inside = standard_normal_cdf(hi / sigma) - standard_normal_cdf(lo / sigma);
    if a > 0.0 {
        inside
    } else {
        1.0 - inside
    }
}

/// Exact L1 distances of the two truncated variants' laws to the exact
/// adapted law, computed from closed-form densities and CDFs: the densities
/// cross at finitely many points, so the integral of |p - q| telescopes to
/// CDF differences between crossings. Returns (before, after).
pub fn closed_form_l1(x: f64, d: usize) -> Result<(f64, f64)> {
    let (u1, u2) = exact_adapted_coeffs(x)?;
    let u0 = exact_mean(x)?;
    let (h1, h2) = truncated_adapted_coeffs(x, d)?;
    let h0 = truncated_mean(x, d)?;
    let var_hat = 1.0 - x.powi(d as i32);
    let exact = (u0, u1, u2, 1.0);
    let before = (h0, h1, h2, 1.0);
    let after = (u0, u1, u2, var_hat);
    Ok((l1_between(before, exact), l1_between(after, exact)))
}

fn l1_between(p: (f64, f64, f64, f64), q: (f64, f64, f64, f64)) -> f64 {
    let support = |(u0, u1, u2, var): (f64, f64, f64, f64)| {
        let a = u2 / 2.0_f64.sqrt();
        let sigma = var.sqrt();
        if a.abs() < 1e-14 {
            (u0 - 9.0 * u1.abs() * sigma, u0 + 9.0 * u1.abs() * sigma)
        } else {
            let vertex = u0 - a - u1 * u1 / (4.0 * a);
            let far = u0 - a + u1.abs() * 9.0 * sigma + a.abs() * 81.0 * var;
            (vertex.min(far), vertex.max(far))
        }
    };
    let (plo, phi_) = support(p);
    let (qlo, qhi) = support(q);
    let (lo, hi) = (plo.min(qlo), phi_.max(qhi));
    let diff = |u: f64| {
        adapted_density(p.0, p.1, p.2, p.3, u) - adapted_density(q.0, q.1, q.2, q.3, u)
    };
    // breakpoints: each support edge plus refined sign changes of p - q
    let mut breaks = vec![lo, hi, plo, qlo];
    let n = 100_000;
    let step = (hi - lo) / n as f64;
    let mut prev_u = lo + 0.5 * step;
    let mut prev = diff(prev_u);
    for k in 1..n {
        let u = lo + (k as f64 + 0.5) * step;
        let cur = diff(u);
        if prev != 0.0 && cur != 0.0 && prev.signum() != cur.signum() {
            let (mut a, mut b, mut fa) = (prev_u, u, prev);
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = diff(m);
                if fm == 0.0 {
                    a = m;
                    break;
                }
                if fa.signum() == fm.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            breaks.push(0.5 * (a + b));
        }
        prev_u = u;
        prev = cur;
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).expect("finite"));
    breaks.dedup();
    let gap = |u: f64| {
        adapted_cdf(p.0, p.1, p.2, p.3, u) - adapted_cdf(q.0, q.1, q.2, q.3, u)
    };
    let mut total = 0.0;
    for w in breaks.windows(2) {
        total += (gap(w[1]) - gap(w[0])).abs();
    }
    total
}

/// L1 and Hellinger distances of each truncated variant's KDE to the exact
/// variant's.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VariantDistances {
    pub before_l1: f64,
    pub before_hellinger: f64,
    pub after_l1: f64,
    pub after_hellinger: f64,
}

pub fn compare_pdfs(x: f64, d: usize, n: usize, seed: u64) -> Result<VariantDistances> {
    let samples = sample_variants(x, d, n, seed)?;
    let settings = KdeSettings::default();
    let exact = kde(&samples.exact, &settings)?;
    let before = kde(&samples.before, &settings)?;
    let after = kde(&samples.after, &settings)?;
    let (before_l1, before_hellinger) = density_distance(&before, &exact)?;
    let (after_l1, after_hellinger) = density_distance(&after, &exact)?;
    Ok(VariantDistances { before_l1, before_hellinger, after_l1, after_hellinger })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    /// Term-by-term summation of the adapted coefficients of the truncated
    /// series, independent of the closed forms.
    fn summed_truncated_coeffs(x: f64, d: usize) -> (f64, f64) {
        let b2: Vec<f64> = (1..=d).map(|n| x.powi(n as i32 - 1)).collect();
        let sigma_sq: f64 = b2.iter().sum();
        let u1 = sigma_sq.sqrt();
        let mut diag = 0.0;
        let mut off = 0.0;
        for k in 0..d {
            diag += b2[k] * b2[k];
            for j in (k + 1)..d {
                off += b2[k] * b2[j];
            }
        }
        (u1, (diag + 2.0_f64.sqrt() * off) / sigma_sq)
    }

    #[test]
    fn coefficients_at_zero() {
        assert_eq!(exact_adapted_coeffs(0.0).unwrap(), (1.0, 1.0));
        assert_eq!(truncated_adapted_coeffs(0.0, 5).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn exact_coefficients_near_one() {
        let (u1, u2) = exact_adapted_coeffs(0.99).unwrap();
        assert_abs_diff_eq!(u1, 10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(u2, 70.86, epsilon = 0.01);
        let (u1, _) = exact_adapted_coeffs(0.9).unwrap();
        assert_abs_diff_eq!(u1, 3.16228, epsilon = 1e-5);
    }

    #[test]
    fn truncated_closed_form_examples() {
        let (h1, _) = truncated_adapted_coeffs(0.9, 10).unwrap();
        assert_abs_diff_eq!(h1, 2.55210, epsilon = 1e-5);
        assert_eq!(truncated_adapted_coeffs(0.3, 1).unwrap().0, 1.0);
    }

    #[test]
    fn closed_form_matches_summation() {
        for &x in &[0.0, 0.1, 0.3, 0.5, 0.9, 0.99] {
            for &d in &[1usize, 2, 5, 10, 50] {
                let (c1, c2) = truncated_adapted_coeffs(x, d).unwrap();
                let (s1, s2) = summed_truncated_coeffs(x, d);
                assert_abs_diff_eq!(c1, s1, epsilon = 1e-12 * s1.max(1.0));
                assert_abs_diff_eq!(c2, s2, epsilon = 1e-12 * s2.max(1.0));
            }
        }
    }

    #[test]
    fn truncation_converges_monotonically() {
        let x = 0.5;
        let (u1, u2) = exact_adapted_coeffs(x).unwrap();
        let mut prev = f64::INFINITY;
        for &d in &[10usize, 20, 40] {
            let (h1, h2) = truncated_adapted_coeffs(x, d).unwrap();
            let gap = (h1 - u1).abs().max((h2 - u2).abs());
            assert!(gap < prev);
            prev = gap;
        }
        let (h1, _) = truncated_adapted_coeffs(0.9, 200).unwrap();
        assert!((h1 - exact_adapted_coeffs(0.9).unwrap().0).abs() < 1e-6);
    }

    #[test]
    fn rejects_out_of_domain() {
        assert!(exact_adapted_coeffs(-0.5).is_err());
        assert!(exact_adapted_coeffs(1.0).is_err());
        assert!(truncated_adapted_coeffs(0.5, 0).is_err());
        assert!(GeometricModel::new(0.5, 0).is_err());
    }

    #[test]
    fn adapted_input_variances() {
        let (x, d, n) = (0.9, 10, 40_000);
        let s = sample_variants(x, d, n, 77).unwrap();
        let var = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            v.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
        };
        let tol = 4.0 / (n as f64).sqrt();
        assert!((var(&s.eta_d) - 1.0).abs() < tol);
        let target = 1.0 - 0.9_f64.powi(10);
        assert_abs_diff_eq!(target, 0.65132, epsilon = 1e-5);
        assert!((var(&s.eta_hat) / target - 1.0).abs() < tol);
        // full-series variance sum at x = 0.5 is 2
        assert_abs_diff_eq!(GeometricModel::new(0.5, 4).unwrap().full_variance(), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_variant_moments_match_coefficients() {
        let (x, n) = (0.3, 60_000);
        let s = sample_variants(x, 10, n, 5).unwrap();
        let (u1, u2) = exact_adapted_coeffs(x).unwrap();
        let m = s.exact.iter().sum::<f64>() / n as f64;
        let var = s.exact.iter().map(|t| (t - m).powi(2)).sum::<f64>() / (n - 1) as f64;
        let tol = 6.0 / (n as f64).sqrt();
        assert!((m - exact_mean(x).unwrap()).abs() < tol * 3.0);
        let truth = u1 * u1 + u2 * u2;
        assert!((var / truth - 1.0).abs() < tol * 10.0, "var={var} truth={truth}");
    }

    #[test]
    fn cdf_is_consistent_with_density() {
        let (u0, u1, u2, var) = (2.0, 1.5, 0.8, 0.9);
        for &u in &[1.0, 2.0, 3.5, 7.0] {
            let h = 1e-5;
            let slope = (adapted_cdf(u0, u1, u2, var, u + h)
                - adapted_cdf(u0, u1, u2, var, u - h))
                / (2.0 * h);
            let p = adapted_density(u0, u1, u2, var, u);
            assert_abs_diff_eq!(slope, p, epsilon = 1e-6 * p.max(1.0));
        }
        // limits
        assert!(adapted_cdf(u0, u1, u2, var, -100.0) < 1e-12);
        assert!((adapted_cdf(u0, u1, u2, var, 1e4) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_l1_vanishes_for_negligible_truncation() {
        let (before, after) = closed_form_l1(0.3, 200).unwrap();
        assert!(before < 1e-10, "before = {before}");
        assert!(after < 1e-10, "after = {after}");
    }

    #[test]
    fn closed_form_l1_tracks_kde_distances() {
        // bandwidth smoothing biases the KDE distances low on spiky
        // densities, so this is a coarse consistency check only
        let (before, after) = closed_form_l1(0.9, 10).unwrap();
        let kde_dist = compare_pdfs(0.9, 10, 40_000, 11).unwrap();
        assert!((before - kde_dist.before_l1).abs() < 0.3);
        assert!((after - kde_dist.after_l1).abs() < 0.3);
        assert!(after < before && kde_dist.after_l1 < kde_dist.before_l1);
    }

    #[test]
    fn heavy_truncation_favors_adapt_first() {
        let (before, after) = closed_form_l1(0.99, 10).unwrap();
        assert!(after < before, "after = {after}, before = {before}");
        assert!(before > 0.5);
    }

    #[test]
    fn small_x_truncations_agree_with_exact() {
        let dist = compare_pdfs(0.3, 10, 20_000, 9).unwrap();
        assert!(dist.before_l1 < 0.1, "before L1 = {}", dist.before_l1);
        assert!(dist.after_l1 < 0.1, "after L1 = {}", dist.after_l1);
    }
}
