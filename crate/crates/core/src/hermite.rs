//! Probabilists' Hermite polynomials (weight `exp(-x^2/2)`, `E[h_n^2] = n!`).

/// Evaluates `h_n(x)` by the three-term recurrence
/// `h_{n+1}(x) = x h_n(x) - n h_{n-1}(x)`.
pub fn hermite(n: u32, x: f64) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        _ => {
            let mut prev = 1.0;
            let mut cur = x;
            for k in 1..n {
                let next = x * cur - k as f64 * prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn constant_is_one() {
        assert_eq!(hermite(0, 7.3), 1.0);
    }

    #[test]
    fn low_orders_closed_form() {
        // h_2(x) = x^2 - 1, h_3(x) = x^3 - 3x
        assert_eq!(hermite(2, 1.0), 0.0);
        assert_abs_diff_eq!(hermite(3, 2.0), 2.0, epsilon = 1e-14);
        for &x in &[-2.5, -0.3, 0.0, 0.7, 4.1] {
            assert_abs_diff_eq!(hermite(2, x), x * x - 1.0, epsilon = 1e-12);
            assert_abs_diff_eq!(hermite(3, x), x.powi(3) - 3.0 * x, epsilon = 1e-12);
            assert_abs_diff_eq!(
                hermite(4, x),
                x.powi(4) - 6.0 * x * x + 3.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn parity() {
        for n in 0..=12u32 {
            let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
            let mut x = -5.0;
            while x <= 5.0 {
                let lhs = hermite(n, -x);
                let rhs = sign * hermite(n, x);
                let scale = lhs.abs().max(1.0);
                assert!((lhs - rhs).abs() <= 1e-12 * scale, "n={n} x={x}");
                x += 0.25;
            }
        }
    }
}
