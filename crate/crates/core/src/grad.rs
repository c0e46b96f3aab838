//! Central finite differences, used as an independent check on the
//! hand-derived backward passes.

use alloc::vec::Vec;

/// `(f(x + h e_i) - f(x - h e_i)) / 2h` for every coordinate `i`.
pub fn finite_diff_gradient<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    assert!(h > 0.0, "finite difference step must be positive");
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        grad.push((plus - minus) / (2.0 * h));
    }
    grad
}

/// `|a - b| / max(|a|, |b|, floor)`. The floor keeps near-zero gradients from
/// turning rounding noise into large relative errors.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Largest [`relative_error`] across two gradient vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| relative_error(*a, *n, floor))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function() {
        let c = [1.5, -2.0, 0.25, 7.0];
        let g = finite_diff_gradient(|x| x.iter().zip(&c).map(|(a, b)| a * b).sum(), &[0.3, 1.0, -4.0, 2.0], 1e-3);
        for (gi, ci) in g.iter().zip(&c) {
            assert!((gi - ci).abs() < 1e-9);
        }
    }

    #[test]
    fn squared_norm() {
        let x = [0.5, -1.25, 3.0];
        let g = finite_diff_gradient(|x| x.iter().map(|a| a * a).sum(), &x, 1e-6);
        for (gi, xi) in g.iter().zip(&x) {
            assert!((gi - 2.0 * xi).abs() < 1e-6);
        }
    }

    #[test]
    fn relative_error_floor() {
        assert!((relative_error(1e-12, 0.0, 1e-4) - 1e-8).abs() < 1e-20);
        assert_eq!(relative_error(2.0, 1.0, 1e-4), 0.5);
    }
}
