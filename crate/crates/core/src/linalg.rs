//! Small dense linear-algebra utilities shared by the flows and solvers.

use nalgebra::{DMatrix, DVector};

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.iter().map(|x| x.abs()).fold(0.0, f64::max) * n as f64;
    let mut squarings = 0u32;
    let mut scale = 1.0;
    while norm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let scaled = a * scale;
    let mut result = DMatrix::<f64>::identity(n, n);
    let mut term = DMatrix::<f64>::identity(n, n);
    for k in 1..=24 {
        term = &term * &scaled / k as f64;
        result += &term;
        if term.iter().all(|x| x.abs() < 1e-18) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// Fourier differentiation matrix for `n` equispaced nodes on a loop of period 1.
///
/// The matrix is antisymmetric for every `n`.
pub fn spectral_derivative(n: usize) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    let pi = std::f64::consts::PI;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let diff = i as isize - j as isize;
            let sign = if diff.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            let angle = pi * diff as f64 / n as f64;
            d[(i, j)] = if n % 2 == 0 {
                pi * sign / angle.tan()
            } else {
                pi * sign / angle.sin()
            };
        }
    }
    d
}

/// `sin(x)/x`, exact at zero.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// `(x - sin x)/x^2`, evaluated without cancellation near zero.
pub fn x_minus_sin_over_x2(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let x2 = x * x;
        x * (1.0 / 6.0 - x2 / 120.0 + x2 * x2 / 5040.0 - x2 * x2 * x2 / 362_880.0)
    } else {
        (x - x.sin()) / (x * x)
    }
}

pub fn max_abs_diff(a: &DVector<f64>, b: &DVector<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn expm_of_rotation_generator() {
        let j = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let e = expm(&(j * 0.7));
        assert!((e[(0, 0)] - 0.7f64.cos()).abs() < 1e-14);
        assert!((e[(0, 1)] - 0.7f64.sin()).abs() < 1e-14);
        assert!((e[(1, 0)] + 0.7f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn spectral_derivative_is_exact_on_low_modes() {
        for n in [16usize, 17] {
            let d = spectral_derivative(n);
            let tau = 2.0 * std::f64::consts::PI;
            let f = DVector::from_fn(n, |i, _| (3.0 * tau * i as f64 / n as f64).sin());
            let df = &d * f;
            for i in 0..n {
                let t = i as f64 / n as f64;
                assert!((df[i] - 3.0 * tau * (3.0 * tau * t).cos()).abs() < 1e-11);
            }
            assert!((&d + d.transpose()).amax() < 1e-12);
        }
    }

    #[test]
    fn series_helpers_match_direct_formulas() {
        for x in [1e-3, 0.05, 0.099, 0.2, 1.3] {
            assert!((sinc(x) - x.sin() / x).abs() < 1e-15);
            let direct = (x - x.sin()) / (x * x);
            assert!((x_minus_sin_over_x2(x) - direct).abs() < 1e-12 * (1.0 + direct.abs()) / x.min(1.0));
        }
    }
}
