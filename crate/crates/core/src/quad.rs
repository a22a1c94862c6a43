//! Thin adapter over tanh-sinh quadrature for 1D and nested 2D integrals.

/// Absolute error target used for each call.
const ABS_TOL: f64 = 1e-11;

pub(crate) fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    quadrature::integrate(f, a, b, ABS_TOL).integral
}

/// `∫_a^b ∫_a^b f(x, y) dy dx` on a square.
pub(crate) fn integrate_square<F: Fn(f64, f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    integrate(|x| integrate(|y| f(x, y), a, b), a, b)
}
