//! Finite-difference gradient checking utilities.
//!
//! These are the independent oracle for every analytic gradient in the
//! engine: central differences with step `h` on a scalar-valued function of
//! a flat parameter vector.

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn finite_diff_grad<F>(mut f: F, x: &[f64], h: f64) -> Vec<f64>
where
    F: FnMut(&[f64]) -> f64,
{
    let mut xs = x.to_vec();
    let mut grad = vec![0.0; x.len()];
    for i in 0..x.len() {
        let orig = xs[i];
        xs[i] = orig + h;
        let hi = f(&xs);
        xs[i] = orig - h;
        let lo = f(&xs);
        xs[i] = orig;
        grad[i] = (hi - lo) / (2.0 * h);
    }
    grad
}

/// Worst elementwise error between two gradients, relative for magnitudes
/// above one and absolute below.
pub fn max_rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1.0))
        .fold(0.0, f64::max)
}

/// Step used by the gradient checks.
pub const FD_STEP: f64 = 1e-5;
/// Acceptance tolerance for analytic-vs-numeric gradient agreement.
pub const FD_TOL: f64 = 1e-4;
