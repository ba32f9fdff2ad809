//! Closed-form rotation helpers: the Rodrigues exponential for so(3), a
//! near-identity matrix logarithm, and a Newton-Schulz re-orthonormalization
//! step for drift cleanup on long chains.

use super::CMat;
use nalgebra::{Complex, DMatrix};

/// Rodrigues closed form for the exponential of a real skew 3x3 matrix.
///
/// With `theta` the rotation angle encoded by the skew matrix `x`,
/// `exp(x) = I + sin(theta)/theta x + (1 - cos(theta))/theta^2 x^2`.
/// Series expansions take over below `theta ~ 1e-4` to avoid cancellation.
pub fn rodrigues_so3(x: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(x.nrows(), 3);
    debug_assert_eq!(x.ncols(), 3);
    let wx = x[(2, 1)];
    let wy = x[(0, 2)];
    let wz = x[(1, 0)];
    let theta2 = wx * wx + wy * wy + wz * wz;
    let theta = theta2.sqrt();
    let (a, b) = if theta < 1e-4 {
        (
            1.0 - theta2 / 6.0 + theta2 * theta2 / 120.0,
            0.5 - theta2 / 24.0 + theta2 * theta2 / 720.0,
        )
    } else {
        (theta.sin() / theta, (1.0 - theta.cos()) / theta2)
    };
    let x2 = x * x;
    DMatrix::<f64>::identity(3, 3) + x * a + x2 * b
}

/// Matrix logarithm for `m` close to the identity, via the Mercator series
/// on `E = m - I`. Converges fast whenever `||E|| < 1`; callers use it for
/// chart coordinates of finite-difference displacements.
pub fn log_near_identity(m: &CMat) -> CMat {
    let n = m.nrows();
    let e = m - CMat::identity(n, n);
    // log(I + E) = E - E^2/2 + E^3/3 - ...
    let mut term = e.clone();
    let mut acc = e.clone();
    for k in 2..=24 {
        term *= &e;
        let coeff = if k % 2 == 0 { -1.0 / k as f64 } else { 1.0 / k as f64 };
        acc.zip_apply(&term, |a, t| *a += t * Complex::new(coeff, 0.0));
        if term.norm() < 1e-18 {
            break;
        }
    }
    acc
}

/// One Newton-Schulz step `g (3I - g^dagger g) / 2`, which contracts toward
/// the nearest unitary quadratically when `g` is already close to unitary.
pub fn newton_schulz_orthonormalize(g: &CMat) -> CMat {
    let n = g.nrows();
    let gtg = g.adjoint() * g;
    let correction = CMat::identity(n, n) * Complex::new(3.0, 0.0) - gtg;
    g * correction * Complex::new(0.5, 0.0)
}
