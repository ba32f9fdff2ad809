//! Independent reference values used by moment reports and the acceptance
//! checks: quadrature over Euler angles and sphere latitudes, exact Haar
//! sampling through QR factorization, and the two-sample
//! Kolmogorov-Smirnov statistic. Nothing here touches the sampler code
//! paths it is used to validate.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Composite Simpson rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 0 { n } else { n + 1 };
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

fn rot_z(a: f64) -> DMatrix<f64> {
    let (s, c) = a.sin_cos();
    DMatrix::from_row_slice(3, 3, &[c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0])
}

fn rot_y(b: f64) -> DMatrix<f64> {
    let (s, c) = b.sin_cos();
    DMatrix::from_row_slice(3, 3, &[c, 0.0, s, 0.0, 1.0, 0.0, -s, 0.0, c])
}

/// `E[tr(g)]` under the Gibbs weight `exp(-s tr(g))` over Haar on SO(3),
/// by Simpson quadrature in ZYZ Euler angles with the `sin(beta)` Haar
/// density. `n` is the node count per axis.
pub fn so3_trace_mean_euler_quadrature(s: f64, n: usize) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let pi = std::f64::consts::PI;
    let n = if n % 2 == 0 { n } else { n + 1 };
    let (ha, hb, hg) = (two_pi / n as f64, pi / n as f64, two_pi / n as f64);
    let w = |k: usize| -> f64 {
        if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        }
    };
    let mut num = 0.0;
    let mut den = 0.0;
    for ka in 0..=n {
        let alpha = ka as f64 * ha;
        let ra = rot_z(alpha);
        for kb in 0..=n {
            let beta = kb as f64 * hb;
            let rab = &ra * rot_y(beta);
            let haar = beta.sin();
            for kg in 0..=n {
                let gamma = kg as f64 * hg;
                let g = &rab * rot_z(gamma);
                let t = g.trace();
                let weight = w(ka) * w(kb) * w(kg) * haar * (-s * t).exp();
                num += weight * t;
                den += weight;
            }
        }
    }
    num / den
}

/// Same expectation through the conjugation-invariance route: the rotation
/// angle has Haar density `(1 - cos t)/pi` and `tr(g) = 1 + 2 cos(t)`.
pub fn so3_trace_mean_angle_quadrature(s: f64, n: usize) -> f64 {
    let pi = std::f64::consts::PI;
    let num = simpson(
        &|t: f64| {
            let tr = 1.0 + 2.0 * t.cos();
            tr * (1.0 - t.cos()) * (-s * tr).exp()
        },
        0.0,
        pi,
        n,
    );
    let den = simpson(
        &|t: f64| {
            let tr = 1.0 + 2.0 * t.cos();
            (1.0 - t.cos()) * (-s * tr).exp()
        },
        0.0,
        pi,
        n,
    );
    num / den
}

/// `E[q_axis]` on the unit sphere `S^{k-1}` under the Gibbs weight
/// `exp(-kappa q_axis)`, by quadrature over the latitude `t = q_axis` with
/// the marginal density `(1 - t^2)^{(k-3)/2}`.
pub fn sphere_axis_mean_quadrature(kappa: f64, ambient_dim: usize, n: usize) -> f64 {
    let power = (ambient_dim as f64 - 3.0) / 2.0;
    let weight = |t: f64| (1.0 - t * t).max(0.0).powf(power) * (-kappa * t).exp();
    let num = simpson(&|t| t * weight(t), -1.0 + 1e-12, 1.0 - 1e-12, n);
    let den = simpson(&weight, -1.0 + 1e-12, 1.0 - 1e-12, n);
    num / den
}

/// Moments of the uniform law on `S^{k-1}`: each coordinate has mean zero
/// and second moment `1/k`.
pub fn uniform_sphere_second_moment(ambient_dim: usize) -> f64 {
    1.0 / ambient_dim as f64
}

/// Haar samples on SO(3) by QR of a Gaussian matrix with the sign-fixed R
/// diagonal, mapped to `tr(g)`.
pub fn haar_so3_traces(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let a = DMatrix::<f64>::from_fn(3, 3, |_, _| StandardNormal.sample(&mut rng));
        let qr = a.qr();
        let mut q = qr.q();
        let r = qr.r();
        for j in 0..3 {
            if r[(j, j)] < 0.0 {
                for i in 0..3 {
                    q[(i, j)] = -q[(i, j)];
                }
            }
        }
        // QR of a Gaussian with sign fixing is Haar on O(3); fold the
        // det = -1 component back by flipping one column, which pushes the
        // law onto Haar of SO(3)
        if q.determinant() < 0.0 {
            for i in 0..3 {
                q[(i, 0)] = -q[(i, 0)];
            }
        }
        out.push(q.trace());
    }
    out
}

/// Two-sample Kolmogorov-Smirnov statistic.
pub fn ks_statistic(a: &mut [f64], b: &mut [f64]) -> f64 {
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (n, m) = (a.len(), b.len());
    let mut i = 0usize;
    let mut j = 0usize;
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let x = a[i].min(b[j]);
        while i < n && a[i] <= x {
            i += 1;
        }
        while j < m && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    d
}

/// Asymptotic two-sample KS critical value at level `alpha` in
/// {0.10, 0.05, 0.01}: `c(alpha) sqrt((n + m) / (n m))`.
pub fn ks_critical_value(alpha: f64, n: usize, m: usize) -> f64 {
    let c = if alpha <= 0.01 {
        1.628
    } else if alpha <= 0.05 {
        1.358
    } else {
        1.224
    };
    c * ((n + m) as f64 / (n as f64 * m as f64)).sqrt()
}
