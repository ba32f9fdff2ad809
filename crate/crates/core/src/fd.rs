//! Central finite differences used as the fallback when analytic derivatives
//! are not supplied. Step size is `max(1e-5, 1e-5 * |x_i|)` per coordinate so
//! relative accuracy is uniform across scales.

/// Base step for central differences.
pub const FD_STEP: f64 = 1e-5;

/// Per-coordinate step: `max(1e-5, 1e-5 * |x|)`.
pub fn step_for(x: f64) -> f64 {
    FD_STEP.max(FD_STEP * x.abs())
}

/// Central-difference gradient of a scalar field.
pub fn gradient(f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut xp = x.to_vec();
    let mut g = vec![0.0; x.len()];
    for i in 0..x.len() {
        let h = step_for(x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp);
        xp[i] = x[i] - h;
        let fm = f(&xp);
        xp[i] = x[i];
        g[i] = (fp - fm) / (2.0 * h);
    }
    g
}

/// Central-difference directional derivative of a scalar field along `u`.
pub fn directional(f: &dyn Fn(&[f64]) -> f64, x: &[f64], u: &[f64]) -> f64 {
    directional_with_step(f, x, u, FD_STEP)
}

/// Directional derivative with an explicit step. Nested differentiation
/// passes a coarser step here so the inner evaluation noise is not amplified.
pub fn directional_with_step(f: &dyn Fn(&[f64]) -> f64, x: &[f64], u: &[f64], h: f64) -> f64 {
    let scale = u.iter().map(|c| c * c).sum::<f64>().sqrt();
    if scale == 0.0 {
        return 0.0;
    }
    let xp: Vec<f64> = x.iter().zip(u).map(|(a, b)| a + h * b).collect();
    let xm: Vec<f64> = x.iter().zip(u).map(|(a, b)| a - h * b).collect();
    (f(&xp) - f(&xm)) / (2.0 * h)
}

/// Central-difference Jacobian of a vector field; `jac[i][j] = d f_i / d x_j`.
pub fn jacobian(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let m = f(x).len();
    let mut jac = vec![vec![0.0; n]; m];
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = step_for(x[j]);
        xp[j] = x[j] + h;
        let fp = f(&xp);
        xp[j] = x[j] - h;
        let fm = f(&xp);
        xp[j] = x[j];
        for i in 0..m {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

/// Central-difference divergence of a vector field, `sum_i d f_i / d x_i`.
pub fn divergence(f: &dyn Fn(&[f64]) -> Vec<f64>, x: &[f64]) -> f64 {
    let mut div = 0.0;
    let mut xp = x.to_vec();
    for i in 0..x.len() {
        let h = step_for(x[i]);
        xp[i] = x[i] + h;
        let fp = f(&xp)[i];
        xp[i] = x[i] - h;
        let fm = f(&xp)[i];
        xp[i] = x[i];
        div += (fp - fm) / (2.0 * h);
    }
    div
}

/// Divergence of a matrix field with the row convention
/// `(div M)_i = sum_j d M_ij / d x_j`.
pub fn matrix_divergence(m: &dyn Fn(&[f64]) -> nalgebra::DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut out = vec![0.0; n];
    let mut xp = x.to_vec();
    for j in 0..n {
        let h = step_for(x[j]);
        xp[j] = x[j] + h;
        let mp = m(&xp);
        xp[j] = x[j] - h;
        let mm = m(&xp);
        xp[j] = x[j];
        for i in 0..n {
            out[i] += (mp[(i, j)] - mm[(i, j)]) / (2.0 * h);
        }
    }
    out
}

/// Neumaier-compensated sum.
pub fn kahan_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            c += (sum - t) + v;
        } else {
            c += (v - t) + sum;
        }
        sum = t;
    }
    sum + c
}
