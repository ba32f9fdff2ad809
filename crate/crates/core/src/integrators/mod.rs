//! Time-stepping schemes, one per structural piece of the diffusions: generic
//! Ito and Stratonovich chart steps, the exact Ornstein-Uhlenbeck fiber step,
//! leapfrog on matrix Lie groups, and geodesic splitting on embedded spheres.
//!
//! Noise draws are always passed in, never generated here, so every step is a
//! pure function: identical inputs give bit-identical outputs.

mod potentials;

pub use potentials::{LiePotential, SpherePotential};

use crate::error::{Error, Result};
use crate::fd::kahan_sum;
use crate::geometry::{CMat, EmbeddedSphere, Geometry, MatrixLieGroup};
use crate::recipe::{Convention, DiffusionSpec};
use std::collections::BTreeMap;

/// Outcome of one chart step: the new state, the standard-normal draws that
/// produced it, and named diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub state: Vec<f64>,
    pub noise_draws: Vec<f64>,
    pub diagnostics: BTreeMap<String, f64>,
}

fn check_draws(spec: &DiffusionSpec, z: &[f64]) -> Result<()> {
    let expected = spec.noise().num_fields();
    if z.len() != expected {
        return Err(Error::InvalidInput(format!(
            "expected {expected} noise draws, got {}",
            z.len()
        )));
    }
    Ok(())
}

fn wrap_state(geometry: &Geometry, x: Vec<f64>) -> Vec<f64> {
    match geometry {
        Geometry::Torus(t) => t.wrap(&x),
        _ => x,
    }
}

/// Euler-Maruyama step for an Ito spec:
/// `x' = x + X(x) dt + sqrt(dt) sum_k z_k Y_k(x)`.
pub fn euler_maruyama_step(
    spec: &DiffusionSpec,
    x: &[f64],
    dt: f64,
    z: &[f64],
) -> Result<StepResult> {
    if spec.convention() != Convention::Ito {
        return Err(Error::ConventionMismatch {
            expected: "ito",
            found: spec.convention().name(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    check_draws(spec, z)?;
    let drift = spec.drift(x);
    let sqrt_dt = dt.sqrt();
    let mut next: Vec<f64> = x.iter().zip(&drift).map(|(xi, di)| xi + di * dt).collect();
    for (k, &zk) in z.iter().enumerate() {
        let y = spec.noise().field(k, x);
        for (n, yi) in next.iter_mut().zip(&y) {
            *n += sqrt_dt * zk * yi;
        }
    }
    Ok(StepResult {
        state: wrap_state(spec.geometry(), next),
        noise_draws: z.to_vec(),
        diagnostics: BTreeMap::new(),
    })
}

/// Heun predictor-corrector step for a Stratonovich spec: the predictor is an
/// Euler step, the corrector averages drift and noise coefficients between
/// the base and predicted points. Weak order one, consistent with the
/// Stratonovich generator.
pub fn stratonovich_heun_step(
    spec: &DiffusionSpec,
    x: &[f64],
    dt: f64,
    z: &[f64],
) -> Result<StepResult> {
    if spec.convention() != Convention::Stratonovich {
        return Err(Error::ConventionMismatch {
            expected: "stratonovich",
            found: spec.convention().name(),
        });
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidInput("dt must be positive".into()));
    }
    check_draws(spec, z)?;
    let n = x.len();
    let noise = spec.noise();
    let dw: Vec<f64> = z.iter().map(|zk| zk * dt.sqrt()).collect();

    let drift0 = spec.drift(x);
    let mut predictor: Vec<f64> = x.iter().zip(&drift0).map(|(xi, di)| xi + di * dt).collect();
    for (k, &dwk) in dw.iter().enumerate() {
        let y = noise.field(k, x);
        for i in 0..n {
            predictor[i] += dwk * y[i];
        }
    }

    let drift1 = spec.drift(&predictor);
    let mut next: Vec<f64> =
        (0..n).map(|i| x[i] + 0.5 * (drift0[i] + drift1[i]) * dt).collect();
    for (k, &dwk) in dw.iter().enumerate() {
        let y0 = noise.field(k, x);
        let y1 = noise.field(k, &predictor);
        for i in 0..n {
            next[i] += 0.5 * (y0[i] + y1[i]) * dwk;
        }
    }
    Ok(StepResult {
        state: wrap_state(spec.geometry(), next),
        noise_draws: z.to_vec(),
        diagnostics: BTreeMap::new(),
    })
}

/// Exact transition of the fiber Ornstein-Uhlenbeck process
/// `dv = -v/2 dt + dW` over time `h`:
/// `v' = e^{-h/2} v + sqrt(1 - e^{-h}) z`, the kernel
/// `N(e^{-h/2} v0, (1 - e^{-h}) Id)`.
pub fn ou_exact_step(v: &[f64], h: f64, z: &[f64]) -> Result<Vec<f64>> {
    if !(h > 0.0) {
        return Err(Error::InvalidInput("OU time h must be positive".into()));
    }
    if z.len() != v.len() {
        return Err(Error::InvalidInput("OU draw dimension mismatch".into()));
    }
    let mean_factor = (-0.5 * h).exp();
    let std = (-(-h).exp_m1()).sqrt();
    Ok(v.iter().zip(z).map(|(vi, zi)| mean_factor * vi + std * zi).collect())
}

/// Leapfrog trajectory on a matrix Lie group with bi-invariant kinetic form:
/// half kick, group update `g exp(eps v)`, half kick, iterated `n_steps`
/// times. Returns the endpoint together with the energy error
/// `H(end) - H(start)` for `H = V(g) + |v|^2 / 2`.
///
/// Groups with a non-identity metric matrix are rejected: the geodesic
/// correction term for left-invariant metrics is out of scope, and it
/// vanishes exactly in the bi-invariant case this implements.
pub fn lie_leapfrog_trajectory(
    group: &MatrixLieGroup,
    potential: &LiePotential,
    g0: &CMat,
    v0: &[f64],
    eps: f64,
    n_steps: usize,
) -> Result<(CMat, Vec<f64>, f64)> {
    if !group.has_identity_metric() {
        return Err(Error::Unsupported(
            "leapfrog requires the bi-invariant (identity) kinetic form".into(),
        ));
    }
    if v0.len() != group.algebra_dim() {
        return Err(Error::InvalidInput("velocity has wrong algebra dimension".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }
    let h_start = lie_energy(group, potential, g0, v0);
    let mut g = g0.clone();
    let mut v = v0.to_vec();
    for _ in 0..n_steps {
        half_kick(group, potential, &g, &mut v, eps)?;
        let scaled: Vec<f64> = v.iter().map(|vi| vi * eps).collect();
        let step = group.lie_exp(&scaled)?;
        g *= step;
        half_kick(group, potential, &g, &mut v, eps)?;
    }
    let h_end = lie_energy(group, potential, &g, &v);
    Ok((g, v, h_end - h_start))
}

fn half_kick(
    group: &MatrixLieGroup,
    potential: &LiePotential,
    g: &CMat,
    v: &mut [f64],
    eps: f64,
) -> Result<()> {
    if potential.is_zero() {
        return Ok(());
    }
    let force = group.algebra_force(g, &potential.gradient(g))?;
    for (vi, fi) in v.iter_mut().zip(&force) {
        *vi -= 0.5 * eps * fi;
    }
    Ok(())
}

/// `H(g, v) = V(g) + |v|^2 / 2` with compensated kinetic summation.
pub fn lie_energy(group: &MatrixLieGroup, potential: &LiePotential, g: &CMat, v: &[f64]) -> f64 {
    let _ = group;
    potential.value(g) + 0.5 * kahan_sum(v.iter().map(|vi| vi * vi))
}

/// One step of the geodesic splitting integrator on the sphere: half kick by
/// the projected ambient gradient, geodesic flow for `eps`, half kick.
pub fn geodesic_splitting_step(
    sphere: &EmbeddedSphere,
    potential: &SpherePotential,
    q: &[f64],
    v: &[f64],
    eps: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(eps > 0.0) {
        return Err(Error::InvalidInput("step size must be positive".into()));
    }
    let mut v1 = kick(sphere, potential, q, v, 0.5 * eps)?;
    // the kick projects, but the incoming v may carry its own normal
    // component within tolerance; remove it before flowing
    let qv = crate::geometry::dot(q, &v1);
    for (vi, qi) in v1.iter_mut().zip(q) {
        *vi -= qv * qi;
    }
    let (q2, v2) = sphere.geodesic(q, &v1, eps)?;
    let v3 = kick(sphere, potential, &q2, &v2, 0.5 * eps)?;
    Ok((q2, v3))
}

fn kick(
    sphere: &EmbeddedSphere,
    potential: &SpherePotential,
    q: &[f64],
    v: &[f64],
    t: f64,
) -> Result<Vec<f64>> {
    if potential.is_zero() {
        return Ok(v.to_vec());
    }
    let grad = potential.gradient(q);
    let hor = sphere.project_horizontal(q, &grad)?;
    Ok(v.iter().zip(&hor).map(|(vi, gi)| vi - t * gi).collect())
}

/// `H(q, v) = W(q) + |v|^2 / 2`.
pub fn sphere_energy(potential: &SpherePotential, q: &[f64], v: &[f64]) -> f64 {
    potential.value(q) + 0.5 * kahan_sum(v.iter().map(|vi| vi * vi))
}

#[cfg(test)]
mod tests;
