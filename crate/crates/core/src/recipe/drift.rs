//! Drift assembly: the Ito recipe on Euclidean charts, the Stratonovich
//! bracket diffusion, the modular vector field, volume-free noise built from
//! bracket potentials, the constant torus obstruction drift, and the
//! generator.

use super::{AntisymmetricBracket, DiffusionSpec, NoiseModel, TargetDensity, VectorField};
use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::Geometry;
use std::sync::Arc;

/// The four constituent terms of the Ito recipe drift. Deleting any one of
/// them breaks stationarity, which the verification harness must detect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecipeTerm {
    /// `-Q grad(H~)`
    BracketGradient,
    /// `div(Q)`
    BracketDivergence,
    /// `-D grad(H~)`
    DiffusionGradient,
    /// `div(D)`
    DiffusionDivergence,
}

pub const RECIPE_TERMS: [RecipeTerm; 4] = [
    RecipeTerm::BracketGradient,
    RecipeTerm::BracketDivergence,
    RecipeTerm::DiffusionGradient,
    RecipeTerm::DiffusionDivergence,
];

fn check_dims(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    x: &[f64],
) -> Result<()> {
    let n = target.dim();
    if bracket.dim() != n || noise.dim() != n || x.len() != n {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: bracket {}, noise {}, target {}, point {}",
            bracket.dim(),
            noise.dim(),
            n,
            x.len()
        )));
    }
    Ok(())
}

/// The four terms of the Ito drift
/// `-(Q + D) grad(H~) + div(Q) + div(D)` at `x`, in [`RECIPE_TERMS`] order.
pub fn euclidean_recipe_terms(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    x: &[f64],
) -> Result<[Vec<f64>; 4]> {
    check_dims(bracket, noise, target, x)?;
    let n = target.dim();
    let grad = target.grad_potential(x);
    let q = bracket.matrix(x);
    let d = noise.diffusion_matrix(x);
    let mut q_grad = vec![0.0; n];
    let mut d_grad = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            q_grad[i] -= q[(i, j)] * grad[j];
            d_grad[i] -= d[(i, j)] * grad[j];
        }
    }
    Ok([q_grad, bracket.divergence(x).to_vec(), d_grad, noise.diffusion_divergence(x)])
}

/// Ito drift of the Euclidean recipe at `x`.
pub fn euclidean_recipe_drift(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    x: &[f64],
) -> Result<Vec<f64>> {
    let terms = euclidean_recipe_terms(bracket, noise, target, x)?;
    let mut out = vec![0.0; x.len()];
    for t in &terms {
        out.iter_mut().zip(t).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}

/// Modular vector field of the bracket with respect to `mu = e^rho dx`:
/// components `d_j A_ij + A_ij d_j(rho)`. For the Lebesgue reference this is
/// the row divergence of the bracket matrix.
pub fn modular_field(
    bracket: &AntisymmetricBracket,
    reference: &TargetDensity,
    x: &[f64],
) -> Vec<f64> {
    let n = bracket.dim();
    let mut out = bracket.divergence(x);
    let grad_rho = reference.grad_log_reference(x);
    let a = bracket.matrix(x);
    for i in 0..n {
        for j in 0..n {
            out[i] += a[(i, j)] * grad_rho[j];
        }
    }
    out
}

/// Stratonovich drift of the bracket diffusion at `x`:
///
/// `-A grad(H~) + [div A + A grad(rho)] - sum_k Y_k(H~) Y_k / 2
///  + sum_k div_mu(Y_k) Y_k / 2`,
///
/// which preserves `exp(-beta H) e^rho dx` by construction. The sign of the
/// bracket-gradient term is fixed so that, for `Q = A`, the Ito conversion of
/// this drift reproduces [`euclidean_recipe_drift`] exactly.
pub fn bracket_diffusion_drift(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    x: &[f64],
) -> Result<Vec<f64>> {
    let terms = bracket_diffusion_terms(bracket, noise, target, x)?;
    let mut out = vec![0.0; x.len()];
    for t in &terms {
        out.iter_mut().zip(t).for_each(|(a, b)| *a += b);
    }
    Ok(out)
}

/// The four terms of the Stratonovich bracket-diffusion drift, in the order
/// bracket-gradient, modular field, density-dissipative, volume-dissipative.
pub fn bracket_diffusion_terms(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    x: &[f64],
) -> Result<[Vec<f64>; 4]> {
    check_dims(bracket, noise, target, x)?;
    let n = target.dim();
    let grad = target.grad_potential(x);
    let a = bracket.matrix(x);
    let mut a_grad = vec![0.0; n];
    for i in 0..n {
        for j in 0..n {
            a_grad[i] -= a[(i, j)] * grad[j];
        }
    }
    let modular = modular_field(bracket, target, x);

    let grad_rho = target.grad_log_reference(x);
    let mut density_dissipative = vec![0.0; n];
    let mut volume_dissipative = vec![0.0; n];
    for k in 0..noise.num_fields() {
        let y = noise.field(k, x);
        let y_h: f64 = y.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let div_mu = noise.div_mu(k, x, &grad_rho);
        for i in 0..n {
            density_dissipative[i] -= 0.5 * y_h * y[i];
            volume_dissipative[i] += 0.5 * div_mu * y[i];
        }
    }
    Ok([a_grad, modular, density_dissipative, volume_dissipative])
}

/// Divergence-free noise fields `Y_i = modular_field(A_i, rho)` built from
/// bracket potentials. Every output field satisfies `div_mu(Y_i) = 0`
/// identically because applying the construction twice annihilates.
pub fn volume_free_noise(
    potentials: &[AntisymmetricBracket],
    reference: &TargetDensity,
) -> Result<NoiseModel> {
    if potentials.is_empty() {
        return Ok(NoiseModel::empty(reference.dim()));
    }
    let dim = reference.dim();
    let mut fields: Vec<VectorField> = Vec::new();
    for pot in potentials {
        if pot.dim() != dim {
            return Err(Error::InvalidInput("potential bracket dimension mismatch".into()));
        }
        let pot = pot.clone();
        let reference = reference.clone();
        fields.push(Arc::new(move |x: &[f64]| modular_field(&pot, &reference, x)));
    }
    NoiseModel::new(dim, fields, None)
}

/// The gauge shift `A -> A + curl(phi)` on a 3-dimensional chart, where the
/// 3-vector potential is the scalar density `phi` and the shift matrix is
/// `epsilon_ijk d_k(phi)`. The shift is divergence-free, so the modular field
/// is unchanged.
pub fn gauge_shift_r3(
    bracket: &AntisymmetricBracket,
    grad_phi: VectorField,
) -> Result<AntisymmetricBracket> {
    if bracket.dim() != 3 {
        return Err(Error::Unsupported(
            "3-vector gauge potentials are implemented for dimension 3 only".into(),
        ));
    }
    let base = bracket.clone();
    let gp = grad_phi.clone();
    let matrix: super::MatrixField = Arc::new(move |x: &[f64]| {
        let mut m = base.matrix(x);
        let g = gp(x);
        // epsilon_ijk d_k phi
        m[(0, 1)] += g[2];
        m[(1, 0)] -= g[2];
        m[(1, 2)] += g[0];
        m[(2, 1)] -= g[0];
        m[(2, 0)] += g[1];
        m[(0, 2)] -= g[1];
        m
    });
    AntisymmetricBracket::new(3, matrix, None)
}

/// Constant-vector obstruction drift on the flat torus: `c / p_inf(x)`, the
/// divergence-free field that is not globally a bracket curl. For the uniform
/// target this is the constant field `c` itself.
pub fn torus_obstruction_drift(
    gamma_sharp: &[f64],
    target: &TargetDensity,
    geometry: &Geometry,
    x: &[f64],
) -> Result<Vec<f64>> {
    let torus = match geometry {
        Geometry::Torus(t) => t,
        g => {
            return Err(Error::UnsupportedGeometry(format!(
                "obstruction drift is only defined on the flat torus, not {}",
                g.name()
            )))
        }
    };
    if gamma_sharp.len() != torus.dim() || x.len() != torus.dim() {
        return Err(Error::InvalidInput("obstruction drift dimension mismatch".into()));
    }
    let inv_density = target.potential(x).exp();
    Ok(gamma_sharp.iter().map(|&c| c * inv_density).collect())
}

/// Assemble the Ito-recipe diffusion spec on a chart geometry, optionally
/// with a constant obstruction drift (torus only).
pub fn ito_spec(
    geometry: Geometry,
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    obstruction: Option<Vec<f64>>,
) -> Result<DiffusionSpec> {
    let b = bracket.clone();
    let nm = noise.clone();
    let t = target.clone();
    let geo = geometry.clone();
    let gamma = obstruction.clone();
    let drift: VectorField = Arc::new(move |x: &[f64]| {
        let mut d = euclidean_recipe_drift(&b, &nm, &t, x).expect("drift dimension mismatch");
        if let Some(c) = &gamma {
            let o = torus_obstruction_drift(c, &t, &geo, x).expect("obstruction drift");
            d.iter_mut().zip(&o).for_each(|(a, b)| *a += b);
        }
        d
    });
    let spec = DiffusionSpec::new(geometry, drift, noise.clone(), super::Convention::Ito);
    match obstruction {
        Some(c) => spec.with_obstruction(c),
        None => Ok(spec),
    }
}

/// Assemble the Stratonovich bracket-diffusion spec, optionally with the
/// torus obstruction drift.
pub fn stratonovich_spec(
    geometry: Geometry,
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    obstruction: Option<Vec<f64>>,
) -> Result<DiffusionSpec> {
    let b = bracket.clone();
    let nm = noise.clone();
    let t = target.clone();
    let geo = geometry.clone();
    let gamma = obstruction.clone();
    let drift: VectorField = Arc::new(move |x: &[f64]| {
        let mut d = bracket_diffusion_drift(&b, &nm, &t, x).expect("drift dimension mismatch");
        if let Some(c) = &gamma {
            let o = torus_obstruction_drift(c, &t, &geo, x).expect("obstruction drift");
            d.iter_mut().zip(&o).for_each(|(a, b)| *a += b);
        }
        d
    });
    let spec =
        DiffusionSpec::new(geometry, drift, noise.clone(), super::Convention::Stratonovich);
    match obstruction {
        Some(c) => spec.with_obstruction(c),
        None => Ok(spec),
    }
}

/// Apply the generator to a scalar function at `x`:
/// `L f = X . grad(f) + sum_k Y_k . grad(Y_k . grad f) / 2`
/// with the drift read in the Stratonovich convention (Ito specs are
/// converted first). Derivatives of `f` fall back to central differences.
pub fn generator_apply(spec: &DiffusionSpec, f: &dyn Fn(&[f64]) -> f64, x: &[f64]) -> f64 {
    let spec = spec.to_stratonovich();
    let drift = spec.drift(x);
    let grad_f = fd::gradient(&f, x);
    let mut out: f64 = drift.iter().zip(&grad_f).map(|(a, b)| a * b).sum();
    let noise = spec.noise();
    for k in 0..noise.num_fields() {
        let y = noise.field(k, x);
        let s = |p: &[f64]| {
            let yp = noise.field(k, p);
            let gf = fd::gradient(&f, p);
            yp.iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>()
        };
        // the inner gradient carries ~1e-11 noise; a coarser outer step keeps
        // the second derivative from amplifying it
        out += 0.5 * fd::directional_with_step(&s, x, &y, 1e-4);
    }
    out
}
