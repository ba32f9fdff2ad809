//! Assembly of measure-preserving drifts from a target density, an
//! antisymmetric bracket, and a family of noise vector fields.
//!
//! Sign conventions are frozen so that the Stratonovich bracket-diffusion
//! drift with bracket `A`, after the explicit Ito conversion, coincides with
//! the Ito recipe drift `-(Q + D) grad(H) + div(Q + D)` for `Q = A`,
//! `D = sigma sigma^T / 2`, with the row divergence `(div M)_i = d_j M_ij`.
//! The inverse temperature is folded into the potential at assembly time
//! (`H~ = beta H`), so every downstream formula is the `beta = 1` form.

pub mod builtins;
mod drift;

pub use drift::{
    bracket_diffusion_drift, bracket_diffusion_terms, euclidean_recipe_drift,
    euclidean_recipe_terms, gauge_shift_r3, generator_apply, ito_spec, modular_field,
    stratonovich_spec, torus_obstruction_drift, volume_free_noise, RecipeTerm, RECIPE_TERMS,
};

use crate::error::{Error, Result};
use crate::fd;
use crate::geometry::Geometry;
use nalgebra::DMatrix;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use std::sync::Arc;

pub type ScalarField = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;

/// Deterministic probe points used by construction-time validation.
fn probe_points(dim: usize, count: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_cafe);
    (0..count).map(|_| (0..dim).map(|_| rng.gen_range(-0.9..0.9)).collect()).collect()
}

/// Unnormalized Gibbs data: log-density `H`, its gradient, the inverse
/// temperature, and the log-density `rho` of the reference measure with
/// respect to the local Lebesgue measure (zero for Lebesgue / Haar in the
/// canonical chart).
#[derive(Clone)]
pub struct TargetDensity {
    dim: usize,
    beta: f64,
    h: ScalarField,
    grad_h: VectorField,
    log_ref: ScalarField,
    grad_log_ref: VectorField,
}

impl TargetDensity {
    /// Target with Lebesgue reference. When an analytic gradient is supplied
    /// it is checked against central finite differences at probe points.
    pub fn new(
        dim: usize,
        beta: f64,
        h: ScalarField,
        grad_h: Option<VectorField>,
    ) -> Result<Self> {
        let zero_scalar: ScalarField = Arc::new(|_x: &[f64]| 0.0);
        let zero_vec: VectorField = Arc::new(move |x: &[f64]| vec![0.0; x.len()]);
        Self::with_reference(dim, beta, h, grad_h, zero_scalar, Some(zero_vec))
    }

    pub fn with_reference(
        dim: usize,
        beta: f64,
        h: ScalarField,
        grad_h: Option<VectorField>,
        log_ref: ScalarField,
        grad_log_ref: Option<VectorField>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("target dimension must be >= 1".into()));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if let Some(g) = &grad_h {
            validate_gradient(dim, &h, g, "grad_H")?;
        }
        if let Some(g) = &grad_log_ref {
            validate_gradient(dim, &log_ref, g, "grad_log_reference")?;
        }
        let grad_h = grad_h.unwrap_or_else(|| {
            let hh = h.clone();
            Arc::new(move |x: &[f64]| fd::gradient(&|y| hh(y), x))
        });
        let grad_log_ref = grad_log_ref.unwrap_or_else(|| {
            let rr = log_ref.clone();
            Arc::new(move |x: &[f64]| fd::gradient(&|y| rr(y), x))
        });
        Ok(Self { dim, beta, h, grad_h, log_ref, grad_log_ref })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// Raw log-density `H(x)` as supplied.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        (self.h)(x)
    }

    /// Effective potential with the temperature folded in: `beta * H(x)`.
    pub fn potential(&self, x: &[f64]) -> f64 {
        self.beta * (self.h)(x)
    }

    pub fn grad_potential(&self, x: &[f64]) -> Vec<f64> {
        let mut g = (self.grad_h)(x);
        g.iter_mut().for_each(|v| *v *= self.beta);
        g
    }

    /// Unnormalized density `exp(-beta H)` with respect to the reference.
    pub fn density(&self, x: &[f64]) -> f64 {
        (-self.potential(x)).exp()
    }

    pub fn log_reference(&self, x: &[f64]) -> f64 {
        (self.log_ref)(x)
    }

    pub fn grad_log_reference(&self, x: &[f64]) -> Vec<f64> {
        (self.grad_log_ref)(x)
    }
}

fn validate_gradient(
    dim: usize,
    f: &ScalarField,
    grad: &VectorField,
    what: &str,
) -> Result<()> {
    for p in probe_points(dim, 8) {
        let analytic = grad(&p);
        if analytic.len() != dim {
            return Err(Error::InvalidInput(format!("{what} returns wrong dimension")));
        }
        let numeric = fd::gradient(&|y| f(y), &p);
        for i in 0..dim {
            let scale = 1.0_f64.max(analytic[i].abs());
            if (analytic[i] - numeric[i]).abs() > 1e-5 * scale {
                return Err(Error::InvalidInput(format!(
                    "{what} disagrees with finite differences at {:?}: {} vs {}",
                    p, analytic[i], numeric[i]
                )));
            }
        }
    }
    Ok(())
}

/// Position-dependent antisymmetric matrix field together with its row
/// divergence `(div A)_i = d_j A_ij`.
#[derive(Clone)]
pub struct AntisymmetricBracket {
    dim: usize,
    matrix: MatrixField,
    divergence: VectorField,
}

impl AntisymmetricBracket {
    pub fn new(dim: usize, matrix: MatrixField, divergence: Option<VectorField>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("bracket dimension must be >= 1".into()));
        }
        for p in probe_points(dim, 8) {
            let a = matrix(&p);
            if a.nrows() != dim || a.ncols() != dim {
                return Err(Error::InvalidInput("bracket matrix has wrong dimensions".into()));
            }
            let defect = (a.clone() + a.transpose()).abs().max();
            if defect > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "bracket is not antisymmetric (defect {defect:.3e} at {p:?})"
                )));
            }
            if let Some(div) = &divergence {
                let analytic = div(&p);
                let m = matrix.clone();
                let numeric = fd::matrix_divergence(&move |y| m(y), &p);
                for i in 0..dim {
                    let scale = 1.0_f64.max(analytic[i].abs());
                    if (analytic[i] - numeric[i]).abs() > 1e-5 * scale {
                        return Err(Error::InvalidInput(format!(
                            "bracket divergence disagrees with finite differences at {p:?}"
                        )));
                    }
                }
            }
        }
        let divergence = divergence.unwrap_or_else(|| {
            let m = matrix.clone();
            Arc::new(move |x: &[f64]| fd::matrix_divergence(&|y| m(y), x))
        });
        Ok(Self { dim, matrix, divergence })
    }

    /// The zero bracket.
    pub fn zero(dim: usize) -> Self {
        let matrix: MatrixField = Arc::new(move |_x: &[f64]| DMatrix::zeros(dim, dim));
        let divergence: VectorField = Arc::new(move |_x: &[f64]| vec![0.0; dim]);
        Self { dim, matrix, divergence }
    }

    /// Constant bracket from a full antisymmetric matrix.
    pub fn constant(a: DMatrix<f64>) -> Result<Self> {
        let dim = a.nrows();
        if (a.clone() + a.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidInput("constant bracket matrix is not antisymmetric".into()));
        }
        let matrix: MatrixField = Arc::new(move |_x: &[f64]| a.clone());
        let divergence: VectorField = Arc::new(move |_x: &[f64]| vec![0.0; dim]);
        Ok(Self { dim, matrix, divergence })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self, x: &[f64]) -> DMatrix<f64> {
        (self.matrix)(x)
    }

    pub fn divergence(&self, x: &[f64]) -> Vec<f64> {
        (self.divergence)(x)
    }
}

/// Family of noise vector fields `Y_i` with their Jacobians
/// (`jac_k[(i, j)] = d Y_k^i / d x_j`).
#[derive(Clone)]
pub struct NoiseModel {
    dim: usize,
    fields: Vec<VectorField>,
    jacobians: Vec<MatrixField>,
}

impl NoiseModel {
    pub fn new(
        dim: usize,
        fields: Vec<VectorField>,
        jacobians: Option<Vec<MatrixField>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("noise dimension must be >= 1".into()));
        }
        if let Some(jacs) = &jacobians {
            if jacs.len() != fields.len() {
                return Err(Error::InvalidInput("one jacobian per noise field required".into()));
            }
        }
        for p in probe_points(dim, 8) {
            for (k, field) in fields.iter().enumerate() {
                let y = field(&p);
                if y.len() != dim {
                    return Err(Error::InvalidInput(format!(
                        "noise field {k} returns wrong dimension"
                    )));
                }
                if let Some(jacs) = &jacobians {
                    let analytic = jacs[k](&p);
                    let f = field.clone();
                    let numeric = fd::jacobian(&move |y| f(y), &p);
                    for i in 0..dim {
                        for j in 0..dim {
                            let scale = 1.0_f64.max(analytic[(i, j)].abs());
                            if (analytic[(i, j)] - numeric[i][j]).abs() > 1e-5 * scale {
                                return Err(Error::InvalidInput(format!(
                                    "noise jacobian {k} disagrees with finite differences at {p:?}"
                                )));
                            }
                        }
                    }
                }
            }
            // implied diffusion matrix must be PSD
            let d = diffusion_matrix_of(&fields, dim, &p);
            let eig = d.symmetric_eigenvalues();
            if eig.iter().any(|&l| l < -1e-12) {
                return Err(Error::InvalidInput(format!(
                    "diffusion matrix has negative eigenvalue {:.3e} at {p:?}",
                    eig.min()
                )));
            }
        }
        let jacobians = jacobians.unwrap_or_else(|| {
            fields
                .iter()
                .map(|field| {
                    let f = field.clone();
                    let jac: MatrixField = Arc::new(move |x: &[f64]| {
                        let rows = fd::jacobian(&|y| f(y), x);
                        DMatrix::from_fn(x.len(), x.len(), |i, j| rows[i][j])
                    });
                    jac
                })
                .collect()
        });
        Ok(Self { dim, fields, jacobians })
    }

    /// Noise-free model.
    pub fn empty(dim: usize) -> Self {
        Self { dim, fields: Vec::new(), jacobians: Vec::new() }
    }

    /// Constant fields given as the columns of `sigma` (so `D = sigma sigma^T / 2`).
    pub fn constant(sigma: DMatrix<f64>) -> Result<Self> {
        let dim = sigma.nrows();
        let mut fields: Vec<VectorField> = Vec::new();
        let mut jacs: Vec<MatrixField> = Vec::new();
        for j in 0..sigma.ncols() {
            let col: Vec<f64> = (0..dim).map(|i| sigma[(i, j)]).collect();
            fields.push(Arc::new(move |_x: &[f64]| col.clone()));
            jacs.push(Arc::new(move |_x: &[f64]| DMatrix::zeros(dim, dim)));
        }
        Self::new(dim, fields, Some(jacs))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn field(&self, k: usize, x: &[f64]) -> Vec<f64> {
        (self.fields[k])(x)
    }

    pub fn jacobian(&self, k: usize, x: &[f64]) -> DMatrix<f64> {
        (self.jacobians[k])(x)
    }

    /// `D(x) = sum_k Y_k Y_k^T / 2`.
    pub fn diffusion_matrix(&self, x: &[f64]) -> DMatrix<f64> {
        diffusion_matrix_of(&self.fields, self.dim, x)
    }

    /// `(div D)_i = d_j D_ij`, assembled from the Jacobians.
    pub fn diffusion_divergence(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for k in 0..self.fields.len() {
            let y = self.field(k, x);
            let jac = self.jacobian(k, x);
            let trace = jac.trace();
            for i in 0..self.dim {
                let mut jy = 0.0;
                for j in 0..self.dim {
                    jy += jac[(i, j)] * y[j];
                }
                out[i] += 0.5 * (jy + y[i] * trace);
            }
        }
        out
    }

    /// Stratonovich-to-Ito drift correction `sum_k (dY_k) Y_k / 2`.
    pub fn ito_correction(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for k in 0..self.fields.len() {
            let y = self.field(k, x);
            let jac = self.jacobian(k, x);
            for i in 0..self.dim {
                for j in 0..self.dim {
                    out[i] += 0.5 * jac[(i, j)] * y[j];
                }
            }
        }
        out
    }

    /// Divergence of field `k` with respect to `mu = e^rho dx`:
    /// `tr(dY_k) + Y_k . grad(rho)`.
    pub fn div_mu(&self, k: usize, x: &[f64], grad_log_ref: &[f64]) -> f64 {
        let y = self.field(k, x);
        let jac = self.jacobian(k, x);
        jac.trace() + y.iter().zip(grad_log_ref).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Smallest singular value of the matrix whose columns are the noise
    /// fields at `x`. Zero signals pointwise linear dependence; reported by
    /// callers, never enforced.
    pub fn min_singular_value(&self, x: &[f64]) -> f64 {
        if self.fields.is_empty() {
            return 0.0;
        }
        let mut m = DMatrix::<f64>::zeros(self.dim, self.fields.len());
        for (k, field) in self.fields.iter().enumerate() {
            let y = field(x);
            for i in 0..self.dim {
                m[(i, k)] = y[i];
            }
        }
        m.singular_values().min()
    }
}

fn diffusion_matrix_of(fields: &[VectorField], dim: usize, x: &[f64]) -> DMatrix<f64> {
    let mut d = DMatrix::<f64>::zeros(dim, dim);
    for field in fields {
        let y = field(x);
        for i in 0..dim {
            for j in 0..dim {
                d[(i, j)] += 0.5 * y[i] * y[j];
            }
        }
    }
    d
}

/// Stochastic-integral convention of an assembled diffusion. Recorded and
/// never converted implicitly; conversions are the explicit `to_*` calls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Ito,
    Stratonovich,
}

impl Convention {
    pub fn name(&self) -> &'static str {
        match self {
            Convention::Ito => "ito",
            Convention::Stratonovich => "stratonovich",
        }
    }
}

/// Assembled drift + noise on a declared geometry in a declared convention.
#[derive(Clone)]
pub struct DiffusionSpec {
    geometry: Geometry,
    drift: VectorField,
    noise: NoiseModel,
    convention: Convention,
    obstruction: Option<Vec<f64>>,
}

impl DiffusionSpec {
    pub fn new(
        geometry: Geometry,
        drift: VectorField,
        noise: NoiseModel,
        convention: Convention,
    ) -> Self {
        Self { geometry, drift, noise, convention, obstruction: None }
    }

    /// Attach a constant topological-obstruction vector; flat torus only.
    pub fn with_obstruction(mut self, gamma_sharp: Vec<f64>) -> Result<Self> {
        match &self.geometry {
            Geometry::Torus(t) => {
                if gamma_sharp.len() != t.dim() {
                    return Err(Error::InvalidInput("obstruction vector dimension mismatch".into()));
                }
                self.obstruction = Some(gamma_sharp);
                Ok(self)
            }
            g => Err(Error::UnsupportedGeometry(format!(
                "obstruction term is only defined on the flat torus, not {}",
                g.name()
            ))),
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn drift(&self, x: &[f64]) -> Vec<f64> {
        (self.drift)(x)
    }

    pub fn noise(&self) -> &NoiseModel {
        &self.noise
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn obstruction(&self) -> Option<&[f64]> {
        self.obstruction.as_deref()
    }

    /// Explicit conversion to the Ito convention
    /// (`X_ito = X_strat + sum_k (dY_k) Y_k / 2`).
    pub fn to_ito(&self) -> DiffusionSpec {
        if self.convention == Convention::Ito {
            return self.clone();
        }
        let drift = self.drift.clone();
        let noise = self.noise.clone();
        let new_drift: VectorField = Arc::new(move |x: &[f64]| {
            let mut d = drift(x);
            let c = noise.ito_correction(x);
            d.iter_mut().zip(&c).for_each(|(a, b)| *a += b);
            d
        });
        DiffusionSpec {
            geometry: self.geometry.clone(),
            drift: new_drift,
            noise: self.noise.clone(),
            convention: Convention::Ito,
            obstruction: self.obstruction.clone(),
        }
    }

    /// Explicit conversion to the Stratonovich convention.
    pub fn to_stratonovich(&self) -> DiffusionSpec {
        if self.convention == Convention::Stratonovich {
            return self.clone();
        }
        let drift = self.drift.clone();
        let noise = self.noise.clone();
        let new_drift: VectorField = Arc::new(move |x: &[f64]| {
            let mut d = drift(x);
            let c = noise.ito_correction(x);
            d.iter_mut().zip(&c).for_each(|(a, b)| *a -= b);
            d
        });
        DiffusionSpec {
            geometry: self.geometry.clone(),
            drift: new_drift,
            noise: self.noise.clone(),
            convention: Convention::Stratonovich,
            obstruction: self.obstruction.clone(),
        }
    }
}
