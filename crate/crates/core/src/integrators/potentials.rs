//! Potential energies on structured geometries: matrix Lie groups (potential
//! of the group element with its ambient matrix gradient) and embedded
//! spheres (ambient extension of the potential with its Euclidean gradient).

use crate::geometry::CMat;
use nalgebra::Complex;
use std::sync::Arc;

type LieValue = Arc<dyn Fn(&CMat) -> f64 + Send + Sync>;
type LieGrad = Arc<dyn Fn(&CMat) -> CMat + Send + Sync>;

/// Potential `V(g)` on a matrix Lie group together with the matrix of entry
/// partials `dV`. For complex groups the convention is
/// `dV_ab = dV/dRe(g_ab) - i dV/dIm(g_ab)`, so `Re tr(dV^T M)` is the
/// directional derivative of `V` along `M`.
#[derive(Clone)]
pub struct LiePotential {
    value: LieValue,
    gradient: LieGrad,
    zero: bool,
}

impl LiePotential {
    pub fn new(value: LieValue, gradient: LieGrad) -> Self {
        Self { value, gradient, zero: false }
    }

    /// The free (zero) potential; kicks are skipped entirely.
    pub fn zero(n: usize) -> Self {
        Self {
            value: Arc::new(|_g: &CMat| 0.0),
            gradient: Arc::new(move |_g: &CMat| CMat::zeros(n, n)),
            zero: true,
        }
    }

    /// `V(g) = Re tr(L g)` with constant matrix `L`; `dV = L^T`.
    pub fn trace(lambda: CMat) -> Self {
        let l = lambda.clone();
        let lt = lambda.transpose();
        Self {
            value: Arc::new(move |g: &CMat| (&l * g).trace().re),
            gradient: Arc::new(move |_g: &CMat| lt.clone()),
            zero: false,
        }
    }

    /// Real-matrix version of [`LiePotential::trace`].
    pub fn trace_real(lambda: nalgebra::DMatrix<f64>) -> Self {
        Self::trace(lambda.map(|x| Complex::new(x, 0.0)))
    }

    pub fn value(&self, g: &CMat) -> f64 {
        (self.value)(g)
    }

    pub fn gradient(&self, g: &CMat) -> CMat {
        (self.gradient)(g)
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
}

type SphereValue = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type SphereGrad = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// Ambient extension `W` of a potential on the sphere, with its Euclidean
/// gradient. The integrator projects the gradient onto tangent spaces.
#[derive(Clone)]
pub struct SpherePotential {
    value: SphereValue,
    gradient: SphereGrad,
    zero: bool,
}

impl SpherePotential {
    pub fn new(value: SphereValue, gradient: SphereGrad) -> Self {
        Self { value, gradient, zero: false }
    }

    pub fn zero(ambient_dim: usize) -> Self {
        Self {
            value: Arc::new(|_q: &[f64]| 0.0),
            gradient: Arc::new(move |_q: &[f64]| vec![0.0; ambient_dim]),
            zero: true,
        }
    }

    /// `W(q) = kappa * q_axis`, the linear height potential whose Gibbs
    /// measure is the von Mises-Fisher family.
    pub fn linear_height(axis: usize, kappa: f64) -> Self {
        Self {
            value: Arc::new(move |q: &[f64]| kappa * q[axis]),
            gradient: Arc::new(move |q: &[f64]| {
                let mut g = vec![0.0; q.len()];
                g[axis] = kappa;
                g
            }),
            zero: false,
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        (self.value)(q)
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        (self.gradient)(q)
    }

    pub fn is_zero(&self) -> bool {
        self.zero
    }
}
