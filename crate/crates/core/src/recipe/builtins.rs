//! Named built-in targets, brackets, and noise families. These are the
//! pieces a config file can request; user extensions register through the
//! library API instead.

use super::{AntisymmetricBracket, NoiseModel, ScalarField, TargetDensity, VectorField};
use crate::error::{Error, Result};
use crate::geometry::FlatTorus;
use nalgebra::DMatrix;
use std::sync::Arc;

pub const TARGETS: &[(&str, &str)] = &[
    ("gaussian", "H = sum x_i^2 / (2 s_i^2); params: variances (one shared value or one per axis)"),
    ("double_well", "H = (x_0^2 - a)^2 + sum_{i>0} x_i^2 / 2; params: [a], default 1"),
    ("torus_cosine", "H = amp * sum cos(2 pi x_i / L_i) on a torus; params: [amp], default 1"),
    ("uniform", "H = 0"),
];

pub const BRACKETS: &[(&str, &str)] = &[
    ("none", "zero bracket"),
    ("constant", "constant antisymmetric matrix; params: strict upper triangle, row-major"),
    ("linear", "A_ij = b (x_i - x_j); params: [b], default 1"),
    ("stream_function", "dim 2: A_01 = amp * exp(-(x^2 + y^2) / (2 w^2)); params: [amp, w]"),
];

pub const NOISES: &[(&str, &str)] = &[
    ("none", "no noise fields"),
    ("additive", "Y_i = sqrt(2 c) e_i; params: [c], default 1"),
    ("poly_diag", "Y_i = sqrt(2 (1 + (x_i/w)^2)) e_i, so D = diag(1 + (x_i/w)^2); params: [w], default 1"),
];

/// Build a named target on a Euclidean chart (Lebesgue reference).
pub fn target(name: &str, dim: usize, beta: f64, params: &[f64]) -> Result<TargetDensity> {
    match name {
        "gaussian" => {
            let vars: Vec<f64> = match params.len() {
                0 => vec![1.0; dim],
                1 => vec![params[0]; dim],
                n if n == dim => params.to_vec(),
                _ => {
                    return Err(Error::InvalidInput(
                        "gaussian expects one shared variance or one per axis".into(),
                    ))
                }
            };
            if vars.iter().any(|&v| v <= 0.0) {
                return Err(Error::InvalidInput("gaussian variances must be positive".into()));
            }
            let v = vars.clone();
            let h: ScalarField =
                Arc::new(move |x: &[f64]| x.iter().zip(&v).map(|(xi, s2)| xi * xi / (2.0 * s2)).sum());
            let v = vars;
            let grad: VectorField =
                Arc::new(move |x: &[f64]| x.iter().zip(&v).map(|(xi, s2)| xi / s2).collect());
            TargetDensity::new(dim, beta, h, Some(grad))
        }
        "double_well" => {
            let a = params.first().copied().unwrap_or(1.0);
            let h: ScalarField = Arc::new(move |x: &[f64]| {
                let well = (x[0] * x[0] - a).powi(2);
                well + x.iter().skip(1).map(|xi| xi * xi / 2.0).sum::<f64>()
            });
            let grad: VectorField = Arc::new(move |x: &[f64]| {
                let mut g: Vec<f64> = x.to_vec();
                g[0] = 4.0 * x[0] * (x[0] * x[0] - a);
                g
            });
            TargetDensity::new(dim, beta, h, Some(grad))
        }
        "uniform" => {
            let h: ScalarField = Arc::new(|_x: &[f64]| 0.0);
            let grad: VectorField = Arc::new(move |x: &[f64]| vec![0.0; x.len()]);
            TargetDensity::new(dim, beta, h, Some(grad))
        }
        other => Err(Error::InvalidInput(format!("unknown target `{other}`"))),
    }
}

/// Cosine target on a flat torus.
pub fn torus_target(torus: &FlatTorus, beta: f64, params: &[f64]) -> Result<TargetDensity> {
    let amp = params.first().copied().unwrap_or(1.0);
    let periods = torus.periods().to_vec();
    let p = periods.clone();
    let h: ScalarField = Arc::new(move |x: &[f64]| {
        x.iter()
            .zip(&p)
            .map(|(xi, li)| amp * (2.0 * std::f64::consts::PI * xi / li).cos())
            .sum()
    });
    let p = periods;
    let grad: VectorField = Arc::new(move |x: &[f64]| {
        x.iter()
            .zip(&p)
            .map(|(xi, li)| {
                let w = 2.0 * std::f64::consts::PI / li;
                -amp * w * (w * xi).sin()
            })
            .collect()
    });
    TargetDensity::new(torus.dim(), beta, h, Some(grad))
}

/// Build a named bracket.
pub fn bracket(name: &str, dim: usize, params: &[f64]) -> Result<AntisymmetricBracket> {
    match name {
        "none" => Ok(AntisymmetricBracket::zero(dim)),
        "constant" => {
            let expected = dim * (dim - 1) / 2;
            if params.len() != expected {
                return Err(Error::InvalidInput(format!(
                    "constant bracket in dimension {dim} expects {expected} strict upper-triangle entries"
                )));
            }
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            let mut it = params.iter();
            for i in 0..dim {
                for j in (i + 1)..dim {
                    let v = *it.next().unwrap();
                    m[(i, j)] = v;
                    m[(j, i)] = -v;
                }
            }
            AntisymmetricBracket::constant(m)
        }
        "linear" => {
            let b = params.first().copied().unwrap_or(1.0);
            let matrix: super::MatrixField = Arc::new(move |x: &[f64]| {
                DMatrix::from_fn(x.len(), x.len(), |i, j| b * (x[i] - x[j]))
            });
            // (div A)_i = sum_j d_j [b (x_i - x_j)] = b (1 - n)
            let divergence: VectorField =
                Arc::new(move |x: &[f64]| vec![b * (1.0 - x.len() as f64); x.len()]);
            AntisymmetricBracket::new(dim, matrix, Some(divergence))
        }
        "stream_function" => {
            if dim != 2 {
                return Err(Error::InvalidInput("stream_function bracket requires dimension 2".into()));
            }
            let amp = params.first().copied().unwrap_or(1.0);
            let w = params.get(1).copied().unwrap_or(1.0);
            if w <= 0.0 {
                return Err(Error::InvalidInput("stream_function width must be positive".into()));
            }
            let psi = move |x: &[f64]| amp * (-(x[0] * x[0] + x[1] * x[1]) / (2.0 * w * w)).exp();
            let matrix: super::MatrixField = Arc::new(move |x: &[f64]| {
                let p = psi(x);
                DMatrix::from_row_slice(2, 2, &[0.0, p, -p, 0.0])
            });
            let divergence: VectorField = Arc::new(move |x: &[f64]| {
                let p = psi(x);
                // d_y psi, -d_x psi
                vec![-x[1] / (w * w) * p, x[0] / (w * w) * p]
            });
            AntisymmetricBracket::new(2, matrix, Some(divergence))
        }
        other => Err(Error::InvalidInput(format!("unknown bracket `{other}`"))),
    }
}

/// Build a named noise family.
pub fn noise(name: &str, dim: usize, params: &[f64]) -> Result<NoiseModel> {
    match name {
        "none" => Ok(NoiseModel::empty(dim)),
        "additive" => {
            let c = params.first().copied().unwrap_or(1.0);
            if c < 0.0 {
                return Err(Error::InvalidInput("additive noise scale must be non-negative".into()));
            }
            let sigma = DMatrix::<f64>::identity(dim, dim) * (2.0 * c).sqrt();
            NoiseModel::constant(sigma)
        }
        "poly_diag" => {
            let w = params.first().copied().unwrap_or(1.0);
            if w <= 0.0 {
                return Err(Error::InvalidInput("poly_diag width must be positive".into()));
            }
            let inv_w2 = 1.0 / (w * w);
            let mut fields: Vec<VectorField> = Vec::new();
            let mut jacs: Vec<super::MatrixField> = Vec::new();
            for k in 0..dim {
                fields.push(Arc::new(move |x: &[f64]| {
                    let mut y = vec![0.0; x.len()];
                    y[k] = (2.0 * (1.0 + x[k] * x[k] * inv_w2)).sqrt();
                    y
                }));
                jacs.push(Arc::new(move |x: &[f64]| {
                    let mut j = DMatrix::<f64>::zeros(x.len(), x.len());
                    j[(k, k)] =
                        2.0 * x[k] * inv_w2 / (2.0 * (1.0 + x[k] * x[k] * inv_w2)).sqrt();
                    j
                }));
            }
            NoiseModel::new(dim, fields, Some(jacs))
        }
        other => Err(Error::InvalidInput(format!("unknown noise family `{other}`"))),
    }
}
