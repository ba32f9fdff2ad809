//! Numerical falsification harness for the defining identities: stationary
//! Fokker-Planck residuals on grids, Fokker-Planck current residuals,
//! generator symmetry and dissipativity quadrature, volume-Jacobian checks,
//! and exact KL decay along linear processes.
//!
//! Every derivative in the grid residuals is a second-order central
//! difference at the grid spacing, so residuals of exact identities shrink
//! at O(h^2) and a deleted recipe term shows up at O(1).

mod kl;
mod symmetry;

pub use kl::{kl_decay_trace, GaussianState, LinearSde};
pub use symmetry::{generator_symmetry_defect, rejection_sample, smooth_bump, SymmetryReport};

use crate::error::{Error, Result};
use crate::recipe::{
    euclidean_recipe_terms, AntisymmetricBracket, DiffusionSpec, NoiseModel, RecipeTerm,
    TargetDensity, VectorField, RECIPE_TERMS,
};
use nalgebra::DMatrix;
use serde::Serialize;
use std::sync::Arc;

/// Node-boundary handling of residual grids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryPolicy {
    /// Evaluate residuals only at nodes at least two cells away from the
    /// boundary; warn when the density carries visible boundary mass.
    TruncateInterior,
    /// Wrap indices; every node is evaluated.
    Periodic,
}

/// Uniform rectangular grid in up to three dimensions.
#[derive(Debug, Clone, Serialize)]
pub struct GridSpec {
    /// `(min, max)` per axis; for periodic axes `max` is the period end and
    /// the node at `max` is identified with the one at `min`.
    pub bounds: Vec<(f64, f64)>,
    pub points_per_axis: usize,
    pub policy: BoundaryPolicy,
}

impl GridSpec {
    pub fn new(bounds: Vec<(f64, f64)>, points_per_axis: usize, policy: BoundaryPolicy) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 3 {
            return Err(Error::InvalidInput("grids support dimensions 1 to 3".into()));
        }
        if points_per_axis < 8 {
            return Err(Error::InvalidInput("grids need at least 8 points per axis".into()));
        }
        if bounds.iter().any(|(lo, hi)| !(hi > lo)) {
            return Err(Error::InvalidInput("grid bounds must be increasing".into()));
        }
        Ok(Self { bounds, points_per_axis, policy })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn refined(&self) -> GridSpec {
        let points = match self.policy {
            BoundaryPolicy::TruncateInterior => 2 * self.points_per_axis - 1,
            BoundaryPolicy::Periodic => 2 * self.points_per_axis,
        };
        GridSpec { bounds: self.bounds.clone(), points_per_axis: points, policy: self.policy }
    }
}

/// Residual magnitudes with the refinement diagnostic.
#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub l2: f64,
    pub grid_spacing: f64,
    /// `residual(h) / residual(h/2)`; near 4 when the identity holds and the
    /// error is pure second-order truncation.
    pub refinement_ratio: Option<f64>,
    /// Density varies by more than 10x between neighboring nodes.
    pub coarse_grid_warning: bool,
    /// More than 1e-8 of the grid mass sits on the boundary shell.
    pub boundary_mass_warning: bool,
}

impl ResidualReport {
    fn validate(self) -> Result<Self> {
        if !self.max_abs.is_finite() || !self.l2.is_finite() || !self.grid_spacing.is_finite() {
            return Err(Error::InvalidInput("residual report has non-finite fields".into()));
        }
        Ok(self)
    }
}

/// Dense scalar/vector samples on a grid, indexed by flattened multi-index.
struct GridData {
    shape: Vec<usize>,
    spacing: Vec<f64>,
    origin: Vec<f64>,
    policy: BoundaryPolicy,
}

impl GridData {
    fn build(grid: &GridSpec) -> GridData {
        let m = grid.points_per_axis;
        let dim = grid.dim();
        let mut spacing = Vec::with_capacity(dim);
        let origin: Vec<f64> = grid.bounds.iter().map(|(lo, _)| *lo).collect();
        for (lo, hi) in &grid.bounds {
            let h = match grid.policy {
                BoundaryPolicy::TruncateInterior => (hi - lo) / (m - 1) as f64,
                BoundaryPolicy::Periodic => (hi - lo) / m as f64,
            };
            spacing.push(h);
        }
        GridData { shape: vec![m; dim], spacing, origin, policy: grid.policy }
    }

    fn dim(&self) -> usize {
        self.shape.len()
    }

    fn len(&self) -> usize {
        self.shape.iter().product()
    }

    fn point(&self, flat: usize) -> Vec<f64> {
        let mut idx = flat;
        let mut out = vec![0.0; self.dim()];
        for d in (0..self.dim()).rev() {
            let k = idx % self.shape[d];
            idx /= self.shape[d];
            out[d] = self.origin[d] + k as f64 * self.spacing[d];
        }
        out
    }

    fn multi_index(&self, flat: usize) -> Vec<usize> {
        let mut idx = flat;
        let mut out = vec![0usize; self.dim()];
        for d in (0..self.dim()).rev() {
            out[d] = idx % self.shape[d];
            idx /= self.shape[d];
        }
        out
    }

    fn flat(&self, multi: &[usize]) -> usize {
        let mut idx = 0;
        for d in 0..self.dim() {
            idx = idx * self.shape[d] + multi[d];
        }
        idx
    }

    /// Neighbor along `axis` at offset +-1, wrapping when periodic. `None`
    /// when the neighbor falls outside a truncated grid.
    fn neighbor(&self, flat: usize, axis: usize, step: isize) -> Option<usize> {
        let mut multi = self.multi_index(flat);
        let m = self.shape[axis] as isize;
        let k = multi[axis] as isize + step;
        let k = match self.policy {
            BoundaryPolicy::Periodic => k.rem_euclid(m),
            BoundaryPolicy::TruncateInterior => {
                if k < 0 || k >= m {
                    return None;
                }
                k
            }
        };
        multi[axis] = k as usize;
        Some(self.flat(&multi))
    }

    /// Nodes at which a second derivative stencil is fully interior.
    fn is_evaluation_node(&self, flat: usize) -> bool {
        match self.policy {
            BoundaryPolicy::Periodic => true,
            BoundaryPolicy::TruncateInterior => {
                let multi = self.multi_index(flat);
                multi
                    .iter()
                    .zip(&self.shape)
                    .all(|(&k, &m)| k >= 2 && k + 2 < m)
            }
        }
    }

    fn is_boundary_node(&self, flat: usize) -> bool {
        let multi = self.multi_index(flat);
        multi.iter().zip(&self.shape).any(|(&k, &m)| k == 0 || k + 1 == m)
    }

    /// Central difference of a sampled scalar along `axis`.
    fn central(&self, values: &[f64], flat: usize, axis: usize) -> Option<f64> {
        let plus = self.neighbor(flat, axis, 1)?;
        let minus = self.neighbor(flat, axis, -1)?;
        Some((values[plus] - values[minus]) / (2.0 * self.spacing[axis]))
    }
}

fn central_component(
    grid: &GridData,
    field: &[Vec<f64>],
    flat: usize,
    axis: usize,
    component: usize,
) -> Option<f64> {
    let plus = grid.neighbor(flat, axis, 1)?;
    let minus = grid.neighbor(flat, axis, -1)?;
    Some((field[plus][component] - field[minus][component]) / (2.0 * grid.spacing[axis]))
}

fn second_diff(
    grid: &GridData,
    values: &[Vec<f64>],
    flat: usize,
    axis: usize,
    component: usize,
) -> Option<f64> {
    let plus = grid.neighbor(flat, axis, 1)?;
    let minus = grid.neighbor(flat, axis, -1)?;
    let h = grid.spacing[axis];
    Some(
        (values[plus][component] - 2.0 * values[flat][component] + values[minus][component])
            / (h * h),
    )
}

fn cross_diff(
    grid: &GridData,
    values: &[Vec<f64>],
    flat: usize,
    axis_a: usize,
    axis_b: usize,
    component: usize,
) -> Option<f64> {
    let pp = grid.neighbor(grid.neighbor(flat, axis_a, 1)?, axis_b, 1)?;
    let pm = grid.neighbor(grid.neighbor(flat, axis_a, 1)?, axis_b, -1)?;
    let mp = grid.neighbor(grid.neighbor(flat, axis_a, -1)?, axis_b, 1)?;
    let mm = grid.neighbor(grid.neighbor(flat, axis_a, -1)?, axis_b, -1)?;
    let h = 4.0 * grid.spacing[axis_a] * grid.spacing[axis_b];
    Some(
        (values[pp][component] - values[pm][component] - values[mp][component]
            + values[mm][component])
            / h,
    )
}

fn residual_pass(
    spec: &DiffusionSpec,
    target: &TargetDensity,
    gridspec: &GridSpec,
) -> Result<(f64, f64, f64, bool, bool)> {
    let grid = GridData::build(gridspec);
    let len = grid.len();
    let n = grid.dim();
    let noise = spec.noise();

    // Lebesgue density p = exp(rho - beta H), flux p X, and weighted
    // diffusion matrix D p, sampled on every node
    let mut density = vec![0.0; len];
    let mut flux = vec![vec![0.0; n]; len];
    let mut dmat = vec![vec![0.0; n * n]; len];
    for flat in 0..len {
        let x = grid.point(flat);
        let p = target.density(&x) * target.log_reference(&x).exp();
        density[flat] = p;
        let drift = spec.drift(&x);
        for i in 0..n {
            flux[flat][i] = p * drift[i];
        }
        let d = noise.diffusion_matrix(&x);
        for i in 0..n {
            for j in 0..n {
                dmat[flat][i * n + j] = d[(i, j)] * p;
            }
        }
    }
    let max_density = density.iter().cloned().fold(0.0_f64, f64::max);
    if max_density <= 0.0 {
        return Err(Error::InvalidInput("target density vanishes on the whole grid".into()));
    }

    // warnings
    let mut coarse = false;
    for flat in 0..len {
        for axis in 0..n {
            if let Some(nb) = grid.neighbor(flat, axis, 1) {
                let (a, b) = (density[flat], density[nb]);
                if a > 0.0 && b > 0.0 && (a / b > 10.0 || b / a > 10.0) {
                    coarse = true;
                }
            }
        }
    }
    let mut boundary_mass = 0.0;
    let mut total_mass = 0.0;
    for flat in 0..len {
        total_mass += density[flat];
        if grid.is_boundary_node(flat) {
            boundary_mass += density[flat];
        }
    }
    let boundary_warning = match gridspec.policy {
        BoundaryPolicy::TruncateInterior => boundary_mass / total_mass >= 1e-8,
        BoundaryPolicy::Periodic => false,
    };

    // residual = -sum_i d_h,i (p X_i) + sum_ij d2_h,ij (D_ij p)
    let mut max_abs: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for flat in 0..len {
        if !grid.is_evaluation_node(flat) {
            continue;
        }
        let mut value = 0.0;
        let mut valid = true;
        for axis in 0..n {
            match central_component(&grid, &flux, flat, axis, axis) {
                Some(d) => value -= d,
                None => {
                    valid = false;
                    break;
                }
            }
        }
        if valid {
            'second: for i in 0..n {
                for j in 0..n {
                    let d2 = if i == j {
                        second_diff(&grid, &dmat, flat, i, i * n + i)
                    } else {
                        cross_diff(&grid, &dmat, flat, i, j, i * n + j)
                    };
                    match d2 {
                        Some(d) => value += d,
                        None => {
                            valid = false;
                            break 'second;
                        }
                    }
                }
            }
        }
        if !valid {
            continue;
        }
        let r = (value / max_density).abs();
        max_abs = max_abs.max(r);
        sum_sq += r * r;
        count += 1;
    }
    if count == 0 {
        return Err(Error::InvalidInput("grid too small: no interior evaluation nodes".into()));
    }
    let l2 = (sum_sq / count as f64).sqrt();
    let h = grid.spacing.iter().cloned().fold(0.0_f64, f64::max);
    Ok((max_abs, l2, h, coarse, boundary_warning))
}

/// Stationary Fokker-Planck residual of the spec against the target: the
/// discrete `L* p` of the Lebesgue density `p = exp(rho - beta H)` in
/// divergence form, `-d_i(p X_i) + d_i d_j(D_ij p)`, with second-order
/// central differences throughout, normalized by the maximum grid density.
/// Reported at the given spacing together with the ratio against half the
/// spacing.
///
/// Stratonovich specs are converted to Ito form first (the conversion is
/// explicit and uses the noise Jacobians).
pub fn fokker_planck_residual(
    spec: &DiffusionSpec,
    target: &TargetDensity,
    grid: &GridSpec,
) -> Result<ResidualReport> {
    let spec = spec.to_ito();
    let (max_abs, l2, h, coarse, boundary) = residual_pass(&spec, target, grid)?;
    let (fine_max, _, _, _, _) = residual_pass(&spec, target, &grid.refined())?;
    let ratio = if fine_max > 1e-14 { Some(max_abs / fine_max) } else { None };
    ResidualReport {
        max_abs,
        l2,
        grid_spacing: h,
        refinement_ratio: ratio,
        coarse_grid_warning: coarse,
        boundary_mass_warning: boundary,
    }
    .validate()
}

/// Fokker-Planck current residual. The current
/// `J = sum_k div_P(Y_k) Y_k / 2 - X` is evaluated pointwise from the noise
/// Jacobians and the analytic gradients. For reversible specs
/// (`reversible = true`: zero bracket, no obstruction) the current itself
/// must vanish and its pointwise norm is reported; otherwise the report
/// carries the grid `div_P` of the sampled current.
pub fn current_residual(
    spec: &DiffusionSpec,
    target: &TargetDensity,
    grid: &GridSpec,
    reversible: bool,
) -> Result<ResidualReport> {
    let spec = spec.to_stratonovich();
    let report_on = |gridspec: &GridSpec| -> Result<(f64, f64, f64)> {
        let grid = GridData::build(gridspec);
        let len = grid.len();
        let n = grid.dim();
        let noise = spec.noise();

        let mut log_density = vec![0.0; len];
        let mut current = vec![vec![0.0; n]; len];
        for flat in 0..len {
            let x = grid.point(flat);
            log_density[flat] = target.log_reference(&x) - target.potential(&x);
            let drift = spec.drift(&x);
            let grad_rho = target.grad_log_reference(&x);
            let grad_h = target.grad_potential(&x);
            let mut j = vec![0.0; n];
            for k in 0..noise.num_fields() {
                let y = noise.field(k, &x);
                let div_p = noise.div_mu(k, &x, &grad_rho)
                    - y.iter().zip(&grad_h).map(|(a, b)| a * b).sum::<f64>();
                for i in 0..n {
                    j[i] += 0.5 * div_p * y[i];
                }
            }
            for i in 0..n {
                current[flat][i] = j[i] - drift[i];
            }
        }

        let mut max_abs: f64 = 0.0;
        let mut sum_sq = 0.0;
        let mut count = 0usize;
        for flat in 0..len {
            if !grid.is_evaluation_node(flat) {
                continue;
            }
            let value = if reversible {
                current[flat].iter().map(|c| c * c).sum::<f64>().sqrt()
            } else {
                let mut div_p = 0.0;
                let mut ok = true;
                for axis in 0..n {
                    match (
                        central_component(&grid, &current, flat, axis, axis),
                        grid.central(&log_density, flat, axis),
                    ) {
                        (Some(d), Some(dlp)) => div_p += d + current[flat][axis] * dlp,
                        _ => {
                            ok = false;
                            break;
                        }
                    }
                }
                if !ok {
                    continue;
                }
                div_p
            };
            max_abs = max_abs.max(value.abs());
            sum_sq += value * value;
            count += 1;
        }
        if count == 0 {
            return Err(Error::InvalidInput("grid too small: no interior evaluation nodes".into()));
        }
        Ok((
            max_abs,
            (sum_sq / count as f64).sqrt(),
            grid.spacing.iter().cloned().fold(0.0, f64::max),
        ))
    };

    let (max_abs, l2, h) = report_on(grid)?;
    let (fine_max, _, _) = report_on(&grid.refined())?;
    let ratio = if fine_max > 1e-14 { Some(max_abs / fine_max) } else { None };
    ResidualReport {
        max_abs,
        l2,
        grid_spacing: h,
        refinement_ratio: ratio,
        coarse_grid_warning: false,
        boundary_mass_warning: false,
    }
    .validate()
}

/// Drift with one recipe term deleted, for falsification runs: the harness
/// must flag every such mutant.
pub fn mutant_recipe_drift(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    deleted: RecipeTerm,
) -> VectorField {
    let bracket = bracket.clone();
    let noise = noise.clone();
    let target = target.clone();
    Arc::new(move |x: &[f64]| {
        let terms = euclidean_recipe_terms(&bracket, &noise, &target, x)
            .expect("mutant drift dimension mismatch");
        let mut out = vec![0.0; x.len()];
        for (term, values) in RECIPE_TERMS.iter().zip(&terms) {
            if *term == deleted {
                continue;
            }
            out.iter_mut().zip(values).for_each(|(a, b)| *a += b);
        }
        out
    })
}

/// Whether a recipe term contributes anything on a probe set; deleting an
/// identically-zero term is undetectable and skipped by the harness.
pub fn recipe_term_is_active(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    term: RecipeTerm,
    probes: &[Vec<f64>],
) -> bool {
    let index = RECIPE_TERMS.iter().position(|t| *t == term).unwrap();
    probes.iter().any(|x| {
        euclidean_recipe_terms(bracket, noise, target, x)
            .map(|terms| terms[index].iter().any(|v| v.abs() > 1e-12))
            .unwrap_or(false)
    })
}

/// Maximum `|det(J) - 1|` of the finite-difference Jacobian of a
/// deterministic map over the probe points. The step is
/// `1e-6 (1 + |coordinate|)` per coordinate.
pub fn volume_jacobian_check(
    map: &dyn Fn(&[f64]) -> Vec<f64>,
    points: &[Vec<f64>],
    fd_step: f64,
) -> f64 {
    let mut worst: f64 = 0.0;
    for x in points {
        let n = x.len();
        let mut jac = DMatrix::<f64>::zeros(n, n);
        let mut xp = x.clone();
        for j in 0..n {
            let h = fd_step * (1.0 + x[j].abs());
            xp[j] = x[j] + h;
            let fp = map(&xp);
            xp[j] = x[j] - h;
            let fm = map(&xp);
            xp[j] = x[j];
            for i in 0..n {
                jac[(i, j)] = (fp[i] - fm[i]) / (2.0 * h);
            }
        }
        worst = worst.max((jac.determinant() - 1.0).abs());
    }
    worst
}

/// Chart coordinates of one Lie leapfrog trajectory around a base phase
/// point, as a plain map on `R^{2 n_g}` for Jacobian checks: the group factor
/// is written `g0 exp(sum u_i xi_i)` and the output is expressed in the same
/// chart around the trajectory of the base point.
pub fn lie_leapfrog_chart_map<'a>(
    group: &'a crate::geometry::MatrixLieGroup,
    potential: &crate::integrators::LiePotential,
    g0: &crate::geometry::CMat,
    v0: &[f64],
    eps: f64,
    n_steps: usize,
) -> Result<impl Fn(&[f64]) -> Vec<f64> + 'a> {
    let dim = group.algebra_dim();
    let (g_base, v_base, _) =
        crate::integrators::lie_leapfrog_trajectory(group, potential, g0, v0, eps, n_steps)?;
    let g0 = g0.clone();
    let v0 = v0.to_vec();
    let potential = potential.clone();
    let g_base_inv = g_base.adjoint();
    Ok(move |u: &[f64]| -> Vec<f64> {
        let w = &u[..dim];
        let dv = &u[dim..];
        let g_in = &g0 * group.lie_exp(w).expect("chart coefficients");
        let v_in: Vec<f64> = v0.iter().zip(dv).map(|(a, b)| a + b).collect();
        let (g_out, v_out, _) =
            crate::integrators::lie_leapfrog_trajectory(group, &potential, &g_in, &v_in, eps, n_steps)
                .expect("leapfrog inside chart map");
        let rel = &g_base_inv * g_out;
        let log = crate::geometry::log_near_identity(&rel);
        let mut out = group.coefficients_of(&log);
        out.extend(v_out.iter().zip(&v_base).map(|(a, b)| a - b));
        out
    })
}
