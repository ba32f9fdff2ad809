//! Unadjusted trajectory runs of a single integrator, selected by the
//! `[integrate]` config block. The trajectory is recorded step by step into
//! `trajectory.csv` with the same column conventions as chains; there is no
//! correction step, so the output is tagged biased.

use super::config::{ExperimentConfig, IntegrateBlock};
use super::experiment::build_chart_target;
use crate::error::{ConfigError, Error, Result};
use crate::geometry::{Geometry, GroupFlavor};
use crate::integrators::{
    euler_maruyama_step, geodesic_splitting_step, lie_energy, lie_leapfrog_trajectory,
    ou_exact_step, sphere_energy, stratonovich_heun_step, LiePotential, SpherePotential,
};
use crate::recipe::{ito_spec, stratonovich_spec};
use crate::samplers::{step_rng, standard_normals, Chain, ChainMeta, ChainState, SamplerConfig};

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config(vec![ConfigError { path: path.into(), message: message.into(), line: None }])
}

pub(super) fn lie_potential_from_config(
    config: &ExperimentConfig,
    n: usize,
) -> Result<LiePotential> {
    let beta = config.target.beta;
    let scale = config.target.params.first().copied().unwrap_or(1.0);
    match config.target.name.as_str() {
        "uniform" => Ok(LiePotential::zero(n)),
        "trace" => {
            Ok(LiePotential::trace_real(nalgebra::DMatrix::identity(n, n) * (scale * beta)))
        }
        other => Err(config_error(
            "target.name",
            format!("`{other}` is not a Lie-group target (uniform, trace)"),
        )),
    }
}

pub(super) fn sphere_potential_from_config(
    config: &ExperimentConfig,
    ambient_dim: usize,
) -> Result<SpherePotential> {
    let beta = config.target.beta;
    let kappa = config.target.params.first().copied().unwrap_or(1.0);
    match config.target.name.as_str() {
        "uniform" => Ok(SpherePotential::zero(ambient_dim)),
        "linear_height" => Ok(SpherePotential::linear_height(ambient_dim - 1, kappa * beta)),
        other => Err(config_error(
            "target.name",
            format!("`{other}` is not a sphere target (uniform, linear_height)"),
        )),
    }
}

/// Run the configured integrator for `n_steps` and package the trajectory as
/// an unadjusted chain (every step recorded, `accepted = 1`, `delta_H` the
/// per-step energy change where an energy exists).
pub fn run_trajectory(
    config: &ExperimentConfig,
    block: &IntegrateBlock,
    geometry: &Geometry,
    seed: u64,
) -> Result<(Chain, Option<GroupFlavor>)> {
    let mut samples = Vec::with_capacity(block.n_steps);
    let mut deltas = Vec::with_capacity(block.n_steps);
    let mut flavor = None;

    match (block.integrator.as_str(), geometry) {
        ("em" | "heun", Geometry::Euclidean(_) | Geometry::Torus(_)) => {
            let target = build_chart_target(config, geometry)?;
            let recipe = &config.recipe;
            let bracket =
                crate::recipe::builtins::bracket(&recipe.bracket, target.dim(), &recipe.bracket_params)?;
            let noise =
                crate::recipe::builtins::noise(&recipe.noise, target.dim(), &recipe.noise_params)?;
            let spec = if block.integrator == "em" {
                ito_spec(geometry.clone(), &bracket, &noise, &target, recipe.obstruction.clone())?
            } else {
                stratonovich_spec(
                    geometry.clone(),
                    &bracket,
                    &noise,
                    &target,
                    recipe.obstruction.clone(),
                )?
            };
            let mut x = vec![0.0; target.dim()];
            if let Geometry::Torus(t) = geometry {
                x = t.wrap(&x);
            }
            for i in 0..block.n_steps {
                let mut rng = step_rng(seed, 0, i as u64);
                let z = standard_normals(&mut rng, spec.noise().num_fields());
                let step = if block.integrator == "em" {
                    euler_maruyama_step(&spec, &x, block.dt, &z)?
                } else {
                    stratonovich_heun_step(&spec, &x, block.dt, &z)?
                };
                x = step.state;
                samples.push(ChainState::Chart(x.clone()));
                deltas.push(0.0);
            }
        }
        ("ou_exact", _) => {
            let dim = match geometry {
                Geometry::LieGroup(g) => g.algebra_dim(),
                Geometry::Sphere(s) => s.ambient_dim(),
                Geometry::Euclidean(e) => e.dim(),
                Geometry::Torus(t) => t.dim(),
            };
            let mut v = vec![0.0; dim];
            for i in 0..block.n_steps {
                let mut rng = step_rng(seed, 0, i as u64);
                let z = standard_normals(&mut rng, dim);
                v = ou_exact_step(&v, block.dt, &z)?;
                samples.push(ChainState::Chart(v.clone()));
                deltas.push(0.0);
            }
        }
        ("lie_leapfrog", Geometry::LieGroup(group)) => {
            flavor = Some(group.flavor());
            let potential = lie_potential_from_config(config, group.matrix_dim())?;
            let mut g = group.identity();
            let mut rng = step_rng(seed, 0, 0);
            let mut v = standard_normals(&mut rng, group.algebra_dim());
            let mut energy = lie_energy(group, &potential, &g, &v);
            for _ in 0..block.n_steps {
                let (g2, v2, _) =
                    lie_leapfrog_trajectory(group, &potential, &g, &v, block.dt, 1)?;
                g = g2;
                v = v2;
                let e = lie_energy(group, &potential, &g, &v);
                deltas.push(e - energy);
                energy = e;
                samples.push(ChainState::Lie { g: g.clone(), v: v.clone() });
            }
        }
        ("geodesic", Geometry::Sphere(sphere)) => {
            let potential = sphere_potential_from_config(config, sphere.ambient_dim())?;
            let mut q = sphere.north_pole();
            let mut rng = step_rng(seed, 0, 0);
            let ambient = standard_normals(&mut rng, sphere.ambient_dim());
            let mut v = sphere.project_horizontal(&q, &ambient)?;
            let mut energy = sphere_energy(&potential, &q, &v);
            for _ in 0..block.n_steps {
                let (q2, v2) = geodesic_splitting_step(sphere, &potential, &q, &v, block.dt)?;
                q = q2;
                v = v2;
                let e = sphere_energy(&potential, &q, &v);
                deltas.push(e - energy);
                energy = e;
                samples.push(ChainState::Sphere { q: q.clone(), v: v.clone() });
            }
        }
        (name, g) => {
            return Err(config_error(
                "integrate.integrator",
                format!("integrator `{name}` does not run on geometry `{}`", g.name()),
            ))
        }
    }

    let n = deltas.len();
    let chain = Chain {
        samples,
        accept_flags: vec![true; n],
        energy_errors: deltas,
        seed,
        meta: ChainMeta {
            sampler: format!("integrator:{}", block.integrator),
            chain_id: 0,
            config: SamplerConfig {
                n_iterations: n,
                burn_in: 0,
                dt: block.dt,
                n_leapfrog: 1,
                ou_time: block.dt,
                thinning: 1,
            },
            biased: true,
            non_finite_energies: 0,
        },
    };
    Ok((chain, flavor))
}
