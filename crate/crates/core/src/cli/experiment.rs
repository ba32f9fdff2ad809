//! Experiment orchestration: build the configured pieces, run chains and
//! verification cases, and write `chain.csv`, `report.json`, and
//! `verify.json`. All computation happens before any file is written, so a
//! failure never leaves partial outputs behind.

use super::config::{ExperimentConfig, GeometryKind, RecipeConfig, SamplerBlock, VerifyBlock};
use super::output::{chain_csv, write_json, write_text};
use crate::diagnostics::{
    self, chain_positions, moment_report, HistogramGrid, MomentReport, KL_SMOOTHING_ALPHA,
};
use crate::error::{ConfigError, Error, Result};
use crate::geometry::{
    EmbeddedSphere, EuclideanSpace, FlatTorus, Geometry, GroupFlavor, MatrixLieGroup,
};
use crate::oracles;
use crate::recipe::{builtins, ito_spec, stratonovich_spec, DiffusionSpec, TargetDensity};
use crate::samplers::{
    run_chains, Chain, LieLangevinSampler, MalaSampler, Sampler, SamplerConfig,
    SphereLangevinSampler, UnderdampedLangevin,
};
use crate::verify::{
    current_residual, fokker_planck_residual, kl_decay_trace, BoundaryPolicy, GaussianState,
    GridSpec, LinearSde, ResidualReport,
};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize)]
pub struct EssEntry {
    pub observable: String,
    pub ess: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct KlEntry {
    /// `histogram` (chain prefixes) or `gaussian_flow` (exact linear flow).
    pub kind: String,
    /// Samples consumed for histogram entries, time for flow entries.
    pub t: f64,
    pub kl: f64,
    pub smoothing_alpha: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualCase {
    pub case: String,
    pub tolerance: f64,
    pub pass: bool,
    #[serde(flatten)]
    pub report: ResidualReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportMeta {
    pub geometry: String,
    pub sampler: Option<String>,
    pub seed: u64,
    pub n_chains: usize,
    pub acceptance_rates: Vec<f64>,
    pub biased: bool,
    pub chain_files: Vec<String>,
    pub verify_file: Option<String>,
    pub noise_linear_dependence_warning: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub meta: ReportMeta,
    pub moments: Vec<MomentReport>,
    pub ess: Vec<EssEntry>,
    pub kl_trace: Vec<KlEntry>,
    pub residuals: Vec<ResidualCase>,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyFile {
    pub seed: u64,
    pub cases: Vec<ResidualCase>,
    pub all_passed: bool,
}

#[derive(Debug)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub verify_failed: bool,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config(vec![ConfigError { path: path.into(), message: message.into(), line: None }])
}

fn build_geometry(config: &ExperimentConfig) -> Result<Geometry> {
    Ok(match config.geometry.kind {
        GeometryKind::Euclidean => Geometry::Euclidean(EuclideanSpace::new(config.geometry.dim)?),
        GeometryKind::Torus => Geometry::Torus(FlatTorus::new(config.geometry.periods.clone())?),
        GeometryKind::So3 => Geometry::LieGroup(MatrixLieGroup::so(3)?),
        GeometryKind::Sun => Geometry::LieGroup(MatrixLieGroup::su(config.geometry.dim)?),
        GeometryKind::Sphere => Geometry::Sphere(EmbeddedSphere::new(config.geometry.dim)?),
    })
}

pub(super) fn build_chart_target(config: &ExperimentConfig, geometry: &Geometry) -> Result<TargetDensity> {
    let t = &config.target;
    match geometry {
        Geometry::Torus(torus) => match t.name.as_str() {
            "torus_cosine" => builtins::torus_target(torus, t.beta, &t.params),
            "uniform" => builtins::target("uniform", torus.dim(), t.beta, &t.params),
            other => Err(config_error(
                "target.name",
                format!("`{other}` is not a torus target (torus_cosine, uniform)"),
            )),
        },
        Geometry::Euclidean(space) => builtins::target(&t.name, space.dim(), t.beta, &t.params),
        _ => Err(config_error("target.name", "chart target requested on a structured geometry")),
    }
}

fn assemble_spec(
    config: &ExperimentConfig,
    geometry: &Geometry,
    target: &TargetDensity,
) -> Result<(DiffusionSpec, bool)> {
    let recipe: &RecipeConfig = &config.recipe;
    let dim = target.dim();
    let bracket = builtins::bracket(&recipe.bracket, dim, &recipe.bracket_params)?;
    let noise = builtins::noise(&recipe.noise, dim, &recipe.noise_params)?;
    let reversible = recipe.bracket == "none" && recipe.obstruction.is_none();
    let spec = match recipe.form.as_str() {
        "stratonovich" => stratonovich_spec(
            geometry.clone(),
            &bracket,
            &noise,
            target,
            recipe.obstruction.clone(),
        )?,
        _ => ito_spec(geometry.clone(), &bracket, &noise, target, recipe.obstruction.clone())?,
    };
    Ok((spec, reversible))
}

fn default_bounds(geometry: &Geometry, dim: usize) -> Vec<(f64, f64)> {
    match geometry {
        Geometry::Torus(t) => t.periods().iter().map(|&p| (0.0, p)).collect(),
        _ => vec![(-6.0, 6.0); dim],
    }
}

fn run_verification(
    config: &ExperimentConfig,
    geometry: &Geometry,
    block: &VerifyBlock,
) -> Result<Vec<ResidualCase>> {
    let target = build_chart_target(config, geometry)?;
    let (spec, reversible) = assemble_spec(config, geometry, &target)?;
    let dim = target.dim();
    let bounds = block.bounds.clone().unwrap_or_else(|| default_bounds(geometry, dim));
    if bounds.len() != dim {
        return Err(config_error("verify.bounds", "one [lo, hi] pair per dimension"));
    }
    let policy = match geometry {
        Geometry::Torus(_) => BoundaryPolicy::Periodic,
        _ => BoundaryPolicy::TruncateInterior,
    };
    let grid = GridSpec::new(bounds, block.grid_points, policy)?;

    let mut cases = Vec::new();
    if block.fokker_planck {
        let report = fokker_planck_residual(&spec, &target, &grid)?;
        cases.push(ResidualCase {
            case: "fokker_planck".into(),
            tolerance: block.max_residual,
            pass: report.max_abs <= block.max_residual,
            report,
        });
    }
    if block.current {
        let report = current_residual(&spec, &target, &grid, reversible)?;
        let tolerance = if reversible { 1e-6 } else { block.max_residual };
        cases.push(ResidualCase {
            case: if reversible { "current".into() } else { "current_divergence".into() },
            tolerance,
            pass: report.max_abs <= tolerance,
            report,
        });
    }
    Ok(cases)
}

fn kl_flow_trace(config: &ExperimentConfig) -> Result<Vec<KlEntry>> {
    // exact Gaussian flow: only linear drift with constant noise qualifiesa
    let recipe = &config.recipe;
    if config.target.name != "gaussian" || recipe.bracket != "none" || recipe.noise != "additive" {
        return Err(config_error(
            "verify.kl_decay",
            "the exact KL trace needs a gaussian target, no bracket, and additive noise \
             (use the histogram diagnostic otherwise)",
        ));
    }
    let dim = config.geometry.dim;
    let beta = config.target.beta;
    let variances: Vec<f64> = match config.target.params.len() {
        0 => vec![1.0; dim],
        1 => vec![config.target.params[0]; dim],
        _ => config.target.params.clone(),
    };
    let c = recipe.noise_params.first().copied().unwrap_or(1.0);
    // drift -D grad(beta H) = -(c beta / s_i^2) x_i, noise covariance 2c
    let b = DMatrix::from_diagonal(&DVector::from_iterator(
        dim,
        variances.iter().map(|s2| -c * beta / s2),
    ));
    let q = DMatrix::<f64>::identity(dim, dim) * (2.0 * c);
    let target_cov =
        DMatrix::from_diagonal(&DVector::from_iterator(dim, variances.iter().map(|s2| s2 / beta)));
    let process = LinearSde::new(b, q, GaussianState::new(DVector::zeros(dim), target_cov)?)?;
    let initial = GaussianState::new(
        DVector::from_element(dim, 2.0),
        DMatrix::identity(dim, dim) * 0.25,
    )?;
    let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
    let trace = kl_decay_trace(&process, &initial, &times)?;
    Ok(trace
        .into_iter()
        .map(|(t, kl)| KlEntry { kind: "gaussian_flow".into(), t, kl, smoothing_alpha: None })
        .collect())
}

struct SamplerBundle {
    sampler: Sampler,
    flavor: Option<GroupFlavor>,
}

fn build_sampler(
    config: &ExperimentConfig,
    geometry: &Geometry,
    block: &SamplerBlock,
) -> Result<SamplerBundle> {
    let bundle = match (block.kind.as_str(), geometry) {
        ("mala", Geometry::Euclidean(_)) => {
            let target = build_chart_target(config, geometry)?;
            SamplerBundle {
                sampler: Sampler::Mala { sampler: MalaSampler::identity(target)? },
                flavor: None,
            }
        }
        ("underdamped", Geometry::Euclidean(space)) => {
            let target = build_chart_target(config, geometry)?;
            let n = space.dim();
            let mass = DMatrix::<f64>::identity(n, n) * block.mass;
            let friction = DMatrix::<f64>::identity(n, n) * block.friction;
            SamplerBundle {
                sampler: Sampler::Underdamped {
                    sampler: UnderdampedLangevin::new(target, mass, friction)?,
                },
                flavor: None,
            }
        }
        ("ilmcmc_lie", Geometry::LieGroup(group)) => {
            // beta folds into the potential; the kinetic form and the
            // momentum-refresh kernel stay as printed
            let potential =
                super::integrate::lie_potential_from_config(config, group.matrix_dim())?;
            SamplerBundle {
                sampler: Sampler::LieLangevin {
                    sampler: LieLangevinSampler::new(group.clone(), potential),
                },
                flavor: Some(group.flavor()),
            }
        }
        ("ilmcmc_sphere", Geometry::Sphere(sphere)) => {
            let potential =
                super::integrate::sphere_potential_from_config(config, sphere.ambient_dim())?;
            SamplerBundle {
                sampler: Sampler::SphereLangevin {
                    sampler: SphereLangevinSampler::new(sphere.clone(), potential),
                },
                flavor: None,
            }
        }
        (kind, g) => {
            return Err(config_error(
                "sampler.kind",
                format!("sampler `{kind}` does not run on geometry `{}`", g.name()),
            ))
        }
    };
    Ok(bundle)
}

fn double_well_second_moment(beta: f64, a: f64) -> f64 {
    let w = |x: f64| (-beta * (x * x - a).powi(2)).exp();
    let lim = 3.0 + a.abs().sqrt() * 2.0;
    let num = oracles::simpson(&|x| x * x * w(x), -lim, lim, 4000);
    let den = oracles::simpson(&w, -lim, lim, 4000);
    num / den
}

fn chain_moments(
    config: &ExperimentConfig,
    block: &SamplerBlock,
    chain: &Chain,
) -> Result<(Vec<MomentReport>, Vec<EssEntry>)> {
    let mut observables: Vec<(String, diagnostics::Observable, Option<(f64, &str)>)> = Vec::new();
    let beta = config.target.beta;
    match (block.kind.as_str(), config.target.name.as_str()) {
        ("mala" | "underdamped", "gaussian") => {
            let dim = config.geometry.dim;
            let vars: Vec<f64> = match config.target.params.len() {
                0 => vec![1.0; dim],
                1 => vec![config.target.params[0]; dim],
                _ => config.target.params.clone(),
            };
            for i in 0..dim {
                observables.push((format!("x{i}"), diagnostics::coordinate(i), Some((0.0, "closed_form"))));
                observables.push((
                    format!("x{i}^2"),
                    diagnostics::coordinate_squared(i),
                    Some((vars[i] / beta, "closed_form")),
                ));
            }
        }
        ("mala" | "underdamped", "double_well") => {
            let dim = config.geometry.dim;
            let a = config.target.params.first().copied().unwrap_or(1.0);
            observables.push(("x0".into(), diagnostics::coordinate(0), Some((0.0, "closed_form"))));
            observables.push((
                "x0^2".into(),
                diagnostics::coordinate_squared(0),
                Some((double_well_second_moment(beta, a), "quadrature")),
            ));
            for i in 1..dim {
                observables.push((format!("x{i}"), diagnostics::coordinate(i), Some((0.0, "closed_form"))));
                observables.push((
                    format!("x{i}^2"),
                    diagnostics::coordinate_squared(i),
                    Some((1.0 / beta, "closed_form")),
                ));
            }
        }
        ("mala" | "underdamped", _) => {
            for i in 0..config.geometry.dim {
                observables.push((format!("x{i}"), diagnostics::coordinate(i), None));
            }
        }
        ("ilmcmc_lie", "uniform") => {
            observables.push(("tr(g)".into(), diagnostics::group_trace(), Some((0.0, "closed_form"))));
        }
        ("ilmcmc_lie", "trace") => {
            let scale = config.target.params.first().copied().unwrap_or(1.0);
            let oracle = if config.geometry.kind == GeometryKind::So3 {
                Some((oracles::so3_trace_mean_euler_quadrature(scale * beta, 48), "quadrature"))
            } else {
                None
            };
            observables.push(("tr(g)".into(), diagnostics::group_trace(), oracle));
        }
        ("ilmcmc_sphere", "uniform") => {
            let k = config.geometry.dim;
            for i in 0..k {
                observables.push((format!("q{i}"), diagnostics::coordinate(i), Some((0.0, "closed_form"))));
                observables.push((
                    format!("q{i}^2"),
                    diagnostics::coordinate_squared(i),
                    Some((oracles::uniform_sphere_second_moment(k), "closed_form")),
                ));
            }
        }
        ("ilmcmc_sphere", "linear_height") => {
            let k = config.geometry.dim;
            let kappa = config.target.params.first().copied().unwrap_or(1.0) * beta;
            let axis = k - 1;
            for i in 0..k - 1 {
                observables.push((format!("q{i}"), diagnostics::coordinate(i), Some((0.0, "closed_form"))));
            }
            observables.push((
                format!("q{axis}"),
                diagnostics::coordinate(axis),
                Some((oracles::sphere_axis_mean_quadrature(kappa, k, 4000), "quadrature")),
            ));
        }
        _ => {}
    }
    if block.kind == "underdamped" {
        for i in 0..config.geometry.dim {
            observables.push((
                format!("p{i}^2"),
                diagnostics::momentum_squared(i),
                Some((block.mass, "closed_form")),
            ));
        }
    }

    let mut moments = Vec::new();
    let mut ess = Vec::new();
    for (name, obs, oracle) in observables {
        moments.push(moment_report(chain, &obs, &name, oracle)?);
        ess.push(EssEntry {
            observable: name,
            ess: diagnostics::effective_sample_size(chain, &obs)?,
            n_samples: chain.samples.len(),
        });
    }
    Ok((moments, ess))
}

fn chain_histogram_kl(config: &ExperimentConfig, chain: &Chain) -> Result<Vec<KlEntry>> {
    let dim = config.geometry.dim;
    if dim > 2 || !matches!(config.target.name.as_str(), "gaussian" | "double_well") {
        return Ok(Vec::new());
    }
    let geometry = build_geometry(config)?;
    let target = build_chart_target(config, &geometry)?;
    let grid = HistogramGrid::new(vec![(-6.0, 6.0); dim], vec![40; dim])?;
    let masses = grid.target_masses(&|x| target.density(x), 8);
    let positions = chain_positions(chain);
    let trace = diagnostics::histogram_kl(&positions, &masses, &grid, 10)?;
    Ok(trace
        .into_iter()
        .map(|(n, kl)| KlEntry {
            kind: "histogram".into(),
            t: n as f64,
            kl,
            smoothing_alpha: Some(KL_SMOOTHING_ALPHA),
        })
        .collect())
}

/// Run the configured experiment into `out_dir`. With `verify_only`, the
/// sampler block is ignored. Returns the files written and whether any
/// verification case failed its tolerance.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_dir: &Path,
    seed_override: Option<u64>,
    verify_only: bool,
) -> Result<RunOutcome> {
    let seed = seed_override.or(config.seed).ok_or_else(|| {
        config_error("seed", "a seed is required (config key `seed` or flag --seed); it is never randomized")
    })?;
    let geometry = build_geometry(config)?;

    if verify_only && config.verify.is_none() {
        return Err(config_error("verify", "verify-only run needs a [verify] block"));
    }

    // ---- compute everything up front ----
    let mut chains: Vec<Chain> = Vec::new();
    let mut flavor = None;
    let mut moments = Vec::new();
    let mut ess = Vec::new();
    let mut kl_trace: Vec<KlEntry> = Vec::new();
    let mut noise_dependence_warning = false;

    if let (Some(block), false) = (&config.sampler, verify_only) {
        let bundle = build_sampler(config, &geometry, block)?;
        flavor = bundle.flavor;
        let sampler_config = SamplerConfig {
            n_iterations: block.n_iterations,
            burn_in: block.burn_in,
            dt: block.dt,
            n_leapfrog: block.n_leapfrog,
            ou_time: block.ou_time,
            thinning: block.thinning,
        };
        let initial = bundle.sampler.default_initial();
        chains = run_chains(&bundle.sampler, initial, &sampler_config, seed, block.n_chains)?;
        let (m, e) = chain_moments(config, block, &chains[0])?;
        moments = m;
        ess = e;
        if matches!(geometry, Geometry::Euclidean(_)) && block.kind == "mala" {
            kl_trace.extend(chain_histogram_kl(config, &chains[0])?);
        }
    }

    let mut trajectory: Option<(Chain, Option<GroupFlavor>)> = None;
    if let (Some(block), false) = (&config.integrate, verify_only) {
        trajectory = Some(super::integrate::run_trajectory(config, block, &geometry, seed)?);
    }

    let mut verify_cases = Vec::new();
    if let Some(block) = &config.verify {
        // report pointwise linear dependence of the noise fields (advisory)
        let target = build_chart_target(config, &geometry)?;
        let noise =
            builtins::noise(&config.recipe.noise, target.dim(), &config.recipe.noise_params)?;
        if noise.num_fields() > 0 {
            noise_dependence_warning = noise.min_singular_value(&vec![0.5; target.dim()]) < 1e-10;
        }
        verify_cases = run_verification(config, &geometry, block)?;
        if block.kl_decay {
            kl_trace.extend(kl_flow_trace(config)?);
        }
    }
    let verify_failed = verify_cases.iter().any(|c| !c.pass);

    // ---- write files ----
    std::fs::create_dir_all(out_dir).map_err(|source| Error::Io {
        path: out_dir.display().to_string(),
        source,
    })?;
    let mut written: Vec<PathBuf> = Vec::new();
    let cleanup = |written: &[PathBuf]| {
        for f in written {
            let _ = std::fs::remove_file(f);
        }
    };

    let mut chain_files = Vec::new();
    for (i, chain) in chains.iter().enumerate() {
        let name = if i == 0 { "chain.csv".to_string() } else { format!("chain_{i:02}.csv") };
        let path = out_dir.join(&name);
        if let Err(e) = write_text(&path, &chain_csv(chain, flavor)) {
            cleanup(&written);
            return Err(e);
        }
        written.push(path);
        chain_files.push(name);
    }

    if let Some((chain, traj_flavor)) = &trajectory {
        let path = out_dir.join("trajectory.csv");
        if let Err(e) = write_text(&path, &chain_csv(chain, *traj_flavor)) {
            cleanup(&written);
            return Err(e);
        }
        written.push(path);
        chain_files.push("trajectory.csv".to_string());
    }

    let verify_file = if config.verify.is_some() {
        let path = out_dir.join("verify.json");
        let body = VerifyFile { seed, cases: verify_cases.clone(), all_passed: !verify_failed };
        if let Err(e) = write_json(&path, &body) {
            cleanup(&written);
            return Err(e);
        }
        written.push(path);
        Some("verify.json".to_string())
    } else {
        None
    };

    let report = Report {
        meta: ReportMeta {
            geometry: config.geometry.kind.name().to_string(),
            sampler: config.sampler.as_ref().filter(|_| !verify_only).map(|b| b.kind.clone()),
            seed,
            n_chains: chains.len(),
            acceptance_rates: chains.iter().map(|c| c.acceptance_rate()).collect(),
            biased: chains.first().map(|c| c.meta.biased).unwrap_or(false),
            chain_files,
            verify_file,
            noise_linear_dependence_warning: noise_dependence_warning,
        },
        moments,
        ess,
        kl_trace,
        residuals: verify_cases,
    };
    let report_path = out_dir.join("report.json");
    if let Err(e) = write_json(&report_path, &report) {
        cleanup(&written);
        return Err(e);
    }
    written.push(report_path);

    Ok(RunOutcome { files: written, verify_failed })
}
