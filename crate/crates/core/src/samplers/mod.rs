//! Complete MCMC samplers assembled from the integrators: MALA on Euclidean
//! charts, the irreversible Langevin samplers (OU refresh + leapfrog + MH
//! with momentum flip) on matrix Lie groups and embedded spheres, and the
//! unadjusted underdamped Langevin trajectory.

mod rng;
mod underdamped;

pub use rng::{standard_normals, step_rng, uniform};
pub use underdamped::UnderdampedLangevin;

use crate::error::{Error, Result};
use crate::geometry::{CMat, EmbeddedSphere, MatrixLieGroup};
use crate::integrators::{
    geodesic_splitting_step, lie_energy, lie_leapfrog_trajectory, ou_exact_step, sphere_energy,
    LiePotential, SpherePotential,
};
use crate::recipe::TargetDensity;
use nalgebra::{Cholesky, DMatrix, Dyn};
use rand_chacha::ChaCha8Rng;

/// Iteration counts and step sizes shared by all samplers. `dt` doubles as
/// the leapfrog/geodesic step size and `ou_time` is the momentum-refresh
/// time of the fiber OU process.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    pub n_iterations: usize,
    pub burn_in: usize,
    pub dt: f64,
    pub n_leapfrog: usize,
    pub ou_time: f64,
    pub thinning: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self { n_iterations: 1000, burn_in: 100, dt: 0.1, n_leapfrog: 10, ou_time: 0.5, thinning: 1 }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !(self.ou_time > 0.0) {
            return Err(Error::InvalidInput("dt and ou_time must be positive".into()));
        }
        if self.n_leapfrog == 0 || self.thinning == 0 {
            return Err(Error::InvalidInput("n_leapfrog and thinning must be positive".into()));
        }
        if self.n_iterations == 0 {
            if self.burn_in != 0 {
                return Err(Error::InvalidInput("burn_in must be 0 when n_iterations is 0".into()));
            }
        } else if self.burn_in >= self.n_iterations {
            return Err(Error::InvalidInput(format!(
                "burn_in ({}) must be smaller than n_iterations ({})",
                self.burn_in, self.n_iterations
            )));
        }
        Ok(())
    }
}

/// State of a chain, by geometry.
#[derive(Debug, Clone, PartialEq)]
pub enum ChainState {
    /// Position on a Euclidean or torus chart.
    Chart(Vec<f64>),
    /// Group element and algebra velocity.
    Lie { g: CMat, v: Vec<f64> },
    /// Sphere point and tangent velocity.
    Sphere { q: Vec<f64>, v: Vec<f64> },
    /// Phase-space point of the underdamped process.
    Phase { q: Vec<f64>, p: Vec<f64> },
}

#[derive(Debug, Clone)]
pub struct ChainMeta {
    pub sampler: String,
    pub chain_id: u64,
    pub config: SamplerConfig,
    /// Set on unadjusted (uncorrected) trajectories.
    pub biased: bool,
    pub non_finite_energies: usize,
}

/// Ordered samples with per-proposal acceptance and energy metadata, plus the
/// seed that produced them. Rerunning with the same seed is bit-identical.
#[derive(Debug, Clone)]
pub struct Chain {
    pub samples: Vec<ChainState>,
    pub accept_flags: Vec<bool>,
    pub energy_errors: Vec<f64>,
    pub seed: u64,
    pub meta: ChainMeta,
}

impl Chain {
    pub fn acceptance_rate(&self) -> f64 {
        if self.accept_flags.is_empty() {
            return 1.0;
        }
        self.accept_flags.iter().filter(|&&a| a).count() as f64 / self.accept_flags.len() as f64
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Metropolis-Hastings acceptance: accept iff `u < min(1, exp(-delta_h))`.
/// A non-finite `delta_h` (NaN) rejects; the chain runner counts those
/// separately as a diagnostic.
pub fn mh_accept(delta_h: f64, u: f64) -> bool {
    debug_assert!((0.0..1.0).contains(&u));
    if delta_h.is_nan() {
        return false;
    }
    u < (-delta_h).exp().min(1.0)
}

/// One MALA proposal on a Euclidean chart with constant SPD preconditioner:
/// `y = x - D grad(H~) dt + sqrt(2 dt) L z` with `D = L L^T`, corrected by
/// the standard Gaussian proposal ratio.
pub struct MalaSampler {
    target: TargetDensity,
    chol: Cholesky<f64, Dyn>,
    precond: DMatrix<f64>,
}

impl MalaSampler {
    pub fn new(target: TargetDensity, preconditioner: DMatrix<f64>) -> Result<Self> {
        let n = target.dim();
        if preconditioner.nrows() != n || preconditioner.ncols() != n {
            return Err(Error::InvalidInput("preconditioner has wrong dimensions".into()));
        }
        if (preconditioner.clone() - preconditioner.transpose()).abs().max() > 1e-12 {
            return Err(Error::InvalidInput("preconditioner must be symmetric".into()));
        }
        let chol = Cholesky::new(preconditioner.clone())
            .ok_or_else(|| Error::InvalidInput("preconditioner must be positive definite".into()))?;
        Ok(Self { target, chol, precond: preconditioner })
    }

    pub fn identity(target: TargetDensity) -> Result<Self> {
        let n = target.dim();
        Self::new(target, DMatrix::identity(n, n))
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// `-log q(y | x)` up to the shared constant:
    /// `|| L^{-1} (y - x + D grad(H~)(x) dt) ||^2 / (4 dt)`.
    fn neg_log_proposal(&self, from: &[f64], to: &[f64], dt: f64) -> f64 {
        let grad = self.target.grad_potential(from);
        let n = from.len();
        let mut r = DMatrix::<f64>::zeros(n, 1);
        for i in 0..n {
            let mut dg = 0.0;
            for j in 0..n {
                dg += self.precond[(i, j)] * grad[j];
            }
            r[(i, 0)] = to[i] - from[i] + dg * dt;
        }
        self.chol.l().solve_lower_triangular(&r).map(|u| u.norm_squared() / (4.0 * dt)).unwrap_or(f64::INFINITY)
    }

    pub fn step(
        &self,
        x: &[f64],
        dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<(Vec<f64>, bool, f64)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        let n = x.len();
        let z = standard_normals(rng, n);
        let grad = self.target.grad_potential(x);
        let noise_scale = (2.0 * dt).sqrt();
        let lz = self.chol.l() * DMatrix::from_column_slice(n, 1, &z);
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut dg = 0.0;
            for j in 0..n {
                dg += self.precond[(i, j)] * grad[j];
            }
            y[i] = x[i] - dg * dt + noise_scale * lz[(i, 0)];
        }
        let delta = self.target.potential(&y) - self.target.potential(x)
            + self.neg_log_proposal(&y, x, dt)
            - self.neg_log_proposal(x, &y, dt);
        let u = uniform(rng);
        if mh_accept(delta, u) {
            Ok((y, true, delta))
        } else {
            Ok((x.to_vec(), false, delta))
        }
    }
}

/// The three-step irreversible Langevin sampler on a matrix Lie group:
/// exact OU refresh of the algebra velocity, `N` leapfrog steps, MH
/// correction with momentum flip on rejection.
pub struct LieLangevinSampler {
    pub group: MatrixLieGroup,
    pub potential: LiePotential,
}

impl LieLangevinSampler {
    pub fn new(group: MatrixLieGroup, potential: LiePotential) -> Self {
        Self { group, potential }
    }

    pub fn step(
        &self,
        g: &CMat,
        v: &[f64],
        config: &SamplerConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<((CMat, Vec<f64>), bool, f64)> {
        let z = standard_normals(rng, self.group.algebra_dim());
        let v_star = ou_exact_step(v, config.ou_time, &z)?;
        let (g_new, v_new, delta) = lie_leapfrog_trajectory(
            &self.group,
            &self.potential,
            g,
            &v_star,
            config.dt,
            config.n_leapfrog,
        )?;
        let u = uniform(rng);
        if mh_accept(delta, u) {
            Ok(((g_new, v_new), true, delta))
        } else {
            let flipped: Vec<f64> = v_star.iter().map(|x| -x).collect();
            Ok(((g.clone(), flipped), false, delta))
        }
    }

    pub fn energy(&self, g: &CMat, v: &[f64]) -> f64 {
        lie_energy(&self.group, &self.potential, g, v)
    }
}

/// Geodesic variant of the irreversible Langevin sampler on an embedded
/// sphere. The OU refresh draws an ambient standard normal and projects it;
/// projection commutes with the isotropic law, so the tangent-plane Gaussian
/// is preserved without building explicit frames.
pub struct SphereLangevinSampler {
    pub sphere: EmbeddedSphere,
    pub potential: SpherePotential,
}

impl SphereLangevinSampler {
    pub fn new(sphere: EmbeddedSphere, potential: SpherePotential) -> Self {
        Self { sphere, potential }
    }

    pub fn step(
        &self,
        q: &[f64],
        v: &[f64],
        config: &SamplerConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<((Vec<f64>, Vec<f64>), bool, f64)> {
        let k = self.sphere.ambient_dim();
        let z = standard_normals(rng, k);
        let z_tan = self.sphere.project_horizontal(q, &z)?;
        let mean_factor = (-0.5 * config.ou_time).exp();
        let std = (-(-config.ou_time).exp_m1()).sqrt();
        let v_star: Vec<f64> =
            v.iter().zip(&z_tan).map(|(vi, zi)| mean_factor * vi + std * zi).collect();

        let h_start = sphere_energy(&self.potential, q, &v_star);
        let mut qn = q.to_vec();
        let mut vn = v_star.clone();
        for _ in 0..config.n_leapfrog {
            let (q2, v2) = geodesic_splitting_step(&self.sphere, &self.potential, &qn, &vn, config.dt)?;
            qn = q2;
            vn = v2;
        }
        let (qn, vn) = self.sphere.reproject(&qn, &vn);
        let delta = sphere_energy(&self.potential, &qn, &vn) - h_start;
        let u = uniform(rng);
        if mh_accept(delta, u) {
            Ok(((qn, vn), true, delta))
        } else {
            let flipped: Vec<f64> = v_star.iter().map(|x| -x).collect();
            Ok(((q.to_vec(), flipped), false, delta))
        }
    }
}

/// A sampler bundled with everything needed to advance one proposal.
pub enum Sampler {
    Mala { sampler: MalaSampler },
    LieLangevin { sampler: LieLangevinSampler },
    SphereLangevin { sampler: SphereLangevinSampler },
    Underdamped { sampler: UnderdampedLangevin },
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::Mala { .. } => "mala",
            Sampler::LieLangevin { .. } => "ilmcmc_lie",
            Sampler::SphereLangevin { .. } => "ilmcmc_sphere",
            Sampler::Underdamped { .. } => "underdamped",
        }
    }

    pub fn is_biased(&self) -> bool {
        matches!(self, Sampler::Underdamped { .. })
    }

    /// Deterministic default initial state: origin on charts, identity on
    /// groups, north pole on spheres, all with zero velocity.
    pub fn default_initial(&self) -> ChainState {
        match self {
            Sampler::Mala { sampler } => ChainState::Chart(vec![0.0; sampler.dim()]),
            Sampler::LieLangevin { sampler } => ChainState::Lie {
                g: sampler.group.identity(),
                v: vec![0.0; sampler.group.algebra_dim()],
            },
            Sampler::SphereLangevin { sampler } => ChainState::Sphere {
                q: sampler.sphere.north_pole(),
                v: vec![0.0; sampler.sphere.ambient_dim()],
            },
            Sampler::Underdamped { sampler } => ChainState::Phase {
                q: vec![0.0; sampler.dim()],
                p: vec![0.0; sampler.dim()],
            },
        }
    }

    fn advance(
        &self,
        state: &ChainState,
        config: &SamplerConfig,
        rng: &mut ChaCha8Rng,
    ) -> Result<(ChainState, bool, f64)> {
        match (self, state) {
            (Sampler::Mala { sampler }, ChainState::Chart(x)) => {
                let (y, accept, delta) = sampler.step(x, config.dt, rng)?;
                Ok((ChainState::Chart(y), accept, delta))
            }
            (Sampler::LieLangevin { sampler }, ChainState::Lie { g, v }) => {
                let ((g2, v2), accept, delta) = sampler.step(g, v, config, rng)?;
                Ok((ChainState::Lie { g: g2, v: v2 }, accept, delta))
            }
            (Sampler::SphereLangevin { sampler }, ChainState::Sphere { q, v }) => {
                let ((q2, v2), accept, delta) = sampler.step(q, v, config, rng)?;
                Ok((ChainState::Sphere { q: q2, v: v2 }, accept, delta))
            }
            (Sampler::Underdamped { sampler }, ChainState::Phase { q, p }) => {
                let ((q2, p2), delta) = sampler.step(q, p, config.dt, rng)?;
                Ok((ChainState::Phase { q: q2, p: p2 }, true, delta))
            }
            _ => Err(Error::InvalidInput("chain state does not match sampler geometry".into())),
        }
    }
}

/// Run one chain: `n_iterations` proposals with recording after burn-in at
/// the configured thinning stride. Deterministic for a given
/// `(seed, chain_id)`. Aborts if more than half the proposal energies so far
/// are non-finite.
pub fn run_chain(
    sampler: &Sampler,
    initial: ChainState,
    config: &SamplerConfig,
    seed: u64,
    chain_id: u64,
) -> Result<Chain> {
    config.validate()?;
    let mut state = initial.clone();
    let mut samples = Vec::new();
    let mut accept_flags = Vec::with_capacity(config.n_iterations);
    let mut energy_errors = Vec::with_capacity(config.n_iterations);
    let mut non_finite = 0usize;

    if config.n_iterations == 0 {
        samples.push(initial);
    }
    for i in 0..config.n_iterations {
        let mut rng = step_rng(seed, chain_id, i as u64);
        let (next, accept, delta) = sampler.advance(&state, config, &mut rng)?;
        state = next;
        accept_flags.push(accept);
        energy_errors.push(delta);
        if !delta.is_finite() {
            non_finite += 1;
        }
        if i >= config.burn_in && (i - config.burn_in) % config.thinning == 0 {
            samples.push(state.clone());
        }
        if i + 1 >= 64 && non_finite * 2 > i + 1 {
            return Err(Error::ChainAborted(format!(
                "{non_finite} of {} proposal energies were non-finite",
                i + 1
            )));
        }
    }
    if config.n_iterations > 0 && non_finite * 2 > config.n_iterations {
        return Err(Error::ChainAborted(format!(
            "{non_finite} of {} proposal energies were non-finite",
            config.n_iterations
        )));
    }
    Ok(Chain {
        samples,
        accept_flags,
        energy_errors,
        seed,
        meta: ChainMeta {
            sampler: sampler.name().to_string(),
            chain_id,
            config: config.clone(),
            biased: sampler.is_biased(),
            non_finite_energies: non_finite,
        },
    })
}

/// Run `n_chains` chains on separate threads; chain `i` uses `chain_id = i`.
pub fn run_chains(
    sampler: &Sampler,
    initial: ChainState,
    config: &SamplerConfig,
    seed: u64,
    n_chains: usize,
) -> Result<Vec<Chain>> {
    if n_chains <= 1 {
        return Ok(vec![run_chain(sampler, initial, config, seed, 0)?]);
    }
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for chain_id in 0..n_chains {
            let initial = initial.clone();
            handles.push(scope.spawn(move || {
                run_chain(sampler, initial, config, seed, chain_id as u64)
            }));
        }
        handles.into_iter().map(|h| h.join().expect("chain thread panicked")).collect()
    })
}
