//! Acceptance suite: every guarantee the crate makes, exercised end to end
//! at desk scale with pinned tolerances. Each test prints one PASS line;
//! run with `cargo test --test acceptance -- --nocapture` to see them all.

use mpdiff::diagnostics::{
    self, chain_positions, coordinate, coordinate_squared, ergodic_average, group_trace,
    HistogramGrid,
};
use mpdiff::geometry::{EmbeddedSphere, EuclideanSpace, FlatTorus, Geometry, MatrixLieGroup};
use mpdiff::integrators::{lie_leapfrog_trajectory, ou_exact_step, LiePotential, SpherePotential};
use mpdiff::oracles;
use mpdiff::recipe::{
    bracket_diffusion_drift, builtins, euclidean_recipe_drift, ito_spec, AntisymmetricBracket,
    NoiseModel, RecipeTerm, TargetDensity, RECIPE_TERMS,
};
use mpdiff::samplers::{
    run_chain, LieLangevinSampler, MalaSampler, Sampler, SamplerConfig, SphereLangevinSampler,
};
use mpdiff::verify::{
    fokker_planck_residual, generator_symmetry_defect, kl_decay_trace, lie_leapfrog_chart_map,
    mutant_recipe_drift, recipe_term_is_active, smooth_bump, volume_jacobian_check,
    BoundaryPolicy, GaussianState, GridSpec, LinearSde,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn euclid(dim: usize) -> Geometry {
    Geometry::Euclidean(EuclideanSpace::new(dim).unwrap())
}

fn pass(id: u32, name: &str, detail: String) {
    println!("ACCEPTANCE {id:02} ({name}): PASS  [{detail}]");
}

/// 1. For random constant brackets and noise on dims 1-3 and
/// Gaussian/double-well targets, the Ito-converted Stratonovich bracket
/// drift equals the Ito recipe drift pointwise to 1e-10.
#[test]
fn criterion_01_recipe_equivalence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    while cases < 100 {
        for dim in 1..=3 {
            for target_name in ["gaussian", "double_well"] {
                let target = builtins::target(target_name, dim, 1.0, &[]).unwrap();
                let mut q = DMatrix::<f64>::zeros(dim, dim);
                for i in 0..dim {
                    for j in (i + 1)..dim {
                        let v = rng.gen_range(-2.0..2.0);
                        q[(i, j)] = v;
                        q[(j, i)] = -v;
                    }
                }
                let bracket = AntisymmetricBracket::constant(q).unwrap();
                let sigma = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.gen_range(-1.5..1.5));
                let noise = NoiseModel::constant(sigma).unwrap();
                for _ in 0..3 {
                    let x: Vec<f64> = (0..dim).map(|_| rng.gen_range(-2.5..2.5)).collect();
                    let strat = bracket_diffusion_drift(&bracket, &noise, &target, &x).unwrap();
                    let correction = noise.ito_correction(&x);
                    let ito = euclidean_recipe_drift(&bracket, &noise, &target, &x).unwrap();
                    for i in 0..dim {
                        worst = worst.max((strat[i] + correction[i] - ito[i]).abs());
                    }
                }
                cases += 1;
            }
        }
    }
    assert!(worst <= 1e-10, "recipe equivalence defect {worst:.3e}");
    pass(1, "recipe equivalence", format!("{cases} constant pairs, max defect {worst:.2e}"));
}

struct StationarityCase {
    label: &'static str,
    target: TargetDensity,
    bracket: AntisymmetricBracket,
    noise: NoiseModel,
    bounds: Vec<(f64, f64)>,
    points: usize,
}

fn stationarity_cases() -> Vec<StationarityCase> {
    let g = |dim: usize, beta: f64, params: &[f64]| {
        builtins::target("gaussian", dim, beta, params).unwrap()
    };
    let dw = |dim: usize, beta: f64| builtins::target("double_well", dim, beta, &[]).unwrap();
    vec![
        StationarityCase {
            label: "d1 gaussian/none/additive",
            target: g(1, 1.0, &[]),
            bracket: builtins::bracket("none", 1, &[]).unwrap(),
            noise: builtins::noise("additive", 1, &[1.0]).unwrap(),
            bounds: vec![(-6.0, 6.0)],
            points: 240,
        },
        StationarityCase {
            label: "d1 gaussian/none/poly_diag",
            target: g(1, 1.0, &[]),
            bracket: builtins::bracket("none", 1, &[]).unwrap(),
            noise: builtins::noise("poly_diag", 1, &[]).unwrap(),
            bounds: vec![(-5.0, 5.0)],
            points: 320,
        },
        StationarityCase {
            label: "d1 double_well/none/additive",
            target: dw(1, 1.0),
            bracket: builtins::bracket("none", 1, &[]).unwrap(),
            noise: builtins::noise("additive", 1, &[1.0]).unwrap(),
            bounds: vec![(-3.2, 3.2)],
            points: 1280,
        },
        StationarityCase {
            label: "d1 double_well/none/poly_diag",
            target: dw(1, 1.0),
            bracket: builtins::bracket("none", 1, &[]).unwrap(),
            noise: builtins::noise("poly_diag", 1, &[]).unwrap(),
            bounds: vec![(-3.2, 3.2)],
            points: 2200,
        },
        StationarityCase {
            label: "d2 gaussian/constant/additive",
            target: g(2, 1.0, &[]),
            bracket: builtins::bracket("constant", 2, &[0.8]).unwrap(),
            noise: builtins::noise("additive", 2, &[1.0]).unwrap(),
            bounds: vec![(-5.0, 5.0); 2],
            points: 256,
        },
        StationarityCase {
            label: "d2 gaussian/linear/poly_diag",
            target: g(2, 1.0, &[]),
            bracket: builtins::bracket("linear", 2, &[0.5]).unwrap(),
            noise: builtins::noise("poly_diag", 2, &[]).unwrap(),
            bounds: vec![(-5.0, 5.0); 2],
            points: 416,
        },
        StationarityCase {
            // anisotropic variances so the bracket terms are load-bearing
            label: "d2 gaussian(aniso)/stream_function/additive",
            target: g(2, 1.0, &[1.0, 2.0]),
            bracket: builtins::bracket("stream_function", 2, &[2.0, 1.0]).unwrap(),
            noise: builtins::noise("additive", 2, &[1.0]).unwrap(),
            bounds: vec![(-5.0, 5.0), (-6.5, 6.5)],
            points: 320,
        },
        StationarityCase {
            label: "d2 double_well(beta 0.7)/constant/additive",
            target: dw(2, 0.7),
            bracket: builtins::bracket("constant", 2, &[0.8]).unwrap(),
            noise: builtins::noise("additive", 2, &[1.0]).unwrap(),
            bounds: vec![(-3.4, 3.4), (-5.5, 5.5)],
            points: 1024,
        },
        StationarityCase {
            label: "d3 gaussian(var 4)/constant/additive",
            target: g(3, 1.0, &[4.0]),
            bracket: builtins::bracket("constant", 3, &[0.8, -0.5, 0.3]).unwrap(),
            noise: builtins::noise("additive", 3, &[1.0]).unwrap(),
            bounds: vec![(-3.0, 3.0); 3],
            points: 48,
        },
        StationarityCase {
            label: "d3 gaussian(var 4)/linear/additive",
            target: g(3, 1.0, &[4.0]),
            bracket: builtins::bracket("linear", 3, &[0.4]).unwrap(),
            noise: builtins::noise("additive", 3, &[1.0]).unwrap(),
            bounds: vec![(-3.0, 3.0); 3],
            points: 48,
        },
        StationarityCase {
            label: "d3 gaussian(var 4)/none/poly_diag(w 2)",
            target: g(3, 1.0, &[4.0]),
            bracket: builtins::bracket("none", 3, &[]).unwrap(),
            noise: builtins::noise("poly_diag", 3, &[2.0]).unwrap(),
            bounds: vec![(-2.5, 2.5); 3],
            points: 64,
        },
    ]
}

/// 2. Every built-in spec passes the stationary Fokker-Planck residual with
/// second-order refinement, and every load-bearing single-term deletion
/// blows the residual by at least two orders of magnitude.
#[test]
fn criterion_02_stationarity_and_mutants() {
    let mut n_specs = 0;
    let mut n_mutants = 0;
    for case in stationarity_cases() {
        let grid =
            GridSpec::new(case.bounds.clone(), case.points, BoundaryPolicy::TruncateInterior)
                .unwrap();
        let spec =
            ito_spec(euclid(case.target.dim()), &case.bracket, &case.noise, &case.target, None)
                .unwrap();
        let report = fokker_planck_residual(&spec, &case.target, &grid).unwrap();
        assert!(report.max_abs <= 1e-3, "{}: max_abs {}", case.label, report.max_abs);
        let ratio = report.refinement_ratio.expect("refinement ratio");
        assert!((3.5..=4.5).contains(&ratio), "{}: ratio {}", case.label, ratio);
        n_specs += 1;

        // mutants: delete each active, load-bearing term. A constant
        // bracket's gradient term is divergence-free and target-preserving
        // all by itself, so deleting it cannot break stationarity; the
        // position-dependent bracket cases cover those two terms.
        let probes: Vec<Vec<f64>> = (0..8)
            .map(|k| {
                case.bounds
                    .iter()
                    .map(|(lo, hi)| lo + (hi - lo) * (0.2 + 0.08 * k as f64))
                    .collect()
            })
            .collect();
        let constant_bracket = {
            let a0 = case.bracket.matrix(&probes[0]);
            probes.iter().all(|p| (case.bracket.matrix(p) - &a0).abs().max() < 1e-12)
        };
        for term in RECIPE_TERMS {
            if !recipe_term_is_active(&case.bracket, &case.noise, &case.target, term, &probes) {
                continue;
            }
            if constant_bracket && term == RecipeTerm::BracketGradient {
                continue;
            }
            let drift = mutant_recipe_drift(&case.bracket, &case.noise, &case.target, term);
            let mutant = mpdiff::recipe::DiffusionSpec::new(
                euclid(case.target.dim()),
                drift,
                case.noise.clone(),
                mpdiff::recipe::Convention::Ito,
            );
            // the deleted-term defect is O(1); a coarse grid suffices
            let coarse_points = match case.target.dim() {
                1 => 200,
                2 => 96,
                _ => 32,
            };
            let coarse = GridSpec::new(
                case.bounds.clone(),
                coarse_points,
                BoundaryPolicy::TruncateInterior,
            )
            .unwrap();
            let bad = fokker_planck_residual(&mutant, &case.target, &coarse).unwrap();
            assert!(
                bad.max_abs >= 100.0 * 1e-3,
                "{}: deleting {:?} only reached {}",
                case.label,
                term,
                bad.max_abs
            );
            n_mutants += 1;
        }
    }
    pass(
        2,
        "stationarity residuals",
        format!("{n_specs} specs passed, {n_mutants} mutants detected at >= 100x"),
    );
}

/// 3. The exact OU kernel: sample mean within 4 SE of `exp(-h/2) v0` and
/// variance within 4 SE of `1 - exp(-h)` over one million draws for each h.
#[test]
fn criterion_03_ou_kernel() {
    let v0 = 1.7;
    let n = 1_000_000usize;
    let mut detail = String::new();
    for (case, h) in [0.1, 0.5, 2.0].into_iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3000 + case as u64);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            let v = ou_exact_step(&[v0], h, &[z]).unwrap()[0];
            sum += v;
            sum_sq += v * v;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let expected_mean = (-0.5 * h).exp() * v0;
        let expected_var = 1.0 - (-h).exp();
        let se_mean = (var / n as f64).sqrt();
        let se_var = var * (2.0 / (n as f64 - 1.0)).sqrt();
        let z_mean = (mean - expected_mean) / se_mean;
        let z_var = (var - expected_var) / se_var;
        assert!(z_mean.abs() <= 4.0, "h={h}: mean z {z_mean}");
        assert!(z_var.abs() <= 4.0, "h={h}: var z {z_var}");
        detail.push_str(&format!("h={h}: z_mean {z_mean:+.2}, z_var {z_var:+.2}; "));
    }
    pass(3, "exact OU kernel", detail);
}

/// 4. Leapfrog structure on SO(3) with V(g) = tr(L g): chart volume within
/// 1e-6 of exactly preserved, flip-reversibility to 1e-10, energy error
/// ratio near 4 under step halving.
#[test]
fn criterion_04_lie_leapfrog_structure() {
    let mut rng = ChaCha8Rng::seed_from_u64(4001);
    let group = MatrixLieGroup::so(3).unwrap();
    let lambda = DMatrix::<f64>::from_fn(3, 3, |_, _| rng.gen_range(-1.0..1.0));
    let potential = LiePotential::trace_real(lambda);

    // volume: finite-difference Jacobian in chart coordinates
    let mut worst_det: f64 = 0.0;
    for _ in 0..20 {
        let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let g0 = group.lie_exp(&coeffs).unwrap();
        let v0: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let map = lie_leapfrog_chart_map(&group, &potential, &g0, &v0, 0.08, 1).unwrap();
        let zero = vec![0.0; 6];
        worst_det = worst_det.max(volume_jacobian_check(&map, std::slice::from_ref(&zero), 1e-6));
    }
    assert!(worst_det <= 1e-6, "volume defect {worst_det:.3e}");

    // reversibility up to momentum flip
    let mut worst_rev: f64 = 0.0;
    for _ in 0..10 {
        let coeffs: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.2..1.2)).collect();
        let g0 = group.lie_exp(&coeffs).unwrap();
        let v0: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let (g1, v1, _) = lie_leapfrog_trajectory(&group, &potential, &g0, &v0, 0.05, 40).unwrap();
        let flipped: Vec<f64> = v1.iter().map(|x| -x).collect();
        let (g2, v2, _) = lie_leapfrog_trajectory(&group, &potential, &g1, &flipped, 0.05, 40).unwrap();
        worst_rev = worst_rev.max((&g2 - &g0).norm());
        for (a, b) in v2.iter().zip(&v0) {
            worst_rev = worst_rev.max((a + b).abs());
        }
    }
    assert!(worst_rev <= 1e-10, "reversibility defect {worst_rev:.3e}");

    // energy error order: halving the step scales the error by ~4
    let g0 = group.identity();
    let v0 = vec![0.7, -0.2, 0.4];
    let total_time = 1.0;
    let delta_at = |eps: f64| {
        let n = (total_time / eps).round() as usize;
        lie_leapfrog_trajectory(&group, &potential, &g0, &v0, eps, n).unwrap().2
    };
    let ratios = [
        (delta_at(0.02) / delta_at(0.01)).abs(),
        (delta_at(0.01) / delta_at(0.005)).abs(),
    ];
    for r in ratios {
        assert!((3.5..=4.5).contains(&r), "energy halving ratio {r}");
    }
    pass(
        4,
        "lie leapfrog structure",
        format!(
            "det defect {worst_det:.1e}, reversibility {worst_rev:.1e}, ratios {:.2}/{:.2}",
            ratios[0], ratios[1]
        ),
    );
}

/// 5. Zero-potential sampling on SO(3) reproduces Haar: the trace
/// distribution matches one million QR-of-Gaussian oracle samples below the
/// 1% KS critical value, with acceptance exactly one.
#[test]
fn criterion_05_haar_recovery() {
    let group = MatrixLieGroup::so(3).unwrap();
    let sampler = Sampler::LieLangevin {
        sampler: LieLangevinSampler::new(group, LiePotential::zero(3)),
    };
    let config = SamplerConfig {
        n_iterations: 2_001_000,
        burn_in: 1_000,
        dt: 0.1,
        n_leapfrog: 10,
        ou_time: 1.0,
        thinning: 20,
    };
    let chain = run_chain(&sampler, sampler.default_initial(), &config, 50_001, 0).unwrap();
    assert_eq!(chain.acceptance_rate(), 1.0, "free flow must accept everything");
    let mut traces: Vec<f64> =
        chain.samples.iter().map(|s| group_trace()(s)).collect();
    assert!(traces.len() >= 100_000, "need 1e5 post-burn-in samples, have {}", traces.len());
    traces.truncate(100_000);
    let mut oracle = oracles::haar_so3_traces(1_000_000, 555);
    let d = oracles::ks_statistic(&mut traces, &mut oracle);
    let critical = oracles::ks_critical_value(0.01, 100_000, 1_000_000);
    assert!(d < critical, "KS statistic {d:.5} >= critical {critical:.5}");
    pass(5, "Haar recovery", format!("KS {d:.5} < {critical:.5}, acceptance 1.0"));
}

/// 6. SO(3) with potential tr(g): the chain mean of the trace matches the
/// three-angle quadrature oracle within four combined standard errors.
#[test]
fn criterion_06_trace_potential_chain() {
    let group = MatrixLieGroup::so(3).unwrap();
    let potential = LiePotential::trace_real(DMatrix::identity(3, 3));
    let sampler = Sampler::LieLangevin { sampler: LieLangevinSampler::new(group, potential) };
    let config = SamplerConfig {
        n_iterations: 400_000,
        burn_in: 2_000,
        dt: 0.08,
        n_leapfrog: 12,
        ou_time: 0.5,
        thinning: 1,
    };
    let chain = run_chain(&sampler, sampler.default_initial(), &config, 60_006, 0).unwrap();
    let (mean, se) = ergodic_average(&chain, &group_trace()).unwrap();
    let oracle = oracles::so3_trace_mean_euler_quadrature(1.0, 64);
    // the quadrature cross-check is itself verified against the
    // class-function route
    let oracle_alt = oracles::so3_trace_mean_angle_quadrature(1.0, 4000);
    assert!((oracle - oracle_alt).abs() < 1e-6);
    let combined = (se * se + 1e-12f64).sqrt();
    let z = (mean - oracle) / combined;
    assert!(
        z.abs() <= 4.0,
        "trace mean {mean:.5} vs oracle {oracle:.5}: z = {z:.2} (se {se:.5})"
    );
    pass(6, "trace potential chain", format!("mean {mean:.4} vs {oracle:.4}, z {z:+.2}"));
}

/// 7. Sphere sampler: von Mises-Fisher height matches quadrature within
/// 4 SE, and the uniform case has all moment z-scores within [-4, 4].
#[test]
fn criterion_07_sphere_sampler() {
    // vMF case
    let kappa = 2.0;
    let sphere = EmbeddedSphere::new(3).unwrap();
    let sampler = Sampler::SphereLangevin {
        sampler: SphereLangevinSampler::new(
            sphere.clone(),
            SpherePotential::linear_height(2, kappa),
        ),
    };
    let config = SamplerConfig {
        n_iterations: 120_000,
        burn_in: 1_000,
        dt: 0.1,
        n_leapfrog: 10,
        ou_time: 1.0,
        thinning: 1,
    };
    let chain = run_chain(&sampler, sampler.default_initial(), &config, 70_007, 0).unwrap();
    let (mean, se) = ergodic_average(&chain, &coordinate(2)).unwrap();
    let oracle = oracles::sphere_axis_mean_quadrature(kappa, 3, 4000);
    let z = (mean - oracle) / se;
    assert!(z.abs() <= 4.0, "vMF mean {mean:.5} vs {oracle:.5}: z {z:.2}");

    // uniform case
    let sampler = Sampler::SphereLangevin {
        sampler: SphereLangevinSampler::new(sphere, SpherePotential::zero(3)),
    };
    let chain = run_chain(&sampler, sampler.default_initial(), &config, 70_008, 0).unwrap();
    assert_eq!(chain.acceptance_rate(), 1.0);
    let mut worst_z: f64 = 0.0;
    for i in 0..3 {
        let (m, se) = ergodic_average(&chain, &coordinate(i)).unwrap();
        worst_z = worst_z.max((m / se).abs());
        let (m2, se2) = ergodic_average(&chain, &coordinate_squared(i)).unwrap();
        worst_z = worst_z.max(((m2 - 1.0 / 3.0) / se2).abs());
    }
    assert!(worst_z <= 4.0, "uniform sphere worst z {worst_z:.2}");
    pass(7, "sphere sampler", format!("vMF z {z:+.2}, uniform worst z {worst_z:.2}"));
}

/// 8. MALA on standard Gaussians in dims 1-5: per-coordinate variance
/// z-scores within [-4, 4], and acceptance >= 0.99 at dt = 1e-4.
#[test]
fn criterion_08_mala() {
    let mut detail = String::new();
    for dim in 1..=5 {
        let target = builtins::target("gaussian", dim, 1.0, &[]).unwrap();
        let sampler = Sampler::Mala { sampler: MalaSampler::identity(target).unwrap() };
        let config = SamplerConfig {
            n_iterations: 60_000,
            burn_in: 2_000,
            dt: 0.2,
            thinning: 1,
            ..Default::default()
        };
        let chain =
            run_chain(&sampler, sampler.default_initial(), &config, 8_000 + dim as u64, 0).unwrap();
        let mut worst_z: f64 = 0.0;
        for i in 0..dim {
            let (m2, se) = ergodic_average(&chain, &coordinate_squared(i)).unwrap();
            worst_z = worst_z.max(((m2 - 1.0) / se).abs());
        }
        assert!(worst_z <= 4.0, "dim {dim}: worst variance z {worst_z:.2}");
        detail.push_str(&format!("d{dim} z {worst_z:.2}; "));
    }
    // acceptance at tiny step
    let target = builtins::target("gaussian", 3, 1.0, &[]).unwrap();
    let sampler = Sampler::Mala { sampler: MalaSampler::identity(target).unwrap() };
    let config = SamplerConfig {
        n_iterations: 3_000,
        burn_in: 0,
        dt: 1e-4,
        thinning: 1,
        ..Default::default()
    };
    let chain = run_chain(&sampler, sampler.default_initial(), &config, 8_100, 0).unwrap();
    let rate = chain.acceptance_rate();
    assert!(rate >= 0.99, "acceptance {rate} at dt = 1e-4");
    pass(8, "mala", format!("{detail}acceptance {rate:.4} at dt 1e-4"));
}

/// 9. KL monotonicity: the exact Gaussian-flow trace never increases (20
/// random initializations), and the histogram KL of double-well MALA runs
/// decreases from first to last window in at least 95% of 50 seeded runs.
#[test]
fn criterion_09_kl_monotonicity() {
    let mut rng = ChaCha8Rng::seed_from_u64(9001);
    // exact flow on overdamped and underdamped linear processes
    for trial in 0..20 {
        let process = if trial % 2 == 0 {
            LinearSde::overdamped_gaussian(DMatrix::identity(2, 2)).unwrap()
        } else {
            LinearSde::underdamped_gaussian(DMatrix::identity(1, 1)).unwrap()
        };
        let dim = process.b.nrows();
        let mean = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
        let a = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
        let cov = &a * a.transpose() + DMatrix::identity(dim, dim) * rng.gen_range(0.05..0.5);
        let initial = GaussianState::new(mean, cov).unwrap();
        let times: Vec<f64> = (0..50).map(|k| k as f64 * 0.12).collect();
        let trace = kl_decay_trace(&process, &initial, &times).unwrap();
        for w in trace.windows(2) {
            assert!(
                w[1].1 <= w[0].1 + 1e-12,
                "trial {trial}: KL increased {} -> {}",
                w[0].1,
                w[1].1
            );
        }
    }

    // histogram route on double-well MALA started far from the wells
    let target = builtins::target("double_well", 1, 1.0, &[]).unwrap();
    let grid = HistogramGrid::new(vec![(-3.5, 3.5)], vec![28]).unwrap();
    let masses = grid.target_masses(&|x| target.density(x), 16);
    let mut decreased = 0;
    for seed in 0..50u64 {
        let target = builtins::target("double_well", 1, 1.0, &[]).unwrap();
        let sampler = Sampler::Mala { sampler: MalaSampler::identity(target).unwrap() };
        let config = SamplerConfig {
            n_iterations: 2_000,
            burn_in: 0,
            dt: 0.05,
            thinning: 1,
            ..Default::default()
        };
        let chain = run_chain(
            &sampler,
            mpdiff::samplers::ChainState::Chart(vec![3.4]),
            &config,
            9100 + seed,
            0,
        )
        .unwrap();
        let positions = chain_positions(&chain);
        let trace = diagnostics::histogram_kl(&positions, &masses, &grid, 10).unwrap();
        if trace.first().unwrap().1 > trace.last().unwrap().1 {
            decreased += 1;
        }
    }
    assert!(decreased >= 48, "KL decreased in only {decreased}/50 runs");
    pass(9, "KL monotonicity", format!("exact flow monotone, histogram decrease {decreased}/50"));
}

/// 10. Generator decomposition: antisymmetry, symmetry, and two-route
/// dissipativity z-scores within [-4, 4] at one million Monte Carlo samples
/// for every built-in spec in the matrix.
#[test]
fn criterion_10_generator_decomposition() {
    let n_mc = 1_000_000;
    let cases: Vec<(&str, TargetDensity, AntisymmetricBracket, NoiseModel)> = vec![
        (
            "d1 gaussian/none/additive",
            builtins::target("gaussian", 1, 1.0, &[]).unwrap(),
            builtins::bracket("none", 1, &[]).unwrap(),
            builtins::noise("additive", 1, &[1.0]).unwrap(),
        ),
        (
            "d2 gaussian/constant/additive",
            builtins::target("gaussian", 2, 1.0, &[]).unwrap(),
            builtins::bracket("constant", 2, &[0.7]).unwrap(),
            builtins::noise("additive", 2, &[1.0]).unwrap(),
        ),
        (
            "d2 gaussian/linear/poly_diag",
            builtins::target("gaussian", 2, 1.0, &[]).unwrap(),
            builtins::bracket("linear", 2, &[0.5]).unwrap(),
            builtins::noise("poly_diag", 2, &[]).unwrap(),
        ),
        (
            "d2 double_well/stream_function/additive",
            builtins::target("double_well", 2, 1.0, &[]).unwrap(),
            builtins::bracket("stream_function", 2, &[1.0, 1.0]).unwrap(),
            builtins::noise("additive", 2, &[1.0]).unwrap(),
        ),
    ];
    let mut detail = String::new();
    for (i, (label, target, bracket, noise)) in cases.iter().enumerate() {
        let dim = target.dim();
        let f = smooth_bump(vec![0.4; dim], 1.8);
        let h = if dim == 1 {
            smooth_bump(vec![-0.3], 1.5)
        } else {
            let mut c = vec![-0.3; dim];
            c[1] = 0.5;
            smooth_bump(c, 1.5)
        };
        let report =
            generator_symmetry_defect(bracket, noise, target, &f, &h, n_mc, 10_000 + i as u64)
                .unwrap();
        assert!(
            report.antisymmetric_defect_z.abs() <= 4.0,
            "{label}: antisymmetric z {}",
            report.antisymmetric_defect_z
        );
        assert!(
            report.symmetric_defect_z.abs() <= 4.0,
            "{label}: symmetric z {}",
            report.symmetric_defect_z
        );
        assert!(
            report.dissipativity_defect_z.abs() <= 4.0,
            "{label}: dissipativity z {}",
            report.dissipativity_defect_z
        );
        assert!(
            report.dissipativity_estimate <= 4.0 * report.dissipativity_se,
            "{label}: quadratic form must be non-positive"
        );
        detail.push_str(&format!(
            "{label}: z ({:+.2}, {:+.2}, {:+.2}); ",
            report.antisymmetric_defect_z,
            report.symmetric_defect_z,
            report.dissipativity_defect_z
        ));
    }
    pass(10, "generator decomposition", detail);
}

/// 11. The constant obstruction drift on flat tori is stationary for the
/// uniform target to 1e-10 under the periodic policy.
#[test]
fn criterion_11_torus_obstruction() {
    // T^1
    let torus = FlatTorus::new(vec![1.0]).unwrap();
    let target = builtins::target("uniform", 1, 1.0, &[]).unwrap();
    let bracket = builtins::bracket("none", 1, &[]).unwrap();
    let noise = builtins::noise("none", 1, &[]).unwrap();
    let spec = ito_spec(Geometry::Torus(torus), &bracket, &noise, &target, Some(vec![1.0])).unwrap();
    let grid = GridSpec::new(vec![(0.0, 1.0)], 64, BoundaryPolicy::Periodic).unwrap();
    let r1 = fokker_planck_residual(&spec, &target, &grid).unwrap();
    assert!(r1.max_abs <= 1e-10, "T^1 residual {}", r1.max_abs);

    // T^2
    let torus = FlatTorus::new(vec![1.0, 2.0]).unwrap();
    let target = builtins::target("uniform", 2, 1.0, &[]).unwrap();
    let bracket = builtins::bracket("none", 2, &[]).unwrap();
    let noise = builtins::noise("none", 2, &[]).unwrap();
    let spec = ito_spec(
        Geometry::Torus(torus),
        &bracket,
        &noise,
        &target,
        Some(vec![1.0, -0.5]),
    )
    .unwrap();
    let grid = GridSpec::new(vec![(0.0, 1.0), (0.0, 2.0)], 32, BoundaryPolicy::Periodic).unwrap();
    let r2 = fokker_planck_residual(&spec, &target, &grid).unwrap();
    assert!(r2.max_abs <= 1e-10, "T^2 residual {}", r2.max_abs);
    pass(11, "torus obstruction", format!("T1 {:.1e}, T2 {:.1e}", r1.max_abs, r2.max_abs));
}

/// 12. Rerunning any experiment with the same seed produces byte-identical
/// chain.csv.
#[test]
fn criterion_12_determinism() {
    let config_text = r#"
seed = 99

[geometry]
kind = "so3"

[target]
name = "trace"
params = [1.0]

[sampler]
kind = "ilmcmc_lie"
n_iterations = 500
burn_in = 10
dt = 0.1
n_leapfrog = 5
"#;
    let config = mpdiff::cli::parse_config(config_text).unwrap();
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    mpdiff::cli::run_experiment(&config, dir_a.path(), None, false).unwrap();
    mpdiff::cli::run_experiment(&config, dir_b.path(), None, false).unwrap();
    let a = std::fs::read(dir_a.path().join("chain.csv")).unwrap();
    let b = std::fs::read(dir_b.path().join("chain.csv")).unwrap();
    assert!(!a.is_empty());
    assert_eq!(a, b, "chain.csv must be byte-identical across reruns");
    pass(12, "determinism", format!("chain.csv identical over reruns ({} bytes)", a.len()));
}
