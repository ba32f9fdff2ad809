//! Monte Carlo verification of the generator decomposition: the conservative
//! part must be antisymmetric in L2 of the target, the noise part symmetric
//! and non-positive. Samples come from a rejection oracle with a dominating
//! Gaussian, independent of every sampler in this crate.

use crate::error::{Error, Result};
use crate::fd;
use crate::recipe::{modular_field, AntisymmetricBracket, NoiseModel, TargetDensity};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use std::sync::Arc;

pub type TestFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Smooth compactly supported bump `exp(-1 / (1 - r^2))` for
/// `r = |x - center| / radius < 1`, zero outside.
pub fn smooth_bump(center: Vec<f64>, radius: f64) -> TestFunction {
    Arc::new(move |x: &[f64]| {
        let r2: f64 = x
            .iter()
            .zip(&center)
            .map(|(xi, ci)| (xi - ci) * (xi - ci))
            .sum::<f64>()
            / (radius * radius);
        if r2 >= 1.0 {
            0.0
        } else {
            (-1.0 / (1.0 - r2)).exp()
        }
    })
}

/// Rejection sampler from the unnormalized target density with a dominating
/// centered Gaussian. The bound is estimated on a scan grid and inflated;
/// an acceptance rate collapsing below 0.1% aborts.
pub fn rejection_sample(target: &TargetDensity, n: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let dim = target.dim();
    let proposal_sd = 2.0;
    // scan for the density ratio bound
    let mut log_m = f64::NEG_INFINITY;
    let half_width = 6.0;
    let scan = 41usize;
    let mut idx = vec![0usize; dim];
    loop {
        let x: Vec<f64> = idx
            .iter()
            .map(|&k| -half_width + 2.0 * half_width * k as f64 / (scan - 1) as f64)
            .collect();
        let log_ratio = -target.potential(&x)
            + x.iter().map(|xi| xi * xi).sum::<f64>() / (2.0 * proposal_sd * proposal_sd);
        log_m = log_m.max(log_ratio);
        // advance the multi-index
        let mut d = 0;
        loop {
            if d == dim {
                break;
            }
            idx[d] += 1;
            if idx[d] < scan {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == dim {
            break;
        }
    }
    log_m += 0.5; // inflate the scanned bound

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    let mut proposals = 0usize;
    while out.len() < n {
        let x: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                proposal_sd * z
            })
            .collect();
        proposals += 1;
        let log_accept = -target.potential(&x)
            + x.iter().map(|xi| xi * xi).sum::<f64>() / (2.0 * proposal_sd * proposal_sd)
            - log_m;
        let u: f64 = rng.gen_range(0.0..1.0);
        if u.ln() < log_accept {
            out.push(x);
        }
        if proposals > 1000 && (out.len() as f64) < proposals as f64 * 0.001 {
            return Err(Error::OracleFailure(format!(
                "rejection rate above 99.9% ({} accepted of {proposals})",
                out.len()
            )));
        }
    }
    Ok(out)
}

/// Monte Carlo z-scores of the decomposition defects.
#[derive(Debug, Clone, Serialize)]
pub struct SymmetryReport {
    /// `<X_A f, h> + <f, X_A h>` against zero.
    pub antisymmetric_defect_z: f64,
    /// `<X_S f, h> - <f, X_S h>` against zero.
    pub symmetric_defect_z: f64,
    /// Two-route check `<X_S f / 2, f> + sum_k <Y_k(f)^2> / 2` against zero
    /// (integration by parts turns the quadratic form into minus the squared
    /// noise derivatives).
    pub dissipativity_defect_z: f64,
    /// Estimate of `<X_S f / 2, f>`, which must be non-positive.
    pub dissipativity_estimate: f64,
    pub dissipativity_se: f64,
    pub n_samples: usize,
}

fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// First-order conservative operator applied to `f`:
/// `[X_Htilde^A + X_A^mu](x) . grad f(x)`.
fn conservative_apply(
    bracket: &AntisymmetricBracket,
    target: &TargetDensity,
    f: &TestFunction,
    x: &[f64],
) -> f64 {
    let n = x.len();
    let grad_h = target.grad_potential(x);
    let a = bracket.matrix(x);
    let mut field = modular_field(bracket, target, x);
    for i in 0..n {
        for j in 0..n {
            field[i] -= a[(i, j)] * grad_h[j];
        }
    }
    let grad_f = fd::gradient(&|y| f(y), x);
    field.iter().zip(&grad_f).map(|(a, b)| a * b).sum()
}

/// Second-order noise operator applied to `f`:
/// `sum_k [div_P(Y_k) Y_k(f) + Y_k(Y_k(f))]`.
fn noise_apply(
    noise: &NoiseModel,
    target: &TargetDensity,
    f: &TestFunction,
    x: &[f64],
) -> f64 {
    let grad_h = target.grad_potential(x);
    let grad_rho = target.grad_log_reference(x);
    let mut out = 0.0;
    for k in 0..noise.num_fields() {
        let y = noise.field(k, x);
        let grad_f = fd::gradient(&|p| f(p), x);
        let yf: f64 = y.iter().zip(&grad_f).map(|(a, b)| a * b).sum();
        let div_p = noise.div_mu(k, x, &grad_rho)
            - y.iter().zip(&grad_h).map(|(a, b)| a * b).sum::<f64>();
        let s = |p: &[f64]| {
            let yp = noise.field(k, p);
            let gf = fd::gradient(&|q| f(q), p);
            yp.iter().zip(&gf).map(|(a, b)| a * b).sum::<f64>()
        };
        let yyf = fd::directional_with_step(&s, x, &y, 1e-4);
        out += div_p * yf + yyf;
    }
    out
}

/// Estimate the antisymmetry/symmetry/dissipativity defects of the
/// decomposition over `n_mc` samples from the rejection oracle.
pub fn generator_symmetry_defect(
    bracket: &AntisymmetricBracket,
    noise: &NoiseModel,
    target: &TargetDensity,
    f: &TestFunction,
    h: &TestFunction,
    n_mc: usize,
    seed: u64,
) -> Result<SymmetryReport> {
    let samples = rejection_sample(target, n_mc, seed)?;
    let mut anti = Vec::with_capacity(n_mc);
    let mut sym = Vec::with_capacity(n_mc);
    let mut dissip = Vec::with_capacity(n_mc);
    let mut dissip_defect = Vec::with_capacity(n_mc);
    for x in &samples {
        let fx = f(x);
        let hx = h(x);
        // skip points outside both supports; they contribute exact zeros
        let near_support = fx != 0.0 || hx != 0.0;
        if !near_support {
            anti.push(0.0);
            sym.push(0.0);
            dissip.push(0.0);
            dissip_defect.push(0.0);
            continue;
        }
        let af = conservative_apply(bracket, target, f, x);
        let ah = conservative_apply(bracket, target, h, x);
        anti.push(af * hx + fx * ah);
        let sf = noise_apply(noise, target, f, x);
        let sh = noise_apply(noise, target, h, x);
        sym.push(sf * hx - fx * sh);
        dissip.push(0.5 * sf * fx);
        // second route: the squared noise derivatives of f
        let grad_f = fd::gradient(&|p| f(p), x);
        let mut squares = 0.0;
        for k in 0..noise.num_fields() {
            let y = noise.field(k, x);
            let yf: f64 = y.iter().zip(&grad_f).map(|(a, b)| a * b).sum();
            squares += yf * yf;
        }
        dissip_defect.push(0.5 * sf * fx + 0.5 * squares);
    }
    let (anti_mean, anti_se) = mean_and_se(&anti);
    let (sym_mean, sym_se) = mean_and_se(&sym);
    let (dissip_mean, dissip_se) = mean_and_se(&dissip);
    let (defect_mean, defect_se) = mean_and_se(&dissip_defect);
    Ok(SymmetryReport {
        antisymmetric_defect_z: if anti_se > 0.0 { anti_mean / anti_se } else { 0.0 },
        symmetric_defect_z: if sym_se > 0.0 { sym_mean / sym_se } else { 0.0 },
        dissipativity_defect_z: if defect_se > 0.0 { defect_mean / defect_se } else { 0.0 },
        dissipativity_estimate: dissip_mean,
        dissipativity_se: dissip_se,
        n_samples: n_mc,
    })
}
