//! Post-hoc chain statistics: ergodic averages with batch-means error bars,
//! effective sample size, moment reports against oracle values, and
//! histogram KL traces. Everything here is a pure function of the finished
//! chain, so reruns are bit-identical.

use crate::error::{Error, Result};
use crate::samplers::{Chain, ChainState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::sync::Arc;

pub type Observable = Arc<dyn Fn(&ChainState) -> f64 + Send + Sync>;

/// Coordinate `i` of the position (chart point, sphere point, or phase-space
/// position).
pub fn coordinate(i: usize) -> Observable {
    Arc::new(move |s: &ChainState| match s {
        ChainState::Chart(x) => x[i],
        ChainState::Sphere { q, .. } => q[i],
        ChainState::Phase { q, .. } => q[i],
        ChainState::Lie { .. } => f64::NAN,
    })
}

pub fn coordinate_squared(i: usize) -> Observable {
    let c = coordinate(i);
    Arc::new(move |s: &ChainState| {
        let v = c(s);
        v * v
    })
}

/// Momentum coordinate of a phase-space chain.
pub fn momentum_coordinate(i: usize) -> Observable {
    Arc::new(move |s: &ChainState| match s {
        ChainState::Phase { p, .. } => p[i],
        _ => f64::NAN,
    })
}

pub fn momentum_squared(i: usize) -> Observable {
    let c = momentum_coordinate(i);
    Arc::new(move |s: &ChainState| {
        let v = c(s);
        v * v
    })
}

/// `Re tr(g)` on Lie-group chains.
pub fn group_trace() -> Observable {
    Arc::new(|s: &ChainState| match s {
        ChainState::Lie { g, .. } => g.trace().re,
        _ => f64::NAN,
    })
}

pub fn observable_values(chain: &Chain, observable: &Observable) -> Vec<f64> {
    chain.samples.iter().map(|s| observable(s)).collect()
}

/// Minimum post-burn-in length for averages and ESS.
pub const MIN_CHAIN_LEN: usize = 100;

/// Ergodic average with the batch-means standard error over
/// `floor(sqrt(n))` batches.
pub fn ergodic_average(chain: &Chain, observable: &Observable) -> Result<(f64, f64)> {
    let values = observable_values(chain, observable);
    ergodic_average_of(&values)
}

pub fn ergodic_average_of(values: &[f64]) -> Result<(f64, f64)> {
    let n = values.len();
    if n < MIN_CHAIN_LEN {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_CHAIN_LEN} samples, have {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let n_batches = (n as f64).sqrt().floor() as usize;
    let batch_size = n / n_batches;
    let used = n_batches * batch_size;
    let mut batch_means = Vec::with_capacity(n_batches);
    for b in 0..n_batches {
        let slice = &values[b * batch_size..(b + 1) * batch_size];
        batch_means.push(slice.iter().sum::<f64>() / batch_size as f64);
    }
    let used_mean = values[..used].iter().sum::<f64>() / used as f64;
    let var_bm = batch_means.iter().map(|m| (m - used_mean).powi(2)).sum::<f64>()
        / (n_batches as f64 - 1.0);
    let se = (var_bm / n_batches as f64).sqrt();
    Ok((mean, se))
}

/// Estimator floor reported for degenerate (constant) chains.
pub const ESS_FLOOR: f64 = 1.0;

/// Effective sample size via the initial-positive-sequence truncation of the
/// autocorrelation sum. Always in `(0, n]`; constant chains report the floor.
pub fn effective_sample_size(chain: &Chain, observable: &Observable) -> Result<f64> {
    let values = observable_values(chain, observable);
    effective_sample_size_of(&values)
}

pub fn effective_sample_size_of(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < MIN_CHAIN_LEN {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_CHAIN_LEN} samples, have {n}"
        )));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let gamma0 = centered.iter().map(|v| v * v).sum::<f64>() / n as f64;
    if gamma0 <= 0.0 {
        return Ok(ESS_FLOOR);
    }
    let autocov = |k: usize| -> f64 {
        centered[..n - k].iter().zip(&centered[k..]).map(|(a, b)| a * b).sum::<f64>() / n as f64
    };
    // sum of paired autocovariances while the pairs stay positive
    let mut tau_sum = 0.0;
    let mut m = 0usize;
    loop {
        let k0 = 2 * m;
        let k1 = 2 * m + 1;
        if k1 >= n - 1 {
            break;
        }
        let pair = autocov(k0) + autocov(k1);
        if pair <= 0.0 {
            break;
        }
        tau_sum += pair;
        m += 1;
    }
    let tau = (-1.0 + 2.0 * tau_sum / gamma0).max(1e-12);
    Ok((n as f64 / tau).clamp(ESS_FLOOR.min(n as f64), n as f64))
}

/// One observable's estimate against its oracle.
#[derive(Debug, Clone, Serialize)]
pub struct MomentReport {
    pub observable: String,
    pub estimate: f64,
    pub standard_error: f64,
    pub oracle: Option<f64>,
    /// How the oracle value was obtained: `closed_form`, `quadrature`, `none`.
    pub provenance: String,
    pub z_score: Option<f64>,
}

pub fn moment_report(
    chain: &Chain,
    observable: &Observable,
    name: &str,
    oracle: Option<(f64, &str)>,
) -> Result<MomentReport> {
    let (estimate, se) = ergodic_average(chain, observable)?;
    let (oracle_value, provenance) = match oracle {
        Some((v, p)) => (Some(v), p.to_string()),
        None => (None, "none".to_string()),
    };
    let z_score = oracle_value.map(|o| (estimate - o) / se);
    Ok(MomentReport {
        observable: name.to_string(),
        estimate,
        standard_error: se,
        oracle: oracle_value,
        provenance,
        z_score,
    })
}

/// Additive smoothing applied to empty histogram bins; declared in every
/// report that carries a KL value.
pub const KL_SMOOTHING_ALPHA: f64 = 1e-9;

/// Regular binning of a 1- or 2-dimensional box.
#[derive(Debug, Clone, Serialize)]
pub struct HistogramGrid {
    pub bounds: Vec<(f64, f64)>,
    pub bins: Vec<usize>,
}

impl HistogramGrid {
    pub fn new(bounds: Vec<(f64, f64)>, bins: Vec<usize>) -> Result<Self> {
        if bounds.is_empty() || bounds.len() > 2 || bounds.len() != bins.len() {
            return Err(Error::InvalidInput(
                "histogram grids support dimensions 1 and 2, one bin count per axis".into(),
            ));
        }
        if bounds.iter().any(|(lo, hi)| !(hi > lo)) || bins.iter().any(|&b| b < 2) {
            return Err(Error::InvalidInput("invalid histogram bounds or bin counts".into()));
        }
        Ok(Self { bounds, bins })
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn total_bins(&self) -> usize {
        self.bins.iter().product()
    }

    /// Flat bin index of a point, clamped into the box.
    pub fn bin_of(&self, x: &[f64]) -> usize {
        let mut idx = 0;
        for d in 0..self.dim() {
            let (lo, hi) = self.bounds[d];
            let b = self.bins[d];
            let t = ((x[d] - lo) / (hi - lo) * b as f64).floor();
            let k = (t.max(0.0) as usize).min(b - 1);
            idx = idx * b + k;
        }
        idx
    }

    /// Normalized target mass per bin, integrated on a per-bin subgrid.
    pub fn target_masses(&self, density: &dyn Fn(&[f64]) -> f64, sub: usize) -> Vec<f64> {
        let nb = self.total_bins();
        let mut masses = vec![0.0; nb];
        let sub = sub.max(1);
        match self.dim() {
            1 => {
                let (lo, hi) = self.bounds[0];
                let b = self.bins[0];
                let w = (hi - lo) / b as f64;
                for (k, mass) in masses.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    for s in 0..sub {
                        let x = lo + (k as f64 + (s as f64 + 0.5) / sub as f64) * w;
                        acc += density(&[x]);
                    }
                    *mass = acc / sub as f64 * w;
                }
            }
            2 => {
                let (lo0, hi0) = self.bounds[0];
                let (lo1, hi1) = self.bounds[1];
                let (b0, b1) = (self.bins[0], self.bins[1]);
                let w0 = (hi0 - lo0) / b0 as f64;
                let w1 = (hi1 - lo1) / b1 as f64;
                for k0 in 0..b0 {
                    for k1 in 0..b1 {
                        let mut acc = 0.0;
                        for s0 in 0..sub {
                            for s1 in 0..sub {
                                let x = lo0 + (k0 as f64 + (s0 as f64 + 0.5) / sub as f64) * w0;
                                let y = lo1 + (k1 as f64 + (s1 as f64 + 0.5) / sub as f64) * w1;
                                acc += density(&[x, y]);
                            }
                        }
                        masses[k0 * b1 + k1] = acc / (sub * sub) as f64 * w0 * w1;
                    }
                }
            }
            _ => unreachable!(),
        }
        let total: f64 = masses.iter().sum();
        if total > 0.0 {
            masses.iter_mut().for_each(|m| *m /= total);
        }
        masses
    }
}

fn kl_of_counts(counts: &[usize], n: usize, target_mass: &[f64]) -> f64 {
    let mut probs: Vec<f64> = counts
        .iter()
        .map(|&c| if c == 0 { KL_SMOOTHING_ALPHA } else { c as f64 / n as f64 })
        .collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    probs
        .iter()
        .zip(target_mass)
        .map(|(&p, &q)| p * (p / q.max(KL_SMOOTHING_ALPHA)).ln())
        .sum()
}

/// KL divergence of the empirical histogram of growing chain prefixes
/// against the binned target. Returns `(samples_used, kl)` per window.
pub fn histogram_kl(
    positions: &[Vec<f64>],
    target_mass: &[f64],
    grid: &HistogramGrid,
    n_windows: usize,
) -> Result<Vec<(usize, f64)>> {
    if positions.is_empty() || n_windows == 0 {
        return Err(Error::InsufficientData("histogram_kl needs samples and windows".into()));
    }
    if target_mass.len() != grid.total_bins() {
        return Err(Error::InvalidInput("target mass vector does not match the grid".into()));
    }
    let n = positions.len();
    let mut counts = vec![0usize; grid.total_bins()];
    let mut out = Vec::with_capacity(n_windows);
    let mut consumed = 0usize;
    for w in 0..n_windows {
        let upto = ((w + 1) * n) / n_windows;
        while consumed < upto {
            counts[grid.bin_of(&positions[consumed])] += 1;
            consumed += 1;
        }
        if upto == 0 {
            continue;
        }
        out.push((upto, kl_of_counts(&counts, upto, target_mass)));
    }
    Ok(out)
}

/// Bootstrap standard error of the histogram KL of a sample set.
pub fn histogram_kl_bootstrap_se(
    positions: &[Vec<f64>],
    target_mass: &[f64],
    grid: &HistogramGrid,
    replicates: usize,
    seed: u64,
) -> f64 {
    let n = positions.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kls = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let mut counts = vec![0usize; grid.total_bins()];
        for _ in 0..n {
            let idx = rng.gen_range(0..n);
            counts[grid.bin_of(&positions[idx])] += 1;
        }
        kls.push(kl_of_counts(&counts, n, target_mass));
    }
    let mean = kls.iter().sum::<f64>() / replicates as f64;
    (kls.iter().map(|k| (k - mean).powi(2)).sum::<f64>() / (replicates as f64 - 1.0)).sqrt()
}

/// Positions of chart/sphere/phase samples as coordinate vectors.
pub fn chain_positions(chain: &Chain) -> Vec<Vec<f64>> {
    chain
        .samples
        .iter()
        .map(|s| match s {
            ChainState::Chart(x) => x.clone(),
            ChainState::Sphere { q, .. } => q.clone(),
            ChainState::Phase { q, .. } => q.clone(),
            ChainState::Lie { g, .. } => vec![g.trace().re],
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::samplers::{ChainMeta, SamplerConfig};

    fn fake_chain(values: Vec<f64>) -> Chain {
        Chain {
            samples: values.into_iter().map(|v| ChainState::Chart(vec![v])).collect(),
            accept_flags: Vec::new(),
            energy_errors: Vec::new(),
            seed: 0,
            meta: ChainMeta {
                sampler: "fake".into(),
                chain_id: 0,
                config: SamplerConfig::default(),
                biased: false,
                non_finite_energies: 0,
            },
        }
    }

    #[test]
    fn constant_observable_has_zero_se() {
        let chain = fake_chain(vec![1.0; 400]);
        let obs: Observable = Arc::new(|_s: &ChainState| 2.5);
        let (mean, se) = ergodic_average(&chain, &obs).unwrap();
        assert_eq!(mean, 2.5);
        assert_eq!(se, 0.0);
    }

    #[test]
    fn short_chains_are_rejected() {
        let chain = fake_chain(vec![1.0; 50]);
        let obs = coordinate(0);
        assert!(matches!(
            ergodic_average(&chain, &obs),
            Err(crate::Error::InsufficientData(_))
        ));
        assert!(effective_sample_size(&chain, &obs).is_err());
    }

    #[test]
    fn iid_chain_mean_within_four_se() {
        // CLT oracle: |mean| <= 4 SE in at least 99% of seeded trials, and
        // the x^2 moment sits within 4 SE of 1.
        use rand_distr::{Distribution, StandardNormal};
        let trials = 200;
        let mut mean_ok = 0;
        let mut sq_ok = 0;
        for t in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(900 + t);
            let values: Vec<f64> = (0..2000).map(|_| StandardNormal.sample(&mut rng)).collect();
            let chain = fake_chain(values);
            let (mean, se) = ergodic_average(&chain, &coordinate(0)).unwrap();
            if mean.abs() <= 4.0 * se {
                mean_ok += 1;
            }
            let (m2, se2) = ergodic_average(&chain, &coordinate_squared(0)).unwrap();
            if (m2 - 1.0).abs() <= 4.0 * se2 {
                sq_ok += 1;
            }
        }
        assert!(mean_ok >= 198, "mean within 4 SE in {mean_ok}/200 trials");
        assert!(sq_ok >= 198, "x^2 within 4 SE in {sq_ok}/200 trials");
    }

    #[test]
    fn ess_of_iid_chain_is_near_n() {
        use rand_distr::{Distribution, StandardNormal};
        for t in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(50 + t);
            let n = 4000;
            let values: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let chain = fake_chain(values);
            let ess = effective_sample_size(&chain, &coordinate(0)).unwrap();
            let ratio = ess / n as f64;
            assert!((0.8..=1.2).contains(&ratio), "trial {t}: ESS/n = {ratio}");
        }
    }

    #[test]
    fn ess_of_constant_chain_hits_floor() {
        let chain = fake_chain(vec![3.0; 500]);
        let ess = effective_sample_size(&chain, &coordinate(0)).unwrap();
        assert!(ess <= ESS_FLOOR + 1e-12);
    }

    #[test]
    fn ess_of_ar1_matches_analytic_ratio() {
        use rand_distr::{Distribution, StandardNormal};
        let rho: f64 = 0.5;
        let expected = (1.0 - rho) / (1.0 + rho);
        let mut ratios = Vec::new();
        for t in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(7000 + t);
            let n = 20_000;
            let mut values = Vec::with_capacity(n);
            let mut x = 0.0;
            for _ in 0..n {
                let z: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + (1.0 - rho * rho).sqrt() * z;
                values.push(x);
            }
            let chain = fake_chain(values);
            let ess = effective_sample_size(&chain, &coordinate(0)).unwrap();
            ratios.push(ess / n as f64);
        }
        let mean_ratio = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!(
            (mean_ratio - expected).abs() <= 0.3 * expected,
            "mean ESS/n {mean_ratio} vs analytic {expected}"
        );
    }

    #[test]
    fn moment_report_z_score_definition() {
        let chain =
            fake_chain((0..400).map(|i| (i % 5) as f64 + 0.1 * (i as f64 * 0.37).sin()).collect());
        let r = moment_report(&chain, &coordinate(0), "x", Some((2.0, "closed_form"))).unwrap();
        let z = r.z_score.unwrap();
        assert!((z - (r.estimate - 2.0) / r.standard_error).abs() < 1e-15);
        assert_eq!(r.provenance, "closed_form");
    }

    #[test]
    fn histogram_kl_self_comparison_is_near_floor() {
        // target = histogram of its own oracle samples
        use rand_distr::{Distribution, StandardNormal};
        let grid = HistogramGrid::new(vec![(-4.0, 4.0)], vec![32]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let positions: Vec<Vec<f64>> = (0..200_000)
            .map(|_| {
                let v: f64 = StandardNormal.sample(&mut rng);
                vec![v]
            })
            .collect();
        let mut counts = vec![0usize; grid.total_bins()];
        for p in &positions {
            counts[grid.bin_of(p)] += 1;
        }
        let self_mass: Vec<f64> =
            counts.iter().map(|&c| c as f64 / positions.len() as f64).collect();
        let trace = histogram_kl(&positions, &self_mass, &grid, 1).unwrap();
        assert!(trace[0].1.abs() < 1e-9 + 1e-12, "self-KL {}", trace[0].1);
    }

    #[test]
    fn histogram_kl_decreases_toward_stationarity() {
        // deterministic surrogate: early samples far from the target mass,
        // later samples drawn from it
        use rand_distr::{Distribution, StandardNormal};
        let grid = HistogramGrid::new(vec![(-4.0, 4.0)], vec![24]).unwrap();
        let density = |x: &[f64]| (-x[0] * x[0] / 2.0).exp();
        let mass = grid.target_masses(&density, 16);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut positions: Vec<Vec<f64>> = (0..500).map(|_| vec![3.5]).collect();
        positions.extend((0..4500).map(|_| {
            let v: f64 = StandardNormal.sample(&mut rng);
            vec![v]
        }));
        let trace = histogram_kl(&positions, &mass, &grid, 10).unwrap();
        assert!(trace.first().unwrap().1 > trace.last().unwrap().1);
    }

    #[test]
    fn reports_are_deterministic() {
        let chain = fake_chain((0..300).map(|i| (i as f64 * 0.7).sin()).collect());
        let a = ergodic_average(&chain, &coordinate(0)).unwrap();
        let b = ergodic_average(&chain, &coordinate(0)).unwrap();
        assert_eq!(a, b);
        let e1 = effective_sample_size(&chain, &coordinate(0)).unwrap();
        let e2 = effective_sample_size(&chain, &coordinate(0)).unwrap();
        assert_eq!(e1, e2);
    }
}
