//! Unadjusted underdamped Langevin trajectories on Euclidean phase space:
//! exact (or Heun) thermostat step on the momentum composed with a velocity
//! Verlet step of the Hamiltonian part. No MH correction; chains built from
//! this sampler carry `biased: true`.

use crate::error::{Error, Result};
use crate::recipe::TargetDensity;
use crate::samplers::standard_normals;
use nalgebra::DMatrix;
use rand_chacha::ChaCha8Rng;

/// `dq = M^{-1} p dt`, `dp = -grad(V) dt - C M^{-1} p dt + sqrt(2C) dW` with
/// constant SPD mass matrix `M` and constant PSD friction `C`.
pub struct UnderdampedLangevin {
    target: TargetDensity,
    mass_inv: DMatrix<f64>,
    friction: DMatrix<f64>,
    noise_sqrt: DMatrix<f64>,
    /// Set when `C` and `M` are multiples of the identity, enabling the
    /// exact scalar OU thermostat.
    scalar_rates: Option<(f64, f64)>,
}

impl UnderdampedLangevin {
    pub fn new(target: TargetDensity, mass: DMatrix<f64>, friction: DMatrix<f64>) -> Result<Self> {
        let n = target.dim();
        if mass.nrows() != n || friction.nrows() != n {
            return Err(Error::InvalidInput("mass/friction dimensions mismatch".into()));
        }
        if (mass.clone() - mass.transpose()).abs().max() > 1e-12
            || (friction.clone() - friction.transpose()).abs().max() > 1e-12
        {
            return Err(Error::InvalidInput("mass and friction must be symmetric".into()));
        }
        let mass_inv = mass
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInput("mass matrix must be invertible".into()))?;
        // sqrt(2C) via the symmetric eigendecomposition; C only needs PSD
        let eig = friction.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l < -1e-12) {
            return Err(Error::InvalidInput("friction must be positive semi-definite".into()));
        }
        let sqrt_vals =
            DMatrix::from_diagonal(&eig.eigenvalues.map(|l| (2.0 * l.max(0.0)).sqrt()));
        let noise_sqrt = &eig.eigenvectors * sqrt_vals * eig.eigenvectors.transpose();

        let id = DMatrix::<f64>::identity(n, n);
        let scalar_rates = {
            let c0 = friction[(0, 0)];
            let m0 = mass[(0, 0)];
            let c_scalar = (friction.clone() - &id * c0).abs().max() < 1e-14;
            let m_scalar = (mass.clone() - &id * m0).abs().max() < 1e-14;
            if c_scalar && m_scalar && c0 > 0.0 {
                Some((c0, m0))
            } else {
                None
            }
        };
        Ok(Self { target, mass_inv, friction, noise_sqrt, scalar_rates })
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    /// Hamiltonian component of the phase-space drift:
    /// `(M^{-1} p, -grad(V))`.
    pub fn hamiltonian_part(&self, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut dq = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                dq[i] += self.mass_inv[(i, j)] * p[j];
            }
        }
        let grad = self.target.grad_potential(q);
        let dp = grad.iter().map(|g| -g).collect();
        (dq, dp)
    }

    /// Dissipative component of the phase-space drift: `(0, -C M^{-1} p)`.
    pub fn dissipative_part(&self, q: &[f64], p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let _ = q;
        let n = self.dim();
        let mut mp = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                mp[i] += self.mass_inv[(i, j)] * p[j];
            }
        }
        let mut dp = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                dp[i] -= self.friction[(i, j)] * mp[j];
            }
        }
        (vec![0.0; n], dp)
    }

    pub fn energy(&self, q: &[f64], p: &[f64]) -> f64 {
        let n = self.dim();
        let mut kinetic = 0.0;
        for i in 0..n {
            for j in 0..n {
                kinetic += 0.5 * p[i] * self.mass_inv[(i, j)] * p[j];
            }
        }
        self.target.potential(q) + kinetic
    }

    /// Thermostat step on `p` over time `dt`. Exact OU transition when both
    /// `C` and `M` are scalar multiples of the identity, the Heun
    /// predictor-corrector on the linear drift otherwise.
    fn thermostat(&self, p: &mut [f64], dt: f64, rng: &mut ChaCha8Rng) {
        let n = self.dim();
        if self.friction.abs().max() == 0.0 {
            return;
        }
        let z = standard_normals(rng, n);
        if let Some((c, m)) = self.scalar_rates {
            let rate = c / m;
            let alpha = (-rate * dt).exp();
            // stationary momentum variance is m per component
            let std = (m * (1.0 - alpha * alpha)).sqrt();
            for i in 0..n {
                p[i] = alpha * p[i] + std * z[i];
            }
            return;
        }
        // Heun on dp = -C M^{-1} p dt + sqrt(2C) dW (constant noise)
        let drift = |p: &[f64]| -> Vec<f64> {
            let mut mp = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    mp[i] += self.mass_inv[(i, j)] * p[j];
                }
            }
            let mut out = vec![0.0; n];
            for i in 0..n {
                for j in 0..n {
                    out[i] -= self.friction[(i, j)] * mp[j];
                }
            }
            out
        };
        let sqdt = dt.sqrt();
        let mut dw = vec![0.0; n];
        for i in 0..n {
            for j in 0..n {
                dw[i] += self.noise_sqrt[(i, j)] * z[j] * sqdt;
            }
        }
        let a0 = drift(p);
        let predictor: Vec<f64> = (0..n).map(|i| p[i] + a0[i] * dt + dw[i]).collect();
        let a1 = drift(&predictor);
        for i in 0..n {
            p[i] += 0.5 * (a0[i] + a1[i]) * dt + dw[i];
        }
    }

    /// One step: thermostat, then velocity Verlet on the Hamiltonian part.
    /// Returns the new phase point and the leapfrog energy error.
    pub fn step(
        &self,
        q: &[f64],
        p: &[f64],
        dt: f64,
        rng: &mut ChaCha8Rng,
    ) -> Result<((Vec<f64>, Vec<f64>), f64)> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput("dt must be positive".into()));
        }
        let n = self.dim();
        let mut p = p.to_vec();
        let mut q = q.to_vec();
        self.thermostat(&mut p, dt, rng);
        let h0 = self.energy(&q, &p);
        let mut grad = self.target.grad_potential(&q);
        for i in 0..n {
            p[i] -= 0.5 * dt * grad[i];
        }
        for i in 0..n {
            for j in 0..n {
                q[i] += dt * self.mass_inv[(i, j)] * p[j];
            }
        }
        grad = self.target.grad_potential(&q);
        for i in 0..n {
            p[i] -= 0.5 * dt * grad[i];
        }
        let delta = self.energy(&q, &p) - h0;
        Ok(((q, p), delta))
    }
}
