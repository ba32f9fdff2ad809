//! Sample-space backends: Euclidean space, flat tori, matrix Lie groups with
//! orthonormal algebra bases, and embedded unit spheres, plus the maps the
//! integrators need (exponential, tangent projection, geodesic flow).
//!
//! All values are immutable after construction and all operations are pure,
//! so these types can be shared freely across threads.

mod rotation;

pub use rotation::{log_near_identity, newton_schulz_orthonormalize, rodrigues_so3};

use crate::error::{Error, Result};
use nalgebra::{Complex, DMatrix};

/// Complex square matrix used for Lie-group elements and algebra generators.
/// `Complex<f64>` is a pair of reals, so real groups round-trip losslessly.
pub type CMat = DMatrix<Complex<f64>>;

pub fn cmat_from_real(m: &DMatrix<f64>) -> CMat {
    m.map(|x| Complex::new(x, 0.0))
}

pub fn real_part(m: &CMat) -> DMatrix<f64> {
    m.map(|z| z.re)
}

/// Flat n-dimensional Euclidean chart.
#[derive(Debug, Clone, PartialEq)]
pub struct EuclideanSpace {
    dim: usize,
}

impl EuclideanSpace {
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidInput("euclidean dimension must be >= 1".into()));
        }
        Ok(Self { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Flat torus with one period per axis. Points are wrapped into
/// `[0, period)` on write so every state has a single canonical
/// representative (histogram diagnostics stay unambiguous).
#[derive(Debug, Clone, PartialEq)]
pub struct FlatTorus {
    periods: Vec<f64>,
}

impl FlatTorus {
    pub fn new(periods: Vec<f64>) -> Result<Self> {
        if periods.is_empty() {
            return Err(Error::InvalidInput("torus dimension must be >= 1".into()));
        }
        if periods.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("torus periods must be positive and finite".into()));
        }
        Ok(Self { periods })
    }

    pub fn dim(&self) -> usize {
        self.periods.len()
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    /// Wrap a chart point into the canonical cell `[0, period)^n`.
    pub fn wrap(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.periods)
            .map(|(&xi, &p)| {
                let r = xi.rem_euclid(p);
                // rem_euclid can return p itself when xi is a tiny negative number
                if r >= p {
                    r - p
                } else {
                    r
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupFlavor {
    SOn,
    SUn,
}

/// Matrix Lie group with a fixed orthonormal basis of its algebra.
///
/// The pairing is `<a, b> = -Re tr(ab)`, which is the Frobenius inner
/// product on skew-symmetric / skew-Hermitian matrices. The default bases
/// (elementary skew matrices for so(n), generalized Gell-Mann generators for
/// su(n)) are orthonormal under it.
#[derive(Debug, Clone)]
pub struct MatrixLieGroup {
    n: usize,
    flavor: GroupFlavor,
    basis: Vec<CMat>,
    metric: DMatrix<f64>,
    basis_is_real: bool,
}

/// `<a, b> = -Re tr(ab)`; positive definite on skew-(symmetric|Hermitian) matrices.
pub fn algebra_pairing(a: &CMat, b: &CMat) -> f64 {
    -(a * b).trace().re
}

impl MatrixLieGroup {
    /// SO(n) with the elementary skew basis `(E_ij - E_ji)/sqrt(2)`, i < j.
    pub fn so(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("SO(n) requires n >= 2".into()));
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let mut basis = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let mut m = DMatrix::<f64>::zeros(n, n);
                m[(i, j)] = inv_sqrt2;
                m[(j, i)] = -inv_sqrt2;
                basis.push(cmat_from_real(&m));
            }
        }
        let dim = basis.len();
        Self::with_basis(n, GroupFlavor::SOn, basis, DMatrix::identity(dim, dim))
    }

    /// SU(n) with the generalized Gell-Mann generators, scaled to unit norm
    /// and multiplied by i so they are skew-Hermitian and traceless.
    pub fn su(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput("SU(n) requires n >= 2".into()));
        }
        let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
        let i_unit = Complex::new(0.0, 1.0);
        let mut basis = Vec::new();
        for j in 0..n {
            for k in (j + 1)..n {
                // i * (E_jk + E_kj) / sqrt(2)
                let mut sym = CMat::zeros(n, n);
                sym[(j, k)] = i_unit * inv_sqrt2;
                sym[(k, j)] = i_unit * inv_sqrt2;
                basis.push(sym);
                // (E_jk - E_kj) / sqrt(2)
                let mut asym = CMat::zeros(n, n);
                asym[(j, k)] = Complex::new(inv_sqrt2, 0.0);
                asym[(k, j)] = Complex::new(-inv_sqrt2, 0.0);
                basis.push(asym);
            }
        }
        for l in 1..n {
            // i * diag(1, ..., 1, -l, 0, ..., 0) / sqrt(l(l+1))
            let norm = (l as f64 * (l as f64 + 1.0)).sqrt();
            let mut d = CMat::zeros(n, n);
            for j in 0..l {
                d[(j, j)] = i_unit / norm;
            }
            d[(l, l)] = -i_unit * (l as f64) / norm;
            basis.push(d);
        }
        let dim = basis.len();
        Self::with_basis(n, GroupFlavor::SUn, basis, DMatrix::identity(dim, dim))
    }

    /// Build a group from a caller-supplied algebra basis. The basis must be
    /// skew-symmetric (SOn) or skew-Hermitian traceless (SUn) and orthonormal
    /// under the `-Re tr(ab)` pairing, both to 1e-12.
    pub fn with_basis(
        n: usize,
        flavor: GroupFlavor,
        basis: Vec<CMat>,
        metric: DMatrix<f64>,
    ) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::InvalidInput("algebra basis must be non-empty".into()));
        }
        for (k, xi) in basis.iter().enumerate() {
            if xi.nrows() != n || xi.ncols() != n {
                return Err(Error::InvalidInput(format!(
                    "basis element {k} is {}x{}, expected {n}x{n}",
                    xi.nrows(),
                    xi.ncols()
                )));
            }
            let skew_defect = match flavor {
                GroupFlavor::SOn => (xi.transpose() + xi).norm(),
                GroupFlavor::SUn => (xi.adjoint() + xi).norm(),
            };
            if skew_defect > 1e-12 {
                return Err(Error::InvalidInput(format!(
                    "basis element {k} is not skew (defect {skew_defect:.2e})"
                )));
            }
            if flavor == GroupFlavor::SUn && xi.trace().norm() > 1e-12 {
                return Err(Error::InvalidInput(format!("basis element {k} is not traceless")));
            }
            if flavor == GroupFlavor::SOn && xi.iter().any(|z| z.im.abs() > 1e-14) {
                return Err(Error::InvalidInput(format!(
                    "SO(n) basis element {k} has imaginary entries"
                )));
            }
        }
        for i in 0..basis.len() {
            for j in i..basis.len() {
                let expected = if i == j { 1.0 } else { 0.0 };
                let p = algebra_pairing(&basis[i], &basis[j]);
                if (p - expected).abs() > 1e-12 {
                    return Err(Error::InvalidInput(format!(
                        "basis is not orthonormal: <xi_{i}, xi_{j}> = {p:.15}"
                    )));
                }
            }
        }
        let dim = basis.len();
        if metric.nrows() != dim || metric.ncols() != dim {
            return Err(Error::InvalidInput("metric matrix has wrong dimensions".into()));
        }
        if (metric.clone() - metric.transpose()).norm() > 1e-12 {
            return Err(Error::InvalidInput("metric matrix must be symmetric".into()));
        }
        let basis_is_real = flavor == GroupFlavor::SOn;
        Ok(Self { n, flavor, basis, metric, basis_is_real })
    }

    pub fn matrix_dim(&self) -> usize {
        self.n
    }

    pub fn algebra_dim(&self) -> usize {
        self.basis.len()
    }

    pub fn flavor(&self) -> GroupFlavor {
        self.flavor
    }

    pub fn basis(&self) -> &[CMat] {
        &self.basis
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn has_identity_metric(&self) -> bool {
        let id = DMatrix::<f64>::identity(self.basis.len(), self.basis.len());
        (self.metric.clone() - id).norm() < 1e-14
    }

    pub fn identity(&self) -> CMat {
        CMat::identity(self.n, self.n)
    }

    /// Algebra element `sum_i v_i xi_i` from coefficients.
    pub fn algebra_element(&self, coeffs: &[f64]) -> Result<CMat> {
        if coeffs.len() != self.basis.len() {
            return Err(Error::InvalidInput(format!(
                "coefficient vector has length {}, algebra dimension is {}",
                coeffs.len(),
                self.basis.len()
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput("non-finite algebra coefficients".into()));
        }
        let mut out = CMat::zeros(self.n, self.n);
        for (c, xi) in coeffs.iter().zip(&self.basis) {
            out.zip_apply(xi, |o, x| *o += Complex::new(*c, 0.0) * x);
        }
        Ok(out)
    }

    /// Coefficients of a (skew) matrix in the orthonormal basis.
    pub fn coefficients_of(&self, x: &CMat) -> Vec<f64> {
        self.basis.iter().map(|xi| algebra_pairing(x, xi)).collect()
    }

    /// Group exponential `exp(sum_i v_i xi_i)`.
    ///
    /// so(3) goes through the Rodrigues closed form; everything else uses
    /// scaling-and-squaring with the degree-13 Pade approximant.
    pub fn lie_exp(&self, coeffs: &[f64]) -> Result<CMat> {
        let x = self.algebra_element(coeffs)?;
        Ok(self.exp_algebra(&x))
    }

    /// Exponential of an already-assembled algebra element.
    pub fn exp_algebra(&self, x: &CMat) -> CMat {
        if self.basis_is_real && self.n == 3 {
            let r = rodrigues_so3(&real_part(x));
            return cmat_from_real(&r);
        }
        if self.basis_is_real {
            return cmat_from_real(&real_part(x).exp());
        }
        x.exp()
    }

    /// Frobenius defect of group membership: `||g^T g - I||` for SO(n),
    /// `||g^dagger g - I||` for SU(n).
    pub fn membership_defect(&self, g: &CMat) -> f64 {
        let id = CMat::identity(self.n, self.n);
        match self.flavor {
            GroupFlavor::SOn => (g.transpose() * g - &id).norm(),
            GroupFlavor::SUn => (g.adjoint() * g - &id).norm(),
        }
    }

    /// `|det g - 1|`; for SU(n) membership this must also be small.
    pub fn det_defect(&self, g: &CMat) -> f64 {
        (g.determinant() - Complex::new(1.0, 0.0)).norm()
    }

    /// Components `Re tr(dV^T g xi_i)` of the pulled-back potential gradient.
    ///
    /// `dv` holds the partial derivatives of the potential with respect to the
    /// matrix entries of `g`; for SU(n) the entry convention is
    /// `dV_ab = dV/dRe(g_ab) - i dV/dIm(g_ab)` so that `Re tr(dV^T M)` is the
    /// directional derivative along `M`. The result is the force appearing in
    /// the algebra-valued leapfrog kick.
    pub fn algebra_force(&self, g: &CMat, dv: &CMat) -> Result<Vec<f64>> {
        if g.nrows() != self.n || g.ncols() != self.n || dv.nrows() != self.n || dv.ncols() != self.n
        {
            return Err(Error::InvalidInput(format!(
                "algebra_force expects {n}x{n} matrices",
                n = self.n
            )));
        }
        // tr(dV^T g xi_i) = tr(xi_i C) with C = dV^T g; one matmul, then
        // cheap contractions against each generator.
        let c = dv.transpose() * g;
        let mut out = Vec::with_capacity(self.basis.len());
        for xi in &self.basis {
            let mut acc = Complex::new(0.0, 0.0);
            for a in 0..self.n {
                for b in 0..self.n {
                    acc += xi[(a, b)] * c[(b, a)];
                }
            }
            out.push(acc.re);
        }
        Ok(out)
    }
}

/// Unit sphere S^{k-1} embedded in R^k, with the induced round metric.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddedSphere {
    ambient_dim: usize,
}

/// Stored sphere points must satisfy this bound on `| ||q|| - 1 |`.
pub const SPHERE_POINT_TOL: f64 = 1e-10;
/// Inputs farther than this from the sphere are rejected.
pub const SPHERE_INPUT_TOL: f64 = 1e-6;

impl EmbeddedSphere {
    pub fn new(ambient_dim: usize) -> Result<Self> {
        if ambient_dim < 2 {
            return Err(Error::InvalidInput("sphere ambient dimension must be >= 2".into()));
        }
        Ok(Self { ambient_dim })
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient_dim
    }

    pub fn north_pole(&self) -> Vec<f64> {
        let mut q = vec![0.0; self.ambient_dim];
        q[self.ambient_dim - 1] = 1.0;
        q
    }

    fn check_point(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.ambient_dim {
            return Err(Error::InvalidInput(format!(
                "point has dimension {}, ambient dimension is {}",
                q.len(),
                self.ambient_dim
            )));
        }
        let norm = norm(q);
        if (norm - 1.0).abs() > SPHERE_INPUT_TOL {
            return Err(Error::InvalidPoint(format!("||q|| = {norm:.12} is not on the unit sphere")));
        }
        Ok(())
    }

    /// Orthogonal projection of an ambient vector onto the tangent space at `q`:
    /// `w - (q . w) q`.
    pub fn project_horizontal(&self, q: &[f64], w: &[f64]) -> Result<Vec<f64>> {
        self.check_point(q)?;
        if w.len() != self.ambient_dim {
            return Err(Error::InvalidInput("vector dimension mismatch".into()));
        }
        let qw = dot(q, w);
        Ok(w.iter().zip(q).map(|(&wi, &qi)| wi - qw * qi).collect())
    }

    /// Great-circle flow for time `t` starting at `(q, v)` with `v` tangent.
    /// Preserves the unit norm, tangency, and speed.
    pub fn geodesic(&self, q: &[f64], v: &[f64], t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check_point(q)?;
        if v.len() != self.ambient_dim {
            return Err(Error::InvalidInput("velocity dimension mismatch".into()));
        }
        let speed = norm(v);
        let tangency = dot(q, v).abs();
        if tangency > SPHERE_POINT_TOL * speed.max(1.0) {
            return Err(Error::InvalidInput(format!(
                "velocity is not tangent: |q.v| = {tangency:.3e}"
            )));
        }
        if speed == 0.0 {
            return Ok((q.to_vec(), v.to_vec()));
        }
        let (s, c) = (speed * t).sin_cos();
        let qt: Vec<f64> = q.iter().zip(v).map(|(&qi, &vi)| qi * c + vi / speed * s).collect();
        let vt: Vec<f64> = q.iter().zip(v).map(|(&qi, &vi)| -qi * speed * s + vi * c).collect();
        Ok((qt, vt))
    }

    /// Renormalize `q` onto the sphere and re-project `v` onto its tangent
    /// space. Constraint maintenance for long chains.
    pub fn reproject(&self, q: &[f64], v: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = norm(q);
        let qn: Vec<f64> = q.iter().map(|&x| x / n).collect();
        let qv = dot(&qn, v);
        let vn: Vec<f64> = v.iter().zip(&qn).map(|(&vi, &qi)| vi - qv * qi).collect();
        (qn, vn)
    }
}

/// Geometry selected for an experiment.
#[derive(Debug, Clone)]
pub enum Geometry {
    Euclidean(EuclideanSpace),
    Torus(FlatTorus),
    LieGroup(MatrixLieGroup),
    Sphere(EmbeddedSphere),
}

impl Geometry {
    pub fn name(&self) -> &'static str {
        match self {
            Geometry::Euclidean(_) => "euclidean",
            Geometry::Torus(_) => "torus",
            Geometry::LieGroup(g) => match g.flavor() {
                GroupFlavor::SOn => "so(n)",
                GroupFlavor::SUn => "su(n)",
            },
            Geometry::Sphere(_) => "sphere",
        }
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
