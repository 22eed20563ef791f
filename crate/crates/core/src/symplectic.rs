//! Symplectic linear algebra on `R^{2n}`: the standard form, quadratic
//! Hamiltonians and their generators, symplectic transforms, random
//! generation, and the Cartan splitting `sp(2n) = u(n) + s`.

use nalgebra::DVector;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, j_matrix, max_abs, Mat};
use crate::rng;

/// Relative tolerance for the symplectic condition `S^T J S = J`.
pub const SYMPLECTIC_TOL: f64 = 1e-9;
/// Relative tolerance for membership in `sp(2n)`.
pub const HAMILTONIAN_TOL: f64 = 1e-9;

fn half_dim(rows: usize, cols: usize) -> Result<usize> {
    if rows != cols || rows == 0 || !rows.is_multiple_of(2) {
        return Err(Error::BadShape { rows, cols });
    }
    Ok(rows / 2)
}

fn check_finite(m: &Mat) -> Result<()> {
    if m.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite)
    }
}

/// The matrix of `omega = sum dq_j ^ dp_j` in block coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticForm {
    n: usize,
    j: Mat,
}

impl SymplecticForm {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn matrix(&self) -> &Mat {
        &self.j
    }
}

pub fn standard_form(n: usize) -> Result<SymplecticForm> {
    if n == 0 {
        return Err(Error::ZeroDegreesOfFreedom);
    }
    Ok(SymplecticForm { n, j: j_matrix(n) })
}

/// A real symmetric `2n x 2n` matrix `H`, the quadratic function `x^T H x / 2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticHamiltonian {
    h: Mat,
}

impl QuadraticHamiltonian {
    /// Symmetrizes the input.
    pub fn new(h: Mat) -> Result<Self> {
        half_dim(h.nrows(), h.ncols())?;
        check_finite(&h)?;
        Ok(Self { h: linalg::symmetrize(&h) })
    }

    /// `sum_j lambda_j/2 (q_j^2 + p_j^2)`, i.e. `diag(lambda, lambda)`.
    pub fn normal_form(lambda: &[f64]) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::ZeroDegreesOfFreedom);
        }
        let diag: Vec<f64> = lambda.iter().chain(lambda.iter()).cloned().collect();
        Self::new(Mat::from_diagonal(&DVector::from_vec(diag)))
    }

    pub fn n(&self) -> usize {
        self.h.nrows() / 2
    }

    pub fn matrix(&self) -> &Mat {
        &self.h
    }

    pub fn into_matrix(self) -> Mat {
        self.h
    }

    pub fn generator(&self) -> HamiltonianGenerator {
        HamiltonianGenerator { a: j_matrix(self.n()) * &self.h }
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { h: &self.h * c }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.n() != other.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), found: other.n() });
        }
        Ok(Self { h: &self.h + &other.h })
    }
}

/// A linear Hamiltonian vector field `A = J H`.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianGenerator {
    a: Mat,
}

impl HamiltonianGenerator {
    /// Accepts `a` when `J a` is symmetric to within `HAMILTONIAN_TOL * |a|`.
    pub fn new(a: Mat) -> Result<Self> {
        let n = half_dim(a.nrows(), a.ncols())?;
        check_finite(&a)?;
        let ja = j_matrix(n) * &a;
        let residual = linalg::asymmetry(&ja);
        let tol = HAMILTONIAN_TOL * max_abs(&a).max(1.0);
        if residual > tol {
            return Err(Error::NotHamiltonian { residual, tol });
        }
        Ok(Self { a })
    }

    pub fn n(&self) -> usize {
        self.a.nrows() / 2
    }

    pub fn matrix(&self) -> &Mat {
        &self.a
    }

    /// `H = J^{-1} A = -J A`, symmetrized.
    pub fn hamiltonian(&self) -> QuadraticHamiltonian {
        let h = -(j_matrix(self.n()) * &self.a);
        QuadraticHamiltonian { h: linalg::symmetrize(&h) }
    }
}

/// A matrix `S` with `S^T J S = J`.
#[derive(Debug, Clone, PartialEq)]
pub struct SymplecticTransform {
    s: Mat,
}

/// Outcome of a tolerance predicate together with the measured residual.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub holds: bool,
    pub residual: f64,
    pub tol: f64,
}

pub fn symplectic_residual(s: &Mat) -> Result<f64> {
    let n = half_dim(s.nrows(), s.ncols())?;
    let j = j_matrix(n);
    Ok(max_abs(&(s.transpose() * &j * s - &j)))
}

/// `|S^T J S - J|_max <= tol`.
pub fn is_symplectic(s: &Mat, tol: f64) -> Result<Check> {
    let residual = symplectic_residual(s)?;
    Ok(Check { holds: residual <= tol, residual, tol })
}

/// Default tolerance `SYMPLECTIC_TOL * |S|^2` (Frobenius norm, at least 1).
pub fn default_symplectic_tol(s: &Mat) -> f64 {
    SYMPLECTIC_TOL * s.norm_squared().max(1.0)
}

impl SymplecticTransform {
    pub fn new(s: Mat) -> Result<Self> {
        check_finite(&s)?;
        let check = is_symplectic(&s, default_symplectic_tol(&s))?;
        if !check.holds {
            return Err(Error::NotSymplectic { residual: check.residual, tol: check.tol });
        }
        Ok(Self { s })
    }

    pub fn identity(n: usize) -> Self {
        Self { s: Mat::identity(2 * n, 2 * n) }
    }

    pub(crate) fn new_unchecked(s: Mat) -> Self {
        Self { s }
    }

    pub fn n(&self) -> usize {
        self.s.nrows() / 2
    }

    pub fn matrix(&self) -> &Mat {
        &self.s
    }

    /// `S^{-1} = J^{-1} S^T J`.
    pub fn inverse(&self) -> Self {
        Self { s: linalg::j_conj(&self.s.transpose()) }
    }

    pub fn compose(&self, other: &Self) -> Self {
        Self { s: &self.s * &other.s }
    }

    /// `|S|_2 |S^{-1}|_2`, which equals `|S|_2^2` for symplectic `S`.
    pub fn condition(&self) -> f64 {
        linalg::spectral_norm(&self.s) * linalg::spectral_norm(&self.inverse().s)
    }
}

/// A random element of `sp(2n)`: `J * sym(X)` with `X_ij ~ U(-spread, spread)`.
pub fn random_generator<R: Rng + ?Sized>(n: usize, spread: f64, rng: &mut R) -> Mat {
    let dim = 2 * n;
    let mut x = Mat::zeros(dim, dim);
    if spread > 0.0 {
        for v in x.iter_mut() {
            *v = rng.random_range(-spread..spread);
        }
    }
    j_matrix(n) * linalg::symmetrize(&x)
}

pub fn random_symplectic_with<R: Rng + ?Sized>(n: usize, spread: f64, rng: &mut R) -> Result<SymplecticTransform> {
    if n == 0 {
        return Err(Error::ZeroDegreesOfFreedom);
    }
    if !(spread >= 0.0 && spread.is_finite()) {
        return Err(Error::InvalidParameter(format!("spread must be finite and non-negative, got {spread}")));
    }
    Ok(SymplecticTransform { s: random_generator(n, spread, rng).exp() })
}

/// `exp(A)` for a random generator `A`; deterministic in `seed`.
pub fn random_symplectic(n: usize, spread: f64, seed: u64) -> Result<SymplecticTransform> {
    random_symplectic_with(n, spread, &mut rng::stream(seed, 0))
}

/// `U = X + iY` acting on block coordinates as `[[X, -Y], [Y, X]]`.
pub fn unitary_embedding(u: &linalg::CMat) -> Result<SymplecticTransform> {
    let n = u.nrows();
    if n == 0 || u.ncols() != n {
        return Err(Error::BadShape { rows: u.nrows(), cols: u.ncols() });
    }
    let mut s = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = u[(i, j)];
            s[(i, j)] = z.re;
            s[(n + i, n + j)] = z.re;
            s[(i, n + j)] = -z.im;
            s[(n + i, j)] = z.im;
        }
    }
    SymplecticTransform::new(s)
}

/// A Haar-distributed element of `U(n) = Sp(2n) ∩ O(2n)`.
pub fn random_unitary_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<SymplecticTransform> {
    if n == 0 {
        return Err(Error::ZeroDegreesOfFreedom);
    }
    let z = linalg::CMat::from_fn(n, n, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        linalg::C64::new(re, im)
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { linalg::C64::new(1.0, 0.0) };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    unitary_embedding(&q)
}

/// The parts of a generator commuting (`u(n)`) and anticommuting with `J`.
#[derive(Debug, Clone, PartialEq)]
pub struct CartanSplit {
    pub k_part: HamiltonianGenerator,
    pub s_part: HamiltonianGenerator,
}

pub fn cartan_split(a: &HamiltonianGenerator) -> CartanSplit {
    let m = a.matrix();
    let j = j_matrix(a.n());
    let jaj = &j * m * &j;
    CartanSplit {
        k_part: HamiltonianGenerator { a: (m - &jaj) * 0.5 },
        s_part: HamiltonianGenerator { a: (m + &jaj) * 0.5 },
    }
}

/// `S^T H S`; on generators this is `A -> S^{-1} A S`.
pub fn conjugate(h: &QuadraticHamiltonian, s: &SymplecticTransform) -> Result<QuadraticHamiltonian> {
    if h.n() != s.n() {
        return Err(Error::DimensionMismatch { expected: h.n(), found: s.n() });
    }
    let m = s.matrix();
    QuadraticHamiltonian::new(m.transpose() * h.matrix() * m)
}
