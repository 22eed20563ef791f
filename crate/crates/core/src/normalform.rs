//! Symplectic normal forms `sum_j lambda_j/2 (q_j^2 + p_j^2)`, the frequency
//! map `F`, and the invariant compatible complex structure.
//!
//! Positive-definite `H` go through a direct Williamson factorization:
//! Cholesky `H = L L^T`, then the canonical form of the antisymmetric matrix
//! `L^{-1} J L^{-T}`. Indefinite strongly stable `H` are split along their
//! resonance clusters first; on each cluster `H` is definite (Krein), so the
//! same factorization applies with the restricted symplectic form.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, j_matrix, max_abs, Mat};
use crate::stability::{self, SignedSpectrum, StabilityClass, TolProfile};
use crate::symplectic::{
    conjugate, random_symplectic, QuadraticHamiltonian, SymplecticTransform,
};

/// Frequencies closer than this (relative to the largest) are reported as one entry.
const GROUPING_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormResult {
    pub diagonalizer: SymplecticTransform,
    pub frequencies: SignedSpectrum,
    /// Signed coefficients, one per degree of freedom, nondecreasing.
    pub lambdas: Vec<f64>,
    /// `|S^T H S - diag(lambda, lambda)|_max`.
    pub residual: f64,
}

impl NormalFormResult {
    pub fn normal_form(&self) -> QuadraticHamiltonian {
        QuadraticHamiltonian::normal_form(&self.lambdas).expect("nonempty")
    }
}

fn finish(h: &QuadraticHamiltonian, s: Mat, lambdas: Vec<f64>) -> NormalFormResult {
    let diag: Vec<f64> = lambdas.iter().chain(lambdas.iter()).cloned().collect();
    let target = Mat::from_diagonal(&DVector::from_vec(diag));
    let residual = max_abs(&(s.transpose() * h.matrix() * &s - target));
    let top = lambdas.iter().fold(0.0_f64, |acc, l| acc.max(l.abs()));
    let frequencies = SignedSpectrum::from_lambdas(&lambdas, GROUPING_TOL * top.max(f64::MIN_POSITIVE));
    NormalFormResult {
        diagonalizer: SymplecticTransform::new_unchecked(s),
        frequencies,
        lambdas,
        residual,
    }
}

/// Williamson normal form of a positive-definite `H`.
pub fn williamson(h: &QuadraticHamiltonian) -> Result<NormalFormResult> {
    let j = j_matrix(h.n());
    let (s, d) = linalg::williamson_pair(h.matrix(), &j)?;
    Ok(finish(h, s, d))
}

/// The nondecreasing tuple of normal-mode frequencies of a positive-definite `H`.
pub fn frequency_map_f(h: &QuadraticHamiltonian) -> Result<Vec<f64>> {
    williamson(h).map(|r| r.lambdas)
}

/// Signed normal form of a strongly stable `H`.
pub fn normal_form(h: &QuadraticHamiltonian, tol: &TolProfile) -> Result<NormalFormResult> {
    let d = stability::decompose(h, tol)?;
    let report = stability::classify_decomposition(&d, tol);
    if report.class != StabilityClass::StronglyStable {
        return Err(Error::NotStronglyStable(report.reason));
    }
    let n = h.n();
    let j = j_matrix(n);
    // (signed lambda, q column, p column)
    let mut modes: Vec<(f64, DVector<f64>, DVector<f64>)> = Vec::with_capacity(n);
    for cluster in &d.clusters {
        let basis = cluster.real_basis.as_ref().expect("positive cluster carries a basis");
        let (pos, _) = cluster.krein_counts();
        let sign = if pos > 0 { 1.0 } else { -1.0 };
        let restricted = linalg::symmetrize(&(basis.transpose() * h.matrix() * basis)) * sign;
        let omega = basis.transpose() * &j * basis;
        let omega = (&omega - omega.transpose()) * 0.5;
        let (b, dvals) = linalg::williamson_pair(&restricted, &omega)?;
        let cols = basis * b;
        let m = cluster.size;
        for (i, dv) in dvals.iter().enumerate() {
            modes.push((sign * dv, cols.column(i).into_owned(), cols.column(m + i).into_owned()));
        }
    }
    if modes.len() != n {
        return Err(Error::Numerical(format!("recovered {} of {n} normal modes", modes.len())));
    }
    modes.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut s = Mat::zeros(2 * n, 2 * n);
    let mut lambdas = Vec::with_capacity(n);
    for (i, (l, q, p)) in modes.into_iter().enumerate() {
        s.set_column(i, &q);
        s.set_column(n + i, &p);
        lambdas.push(l);
    }
    Ok(finish(h, s, lambdas))
}

/// A complex structure `J0` commuting with `A = J H` whose metric
/// `x^T J^T J0 y` is symmetric positive definite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibleComplexStructure {
    pub j0: Mat,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexStructureCheck {
    /// `|J0^2 + I|_max`.
    pub square_residual: f64,
    /// `|g - g^T|_max` for `g = J^T J0`.
    pub metric_asymmetry: f64,
    /// Smallest eigenvalue of the symmetrized metric.
    pub metric_min_eigenvalue: f64,
    /// `|A J0 - J0 A|_max`, relative to `|A|_max`.
    pub commutator_residual: f64,
}

impl CompatibleComplexStructure {
    pub fn metric(&self) -> Mat {
        let n = self.j0.nrows() / 2;
        j_matrix(n).transpose() * &self.j0
    }

    pub fn check(&self, h: &QuadraticHamiltonian) -> Result<ComplexStructureCheck> {
        let dim = self.j0.nrows();
        let square_residual = max_abs(&(&self.j0 * &self.j0 + Mat::identity(dim, dim)));
        let g = self.metric();
        let metric_asymmetry = linalg::asymmetry(&g);
        let metric_min_eigenvalue = linalg::symmetric_eigenvalues(&linalg::symmetrize(&g))?[0];
        let a = h.generator();
        let a = a.matrix();
        let commutator_residual = max_abs(&(a * &self.j0 - &self.j0 * a)) / max_abs(a).max(f64::MIN_POSITIVE);
        Ok(ComplexStructureCheck { square_residual, metric_asymmetry, metric_min_eigenvalue, commutator_residual })
    }
}

/// The unique `H`-invariant compatible complex structure, `J0 = S J S^{-1}`
/// for a normal-form diagonalizer `S`.
///
/// On a normal form `diag(lambda, lambda)` the standard `J` already commutes
/// with the generator and has metric `J^T J = I`, whatever the signs of the
/// `lambda_j`, so no per-block correction is needed in block coordinates.
pub fn invariant_complex_structure(h: &QuadraticHamiltonian, tol: &TolProfile) -> Result<CompatibleComplexStructure> {
    let nf = normal_form(h, tol)?;
    let s = &nf.diagonalizer;
    let j = j_matrix(h.n());
    Ok(CompatibleComplexStructure { j0: s.matrix() * j * s.inverse().matrix() })
}

/// The same structure computed through an independent diagonalization of
/// `R^T H R` for a random symplectic `R`, mapped back by equivariance.
pub fn invariant_complex_structure_via(
    h: &QuadraticHamiltonian,
    seed: u64,
    spread: f64,
    tol: &TolProfile,
) -> Result<CompatibleComplexStructure> {
    let r = random_symplectic(h.n(), spread, seed)?;
    let moved = conjugate(h, &r)?;
    let inner = invariant_complex_structure(&moved, tol)?;
    Ok(CompatibleComplexStructure { j0: r.matrix() * inner.j0 * r.inverse().matrix() })
}
