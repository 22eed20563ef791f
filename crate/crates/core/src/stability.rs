//! Stability classification of quadratic Hamiltonians.
//!
//! A Hamiltonian `H` is *stable* when the flow of `A = J H` stays bounded:
//! the spectrum of `A` is purely imaginary and `A` is semisimple. It is
//! *strongly stable* when every nearby Hamiltonian is stable as well. In
//! terms of the signed normal-form coefficients `lambda_j`, strong stability
//! means every noncompact root value `lambda_j + lambda_k` (`j <= k`) is
//! nonzero: no zero frequency, and every resonance cluster carries a definite
//! Krein signature.
//!
//! The classification works from a complex Schur form of `A`. Eigenvalues are
//! grouped into resonance clusters by imaginary part; each cluster's
//! invariant subspace is extracted by reordering the Schur form, which gives
//! both the nilpotent residual (semisimplicity check) and the real invariant
//! subspace on which `H` is restricted to read off the Krein signature.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, j_matrix, ComplexSchur, Mat, C64};
use crate::normalform;
use crate::rng;
use crate::symplectic::{cartan_split, HamiltonianGenerator, QuadraticHamiltonian};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TolProfileName {
    Default,
    Strict,
}

/// Relative tolerances; each is multiplied by `|A|_F` (or `|H|_F` for the
/// Krein margin). A margin between `tol` and `band * tol` is ambiguous.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TolProfile {
    pub name: TolProfileName,
    pub real_part: f64,
    pub cluster: f64,
    pub nilpotent: f64,
    pub krein: f64,
    pub band: f64,
}

impl TolProfile {
    pub const DEFAULT: TolProfile = TolProfile {
        name: TolProfileName::Default,
        real_part: 1e-6,
        cluster: 1e-6,
        nilpotent: 1e-6,
        krein: 1e-9,
        band: 10.0,
    };

    pub const STRICT: TolProfile = TolProfile {
        name: TolProfileName::Strict,
        real_part: 1e-9,
        cluster: 1e-9,
        nilpotent: 1e-9,
        krein: 1e-12,
        band: 10.0,
    };

    pub fn from_name(name: TolProfileName) -> Self {
        match name {
            TolProfileName::Default => Self::DEFAULT,
            TolProfileName::Strict => Self::STRICT,
        }
    }
}

impl Default for TolProfile {
    fn default() -> Self {
        Self::DEFAULT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEntry {
    /// Signed normal-form coefficient: Krein sign times frequency.
    pub lambda: f64,
    pub krein_sign: i8,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignedSpectrum {
    pub n: usize,
    pub entries: Vec<SpectrumEntry>,
    pub residual_real_part: f64,
}

impl SignedSpectrum {
    /// Entries sorted by `lambda`, merging equal signed values.
    pub fn from_entries(n: usize, mut entries: Vec<SpectrumEntry>, residual_real_part: f64) -> Self {
        entries.retain(|e| e.multiplicity > 0);
        entries.sort_by(|a, b| a.lambda.total_cmp(&b.lambda));
        Self { n, entries, residual_real_part }
    }

    /// Group a sorted list of signed coefficients, merging values within `tol`.
    pub fn from_lambdas(lambdas: &[f64], tol: f64) -> Self {
        let mut sorted = lambdas.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mut entries: Vec<SpectrumEntry> = Vec::new();
        let mut group: Vec<f64> = Vec::new();
        let flush = |group: &mut Vec<f64>, entries: &mut Vec<SpectrumEntry>| {
            if group.is_empty() {
                return;
            }
            let mean = group.iter().sum::<f64>() / group.len() as f64;
            let sign = if mean > 0.0 { 1 } else if mean < 0.0 { -1 } else { 0 };
            entries.push(SpectrumEntry { lambda: mean, krein_sign: sign, multiplicity: group.len() });
            group.clear();
        };
        for &l in &sorted {
            if let Some(&last) = group.last() {
                if (l - last).abs() > tol || (l > 0.0) != (last > 0.0) {
                    flush(&mut group, &mut entries);
                }
            }
            group.push(l);
        }
        flush(&mut group, &mut entries);
        Self { n: sorted.len(), entries, residual_real_part: 0.0 }
    }

    pub fn total_multiplicity(&self) -> usize {
        self.entries.iter().map(|e| e.multiplicity).sum()
    }

    /// Signed coefficients expanded by multiplicity, nondecreasing.
    pub fn lambdas(&self) -> Vec<f64> {
        self.entries
            .iter()
            .flat_map(|e| std::iter::repeat_n(e.lambda, e.multiplicity))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StabilityClass {
    Unstable,
    StableNotStrong,
    StronglyStable,
    Indeterminate,
}

/// Worst-case margins behind a classification. All are relative to the
/// stated `scale` (`|A|_F`), except the Krein margin which is relative to
/// `|H|_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub scale: f64,
    pub max_real_part: f64,
    pub nilpotent_residual: f64,
    pub min_noncompact_root: Option<f64>,
    pub min_krein_eigenvalue: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub class: StabilityClass,
    pub reason: String,
    pub spectrum: SignedSpectrum,
    pub certificate: Certificate,
    pub tolerances: TolProfile,
}

/// A resonance cluster `{+-i omega}` of the spectrum of `A`.
#[derive(Debug, Clone)]
pub(crate) struct Cluster {
    pub omega: f64,
    /// Number of eigenvalues on the positive side (`m`).
    pub size: usize,
    pub nilpotent: f64,
    /// Orthonormal basis (2n x 2m) of the real invariant subspace.
    pub real_basis: Option<Mat>,
    pub basis_rank_margin: f64,
    pub krein_eigenvalues: Vec<f64>,
}

impl Cluster {
    pub fn krein_counts(&self) -> (usize, usize) {
        let pos = self.krein_eigenvalues.iter().filter(|&&x| x > 0.0).count();
        let neg = self.krein_eigenvalues.len() - pos;
        (pos, neg)
    }
}

/// Spectral data shared by classification and normal forms.
#[derive(Debug, Clone)]
pub(crate) struct Decomposition {
    pub n: usize,
    pub scale: f64,
    pub h_scale: f64,
    pub max_real_part: f64,
    pub clusters: Vec<Cluster>,
    /// Size of the cluster at zero (number of eigenvalues, i.e. `2k`).
    pub zero_size: usize,
    pub zero_nilpotent: f64,
}

fn strict_upper_norm(block: &linalg::CMat) -> f64 {
    let m = block.nrows();
    let mut acc = 0.0;
    for r in 0..m {
        for c in r + 1..m {
            acc += block[(r, c)].norm_sqr();
        }
    }
    acc.sqrt()
}

/// Single-linkage groups of positions sorted by key, gap at most `tol`.
fn linkage_groups(keys: &[f64], tol: f64) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].total_cmp(&keys[b]));
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for idx in order {
        if groups.is_empty() || keys[idx] - last > tol {
            groups.push(Vec::new());
        }
        groups.last_mut().unwrap().push(idx);
        last = keys[idx];
    }
    groups
}

pub(crate) fn decompose(h: &QuadraticHamiltonian, tol: &TolProfile) -> Result<Decomposition> {
    let n = h.n();
    let a = h.generator();
    let a = a.matrix();
    let scale = a.norm();
    let h_scale = h.matrix().norm();
    if scale == 0.0 {
        return Ok(Decomposition {
            n,
            scale,
            h_scale,
            max_real_part: 0.0,
            clusters: Vec::new(),
            zero_size: 2 * n,
            zero_nilpotent: 0.0,
        });
    }
    let schur = ComplexSchur::new(a)?;
    let eigenvalues = schur.eigenvalues();
    let max_real_part = eigenvalues.iter().fold(0.0_f64, |acc, z| acc.max(z.re.abs())) / scale;
    let ims: Vec<f64> = eigenvalues.iter().map(|z| z.im).collect();
    let cluster_tol = tol.cluster * scale;
    let mut clusters = Vec::new();
    let mut zero_size = 0;
    let mut zero_nilpotent = 0.0;
    for group in linkage_groups(&ims, cluster_tol) {
        let lo = group.iter().map(|&i| ims[i]).fold(f64::INFINITY, f64::min);
        let hi = group.iter().map(|&i| ims[i]).fold(f64::NEG_INFINITY, f64::max);
        let mean = group.iter().map(|&i| ims[i]).sum::<f64>() / group.len() as f64;
        let (basis, block) = schur.invariant_subspace(&group);
        let nilpotent = strict_upper_norm(&block) / scale;
        if lo <= cluster_tol && hi >= -cluster_tol {
            zero_size += group.len();
            zero_nilpotent = f64::max(zero_nilpotent, nilpotent);
            continue;
        }
        if mean < 0.0 {
            continue;
        }
        let m = group.len();
        let mut raw = Mat::zeros(2 * n, 2 * m);
        for c in 0..m {
            for r in 0..2 * n {
                raw[(r, c)] = basis[(r, c)].re;
                raw[(r, m + c)] = basis[(r, c)].im;
            }
        }
        let (real_basis, rank_margin) = linalg::orthonormal_basis(&raw);
        let restricted = linalg::symmetrize(&(real_basis.transpose() * h.matrix() * &real_basis));
        let krein_eigenvalues = linalg::symmetric_eigenvalues(&restricted)?;
        clusters.push(Cluster {
            omega: mean,
            size: m,
            nilpotent,
            real_basis: Some(real_basis),
            basis_rank_margin: rank_margin,
            krein_eigenvalues,
        });
    }
    Ok(Decomposition {
        n,
        scale,
        h_scale,
        max_real_part,
        clusters,
        zero_size,
        zero_nilpotent,
    })
}

fn min_noncompact_root(lambdas: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for j in 0..lambdas.len() {
        for k in j..lambdas.len() {
            best = best.min((lambdas[j] + lambdas[k]).abs());
        }
    }
    best
}

pub(crate) fn classify_decomposition(d: &Decomposition, tol: &TolProfile) -> StabilityReport {
    let nilpotent = d.clusters.iter().map(|c| c.nilpotent).fold(d.zero_nilpotent, f64::max);
    let mut certificate = Certificate {
        scale: d.scale,
        max_real_part: d.max_real_part,
        nilpotent_residual: nilpotent,
        min_noncompact_root: None,
        min_krein_eigenvalue: None,
    };
    let empty = SignedSpectrum { n: d.n, entries: Vec::new(), residual_real_part: d.max_real_part * d.scale };
    let report = |class, reason: String, spectrum: SignedSpectrum, certificate: Certificate| StabilityReport {
        class,
        reason,
        spectrum,
        certificate,
        tolerances: *tol,
    };

    if d.max_real_part > tol.band * tol.real_part {
        let reason = format!("eigenvalue off the imaginary axis: relative real part {:.3e}", d.max_real_part);
        return report(StabilityClass::Unstable, reason, empty, certificate);
    }
    if nilpotent > tol.band * tol.nilpotent {
        let reason = format!("defective frequency cluster: nilpotent residual {nilpotent:.3e}");
        return report(StabilityClass::Unstable, reason, empty, certificate);
    }
    if d.max_real_part > tol.real_part || nilpotent > tol.nilpotent {
        let reason = "real part or nilpotent residual inside the tolerance band".to_string();
        return report(StabilityClass::Indeterminate, reason, empty, certificate);
    }
    let positive: usize = d.clusters.iter().map(|c| c.size).sum();
    if !d.zero_size.is_multiple_of(2) || positive + d.zero_size / 2 != d.n {
        let reason = "eigenvalues do not pair into +-i omega clusters".to_string();
        return report(StabilityClass::Indeterminate, reason, empty, certificate);
    }

    let mut entries = Vec::new();
    let mut min_krein = f64::INFINITY;
    for c in &d.clusters {
        let (pos, neg) = c.krein_counts();
        let margin = c.krein_eigenvalues.iter().fold(f64::INFINITY, |acc, x| acc.min(x.abs())) / d.h_scale;
        min_krein = min_krein.min(margin);
        if pos % 2 != 0 || neg % 2 != 0 || margin <= tol.krein || c.basis_rank_margin < 1e-8 {
            certificate.min_krein_eigenvalue = Some(min_krein);
            let reason = format!("Krein form on the cluster at frequency {:.6} is numerically degenerate", c.omega);
            return report(StabilityClass::Indeterminate, reason, empty, certificate);
        }
        entries.push(SpectrumEntry { lambda: c.omega, krein_sign: 1, multiplicity: pos / 2 });
        entries.push(SpectrumEntry { lambda: -c.omega, krein_sign: -1, multiplicity: neg / 2 });
    }
    if d.zero_size > 0 {
        entries.push(SpectrumEntry { lambda: 0.0, krein_sign: 0, multiplicity: d.zero_size / 2 });
    }
    if min_krein.is_finite() {
        certificate.min_krein_eigenvalue = Some(min_krein);
    }
    let spectrum = SignedSpectrum::from_entries(d.n, entries, d.max_real_part * d.scale);
    let root = if d.scale > 0.0 { min_noncompact_root(&spectrum.lambdas()) / d.scale } else { 0.0 };
    certificate.min_noncompact_root = Some(root);

    if root <= tol.cluster {
        let reason = if d.zero_size > 0 {
            "noncompact root 2*lambda vanishes: zero frequency".to_string()
        } else {
            let bad = d
                .clusters
                .iter()
                .find(|c| {
                    let (p, q) = c.krein_counts();
                    p > 0 && q > 0
                })
                .map(|c| c.omega)
                .unwrap_or(f64::NAN);
            format!("noncompact root vanishes: resonance at frequency {bad:.6} has indefinite Krein signature")
        };
        report(StabilityClass::StableNotStrong, reason, spectrum, certificate)
    } else if root <= tol.band * tol.cluster {
        let reason = format!("smallest noncompact root {root:.3e} inside the tolerance band");
        report(StabilityClass::Indeterminate, reason, spectrum, certificate)
    } else {
        let reason = "all noncompact roots nonzero".to_string();
        report(StabilityClass::StronglyStable, reason, spectrum, certificate)
    }
}

/// Pair eigenvalues so the set is closed under `z -> -z` and `z -> conj(z)`.
fn symmetrize_spectrum(raw: &[C64]) -> Vec<C64> {
    let matching = |g: &dyn Fn(C64) -> C64| -> Vec<usize> {
        let mut used = vec![false; raw.len()];
        raw.iter()
            .map(|&z| {
                let target = g(z);
                let j = (0..raw.len())
                    .filter(|&j| !used[j])
                    .min_by(|&a, &b| (raw[a] - target).norm().total_cmp(&(raw[b] - target).norm()))
                    .expect("matching is a bijection");
                used[j] = true;
                j
            })
            .collect()
    };
    let neg = matching(&|z| -z);
    let conj = matching(&|z| z.conj());
    let negconj = matching(&|z| -z.conj());
    let mut out: Vec<C64> = (0..raw.len())
        .map(|i| (raw[i] - raw[neg[i]] + raw[conj[i]].conj() - raw[negconj[i]].conj()) * 0.25)
        .collect();
    out.sort_by(|a, b| a.im.total_cmp(&b.im).then(a.re.total_cmp(&b.re)));
    out
}

/// The `2n` eigenvalues of `A = J H`, closed under negation and conjugation.
pub fn spectrum(h: &QuadraticHamiltonian) -> Result<Vec<C64>> {
    let a = h.generator();
    if a.matrix().norm() == 0.0 {
        return Ok(vec![C64::new(0.0, 0.0); 2 * h.n()]);
    }
    let schur = ComplexSchur::new(a.matrix())?;
    Ok(symmetrize_spectrum(&schur.eigenvalues()))
}

/// Krein signature `(positive, negative)` of the cluster at `+-i omega`.
///
/// `cluster_tol` is relative to `|A|_F`. Counts are complex dimensions, so
/// they add up to the multiplicity of `i omega`.
pub fn krein_signature(h: &QuadraticHamiltonian, omega: f64, cluster_tol: f64) -> Result<(usize, usize)> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter(format!("frequency must be positive, got {omega}")));
    }
    let profile = TolProfile { cluster: cluster_tol, ..TolProfile::DEFAULT };
    let d = decompose(h, &profile)?;
    let band = cluster_tol * d.scale;
    let cluster = d
        .clusters
        .iter()
        .find(|c| (c.omega - omega).abs() <= band.max(1e-12 * omega))
        .ok_or_else(|| Error::InvalidParameter(format!("i*{omega} is not in the spectrum")))?;
    if d.max_real_part > profile.real_part || cluster.nilpotent > profile.band * profile.nilpotent {
        return Err(Error::NotStable(format!(
            "cluster at frequency {omega} is defective or off the imaginary axis"
        )));
    }
    let (pos, neg) = cluster.krein_counts();
    if pos % 2 != 0 || neg % 2 != 0 {
        return Err(Error::Numerical("Krein form has odd real signature".into()));
    }
    Ok((pos / 2, neg / 2))
}

pub fn classify(h: &QuadraticHamiltonian, tol: &TolProfile) -> Result<StabilityReport> {
    let d = decompose(h, tol)?;
    Ok(classify_decomposition(&d, tol))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RootValues {
    /// `lambda_j - lambda_k`, `j < k`.
    pub compact: Vec<f64>,
    /// `lambda_j + lambda_k`, `j <= k`.
    pub noncompact: Vec<f64>,
}

pub fn root_values(spectrum: &SignedSpectrum) -> Result<RootValues> {
    if spectrum.entries.is_empty() || spectrum.total_multiplicity() != spectrum.n {
        return Err(Error::NotStable("signed spectrum does not account for all degrees of freedom".into()));
    }
    let l = spectrum.lambdas();
    let mut compact = Vec::new();
    let mut noncompact = Vec::new();
    for j in 0..l.len() {
        for k in j..l.len() {
            if j < k {
                compact.push(l[j] - l[k]);
            }
            noncompact.push(l[j] + l[k]);
        }
    }
    Ok(RootValues { compact, noncompact })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub in_d: bool,
    pub in_e: bool,
    pub in_f: bool,
    pub class: StabilityClass,
    /// `|s_part|_F / |A|_F`.
    pub s_part_norm: f64,
    /// `|H - diag(pi(H), pi(H))|_F / |H|_F`.
    pub torus_offset: f64,
    pub tol: f64,
}

/// Relative tolerance for the `u(n)` and torus tests in [`membership`].
pub const MEMBERSHIP_TOL: f64 = 1e-9;

pub fn membership(h: &QuadraticHamiltonian, tol: &TolProfile) -> Result<Membership> {
    let report = classify(h, tol)?;
    let a = h.generator();
    let scale = a.matrix().norm().max(f64::MIN_POSITIVE);
    let split = cartan_split(&a);
    let s_part_norm = split.s_part.matrix().norm() / scale;
    let n = h.n();
    let pi = crate::horn::torus_moment_pi(h);
    let diag: Vec<f64> = pi.iter().chain(pi.iter()).cloned().collect();
    let torus = Mat::from_diagonal(&DVector::from_vec(diag));
    let torus_offset = (h.matrix() - torus).norm() / h.matrix().norm().max(f64::MIN_POSITIVE);
    let in_d = report.class == StabilityClass::StronglyStable;
    let in_e = in_d && s_part_norm <= MEMBERSHIP_TOL;
    let in_f = in_e && torus_offset <= MEMBERSHIP_TOL;
    debug_assert_eq!(pi.len(), n);
    Ok(Membership { in_d, in_e, in_f, class: report.class, s_part_norm, torus_offset, tol: MEMBERSHIP_TOL })
}

/// Orthonormal basis of `s` (generators anticommuting with `J`), `n(n+1)`
/// elements, Frobenius inner product.
fn s_basis(n: usize) -> Vec<Mat> {
    let j = j_matrix(n);
    let mut basis = Vec::with_capacity(n * (n + 1));
    for offset in [0usize, 1] {
        for r in 0..n {
            for c in r..n {
                // H = [[a, b], [b, -a]] with a (offset 0) or b (offset 1) = E_rc + E_cr
                let mut h = Mat::zeros(2 * n, 2 * n);
                let mut put = |i: usize, k: usize, v: f64| {
                    h[(i, k)] += v;
                    if i != k {
                        h[(k, i)] += v;
                    }
                };
                if offset == 0 {
                    put(r, c, 1.0);
                    put(n + r, n + c, -1.0);
                } else {
                    put(r, n + c, 1.0);
                    if r != c {
                        put(c, n + r, 1.0);
                    }
                }
                let x = &j * h;
                let norm = x.norm();
                basis.push(x / norm);
            }
        }
    }
    basis
}

/// Smallest singular value of `X -> [A, X]` restricted to `s` and projected
/// back onto `s`. For `A` in `u(n)` this is `min |lambda_j + lambda_k|`.
pub fn adjoint_on_s_min_singular(a: &HamiltonianGenerator) -> f64 {
    let basis = s_basis(a.n());
    let dim = basis.len();
    let am = a.matrix();
    let mut op = Mat::zeros(dim, dim);
    for (c, x) in basis.iter().enumerate() {
        let bracket = am * x - x * am;
        for (r, y) in basis.iter().enumerate() {
            op[(r, c)] = y.dot(&bracket);
        }
    }
    let svd = nalgebra::linalg::SVD::new(op, false, false);
    svd.singular_values.iter().cloned().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeLevel {
    pub fraction: f64,
    pub radius: f64,
    pub trials: usize,
    pub survived: usize,
    pub survival_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    /// `min |lambda_j + lambda_k| / cond(S)` for the normal-form diagonalizer `S`.
    pub margin: f64,
    pub min_noncompact_root: f64,
    pub diagonalizer_condition: f64,
    pub seed: u64,
    pub levels: Vec<ProbeLevel>,
}

/// Random symmetric perturbation with Frobenius norm `radius`.
fn random_symmetric<R: rand::Rng + ?Sized>(dim: usize, radius: f64, rng: &mut R) -> Mat {
    let mut x = Mat::zeros(dim, dim);
    for v in x.iter_mut() {
        *v = rng.random_range(-1.0..1.0);
    }
    let x = linalg::symmetrize(&x);
    let norm = x.norm();
    if norm == 0.0 {
        return x;
    }
    x * (radius / norm)
}

/// Sample symmetric perturbations at radii `fraction * margin` and count how
/// many stay strongly stable.
///
/// In normal coordinates a perturbation of spectral norm below
/// `min |lambda_j + lambda_k| / 2` cannot produce a Krein collision, and the
/// diagonalizer amplifies norms by at most `cond(S)`, so every fraction
/// below one half should survive.
pub fn perturbation_probe(
    h: &QuadraticHamiltonian,
    trials: usize,
    fractions: &[f64],
    seed: u64,
    tol: &TolProfile,
) -> Result<ProbeReport> {
    let report = classify(h, tol)?;
    if report.class != StabilityClass::StronglyStable {
        return Err(Error::NotStronglyStable(report.reason));
    }
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidParameter(format!("radius fraction must be positive, got {f}")));
    }
    let nf = normalform::normal_form(h, tol)?;
    let min_root = min_noncompact_root(&nf.frequencies.lambdas());
    let cond = nf.diagonalizer.condition();
    let margin = min_root / cond;
    let dim = 2 * h.n();
    let mut levels = Vec::with_capacity(fractions.len());
    for (level, &fraction) in fractions.iter().enumerate() {
        let radius = fraction * margin;
        let level_seed = seed.wrapping_add((level as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let outcomes = rng::map_streams(level_seed, trials, |_, rng| {
            let e = random_symmetric(dim, radius, rng);
            QuadraticHamiltonian::new(h.matrix() + e)
                .and_then(|p| classify(&p, tol))
                .map(|r| r.class == StabilityClass::StronglyStable)
                .unwrap_or(false)
        });
        let survived = outcomes.iter().filter(|&&ok| ok).count();
        levels.push(ProbeLevel {
            fraction,
            radius,
            trials,
            survived,
            survival_rate: if trials == 0 { 1.0 } else { survived as f64 / trials as f64 },
        });
    }
    Ok(ProbeReport { margin, min_noncompact_root: min_root, diagonalizer_condition: cond, seed, levels })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::{conjugate, random_symplectic};

    fn nf(lambda: &[f64]) -> QuadraticHamiltonian {
        QuadraticHamiltonian::normal_form(lambda).unwrap()
    }

    fn diag(v: &[f64]) -> QuadraticHamiltonian {
        QuadraticHamiltonian::new(Mat::from_diagonal(&DVector::from_vec(v.to_vec()))).unwrap()
    }

    fn sorted_close(got: &[C64], want: &[C64], tol: f64) -> bool {
        let mut used = vec![false; want.len()];
        got.len() == want.len()
            && got.iter().all(|g| {
                let best = (0..want.len())
                    .filter(|&j| !used[j])
                    .min_by(|&a, &b| (want[a] - g).norm().total_cmp(&(want[b] - g).norm()));
                match best {
                    Some(j) if (want[j] - g).norm() <= tol => {
                        used[j] = true;
                        true
                    }
                    _ => false,
                }
            })
    }

    #[test]
    fn spectrum_examples() {
        let (a, b) = (2.0_f64, 3.0_f64);
        let w = (a * b).sqrt();
        let s = spectrum(&diag(&[a, b])).unwrap();
        assert!(sorted_close(&s, &[C64::new(0.0, -w), C64::new(0.0, w)], 1e-12));

        let s = spectrum(&diag(&[1.0, -1.0])).unwrap();
        assert!(sorted_close(&s, &[C64::new(-1.0, 0.0), C64::new(1.0, 0.0)], 1e-12));

        let s = spectrum(&nf(&[1.0, 2.0])).unwrap();
        let want: Vec<C64> = [-2.0, -1.0, 1.0, 2.0].iter().map(|&x| C64::new(0.0, x)).collect();
        assert!(sorted_close(&s, &want, 1e-12));
    }

    #[test]
    fn spectrum_is_closed_under_negation_and_conjugation() {
        for seed in 0..20 {
            let h = QuadraticHamiltonian::new(random_symmetric(6, 3.0, &mut rng::stream(seed, 0))).unwrap();
            let s = spectrum(&h).unwrap();
            let neg: Vec<C64> = s.iter().map(|z| -z).collect();
            let conj: Vec<C64> = s.iter().map(|z| z.conj()).collect();
            assert!(sorted_close(&s, &neg, 1e-8), "seed {seed}");
            assert!(sorted_close(&s, &conj, 1e-8), "seed {seed}");
        }
    }

    #[test]
    fn krein_signature_examples() {
        assert_eq!(krein_signature(&nf(&[1.0, 1.0]), 1.0, 1e-6).unwrap(), (2, 0));
        assert_eq!(krein_signature(&nf(&[1.0, -1.0]), 1.0, 1e-6).unwrap(), (1, 1));
        assert_eq!(krein_signature(&nf(&[-2.0, 3.0]), 2.0, 1e-6).unwrap(), (0, 1));
        for seed in 0..25 {
            let s = random_symplectic(2, 0.4, seed).unwrap();
            let h = conjugate(&nf(&[1.0, 2.0]), &s).unwrap();
            assert_eq!(krein_signature(&h, 2.0, 1e-6).unwrap(), (1, 0));
        }
        assert!(matches!(krein_signature(&nf(&[1.0, 2.0]), 1.5, 1e-6), Err(Error::InvalidParameter(_))));
        assert!(krein_signature(&nf(&[1.0, 2.0]), -1.0, 1e-6).is_err());
    }

    #[test]
    fn defective_resonance_is_unstable() {
        // A = [[R, I], [0, R]] with R a rotation generator: a Jordan block at +-i
        let mut h = Mat::zeros(4, 4);
        // H = -J A = [[0, -R], [R, I]], R = [[0, 1], [-1, 0]]
        h[(0, 3)] = -1.0;
        h[(1, 2)] = 1.0;
        h[(2, 1)] = 1.0;
        h[(3, 0)] = -1.0;
        h[(2, 2)] = 1.0;
        h[(3, 3)] = 1.0;
        let h = QuadraticHamiltonian::new(h).unwrap();
        let eig = spectrum(&h).unwrap();
        assert!(eig.iter().all(|z| (z.im.abs() - 1.0).abs() < 1e-6));
        let report = classify(&h, &TolProfile::DEFAULT).unwrap();
        assert_eq!(report.class, StabilityClass::Unstable, "{}", report.reason);
        assert!(krein_signature(&h, 1.0, 1e-6).is_err());
    }

    /// Krein signs from the real invariant subspace agree with the Hermitian
    /// form `w^H H w` on the eigenvectors of `+i omega`.
    #[test]
    fn real_and_hermitian_krein_definitions_agree() {
        let cases: [&[f64]; 4] = [&[1.0, 2.0], &[1.0, -1.0], &[-2.0, -1.0], &[1.5, -0.5]];
        for lambda in cases {
            let h = nf(lambda);
            let a = linalg::to_complex(h.generator().matrix());
            let hc = linalg::to_complex(h.matrix());
            for &l in lambda {
                let omega = l.abs();
                // eigenvectors of +i omega for the normal form are e_j + i sgn e_{n+j}
                let n = lambda.len();
                let mut pos = 0;
                let mut neg = 0;
                for (j, &lj) in lambda.iter().enumerate() {
                    if lj.abs() != omega {
                        continue;
                    }
                    let mut w = linalg::CMat::zeros(2 * n, 1);
                    w[(j, 0)] = C64::new(1.0, 0.0);
                    w[(n + j, 0)] = C64::new(0.0, lj.signum());
                    let aw = &a * &w;
                    assert!((aw - &w * C64::new(0.0, omega)).norm() < 1e-12);
                    let form = (w.adjoint() * &hc * &w)[(0, 0)].re;
                    if form > 0.0 {
                        pos += 1;
                    } else {
                        neg += 1;
                    }
                }
                assert_eq!(krein_signature(&h, omega, 1e-6).unwrap(), (pos, neg), "{lambda:?}");
            }
        }
    }

    #[test]
    fn classify_examples() {
        let tol = TolProfile::DEFAULT;
        for n in 1..5 {
            let id = QuadraticHamiltonian::new(Mat::identity(2 * n, 2 * n)).unwrap();
            let r = classify(&id, &tol).unwrap();
            assert_eq!(r.class, StabilityClass::StronglyStable);
            assert_eq!(r.spectrum.entries.len(), 1);
            assert!((r.spectrum.entries[0].lambda - 1.0).abs() < 1e-12);
            assert_eq!(r.spectrum.entries[0].multiplicity, n);
        }
        let r = classify(&nf(&[1.0, -1.0]), &tol).unwrap();
        assert_eq!(r.class, StabilityClass::StableNotStrong);
        assert!(r.reason.contains("Krein"));

        let r = classify(&diag(&[1.0, -1.0]), &tol).unwrap();
        assert_eq!(r.class, StabilityClass::Unstable);

        let r = classify(&nf(&[1.0, 2.0]), &tol).unwrap();
        assert_eq!(r.class, StabilityClass::StronglyStable);
        let roots = root_values(&r.spectrum).unwrap();
        for (got, want) in roots.noncompact.iter().zip([2.0, 3.0, 4.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_hamiltonian_and_zero_frequency() {
        let tol = TolProfile::DEFAULT;
        let zero = QuadraticHamiltonian::new(Mat::zeros(4, 4)).unwrap();
        assert_eq!(classify(&zero, &tol).unwrap().class, StabilityClass::StableNotStrong);
        let r = classify(&nf(&[0.0, 1.0]), &tol).unwrap();
        assert_eq!(r.class, StabilityClass::StableNotStrong);
        assert!(r.reason.contains("zero frequency"));
        // H = q^2/2: A is nilpotent, a free particle
        let r = classify(&diag(&[1.0, 0.0]), &tol).unwrap();
        assert_eq!(r.class, StabilityClass::Unstable);
    }

    #[test]
    fn close_opposite_resonance_is_indeterminate() {
        // roots 1 - 1.000005 relative to |A| sit between tol and band * tol
        let h = nf(&[1.0, -1.000_01]);
        let r = classify(&h, &TolProfile::DEFAULT).unwrap();
        assert_eq!(r.class, StabilityClass::Indeterminate, "{}", r.reason);
        let r = classify(&h, &TolProfile::STRICT).unwrap();
        assert_eq!(r.class, StabilityClass::StronglyStable);
    }

    #[test]
    fn root_values_examples() {
        let spec = SignedSpectrum::from_lambdas(&[1.0, 2.0], 1e-12);
        let r = root_values(&spec).unwrap();
        assert_eq!(r.compact, vec![-1.0]);
        assert_eq!(r.noncompact, vec![2.0, 3.0, 4.0]);

        let spec = SignedSpectrum::from_lambdas(&[1.0, -1.0], 1e-12);
        let r = root_values(&spec).unwrap();
        let mut nc = r.noncompact.clone();
        nc.sort_by(f64::total_cmp);
        assert_eq!(nc, vec![-2.0, 0.0, 2.0]);
        assert!(nc.contains(&0.0));

        let a = 0.7;
        let spec = SignedSpectrum::from_lambdas(&[a, a], 1e-12);
        let r = root_values(&spec).unwrap();
        assert_eq!(r.compact, vec![0.0]);
        assert_eq!(r.noncompact, vec![2.0 * a; 3]);

        let unstable = classify(&diag(&[1.0, -1.0]), &TolProfile::DEFAULT).unwrap();
        assert!(matches!(root_values(&unstable.spectrum), Err(Error::NotStable(_))));
    }

    #[test]
    fn membership_examples() {
        let tol = TolProfile::DEFAULT;
        let h = nf(&[1.0, 2.0]);
        let m = membership(&h, &tol).unwrap();
        assert!(m.in_d && m.in_e && m.in_f);

        for seed in 0..10 {
            let s = random_symplectic(2, 0.5, seed).unwrap();
            let m = membership(&conjugate(&h, &s).unwrap(), &tol).unwrap();
            assert!(m.in_d);
            assert!(!m.in_e, "seed {seed}: s-part {}", m.s_part_norm);
            assert!(m.s_part_norm > 1e-3);
        }

        let m = membership(&diag(&[1.0, -1.0]), &tol).unwrap();
        assert!(!m.in_d && !m.in_e && !m.in_f);
    }

    #[test]
    fn s_basis_is_orthonormal_and_anticommutes() {
        for n in 1..4 {
            let basis = s_basis(n);
            assert_eq!(basis.len(), n * (n + 1));
            let j = j_matrix(n);
            for (i, x) in basis.iter().enumerate() {
                assert!(linalg::max_abs(&(&j * x + x * &j)) < 1e-15);
                assert!(HamiltonianGenerator::new(x.clone()).is_ok());
                for (k, y) in basis.iter().enumerate() {
                    let want = if i == k { 1.0 } else { 0.0 };
                    assert!((x.dot(y) - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn adjoint_singular_value_matches_noncompact_roots() {
        let a = nf(&[1.0, 2.0]).generator();
        assert!((adjoint_on_s_min_singular(&a) - 2.0).abs() < 1e-12);
        let a = nf(&[1.0, -1.0]).generator();
        assert!(adjoint_on_s_min_singular(&a) < 1e-12);
        let a = nf(&[-3.0, 1.0, 2.5]).generator();
        assert!((adjoint_on_s_min_singular(&a) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn perturbation_probe_examples() {
        let tol = TolProfile::DEFAULT;
        let id = QuadraticHamiltonian::new(Mat::identity(4, 4)).unwrap();
        let r = perturbation_probe(&id, 200, &[0.1], 3, &tol).unwrap();
        assert_eq!(r.levels[0].survived, 200);

        assert!(matches!(
            perturbation_probe(&nf(&[1.0, -1.0]), 10, &[0.1], 0, &tol),
            Err(Error::NotStronglyStable(_))
        ));

        let r = perturbation_probe(&nf(&[1.0, 2.0]), 500, &[0.05], 1, &tol).unwrap();
        assert_eq!(r.levels[0].survival_rate, 1.0);
        assert!((r.min_noncompact_root - 2.0).abs() < 1e-9);
    }

    #[test]
    fn perturbation_probe_is_deterministic() {
        let tol = TolProfile::DEFAULT;
        let h = nf(&[1.0, -3.0]);
        let a = perturbation_probe(&h, 50, &[0.2, 5.0], 9, &tol).unwrap();
        let b = perturbation_probe(&h, 50, &[0.2, 5.0], 9, &tol).unwrap();
        assert_eq!(a, b);
    }
}
