//! Sums of positive-definite Hamiltonians with prescribed frequencies.
//!
//! For nondecreasing positive tuples `lambda`, `mu` the set
//! `{F(H1 + H2) : F(H1) = lambda, F(H2) = mu}` is sampled by drawing points
//! of the two symplectic orbits and pushing them through the addition map.
//! Because `F` is invariant under a common conjugation, only the relative
//! position of the two orbit points matters. The sampler draws a common
//! random frame `S1` and puts `S2 = P S1` with `P` drawn from the spread
//! schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalform::frequency_map_f;
use crate::rng::{self, StreamRng};
use crate::linalg::{spectral_norm, Mat};
use crate::symplectic::{self, cartan_split, conjugate, HamiltonianGenerator, QuadraticHamiltonian, SymplecticTransform};

/// A positive-definite coadjoint orbit, labelled by its frequencies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrbitSpec {
    lambda: Vec<f64>,
}

impl OrbitSpec {
    pub fn new(lambda: Vec<f64>) -> Result<Self> {
        if lambda.is_empty() {
            return Err(Error::ZeroDegreesOfFreedom);
        }
        if lambda.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::InvalidParameter(format!("orbit frequencies must be positive: {lambda:?}")));
        }
        if lambda.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::InvalidParameter(format!("orbit frequencies must be nondecreasing: {lambda:?}")));
        }
        Ok(Self { lambda })
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn normal_form(&self) -> QuadraticHamiltonian {
        QuadraticHamiltonian::normal_form(&self.lambda).expect("validated")
    }
}

/// `S^T D_lambda S` for a random symplectic `S` of the given spread.
pub fn orbit_sample_with<R: Rng + ?Sized>(spec: &OrbitSpec, spread: f64, rng: &mut R) -> Result<QuadraticHamiltonian> {
    let s = symplectic::random_symplectic_with(spec.n(), spread, rng)?;
    conjugate(&spec.normal_form(), &s)
}

pub fn orbit_sample(spec: &OrbitSpec, spread: f64, seed: u64) -> Result<QuadraticHamiltonian> {
    orbit_sample_with(spec, spread, &mut rng::stream(seed, 0))
}

/// How far apart the two orbit points are pushed.
///
/// The relative position is `K1 exp(t X) K2` with `X` a random noncompact
/// direction of spectral norm one, so `exp(t X)` stretches by at most `e^t`.
/// The radius ladder has two rungs: with probability `near_fraction`, `t` is
/// uniform on `[0, near_radius]`, which resolves the lower boundary;
/// otherwise `t` has density proportional to `sinh t` on `[0, max_radius]`,
/// which makes the one-degree-of-freedom value `2 cosh t` uniform. Each of
/// `K1`, `K2` is a Haar-random unitary with probability `unitary_mix` and
/// the identity otherwise. `frame_spread` is the entry spread of the common
/// random frame applied to both points.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadSchedule {
    pub frame_spread: f64,
    pub max_radius: f64,
    pub near_fraction: f64,
    pub near_radius: f64,
    pub unitary_mix: f64,
}

impl Default for SpreadSchedule {
    fn default() -> Self {
        Self { frame_spread: 0.5, max_radius: 2.6, near_fraction: 0.05, near_radius: 0.1, unitary_mix: 0.5 }
    }
}

impl SpreadSchedule {
    /// Both orbit points in normal form, up to the common frame.
    pub fn collapsed() -> Self {
        Self { frame_spread: 0.0, max_radius: 0.0, near_fraction: 0.0, near_radius: 0.0, unitary_mix: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        let prob = |x: f64| ok(x) && x <= 1.0;
        if ok(self.frame_spread) && ok(self.max_radius) && ok(self.near_radius) && prob(self.near_fraction) && prob(self.unitary_mix)
        {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("invalid spread schedule {self:?}")))
        }
    }

    pub fn draw_radius<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let near: f64 = rng.random();
        let u: f64 = rng.random();
        if near < self.near_fraction {
            u * self.near_radius
        } else {
            (1.0 + u * (self.max_radius.cosh() - 1.0)).acosh()
        }
    }
}

/// A random generator of unit Frobenius norm.
fn unit_generator<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Mat {
    loop {
        let b = symplectic::random_generator(n, 1.0, rng);
        let norm = b.norm();
        if norm > 1e-12 {
            return b / norm;
        }
    }
}

/// A random element of `s` (symmetric, anticommuting with `J`) of spectral norm one.
fn unit_noncompact<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Mat> {
    loop {
        let b = HamiltonianGenerator::new(symplectic::random_generator(n, 1.0, rng))?;
        let x = cartan_split(&b).s_part.matrix().clone();
        let norm = spectral_norm(&x);
        if norm > 1e-12 {
            return Ok(x / norm);
        }
    }
}

fn maybe_unitary<R: Rng + ?Sized>(n: usize, mix: f64, rng: &mut R) -> Result<SymplecticTransform> {
    let coin: f64 = rng.random();
    let k = symplectic::random_unitary_with(n, rng)?;
    Ok(if coin < mix { k } else { SymplecticTransform::identity(n) })
}

/// A relative position `K1 exp(t X) K2` drawn from `schedule`.
fn relative_position<R: Rng + ?Sized>(n: usize, schedule: &SpreadSchedule, rng: &mut R) -> Result<SymplecticTransform> {
    let k1 = maybe_unitary(n, schedule.unitary_mix, rng)?;
    let k2 = maybe_unitary(n, schedule.unitary_mix, rng)?;
    let t = schedule.draw_radius(rng);
    let x = unit_noncompact(n, rng)?;
    Ok(k1.compose(&SymplecticTransform::new_unchecked((x * t).exp())).compose(&k2))
}

/// One pair of orbit points at relative radius drawn from `schedule`.
pub fn orbit_pair<R: Rng + ?Sized>(
    lambda: &OrbitSpec,
    mu: &OrbitSpec,
    schedule: &SpreadSchedule,
    rng: &mut R,
) -> Result<(QuadraticHamiltonian, QuadraticHamiltonian)> {
    let n = lambda.n();
    let frame = symplectic::random_symplectic_with(n, schedule.frame_spread, rng)?;
    let relative = relative_position(n, schedule, rng)?;
    let h1 = conjugate(&lambda.normal_form(), &frame)?;
    let h2 = conjugate(&mu.normal_form(), &relative.compose(&frame))?;
    Ok((h1, h2))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudDiagnostics {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HornSampleCloud {
    pub lambda: Vec<f64>,
    pub mu: Vec<f64>,
    pub seed: u64,
    pub schedule: SpreadSchedule,
    pub points: Vec<Vec<f64>>,
    pub diagnostics: CloudDiagnostics,
}

impl HornSampleCloud {
    pub fn n(&self) -> usize {
        self.lambda.len()
    }

    pub fn from_points(
        lambda: Vec<f64>,
        mu: Vec<f64>,
        seed: u64,
        schedule: SpreadSchedule,
        points: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let n = lambda.len();
        if mu.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: mu.len() });
        }
        if let Some(p) = points.iter().find(|p| p.len() != n) {
            return Err(Error::DimensionMismatch { expected: n, found: p.len() });
        }
        let mut min = vec![f64::INFINITY; n];
        let mut max = vec![f64::NEG_INFINITY; n];
        for p in &points {
            for j in 0..n {
                min[j] = min[j].min(p[j]);
                max[j] = max[j].max(p[j]);
            }
        }
        Ok(Self { lambda, mu, seed, schedule, points, diagnostics: CloudDiagnostics { min, max } })
    }
}

/// Sample `count` points of `{F(H1 + H2)}`; deterministic in `seed`.
pub fn horn_sample(
    lambda: &OrbitSpec,
    mu: &OrbitSpec,
    count: usize,
    seed: u64,
    schedule: &SpreadSchedule,
) -> Result<HornSampleCloud> {
    if lambda.n() != mu.n() {
        return Err(Error::DimensionMismatch { expected: lambda.n(), found: mu.n() });
    }
    if count == 0 {
        return Err(Error::InvalidParameter("sample count must be at least 1".into()));
    }
    schedule.validate()?;
    let points = rng::map_streams(seed, count, |_, rng| {
        let (h1, h2) = orbit_pair(lambda, mu, schedule, rng)?;
        frequency_map_f(&h1.add(&h2)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    HornSampleCloud::from_points(lambda.lambda().to_vec(), mu.lambda().to_vec(), seed, *schedule, points)
}

/// Coefficients of `(q_j^2 + p_j^2)/2`: `(H[q_j,q_j] + H[p_j,p_j]) / 2`.
pub fn torus_moment_pi(h: &QuadraticHamiltonian) -> Vec<f64> {
    let n = h.n();
    let m = h.matrix();
    (0..n).map(|j| (m[(j, j)] + m[(n + j, n + j)]) * 0.5).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeMethod {
    Interval,
    LocalSearch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvexityReport {
    pub method: ProbeMethod,
    pub pairs: usize,
    pub found: usize,
    pub not_found: usize,
    pub success_fraction: f64,
    /// Largest final distance `|F(H1 + H2) - midpoint|_2` over all pairs.
    pub worst_residual: f64,
    /// Success threshold factor: a midpoint counts as realized within
    /// `tolerance * |midpoint|_inf`.
    pub tolerance: f64,
    pub budget: usize,
    pub seed: u64,
}

/// Relative distance at which a midpoint counts as realized.
pub const CONVEXITY_TOL: f64 = 1e-3;
/// Objective evaluations per midpoint used when none is specified.
pub const DEFAULT_SEARCH_BUDGET: usize = 3000;

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

struct SearchProblem<'a> {
    lambda: &'a QuadraticHamiltonian,
    mu: &'a QuadraticHamiltonian,
    target: &'a [f64],
}

impl SearchProblem<'_> {
    /// Distance to the target for the relative position `p`, i.e. for
    /// `H1 = D_lambda` and `H2 = p^T D_mu p`.
    fn objective(&self, p: &SymplecticTransform) -> f64 {
        conjugate(self.mu, p)
            .and_then(|h2| self.lambda.add(&h2))
            .and_then(|sum| frequency_map_f(&sum))
            .map(|f| distance(&f, self.target))
            .unwrap_or(f64::INFINITY)
    }
}

/// Gradient-free (1+1) search with steps `exp(eps B) P` or `P exp(eps B)`,
/// a success-rate step rule and random restarts. Left steps move along the
/// orbit at the normal form, right steps act on `H2` in its own coordinates,
/// which keeps the steps well scaled when `P` is far from the identity.
/// Returns the best distance reached.
fn realize_midpoint(
    problem: &SearchProblem<'_>,
    schedule: &SpreadSchedule,
    n: usize,
    threshold: f64,
    budget: usize,
    rng: &mut StreamRng,
) -> f64 {
    const CANDIDATES: usize = 24;
    let mut spent = 0;
    let mut best_overall = f64::INFINITY;
    let fresh = |rng: &mut StreamRng| relative_position(n, schedule, rng).unwrap_or_else(|_| SymplecticTransform::identity(n));
    while spent < budget {
        let mut current = SymplecticTransform::identity(n);
        let mut value = f64::INFINITY;
        for _ in 0..CANDIDATES.min(budget - spent) {
            let cand = fresh(rng);
            let v = problem.objective(&cand);
            spent += 1;
            if v < value {
                value = v;
                current = cand;
            }
        }
        let mut step = 0.3;
        while spent < budget && value > threshold && step > 1e-7 {
            let b = SymplecticTransform::new_unchecked((unit_generator(n, rng) * step).exp());
            let cand = if rng.random_bool(0.5) { b.compose(&current) } else { current.compose(&b) };
            let v = problem.objective(&cand);
            spent += 1;
            if v < value {
                value = v;
                current = cand;
                step = (step * 1.5).min(1.0);
            } else {
                step *= 0.9;
            }
        }
        best_overall = best_overall.min(value);
        if best_overall <= threshold {
            break;
        }
    }
    best_overall
}

/// Test whether midpoints of random cloud pairs are themselves attained.
///
/// For `n = 1` the set is an interval and every midpoint of two samples lies
/// in it, so no search is needed. Otherwise each midpoint is searched for
/// with at most `budget` objective evaluations.
pub fn convexity_probe(cloud: &HornSampleCloud, pairs: usize, budget: usize, seed: u64) -> Result<ConvexityReport> {
    if cloud.points.is_empty() {
        return Err(Error::InvalidParameter("empty cloud".into()));
    }
    let n = cloud.n();
    let lambda = OrbitSpec::new(cloud.lambda.clone())?;
    let mu = OrbitSpec::new(cloud.mu.clone())?;
    let unique = {
        let first = &cloud.points[0];
        cloud.points.iter().all(|p| p == first)
    };
    if n == 1 || unique {
        return Ok(ConvexityReport {
            method: ProbeMethod::Interval,
            pairs,
            found: pairs,
            not_found: 0,
            success_fraction: 1.0,
            worst_residual: 0.0,
            tolerance: CONVEXITY_TOL,
            budget,
            seed,
        });
    }
    let d_lambda = lambda.normal_form();
    let d_mu = mu.normal_form();
    let count = cloud.points.len();
    let residuals = rng::map_streams(seed, pairs, |_, rng| {
        let x = &cloud.points[rng.random_range(0..count)];
        let y = &cloud.points[rng.random_range(0..count)];
        let mid: Vec<f64> = x.iter().zip(y).map(|(a, b)| 0.5 * (a + b)).collect();
        let scale = mid.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        let threshold = CONVEXITY_TOL * scale;
        let problem = SearchProblem { lambda: &d_lambda, mu: &d_mu, target: &mid };
        let best = realize_midpoint(&problem, &cloud.schedule, n, threshold, budget, rng);
        (best, best <= threshold)
    });
    let found = residuals.iter().filter(|r| r.1).count();
    let worst_residual = residuals.iter().map(|r| r.0).fold(0.0, f64::max);
    Ok(ConvexityReport {
        method: ProbeMethod::LocalSearch,
        pairs,
        found,
        not_found: pairs - found,
        success_fraction: if pairs == 0 { 1.0 } else { found as f64 / pairs as f64 },
        worst_residual,
        tolerance: CONVEXITY_TOL,
        budget,
        seed,
    })
}
