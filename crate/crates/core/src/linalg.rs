//! Dense linear algebra helpers on top of `nalgebra`.
//!
//! Everything here works on dynamically sized matrices. The coordinate order
//! for phase space is block order `(q_1..q_n, p_1..p_n)` throughout.

use nalgebra::linalg::{Cholesky, Hessenberg, Schur, SymmetricEigen, SVD};
use nalgebra::{Complex, DMatrix};

use crate::error::{Error, Result};

pub type Mat = DMatrix<f64>;
pub type CMat = DMatrix<Complex<f64>>;
pub type C64 = Complex<f64>;

const MAX_ITER_PER_DIM: usize = 1_000;

/// Shifted complex QR on the Hessenberg form with exceptional shifts, used
/// when the library iteration stalls. Returns `(Q, T)` with `A = Q T Q^H`.
fn schur_fallback(a: &CMat, max_iter: usize) -> Option<(CMat, CMat)> {
    let dim = a.nrows();
    let (mut q, mut t) = Hessenberg::new(a.clone()).unpack();
    let zero = C64::new(0.0, 0.0);
    let mut hi = dim.saturating_sub(1);
    let mut iter = 0;
    let mut stalled = 0;
    while hi > 0 {
        let mut lo = hi;
        while lo > 0 {
            let sub = t[(lo, lo - 1)].norm();
            if sub <= f64::EPSILON * (t[(lo - 1, lo - 1)].norm() + t[(lo, lo)].norm()) || sub < f64::MIN_POSITIVE {
                t[(lo, lo - 1)] = zero;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            hi -= 1;
            stalled = 0;
            continue;
        }
        iter += 1;
        stalled += 1;
        if iter > max_iter {
            return None;
        }
        let shift = if stalled % 10 == 0 {
            let phase = stalled as f64;
            t[(hi, hi)] + C64::new(phase.cos(), phase.sin()) * (1.5 * t[(hi, hi - 1)].norm())
        } else {
            let (w, x, y, z) = (t[(hi - 1, hi - 1)], t[(hi - 1, hi)], t[(hi, hi - 1)], t[(hi, hi)]);
            let half = (w - z) * 0.5;
            let root = (half * half + x * y).sqrt();
            let (r1, r2) = ((w + z) * 0.5 + root, (w + z) * 0.5 - root);
            if (r1 - z).norm() <= (r2 - z).norm() {
                r1
            } else {
                r2
            }
        };
        for k in lo..=hi {
            t[(k, k)] -= shift;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (f, g) = (t[(k, k)], t[(k + 1, k)]);
            let r = (f.norm_sqr() + g.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 { (C64::new(1.0, 0.0), zero) } else { (f / r, g / r) };
            for j in k..dim {
                let (u, v) = (t[(k, j)], t[(k + 1, j)]);
                t[(k, j)] = c.conj() * u + s.conj() * v;
                t[(k + 1, j)] = -s * u + c * v;
            }
            rotations.push((c, s));
        }
        for (k, &(c, s)) in (lo..hi).zip(&rotations) {
            for i in 0..=hi.min(k + 2) {
                let (u, v) = (t[(i, k)], t[(i, k + 1)]);
                t[(i, k)] = u * c + v * s;
                t[(i, k + 1)] = -u * s.conj() + v * c.conj();
            }
            for i in 0..dim {
                let (u, v) = (q[(i, k)], q[(i, k + 1)]);
                q[(i, k)] = u * c + v * s;
                q[(i, k + 1)] = -u * s.conj() + v * c.conj();
            }
        }
        for k in lo..=hi {
            t[(k, k)] += shift;
        }
    }
    Some((q, t))
}

/// The block matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn j_matrix(n: usize) -> Mat {
    let mut j = Mat::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

/// `J^{-1} M J`, the conjugation that shows up in symplectic inverses.
pub(crate) fn j_conj(m: &Mat) -> Mat {
    let n = m.nrows() / 2;
    let j = j_matrix(n);
    -(&j * m * &j)
}

pub fn max_abs(m: &Mat) -> f64 {
    m.iter().fold(0.0_f64, |acc, x| acc.max(x.abs()))
}

pub fn symmetrize(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

pub fn asymmetry(m: &Mat) -> f64 {
    max_abs(&(m - m.transpose()))
}

pub fn to_complex(m: &Mat) -> CMat {
    m.map(|x| C64::new(x, 0.0))
}

pub fn spectral_norm(m: &Mat) -> f64 {
    let svd = SVD::new(m.clone(), false, false);
    svd.singular_values.iter().cloned().fold(0.0, f64::max)
}

/// Orthonormal basis for the column span of `m` together with the ratio of
/// smallest to largest singular value (a rank margin).
pub fn orthonormal_basis(m: &Mat) -> (Mat, f64) {
    let svd = SVD::new(m.clone(), true, false);
    let u = svd.u.expect("requested U");
    let sv = &svd.singular_values;
    let hi = sv.iter().cloned().fold(0.0, f64::max);
    let lo = sv.iter().cloned().fold(f64::INFINITY, f64::min);
    let k = m.ncols().min(m.nrows());
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    (u.columns(0, k).into_owned(), ratio)
}

/// Complex Schur form `A = Q T Q^H` with in-place reordering support.
#[derive(Debug, Clone)]
pub struct ComplexSchur {
    q: CMat,
    t: CMat,
}

impl ComplexSchur {
    pub fn new(a: &Mat) -> Result<Self> {
        let dim = a.nrows();
        let max_iter = MAX_ITER_PER_DIM * dim.max(1);
        let c = to_complex(a);
        let (q, mut t) = Schur::try_new(c.clone(), f64::EPSILON, max_iter)
            .map(|s| s.unpack())
            .or_else(|| schur_fallback(&c, max_iter))
            .ok_or(Error::NoConvergence)?;
        for c in 0..dim {
            for r in c + 1..dim {
                t[(r, c)] = C64::new(0.0, 0.0);
            }
        }
        Ok(Self { q, t })
    }

    pub fn dim(&self) -> usize {
        self.t.nrows()
    }

    pub fn eigenvalues(&self) -> Vec<C64> {
        (0..self.dim()).map(|i| self.t[(i, i)]).collect()
    }

    /// Swap the diagonal entries at `k` and `k + 1` with a unitary rotation.
    fn swap(&mut self, k: usize) {
        let a = self.t[(k, k)];
        let b = self.t[(k + 1, k + 1)];
        let v0 = self.t[(k, k + 1)];
        let v1 = b - a;
        let norm = (v0.norm_sqr() + v1.norm_sqr()).sqrt();
        if norm == 0.0 {
            return;
        }
        let (v0, v1) = (v0 / norm, v1 / norm);
        // g = [[v0, -conj(v1)], [v1, conj(v0)]]
        let g = [[v0, -v1.conj()], [v1, v0.conj()]];
        let dim = self.dim();
        for r in 0..dim {
            let x = self.t[(r, k)];
            let y = self.t[(r, k + 1)];
            self.t[(r, k)] = x * g[0][0] + y * g[1][0];
            self.t[(r, k + 1)] = x * g[0][1] + y * g[1][1];
            let x = self.q[(r, k)];
            let y = self.q[(r, k + 1)];
            self.q[(r, k)] = x * g[0][0] + y * g[1][0];
            self.q[(r, k + 1)] = x * g[0][1] + y * g[1][1];
        }
        for c in 0..dim {
            let x = self.t[(k, c)];
            let y = self.t[(k + 1, c)];
            self.t[(k, c)] = g[0][0].conj() * x + g[1][0].conj() * y;
            self.t[(k + 1, c)] = g[0][1].conj() * x + g[1][1].conj() * y;
        }
        self.t[(k + 1, k)] = C64::new(0.0, 0.0);
        self.t[(k, k)] = b;
        self.t[(k + 1, k + 1)] = a;
    }

    /// Orthonormal basis of the invariant subspace belonging to the diagonal
    /// positions `members`, plus the upper-triangular restriction of `A` to it.
    pub fn invariant_subspace(&self, members: &[usize]) -> (CMat, CMat) {
        let mut work = self.clone();
        let mut sorted = members.to_vec();
        sorted.sort_unstable();
        // position tracking: bubbling earlier members to the front does not
        // move later members, since each swap stays below the later index
        for (slot, &pos) in sorted.iter().enumerate() {
            let mut p = pos;
            while p > slot {
                work.swap(p - 1);
                p -= 1;
            }
        }
        let m = sorted.len();
        let basis = work.q.columns(0, m).into_owned();
        let block = work.t.view((0, 0), (m, m)).into_owned();
        (basis, block)
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues unsorted.
pub fn hermitian_eigen(m: &CMat) -> Result<(Vec<f64>, CMat)> {
    let dim = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_ITER_PER_DIM * dim.max(1))
        .ok_or(Error::NoConvergence)?;
    Ok((eig.eigenvalues.iter().cloned().collect(), eig.eigenvectors))
}

pub fn symmetric_eigenvalues(m: &Mat) -> Result<Vec<f64>> {
    let dim = m.nrows();
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, MAX_ITER_PER_DIM * dim.max(1))
        .ok_or(Error::NoConvergence)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Canonical form of a nonsingular antisymmetric matrix: orthogonal `Q` and
/// positive `e` with `Q^T M Q = J diag(e, e)`.
///
/// Uses the Hermitian matrix `iM`: an eigenvector `a + ib` for eigenvalue
/// `e > 0` satisfies `M a = e b` and `M b = -e a`.
pub fn canonical_antisymmetric(m: &Mat) -> Result<(Mat, Vec<f64>)> {
    let k = m.nrows();
    if !k.is_multiple_of(2) || m.ncols() != k {
        return Err(Error::BadShape { rows: k, cols: m.ncols() });
    }
    let half = k / 2;
    let im = m.map(|x| C64::new(0.0, x));
    let (vals, vecs) = hermitian_eigen(&im)?;
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));
    let scale = vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let mut q = Mat::zeros(k, k);
    let mut e = Vec::with_capacity(half);
    for (slot, &idx) in order.iter().take(half).enumerate() {
        let val = vals[idx];
        if !(val > 1e-14 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::Numerical("antisymmetric matrix is singular".into()));
        }
        e.push(val);
        let w = vecs.column(idx);
        for r in 0..k {
            q[(r, slot)] = std::f64::consts::SQRT_2 * w[r].im;
            q[(r, half + slot)] = std::f64::consts::SQRT_2 * w[r].re;
        }
    }
    Ok((q, e))
}

/// Symplectic diagonalization of a positive-definite form `h` relative to a
/// nondegenerate antisymmetric form `omega`.
///
/// Returns `S` and ascending `d` with `S^T h S = diag(d, d)` and
/// `S^T omega S = J`.
pub fn williamson_pair(h: &Mat, omega: &Mat) -> Result<(Mat, Vec<f64>)> {
    let k = h.nrows();
    let half = k / 2;
    let chol = Cholesky::new(h.clone()).ok_or(Error::NotPositiveDefinite)?;
    let l = chol.l();
    let l_inv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numerical("singular Cholesky factor".into()))?;
    let m = &l_inv * omega * l_inv.transpose();
    let m = (&m - m.transpose()) * 0.5;
    let (q, e) = canonical_antisymmetric(&m)?;
    let d: Vec<f64> = e.iter().map(|x| 1.0 / x).collect();
    let mut order: Vec<usize> = (0..half).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let base = l_inv.transpose() * q;
    let mut s = Mat::zeros(k, k);
    let mut d_sorted = Vec::with_capacity(half);
    for (slot, &idx) in order.iter().enumerate() {
        let root = d[idx].sqrt();
        s.set_column(slot, &(base.column(idx) * root));
        s.set_column(half + slot, &(base.column(half + idx) * root));
        d_sorted.push(d[idx]);
    }
    Ok((s, d_sorted))
}
