//! Convex hulls of point clouds in dimension at most four.
//!
//! Coordinates are rounded to a dyadic grid of `2^-40` relative to the
//! largest coordinate and handled as exact integers. Orientation tests use a
//! floating-point filter and fall back to `BigInt` arithmetic when the
//! filter cannot decide. The hull is built incrementally (beneath-beyond),
//! then coplanar simplicial facets are merged.

use std::collections::{BTreeMap, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_HULL_DIM: usize = 4;
const GRID_BITS: i32 = 40;
const FILTER_REL: f64 = 1e-12;
const PLANAR_BINS: usize = 72;
const DIHEDRAL_BINS: usize = 36;

type IVec = Vec<BigInt>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullFacet {
    /// Outward unit normal.
    pub normal: Vec<f64>,
    /// `normal . x = offset` on the facet.
    pub offset: f64,
    /// `(d-1)`-dimensional measure; 1 for the end points of an interval.
    pub measure: f64,
    pub vertex_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistogramKind {
    /// Direction of the outward normal in `[-pi, pi)`, weighted by edge length.
    NormalDirection,
    /// Angle between normals of adjacent facets in `[0, pi]`, one count per ridge.
    Dihedral,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleHistogram {
    pub kind: HistogramKind,
    pub lower: f64,
    pub bin_width: f64,
    /// Normalized to sum 1 (empty when there is nothing to count).
    pub weights: Vec<f64>,
}

impl AngleHistogram {
    fn none() -> Self {
        Self { kind: HistogramKind::None, lower: 0.0, bin_width: 0.0, weights: Vec::new() }
    }

    fn build(kind: HistogramKind, lower: f64, upper: f64, bins: usize, samples: &[(f64, f64)]) -> Self {
        let bin_width = (upper - lower) / bins as f64;
        let mut weights = vec![0.0; bins];
        for &(angle, w) in samples {
            let k = (((angle - lower) / bin_width).floor().max(0.0) as usize).min(bins - 1);
            weights[k] += w;
        }
        let total: f64 = weights.iter().sum();
        if total > 0.0 {
            weights.iter_mut().for_each(|w| *w /= total);
        }
        Self { kind, lower, bin_width, weights }
    }

    /// Fraction of weight in bins whose centres lie within `radius` of `angle`.
    pub fn mass_near(&self, angle: f64, radius: f64) -> f64 {
        self.weights
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let centre = self.lower + (*k as f64 + 0.5) * self.bin_width;
                let mut diff = (centre - angle).abs();
                if self.kind == HistogramKind::NormalDirection {
                    diff = diff.min(2.0 * std::f64::consts::PI - diff);
                }
                diff <= radius
            })
            .map(|(_, w)| w)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullSummary {
    pub dim: usize,
    pub affine_dimension: usize,
    pub degenerate: bool,
    pub input_points: usize,
    pub distinct_points: usize,
    /// Grid spacing used to rationalize coordinates.
    pub quantum: f64,
    pub vertices: Vec<Vec<f64>>,
    pub facets: Vec<HullFacet>,
    pub histogram: AngleHistogram,
}

fn dot(a: &[BigInt], b: &[BigInt]) -> BigInt {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[BigInt], b: &[BigInt]) -> IVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

fn det(m: &[IVec]) -> BigInt {
    match m.len() {
        0 => BigInt::one(),
        1 => m[0][0].clone(),
        2 => &m[0][0] * &m[1][1] - &m[0][1] * &m[1][0],
        k => (0..k)
            .map(|c| {
                let minor: Vec<IVec> =
                    m[1..].iter().map(|row| row.iter().enumerate().filter(|(j, _)| *j != c).map(|(_, v)| v.clone()).collect()).collect();
                let term = &m[0][c] * det(&minor);
                if c % 2 == 0 {
                    term
                } else {
                    -term
                }
            })
            .sum(),
    }
}

fn rank(rows: &[IVec]) -> usize {
    let mut m = rows.to_vec();
    if m.is_empty() {
        return 0;
    }
    let cols = m[0].len();
    let mut r = 0;
    for c in 0..cols {
        if r == m.len() {
            break;
        }
        let Some(p) = (r..m.len()).find(|&i| !m[i][c].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        for i in r + 1..m.len() {
            let (a, b) = (m[r][c].clone(), m[i][c].clone());
            for j in c..cols {
                m[i][j] = &a * &m[i][j] - &b * &m[r][j];
            }
        }
        r += 1;
    }
    r
}

/// A normal of the hyperplane through `d` points in `R^d` (not oriented).
fn hyperplane(points: &[&IVec]) -> (IVec, BigInt) {
    let d = points[0].len();
    let diffs: Vec<IVec> = points[1..].iter().map(|p| sub(p, points[0])).collect();
    let normal: IVec = (0..d)
        .map(|i| {
            let minor: Vec<IVec> =
                diffs.iter().map(|row| row.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v.clone()).collect()).collect();
            let v = det(&minor);
            if i % 2 == 0 {
                v
            } else {
                -v
            }
        })
        .collect();
    let offset = dot(&normal, points[0]);
    (normal, offset)
}

struct Facet {
    verts: Vec<usize>,
    normal: IVec,
    offset: BigInt,
    fnormal: Vec<f64>,
    foffset: f64,
}

impl Facet {
    fn new(verts: Vec<usize>, pts: &[IVec], interior: &[BigInt], weight: &BigInt) -> Self {
        let refs: Vec<&IVec> = verts.iter().map(|&v| &pts[v]).collect();
        let (mut normal, mut offset) = hyperplane(&refs);
        if dot(&normal, interior) > weight * &offset {
            normal.iter_mut().for_each(|x| *x = -x.clone());
            offset = -offset;
        }
        let fnormal = normal.iter().map(|x| x.to_f64().unwrap_or(f64::INFINITY)).collect();
        let foffset = offset.to_f64().unwrap_or(f64::INFINITY);
        Self { verts, normal, offset, fnormal, foffset }
    }

    /// Sign of `normal . q - offset`.
    fn side(&self, q: &[BigInt], fq: &[f64]) -> std::cmp::Ordering {
        let mut s = -self.foffset;
        let mut mag = self.foffset.abs();
        for (n, x) in self.fnormal.iter().zip(fq) {
            s += n * x;
            mag += (n * x).abs();
        }
        if mag.is_finite() && s.abs() > FILTER_REL * mag {
            return s.partial_cmp(&0.0).unwrap();
        }
        (dot(&self.normal, q) - &self.offset).cmp(&BigInt::zero())
    }
}

/// Round to the grid and drop duplicates; returns integer points, their
/// float images, and the index of a representative input point.
fn rationalize(points: &[Vec<f64>]) -> (Vec<IVec>, Vec<Vec<f64>>, Vec<usize>, f64) {
    let largest = points.iter().flatten().fold(0.0_f64, |acc, x| acc.max(x.abs()));
    let exponent = if largest > 0.0 { largest.log2().ceil() as i32 - GRID_BITS } else { 0 };
    let quantum = 2f64.powi(exponent);
    let mut seen: BTreeMap<Vec<i64>, usize> = BTreeMap::new();
    for (idx, p) in points.iter().enumerate() {
        let key: Vec<i64> = p.iter().map(|x| (x / quantum).round() as i64).collect();
        seen.entry(key).or_insert(idx);
    }
    let mut ints = Vec::with_capacity(seen.len());
    let mut floats = Vec::with_capacity(seen.len());
    let mut origin = Vec::with_capacity(seen.len());
    let mut entries: Vec<_> = seen.into_iter().collect();
    entries.sort_by_key(|(_, idx)| *idx);
    for (key, idx) in entries {
        floats.push(key.iter().map(|&k| k as f64).collect());
        ints.push(key.into_iter().map(BigInt::from).collect());
        origin.push(idx);
    }
    (ints, floats, origin, quantum)
}

/// Indices of a maximal affinely independent subset, greedily.
fn affine_basis(pts: &[IVec]) -> Vec<usize> {
    let d = pts[0].len();
    let mut chosen = vec![0];
    let mut diffs: Vec<IVec> = Vec::new();
    for (i, p) in pts.iter().enumerate().skip(1) {
        if chosen.len() == d + 1 {
            break;
        }
        let mut trial = diffs.clone();
        trial.push(sub(p, &pts[0]));
        if rank(&trial) == trial.len() {
            diffs = trial;
            chosen.push(i);
        }
    }
    chosen
}

fn primitive(normal: &[BigInt], offset: &BigInt) -> (IVec, BigInt) {
    let g = normal.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    (normal.iter().map(|x| x / &g).collect(), offset / &g)
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|x| x as f64).product()
}

fn unit(v: &[f64]) -> Vec<f64> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / norm).collect()
}

fn interval_summary(points: &[Vec<f64>], distinct: usize, quantum: f64) -> HullSummary {
    let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
    let degenerate = distinct < 2;
    let (vertices, facets) = if degenerate {
        (vec![vec![lo]], Vec::new())
    } else {
        let facet = |s: f64, off: f64| HullFacet { normal: vec![s], offset: off, measure: 1.0, vertex_count: 1 };
        (vec![vec![lo], vec![hi]], vec![facet(-1.0, -lo), facet(1.0, hi)])
    };
    HullSummary {
        dim: 1,
        affine_dimension: usize::from(!degenerate),
        degenerate,
        input_points: points.len(),
        distinct_points: distinct,
        quantum,
        vertices,
        facets,
        histogram: AngleHistogram::none(),
    }
}

/// Convex hull of `points` in `R^d`, `1 <= d <= 4`.
///
/// Lower-dimensional clouds are not an error: the summary reports the
/// affine dimension and, when it is at most one, the extreme points.
pub fn hull_summary(points: &[Vec<f64>]) -> Result<HullSummary> {
    let first = points.first().ok_or_else(|| Error::InvalidParameter("empty point cloud".into()))?;
    let d = first.len();
    if d == 0 || d > MAX_HULL_DIM {
        return Err(Error::InvalidParameter(format!("hull dimension must be in 1..={MAX_HULL_DIM}, got {d}")));
    }
    if let Some(p) = points.iter().find(|p| p.len() != d) {
        return Err(Error::DimensionMismatch { expected: d, found: p.len() });
    }
    if points.iter().flatten().any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (pts, fpts, origin, quantum) = rationalize(points);
    if d == 1 {
        return Ok(interval_summary(points, pts.len(), quantum));
    }
    let basis = affine_basis(&pts);
    let affine_dimension = basis.len() - 1;
    if affine_dimension < d {
        let vertices = match affine_dimension {
            0 => vec![points[origin[0]].clone()],
            1 => {
                let dir = sub(&pts[basis[1]], &pts[basis[0]]);
                let proj: Vec<BigInt> = pts.iter().map(|p| dot(p, &dir)).collect();
                let lo = (0..pts.len()).min_by(|&a, &b| proj[a].cmp(&proj[b])).unwrap();
                let hi = (0..pts.len()).max_by(|&a, &b| proj[a].cmp(&proj[b])).unwrap();
                vec![points[origin[lo]].clone(), points[origin[hi]].clone()]
            }
            _ => Vec::new(),
        };
        return Ok(HullSummary {
            dim: d,
            affine_dimension,
            degenerate: true,
            input_points: points.len(),
            distinct_points: pts.len(),
            quantum,
            vertices,
            facets: Vec::new(),
            histogram: AngleHistogram::none(),
        });
    }

    let weight = BigInt::from(d + 1);
    let interior: IVec = (0..d).map(|j| basis.iter().map(|&b| &pts[b][j]).sum()).collect();
    let mut facets: Vec<Facet> = (0..=d)
        .map(|skip| {
            let verts: Vec<usize> = basis.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &b)| b).collect();
            Facet::new(verts, &pts, &interior, &weight)
        })
        .collect();
    let mut alive = vec![true; facets.len()];

    for q in 0..pts.len() {
        if basis.contains(&q) {
            continue;
        }
        let visible: Vec<usize> = (0..facets.len())
            .filter(|&f| alive[f] && facets[f].side(&pts[q], &fpts[q]) == std::cmp::Ordering::Greater)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut ridges: HashMap<Vec<usize>, usize> = HashMap::new();
        for &f in &visible {
            let verts = &facets[f].verts;
            for skip in 0..verts.len() {
                let mut ridge: Vec<usize> = verts.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &v)| v).collect();
                ridge.sort_unstable();
                *ridges.entry(ridge).or_insert(0) += 1;
            }
            alive[f] = false;
        }
        let mut horizon: Vec<Vec<usize>> = ridges.into_iter().filter(|(_, c)| *c == 1).map(|(r, _)| r).collect();
        horizon.sort();
        for mut ridge in horizon {
            ridge.push(q);
            facets.push(Facet::new(ridge, &pts, &interior, &weight));
            alive.push(true);
        }
    }

    // merge coplanar simplicial facets
    let mut groups: BTreeMap<(IVec, BigInt), Vec<usize>> = BTreeMap::new();
    for (f, facet) in facets.iter().enumerate().filter(|(f, _)| alive[*f]) {
        groups.entry(primitive(&facet.normal, &facet.offset)).or_default().push(f);
    }
    let scale_measure = quantum.powi(d as i32 - 1) / factorial(d - 1);
    let mut group_of: HashMap<usize, usize> = HashMap::new();
    let mut vertex_normals: BTreeMap<usize, Vec<IVec>> = BTreeMap::new();
    let mut merged = Vec::with_capacity(groups.len());
    let mut unit_normals = Vec::with_capacity(groups.len());
    for (g, ((normal, offset), members)) in groups.iter().enumerate() {
        let fnormal: Vec<f64> = normal.iter().map(|x| x.to_f64().unwrap()).collect();
        let norm = fnormal.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut verts: Vec<usize> = members.iter().flat_map(|&f| facets[f].verts.iter().copied()).collect();
        verts.sort_unstable();
        verts.dedup();
        for &v in &verts {
            vertex_normals.entry(v).or_default().push(normal.clone());
        }
        let measure: f64 = members
            .iter()
            .map(|&f| facets[f].fnormal.iter().map(|x| x * x).sum::<f64>().sqrt() * scale_measure)
            .sum();
        for &f in members {
            group_of.insert(f, g);
        }
        let n_unit = unit(&fnormal);
        unit_normals.push(n_unit.clone());
        merged.push(HullFacet {
            normal: n_unit,
            offset: offset.to_f64().unwrap() / norm * quantum,
            measure,
            vertex_count: verts.len(),
        });
    }
    let vertices: Vec<Vec<f64>> = vertex_normals
        .into_iter()
        .filter(|(_, normals)| rank(normals) == d)
        .map(|(v, _)| points[origin[v]].clone())
        .collect();

    let histogram = if d == 2 {
        let samples: Vec<(f64, f64)> = merged.iter().map(|f| (f.normal[1].atan2(f.normal[0]), f.measure)).collect();
        AngleHistogram::build(HistogramKind::NormalDirection, -std::f64::consts::PI, std::f64::consts::PI, PLANAR_BINS, &samples)
    } else {
        let mut ridge_groups: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        for (&f, &g) in &group_of {
            let verts = &facets[f].verts;
            for skip in 0..verts.len() {
                let mut ridge: Vec<usize> = verts.iter().enumerate().filter(|(k, _)| *k != skip).map(|(_, &v)| v).collect();
                ridge.sort_unstable();
                ridge_groups.entry(ridge).or_default().push(g);
            }
        }
        let mut samples: Vec<(f64, f64)> = ridge_groups
            .values()
            .filter(|gs| gs.len() == 2 && gs[0] != gs[1])
            .map(|gs| {
                let c: f64 = unit_normals[gs[0]].iter().zip(&unit_normals[gs[1]]).map(|(a, b)| a * b).sum();
                (c.clamp(-1.0, 1.0).acos(), 1.0)
            })
            .collect();
        samples.sort_by(|a, b| a.0.total_cmp(&b.0));
        AngleHistogram::build(HistogramKind::Dihedral, 0.0, std::f64::consts::PI, DIHEDRAL_BINS, &samples)
    };

    Ok(HullSummary {
        dim: d,
        affine_dimension: d,
        degenerate: false,
        input_points: points.len(),
        distinct_points: pts.len(),
        quantum,
        vertices,
        facets: merged,
        histogram,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn sorted(mut v: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn interval_in_one_dimension() {
        let pts: Vec<Vec<f64>> = [3.0, 2.0, 5.5, 4.0].iter().map(|&x| vec![x]).collect();
        let h = hull_summary(&pts).unwrap();
        assert_eq!(h.vertices, vec![vec![2.0], vec![5.5]]);
        assert_eq!(h.facets.len(), 2);
        assert!(!h.degenerate);
    }

    #[test]
    fn simplex_recovered_with_interior_points() {
        let mut rng = crate::rng::stream(1, 0);
        for d in 2..=4 {
            let mut simplex = vec![vec![0.0; d]];
            for k in 0..d {
                let mut e = vec![0.0; d];
                e[k] = 1.0;
                simplex.push(e);
            }
            let mut pts = simplex.clone();
            for _ in 0..200 {
                let mut w: Vec<f64> = (0..=d).map(|_| rng.random::<f64>()).collect();
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|x| *x /= s);
                pts.push((0..d).map(|j| (0..=d).map(|k| w[k] * simplex[k][j]).sum()).collect());
            }
            let h = hull_summary(&pts).unwrap();
            assert_eq!(sorted(h.vertices.clone()), sorted(simplex.clone()), "d = {d}");
            assert_eq!(h.facets.len(), d + 1);
            let total: f64 = h.histogram.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn square_merges_coplanar_facets() {
        let mut pts = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![2.0, 2.0], vec![0.0, 2.0]];
        pts.extend([vec![1.0, 0.0], vec![2.0, 1.0], vec![1.0, 1.0], vec![0.0, 1.5]]);
        let h = hull_summary(&pts).unwrap();
        assert_eq!(h.facets.len(), 4);
        assert_eq!(h.vertices.len(), 4);
        for f in &h.facets {
            assert!((f.measure - 2.0).abs() < 1e-9);
        }
        assert!((h.histogram.mass_near(-std::f64::consts::FRAC_PI_2, 0.05) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn cube_facets_and_dihedral_angles() {
        let mut pts = Vec::new();
        for mask in 0..8 {
            pts.push((0..3).map(|k| f64::from((mask >> k) & 1)).collect::<Vec<f64>>());
        }
        pts.push(vec![0.5, 0.5, 0.5]);
        let h = hull_summary(&pts).unwrap();
        assert_eq!(h.facets.len(), 6);
        assert_eq!(h.vertices.len(), 8);
        assert!((h.histogram.mass_near(std::f64::consts::FRAC_PI_2, 0.05) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_clouds_are_reported() {
        let collinear: Vec<Vec<f64>> = (0..5).map(|k| vec![k as f64, 2.0 * k as f64]).collect();
        let h = hull_summary(&collinear).unwrap();
        assert!(h.degenerate);
        assert_eq!(h.affine_dimension, 1);
        assert_eq!(sorted(h.vertices), vec![vec![0.0, 0.0], vec![4.0, 8.0]]);

        let single = vec![vec![1.0, 1.0, 1.0]; 3];
        let h = hull_summary(&single).unwrap();
        assert_eq!(h.affine_dimension, 0);

        let planar: Vec<Vec<f64>> = vec![vec![0.0, 0.0, 1.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0], vec![1.0, 1.0, 1.0]];
        let h = hull_summary(&planar).unwrap();
        assert!(h.degenerate);
        assert_eq!(h.affine_dimension, 2);
    }

    #[test]
    fn invalid_input() {
        assert!(hull_summary(&[]).is_err());
        assert!(hull_summary(&vec![vec![0.0; 5]; 6]).is_err());
        assert!(hull_summary(&[vec![0.0, 1.0], vec![1.0]]).is_err());
        assert!(hull_summary(&[vec![f64::NAN, 1.0]]).is_err());
    }

    #[test]
    fn nearly_coplanar_points_decided_exactly() {
        // points within the float filter margin of an edge
        let mut pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        pts.push(vec![0.5, 0.5]);
        pts.push(vec![0.25, 0.75]);
        let tiny = 2f64.powi(-30);
        pts.push(vec![0.5 + tiny, 0.5 - tiny]);
        let h = hull_summary(&pts).unwrap();
        assert_eq!(h.vertices.len(), 3);
        assert_eq!(h.facets.len(), 3);
    }
}
