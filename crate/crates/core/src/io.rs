//! File formats: JSON matrices and CSV point clouds.
//!
//! A matrix file is `{"n": 2, "order": "block", "h": [[...], ...]}` with the
//! rows of `H`. In `"interleaved"` order the coordinates are
//! `(q1, p1, q2, p2, ...)`; internally everything is block ordered.
//!
//! A cloud file starts with one metadata comment line
//! `# lambda=1,2; mu=1,2; seed=7; count=3; frame_spread=0.5; max_radius=2.6; ...`
//! followed by a header `x1,...,xn` and one sorted tuple per row. Unknown
//! metadata keys are ignored.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::horn::{HornSampleCloud, SpreadSchedule};
use crate::linalg::Mat;
use crate::symplectic::QuadraticHamiltonian;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateOrder {
    #[default]
    Block,
    Interleaved,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixFile {
    pub n: usize,
    #[serde(default)]
    pub order: CoordinateOrder,
    pub h: Vec<Vec<f64>>,
}

/// Position in block order of interleaved coordinate `k`.
fn block_index(k: usize, n: usize) -> usize {
    if k.is_multiple_of(2) {
        k / 2
    } else {
        n + k / 2
    }
}

pub fn interleaved_to_block(m: &Mat) -> Mat {
    let n = m.nrows() / 2;
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(block_index(i, n), block_index(j, n))] = m[(i, j)];
        }
    }
    out
}

pub fn block_to_interleaved(m: &Mat) -> Mat {
    let n = m.nrows() / 2;
    let mut out = Mat::zeros(m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out[(i, j)] = m[(block_index(i, n), block_index(j, n))];
        }
    }
    out
}

impl MatrixFile {
    pub fn from_hamiltonian(h: &QuadraticHamiltonian, order: CoordinateOrder) -> Self {
        let m = match order {
            CoordinateOrder::Block => h.matrix().clone(),
            CoordinateOrder::Interleaved => block_to_interleaved(h.matrix()),
        };
        let rows = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
        Self { n: h.n(), order, h: rows }
    }

    /// Validates the shape and converts to a block-ordered Hamiltonian.
    pub fn to_hamiltonian(&self) -> Result<QuadraticHamiltonian> {
        if self.n == 0 {
            return Err(Error::ZeroDegreesOfFreedom);
        }
        let dim = 2 * self.n;
        if self.h.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: self.h.len() });
        }
        if let Some(row) = self.h.iter().find(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, found: row.len() });
        }
        let m = Mat::from_fn(dim, dim, |i, j| self.h[i][j]);
        let m = match self.order {
            CoordinateOrder::Block => m,
            CoordinateOrder::Interleaved => interleaved_to_block(&m),
        };
        QuadraticHamiltonian::new(m)
    }
}

pub fn parse_hamiltonian_json(text: &str) -> Result<QuadraticHamiltonian> {
    let file: MatrixFile = serde_json::from_str(text).map_err(|e| Error::Format(format!("matrix JSON: {e}")))?;
    file.to_hamiltonian()
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_tuple(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {t:?}: {e}"))))
        .collect()
}

pub fn write_cloud_csv<W: Write>(cloud: &HornSampleCloud, out: W) -> Result<()> {
    let io_err = |e: std::io::Error| Error::Format(e.to_string());
    let mut out = std::io::BufWriter::new(out);
    let s = &cloud.schedule;
    writeln!(
        out,
        "# lambda={}; mu={}; seed={}; count={}; frame_spread={}; max_radius={}; near_fraction={}; near_radius={}; unitary_mix={}; version={}",
        join(&cloud.lambda),
        join(&cloud.mu),
        cloud.seed,
        cloud.points.len(),
        s.frame_spread,
        s.max_radius,
        s.near_fraction,
        s.near_radius,
        s.unitary_mix,
        env!("CARGO_PKG_VERSION")
    )
    .map_err(io_err)?;
    let mut w = csv::Writer::from_writer(out);
    let header: Vec<String> = (1..=cloud.n()).map(|j| format!("x{j}")).collect();
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    for p in &cloud.points {
        w.write_record(p.iter().map(|x| x.to_string())).map_err(|e| Error::Format(e.to_string()))?;
    }
    w.flush().map_err(io_err)
}

pub fn read_cloud_csv<R: BufRead>(mut input: R) -> Result<HornSampleCloud> {
    let mut meta = String::new();
    input.read_line(&mut meta).map_err(|e| Error::Format(e.to_string()))?;
    let meta = meta
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| Error::Format("cloud CSV must start with a '# lambda=...' metadata line".into()))?;
    let mut lambda = None;
    let mut mu = None;
    let mut seed = None;
    let mut count = None;
    let mut schedule = SpreadSchedule::default();
    for field in meta.split(';').map(str::trim).filter(|f| !f.is_empty()) {
        let (key, value) = field.split_once('=').ok_or_else(|| Error::Format(format!("bad metadata field {field:?}")))?;
        let number = |v: &str| v.trim().parse::<f64>().map_err(|e| Error::Format(format!("{key}: {e}")));
        match key.trim() {
            "lambda" => lambda = Some(parse_tuple(value)?),
            "mu" => mu = Some(parse_tuple(value)?),
            "seed" => seed = Some(value.trim().parse::<u64>().map_err(|e| Error::Format(format!("seed: {e}")))?),
            "count" => count = Some(value.trim().parse::<usize>().map_err(|e| Error::Format(format!("count: {e}")))?),
            "frame_spread" => schedule.frame_spread = number(value)?,
            "max_radius" => schedule.max_radius = number(value)?,
            "near_fraction" => schedule.near_fraction = number(value)?,
            "near_radius" => schedule.near_radius = number(value)?,
            "unitary_mix" => schedule.unitary_mix = number(value)?,
            _ => {}
        }
    }
    let lambda = lambda.ok_or_else(|| Error::Format("metadata is missing lambda".into()))?;
    let mu = mu.ok_or_else(|| Error::Format("metadata is missing mu".into()))?;
    let mut reader = csv::Reader::from_reader(input);
    let mut points = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Format(e.to_string()))?;
        let p = record
            .iter()
            .map(|t| t.trim().parse::<f64>().map_err(|e| Error::Format(format!("bad number {t:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if p.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        points.push(p);
    }
    if let Some(c) = count {
        if c != points.len() {
            return Err(Error::Format(format!("metadata count {c} but {} rows", points.len())));
        }
    }
    HornSampleCloud::from_points(lambda, mu, seed.unwrap_or(0), schedule, points)
}
