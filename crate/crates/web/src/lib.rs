//! Browser bindings: classify a pasted matrix, classify a disguised normal
//! form, and sample a Horn cloud for plotting.

use serde_json::json;
use wasm_bindgen::prelude::*;

use sympstab::horn::{self, OrbitSpec, SpreadSchedule};
use sympstab::io::{parse_hamiltonian_json, parse_tuple};
use sympstab::stability::{self, TolProfile};
use sympstab::symplectic::{conjugate, random_symplectic, QuadraticHamiltonian};

/// Largest cloud the page may request.
pub const MAX_POINTS: usize = 20_000;

fn text(e: sympstab::Error) -> String {
    e.to_string()
}

pub fn analyze_json(matrix: &str) -> Result<String, String> {
    let h = parse_hamiltonian_json(matrix).map_err(text)?;
    let tol = TolProfile::default();
    let report = stability::classify(&h, &tol).map_err(text)?;
    let membership = stability::membership(&h, &tol).map_err(text)?;
    Ok(json!({ "report": report, "membership": membership }).to_string())
}

/// Conjugates `diag(lambda, lambda)` by a random symplectic matrix and
/// classifies the result, which should not depend on the disguise.
pub fn disguised_json(lambda: &str, spread: f64, seed: u64) -> Result<String, String> {
    let lambda = parse_tuple(lambda).map_err(text)?;
    let d = QuadraticHamiltonian::normal_form(&lambda).map_err(text)?;
    let s = random_symplectic(d.n(), spread, seed).map_err(text)?;
    let h = conjugate(&d, &s).map_err(text)?;
    let report = stability::classify(&h, &TolProfile::default()).map_err(text)?;
    let m = h.matrix();
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect();
    Ok(json!({ "h": rows, "condition": s.condition(), "report": report }).to_string())
}

/// Flattened `F(H1 + H2)` samples, `n` coordinates per point.
pub fn cloud_points(lambda: &str, mu: &str, count: usize, seed: u64) -> Result<Vec<f64>, String> {
    if count > MAX_POINTS {
        return Err(format!("at most {MAX_POINTS} points"));
    }
    let lambda = OrbitSpec::new(parse_tuple(lambda).map_err(text)?).map_err(text)?;
    let mu = OrbitSpec::new(parse_tuple(mu).map_err(text)?).map_err(text)?;
    let cloud = horn::horn_sample(&lambda, &mu, count, seed, &SpreadSchedule::default()).map_err(text)?;
    Ok(cloud.points.into_iter().flatten().collect())
}

#[wasm_bindgen]
pub fn analyze(matrix: &str) -> Result<String, JsError> {
    analyze_json(matrix).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn disguised(lambda: &str, spread: f64, seed: u32) -> Result<String, JsError> {
    disguised_json(lambda, spread, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn horn_cloud(lambda: &str, mu: &str, count: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    cloud_points(lambda, mu, count, seed as u64).map_err(|e| JsError::new(&e))
}
