//! Browser demo: three small diagnostics computed in WebAssembly and
//! returned as JSON for the page in `www/` to plot.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use branchlda::diagnostics::{
    concentration_curve, default_sigma_grid, log_ratio_growth, sigma_sweep, TinyInstance, BUILTIN_COUNT,
};
use branchlda::math::sample_sd;
use branchlda::slda::EmSchedule;
use branchlda::synth::{generate, SyntheticSpec};

const GROWTH_LENGTHS: [usize; 6] = [5, 10, 20, 40, 80, 160];
const SWEEP_SIGMAS: [f64; 5] = [1.0, 1e-1, 1e-2, 1e-4, 1e-6];

fn json<T: Serialize>(value: &T) -> Result<String, String> {
    serde_json::to_string(value).map_err(|e| e.to_string())
}

pub fn concentration_json(instance: usize) -> Result<String, String> {
    let tiny = TinyInstance::builtin(instance).map_err(|e| e.to_string())?;
    let grid = default_sigma_grid(&tiny, &tiny.eta);
    json(&concentration_curve(&tiny, &tiny.eta, &grid).map_err(|e| e.to_string())?)
}

pub fn growth_json(docs: usize, topics: usize, spread: f64, seed: u64) -> Result<String, String> {
    if topics < 2 {
        return Err("need at least two topics".into());
    }
    let eta: Vec<f64> = (0..topics).map(|k| spread * (2.0 * k as f64 / (topics - 1) as f64 - 1.0)).collect();
    json(&log_ratio_growth(docs, &eta, &GROWTH_LENGTHS, seed).map_err(|e| e.to_string())?)
}

#[derive(Serialize)]
struct SweepPoint {
    relative_sigma: f64,
    in_sample: f64,
    out_sample: f64,
}

/// Fixed-σ sLDA on a small synthetic corpus with planted R² 0.25; σ runs
/// from SD(y) down to 1e-6·SD(y).
pub fn sweep_json(topics: usize, seed: u64) -> Result<String, String> {
    let spec = SyntheticSpec { vocab: 100, docs: 300, doc_len: 30, ..SyntheticSpec::desk(topics, seed) };
    let corpus = generate(&spec).map_err(|e| e.to_string())?.corpus;
    let sd = sample_sd(&corpus.labels());
    let sigmas: Vec<f64> = SWEEP_SIGMAS.iter().map(|r| r * sd).collect();
    let schedule = EmSchedule { em_rounds: 3, e_sweeps_per_round: 10, burn_in_sweeps: 30 };
    let rows = sigma_sweep(&corpus, &[topics], &sigmas, &[seed], schedule, 20).map_err(|e| e.to_string())?;
    let points: Vec<SweepPoint> = rows
        .iter()
        .map(|r| SweepPoint { relative_sigma: r.sigma / sd, in_sample: r.in_sample, out_sample: r.out_sample })
        .collect();
    json(&points)
}

#[wasm_bindgen]
pub fn builtin_count() -> u32 {
    BUILTIN_COUNT as u32
}

/// Posterior distance to the minimum-SSE limit as σ shrinks, for builtin tiny instance `instance` (1-based).
#[wasm_bindgen]
pub fn concentration(instance: u32) -> Result<String, JsError> {
    concentration_json(instance as usize).map_err(|e| JsError::new(&e))
}

/// log R of the degenerate assignment as documents lengthen.
#[wasm_bindgen]
pub fn ratio_growth(docs: u32, topics: u32, spread: f64, seed: u32) -> Result<String, JsError> {
    growth_json(docs as usize, topics as usize, spread, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn small_sigma_sweep(topics: u32, seed: u32) -> Result<String, JsError> {
    sweep_json(topics as usize, seed as u64).map_err(|e| JsError::new(&e))
}
