//! WebAssembly bindings for the browser demo.
//!
//! Every exported function takes and returns JSON (or TOML) text. The `*_json`
//! functions hold the logic and run natively too; the `#[wasm_bindgen]`
//! wrappers only convert errors into JavaScript exceptions.

use robustdec::dec::{fuzzy_dec_table, DecTable, GammaBracket};
use robustdec::harness::{regret_csv, run_seed, BeliefSpec, Bounds, Scenario, Setup};
use robustdec::prob::{hellinger_project, Dist};
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Largest round count the page will simulate.
pub const MAX_DEMO_ROUNDS: usize = 5_000;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ProjectInput {
    target: Vec<f64>,
    belief: BeliefSpec,
}

#[derive(Serialize)]
struct ProjectOutput {
    point: Vec<f64>,
    dist_sq: f64,
}

/// Hellinger projection of `target` onto a belief: `{"target": [...], "belief": {...}}`.
pub fn project_json(input: &str) -> Result<String, String> {
    let inp: ProjectInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    let target = Dist::new(inp.target).map_err(|e| e.to_string())?;
    let belief = inp.belief.build(target.len()).map_err(|e| e.to_string())?;
    let p = hellinger_project(&target, &belief).map_err(|e| e.to_string())?;
    serde_json::to_string(&ProjectOutput { point: p.point.into_vec(), dist_sq: p.dist_sq }).map_err(|e| e.to_string())
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DecInput {
    maxf: Vec<f64>,
    fbar: Vec<f64>,
    loss: Vec<Vec<f64>>,
    eps: f64,
}

#[derive(Serialize)]
struct DecOutput {
    value: f64,
    p: Vec<f64>,
    gamma: f64,
}

/// Fuzzy DEC of a table: `{"maxf": [...], "fbar": [...], "loss": [[...]], "eps": 0.1}`.
pub fn fuzzy_dec_json(input: &str) -> Result<String, String> {
    let inp: DecInput = serde_json::from_str(input).map_err(|e| e.to_string())?;
    if !(inp.eps >= 0.0) {
        return Err("eps must be nonnegative".into());
    }
    let table = DecTable::new(inp.maxf, inp.fbar, inp.loss).map_err(|e| e.to_string())?;
    let d = fuzzy_dec_table(&table, inp.eps, GammaBracket::default()).map_err(|e| e.to_string())?;
    serde_json::to_string(&DecOutput { value: d.value, p: d.p.into_vec(), gamma: d.gamma_star }).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct SimulateOutput {
    summary: robustdec::harness::Summary,
    csv: String,
    error: Option<String>,
}

/// One seeded run of a scenario given as TOML text.
pub fn simulate_json(scenario_toml: &str, seed: u64) -> Result<String, String> {
    let sc = Scenario::from_toml(scenario_toml).map_err(|e| e.to_string())?;
    if sc.rounds > MAX_DEMO_ROUNDS {
        return Err(format!("the demo runs at most {MAX_DEMO_ROUNDS} rounds"));
    }
    sc.validate().map_err(|e| e.to_string())?;
    let setup = Setup::build(&sc).map_err(|e| e.to_string())?;
    let bounds = Bounds::compute(&sc, &setup).map_err(|e| e.to_string())?;
    let run = run_seed(&sc, &setup, &bounds, seed).map_err(|e| e.to_string())?;
    let csv = regret_csv(&run.transcript).map_err(|e| e.to_string())?;
    serde_json::to_string(&SimulateOutput { summary: run.summary, csv, error: run.transcript.error }).map_err(|e| e.to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn project(input: &str) -> Result<String, JsError> {
    js(project_json(input))
}

#[wasm_bindgen(js_name = fuzzyDec)]
pub fn fuzzy_dec(input: &str) -> Result<String, JsError> {
    js(fuzzy_dec_json(input))
}

#[wasm_bindgen]
pub fn simulate(scenario_toml: &str, seed: u32) -> Result<String, JsError> {
    js(simulate_json(scenario_toml, u64::from(seed)))
}
