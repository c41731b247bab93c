//! Brute-force reference computations behind `robustdec oracle`.
//!
//! Each oracle reads one JSON object and returns one JSON value. They are slow
//! on purpose and only meant for small instances.

use crate::dec::{fuzzy_objective, DecTable};
use crate::error::{Error, Result};
use crate::harness::BeliefSpec;
use crate::prob::{hellinger_sq, Dist, MEMBER_TOL};
use crate::rmdp::{rollout, traj_dist, CellSelection, Dims, Policy, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

pub const NAMES: [&str; 3] = ["dec-grid", "project-grid", "traj-mc"];

/// Every point of the `n`-simplex whose coordinates are multiples of `1 / steps`.
pub fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() + 1 == n {
            cur.push(left);
            out.push(cur.iter().map(|&k| k as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for k in 0..=left {
            cur.push(k);
            rec(n, left - k, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if n > 0 {
        rec(n, steps, steps, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

fn steps_for(step: f64) -> Result<usize> {
    if !(step > 0.0 && step <= 1.0) {
        return Err(Error::InvalidParameter(format!("grid step {step} outside (0, 1]")));
    }
    Ok((1.0 / step).round() as usize)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecGridInput {
    pub maxf: Vec<f64>,
    pub fbar: Vec<f64>,
    pub loss: Vec<Vec<f64>>,
    /// Offset DEC at this `gamma`; exactly one of `gamma` and `eps` is required.
    pub gamma: Option<f64>,
    /// Fuzzy DEC at radius `eps`.
    pub eps: Option<f64>,
    #[serde(default = "default_step")]
    pub step: f64,
}

fn default_step() -> f64 {
    1e-3
}

#[derive(Debug, Serialize)]
pub struct DecGridOutput {
    pub value: f64,
    pub p: Vec<f64>,
}

pub fn dec_grid(input: &DecGridInput) -> Result<DecGridOutput> {
    let table = DecTable::new(input.maxf.clone(), input.fbar.clone(), input.loss.clone())?;
    let steps = steps_for(input.step)?;
    let objective: Box<dyn Fn(&[f64]) -> f64> = match (input.gamma, input.eps) {
        (Some(g), None) if g >= 0.0 => Box::new(move |p| table.offset_objective(p, g)),
        (None, Some(e)) if e >= 0.0 => Box::new(move |p| fuzzy_objective(&table, p, e)),
        _ => return Err(Error::InvalidParameter("give exactly one nonnegative gamma or eps".into())),
    };
    let mut best = DecGridOutput { value: f64::INFINITY, p: Vec::new() };
    for p in simplex_grid(input.fbar.len(), steps) {
        let v = objective(&p);
        if v < best.value {
            best = DecGridOutput { value: v, p };
        }
    }
    Ok(best)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectGridInput {
    pub target: Vec<f64>,
    pub belief: BeliefSpec,
    #[serde(default = "default_step")]
    pub step: f64,
}

#[derive(Debug, Serialize)]
pub struct ProjectGridOutput {
    pub dist_sq: f64,
    pub point: Vec<f64>,
    pub members: usize,
}

/// Smallest squared Hellinger distance from `target` to grid points inside the belief.
pub fn project_grid(input: &ProjectGridInput) -> Result<ProjectGridOutput> {
    let target = Dist::new(input.target.clone())?;
    let belief = input.belief.build(target.len())?;
    let steps = steps_for(input.step)?;
    let mut out = ProjectGridOutput { dist_sq: f64::INFINITY, point: Vec::new(), members: 0 };
    for p in simplex_grid(target.len(), steps) {
        if !belief.contains_tol(&p, MEMBER_TOL) {
            continue;
        }
        out.members += 1;
        let d = hellinger_sq(&target, &Dist::new(p.clone())?)?;
        if d < out.dist_sq {
            out.dist_sq = d;
            out.point = p;
        }
    }
    if out.members == 0 {
        return Err(Error::EmptyBelief("no grid point lies in the belief; refine the step".into()));
    }
    Ok(out)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajMcInput {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    /// One distribution per cell, in cell-index order.
    pub cells: Vec<Vec<f64>>,
    /// One action distribution per `(h, s)` row.
    pub policy: Vec<Vec<f64>>,
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct TrajMcRow {
    pub trajectory: String,
    pub exact: f64,
    pub empirical: f64,
    /// `(empirical - exact) / sigma`, zero when `sigma` vanishes.
    pub z: f64,
}

/// Compares rollout frequencies with the product-form trajectory distribution.
pub fn traj_mc(input: &TrajMcInput) -> Result<Vec<TrajMcRow>> {
    let dims = Dims::new(input.horizon, input.states, input.actions)?;
    let cells = input.cells.iter().map(|c| Dist::new(c.clone())).collect::<Result<Vec<_>>>()?;
    let sel = CellSelection::new(dims, cells)?;
    let rows = input.policy.iter().map(|r| Dist::new(r.clone())).collect::<Result<Vec<_>>>()?;
    let pi = Policy::new(dims, rows)?;
    if input.samples == 0 {
        return Err(Error::InvalidParameter("samples must be positive".into()));
    }
    let exact = traj_dist(&sel, &pi)?;
    let mut counts = vec![0usize; dims.n_trajectories()];
    let mut rng = ChaCha8Rng::seed_from_u64(input.seed);
    for _ in 0..input.samples {
        counts[rollout(&sel, &pi, &mut rng)?.index(dims)] += 1;
    }
    let n = input.samples as f64;
    Ok(exact
        .probs
        .iter()
        .zip(&counts)
        .enumerate()
        .filter(|(_, (p, c))| **p > 0.0 || **c > 0)
        .map(|(k, (&p, &c))| {
            let emp = c as f64 / n;
            let sigma = (p * (1.0 - p) / n).sqrt();
            TrajMcRow { trajectory: Trajectory::from_index(dims, k).label(), exact: p, empirical: emp, z: if sigma > 0.0 { (emp - p) / sigma } else { 0.0 } }
        })
        .collect())
}

/// Runs the named oracle on a JSON input.
pub fn run(name: &str, input: &str) -> Result<Value> {
    let parse = |e: serde_json::Error| Error::Config(format!("{name} input: {e}"));
    let to_value = |v: std::result::Result<Value, serde_json::Error>| v.map_err(|e| Error::Io(e.to_string()));
    match name {
        "dec-grid" => to_value(serde_json::to_value(dec_grid(&serde_json::from_str(input).map_err(parse)?)?)),
        "project-grid" => to_value(serde_json::to_value(project_grid(&serde_json::from_str(input).map_err(parse)?)?)),
        "traj-mc" => to_value(serde_json::to_value(traj_mc(&serde_json::from_str(input).map_err(parse)?)?)),
        other => Err(Error::Config(format!("unknown oracle {other}; expected one of {}", NAMES.join(", ")))),
    }
}
