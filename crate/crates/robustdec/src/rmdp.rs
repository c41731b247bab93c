//! Tabular robust MDPs with reward bits.
//!
//! Layout: the initial cell `(0, s0, a0)` and the mid cells `(h, s, a)` for
//! `1 <= h < H` emit `(r_h, s_{h+1})`, indexed `r * S + s'`. Terminal cells
//! `(H, s, a)` emit `r_H` only. With `H = 0` the initial cell is terminal.
//! Policies have one row per `(h, s)` with `1 <= h <= H`.

use crate::error::{check_dim, Error, Result};
use crate::prob::{hellinger_project, Dist, ImpreciseBelief};
use rand::Rng;
use serde::{Deserialize, Serialize};

const VALUE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
}

impl Dims {
    pub fn new(horizon: usize, states: usize, actions: usize) -> Result<Self> {
        if states == 0 || actions == 0 {
            return Err(Error::InvalidParameter("need at least one state and one action".into()));
        }
        Ok(Self { horizon, states, actions })
    }

    pub fn n_cells(&self) -> usize {
        1 + self.horizon * self.states * self.actions
    }

    /// Index of cell `(h, s, a)`; `h = 0` is the initial cell regardless of `s, a`.
    pub fn cell(&self, h: usize, s: usize, a: usize) -> usize {
        if h == 0 {
            0
        } else {
            1 + ((h - 1) * self.states + s) * self.actions + a
        }
    }

    /// `(h, s, a)` of a cell index.
    pub fn cell_coords(&self, i: usize) -> (usize, usize, usize) {
        if i == 0 {
            return (0, 0, 0);
        }
        let k = i - 1;
        (k / (self.states * self.actions) + 1, (k / self.actions) % self.states, k % self.actions)
    }

    pub fn cell_dim(&self, h: usize) -> usize {
        if h < self.horizon {
            2 * self.states
        } else {
            2
        }
    }

    pub fn n_policy_rows(&self) -> usize {
        self.horizon * self.states
    }

    pub fn policy_row(&self, h: usize, s: usize) -> usize {
        (h - 1) * self.states + s
    }

    /// Number of trajectories: `2 (2 S A)^H`.
    pub fn n_trajectories(&self) -> usize {
        2 * (2 * self.states * self.actions).pow(self.horizon as u32)
    }

    /// Splits a cell outcome index into `(reward bit, next state)`; terminal outcomes have no next state.
    pub fn split(&self, h: usize, o: usize) -> (u8, Option<usize>) {
        if h < self.horizon {
            ((o / self.states) as u8, Some(o % self.states))
        } else {
            (o as u8, None)
        }
    }

    /// Per-outcome value `r + w(s')` for a cell at layer `h` (`w` ignored at the terminal layer).
    pub fn reward_plus(&self, h: usize, w: &[f64]) -> Vec<f64> {
        (0..self.cell_dim(h))
            .map(|o| match self.split(h, o) {
                (r, Some(s)) => r as f64 + w[s],
                (r, None) => r as f64,
            })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct RmdpKernel {
    dims: Dims,
    cells: Vec<ImpreciseBelief>,
}

impl RmdpKernel {
    pub fn new(dims: Dims, cells: Vec<ImpreciseBelief>) -> Result<Self> {
        check_dim(dims.n_cells(), cells.len())?;
        for (i, c) in cells.iter().enumerate() {
            check_dim(dims.cell_dim(dims.cell_coords(i).0), c.dim())?;
        }
        Ok(Self { dims, cells })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn cell(&self, h: usize, s: usize, a: usize) -> &ImpreciseBelief {
        &self.cells[self.dims.cell(h, s, a)]
    }

    pub fn cells(&self) -> &[ImpreciseBelief] {
        &self.cells
    }
}

/// One distribution per cell: a selection of a kernel, or an induced MDP.
#[derive(Clone, Debug, PartialEq)]
pub struct CellSelection {
    pub dims: Dims,
    pub cells: Vec<Dist>,
}

impl CellSelection {
    pub fn new(dims: Dims, cells: Vec<Dist>) -> Result<Self> {
        check_dim(dims.n_cells(), cells.len())?;
        for (i, c) in cells.iter().enumerate() {
            check_dim(dims.cell_dim(dims.cell_coords(i).0), c.len())?;
        }
        Ok(Self { dims, cells })
    }

    pub fn cell(&self, h: usize, s: usize, a: usize) -> &Dist {
        &self.cells[self.dims.cell(h, s, a)]
    }

    /// Cells that are not members of the corresponding kernel cell.
    pub fn violations(&self, kernel: &RmdpKernel) -> Vec<usize> {
        (0..self.cells.len()).filter(|&i| !kernel.cells[i].contains(&self.cells[i])).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Policy {
    dims: Dims,
    rows: Vec<Dist>,
}

impl Policy {
    pub fn new(dims: Dims, rows: Vec<Dist>) -> Result<Self> {
        check_dim(dims.n_policy_rows(), rows.len())?;
        for r in &rows {
            check_dim(dims.actions, r.len())?;
        }
        Ok(Self { dims, rows })
    }

    pub fn deterministic(dims: Dims, actions: &[usize]) -> Result<Self> {
        check_dim(dims.n_policy_rows(), actions.len())?;
        if actions.iter().any(|&a| a >= dims.actions) {
            return Err(Error::InvalidParameter("action index out of range".into()));
        }
        Ok(Self { dims, rows: actions.iter().map(|&a| Dist::point(dims.actions, a)).collect() })
    }

    /// All deterministic Markov policies, in lexicographic order of their action rows.
    pub fn enumerate_deterministic(dims: Dims) -> Vec<Policy> {
        let n = dims.n_policy_rows();
        let total = dims.actions.pow(n as u32);
        (0..total)
            .map(|mut k| {
                let mut acts = vec![0; n];
                for slot in acts.iter_mut().rev() {
                    *slot = k % dims.actions;
                    k /= dims.actions;
                }
                Policy::deterministic(dims, &acts).expect("enumerated actions are in range")
            })
            .collect()
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn row(&self, h: usize, s: usize) -> &Dist {
        &self.rows[self.dims.policy_row(h, s)]
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.row(h, s).probs()[a]
    }

    /// Compact label like `01|10` (layers separated by `|`); mixed rows print as `*`.
    pub fn label(&self) -> String {
        (1..=self.dims.horizon)
            .map(|h| {
                (0..self.dims.states)
                    .map(|s| {
                        let row = self.row(h, s).probs();
                        match row.iter().position(|p| *p == 1.0) {
                            Some(a) => a.to_string(),
                            None => "*".to_string(),
                        }
                    })
                    .collect::<String>()
            })
            .collect::<Vec<_>>()
            .join("|")
    }
}

/// `r_0`, then `(s_h, a_h, r_h)` for `h = 1..=H`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Trajectory {
    pub r0: u8,
    pub steps: Vec<(usize, usize, u8)>,
}

impl Trajectory {
    pub fn total_reward(&self) -> f64 {
        self.r0 as f64 + self.steps.iter().map(|s| s.2 as f64).sum::<f64>()
    }

    pub fn label(&self) -> String {
        let mut out = format!("r0={}", self.r0);
        for (h, (s, a, r)) in self.steps.iter().enumerate() {
            out.push_str(&format!(";s{}={s},a{}={a},r{}={r}", h + 1, h + 1, h + 1));
        }
        out
    }

    /// Position in the canonical enumeration (mixed radix over `r0, s1, a1, r1, ...`).
    pub fn index(&self, dims: Dims) -> usize {
        let mut k = self.r0 as usize;
        for &(s, a, r) in &self.steps {
            k = ((k * dims.states + s) * dims.actions + a) * 2 + r as usize;
        }
        k
    }

    pub fn from_index(dims: Dims, mut k: usize) -> Self {
        let mut steps = vec![(0, 0, 0u8); dims.horizon];
        for slot in steps.iter_mut().rev() {
            let r = (k % 2) as u8;
            k /= 2;
            let a = k % dims.actions;
            k /= dims.actions;
            let s = k % dims.states;
            k /= dims.states;
            *slot = (s, a, r);
        }
        Self { r0: k as u8, steps }
    }

    /// The cell outcome emitted at layer `h`.
    pub fn outcome_at(&self, dims: Dims, h: usize) -> usize {
        let r = if h == 0 { self.r0 } else { self.steps[h - 1].2 } as usize;
        if h < dims.horizon {
            r * dims.states + self.steps[h].0
        } else {
            r
        }
    }

    /// `(s_h, a_h)` for `h >= 1`; `(0, 0)` at the initial cell.
    pub fn state_action(&self, h: usize) -> (usize, usize) {
        if h == 0 {
            (0, 0)
        } else {
            (self.steps[h - 1].0, self.steps[h - 1].1)
        }
    }
}

/// Exact distribution over all trajectories, in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajDist {
    pub dims: Dims,
    pub probs: Vec<f64>,
}

impl TrajDist {
    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn expected_reward(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| p * Trajectory::from_index(self.dims, k).total_reward()).sum()
    }
}

/// Product-form trajectory distribution of `pi` against a fixed selection.
pub fn traj_dist(sel: &CellSelection, pi: &Policy) -> Result<TrajDist> {
    check_dims(sel.dims, pi.dims)?;
    let dims = sel.dims;
    let probs = (0..dims.n_trajectories())
        .map(|k| {
            let tr = Trajectory::from_index(dims, k);
            let mut p = sel.cells[0].probs()[tr.outcome_at(dims, 0)];
            for h in 1..=dims.horizon {
                let (s, a) = tr.state_action(h);
                p *= pi.prob(h, s, a) * sel.cell(h, s, a).probs()[tr.outcome_at(dims, h)];
            }
            p
        })
        .collect();
    Ok(TrajDist { dims, probs })
}

fn check_dims(a: Dims, b: Dims) -> Result<()> {
    if a != b {
        return Err(Error::Dimension { expected: a.n_cells(), got: b.n_cells() });
    }
    Ok(())
}

/// Samples one episode of `pi` against `sel`.
pub fn rollout<R: Rng + ?Sized>(sel: &CellSelection, pi: &Policy, rng: &mut R) -> Result<Trajectory> {
    check_dims(sel.dims, pi.dims)?;
    let dims = sel.dims;
    let o = sel.cells[0].sample_index(rng.random::<f64>());
    let (r0, mut next) = dims.split(0, o);
    let mut steps = Vec::with_capacity(dims.horizon);
    for h in 1..=dims.horizon {
        let s = next.expect("non-terminal layers emit a next state");
        let a = pi.row(h, s).sample_index(rng.random::<f64>());
        let o = sel.cell(h, s, a).sample_index(rng.random::<f64>());
        let (r, n) = dims.split(h, o);
        steps.push((s, a, r));
        next = n;
    }
    Ok(Trajectory { r0, steps })
}

/// Converts a reward in `[0, 1]` to a bit by Bernoulli rounding.
pub fn convert_reward<R: Rng + ?Sized>(r: f64, rng: &mut R) -> u8 {
    u8::from(rng.random::<f64>() < r.clamp(0.0, 1.0))
}

/// `P(s_h = s, a_h = a)` for `h = 1..=H`, as `occ[h - 1][s][a]`.
pub fn occupancy(sel: &CellSelection, pi: &Policy) -> Vec<Vec<Vec<f64>>> {
    let dims = sel.dims;
    let mut out = Vec::with_capacity(dims.horizon);
    let mut state = vec![0.0; dims.states];
    if dims.horizon > 0 {
        for (o, p) in sel.cells[0].probs().iter().enumerate() {
            state[o % dims.states] += p;
        }
    }
    for h in 1..=dims.horizon {
        let layer: Vec<Vec<f64>> = (0..dims.states).map(|s| (0..dims.actions).map(|a| state[s] * pi.prob(h, s, a)).collect()).collect();
        if h < dims.horizon {
            let mut next = vec![0.0; dims.states];
            for s in 0..dims.states {
                for a in 0..dims.actions {
                    for (o, p) in sel.cell(h, s, a).probs().iter().enumerate() {
                        next[o % dims.states] += layer[s][a] * p;
                    }
                }
            }
            state = next;
        }
        out.push(layer);
    }
    out
}

/// Expected total reward of `pi` against `sel`.
pub fn expected_total_reward(sel: &CellSelection, pi: &Policy) -> f64 {
    let dims = sel.dims;
    let occ = occupancy(sel, pi);
    let reward_of = |h: usize, d: &Dist| -> f64 { d.probs().iter().enumerate().map(|(o, p)| p * dims.split(h, o).0 as f64).sum() };
    let mut total = reward_of(0, &sel.cells[0]);
    for h in 1..=dims.horizon {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                total += occ[h - 1][s][a] * reward_of(h, sel.cell(h, s, a));
            }
        }
    }
    total
}

#[derive(Clone, Debug, PartialEq)]
pub struct RobustValues {
    /// `v[h - 1][s]` for `h = 1..=H`.
    pub v: Vec<Vec<f64>>,
    /// Value of the initial cell.
    pub v0: f64,
    /// Robust Q-value per cell index.
    pub q: Vec<f64>,
    pub one_bounded: bool,
}

impl RobustValues {
    /// `V_{h, .}` with `V_{H+1} = 0`.
    pub fn layer(&self, h: usize, states: usize) -> Vec<f64> {
        if h == 0 {
            vec![self.v0]
        } else if h <= self.v.len() {
            self.v[h - 1].clone()
        } else {
            vec![0.0; states]
        }
    }
}

fn robust_q(kernel: &RmdpKernel, h: usize, s: usize, a: usize, next: &[f64]) -> Result<(f64, Dist)> {
    let f = kernel.dims.reward_plus(h, next);
    kernel.cell(h, s, a).worst_case_expectation(&f)
}

fn backward(kernel: &RmdpKernel, mut choose: impl FnMut(usize, usize, &[f64]) -> Vec<f64>) -> Result<RobustValues> {
    let dims = kernel.dims;
    let mut q = vec![0.0; dims.n_cells()];
    let mut v = vec![vec![0.0; dims.states]; dims.horizon];
    let mut next = vec![0.0; dims.states];
    for h in (1..=dims.horizon).rev() {
        for s in 0..dims.states {
            let qs: Vec<f64> = (0..dims.actions).map(|a| robust_q(kernel, h, s, a, &next).map(|x| x.0)).collect::<Result<_>>()?;
            for a in 0..dims.actions {
                q[dims.cell(h, s, a)] = qs[a];
            }
            let w = choose(h, s, &qs);
            v[h - 1][s] = w.iter().zip(&qs).map(|(p, x)| p * x).sum();
        }
        next = v[h - 1].clone();
    }
    let v0 = robust_q(kernel, 0, 0, 0, &next)?.0;
    q[0] = v0;
    let one_bounded = v0 <= 1.0 + VALUE_TOL && q.iter().all(|x| *x <= 1.0 + VALUE_TOL);
    Ok(RobustValues { v, v0, q, one_bounded })
}

/// Robust policy evaluation by downward induction with per-cell worst cases.
pub fn robust_value(kernel: &RmdpKernel, pi: &Policy) -> Result<RobustValues> {
    check_dims(kernel.dims, pi.dims)?;
    backward(kernel, |h, s, _| pi.row(h, s).probs().to_vec())
}

/// Deterministic policy maximizing the robust Q-value at every `(h, s)`; ties go to the lowest action.
pub fn robust_optimal_policy(kernel: &RmdpKernel) -> Result<(Policy, RobustValues)> {
    let dims = kernel.dims;
    let mut acts = vec![0; dims.n_policy_rows()];
    let values = backward(kernel, |h, s, qs| {
        let a = crate::dec::argmax(qs);
        acts[dims.policy_row(h, s)] = a;
        Dist::point(dims.actions, a).into_vec()
    })?;
    Ok((Policy::deterministic(dims, &acts)?, values))
}

/// Recommended action, next-state bonus `f` (empty at the terminal layer) and threshold `c` for one `(h, s)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParhalfRow {
    pub action: usize,
    pub f: Vec<f64>,
    pub c: f64,
}

/// A partial-halfspace hypothesis: rows for the initial cell, then `(h, s)` for `h = 1..=H`.
#[derive(Clone, Debug, PartialEq)]
pub struct ParhalfHypothesis {
    pub dims: Dims,
    pub rows: Vec<ParhalfRow>,
}

impl ParhalfHypothesis {
    pub fn new(dims: Dims, rows: Vec<ParhalfRow>) -> Result<Self> {
        check_dim(1 + dims.n_policy_rows(), rows.len())?;
        for (i, row) in rows.iter().enumerate() {
            let h = if i == 0 { 0 } else { (i - 1) / dims.states + 1 };
            let want = if h < dims.horizon { dims.states } else { 0 };
            check_dim(want, row.f.len())?;
            if row.action >= dims.actions || !(0.0..=1.0).contains(&row.c) || row.f.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidParameter(format!("hypothesis row {i} out of range")));
            }
        }
        Ok(Self { dims, rows })
    }

    pub fn row(&self, h: usize, s: usize) -> &ParhalfRow {
        if h == 0 {
            &self.rows[0]
        } else {
            &self.rows[1 + self.dims.policy_row(h, s)]
        }
    }
}

/// Full simplex off the recommended action, halfspace `E[r + f(s')] >= c` on it.
pub fn parhalf_to_kernel(p: &ParhalfHypothesis) -> Result<RmdpKernel> {
    let dims = p.dims;
    let cells = (0..dims.n_cells())
        .map(|i| {
            let (h, s, a) = dims.cell_coords(i);
            let row = p.row(h, s);
            if h > 0 && a != row.action {
                ImpreciseBelief::full_simplex(dims.cell_dim(h))
            } else {
                ImpreciseBelief::halfspace(dims.reward_plus(h, &row.f), row.c)
                    .map_err(|e| Error::InvalidParameter(format!("cell ({h},{s},{a}): {e}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    RmdpKernel::new(dims, cells)
}

/// Partial-halfspace surrogate built from the robust-optimal policy and its values.
pub fn surrogate(kernel: &RmdpKernel) -> Result<ParhalfHypothesis> {
    let dims = kernel.dims;
    let (pi, vals) = robust_optimal_policy(kernel)?;
    if !vals.one_bounded {
        return Err(Error::Precondition("kernel is not 1-bounded under its robust-optimal policy".into()));
    }
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let mut rows = vec![ParhalfRow {
        action: 0,
        f: if dims.horizon > 0 { vals.layer(1, dims.states).into_iter().map(clamp).collect() } else { Vec::new() },
        c: clamp(vals.v0),
    }];
    for h in 1..=dims.horizon {
        for s in 0..dims.states {
            let f = if h < dims.horizon { vals.layer(h + 1, dims.states).into_iter().map(clamp).collect() } else { Vec::new() };
            rows.push(ParhalfRow { action: crate::dec::argmax(pi.row(h, s).probs()), f, c: clamp(vals.v[h - 1][s]) });
        }
    }
    let hyp = ParhalfHypothesis::new(dims, rows)?;
    let sur = parhalf_to_kernel(&hyp)?;
    let sur_vals = robust_value(&sur, &pi)?;
    let agree = (sur_vals.v0 - vals.v0).abs() <= 1e-6
        && sur_vals.v.iter().flatten().zip(vals.v.iter().flatten()).all(|(a, b)| (a - b).abs() <= 1e-6);
    let (_, sur_best) = robust_optimal_policy(&sur)?;
    if !agree || (sur_best.v0 - vals.v0).abs() > 1e-6 {
        return Err(Error::Invariant(format!("surrogate values disagree: {} vs {}", sur_vals.v0, vals.v0)));
    }
    Ok(hyp)
}

/// Draws `draws` members of every recommended kernel cell and returns the cells
/// (index, sample) whose draw falls outside the surrogate cell.
pub fn subset_violations<R: Rng + ?Sized>(kernel: &RmdpKernel, hyp: &ParhalfHypothesis, draws: usize, rng: &mut R) -> Result<Vec<usize>> {
    let sur = parhalf_to_kernel(hyp)?;
    let dims = kernel.dims;
    let mut bad = Vec::new();
    for i in 0..dims.n_cells() {
        let (h, s, a) = dims.cell_coords(i);
        if h > 0 && a != hyp.row(h, s).action {
            continue;
        }
        for _ in 0..draws {
            let mu = kernel.cells[i].sample_member(rng)?;
            if !sur.cells[i].contains(&mu) {
                bad.push(i);
                break;
            }
        }
    }
    Ok(bad)
}

/// 1-boundedness check on the robust-optimal policy and `n_random` random Markov policies.
pub fn check_one_bounded<R: Rng + ?Sized>(kernel: &RmdpKernel, n_random: usize, rng: &mut R) -> Result<bool> {
    let dims = kernel.dims;
    if !robust_optimal_policy(kernel)?.1.one_bounded {
        return Ok(false);
    }
    for _ in 0..n_random {
        let rows = (0..dims.n_policy_rows()).map(|_| Dist::new(crate::prob::dirichlet(rng, dims.actions))).collect::<Result<Vec<_>>>()?;
        if !robust_value(kernel, &Policy::new(dims, rows)?)?.one_bounded {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Checks that every partial trajectory ending in a state plays actions with the policy's probabilities.
pub fn check_coherence(mbar: &TrajDist, pi: &Policy, tol: f64) -> Result<()> {
    let dims = mbar.dims;
    check_dims(dims, pi.dims)?;
    // Prefix mass up to s_h and up to (s_h, a_h), keyed by prefix index.
    for h in 1..=dims.horizon {
        let tail = (2 * dims.states * dims.actions).pow((dims.horizon - h) as u32) * 2;
        let per_state = dims.actions * tail;
        let n_state_prefixes = mbar.probs.len() / per_state;
        for k in 0..n_state_prefixes {
            let block = &mbar.probs[k * per_state..(k + 1) * per_state];
            let mass: f64 = block.iter().sum();
            if mass <= tol {
                continue;
            }
            let s = k % dims.states;
            for a in 0..dims.actions {
                let pa: f64 = block[a * tail..(a + 1) * tail].iter().sum::<f64>() / mass;
                if (pa - pi.prob(h, s, a)).abs() > tol.max(1e-9) {
                    return Err(Error::Coherence(format!("layer {h}, state {s}, action {a}: {pa} vs {}", pi.prob(h, s, a))));
                }
            }
        }
    }
    Ok(())
}

/// Expected sum over layers of `D^2` from the estimate's next-step conditional at
/// `(h, s_h, a_h)` to the kernel cell. Zero-probability conditionals contribute 0.
pub fn modified_loss(mbar: &TrajDist, kernel: &RmdpKernel, pi: &Policy) -> Result<f64> {
    let dims = mbar.dims;
    check_dims(dims, kernel.dims)?;
    check_coherence(mbar, pi, 1e-9)?;
    // joint[cell][outcome] = P(s_h = s, a_h = a, next outcome).
    let mut joint: Vec<Vec<f64>> = (0..dims.n_cells()).map(|i| vec![0.0; dims.cell_dim(dims.cell_coords(i).0)]).collect();
    for (k, p) in mbar.probs.iter().enumerate() {
        if *p == 0.0 {
            continue;
        }
        let tr = Trajectory::from_index(dims, k);
        for h in 0..=dims.horizon {
            let (s, a) = tr.state_action(h);
            joint[dims.cell(h, s, a)][tr.outcome_at(dims, h)] += p;
        }
    }
    let mut total = 0.0;
    for (i, row) in joint.iter().enumerate() {
        let mass: f64 = row.iter().sum();
        if mass <= 0.0 {
            continue;
        }
        let cond = Dist::from_weights(row)?;
        total += mass * hellinger_project(&cond, &kernel.cells[i])?.dist_sq;
    }
    Ok(total)
}

/// [`modified_loss`] for a product-form estimate, via occupancies: `sum P(h,s,a) D^2(cell -> kernel cell)`.
pub fn modified_loss_markov(sel: &CellSelection, kernel: &RmdpKernel, pi: &Policy) -> Result<f64> {
    check_dims(sel.dims, kernel.dims)?;
    let dims = sel.dims;
    let occ = occupancy(sel, pi);
    let mut total = hellinger_project(&sel.cells[0], &kernel.cells[0])?.dist_sq;
    for h in 1..=dims.horizon {
        for s in 0..dims.states {
            for a in 0..dims.actions {
                let w = occ[h - 1][s][a];
                if w > 0.0 {
                    total += w * hellinger_project(sel.cell(h, s, a), kernel.cell(h, s, a))?.dist_sq;
                }
            }
        }
    }
    Ok(total)
}

/// Rounds `f` up towards 1 on an `eps_s` grid and `c` down on an `eps_01` grid.
pub fn round_halfspace(f: &[f64], c: f64, eps_s: f64, eps_01: f64) -> Result<(Vec<f64>, f64)> {
    if !(eps_s > 0.0 && eps_01 > 0.0) {
        return Err(Error::InvalidParameter("grid steps must be positive".into()));
    }
    let snap = |x: f64| {
        let r = x.round();
        if (x - r).abs() < 1e-9 { r } else { x.floor() }
    };
    let f_up = f.iter().map(|x| 1.0 - snap((1.0 - x) / eps_s) * eps_s).collect();
    Ok((f_up, snap(c / eps_01) * eps_01))
}

/// How nature picks a selection each episode.
#[derive(Clone, Debug, PartialEq)]
pub enum RmdpEnvMode {
    /// The worst-case member of every cell against the robust-optimal values, every episode.
    WorstCaseStationary,
    /// A uniformly drawn extreme point of every cell, redrawn each episode.
    RandomVertex,
    Fixed(CellSelection),
}

/// Episodic environment consistent with a kernel; actions index a fixed list of policies.
#[derive(Clone, Debug)]
pub struct RmdpEnv {
    kernel: RmdpKernel,
    mode: RmdpEnvMode,
    policies: Vec<Policy>,
    stationary: Option<CellSelection>,
    current: Option<CellSelection>,
    violation: bool,
}

/// Per-cell minimizers of `E[r + V*_{h+1}]` under the robust-optimal values.
pub fn worst_case_selection(kernel: &RmdpKernel) -> Result<CellSelection> {
    let dims = kernel.dims;
    let (_, vals) = robust_optimal_policy(kernel)?;
    let cells = (0..dims.n_cells())
        .map(|i| {
            let (h, s, a) = dims.cell_coords(i);
            robust_q(kernel, h, s, a, &vals.layer(h + 1, dims.states)).map(|x| x.1)
        })
        .collect::<Result<Vec<_>>>()?;
    CellSelection::new(dims, cells)
}

impl RmdpEnv {
    pub fn new(kernel: RmdpKernel, mode: RmdpEnvMode, policies: Vec<Policy>) -> Result<Self> {
        if policies.iter().any(|p| p.dims != kernel.dims) {
            return Err(Error::InvalidParameter("policy dimensions differ from the kernel's".into()));
        }
        let stationary = match &mode {
            RmdpEnvMode::WorstCaseStationary => Some(worst_case_selection(&kernel)?),
            RmdpEnvMode::Fixed(sel) => {
                check_dims(kernel.dims, sel.dims)?;
                Some(sel.clone())
            }
            RmdpEnvMode::RandomVertex => None,
        };
        Ok(Self { kernel, mode, policies, stationary, current: None, violation: false })
    }

    pub fn kernel(&self) -> &RmdpKernel {
        &self.kernel
    }

    pub fn current(&self) -> Option<&CellSelection> {
        self.current.as_ref()
    }
}

impl crate::envs::Environment for RmdpEnv {
    type Obs = Trajectory;

    fn realize(&mut self, _t: usize, _public: Option<&[Dist]>, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        let sel = match (&self.mode, &self.stationary) {
            (_, Some(sel)) => sel.clone(),
            (RmdpEnvMode::RandomVertex, None) => {
                let cells = self
                    .kernel
                    .cells
                    .iter()
                    .map(|c| match c.vertices() {
                        Some(vs) => Dist::from_weights(&vs[rng.random_range(0..vs.len())]),
                        None => c.sample_member(rng),
                    })
                    .collect::<Result<Vec<_>>>()?;
                CellSelection::new(self.kernel.dims, cells)?
            }
            _ => unreachable!("stationary modes carry a selection"),
        };
        self.violation = !sel.violations(&self.kernel).is_empty();
        let values = self.policies.iter().map(|pi| expected_total_reward(&sel, pi)).collect();
        self.current = Some(sel);
        Ok(values)
    }

    fn respond(&mut self, action: usize, rng: &mut dyn rand::RngCore) -> Result<crate::envs::Response<Trajectory>> {
        let sel = self.current.as_ref().ok_or_else(|| Error::Precondition("respond called before realize".into()))?;
        let pi = self.policies.get(action).ok_or_else(|| Error::InvalidParameter(format!("no policy {action}")))?;
        let tr = rollout(sel, pi, rng)?;
        Ok(crate::envs::Response { reward: tr.total_reward(), label: tr.label(), obs: tr, violation: self.violation })
    }
}
