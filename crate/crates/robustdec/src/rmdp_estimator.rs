//! Bettor-market estimator for partial-halfspace RMDPs.
//!
//! Fragment bettors back a rounded halfspace at one cell, calibration bettors
//! bet on how often a fragment's state is reached, uniform bettors keep every
//! induced cell interior, and a single pessimism bettor bets against the
//! estimated total reward. For a fixed policy the induced MDP is built by
//! downward induction: each cell minimizes the weighted sum of the bettors'
//! convex objectives, whose calibration and pessimism parts are linear in the
//! cell and are folded into two backward recursions.

use crate::e2d::{ObserveInfo, OnlineEstimator, RoundEstimate};
use crate::error::{Error, Result};
use crate::prob::{hellinger_project, minimize_mixture, Dist, ImpreciseBelief, MixTerm};
use crate::rmdp::{modified_loss_markov, traj_dist, CellSelection, Dims, Policy, RmdpKernel, TrajDist, Trajectory};
use std::collections::HashMap;
use std::sync::Arc;

/// Upper limit on the number of bettors a market may hold.
pub const MAX_BETTORS: usize = 2_000_000;
const BET_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BettorKind {
    Fragment,
    Calibration,
    Uniform,
    Pessimism,
}

/// A bettor and its cell; `hyp` indexes [`BettorIndex::hypothesis`] (unused for pessimism).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Bettor {
    pub kind: BettorKind,
    pub h: usize,
    pub s: usize,
    pub a: usize,
    pub hyp: usize,
}

/// A rounded halfspace `{E[r + f(s')] >= c}` (`f` empty at the terminal layer) or a uniform singleton.
#[derive(Clone, Debug)]
pub struct Hypothesis {
    pub f: Vec<f64>,
    pub c: f64,
    pub uniform: bool,
    pub belief: ImpreciseBelief,
}

#[derive(Clone, Debug)]
pub struct BettorIndex {
    dims: Dims,
    eps_s: f64,
    eps_01: f64,
    hyps: Vec<Hypothesis>,
    n_mid: usize,
    n_end: usize,
    bettors: Vec<Bettor>,
    n_frag: usize,
    n_cal: usize,
    n_unif: usize,
    /// Fragment and uniform bettors per cell index.
    cell_bettors: Vec<Vec<usize>>,
    /// Calibration bettors per cell index.
    cal_bettors: Vec<Vec<usize>>,
    pessimism: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmdpMarketState {
    pub weights: Vec<f64>,
    pub round: usize,
    pub eps_prime: f64,
    pub eps_pess: f64,
}

fn grid_len(eps: f64) -> usize {
    (1.0 / eps + 1e-9).floor() as usize + 1
}

/// `|H'_mid| = (floor(1/eps_s) + 1)^S (floor(1/eps_01) + 1)`.
pub fn mid_count(states: usize, eps_s: f64, eps_01: f64) -> usize {
    grid_len(eps_s).saturating_pow(states as u32).saturating_mul(grid_len(eps_01))
}

/// `|H'_end| = floor(1/eps_01) + 1`.
pub fn end_count(eps_01: f64) -> usize {
    grid_len(eps_01)
}

/// `(fragment, calibration, uniform)` counts without enumerating.
pub fn bettor_counts(dims: Dims, eps_s: f64, eps_01: f64) -> (usize, usize, usize) {
    let mid = mid_count(dims.states, eps_s, eps_01);
    let end = end_count(eps_01);
    let sa = dims.states * dims.actions;
    if dims.horizon == 0 {
        return (end, 0, 1);
    }
    let mids = (dims.horizon - 1).saturating_mul(sa).saturating_mul(mid);
    let ends = sa * end;
    (mid.saturating_add(mids).saturating_add(ends), mids.saturating_add(ends), dims.n_cells())
}

/// `sqrt(1 / (T (H + 1)^2))`.
pub fn eps_pess(rounds: usize, horizon: usize) -> f64 {
    (1.0 / (rounds.max(1) as f64 * ((horizon + 1) as f64).powi(2))).sqrt()
}

impl BettorIndex {
    /// Enumerates all bettors and returns the prior market for `rounds` episodes.
    pub fn build(dims: Dims, eps_s: f64, eps_01: f64, eps_prime: f64, rounds: usize) -> Result<(Self, RmdpMarketState)> {
        if !(eps_s > 0.0 && eps_01 > 0.0) {
            return Err(Error::InvalidParameter("grid steps must be positive".into()));
        }
        if !(eps_prime > 0.0 && eps_prime <= 0.01) {
            return Err(Error::InvalidParameter(format!("eps_prime {eps_prime} outside (0, 0.01]")));
        }
        let (nf, nc, nu) = bettor_counts(dims, eps_s, eps_01);
        let total = nf.saturating_add(nc).saturating_add(nu).saturating_add(1);
        if total > MAX_BETTORS {
            return Err(Error::Capacity(format!("{nf} fragment + {nc} calibration + {nu} uniform bettors exceed {MAX_BETTORS}")));
        }
        let mid_dims = 2 * dims.states;
        let mut hyps = Vec::new();
        let fs = grid_len(eps_s);
        let cs = grid_len(eps_01);
        let n_mid = if dims.horizon > 0 { fs.pow(dims.states as u32) * cs } else { 0 };
        for k in 0..n_mid {
            let mut rest = k / cs;
            let c = (k % cs) as f64 * eps_01;
            let mut f = vec![0.0; dims.states];
            for slot in f.iter_mut().rev() {
                *slot = (1.0 - (rest % fs) as f64 * eps_s).clamp(0.0, 1.0);
                rest /= fs;
            }
            let g = (0..mid_dims).map(|o| (o / dims.states) as f64 + f[o % dims.states]).collect();
            hyps.push(Hypothesis { belief: ImpreciseBelief::halfspace(g, c.min(1.0))?, f, c: c.min(1.0), uniform: false });
        }
        for j in 0..cs {
            let c = (j as f64 * eps_01).min(1.0);
            hyps.push(Hypothesis { f: Vec::new(), c, uniform: false, belief: ImpreciseBelief::halfspace(vec![0.0, 1.0], c)? });
        }
        let n_end = cs;
        let unif_mid = hyps.len();
        hyps.push(Hypothesis { f: Vec::new(), c: 0.0, uniform: true, belief: ImpreciseBelief::singleton(Dist::uniform(mid_dims)) });
        let unif_end = hyps.len();
        hyps.push(Hypothesis { f: Vec::new(), c: 0.0, uniform: true, belief: ImpreciseBelief::singleton(Dist::uniform(2)) });

        let layer_hyps = |h: usize| if h < dims.horizon { 0..n_mid } else { n_mid..n_mid + n_end };
        let mut bettors = Vec::with_capacity(total);
        let mut cell_bettors = vec![Vec::new(); dims.n_cells()];
        let mut cal_bettors = vec![Vec::new(); dims.n_cells()];
        for i in 0..dims.n_cells() {
            let (h, s, a) = dims.cell_coords(i);
            for hyp in layer_hyps(h) {
                cell_bettors[i].push(bettors.len());
                bettors.push(Bettor { kind: BettorKind::Fragment, h, s, a, hyp });
            }
        }
        for i in 1..dims.n_cells() {
            let (h, s, a) = dims.cell_coords(i);
            for hyp in layer_hyps(h) {
                cal_bettors[i].push(bettors.len());
                bettors.push(Bettor { kind: BettorKind::Calibration, h, s, a, hyp });
            }
        }
        for (i, list) in cell_bettors.iter_mut().enumerate() {
            let (h, s, a) = dims.cell_coords(i);
            list.push(bettors.len());
            bettors.push(Bettor { kind: BettorKind::Uniform, h, s, a, hyp: if h < dims.horizon { unif_mid } else { unif_end } });
        }
        let pessimism = bettors.len();
        bettors.push(Bettor { kind: BettorKind::Pessimism, h: 0, s: 0, a: 0, hyp: usize::MAX });
        debug_assert_eq!(bettors.len(), total);

        let frag_cal = 1.0 / (2.0 * (nf + nc) as f64);
        let weights = bettors
            .iter()
            .map(|b| match b.kind {
                BettorKind::Fragment | BettorKind::Calibration => frag_cal,
                BettorKind::Uniform => eps_prime / nu as f64,
                BettorKind::Pessimism => 0.5 - eps_prime,
            })
            .collect();
        let index = Self { dims, eps_s, eps_01, hyps, n_mid, n_end, bettors, n_frag: nf, n_cal: nc, n_unif: nu, cell_bettors, cal_bettors, pessimism };
        let state = RmdpMarketState { weights, round: 0, eps_prime, eps_pess: eps_pess(rounds, dims.horizon) };
        Ok((index, state))
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn grid(&self) -> (f64, f64) {
        (self.eps_s, self.eps_01)
    }

    pub fn bettors(&self) -> &[Bettor] {
        &self.bettors
    }

    pub fn hypothesis(&self, i: usize) -> &Hypothesis {
        &self.hyps[i]
    }

    /// `(|H'_mid|, |H'_end|)`.
    pub fn hypothesis_counts(&self) -> (usize, usize) {
        (self.n_mid, self.n_end)
    }

    /// `(fragment, calibration, uniform)`.
    pub fn counts(&self) -> (usize, usize, usize) {
        (self.n_frag, self.n_cal, self.n_unif)
    }

    pub fn pessimism(&self) -> usize {
        self.pessimism
    }

    fn belief(&self, b: usize) -> &ImpreciseBelief {
        &self.hyps[self.bettors[b].hyp].belief
    }
}

/// One layer of an induced MDP for a fixed policy suffix.
#[derive(Clone, Debug)]
struct Layer {
    /// Cells by `s * A + a` (a single cell at `h = 0`).
    cells: Vec<Dist>,
    /// Expected reward-to-go from the cell, including its own reward.
    q: Vec<f64>,
    /// Calibration potential carried by the cell plus its own calibration mass.
    u: Vec<f64>,
}

/// Per-cell distributions of `M_{t, pi}` plus reward-to-go values.
#[derive(Clone, Debug, PartialEq)]
pub struct InducedMdp {
    pub sel: CellSelection,
    /// Expected reward-to-go per cell index, including the cell's reward.
    pub q: Vec<f64>,
}

impl InducedMdp {
    /// Expected total reward of the estimate.
    pub fn value(&self) -> f64 {
        self.q[0]
    }

    pub fn traj_dist(&self, pi: &Policy) -> Result<TrajDist> {
        traj_dist(&self.sel, pi)
    }
}

/// Builds induced MDPs for one frozen market, sharing layers between policies
/// that agree on all deeper rows.
pub struct Inducer<'a> {
    index: &'a BettorIndex,
    state: &'a RmdpMarketState,
    cache: HashMap<(usize, Vec<u64>), Arc<Layer>>,
}

impl<'a> Inducer<'a> {
    pub fn new(index: &'a BettorIndex, state: &'a RmdpMarketState) -> Result<Self> {
        let has_uniform = index.bettors.iter().zip(&state.weights).any(|(b, w)| b.kind == BettorKind::Uniform && *w > 0.0);
        if state.weights.len() != index.bettors.len() || !has_uniform {
            return Err(Error::MarketDegenerate("uniform bettors hold no weight".into()));
        }
        Ok(Self { index, state, cache: HashMap::new() })
    }

    pub fn induce(&mut self, pi: &Policy) -> Result<InducedMdp> {
        let dims = self.index.dims;
        let mut layers: Vec<Arc<Layer>> = Vec::with_capacity(dims.horizon + 1);
        // Continuation values W, U at layer h + 1 as seen from layer h.
        let mut w_next = vec![0.0; dims.states];
        let mut u_next = vec![0.0; dims.states];
        for h in (0..=dims.horizon).rev() {
            let key = (h, suffix_key(pi, h));
            let layer = match self.cache.get(&key) {
                Some(l) => l.clone(),
                None => {
                    let l = Arc::new(self.build_layer(h, &w_next, &u_next)?);
                    self.cache.insert(key, l.clone());
                    l
                }
            };
            if h > 0 {
                for s in 0..dims.states {
                    let row = pi.row(h, s).probs();
                    w_next[s] = (0..dims.actions).map(|a| row[a] * layer.q[s * dims.actions + a]).sum();
                    u_next[s] = (0..dims.actions).map(|a| row[a] * layer.u[s * dims.actions + a]).sum();
                }
            }
            layers.push(layer);
        }
        layers.reverse();
        let mut cells = Vec::with_capacity(dims.n_cells());
        let mut q = Vec::with_capacity(dims.n_cells());
        for layer in &layers {
            cells.extend(layer.cells.iter().cloned());
            q.extend(layer.q.iter().copied());
        }
        Ok(InducedMdp { sel: CellSelection::new(dims, cells)?, q })
    }

    fn build_layer(&self, h: usize, w: &[f64], u: &[f64]) -> Result<Layer> {
        let idx = self.index;
        let dims = idx.dims;
        let zeta = &self.state.weights;
        let pess = zeta[idx.pessimism] * self.state.eps_pess;
        let n = dims.cell_dim(h);
        let linear: Vec<f64> = (0..n)
            .map(|o| match dims.split(h, o) {
                (r, Some(s)) => pess * (r as f64 + w[s]) + u[s],
                (r, None) => pess * r as f64,
            })
            .collect();
        let pairs: Vec<(usize, usize)> = if h == 0 { vec![(0, 0)] } else { (0..dims.states).flat_map(|s| (0..dims.actions).map(move |a| (s, a))).collect() };
        let mut layer = Layer { cells: Vec::new(), q: Vec::new(), u: Vec::new() };
        for (s, a) in pairs {
            let ci = dims.cell(h, s, a);
            let ids: Vec<usize> = idx.cell_bettors[ci].iter().copied().filter(|&b| zeta[b] > 0.0).collect();
            let terms: Vec<MixTerm> = ids.iter().map(|&b| MixTerm { weight: zeta[b], belief: idx.belief(b) }).collect();
            let sol = minimize_mixture(&terms, &linear, None)?;
            let mu = sol.mu;
            if mu.min_prob() <= 0.0 {
                return Err(Error::Invariant(format!("induced cell ({h},{s},{a}) lost full support")));
            }
            let p = mu.probs();
            let q: f64 = (0..n)
                .map(|o| {
                    p[o] * match dims.split(h, o) {
                        (r, Some(s2)) => r as f64 + w[s2],
                        (r, None) => r as f64,
                    }
                })
                .sum();
            let carried: f64 = if h < dims.horizon { (0..n).map(|o| p[o] * u[o % dims.states]).sum() } else { 0.0 };
            let mut own = 0.0;
            for &b in &idx.cal_bettors[ci] {
                if zeta[b] > 0.0 {
                    own += zeta[b] * hellinger_project(&mu, idx.belief(b))?.dist_sq / 4.0;
                }
            }
            layer.cells.push(mu);
            layer.q.push(q);
            layer.u.push(own + carried);
        }
        Ok(layer)
    }
}

fn suffix_key(pi: &Policy, h: usize) -> Vec<u64> {
    let dims = pi.dims();
    (h + 1..=dims.horizon)
        .flat_map(|k| (0..dims.states).flat_map(move |s| (0..dims.actions).map(move |a| (k, s, a))))
        .map(|(k, s, a)| pi.prob(k, s, a).to_bits())
        .collect()
}

/// `M_{t, pi}` for one policy.
pub fn induce_mdp(index: &BettorIndex, state: &RmdpMarketState, pi: &Policy) -> Result<InducedMdp> {
    Inducer::new(index, state)?.induce(pi)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MarketUpdate {
    pub state: RmdpMarketState,
    pub star: f64,
    pub bets: Vec<f64>,
}

/// Probability of `s_{target_h} = target_s` from each cell at layers `<= target_h`, per cell index.
fn reach_from_cells(induced: &InducedMdp, pi: &Policy, target_h: usize, target_s: usize) -> Vec<f64> {
    let dims = induced.sel.dims;
    let mut sigma = vec![0.0; dims.n_cells()];
    let mut rho_next = vec![0.0; dims.states];
    for k in (0..=target_h).rev() {
        let pairs: Vec<(usize, usize)> = if k == 0 { vec![(0, 0)] } else { (0..dims.states).flat_map(|s| (0..dims.actions).map(move |a| (s, a))).collect() };
        for (s, a) in pairs {
            let ci = dims.cell(k, s, a);
            sigma[ci] = if k == target_h {
                f64::from(u8::from(s == target_s))
            } else {
                induced.sel.cells[ci].probs().iter().enumerate().map(|(o, p)| p * rho_next[o % dims.states]).sum()
            };
        }
        if k > 0 {
            for s in 0..dims.states {
                rho_next[s] = (0..dims.actions).map(|a| pi.prob(k, s, a) * sigma[dims.cell(k, s, a)]).sum();
            }
        }
    }
    sigma
}

/// Sum over layers `h < target_h` of the reach-probability increments along `traj`.
fn calibration_increment(induced: &InducedMdp, pi: &Policy, traj: &Trajectory, target_h: usize, target_s: usize) -> f64 {
    let dims = induced.sel.dims;
    let sigma = reach_from_cells(induced, pi, target_h, target_s);
    (0..target_h)
        .map(|h| {
            let (s, a) = traj.state_action(h);
            let (s2, a2) = traj.state_action(h + 1);
            sigma[dims.cell(h, s, a)] - sigma[dims.cell(h + 1, s2, a2)]
        })
        .sum()
}

/// Pessimism bet from the per-layer local bets (`r_h + E[rest]` increments).
pub fn pessimism_bet(induced: &InducedMdp, traj: &Trajectory, eps_pess: f64) -> f64 {
    let dims = induced.sel.dims;
    let q_at = |h: usize| -> f64 {
        if h > dims.horizon {
            0.0
        } else {
            let (s, a) = traj.state_action(h);
            induced.q[dims.cell(h, s, a)]
        }
    };
    let reward = |h: usize| -> f64 { f64::from(if h == 0 { traj.r0 } else { traj.steps[h - 1].2 }) };
    1.0 + (0..=dims.horizon).map(|h| eps_pess * (q_at(h) - (reward(h) + q_at(h + 1)))).sum::<f64>()
}

/// Telescoped pessimism bet `1 + eps (E[sum r] - sum r)`.
pub fn pessimism_bet_closed_form(induced: &InducedMdp, traj: &Trajectory, eps_pess: f64) -> f64 {
    1.0 + eps_pess * (induced.value() - traj.total_reward())
}

/// Telescoped calibration bet `1 + X/4 (P(s_{h_B} = s_B) - 1[s_{h_B} = s_B])`.
pub fn calibration_bet_closed_form(index: &BettorIndex, induced: &InducedMdp, pi: &Policy, traj: &Trajectory, bettor: usize) -> Result<f64> {
    let b = index.bettors[bettor];
    if b.kind != BettorKind::Calibration {
        return Err(Error::InvalidParameter("not a calibration bettor".into()));
    }
    let dims = index.dims;
    let x = pi.prob(b.h, b.s, b.a) * hellinger_project(induced.sel.cell(b.h, b.s, b.a), index.belief(bettor))?.dist_sq;
    let mut occ_state = vec![0.0; dims.states];
    let occ = crate::rmdp::occupancy(&induced.sel, pi);
    for (s, slot) in occ_state.iter_mut().enumerate() {
        *slot = occ[b.h - 1][s].iter().sum();
    }
    let hit = f64::from(u8::from(traj.state_action(b.h).0 == b.s));
    Ok(1.0 + x / 4.0 * (occ_state[b.s] - hit))
}

/// Aggregate bets of every bettor on `traj`, the normalizer `star`, and the new market.
pub fn market_update(index: &BettorIndex, state: &RmdpMarketState, induced: &InducedMdp, pi: &Policy, traj: &Trajectory) -> Result<MarketUpdate> {
    let dims = index.dims;
    if traj.steps.len() != dims.horizon {
        return Err(Error::Dimension { expected: dims.horizon, got: traj.steps.len() });
    }
    let mut bets = vec![1.0; index.bettors.len()];
    // Fragment and uniform bettors at the visited cells.
    for h in 0..=dims.horizon {
        let (s, a) = traj.state_action(h);
        let ci = dims.cell(h, s, a);
        let cell = &induced.sel.cells[ci];
        let o = traj.outcome_at(dims, h);
        for &b in &index.cell_bettors[ci] {
            let proj = hellinger_project(cell, index.belief(b))?;
            bets[b] = (proj.point.probs()[o] / cell.probs()[o]).sqrt() + proj.dist_sq;
        }
    }
    // Calibration bettors, grouped by the state they watch.
    let mut increments: HashMap<(usize, usize), f64> = HashMap::new();
    for i in 1..dims.n_cells() {
        let (h, s, a) = dims.cell_coords(i);
        let pa = pi.prob(h, s, a);
        if index.cal_bettors[i].is_empty() {
            continue;
        }
        let delta = *increments.entry((h, s)).or_insert_with(|| calibration_increment(induced, pi, traj, h, s));
        for &b in &index.cal_bettors[i] {
            let x = if pa > 0.0 { pa * hellinger_project(&induced.sel.cells[i], index.belief(b))?.dist_sq } else { 0.0 };
            let bet = 1.0 + x / 4.0 * delta;
            if !(0.75 - BET_TOL..=1.25 + BET_TOL).contains(&bet) {
                return Err(Error::Invariant(format!("calibration bet {bet} outside [3/4, 5/4]")));
            }
            bets[b] = bet;
        }
    }
    bets[index.pessimism] = pessimism_bet(induced, traj, state.eps_pess);
    if let Some((b, v)) = bets.iter().enumerate().find(|(_, v)| **v < -BET_TOL || !v.is_finite()) {
        return Err(Error::Invariant(format!("bettor {:?} placed bet {v}", index.bettors[b])));
    }
    let star: f64 = state.weights.iter().zip(&bets).map(|(w, b)| w * b.max(0.0)).sum();
    if !(star > 0.0) {
        return Err(Error::MarketDegenerate(format!("normalizer {star}")));
    }
    let weights = state.weights.iter().zip(&bets).map(|(w, b)| w * b.max(0.0) / star).collect();
    Ok(MarketUpdate { state: RmdpMarketState { weights, round: state.round + 1, ..state.clone() }, star, bets })
}

/// The bettor-market estimator as an [`OnlineEstimator`] over a fixed list of policies.
pub struct RmdpEstimator {
    index: BettorIndex,
    state: RmdpMarketState,
    policies: Vec<Policy>,
    class: Vec<RmdpKernel>,
    tracked: Vec<RmdpKernel>,
    induced: Vec<InducedMdp>,
}

impl RmdpEstimator {
    pub fn new(index: BettorIndex, state: RmdpMarketState, policies: Vec<Policy>, class: Vec<RmdpKernel>, tracked: Vec<RmdpKernel>) -> Result<Self> {
        if policies.is_empty() {
            return Err(Error::InvalidParameter("no policies to choose from".into()));
        }
        for k in class.iter().chain(&tracked) {
            if k.dims() != index.dims {
                return Err(Error::InvalidParameter("kernel dimensions differ from the market's".into()));
            }
        }
        Ok(Self { index, state, policies, class, tracked, induced: Vec::new() })
    }

    pub fn state(&self) -> &RmdpMarketState {
        &self.state
    }

    pub fn index(&self) -> &BettorIndex {
        &self.index
    }

    /// Induced MDPs from the latest [`OnlineEstimator::estimate`] call, one per policy.
    pub fn induced(&self) -> &[InducedMdp] {
        &self.induced
    }
}

impl OnlineEstimator for RmdpEstimator {
    type Obs = Trajectory;

    fn estimate(&mut self) -> Result<RoundEstimate> {
        let mut inducer = Inducer::new(&self.index, &self.state)?;
        self.induced = self.policies.iter().map(|pi| inducer.induce(pi)).collect::<Result<_>>()?;
        let fbar = self.induced.iter().map(InducedMdp::value).collect();
        let losses = |kernels: &[RmdpKernel]| -> Result<Vec<Vec<f64>>> {
            kernels
                .iter()
                .map(|k| self.induced.iter().zip(&self.policies).map(|(m, pi)| modified_loss_markov(&m.sel, k, pi)).collect())
                .collect()
        };
        Ok(RoundEstimate { fbar, class_loss: losses(&self.class)?, tracked_loss: losses(&self.tracked)?, public: None, flags: Vec::new() })
    }

    fn observe(&mut self, action: usize, obs: &Trajectory, _rng: &mut dyn rand::RngCore) -> Result<ObserveInfo> {
        let induced = self.induced.get(action).ok_or_else(|| Error::Precondition("observe called before estimate".into()))?;
        let up = market_update(&self.index, &self.state, induced, &self.policies[action], obs)?;
        self.state = up.state;
        Ok(ObserveInfo { star: Some(up.star), flags: Vec::new() })
    }
}
