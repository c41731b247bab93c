//! Model values, offset DEC and fuzzy DEC for finite classes and action sets.
//!
//! The DEC solvers work on a [`DecTable`]: per-model best values, per-action
//! belief values and per-(model, action) losses. Anything that can produce
//! such a table (bandits, enumerated RMDP policies) shares the same solvers.

use crate::error::{check_dim, Error, Result};
use crate::prob::{asym_dist_sq, hellinger_project, Dist, ImpreciseBelief};
use crate::solve::lp::{Cmp, LinearProgram, LpOutcome};
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

/// `r(a, o)` with every entry in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RewardFn {
    table: Vec<Vec<f64>>,
}

impl RewardFn {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let width = table.first().map(Vec::len).ok_or_else(|| Error::InvalidParameter("reward table has no actions".into()))?;
        for row in &table {
            check_dim(width, row.len())?;
            if let Some(x) = row.iter().find(|x| !(0.0..=1.0).contains(*x)) {
                return Err(Error::InvalidParameter(format!("reward {x} outside [0, 1]")));
            }
        }
        Ok(Self { table })
    }

    pub fn n_actions(&self) -> usize {
        self.table.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.table[0].len()
    }

    pub fn row(&self, a: usize) -> &[f64] {
        &self.table[a]
    }

    pub fn get(&self, a: usize, o: usize) -> f64 {
        self.table[a][o]
    }
}

/// A robust model: one imprecise belief per action.
#[derive(Clone, Debug)]
pub struct Model {
    label: String,
    arms: Vec<ImpreciseBelief>,
}

impl Model {
    pub fn new(label: impl Into<String>, arms: Vec<ImpreciseBelief>) -> Result<Self> {
        let first = arms.first().ok_or_else(|| Error::InvalidParameter("model has no actions".into()))?;
        let n = first.dim();
        for arm in &arms {
            check_dim(n, arm.dim())?;
        }
        Ok(Self { label: label.into(), arms })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn arm(&self, a: usize) -> &ImpreciseBelief {
        &self.arms[a]
    }

    pub fn arms(&self) -> &[ImpreciseBelief] {
        &self.arms
    }

    pub fn n_actions(&self) -> usize {
        self.arms.len()
    }

    pub fn n_outcomes(&self) -> usize {
        self.arms[0].dim()
    }
}

#[derive(Clone, Debug)]
pub struct ModelClass {
    models: Vec<Model>,
}

impl ModelClass {
    pub fn new(models: Vec<Model>) -> Result<Self> {
        let first = models.first().ok_or_else(|| Error::InvalidParameter("model class is empty".into()))?;
        let (na, no) = (first.n_actions(), first.n_outcomes());
        let mut seen = HashSet::new();
        for m in &models {
            check_dim(na, m.n_actions())?;
            check_dim(no, m.n_outcomes())?;
            if !seen.insert(m.label.clone()) {
                return Err(Error::InvalidParameter(format!("duplicate model label {}", m.label)));
            }
        }
        Ok(Self { models })
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn n_actions(&self) -> usize {
        self.models[0].n_actions()
    }

    pub fn n_outcomes(&self) -> usize {
        self.models[0].n_outcomes()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.models.iter().position(|m| m.label == label)
    }
}

/// An estimate: precise per-action distributions or per-action imprecise beliefs.
#[derive(Clone, Debug)]
pub enum Belief {
    Precise(Vec<Dist>),
    Imprecise(Vec<ImpreciseBelief>),
}

impl Belief {
    pub fn n_actions(&self) -> usize {
        match self {
            Belief::Precise(v) => v.len(),
            Belief::Imprecise(v) => v.len(),
        }
    }

    /// `f^{Mbar}(a)` for every action.
    pub fn values(&self, r: &RewardFn) -> Result<Vec<f64>> {
        check_dim(r.n_actions(), self.n_actions())?;
        match self {
            Belief::Precise(v) => v.iter().enumerate().map(|(a, d)| d.expect(r.row(a))).collect(),
            Belief::Imprecise(v) => v.iter().enumerate().map(|(a, b)| Ok(b.worst_case_expectation(r.row(a))?.0)).collect(),
        }
    }
}

pub type CustomLoss = Arc<dyn Fn(&Belief, &Model, usize) -> f64 + Send + Sync>;

#[derive(Clone, Default)]
pub enum LossFn {
    /// `D^2(Mbar(a) -> M(a))`.
    #[default]
    HellingerSq,
    Custom(CustomLoss),
}

impl fmt::Debug for LossFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossFn::HellingerSq => f.write_str("HellingerSq"),
            LossFn::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl LossFn {
    pub fn eval(&self, belief: &Belief, model: &Model, a: usize) -> Result<f64> {
        let v = match self {
            LossFn::HellingerSq => match belief {
                Belief::Precise(v) => hellinger_project(&v[a], model.arm(a))?.dist_sq,
                Belief::Imprecise(v) => asym_dist_sq(&v[a], model.arm(a))?,
            },
            LossFn::Custom(f) => f(belief, model, a),
        };
        if v.is_nan() || v < 0.0 {
            return Err(Error::Invariant(format!("loss returned {v}")));
        }
        Ok(v)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelValues {
    pub f: Vec<f64>,
    pub maxf: f64,
    pub argmax: usize,
}

pub(crate) fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] + 1e-12 {
            best = i;
        }
    }
    best
}

/// `f^M(a) = min over mu in M(a) of E_mu[r(a, .)]`.
pub fn model_values(m: &Model, r: &RewardFn) -> Result<ModelValues> {
    check_dim(r.n_actions(), m.n_actions())?;
    check_dim(r.n_outcomes(), m.n_outcomes())?;
    let f: Vec<f64> = (0..m.n_actions()).map(|a| Ok(m.arm(a).worst_case_expectation(r.row(a))?.0)).collect::<Result<_>>()?;
    let argmax = argmax(&f);
    Ok(ModelValues { maxf: f[argmax], argmax, f })
}

/// Replaces each imprecise arm by its worst-case member.
pub fn reduce_belief(mbar: &[ImpreciseBelief], r: &RewardFn) -> Result<Vec<Dist>> {
    check_dim(r.n_actions(), mbar.len())?;
    mbar.iter().enumerate().map(|(a, b)| Ok(b.worst_case_expectation(r.row(a))?.1)).collect()
}

/// Everything the DEC solvers need about a class and an estimate.
#[derive(Clone, Debug, PartialEq)]
pub struct DecTable {
    pub maxf: Vec<f64>,
    pub fbar: Vec<f64>,
    /// `loss[model][action]`.
    pub loss: Vec<Vec<f64>>,
}

impl DecTable {
    pub fn new(maxf: Vec<f64>, fbar: Vec<f64>, loss: Vec<Vec<f64>>) -> Result<Self> {
        if fbar.is_empty() {
            return Err(Error::InvalidParameter("no actions".into()));
        }
        check_dim(maxf.len(), loss.len())?;
        for row in &loss {
            check_dim(fbar.len(), row.len())?;
            if row.iter().any(|x| !(*x >= 0.0)) {
                return Err(Error::InvalidParameter("losses must be nonnegative".into()));
            }
        }
        Ok(Self { maxf, fbar, loss })
    }

    pub fn build(h: &ModelClass, mbar: &Belief, loss: &LossFn, r: &RewardFn) -> Result<Self> {
        let mut maxf = Vec::with_capacity(h.len());
        let mut rows = Vec::with_capacity(h.len());
        for m in h.models() {
            maxf.push(model_values(m, r)?.maxf);
            rows.push((0..m.n_actions()).map(|a| loss.eval(mbar, m, a)).collect::<Result<Vec<_>>>()?);
        }
        Self::new(maxf, mbar.values(r)?, rows)
    }

    pub fn n_actions(&self) -> usize {
        self.fbar.len()
    }

    pub fn n_models(&self) -> usize {
        self.maxf.len()
    }

    /// The offset objective `max_M [maxf(M) - E_p fbar - gamma E_p loss(M)]` at a fixed `p`.
    pub fn offset_objective(&self, p: &[f64], gamma: f64) -> f64 {
        let ef: f64 = p.iter().zip(&self.fbar).map(|(a, b)| a * b).sum();
        (0..self.n_models())
            .map(|m| self.maxf[m] - ef - gamma * p.iter().zip(&self.loss[m]).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `min_p max_M [maxf(M) - E_p fbar - gamma E_p loss(M)]` as a linear program.
pub fn offset_dec_table(table: &DecTable, gamma: f64) -> Result<(f64, Dist)> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::InvalidParameter(format!("gamma {gamma} must be finite and nonnegative")));
    }
    if table.n_models() == 0 {
        return Err(Error::InvalidParameter("offset DEC of an empty class".into()));
    }
    let na = table.n_actions();
    // Variables: p (na), t+ and t- for the free epigraph variable.
    let mut obj = vec![0.0; na];
    obj.extend([1.0, -1.0]);
    let mut lp = LinearProgram::new(obj);
    let mut mass = vec![1.0; na];
    mass.extend([0.0, 0.0]);
    lp.constrain(mass, Cmp::Eq, 1.0);
    for m in 0..table.n_models() {
        let mut row: Vec<f64> = (0..na).map(|a| table.fbar[a] + gamma * table.loss[m][a]).collect();
        row.extend([1.0, -1.0]);
        lp.constrain(row, Cmp::Ge, table.maxf[m]);
    }
    match lp.solve() {
        LpOutcome::Optimal { x, .. } => {
            let p = Dist::from_raw(x[..na].to_vec());
            Ok((table.offset_objective(p.probs(), gamma), p))
        }
        _ => Err(Error::Solver("offset DEC program failed".into())),
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FuzzyDec {
    pub value: f64,
    pub p: Dist,
    pub gamma_star: f64,
}

/// Search bracket for the outer minimization over `gamma`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaBracket {
    pub lo: f64,
    pub hi: f64,
}

impl Default for GammaBracket {
    fn default() -> Self {
        Self { lo: 1e-4, hi: 1e6 }
    }
}

const GRID_PER_DECADE: f64 = 4.0;
const GOLDEN_REL_TOL: f64 = 1e-4;
const TIE_TOL: f64 = 1e-12;

/// `min_{gamma >= 0} max(offset_dec(gamma), 0) + gamma eps^2`, with `p` the offset minimizer at the best `gamma`.
pub fn fuzzy_dec_table(table: &DecTable, eps: f64, bracket: GammaBracket) -> Result<FuzzyDec> {
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!("eps {eps} must be nonnegative")));
    }
    if !(bracket.lo > 0.0 && bracket.hi > bracket.lo) {
        return Err(Error::InvalidParameter("gamma bracket must satisfy 0 < lo < hi".into()));
    }
    let eps_sq = eps * eps;
    let eval = |gamma: f64| -> Result<(f64, Dist)> {
        let (v, p) = offset_dec_table(table, gamma)?;
        Ok((v.max(0.0) + gamma * eps_sq, p))
    };
    let (lo, hi) = (bracket.lo.ln(), bracket.hi.ln());
    let n = ((hi - lo) / std::f64::consts::LN_10 * GRID_PER_DECADE).ceil().max(2.0) as usize;
    let grid: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let mut best = (0.0, eval(0.0)?);
    let mut best_k = None;
    for (k, &x) in grid.iter().enumerate() {
        let cand = eval(x.exp())?;
        if cand.0 < best.1 .0 - TIE_TOL {
            best = (x.exp(), cand);
            best_k = Some(k);
        }
    }
    if let Some(k) = best_k {
        let (mut a, mut b) = (grid[k.saturating_sub(1)], grid[(k + 1).min(n)]);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - phi * (b - a);
        let mut d = a + phi * (b - a);
        let mut fc = eval(c.exp())?;
        let mut fd = eval(d.exp())?;
        while b - a > GOLDEN_REL_TOL {
            if fc.0 <= fd.0 {
                b = d;
                d = c;
                fd = fc;
                c = b - phi * (b - a);
                fc = eval(c.exp())?;
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + phi * (b - a);
                fd = eval(d.exp())?;
            }
        }
        for (x, f) in [(c, fc), (d, fd)] {
            if f.0 < best.1 .0 - TIE_TOL {
                best = (x.exp(), f);
            }
        }
    }
    let (gamma_star, (value, p)) = best;
    Ok(FuzzyDec { value, p, gamma_star })
}

pub fn offset_dec(h: &ModelClass, mbar: &Belief, gamma: f64, loss: &LossFn, r: &RewardFn) -> Result<(f64, Dist)> {
    offset_dec_table(&DecTable::build(h, mbar, loss, r)?, gamma)
}

pub fn fuzzy_dec(h: &ModelClass, mbar: &Belief, eps: f64, loss: &LossFn, r: &RewardFn) -> Result<FuzzyDec> {
    fuzzy_dec_table(&DecTable::build(h, mbar, loss, r)?, eps, GammaBracket::default())
}

/// The constrained objective of the fuzzy DEC at a fixed `p`: the best
/// sub-probability mixture of models whose expected loss stays within `eps^2`.
/// The inner program has two constraints, so some optimal mixture puts mass on
/// at most two models; those candidates are enumerated.
pub fn fuzzy_objective(table: &DecTable, p: &[f64], eps: f64) -> f64 {
    let ef: f64 = p.iter().zip(&table.fbar).map(|(a, b)| a * b).sum();
    let items: Vec<(f64, f64)> = (0..table.n_models())
        .map(|m| (table.maxf[m] - ef, p.iter().zip(&table.loss[m]).map(|(a, b)| a * b).sum::<f64>()))
        .collect();
    let budget = eps * eps;
    let mut best: f64 = 0.0;
    for (i, &(vi, wi)) in items.iter().enumerate() {
        let qi = if wi <= budget { 1.0 } else { budget / wi };
        best = best.max(qi * vi);
        for &(vj, wj) in &items[i + 1..] {
            // Both constraints tight: q_i + q_j = 1 and q_i w_i + q_j w_j = eps^2.
            if (wi - wj).abs() > 1e-15 {
                let qi = (budget - wj) / (wi - wj);
                if (0.0..=1.0).contains(&qi) {
                    best = best.max(qi * vi + (1.0 - qi) * vj);
                }
            }
        }
    }
    best
}
