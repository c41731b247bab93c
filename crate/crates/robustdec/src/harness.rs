//! Scenario files, seeded experiment runs and report writing.
//!
//! A scenario is one TOML document. Every run is a pure function of the
//! scenario and its seed, so reruns reproduce reports byte for byte.

use crate::dec::{fuzzy_dec_table, model_values, DecTable, GammaBracket, Model, ModelClass, RewardFn};
use crate::e2d::{run_e2d, E2DConfig, E2DTranscript, Problem};
use crate::envs::{BanditEnv, EnvMode, EnvStrategy, Scope};
use crate::error::{Error, Result};
use crate::estimators::{cover_beta_bound, rue_alpha_bound, rue_beta_bound, RueBandit, DEFAULT_EPS_PRIME};
use crate::linbandit::{cover_class, grid_cover, model_from_point, BilinearSpec, HypothesisBox};
use crate::prob::{Dist, ImpreciseBelief};
use crate::rmdp::{
    check_one_bounded, expected_total_reward, modified_loss_markov, parhalf_to_kernel, robust_optimal_policy, surrogate, worst_case_selection,
    CellSelection, Dims, ParhalfHypothesis, ParhalfRow, Policy, RmdpEnv, RmdpEnvMode, RmdpKernel,
};
use crate::rmdp_estimator::{BettorIndex, RmdpEstimator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const CSV_HEADER: [&str; 11] = ["t", "action", "outcome", "reward", "inst_regret", "cum_regret", "inacc_ledger", "opt_ledger", "surviving", "star", "flags"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    RobustBandit,
    LinearBandit,
    Rmdp,
}

/// An imprecise belief as written in a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "backend", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BeliefSpec {
    Singleton { dist: Vec<f64> },
    VertexSet { vertices: Vec<Vec<f64>> },
    /// `{mu : g . mu >= c}`.
    Halfspace { g: Vec<f64>, c: f64 },
    /// Rows `coeff . mu >= rhs`.
    LinearConstraints { rows: Vec<ConstraintRow> },
    FullSimplex {},
    Fattened { eps: f64, base: Box<BeliefSpec> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintRow {
    pub coeff: Vec<f64>,
    pub rhs: f64,
}

impl BeliefSpec {
    pub fn build(&self, dim: usize) -> Result<ImpreciseBelief> {
        let check = |n: usize| {
            if n != dim {
                Err(Error::Dimension { expected: dim, got: n })
            } else {
                Ok(())
            }
        };
        match self {
            BeliefSpec::Singleton { dist } => {
                check(dist.len())?;
                Ok(ImpreciseBelief::singleton(Dist::new(dist.clone())?))
            }
            BeliefSpec::VertexSet { vertices } => {
                let vs = vertices
                    .iter()
                    .map(|v| {
                        check(v.len())?;
                        Dist::new(v.clone())
                    })
                    .collect::<Result<Vec<_>>>()?;
                ImpreciseBelief::vertex_set(vs)
            }
            BeliefSpec::Halfspace { g, c } => {
                check(g.len())?;
                ImpreciseBelief::halfspace(g.clone(), *c)
            }
            BeliefSpec::LinearConstraints { rows } => {
                for r in rows {
                    check(r.coeff.len())?;
                }
                ImpreciseBelief::linear_constraints(dim, rows.iter().map(|r| (r.coeff.clone(), r.rhs)).collect())
            }
            BeliefSpec::FullSimplex {} => ImpreciseBelief::full_simplex(dim),
            BeliefSpec::Fattened { eps, base } => ImpreciseBelief::fattened(base.build(dim)?, *eps),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyKind {
    #[default]
    WorstCaseStationary,
    RandomVertex,
    HellingerProjection,
    Scripted,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvSpec {
    #[serde(default)]
    pub strategy: StrategyKind,
    #[serde(default)]
    pub scope: Scope,
    /// Label of the model nature follows; defaults to the first true model.
    pub model: Option<String>,
    /// `script[round][action]` distributions for the scripted strategy.
    pub script: Option<Vec<Vec<Vec<f64>>>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Rue,
    Market,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    /// Defaults to `rue` for bandits and `market` for RMDPs.
    pub kind: Option<EstimatorKind>,
    #[serde(default = "default_eps_prime")]
    pub eps_prime: f64,
    /// Filter budget; defaults to the scenario kind's inaccuracy bound.
    pub beta_budget: Option<f64>,
    /// Constant in front of the RMDP estimator's rate.
    #[serde(default = "one")]
    pub rate_constant: f64,
    #[serde(default = "half")]
    pub eps_s: f64,
    #[serde(default = "half")]
    pub eps_01: f64,
    pub gamma_lo: Option<f64>,
    pub gamma_hi: Option<f64>,
}

impl Default for EstimatorSpec {
    fn default() -> Self {
        Self { kind: None, eps_prime: DEFAULT_EPS_PRIME, beta_budget: None, rate_constant: 1.0, eps_s: 0.5, eps_01: 0.5, gamma_lo: None, gamma_hi: None }
    }
}

fn default_eps_prime() -> f64 {
    DEFAULT_EPS_PRIME
}

fn one() -> f64 {
    1.0
}

fn half() -> f64 {
    0.5
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub label: String,
    pub arms: Vec<BeliefSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BanditSpec {
    pub outcomes: Vec<String>,
    /// `reward[action][outcome]` in `[0, 1]`.
    pub reward: Vec<Vec<f64>>,
    pub models: Vec<ModelSpec>,
    pub true_models: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSpec {
    pub bilinear: BilinearSpec,
    pub reward: Vec<Vec<f64>>,
    pub outcomes: Option<Vec<String>>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// L2 radius of the grid cover.
    pub cover_eps: f64,
    /// Hellinger radius by which cover models are fattened.
    pub hellinger_eps: f64,
    /// The point nature's model comes from.
    pub true_point: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellSpec {
    pub h: usize,
    #[serde(default)]
    pub s: usize,
    #[serde(default)]
    pub a: usize,
    pub belief: BeliefSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// Backend for cells not listed; full simplex when omitted.
    pub default: Option<BeliefSpec>,
    #[serde(default)]
    pub cells: Vec<CellSpec>,
    /// Alternatively, the kernel of a partial-halfspace hypothesis.
    pub parhalf: Option<Vec<ParhalfRow>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmdpSpec {
    pub horizon: usize,
    pub states: usize,
    pub actions: usize,
    pub kernel: KernelSpec,
    /// Extra class members beyond the true kernel's surrogate, one row list each.
    #[serde(default)]
    pub hypotheses: Vec<Vec<ParhalfRow>>,
    #[serde(default)]
    pub random_hypotheses: usize,
    #[serde(default)]
    pub class_seed: u64,
    /// Declares the kernel 1-bounded by construction; skips the random-policy check.
    #[serde(default)]
    pub certified: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub kind: ScenarioKind,
    pub rounds: usize,
    pub delta: f64,
    #[serde(default = "one_usize")]
    pub seeds: usize,
    #[serde(default)]
    pub seed_base: u64,
    #[serde(default)]
    pub environment: EnvSpec,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    pub bandit: Option<BanditSpec>,
    pub linear: Option<LinearSpec>,
    pub rmdp: Option<RmdpSpec>,
}

impl Scenario {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Validation(vec![e.to_string()]))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Checks everything a run needs, collecting every problem found.
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            problems.push("name: must be nonempty and contain no path separators".to_string());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            problems.push(format!("delta: {} is not in (0, 1)", self.delta));
        }
        if self.seeds == 0 {
            problems.push("seeds: must be at least 1".into());
        }
        let e = &self.estimator;
        if !(e.eps_prime > 0.0 && e.eps_prime <= 0.01) {
            problems.push(format!("estimator.eps_prime: {} is not in (0, 0.01]", e.eps_prime));
        }
        if e.beta_budget.is_some_and(|b| !(b > 0.0)) {
            problems.push("estimator.beta_budget: must be positive".into());
        }
        let sections = [("bandit", self.bandit.is_some()), ("linear", self.linear.is_some()), ("rmdp", self.rmdp.is_some())];
        let want = match self.kind {
            ScenarioKind::RobustBandit => "bandit",
            ScenarioKind::LinearBandit => "linear",
            ScenarioKind::Rmdp => "rmdp",
        };
        for (name, present) in sections {
            if name == want && !present {
                problems.push(format!("{name}: section required for kind {:?}", self.kind));
            }
            if name != want && present {
                problems.push(format!("{name}: section not allowed for kind {:?}", self.kind));
            }
        }
        let expected_est = if self.kind == ScenarioKind::Rmdp { EstimatorKind::Market } else { EstimatorKind::Rue };
        if e.kind.is_some_and(|k| k != expected_est) {
            problems.push(format!("estimator.kind: {:?} does not fit kind {:?}", e.kind.unwrap(), self.kind));
        }
        if problems.is_empty() {
            if let Err(err) = Setup::build(self) {
                match err {
                    Error::Validation(list) => problems.extend(list),
                    other => problems.push(other.to_string()),
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    fn bracket(&self) -> GammaBracket {
        let d = GammaBracket::default();
        GammaBracket { lo: self.estimator.gamma_lo.unwrap_or(d.lo), hi: self.estimator.gamma_hi.unwrap_or(d.hi) }
    }
}

/// Everything derived from a scenario before any seed is drawn.
pub enum Setup {
    Bandit(BanditSetup),
    Rmdp(RmdpSetup),
}

pub struct BanditSetup {
    pub r: RewardFn,
    pub outcomes: Vec<String>,
    pub class: ModelClass,
    pub tracked: Vec<Model>,
    pub env_model: Model,
    pub env_mode: EnvMode,
    pub scope: Scope,
    pub true_index: Option<usize>,
    pub beta_bound: f64,
}

pub struct RmdpSetup {
    pub dims: Dims,
    pub kernel: RmdpKernel,
    pub class: Vec<RmdpKernel>,
    pub labels: Vec<String>,
    pub policies: Vec<Policy>,
    pub env_mode: RmdpEnvMode,
    pub beta_bound: f64,
}

/// `C (H S^2 ln T + H S ln(H S A T / delta))`.
pub fn rmdp_beta_bound(dims: Dims, rounds: usize, delta: f64, c: f64) -> f64 {
    let (h, s, a) = (dims.horizon.max(1) as f64, dims.states as f64, dims.actions as f64);
    let t = rounds.max(1) as f64;
    c * (h * s * s * t.ln() + h * s * (h * s * a * t / delta).ln())
}

/// `C H sqrt(T) ln(1 / delta)`.
pub fn rmdp_alpha_bound(dims: Dims, rounds: usize, delta: f64, c: f64) -> f64 {
    c * dims.horizon.max(1) as f64 * (rounds as f64).sqrt() * (1.0 / delta).ln()
}

/// Reference value `2 sqrt(2 (H S A + 1)) eps` for an RMDP class.
pub fn theorem4_reference(dims: Dims, eps: f64) -> f64 {
    2.0 * (2.0 * (dims.horizon * dims.states * dims.actions + 1) as f64).sqrt() * eps
}

fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(vec![msg.into()])
}

impl Setup {
    pub fn build(sc: &Scenario) -> Result<Self> {
        match sc.kind {
            ScenarioKind::RobustBandit => Self::bandit(sc),
            ScenarioKind::LinearBandit => Self::linear(sc),
            ScenarioKind::Rmdp => Self::rmdp(sc),
        }
    }

    fn env_mode(sc: &Scenario, n_actions: usize, n_outcomes: usize) -> Result<EnvMode> {
        Ok(match sc.environment.strategy {
            StrategyKind::WorstCaseStationary => EnvMode::WorstCaseStationary,
            StrategyKind::RandomVertex => EnvMode::RandomVertex,
            StrategyKind::HellingerProjection => EnvMode::HellingerProjectionAdversary,
            StrategyKind::Scripted => {
                let script = sc.environment.script.as_ref().ok_or_else(|| invalid("environment.script: required for the scripted strategy"))?;
                let rounds = script
                    .iter()
                    .map(|row| {
                        if row.len() != n_actions {
                            return Err(invalid(format!("environment.script: rows need {n_actions} distributions")));
                        }
                        row.iter()
                            .map(|d| {
                                if d.len() != n_outcomes {
                                    return Err(invalid(format!("environment.script: distributions need {n_outcomes} entries")));
                                }
                                Dist::new(d.clone())
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                    .collect::<Result<Vec<_>>>()?;
                EnvMode::Scripted(rounds)
            }
        })
    }

    fn bandit(sc: &Scenario) -> Result<Self> {
        let spec = sc.bandit.as_ref().ok_or_else(|| invalid("bandit: missing"))?;
        let r = RewardFn::new(spec.reward.clone()).map_err(|e| invalid(format!("bandit.reward: {e}")))?;
        if spec.outcomes.len() != r.n_outcomes() {
            return Err(invalid("bandit.outcomes: one label per reward column required"));
        }
        let mut models = Vec::new();
        let mut problems = Vec::new();
        for (i, m) in spec.models.iter().enumerate() {
            if m.arms.len() != r.n_actions() {
                problems.push(format!("bandit.models[{i}].arms: {} arms for {} actions", m.arms.len(), r.n_actions()));
                continue;
            }
            let arms: Result<Vec<_>> = m.arms.iter().map(|b| b.build(r.n_outcomes())).collect();
            match arms.and_then(|arms| Model::new(m.label.clone(), arms)) {
                Ok(model) => models.push(model),
                Err(e) => problems.push(format!("bandit.models[{i}] ({}): {e}", m.label)),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Validation(problems));
        }
        let class = ModelClass::new(models).map_err(|e| invalid(format!("bandit.models: {e}")))?;
        let mut tracked = Vec::new();
        for l in &spec.true_models {
            let i = class.index_of(l).ok_or_else(|| invalid(format!("bandit.true_models: unknown label {l}")))?;
            tracked.push(class.models()[i].clone());
        }
        if tracked.is_empty() {
            return Err(invalid("bandit.true_models: at least one label required"));
        }
        let env_label = sc.environment.model.clone().unwrap_or_else(|| spec.true_models[0].clone());
        let env_model = class
            .index_of(&env_label)
            .map(|i| class.models()[i].clone())
            .ok_or_else(|| invalid(format!("environment.model: unknown label {env_label}")))?;
        let env_mode = Self::env_mode(sc, r.n_actions(), r.n_outcomes())?;
        EnvStrategy::new(env_mode.clone(), env_model.clone(), sc.environment.scope).map_err(|e| invalid(format!("environment: {e}")))?;
        let true_index = class.index_of(&spec.true_models[0]);
        let beta_bound = rue_beta_bound(class.len(), sc.delta);
        Ok(Setup::Bandit(BanditSetup {
            r,
            outcomes: spec.outcomes.clone(),
            class,
            tracked,
            env_model,
            env_mode,
            scope: sc.environment.scope,
            true_index,
            beta_bound,
        }))
    }

    fn linear(sc: &Scenario) -> Result<Self> {
        let spec = sc.linear.as_ref().ok_or_else(|| invalid("linear: missing"))?;
        spec.bilinear.validate().map_err(|e| invalid(format!("linear.bilinear: {e}")))?;
        let r = RewardFn::new(spec.reward.clone()).map_err(|e| invalid(format!("linear.reward: {e}")))?;
        if r.n_actions() != spec.bilinear.n_actions || r.n_outcomes() != spec.bilinear.n_outcomes {
            return Err(invalid("linear.reward: shape differs from the bilinear spec"));
        }
        let outcomes = spec.outcomes.clone().unwrap_or_else(|| (0..r.n_outcomes()).map(|o| o.to_string()).collect());
        if outcomes.len() != r.n_outcomes() {
            return Err(invalid("linear.outcomes: one label per outcome required"));
        }
        let bx = HypothesisBox::new(spec.lo.clone(), spec.hi.clone()).map_err(|e| invalid(format!("linear.lo/hi: {e}")))?;
        if bx.dim() != spec.bilinear.z_dim {
            return Err(invalid("linear.lo/hi: box dimension differs from z_dim"));
        }
        if spec.true_point.len() != bx.dim() || spec.true_point.iter().zip(bx.lo.iter().zip(&bx.hi)).any(|(z, (l, h))| z < l || z > h) {
            return Err(invalid("linear.true_point: must lie in the box"));
        }
        if !(spec.hellinger_eps >= 0.0 && spec.hellinger_eps <= 1.0) {
            return Err(invalid("linear.hellinger_eps: must be in [0, 1]"));
        }
        let points = grid_cover(&bx, spec.cover_eps).map_err(|e| invalid(format!("linear.cover_eps: {e}")))?;
        let (class, _skipped) = cover_class(&spec.bilinear, &points, spec.hellinger_eps).map_err(|e| invalid(format!("linear: cover: {e}")))?;
        let truth = model_from_point(&spec.bilinear, &spec.true_point).map_err(|e| invalid(format!("linear.true_point: {e}")))?;
        let env_mode = Self::env_mode(sc, r.n_actions(), r.n_outcomes())?;
        EnvStrategy::new(env_mode.clone(), truth.clone(), sc.environment.scope).map_err(|e| invalid(format!("environment: {e}")))?;
        let beta_bound = cover_beta_bound(class.len(), sc.delta, sc.rounds, spec.hellinger_eps);
        Ok(Setup::Bandit(BanditSetup {
            r,
            outcomes,
            class,
            tracked: vec![truth.clone()],
            env_model: truth,
            env_mode,
            scope: sc.environment.scope,
            true_index: None,
            beta_bound,
        }))
    }

    fn rmdp(sc: &Scenario) -> Result<Self> {
        let spec = sc.rmdp.as_ref().ok_or_else(|| invalid("rmdp: missing"))?;
        let dims = Dims::new(spec.horizon, spec.states, spec.actions).map_err(|e| invalid(format!("rmdp: {e}")))?;
        let kernel = match &spec.kernel.parhalf {
            Some(rows) => {
                if !spec.kernel.cells.is_empty() || spec.kernel.default.is_some() {
                    return Err(invalid("rmdp.kernel: give either parhalf rows or cells, not both"));
                }
                parhalf_to_kernel(&ParhalfHypothesis::new(dims, rows.clone()).map_err(|e| invalid(format!("rmdp.kernel.parhalf: {e}")))?)?
            }
            None => {
                let default = spec.kernel.default.clone().unwrap_or(BeliefSpec::FullSimplex {});
                let mut specs = vec![default; dims.n_cells()];
                let mut problems = Vec::new();
                for (k, c) in spec.kernel.cells.iter().enumerate() {
                    let ok = c.h <= dims.horizon && (c.h == 0 || (c.s < dims.states && c.a < dims.actions));
                    if ok {
                        specs[dims.cell(c.h, c.s, c.a)] = c.belief.clone();
                    } else {
                        problems.push(format!("rmdp.kernel.cells[{k}]: cell ({}, {}, {}) out of range", c.h, c.s, c.a));
                    }
                }
                let cells: Vec<_> = specs
                    .iter()
                    .enumerate()
                    .filter_map(|(i, b)| {
                        let (h, s, a) = dims.cell_coords(i);
                        b.build(dims.cell_dim(h)).map_err(|e| problems.push(format!("rmdp.kernel: cell ({h}, {s}, {a}): {e}"))).ok()
                    })
                    .collect();
                if !problems.is_empty() {
                    return Err(Error::Validation(problems));
                }
                RmdpKernel::new(dims, cells)?
            }
        };
        if !spec.certified {
            let mut rng = ChaCha8Rng::seed_from_u64(spec.class_seed);
            if !check_one_bounded(&kernel, 16, &mut rng)? {
                return Err(invalid("rmdp.kernel: not 1-bounded (robust values exceed 1)"));
            }
        }
        let sur = surrogate(&kernel).map_err(|e| invalid(format!("rmdp.kernel: {e}")))?;
        let mut class = vec![parhalf_to_kernel(&sur)?];
        let mut labels = vec!["surrogate".to_string()];
        for (i, rows) in spec.hypotheses.iter().enumerate() {
            let hyp = ParhalfHypothesis::new(dims, rows.clone()).map_err(|e| invalid(format!("rmdp.hypotheses[{i}]: {e}")))?;
            class.push(parhalf_to_kernel(&hyp).map_err(|e| invalid(format!("rmdp.hypotheses[{i}]: {e}")))?);
            labels.push(format!("h{i}"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.class_seed);
        for i in 0..spec.random_hypotheses {
            let rows = sur
                .rows
                .iter()
                .map(|row| ParhalfRow {
                    action: rng.random_range(0..dims.actions),
                    f: row.f.iter().map(|_| rng.random::<f64>()).collect(),
                    c: rng.random::<f64>(),
                })
                .collect();
            let hyp = ParhalfHypothesis::new(dims, rows)?;
            class.push(parhalf_to_kernel(&hyp)?);
            labels.push(format!("r{i}"));
        }
        let env_mode = match sc.environment.strategy {
            StrategyKind::WorstCaseStationary => RmdpEnvMode::WorstCaseStationary,
            StrategyKind::RandomVertex => RmdpEnvMode::RandomVertex,
            other => return Err(invalid(format!("environment.strategy: {other:?} is not available for RMDP scenarios"))),
        };
        if sc.environment.script.is_some() || sc.environment.model.is_some() {
            return Err(invalid("environment: model and script do not apply to RMDP scenarios"));
        }
        let (nf, nc, nu) = crate::rmdp_estimator::bettor_counts(dims, sc.estimator.eps_s, sc.estimator.eps_01);
        if nf.saturating_add(nc).saturating_add(nu) >= crate::rmdp_estimator::MAX_BETTORS {
            return Err(Error::Capacity(format!("{nf} fragment + {nc} calibration + {nu} uniform bettors")));
        }
        let beta_bound = rmdp_beta_bound(dims, sc.rounds, sc.delta, sc.estimator.rate_constant);
        Ok(Setup::Rmdp(RmdpSetup { dims, kernel, class, labels, policies: Policy::enumerate_deterministic(dims), env_mode, beta_bound }))
    }

    pub fn beta_bound(&self) -> f64 {
        match self {
            Setup::Bandit(b) => b.beta_bound,
            Setup::Rmdp(r) => r.beta_bound,
        }
    }
}

/// Per-seed summary, keys in report order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub scenario: String,
    pub seed: u64,
    #[serde(rename = "T")]
    pub t: usize,
    pub delta: f64,
    pub cum_regret: f64,
    pub theorem1_rhs: f64,
    pub beta_bound: f64,
    pub beta_empirical: f64,
    pub alpha_bound: f64,
    pub alpha_empirical: f64,
    pub violations: usize,
}

pub struct RunOutput {
    pub transcript: E2DTranscript,
    pub summary: Summary,
    /// Largest fuzzy DEC seen during the run.
    pub max_dec: f64,
}

/// Scenario-level constants shared by all seeds.
pub struct Bounds {
    pub beta_budget: f64,
    pub beta_bound: f64,
    pub alpha_bound: f64,
    /// Fuzzy DEC at `eps = sqrt(beta_budget / T)`, maximized over a fixed set of candidate estimates.
    pub dec_reference: f64,
    pub theorem1_rhs: f64,
    pub theorem4_reference: Option<f64>,
}

fn candidate_tables_bandit(b: &BanditSetup) -> Result<Vec<DecTable>> {
    let witness = |m: &Model| -> Result<Vec<Dist>> { crate::dec::reduce_belief(m.arms(), &b.r) };
    let mut cands: Vec<Vec<Dist>> = b.class.models().iter().map(witness).collect::<Result<_>>()?;
    let n = cands.len();
    for i in 0..n {
        for j in i + 1..n {
            let mix = cands[i].iter().zip(&cands[j]).map(|(x, y)| x.mix(y, 0.5)).collect::<Result<Vec<_>>>()?;
            cands.push(mix);
        }
    }
    cands.push(vec![Dist::uniform(b.r.n_outcomes()); b.r.n_actions()]);
    cands
        .into_iter()
        .map(|dists| DecTable::build(&b.class, &crate::dec::Belief::Precise(dists), &crate::dec::LossFn::HellingerSq, &b.r))
        .collect()
}

fn candidate_tables_rmdp(r: &RmdpSetup) -> Result<Vec<DecTable>> {
    let maxf: Vec<f64> = r.class.iter().map(|k| robust_optimal_policy(k).map(|x| x.1.v0)).collect::<Result<_>>()?;
    let mut sels: Vec<CellSelection> = r.class.iter().map(worst_case_selection).collect::<Result<_>>()?;
    let dims = r.dims;
    sels.push(CellSelection::new(dims, (0..dims.n_cells()).map(|i| Dist::uniform(dims.cell_dim(dims.cell_coords(i).0))).collect())?);
    sels.iter()
        .map(|sel| {
            let fbar = r.policies.iter().map(|pi| expected_total_reward(sel, pi)).collect();
            let loss = r.class.iter().map(|k| r.policies.iter().map(|pi| modified_loss_markov(sel, k, pi)).collect::<Result<Vec<_>>>()).collect::<Result<Vec<_>>>()?;
            DecTable::new(maxf.clone(), fbar, loss)
        })
        .collect()
}

impl Bounds {
    pub fn compute(sc: &Scenario, setup: &Setup) -> Result<Self> {
        let beta_bound = setup.beta_bound();
        let beta_budget = sc.estimator.beta_budget.unwrap_or(beta_bound);
        let t = sc.rounds;
        let (alpha_bound, tables, t4) = match setup {
            Setup::Bandit(b) => (rue_alpha_bound(t, sc.delta), candidate_tables_bandit(b)?, None),
            Setup::Rmdp(r) => (
                rmdp_alpha_bound(r.dims, t, sc.delta, sc.estimator.rate_constant),
                candidate_tables_rmdp(r)?,
                Some(theorem4_reference(r.dims, if t > 0 { (beta_budget / t as f64).sqrt() } else { 0.0 })),
            ),
        };
        let dec_reference = if t == 0 {
            0.0
        } else {
            let eps = (beta_budget / t as f64).sqrt();
            tables.iter().map(|tb| fuzzy_dec_table(tb, eps, sc.bracket()).map(|d| d.value)).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max)
        };
        let theorem1_rhs = crate::e2d::theorem1_rhs(t, dec_reference, alpha_bound, sc.delta);
        Ok(Self { beta_budget, beta_bound, alpha_bound, dec_reference, theorem1_rhs, theorem4_reference: t4 })
    }
}

/// Runs one seed of a validated scenario.
pub fn run_seed(sc: &Scenario, setup: &Setup, bounds: &Bounds, seed: u64) -> Result<RunOutput> {
    let mut config = E2DConfig::new(sc.rounds, sc.delta, bounds.beta_budget)?;
    config.gamma_bracket = sc.bracket();
    let transcript = match setup {
        Setup::Bandit(b) => {
            let strategy = EnvStrategy::new(b.env_mode.clone(), b.env_model.clone(), b.scope)?;
            let mut env = BanditEnv::new(strategy, b.r.clone(), b.outcomes.clone())?;
            let mut est = RueBandit::new(b.class.clone(), b.class.clone(), b.tracked.clone(), b.r.clone(), sc.estimator.eps_prime, sc.rounds)?;
            let class_maxf = b.class.models().iter().map(|m| model_values(m, &b.r).map(|v| v.maxf)).collect::<Result<_>>()?;
            let problem = Problem { class_maxf, true_maxf: model_values(&b.env_model, &b.r)?.maxf, true_index: b.true_index };
            run_e2d(&config, &problem, &mut est, &mut env, seed)
        }
        Setup::Rmdp(r) => {
            let (index, state) = BettorIndex::build(r.dims, sc.estimator.eps_s, sc.estimator.eps_01, sc.estimator.eps_prime, sc.rounds)?;
            let mut est = RmdpEstimator::new(index, state, r.policies.clone(), r.class.clone(), vec![r.class[0].clone()])?;
            let mut env = RmdpEnv::new(r.kernel.clone(), r.env_mode.clone(), r.policies.clone())?;
            let class_maxf: Vec<f64> = r.class.iter().map(|k| robust_optimal_policy(k).map(|x| x.1.v0)).collect::<Result<_>>()?;
            let problem = Problem { true_maxf: class_maxf[0], class_maxf, true_index: Some(0) };
            run_e2d(&config, &problem, &mut est, &mut env, seed)
        }
    };
    let summary = Summary {
        scenario: sc.name.clone(),
        seed,
        t: sc.rounds,
        delta: sc.delta,
        cum_regret: transcript.cum_regret,
        theorem1_rhs: bounds.theorem1_rhs,
        beta_bound: bounds.beta_bound,
        beta_empirical: transcript.ledger.cumulative_loss.first().copied().unwrap_or(0.0),
        alpha_bound: bounds.alpha_bound,
        alpha_empirical: transcript.ledger.cumulative_optimism,
        violations: transcript.violations,
    };
    Ok(RunOutput { max_dec: transcript.max_dec, transcript, summary })
}

/// The regret table of one run as CSV text.
pub fn regret_csv(t: &E2DTranscript) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(CSV_HEADER).map_err(io)?;
    for r in &t.rounds {
        w.write_record([
            r.t.to_string(),
            r.action.to_string(),
            r.outcome.clone(),
            r.reward.to_string(),
            r.inst_regret.to_string(),
            r.cum_regret.to_string(),
            r.inacc_ledger.to_string(),
            r.opt_ledger.to_string(),
            r.surviving.len().to_string(),
            r.star.map(|s| s.to_string()).unwrap_or_default(),
            r.flags.join("|"),
        ])
        .map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

/// Cross-seed summary of one scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub beta_budget: f64,
    pub dec_reference: f64,
    pub theorem4_reference: Option<f64>,
    pub mean_cum_regret: f64,
    pub beta_violation_rate: f64,
    pub alpha_violation_rate: f64,
    pub theorem1_violation_rate: f64,
    pub errors: Vec<String>,
}

pub struct Experiment {
    pub aggregate: Aggregate,
    pub runs: Vec<RunOutput>,
    pub files: Vec<PathBuf>,
}

/// Runs `seeds` consecutive seeds from `seed_base`, writing one CSV and one JSON per seed plus an
/// aggregate JSON into `out_dir`. Runs that stop early still produce their partial reports and are
/// listed in `aggregate.errors`.
pub fn run_experiment(sc: &Scenario, out_dir: &Path, seeds: Option<usize>, seed_base: Option<u64>) -> Result<Experiment> {
    sc.validate()?;
    let setup = Setup::build(sc)?;
    let bounds = Bounds::compute(sc, &setup)?;
    let n = seeds.unwrap_or(sc.seeds);
    let base = seed_base.unwrap_or(sc.seed_base);
    let seed_list: Vec<u64> = (0..n as u64).map(|i| base + i).collect();
    let runs = seed_list.par_iter().map(|&s| run_seed(sc, &setup, &bounds, s)).collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::Io(format!("{}: {e}", out_dir.display())))?;
    let write = |path: PathBuf, text: &str| -> Result<PathBuf> {
        std::fs::write(&path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Ok(path)
    };
    let mut files = Vec::new();
    let mut errors = Vec::new();
    for run in &runs {
        let stem = format!("{}_seed{}", sc.name, run.summary.seed);
        files.push(write(out_dir.join(format!("{stem}.csv")), &regret_csv(&run.transcript)?)?);
        let json = serde_json::to_string_pretty(&run.summary).map_err(|e| Error::Io(e.to_string()))?;
        files.push(write(out_dir.join(format!("{stem}.json")), &json)?);
        if let Some(e) = &run.transcript.error {
            errors.push(format!("seed {}: {e}", run.summary.seed));
        }
    }
    let k = runs.len().max(1) as f64;
    let rate = |f: &dyn Fn(&Summary) -> bool| runs.iter().filter(|r| f(&r.summary)).count() as f64 / k;
    let aggregate = Aggregate {
        scenario: sc.name.clone(),
        seeds: seed_list,
        beta_budget: bounds.beta_budget,
        dec_reference: bounds.dec_reference,
        theorem4_reference: bounds.theorem4_reference,
        mean_cum_regret: runs.iter().map(|r| r.summary.cum_regret).sum::<f64>() / k,
        beta_violation_rate: rate(&|s| s.beta_empirical > s.beta_bound),
        alpha_violation_rate: rate(&|s| s.alpha_empirical > s.alpha_bound),
        theorem1_violation_rate: rate(&|s| s.cum_regret > s.theorem1_rhs),
        errors,
    };
    let json = serde_json::to_string_pretty(&aggregate).map_err(|e| Error::Io(e.to_string()))?;
    files.push(write(out_dir.join(format!("{}_aggregate.json", sc.name)), &json)?);
    Ok(Experiment { aggregate, runs, files })
}
