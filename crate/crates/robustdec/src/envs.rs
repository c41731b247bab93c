//! Environments consistent with a model, including adversarial strategies.

use crate::dec::{Model, RewardFn};
use crate::error::{check_dim, Error, Result};
use crate::prob::{hellinger_project, Dist, MEMBER_TOL};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq)]
pub enum EnvMode {
    WorstCaseStationary,
    RandomVertex,
    HellingerProjectionAdversary,
    /// Per-round, per-action distributions, cycled.
    Scripted(Vec<Vec<Dist>>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scope {
    #[default]
    ActionsOnly,
    PlusPublicEstimates,
}

#[derive(Clone, Debug)]
pub struct EnvStrategy {
    pub mode: EnvMode,
    pub model: Model,
    pub scope: Scope,
}

/// What nature may look at when choosing.
#[derive(Clone, Copy, Debug, Default)]
pub struct Context<'a> {
    pub round: usize,
    pub public_estimate: Option<&'a Dist>,
}

impl EnvStrategy {
    pub fn new(mode: EnvMode, model: Model, scope: Scope) -> Result<Self> {
        if mode == EnvMode::HellingerProjectionAdversary && scope == Scope::ActionsOnly {
            return Err(Error::Config("projection adversary needs the public-estimate scope".into()));
        }
        if let EnvMode::Scripted(script) = &mode {
            if script.is_empty() {
                return Err(Error::Config("scripted environment needs at least one round".into()));
            }
            for row in script {
                check_dim(model.n_actions(), row.len())?;
            }
        }
        Ok(Self { mode, model, scope })
    }
}

/// Nature's distribution for action `a` under `strategy`.
pub fn adversary_choose<R: Rng + ?Sized>(strategy: &EnvStrategy, a: usize, ctx: Context, r: &RewardFn, rng: &mut R) -> Result<Dist> {
    let arm = strategy.model.arm(a);
    match &strategy.mode {
        EnvMode::WorstCaseStationary => Ok(arm.worst_case_expectation(r.row(a))?.1),
        EnvMode::RandomVertex => match arm.vertices() {
            Some(vs) => {
                let i = rng.random_range(0..vs.len());
                Ok(Dist::from_weights(&vs[i])?)
            }
            None => arm.sample_member(rng),
        },
        EnvMode::HellingerProjectionAdversary => {
            if strategy.scope == Scope::ActionsOnly {
                return Err(Error::Config("projection adversary needs the public-estimate scope".into()));
            }
            let est = ctx.public_estimate.ok_or_else(|| Error::Config("no public estimate supplied".into()))?;
            Ok(hellinger_project(est, arm)?.point)
        }
        EnvMode::Scripted(script) => Ok(script[ctx.round % script.len()][a].clone()),
    }
}

/// Membership of `dist` in `model(a)`.
pub fn check_consistency(dist: &Dist, model: &Model, a: usize) -> bool {
    model.arm(a).contains_tol(dist.probs(), MEMBER_TOL)
}

/// What the environment reveals after an action.
#[derive(Clone, Debug, PartialEq)]
pub struct Response<O> {
    pub obs: O,
    pub reward: f64,
    pub label: String,
    /// The emitted distribution failed the consistency monitor.
    pub violation: bool,
}

/// A history-dependent environment observed through one action per round.
pub trait Environment {
    type Obs;
    /// Fixes nature's choice for round `t` and returns `f^{theta_t}(a)` for every action.
    fn realize(&mut self, t: usize, public: Option<&[Dist]>, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>>;
    fn respond(&mut self, action: usize, rng: &mut dyn rand::RngCore) -> Result<Response<Self::Obs>>;
}

/// A bandit whose per-round outcome distributions come from an [`EnvStrategy`].
#[derive(Clone, Debug)]
pub struct BanditEnv {
    strategy: EnvStrategy,
    r: RewardFn,
    labels: Vec<String>,
    stationary: Option<Vec<Dist>>,
    current: Vec<Dist>,
}

impl BanditEnv {
    pub fn new(strategy: EnvStrategy, r: RewardFn, labels: Vec<String>) -> Result<Self> {
        check_dim(r.n_actions(), strategy.model.n_actions())?;
        check_dim(r.n_outcomes(), labels.len())?;
        Ok(Self { strategy, r, labels, stationary: None, current: Vec::new() })
    }

    pub fn current(&self) -> &[Dist] {
        &self.current
    }
}

impl Environment for BanditEnv {
    type Obs = usize;

    fn realize(&mut self, t: usize, public: Option<&[Dist]>, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        let na = self.r.n_actions();
        if self.strategy.mode == EnvMode::WorstCaseStationary {
            if self.stationary.is_none() {
                let ctx = Context { round: t, public_estimate: None };
                self.stationary = Some((0..na).map(|a| adversary_choose(&self.strategy, a, ctx, &self.r, rng)).collect::<Result<_>>()?);
            }
            self.current = self.stationary.clone().unwrap_or_default();
        } else {
            let public = if self.strategy.scope == Scope::PlusPublicEstimates { public } else { None };
            self.current = (0..na)
                .map(|a| adversary_choose(&self.strategy, a, Context { round: t, public_estimate: public.map(|p| &p[a]) }, &self.r, rng))
                .collect::<Result<_>>()?;
        }
        self.current.iter().enumerate().map(|(a, d)| d.expect(self.r.row(a))).collect()
    }

    fn respond(&mut self, action: usize, rng: &mut dyn rand::RngCore) -> Result<Response<usize>> {
        let dist = &self.current[action];
        let o = dist.sample_index(rng.random::<f64>());
        Ok(Response {
            obs: o,
            reward: self.r.get(action, o),
            label: self.labels[o].clone(),
            violation: !check_consistency(dist, &self.strategy.model, action),
        })
    }
}
