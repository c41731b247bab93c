//! Estimations-to-decisions: play the fuzzy-DEC minimizing action
//! distribution against the current estimate, filter hypotheses whose
//! cumulative expected loss exceeds the estimator's budget.

use crate::dec::{fuzzy_dec_table, Belief, DecTable, FuzzyDec, GammaBracket, LossFn, Model, RewardFn};
use crate::envs::Environment;
use crate::error::{Error, Result};
use crate::estimators::EstimationLedger;
use crate::prob::Dist;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// RNG stream ids derived from one run seed.
pub const STREAM_ACTIONS: u64 = 0;
pub const STREAM_ENV: u64 = 1;
pub const STREAM_ESTIMATOR: u64 = 2;

pub fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One round of estimator output, already reduced to what the decision rule needs.
#[derive(Clone, Debug, Default)]
pub struct RoundEstimate {
    /// `f^{Mhat}(a)` per action.
    pub fbar: Vec<f64>,
    /// `loss[model][action]` for the decision class.
    pub class_loss: Vec<Vec<f64>>,
    /// `loss[model][action]` for each designated true model.
    pub tracked_loss: Vec<Vec<f64>>,
    /// Per-action estimate, visible to environments with the public scope.
    pub public: Option<Vec<Dist>>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ObserveInfo {
    pub star: Option<f64>,
    pub flags: Vec<String>,
}

pub trait OnlineEstimator {
    type Obs;
    fn estimate(&mut self) -> Result<RoundEstimate>;
    fn observe(&mut self, action: usize, obs: &Self::Obs, rng: &mut dyn rand::RngCore) -> Result<ObserveInfo>;
}

#[derive(Clone, Debug)]
pub struct E2DConfig {
    pub horizon: usize,
    pub delta: f64,
    pub beta_budget: f64,
    pub gamma_bracket: GammaBracket,
}

impl E2DConfig {
    pub fn new(horizon: usize, delta: f64, beta_budget: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!("delta {delta} outside (0, 1)")));
        }
        if !(beta_budget > 0.0) {
            return Err(Error::InvalidParameter("beta budget must be positive".into()));
        }
        Ok(Self { horizon, delta, beta_budget, gamma_bracket: GammaBracket::default() })
    }

    /// `eps^2 = beta / T`.
    pub fn eps_sq(&self) -> f64 {
        self.beta_budget / self.horizon.max(1) as f64
    }
}

/// Static facts about the decision class and the true model.
#[derive(Clone, Debug)]
pub struct Problem {
    pub class_maxf: Vec<f64>,
    pub true_maxf: f64,
    /// Index of the true model inside the decision class, if it is a member.
    pub true_index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub p: Dist,
    pub dec: Option<FuzzyDec>,
    pub degenerate: bool,
}

/// Fuzzy-DEC minimizer over the surviving rows of `table`; uniform if none survive.
pub fn select_policy_table(table: &DecTable, surviving: &[usize], eps_sq: f64, bracket: GammaBracket) -> Result<Selection> {
    if surviving.is_empty() {
        return Ok(Selection { p: Dist::uniform(table.n_actions()), dec: None, degenerate: true });
    }
    let sub = DecTable::new(
        surviving.iter().map(|&m| table.maxf[m]).collect(),
        table.fbar.clone(),
        surviving.iter().map(|&m| table.loss[m].clone()).collect(),
    )?;
    let fz = fuzzy_dec_table(&sub, eps_sq.max(0.0).sqrt(), bracket)?;
    Ok(Selection { p: fz.p.clone(), dec: Some(fz), degenerate: false })
}

/// Decision rule for an explicit (possibly empty) surviving class.
pub fn select_policy(h_t: &[Model], mbar: &Belief, eps_sq: f64, loss: &LossFn, r: &RewardFn) -> Result<Selection> {
    if h_t.is_empty() {
        return Ok(Selection { p: Dist::uniform(r.n_actions()), dec: None, degenerate: true });
    }
    let class = crate::dec::ModelClass::new(h_t.to_vec())?;
    let table = DecTable::build(&class, mbar, loss, r)?;
    let all: Vec<usize> = (0..h_t.len()).collect();
    select_policy_table(&table, &all, eps_sq, GammaBracket::default())
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub p: Vec<f64>,
    pub action: usize,
    pub outcome: String,
    pub reward: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    pub inacc_ledger: f64,
    pub opt_ledger: f64,
    pub surviving: Vec<usize>,
    pub star: Option<f64>,
    pub dec: Option<f64>,
    pub flags: Vec<String>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct E2DTranscript {
    pub rounds: Vec<RoundRecord>,
    pub cum_regret: f64,
    pub sampled_regret: f64,
    pub ledger: EstimationLedger,
    /// Final filter ledger per decision-class model.
    pub filter_ledger: Vec<f64>,
    pub max_dec: f64,
    pub violations: usize,
    /// Set when the run stopped early on an error.
    pub error: Option<String>,
}

/// Runs Algorithm-1 style E2D for `config.horizon` rounds. Errors inside a
/// round end the run and are reported in the transcript.
pub fn run_e2d<E, V>(config: &E2DConfig, problem: &Problem, estimator: &mut E, env: &mut V, seed: u64) -> E2DTranscript
where
    E: OnlineEstimator,
    V: Environment<Obs = E::Obs>,
{
    let mut action_rng = stream(seed, STREAM_ACTIONS);
    let mut env_rng = stream(seed, STREAM_ENV);
    let mut est_rng = stream(seed, STREAM_ESTIMATOR);
    let n_models = problem.class_maxf.len();
    let mut out = E2DTranscript { filter_ledger: vec![0.0; n_models], ..Default::default() };
    let mut surviving: Vec<usize> = (0..n_models).collect();
    for t in 0..config.horizon {
        let step = (|| -> Result<RoundRecord> {
            let est = estimator.estimate()?;
            let mut flags = est.flags.clone();
            let table = DecTable::new(problem.class_maxf.clone(), est.fbar.clone(), est.class_loss.clone())?;
            let sel = select_policy_table(&table, &surviving, config.eps_sq(), config.gamma_bracket)?;
            if sel.degenerate {
                flags.push("empty-class".into());
            }
            let f_theta = env.realize(t, est.public.as_deref(), &mut env_rng)?;
            let p = sel.p.probs().to_vec();
            let action = sel.p.sample_index(action_rng.random::<f64>());
            let resp = env.respond(action, &mut env_rng)?;
            if resp.violation {
                flags.push("violation".into());
                out.violations += 1;
            }
            let info = estimator.observe(action, &resp.obs, &mut est_rng)?;
            flags.extend(info.flags);
            let expected: f64 = p.iter().zip(&f_theta).map(|(a, b)| a * b).sum();
            let inst_regret = problem.true_maxf - expected;
            out.cum_regret += inst_regret;
            out.sampled_regret += problem.true_maxf - resp.reward;
            if out.ledger.cumulative_loss.is_empty() {
                out.ledger = EstimationLedger::new(est.tracked_loss.len());
            }
            out.ledger.record(&p, &est.tracked_loss, &est.fbar, &f_theta);
            for (m, acc) in out.filter_ledger.iter_mut().enumerate() {
                *acc += p.iter().zip(&est.class_loss[m]).map(|(a, b)| a * b).sum::<f64>();
            }
            surviving = (0..n_models).filter(|&m| out.filter_ledger[m] <= config.beta_budget).collect();
            let dec = sel.dec.as_ref().map(|d| d.value);
            if let Some(d) = dec {
                out.max_dec = out.max_dec.max(d);
            }
            Ok(RoundRecord {
                t: t + 1,
                p,
                action,
                outcome: resp.label,
                reward: resp.reward,
                inst_regret,
                cum_regret: out.cum_regret,
                inacc_ledger: out.ledger.cumulative_loss.first().copied().unwrap_or(0.0),
                opt_ledger: out.ledger.cumulative_optimism,
                surviving: surviving.clone(),
                star: info.star,
                dec,
                flags,
            })
        })();
        match step {
            Ok(rec) => out.rounds.push(rec),
            Err(e) => {
                out.error = Some(format!("round {}: {e}", t + 1));
                break;
            }
        }
    }
    out
}

/// `2 T dec + alpha + 2 T delta`.
pub fn theorem1_rhs(horizon: usize, dec: f64, alpha: f64, delta: f64) -> f64 {
    let t = horizon as f64;
    2.0 * t * dec + alpha + 2.0 * t * delta
}
