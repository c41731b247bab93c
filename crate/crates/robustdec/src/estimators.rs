//! The robust universal estimator (a prediction market over bettors), its
//! prior, instrumentation ledgers and the covering/fattening wrapper.

use crate::dec::{Model, ModelClass, RewardFn};
use crate::error::{check_dim, Error, Result};
use crate::prob::{minimize_mixture, Dist, ImpreciseBelief, MixTerm};
use serde::{Deserialize, Serialize};

/// Deviation of the unnormalized total from 1 that is tolerated silently.
pub const STAR_WARN: f64 = 1e-4;
/// Deviation that is treated as a solver failure.
pub const STAR_FAIL: f64 = 1e-3;
pub const DEFAULT_EPS_PRIME: f64 = 0.001;
/// Estimates with a coordinate below this are flagged as touching the boundary.
pub const BOUNDARY_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BettorId {
    Model(String),
    Pessimism,
    Uniform,
}

/// Bettor weights, ordered as the class models, then pessimism, then uniform.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketState {
    ids: Vec<BettorId>,
    weights: Vec<f64>,
    round: usize,
    eps_bet: f64,
}

impl MarketState {
    pub fn ids(&self) -> &[BettorId] {
        &self.ids
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, id: &BettorId) -> Option<f64> {
        self.ids.iter().position(|b| b == id).map(|i| self.weights[i])
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn eps_bet(&self) -> f64 {
        self.eps_bet
    }

    fn n_models(&self) -> usize {
        self.ids.len() - 2
    }

    fn pessimism(&self) -> f64 {
        self.weights[self.ids.len() - 2]
    }

    fn uniform(&self) -> f64 {
        self.weights[self.ids.len() - 1]
    }
}

/// `eps_bet = min(1/2, sqrt(ln 2 / T))`.
pub fn eps_bet(horizon: usize) -> f64 {
    (std::f64::consts::LN_2 / horizon.max(1) as f64).sqrt().min(0.5)
}

/// Models get `1/(2|H|)` each, pessimism `1/2 - eps_prime`, uniform `eps_prime`.
pub fn build_prior(h: &ModelClass, eps_prime: f64, horizon: usize) -> Result<MarketState> {
    if !(eps_prime > 0.0 && eps_prime < 0.5) {
        return Err(Error::InvalidParameter(format!("eps_prime {eps_prime} must lie in (0, 1/2)")));
    }
    let n = h.len();
    let mut ids: Vec<BettorId> = h.models().iter().map(|m| BettorId::Model(m.label().to_string())).collect();
    ids.extend([BettorId::Pessimism, BettorId::Uniform]);
    let mut weights = vec![1.0 / (2.0 * n as f64); n];
    weights.extend([0.5 - eps_prime, eps_prime]);
    Ok(MarketState { ids, weights, round: 0, eps_bet: eps_bet(horizon) })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RueEstimate {
    pub dist: Dist,
    /// Stationarity residual; bounds `|star - 1|` for every outcome.
    pub residual: f64,
    pub touches_boundary: bool,
}

fn uniform_belief(n: usize) -> ImpreciseBelief {
    ImpreciseBelief::singleton(Dist::uniform(n))
}

/// Minimizer over the simplex of the weighted bettor objective at action `a`.
pub fn rue_estimate(zeta: &MarketState, h: &ModelClass, a: usize, r: &RewardFn) -> Result<RueEstimate> {
    check_dim(zeta.n_models(), h.len())?;
    if zeta.uniform() <= 0.0 {
        return Err(Error::MarketDegenerate("uniform bettor has no weight".into()));
    }
    let n = r.n_outcomes();
    let unif = uniform_belief(n);
    let mut terms: Vec<MixTerm> = h
        .models()
        .iter()
        .zip(&zeta.weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(m, w)| MixTerm { weight: *w, belief: m.arm(a) })
        .collect();
    terms.push(MixTerm { weight: zeta.uniform(), belief: &unif });
    let linear: Vec<f64> = r.row(a).iter().map(|x| zeta.pessimism() * zeta.eps_bet * x).collect();
    let sol = minimize_mixture(&terms, &linear, None)?;
    let touches_boundary = sol.mu.min_prob() < BOUNDARY_TOL;
    Ok(RueEstimate { dist: sol.mu, residual: sol.residual, touches_boundary })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RueUpdate {
    pub state: MarketState,
    /// Unnormalized total of weighted bets.
    pub star: f64,
    /// Bet factor per bettor, in market order.
    pub bets: Vec<f64>,
    /// `|star - 1|` exceeded the warning tolerance.
    pub star_flag: bool,
}

/// Pays out each bettor after outcome `o` at action `a` and renormalizes.
pub fn rue_update(zeta: &MarketState, h: &ModelClass, mhat_a: &Dist, a: usize, o: usize, r: &RewardFn) -> Result<RueUpdate> {
    check_dim(zeta.n_models(), h.len())?;
    check_dim(r.n_outcomes(), mhat_a.len())?;
    let n = mhat_a.len();
    let m_o = mhat_a.probs()[o];
    if m_o <= 0.0 {
        return Err(Error::MarketDegenerate("estimate gives the observed outcome zero probability".into()));
    }
    let mut bets = Vec::with_capacity(zeta.ids.len());
    let sqrt_bet = |belief: &ImpreciseBelief| -> Result<f64> {
        let aff = belief.affinity(mhat_a.probs(), false)?;
        Ok((aff.point[o] / m_o).sqrt() + (1.0 - aff.value).clamp(0.0, 1.0))
    };
    for (m, w) in h.models().iter().zip(&zeta.weights) {
        bets.push(if *w > 0.0 { sqrt_bet(m.arm(a))? } else { 1.0 });
    }
    let expected = mhat_a.expect(r.row(a))?;
    bets.push(1.0 + zeta.eps_bet * (expected - r.get(a, o)));
    bets.push(sqrt_bet(&uniform_belief(n))?);
    if let Some(b) = bets.iter().find(|b| !(**b >= 0.0)) {
        return Err(Error::Invariant(format!("negative bet {b}")));
    }
    let star: f64 = zeta.weights.iter().zip(&bets).map(|(w, b)| w * b).sum();
    if (star - 1.0).abs() > STAR_FAIL {
        return Err(Error::SolverQuality { star });
    }
    let weights = zeta.weights.iter().zip(&bets).map(|(w, b)| w * b / star).collect();
    let state = MarketState { ids: zeta.ids.clone(), weights, round: zeta.round + 1, eps_bet: zeta.eps_bet };
    Ok(RueUpdate { state, star, bets, star_flag: (star - 1.0).abs() > STAR_WARN })
}

/// `a -> {mu : D_H(mu -> N(a)) <= eps}`.
pub fn fatten_model(n: &Model, eps: f64) -> Result<Model> {
    let arms = n.arms().iter().map(|b| ImpreciseBelief::fattened(b.clone(), eps)).collect::<Result<Vec<_>>>()?;
    Model::new(n.label(), arms)
}

/// Running expected loss per tracked model and running expected optimism.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EstimationLedger {
    pub cumulative_loss: Vec<f64>,
    pub cumulative_optimism: f64,
}

impl EstimationLedger {
    pub fn new(tracked: usize) -> Self {
        Self { cumulative_loss: vec![0.0; tracked], cumulative_optimism: 0.0 }
    }

    /// Adds one round: `loss[i][a]` per tracked model, `fbar(a) - f_theta(a)` for optimism.
    pub fn record(&mut self, p: &[f64], loss: &[Vec<f64>], fbar: &[f64], f_theta: &[f64]) {
        for (acc, row) in self.cumulative_loss.iter_mut().zip(loss) {
            *acc += p.iter().zip(row).map(|(a, b)| a * b).sum::<f64>();
        }
        self.cumulative_optimism += p.iter().zip(fbar.iter().zip(f_theta)).map(|(q, (b, t))| q * (b - t)).sum::<f64>();
    }
}

/// `ln(2|H| / delta)`.
pub fn rue_beta_bound(class_size: usize, delta: f64) -> f64 {
    (2.0 * class_size as f64 / delta).ln()
}

/// `sqrt(T) (2 sqrt(ln 2) + sqrt(2 ln(1/delta)))`.
pub fn rue_alpha_bound(horizon: usize, delta: f64) -> f64 {
    (horizon as f64).sqrt() * (2.0 * std::f64::consts::LN_2.sqrt() + (2.0 * (1.0 / delta).ln()).sqrt())
}

/// `2 ln(2 N / delta) + 8 T eps^2` for RUE over an `eps`-fattened cover of size `N`.
pub fn cover_beta_bound(cover_size: usize, delta: f64, horizon: usize, eps: f64) -> f64 {
    2.0 * (2.0 * cover_size as f64 / delta).ln() + 8.0 * horizon as f64 * eps * eps
}

/// RUE as an online estimator for a bandit with outcome observations.
#[derive(Clone, Debug)]
pub struct RueBandit {
    market_class: ModelClass,
    decision_class: ModelClass,
    tracked: Vec<Model>,
    r: RewardFn,
    loss: crate::dec::LossFn,
    state: MarketState,
    current: Vec<Dist>,
}

impl RueBandit {
    /// `market_class` backs the bettors; losses are reported against
    /// `decision_class` (for filtering) and `tracked` (for instrumentation).
    pub fn new(market_class: ModelClass, decision_class: ModelClass, tracked: Vec<Model>, r: RewardFn, eps_prime: f64, horizon: usize) -> Result<Self> {
        let state = build_prior(&market_class, eps_prime, horizon)?;
        Ok(Self { market_class, decision_class, tracked, r, loss: crate::dec::LossFn::HellingerSq, state, current: Vec::new() })
    }

    pub fn state(&self) -> &MarketState {
        &self.state
    }
}

impl crate::e2d::OnlineEstimator for RueBandit {
    type Obs = usize;

    fn estimate(&mut self) -> Result<crate::e2d::RoundEstimate> {
        let na = self.r.n_actions();
        let mut flags = Vec::new();
        let mut dists = Vec::with_capacity(na);
        for a in 0..na {
            let e = rue_estimate(&self.state, &self.market_class, a, &self.r)?;
            if e.touches_boundary {
                flags.push("boundary".to_string());
            }
            dists.push(e.dist);
        }
        let belief = crate::dec::Belief::Precise(dists.clone());
        let fbar = belief.values(&self.r)?;
        let losses = |models: &[Model]| -> Result<Vec<Vec<f64>>> {
            models.iter().map(|m| (0..na).map(|a| self.loss.eval(&belief, m, a)).collect()).collect()
        };
        let class_loss = losses(self.decision_class.models())?;
        let tracked_loss = losses(&self.tracked)?;
        self.current = dists.clone();
        Ok(crate::e2d::RoundEstimate { fbar, class_loss, tracked_loss, public: Some(dists), flags })
    }

    fn observe(&mut self, action: usize, obs: &usize, _rng: &mut dyn rand::RngCore) -> Result<crate::e2d::ObserveInfo> {
        let mhat = self.current.get(action).ok_or_else(|| Error::Precondition("observe called before estimate".into()))?;
        let up = rue_update(&self.state, &self.market_class, mhat, action, *obs, &self.r)?;
        let flags = if up.star_flag { vec!["star".to_string()] } else { Vec::new() };
        self.state = up.state;
        Ok(crate::e2d::ObserveInfo { star: Some(up.star), flags })
    }
}
