//! Finite-space probability primitives, Hellinger geometry and imprecise beliefs.

mod belief;
mod mixture;
mod project;
mod slice;

pub use belief::{Backend, Halfspace, ImpreciseBelief, Polytope, MEMBER_TOL};
pub(crate) use belief::dirichlet;
pub use mixture::{minimize_mixture, MixTerm, MixSolution};
pub use project::{asym_dist_sq, asym_dist_sq_sampled, hellinger_project, AsymDist, Projection};

use crate::error::{check_dim, Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance on the total mass of a distribution.
pub const SUM_TOL: f64 = 1e-9;

/// Ordered, labelled finite outcome space.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeSpace {
    labels: Vec<String>,
}

impl OutcomeSpace {
    pub fn new(labels: Vec<String>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::InvalidParameter("outcome space needs at least one label".into()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(Error::InvalidParameter(format!("duplicate outcome label `{l}`")));
            }
        }
        Ok(Self { labels })
    }

    /// Space labelled `0..n`.
    pub fn indexed(n: usize) -> Result<Self> {
        Self::new((0..n).map(|i| i.to_string()).collect())
    }

    pub fn size(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> &str {
        &self.labels[i]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

/// Probability vector over a finite space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dist {
    probs: Vec<f64>,
}

impl Dist {
    /// Validates nonnegativity and unit mass (within [`SUM_TOL`]).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidDist("empty probability vector".into()));
        }
        let mut probs = probs;
        for p in probs.iter_mut() {
            if !p.is_finite() || *p < -SUM_TOL {
                return Err(Error::InvalidDist(format!("entry {p} is negative or not finite")));
            }
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SUM_TOL {
            return Err(Error::InvalidDist(format!("mass {total} is not 1")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights.
    pub fn from_weights(weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || total <= 0.0 {
            return Err(Error::InvalidDist("weights must be nonnegative with positive total".into()));
        }
        Ok(Self { probs: weights.iter().map(|w| w / total).collect() })
    }

    /// Builds from a vector known to be on the simplex up to rounding; clamps and renormalizes.
    pub(crate) fn from_raw(mut probs: Vec<f64>) -> Self {
        for p in probs.iter_mut() {
            if *p < 0.0 || !p.is_finite() {
                *p = 0.0;
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 0.0 {
            for p in probs.iter_mut() {
                *p /= total;
            }
        }
        Self { probs }
    }

    pub fn uniform(n: usize) -> Self {
        Self { probs: vec![1.0 / n as f64; n] }
    }

    pub fn point(n: usize, i: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[i] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn expect(&self, f: &[f64]) -> Result<f64> {
        check_dim(self.len(), f.len())?;
        Ok(dot(&self.probs, f))
    }

    /// `lambda * self + (1 - lambda) * other`.
    pub fn mix(&self, other: &Dist, lambda: f64) -> Result<Dist> {
        check_dim(self.len(), other.len())?;
        Ok(Dist::from_raw(
            self.probs.iter().zip(&other.probs).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect(),
        ))
    }

    pub fn min_prob(&self) -> f64 {
        self.probs.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Inverse-CDF sample from a uniform draw `u` in `[0, 1)`.
    pub fn sample_index(&self, u: f64) -> usize {
        let mut acc = 0.0;
        let mut last = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > 0.0 {
                last = i;
                acc += p;
                if u < acc {
                    return i;
                }
            }
        }
        last
    }
}

/// Sub-probability vector (total mass at most one).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubDist {
    mass: Vec<f64>,
}

impl SubDist {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.iter().any(|m| !m.is_finite() || *m < 0.0) {
            return Err(Error::InvalidDist("sub-distribution entries must be nonnegative".into()));
        }
        let total: f64 = mass.iter().sum();
        if total > 1.0 + SUM_TOL {
            return Err(Error::InvalidDist(format!("sub-distribution mass {total} exceeds 1")));
        }
        Ok(Self { mass })
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().sum()
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Bhattacharyya coefficient `sum_o sqrt(mu(o) nu(o))`.
pub fn bhattacharyya(mu: &[f64], nu: &[f64]) -> f64 {
    mu.iter().zip(nu).map(|(a, b)| (a.max(0.0) * b.max(0.0)).sqrt()).sum()
}

/// Squared Hellinger distance `1 - sum_o sqrt(mu(o) nu(o))`.
pub fn hellinger_sq(mu: &Dist, nu: &Dist) -> Result<f64> {
    check_dim(mu.len(), nu.len())?;
    Ok(hellinger_sq_raw(mu.probs(), nu.probs()))
}

pub(crate) fn hellinger_sq_raw(mu: &[f64], nu: &[f64]) -> f64 {
    (1.0 - bhattacharyya(mu, nu)).clamp(0.0, 1.0)
}

/// Gradient of `nu -> hellinger_sq(mu, nu)` at an interior `nu`: `-(1/2) sqrt(mu/nu)`.
pub fn hellinger_grad_nu(mu: &Dist, nu: &Dist) -> Result<Vec<f64>> {
    check_dim(mu.len(), nu.len())?;
    Ok(mu
        .probs()
        .iter()
        .zip(nu.probs())
        .map(|(m, n)| -0.5 * (m / n.max(1e-12)).sqrt())
        .collect())
}
