//! Minimizer of weighted squared Hellinger distances to a collection of
//! beliefs plus a linear term, over the simplex.
//!
//! `F(mu) = sum_B w_B * 2 D^2(mu -> Phi_B) + <l, mu>`, solved by damped
//! Newton in the tangent space of the simplex.

use super::project::Projection;
use super::{dot, Dist, ImpreciseBelief};
use crate::error::{check_dim, Error, Result};
use crate::solve::linalg::{null_space, solve_spd};
use nalgebra::{DMatrix, DVector};

#[derive(Clone, Copy, Debug)]
pub struct MixTerm<'a> {
    pub weight: f64,
    pub belief: &'a ImpreciseBelief,
}

#[derive(Clone, Debug)]
pub struct MixSolution {
    pub mu: Dist,
    pub value: f64,
    /// `max_o |dF/dmu_o - E_mu[dF/dmu]|`, zero at the exact optimum.
    pub residual: f64,
    /// Projection of `mu` onto each term's belief, in input order.
    pub projections: Vec<Projection>,
    pub iterations: usize,
}

const RESIDUAL_TOL: f64 = 1e-11;
const MAX_ITERS: usize = 200;

struct Eval {
    value: f64,
    grad: Vec<f64>,
    hess: Option<DMatrix<f64>>,
    points: Vec<(Vec<f64>, f64)>,
}

fn evaluate(terms: &[MixTerm], linear: &[f64], mu: &[f64], want_hess: bool) -> Result<Eval> {
    let n = mu.len();
    let mut value = dot(linear, mu);
    let mut grad = linear.to_vec();
    let mut hess = want_hess.then(|| DMatrix::zeros(n, n));
    let mut points = Vec::with_capacity(terms.len());
    for term in terms {
        let a = term.belief.affinity(mu, want_hess)?;
        value += 2.0 * term.weight * (1.0 - a.value);
        for o in 0..n {
            grad[o] -= term.weight * (a.point[o] / mu[o]).sqrt();
        }
        if let (Some(h), Some(ha)) = (hess.as_mut(), a.hess.as_ref()) {
            *h -= ha * (2.0 * term.weight);
        }
        points.push((a.point, a.value));
    }
    Ok(Eval { value, grad, hess, points })
}

fn residual(mu: &[f64], grad: &[f64]) -> f64 {
    let mean = dot(mu, grad);
    grad.iter().map(|g| (g - mean).abs()).fold(0.0, f64::max)
}

/// Minimizes `F` starting from `start` (uniform if `None`). Requires at
/// least one term with positive weight and full-support strictly concave
/// affinity to keep the minimizer interior; otherwise the result may sit on
/// the boundary and the residual reports how far it is from stationarity.
pub fn minimize_mixture(terms: &[MixTerm], linear: &[f64], start: Option<&[f64]>) -> Result<MixSolution> {
    let n = linear.len();
    if n == 0 {
        return Err(Error::InvalidParameter("outcome space is empty".into()));
    }
    for t in terms {
        check_dim(n, t.belief.dim())?;
        if !(t.weight >= 0.0 && t.weight.is_finite()) {
            return Err(Error::InvalidParameter(format!("mixture weight {} is not a nonnegative number", t.weight)));
        }
    }
    let mut mu = match start {
        Some(s) => {
            check_dim(n, s.len())?;
            let floor = 1e-9;
            Dist::from_raw(s.iter().map(|x| x.max(floor)).collect()).into_vec()
        }
        None => vec![1.0 / n as f64; n],
    };
    let basis = null_space(n, &[vec![1.0; n]]);
    let scale = 1.0 + terms.iter().map(|t| t.weight).sum::<f64>();
    let mut iterations = 0;
    let mut cur = evaluate(terms, linear, &mu, true)?;
    while n > 1 && iterations < MAX_ITERS {
        if residual(&mu, &cur.grad) < RESIDUAL_TOL * scale {
            break;
        }
        iterations += 1;
        let g = DVector::from_column_slice(&cur.grad);
        let h = cur.hess.take().unwrap_or_else(|| DMatrix::zeros(n, n));
        let hy = basis.transpose() * &h * &basis;
        let gy = basis.transpose() * &g;
        let d = match solve_spd(&hy, &(-&gy)) {
            Some(d) => &basis * d,
            None => -(&basis * gy),
        };
        let mut slope = g.dot(&d);
        let d = if slope >= 0.0 {
            // Not a descent direction (indefinite numerical Hessian): use the projected gradient.
            let pg = -(&basis * (basis.transpose() * &g));
            slope = g.dot(&pg);
            pg
        } else {
            d
        };
        let mut alpha: f64 = 1.0;
        for o in 0..n {
            if d[o] < 0.0 {
                alpha = alpha.min(-0.99 * mu[o] / d[o]);
            }
        }
        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<f64> = (0..n).map(|o| mu[o] + alpha * d[o]).collect();
            if trial.iter().all(|x| *x > 0.0) {
                let e = evaluate(terms, linear, &trial, true)?;
                let noise = 1e-13 * (1.0 + cur.value.abs());
                if e.value <= cur.value + 0.25 * alpha * slope + noise {
                    accepted = Some((trial, e));
                    break;
                }
            }
            alpha *= 0.5;
        }
        match accepted {
            Some((trial, e)) => {
                mu = trial;
                cur = e;
            }
            None => break,
        }
    }
    let res = residual(&mu, &cur.grad);
    let projections = cur
        .points
        .into_iter()
        .map(|(p, a)| Projection { point: Dist::from_raw(p), dist_sq: (1.0 - a).clamp(0.0, 1.0) })
        .collect();
    let s: f64 = mu.iter().sum();
    let mu = Dist::from_raw(mu.into_iter().map(|x| x / s).collect());
    Ok(MixSolution { mu, value: cur.value, residual: res, projections, iterations })
}
