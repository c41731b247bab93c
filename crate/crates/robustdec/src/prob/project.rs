//! Hellinger projection onto imprecise beliefs and the asymmetric set distance.
//!
//! The affinity `A(mu) = max over nu in Phi of sum sqrt(mu nu)` is concave, so
//! `D^2(mu -> Phi) = 1 - A(mu)` is convex. Its gradient is `sqrt(nu*/mu) / 2`.

use super::belief::{vertex_project, Backend, ImpreciseBelief};
use super::{bhattacharyya, Dist};
use crate::error::{check_dim, Error, Result};
use nalgebra::DMatrix;
use rand::Rng;

/// Affinity value, maximizer and (optionally) the Hessian of the affinity.
#[derive(Clone, Debug)]
pub(crate) struct Affinity {
    pub value: f64,
    pub point: Vec<f64>,
    pub hess: Option<DMatrix<f64>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub point: Dist,
    pub dist_sq: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AsymDist {
    pub value: f64,
    /// True when the value comes from sampling and is only a lower bound.
    pub lower_bound_only: bool,
}

/// Point at angle `step` from `sqrt(a)` towards `sqrt(b)` on the unit sphere,
/// where `theta` is the angle between them; returned squared.
pub(crate) fn slerp(a: &[f64], b: &[f64], theta: f64, step: f64) -> Vec<f64> {
    let s = theta.sin();
    let (wa, wb) = ((theta - step).sin() / s, step.sin() / s);
    let v: Vec<f64> = a.iter().zip(b).map(|(x, y)| (wa * x.max(0.0).sqrt() + wb * y.max(0.0).sqrt()).powi(2)).collect();
    Dist::from_raw(v).into_vec()
}

impl ImpreciseBelief {
    /// Affinity of `t` (a distribution) against this set.
    pub(crate) fn affinity(&self, t: &[f64], want_hess: bool) -> Result<Affinity> {
        check_dim(self.dim(), t.len())?;
        let n = t.len();
        let point = match self.backend() {
            Backend::Singleton(nu) => {
                let hess = want_hess.then(|| {
                    DMatrix::from_fn(n, n, |i, j| if i == j && t[i] > 0.0 { -0.25 * nu[i].sqrt() * t[i].powf(-1.5) } else { 0.0 })
                });
                return Ok(Affinity { value: bhattacharyya(t, nu), point: nu.clone(), hess });
            }
            Backend::FullSimplex => {
                return Ok(Affinity { value: t.iter().sum(), point: t.to_vec(), hess: want_hess.then(|| DMatrix::zeros(n, n)) });
            }
            Backend::Halfspace(h) => return Ok(h.slice.project(t, want_hess)),
            Backend::LinearConstraints(p) => {
                if let Some(s) = &p.cache.shortcut {
                    return Ok(s.project(t, want_hess));
                }
                if self.contains_tol(t, 1e-12) {
                    t.to_vec()
                } else {
                    p.cache.project(t).ok_or_else(|| Error::Solver("polytope projection failed".into()))?
                }
            }
            Backend::VertexSet(vs) => vertex_project(vs, t).ok_or_else(|| Error::Solver("vertex-set projection failed".into()))?,
            Backend::Fattened { base, eps } => return fattened_affinity(base, *eps, t, want_hess),
        };
        let value = bhattacharyya(t, &point);
        let hess = if want_hess { Some(self.fd_hessian(t)?) } else { None };
        Ok(Affinity { value, point, hess })
    }

    /// Affinity with a Hessian, computed by finite differences where no closed form exists.
    pub(crate) fn affinity_with_hess(&self, t: &[f64]) -> Result<Affinity> {
        self.affinity(t, true)
    }

    fn gradient_at(&self, mu: &[f64]) -> Result<Vec<f64>> {
        let s: f64 = mu.iter().sum();
        let t: Vec<f64> = mu.iter().map(|x| x / s).collect();
        let a = self.affinity(&t, false)?;
        Ok(mu.iter().zip(&a.point).map(|(m, v)| 0.5 * (v / m).sqrt()).collect())
    }

    fn fd_hessian(&self, t: &[f64]) -> Result<DMatrix<f64>> {
        let n = t.len();
        let mut h = DMatrix::zeros(n, n);
        if t.iter().any(|x| *x <= 0.0) {
            return Ok(h);
        }
        for j in 0..n {
            let step = (1e-5 * t[j]).max(1e-9);
            let mut up = t.to_vec();
            up[j] += step;
            let mut dn = t.to_vec();
            dn[j] -= step;
            let gu = self.gradient_at(&up)?;
            let gd = self.gradient_at(&dn)?;
            for i in 0..n {
                h[(i, j)] = (gu[i] - gd[i]) / (2.0 * step);
            }
        }
        Ok((&h + h.transpose()) * 0.5)
    }
}

fn fattened_affinity(base: &ImpreciseBelief, eps: f64, t: &[f64], want_hess: bool) -> Result<Affinity> {
    let n = t.len();
    let inner = base.affinity(t, want_hess)?;
    let theta_e = (1.0 - eps * eps).clamp(-1.0, 1.0).acos();
    let a = inner.value.clamp(-1.0, 1.0);
    let theta_n = a.acos();
    if theta_n <= theta_e {
        return Ok(Affinity { value: t.iter().sum(), point: t.to_vec(), hess: want_hess.then(|| DMatrix::zeros(n, n)) });
    }
    let point = slerp(&inner.point, t, theta_n, theta_e);
    let value = (theta_n - theta_e).cos();
    let hess = match inner.hess {
        Some(hb) if want_hess => {
            let sin_n = theta_n.sin();
            let d1 = theta_e.cos() - a * theta_e.sin() / sin_n;
            let d2 = -theta_e.sin() / sin_n.powi(3);
            let g: Vec<f64> = (0..n).map(|o| if t[o] > 0.0 { 0.5 * (inner.point[o] / t[o]).sqrt() } else { 0.0 }).collect();
            Some(DMatrix::from_fn(n, n, |i, j| d1 * hb[(i, j)] + d2 * g[i] * g[j]))
        }
        _ => None,
    };
    Ok(Affinity { value, point, hess })
}

/// Closest member of `phi` to `target` in Hellinger distance.
pub fn hellinger_project(target: &Dist, phi: &ImpreciseBelief) -> Result<Projection> {
    let a = phi.affinity(target.probs(), false)?;
    Ok(Projection { point: Dist::from_raw(a.point), dist_sq: (1.0 - a.value).clamp(0.0, 1.0) })
}

/// `D^2(psi -> phi)` for a left argument that exposes its extreme points.
pub fn asym_dist_sq(psi: &ImpreciseBelief, phi: &ImpreciseBelief) -> Result<f64> {
    check_dim(phi.dim(), psi.dim())?;
    let vs = psi
        .vertices()
        .ok_or_else(|| Error::UnsupportedBackend("left argument does not expose extreme points".into()))?;
    let mut worst: f64 = 0.0;
    for v in vs {
        worst = worst.max(hellinger_project(&Dist::from_raw(v), phi)?.dist_sq);
    }
    Ok(worst)
}

/// `D^2(psi -> phi)`, exact for vertex-exposing `psi`, otherwise a lower bound
/// from `draws` seeded members of `psi`.
pub fn asym_dist_sq_sampled<R: Rng + ?Sized>(psi: &ImpreciseBelief, phi: &ImpreciseBelief, draws: usize, rng: &mut R) -> Result<AsymDist> {
    if psi.vertices().is_some() {
        return Ok(AsymDist { value: asym_dist_sq(psi, phi)?, lower_bound_only: false });
    }
    check_dim(phi.dim(), psi.dim())?;
    let mut worst: f64 = 0.0;
    for _ in 0..draws {
        let mu = psi.sample_member(rng)?;
        worst = worst.max(hellinger_project(&mu, phi)?.dist_sq);
    }
    Ok(AsymDist { value: worst, lower_bound_only: true })
}
