//! Imprecise beliefs: nonempty closed convex sets of distributions.

use super::slice::Slice;
use super::{dot, Dist};
use crate::error::{check_dim, Error, Result};
use crate::solve::barrier::{self, BarrierOptions};
use crate::solve::linalg::{enumerate_vertices, null_space, rank};
use crate::solve::lp::{Cmp, LinearProgram, LpOutcome};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::Exp1;
use std::sync::OnceLock;

/// Tolerance used by membership tests on linear constraints.
pub const MEMBER_TOL: f64 = 1e-8;
const PRESOLVE_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct ImpreciseBelief {
    dim: usize,
    backend: Backend,
}

#[derive(Clone, Debug)]
pub enum Backend {
    VertexSet(Vec<Vec<f64>>),
    LinearConstraints(Polytope),
    Halfspace(Halfspace),
    Fattened { base: Box<ImpreciseBelief>, eps: f64 },
    Singleton(Vec<f64>),
    FullSimplex,
}

/// `{mu : E_mu[g] >= c}`.
#[derive(Clone, Debug)]
pub struct Halfspace {
    pub(crate) slice: Slice,
}

impl Halfspace {
    pub fn g(&self) -> &[f64] {
        &self.slice.g
    }
    pub fn c(&self) -> f64 {
        self.slice.c
    }
}

/// Rows `coeff . mu >= lower` intersected with the simplex.
#[derive(Clone, Debug)]
pub struct Polytope {
    rows: Vec<(Vec<f64>, f64)>,
    pub(crate) cache: PolyCache,
}

impl Polytope {
    pub fn rows(&self) -> &[(Vec<f64>, f64)] {
        &self.rows
    }
}

#[derive(Clone, Debug)]
pub(crate) struct PolyCache {
    /// Equalities implied by the system (including unit mass and fixed-zero coordinates).
    eqs: Vec<(Vec<f64>, f64)>,
    /// Inequalities that can be active, plus positivity of coordinates not fixed at zero.
    ineqs: Vec<(Vec<f64>, f64)>,
    zero_coords: Vec<usize>,
    interior: Vec<f64>,
    basis: DMatrix<f64>,
    pub(crate) shortcut: Option<Slice>,
    vertices: OnceLock<Vec<Vec<f64>>>,
}

fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

fn simplex_lp(n: usize, objective: Vec<f64>, rows: &[(Vec<f64>, f64)]) -> LinearProgram {
    let mut lp = LinearProgram::new(objective);
    lp.constrain(vec![1.0; n], Cmp::Eq, 1.0);
    for (c, b) in rows {
        lp.constrain(c.clone(), Cmp::Ge, *b);
    }
    lp
}

impl ImpreciseBelief {
    pub fn singleton(mu: Dist) -> Self {
        Self { dim: mu.len(), backend: Backend::Singleton(mu.into_vec()) }
    }

    pub fn full_simplex(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("outcome space is empty".into()));
        }
        Ok(Self { dim: n, backend: Backend::FullSimplex })
    }

    pub fn vertex_set(vertices: Vec<Dist>) -> Result<Self> {
        let first = vertices.first().ok_or_else(|| Error::EmptyBelief("vertex list is empty".into()))?;
        let n = first.len();
        for v in &vertices {
            check_dim(n, v.len())?;
        }
        Ok(Self { dim: n, backend: Backend::VertexSet(vertices.into_iter().map(Dist::into_vec).collect()) })
    }

    /// `{mu : E_mu[g] >= c}`.
    pub fn halfspace(g: Vec<f64>, c: f64) -> Result<Self> {
        let n = g.len();
        if n == 0 {
            return Err(Error::InvalidParameter("outcome space is empty".into()));
        }
        Ok(Self { dim: n, backend: Backend::Halfspace(Halfspace { slice: Slice::new(g, c, false)? }) })
    }

    /// Rows `coeff . mu >= lower` intersected with the simplex; nonemptiness is checked.
    pub fn linear_constraints(n: usize, rows: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("outcome space is empty".into()));
        }
        for (c, b) in &rows {
            check_dim(n, c.len())?;
            if c.iter().any(|v| !v.is_finite()) || !b.is_finite() {
                return Err(Error::InvalidParameter("constraint rows must be finite".into()));
            }
        }
        let cache = presolve(n, &rows)?;
        Ok(Self { dim: n, backend: Backend::LinearConstraints(Polytope { rows, cache }) })
    }

    /// `{mu : D_H(mu -> base) <= eps}`.
    pub fn fattened(base: ImpreciseBelief, eps: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eps) {
            return Err(Error::InvalidParameter(format!("fattening radius {eps} outside [0, 1]")));
        }
        Ok(Self { dim: base.dim, backend: Backend::Fattened { base: Box::new(base), eps } })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn backend(&self) -> &Backend {
        &self.backend
    }

    pub fn is_vertex_exposing(&self) -> bool {
        !matches!(self.backend, Backend::Fattened { .. })
    }

    /// Extreme points for polyhedral backends; `None` for fattened sets.
    pub fn vertices(&self) -> Option<Vec<Vec<f64>>> {
        let n = self.dim;
        match &self.backend {
            Backend::VertexSet(v) => Some(v.clone()),
            Backend::Singleton(mu) => Some(vec![mu.clone()]),
            Backend::FullSimplex => Some((0..n).map(|i| unit(n, i)).collect()),
            Backend::Halfspace(h) => {
                let eqs = vec![(vec![1.0; n], 1.0)];
                let mut ineqs: Vec<(Vec<f64>, f64)> = (0..n).map(|i| (unit(n, i), 0.0)).collect();
                ineqs.push((h.slice.g.clone(), h.slice.c));
                Some(clean(enumerate_vertices(n, &eqs, &ineqs, 1e-10)))
            }
            Backend::LinearConstraints(p) => Some(
                p.cache
                    .vertices
                    .get_or_init(|| clean(enumerate_vertices(n, &p.cache.eqs, &p.cache.ineqs, 1e-10)))
                    .clone(),
            ),
            Backend::Fattened { .. } => None,
        }
    }

    pub fn contains(&self, mu: &Dist) -> bool {
        self.contains_tol(mu.probs(), MEMBER_TOL)
    }

    /// Membership with absolute tolerance `tol` on linear constraints.
    pub fn contains_tol(&self, mu: &[f64], tol: f64) -> bool {
        if mu.len() != self.dim || mu.iter().any(|p| *p < -tol) || (mu.iter().sum::<f64>() - 1.0).abs() > tol {
            return false;
        }
        match &self.backend {
            Backend::FullSimplex => true,
            Backend::Singleton(nu) => mu.iter().zip(nu).all(|(a, b)| (a - b).abs() <= tol),
            Backend::Halfspace(h) => h.slice.contains(mu, tol),
            Backend::LinearConstraints(p) => p.rows.iter().all(|(c, b)| dot(c, mu) >= b - tol),
            Backend::VertexSet(vs) => vertex_hull_residual(vs, mu) <= tol,
            Backend::Fattened { base, eps } => {
                let a = base.affinity(mu, false).map(|a| a.value).unwrap_or(0.0);
                1.0 - a <= eps * eps + tol
            }
        }
    }

    /// `min over mu in self of E_mu[f]` with a minimizing member.
    pub fn worst_case_expectation(&self, f: &[f64]) -> Result<(f64, Dist)> {
        check_dim(self.dim, f.len())?;
        let n = self.dim;
        match &self.backend {
            Backend::Singleton(mu) => Ok((dot(mu, f), Dist::from_raw(mu.clone()))),
            Backend::FullSimplex => {
                let i = argmin(f);
                Ok((f[i], Dist::point(n, i)))
            }
            Backend::VertexSet(vs) => {
                let vals: Vec<f64> = vs.iter().map(|v| dot(v, f)).collect();
                let i = argmin(&vals);
                Ok((vals[i], Dist::from_raw(vs[i].clone())))
            }
            Backend::Halfspace(h) => lp_min(n, f, &[(h.slice.g.clone(), h.slice.c)]),
            Backend::LinearConstraints(p) => lp_min(n, f, &p.rows),
            Backend::Fattened { base, eps } => {
                if *eps == 0.0 {
                    base.worst_case_expectation(f)
                } else {
                    fattened_min(base, *eps, f)
                }
            }
        }
    }

    /// A seeded random member: a Dirichlet mixture of vertices, or the
    /// projection of a Dirichlet draw for fattened sets.
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dist> {
        match self.vertices() {
            Some(vs) => {
                let w = dirichlet(rng, vs.len());
                let mut mu = vec![0.0; self.dim];
                for (v, wi) in vs.iter().zip(&w) {
                    for (m, x) in mu.iter_mut().zip(v) {
                        *m += wi * x;
                    }
                }
                Ok(Dist::from_raw(mu))
            }
            None => {
                let d = dirichlet(rng, self.dim);
                Ok(Dist::from_raw(self.affinity(&d, false)?.point))
            }
        }
    }
}

pub(crate) fn dirichlet<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(Exp1) + 1e-300).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

fn argmin(v: &[f64]) -> usize {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] < v[best] - 1e-12 {
            best = i;
        }
    }
    best
}

fn clean(vs: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    vs.into_iter()
        .map(|v| Dist::from_raw(v.into_iter().map(|x| if x.abs() < 1e-13 { 0.0 } else { x }).collect()).into_vec())
        .collect()
}

fn lp_min(n: usize, f: &[f64], rows: &[(Vec<f64>, f64)]) -> Result<(f64, Dist)> {
    match simplex_lp(n, f.to_vec(), rows).solve() {
        LpOutcome::Optimal { x, value } => Ok((value, Dist::from_raw(x))),
        LpOutcome::Infeasible => Err(Error::Solver("belief became infeasible".into())),
        LpOutcome::Unbounded => Err(Error::Solver("bounded program reported unbounded".into())),
    }
}

/// L1 distance from `mu` to the convex hull of `vs`.
fn vertex_hull_residual(vs: &[Vec<f64>], mu: &[f64]) -> f64 {
    let k = vs.len();
    let n = mu.len();
    // Variables: w (k), e+ (n), e- (n).
    let mut obj = vec![0.0; k];
    obj.extend(std::iter::repeat_n(1.0, 2 * n));
    let mut lp = LinearProgram::new(obj);
    let mut mass = vec![1.0; k];
    mass.extend(std::iter::repeat_n(0.0, 2 * n));
    lp.constrain(mass, Cmp::Eq, 1.0);
    for o in 0..n {
        let mut row: Vec<f64> = vs.iter().map(|v| v[o]).collect();
        row.extend((0..n).map(|j| if j == o { 1.0 } else { 0.0 }));
        row.extend((0..n).map(|j| if j == o { -1.0 } else { 0.0 }));
        lp.constrain(row, Cmp::Eq, mu[o]);
    }
    lp.solve().optimal().map(|(_, v)| v).unwrap_or(f64::INFINITY)
}

fn presolve(n: usize, rows: &[(Vec<f64>, f64)]) -> Result<PolyCache> {
    let feasible = simplex_lp(n, vec![0.0; n], rows).solve();
    if !matches!(feasible, LpOutcome::Optimal { .. }) {
        return Err(Error::EmptyBelief("linear constraints have no member in the simplex".into()));
    }
    let mut eqs = vec![(vec![1.0; n], 1.0)];
    let mut ineqs = Vec::new();
    let mut witnesses: Vec<Vec<f64>> = Vec::new();
    let mut proper_rows = Vec::new();
    for (c, b) in rows {
        let (xmax, vmax) = simplex_lp(n, c.iter().map(|v| -v).collect(), rows)
            .solve()
            .optimal()
            .ok_or_else(|| Error::Solver("presolve program failed".into()))?;
        let (_, vmin) = simplex_lp(n, c.clone(), rows)
            .solve()
            .optimal()
            .ok_or_else(|| Error::Solver("presolve program failed".into()))?;
        if -vmax <= b + PRESOLVE_TOL {
            eqs.push((c.clone(), *b));
        } else if vmin <= b + PRESOLVE_TOL {
            ineqs.push((c.clone(), *b));
            proper_rows.push((c.clone(), *b));
            witnesses.push(xmax);
        }
    }
    let mut zero_coords = Vec::new();
    for o in 0..n {
        let e = unit(n, o);
        let (xmax, vmax) = simplex_lp(n, e.iter().map(|v| -v).collect(), rows)
            .solve()
            .optimal()
            .ok_or_else(|| Error::Solver("presolve program failed".into()))?;
        if -vmax <= PRESOLVE_TOL {
            zero_coords.push(o);
            eqs.push((e, 0.0));
        } else {
            ineqs.push((e, 0.0));
            witnesses.push(xmax);
        }
    }
    let mut interior = vec![0.0; n];
    if witnesses.is_empty() {
        if let LpOutcome::Optimal { x, .. } = feasible {
            interior = x;
        }
    } else {
        for w in &witnesses {
            for (i, x) in interior.iter_mut().zip(w) {
                *i += x / witnesses.len() as f64;
            }
        }
    }
    let eq_rows: Vec<Vec<f64>> = eqs.iter().map(|e| e.0.clone()).collect();
    let basis = null_space(n, &eq_rows);
    // A single proper halfspace, or a single extra equality, has a closed-form projection.
    let shortcut = if zero_coords.is_empty() {
        let extra_rank = rank(&eq_rows) - 1;
        if proper_rows.is_empty() && extra_rank == 1 {
            let (g, c) = eqs[1..]
                .iter()
                .find(|(r, _)| rank(&[vec![1.0; n], r.clone()]) == 2)
                .cloned()
                .expect("rank-two equality system has a non-constant row");
            Slice::new(g, c, true).ok()
        } else if proper_rows.len() == 1 && extra_rank == 0 {
            Slice::new(proper_rows[0].0.clone(), proper_rows[0].1, false).ok()
        } else if proper_rows.is_empty() && extra_rank == 0 {
            Slice::new(vec![0.0; n], 0.0, false).ok()
        } else {
            None
        }
    } else {
        None
    };
    Ok(PolyCache { eqs, ineqs, zero_coords, interior, basis, shortcut, vertices: OnceLock::new() })
}

impl PolyCache {
    /// Generic Hellinger projection by log-barrier path following.
    pub(crate) fn project(&self, t: &[f64]) -> Option<Vec<f64>> {
        let n = t.len();
        let active: Vec<usize> = (0..n).filter(|o| t[*o] > 0.0 && !self.zero_coords.contains(o)).collect();
        let x0 = DVector::from_column_slice(&self.interior);
        let ineqs = &self.ineqs;
        let x = barrier::minimize(&x0, &self.basis, ineqs.len() as f64, &BarrierOptions::default(), |x, s| {
            let mut val = 0.0;
            let mut g = DVector::zeros(n);
            let mut h = DMatrix::zeros(n, n);
            for (c, b) in ineqs {
                let slack = dot(c, x.as_slice()) - b;
                if slack <= 0.0 {
                    return None;
                }
                val -= slack.ln() / s;
                for i in 0..n {
                    g[i] -= c[i] / (s * slack);
                    for j in 0..n {
                        h[(i, j)] += c[i] * c[j] / (s * slack * slack);
                    }
                }
            }
            for &o in &active {
                if x[o] <= 0.0 {
                    return None;
                }
                let r = (t[o] * x[o]).sqrt();
                val -= r;
                g[o] -= 0.5 * r / x[o];
                h[(o, o)] += 0.25 * r / (x[o] * x[o]);
            }
            Some((val, g, h))
        })?;
        Some(Dist::from_raw(x.iter().cloned().collect()).into_vec())
    }
}

/// Generic Hellinger projection onto the hull of `vs`, solved over mixture weights.
pub(crate) fn vertex_project(vs: &[Vec<f64>], t: &[f64]) -> Option<Vec<f64>> {
    let k = vs.len();
    let n = t.len();
    if k == 1 {
        return Some(vs[0].clone());
    }
    let active: Vec<usize> = (0..n).filter(|&o| t[o] > 0.0 && vs.iter().any(|v| v[o] > 0.0)).collect();
    let x0 = DVector::from_element(k, 1.0 / k as f64);
    let basis = null_space(k, &[vec![1.0; k]]);
    let w = barrier::minimize(&x0, &basis, k as f64, &BarrierOptions::default(), |w, s| {
        if w.iter().any(|x| *x <= 0.0) {
            return None;
        }
        let mut val = 0.0;
        let mut g = DVector::zeros(k);
        let mut h = DMatrix::zeros(k, k);
        for i in 0..k {
            val -= w[i].ln() / s;
            g[i] -= 1.0 / (s * w[i]);
            h[(i, i)] += 1.0 / (s * w[i] * w[i]);
        }
        for &o in &active {
            let nu: f64 = (0..k).map(|i| vs[i][o] * w[i]).sum();
            if nu <= 0.0 {
                return None;
            }
            let st = t[o].sqrt();
            val -= st * nu.sqrt();
            let d1 = 0.5 * st / nu.sqrt();
            let d2 = 0.25 * st / (nu * nu.sqrt());
            for i in 0..k {
                g[i] -= d1 * vs[i][o];
                for j in 0..k {
                    h[(i, j)] += d2 * vs[i][o] * vs[j][o];
                }
            }
        }
        Some((val, g, h))
    })?;
    let mut nu = vec![0.0; n];
    for i in 0..k {
        for o in 0..n {
            nu[o] += w[i].max(0.0) * vs[i][o];
        }
    }
    Some(Dist::from_raw(nu).into_vec())
}

/// `min E_mu[f]` over the Hellinger fattening of `base` by a log barrier on
/// the convex constraint `D^2(mu -> base) <= eps^2`.
fn fattened_min(base: &ImpreciseBelief, eps: f64, f: &[f64]) -> Result<(f64, Dist)> {
    let n = base.dim;
    let eps_sq = eps * eps;
    let uniform = vec![1.0 / n as f64; n];
    let anchor = base.affinity(&uniform, false)?;
    let theta_b = anchor.value.clamp(-1.0, 1.0).acos();
    let theta_e = (1.0 - eps_sq).clamp(-1.0, 1.0).acos();
    let step = 0.5 * theta_e.min(theta_b);
    let start = if theta_b <= 1e-12 { uniform.clone() } else { super::project::slerp(&anchor.point, &uniform, theta_b, step) };
    let x0 = DVector::from_column_slice(&start);
    let basis = null_space(n, &[vec![1.0; n]]);
    let x = barrier::minimize(&x0, &basis, (n + 1) as f64, &BarrierOptions::default(), |x, s| {
        if x.iter().any(|v| *v <= 0.0) {
            return None;
        }
        let aff = base.affinity_with_hess(x.as_slice()).ok()?;
        let slack = eps_sq - 1.0 + aff.value;
        if slack <= 0.0 {
            return None;
        }
        let grad_a: Vec<f64> = (0..n).map(|o| 0.5 * (aff.point[o] / x[o]).sqrt()).collect();
        let ha = aff.hess?;
        let mut val = dot(f, x.as_slice()) - slack.ln() / s;
        let mut g = DVector::from_column_slice(f);
        let mut h = DMatrix::zeros(n, n);
        for o in 0..n {
            val -= x[o].ln() / s;
            g[o] -= 1.0 / (s * x[o]) + grad_a[o] / (s * slack);
            h[(o, o)] += 1.0 / (s * x[o] * x[o]);
            for j in 0..n {
                h[(o, j)] += -ha[(o, j)] / (s * slack) + grad_a[o] * grad_a[j] / (s * slack * slack);
            }
        }
        Some((val, g, h))
    })
    .ok_or_else(|| Error::Solver("fattened worst-case expectation did not converge".into()))?;
    let mu = Dist::from_raw(x.iter().cloned().collect());
    let value = dot(mu.probs(), f);
    Ok((value, mu))
}
