//! Halfspace `{E[g] >= c}` and hyperplane `{E[g] = c}` slices of the simplex.
//!
//! The Hellinger projection onto a slice has the form
//! `nu(o) ∝ t(o) / (1 - rho * g(o))^2` with `g` rescaled to `[0, 1]`, so the
//! problem reduces to a monotone scalar root in `rho`. Targets without full
//! support may instead push leftover mass onto the coordinates where `g` is
//! maximal.

use super::project::Affinity;
use crate::error::{Error, Result};
use nalgebra::{DMatrix, Matrix2, Vector2};

const EDGE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) struct Slice {
    pub g: Vec<f64>,
    pub c: f64,
    pub eq: bool,
    shape: Shape,
}

#[derive(Clone, Debug)]
enum Shape {
    Whole,
    Proper { gn: Vec<f64>, cn: f64 },
    Face(Vec<usize>),
}

impl Slice {
    pub fn new(g: Vec<f64>, c: f64, eq: bool) -> Result<Self> {
        if g.iter().any(|v| !v.is_finite()) || !c.is_finite() {
            return Err(Error::InvalidParameter("slice coefficients must be finite".into()));
        }
        let gmin = g.iter().cloned().fold(f64::INFINITY, f64::min);
        let gmax = g.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = gmax - gmin;
        let tol = 1e-12 * (1.0 + gmax.abs().max(gmin.abs()));
        let empty = || Error::EmptyBelief(format!("no distribution satisfies E[g] {} {c}", if eq { "=" } else { ">=" }));
        let shape = if span <= tol {
            let ok = if eq { (gmin - c).abs() <= tol } else { gmin >= c - tol };
            if !ok {
                return Err(empty());
            }
            Shape::Whole
        } else {
            let gn: Vec<f64> = g.iter().map(|v| (v - gmin) / span).collect();
            let cn = (c - gmin) / span;
            let face = |top: bool| -> Vec<usize> {
                (0..gn.len()).filter(|&o| if top { gn[o] >= 1.0 - EDGE } else { gn[o] <= EDGE }).collect()
            };
            if cn > 1.0 + EDGE || (eq && cn < -EDGE) {
                return Err(empty());
            }
            if cn >= 1.0 - EDGE {
                Shape::Face(face(true))
            } else if eq && cn <= EDGE {
                Shape::Face(face(false))
            } else if !eq && cn <= 0.0 {
                Shape::Whole
            } else {
                Shape::Proper { gn, cn }
            }
        };
        Ok(Self { g, c, eq, shape })
    }

    pub fn contains(&self, mu: &[f64], tol: f64) -> bool {
        let e: f64 = mu.iter().zip(&self.g).map(|(a, b)| a * b).sum();
        if self.eq {
            (e - self.c).abs() <= tol
        } else {
            e >= self.c - tol
        }
    }

    /// Projection of a normalized target, optionally with the Hessian of the affinity.
    pub fn project(&self, t: &[f64], want_hess: bool) -> Affinity {
        let n = t.len();
        match &self.shape {
            Shape::Whole => Affinity { value: t.iter().sum(), point: t.to_vec(), hess: want_hess.then(|| DMatrix::zeros(n, n)) },
            Shape::Face(z) => face_project(t, z, want_hess),
            Shape::Proper { gn, cn } => {
                let e: f64 = t.iter().zip(gn).map(|(a, b)| a * b).sum();
                if (!self.eq && e >= *cn) || (self.eq && e == *cn) {
                    return Affinity { value: t.iter().sum(), point: t.to_vec(), hess: want_hess.then(|| DMatrix::zeros(n, n)) };
                }
                if self.eq && e > *cn {
                    let flipped: Vec<f64> = gn.iter().map(|v| 1.0 - v).collect();
                    active_project(t, &flipped, 1.0 - cn, want_hess)
                } else {
                    active_project(t, gn, *cn, want_hess)
                }
            }
        }
    }
}

fn face_project(t: &[f64], z: &[usize], want_hess: bool) -> Affinity {
    let n = t.len();
    let tz: f64 = z.iter().map(|&o| t[o]).sum();
    let mut point = vec![0.0; n];
    if tz > 0.0 {
        for &o in z {
            point[o] = t[o] / tz;
        }
    } else {
        for &o in z {
            point[o] = 1.0 / z.len() as f64;
        }
    }
    let hess = want_hess.then(|| {
        let mut h = DMatrix::zeros(n, n);
        if tz > 0.0 {
            let k = -0.25 * tz.powf(-1.5);
            for &i in z {
                for &j in z {
                    h[(i, j)] = k;
                }
            }
        }
        h
    });
    Affinity { value: tz.sqrt(), point, hess }
}

struct Family<'a> {
    t: &'a [f64],
    g: &'a [f64],
}

impl Family<'_> {
    /// `(mean of g, derivative of the mean in rho)` at `rho`, over the support of `t`.
    fn mean(&self, rho: f64) -> (f64, f64) {
        let (mut w, mut gw, mut dw, mut gdw) = (0.0, 0.0, 0.0, 0.0);
        for (t, g) in self.t.iter().zip(self.g) {
            if *t > 0.0 {
                let u = 1.0 - rho * g;
                let wo = t / (u * u);
                let dwo = 2.0 * g * wo / u;
                w += wo;
                gw += g * wo;
                dw += dwo;
                gdw += g * dwo;
            }
        }
        let m = gw / w;
        (m, gdw / w - m * dw / w)
    }
}

fn active_project(t: &[f64], g: &[f64], c: f64, want_hess: bool) -> Affinity {
    let n = t.len();
    let fam = Family { t, g };
    let has_top = t.iter().zip(g).any(|(t, g)| *t > 0.0 && *g >= 1.0 - EDGE);
    let rho_of = |v: f64| -(-v).exp_m1();
    if !has_top {
        let (m1, _) = fam.mean(1.0);
        if m1 < c {
            return zero_support_project(t, g, c, m1);
        }
    }
    // Root of mean(rho(v)) = c for v = -ln(1 - rho) in [0, VMAX].
    const VMAX: f64 = 300.0;
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while fam.mean(rho_of(hi)).0 < c && hi < VMAX {
        lo = hi;
        hi = (hi * 2.0).min(VMAX);
    }
    let mut v = 0.5 * (lo + hi);
    for _ in 0..200 {
        let rho = rho_of(v);
        let (m, dm) = fam.mean(rho);
        let r = m - c;
        if r == 0.0 {
            break;
        }
        if r < 0.0 {
            lo = v;
        } else {
            hi = v;
        }
        let dv = dm * (1.0 - rho);
        let mut next = if dv > 0.0 { v - r / dv } else { f64::NAN };
        if !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - v).abs() <= 1e-15 * (1.0 + v) || hi - lo <= 1e-15 * (1.0 + hi) {
            v = next;
            break;
        }
        v = next;
    }
    let rho = rho_of(v);
    let mut w = vec![0.0; n];
    let mut total = 0.0;
    for o in 0..n {
        if t[o] > 0.0 {
            let u = 1.0 - rho * g[o];
            w[o] = t[o] / (u * u);
            total += w[o];
        }
    }
    let point: Vec<f64> = w.iter().map(|x| x / total).collect();
    let value = t.iter().zip(&point).map(|(a, b)| (a * b).sqrt()).sum();
    let hess = if want_hess && t.iter().all(|x| *x > 0.0) {
        let lambda = 0.5 * total.sqrt();
        let d: Vec<f64> = g.iter().map(|gi| lambda * (1.0 - rho * gi)).collect();
        let (mut g11, mut g12, mut g22) = (0.0, 0.0, 0.0);
        for o in 0..n {
            let k = t[o] / (2.0 * d[o].powi(3));
            g11 += k;
            g12 -= k * g[o];
            g22 += k * g[o] * g[o];
        }
        let gm = Matrix2::new(g11, g12, g12, g22);
        gm.try_inverse().map(|ginv| {
            let jrows: Vec<Vector2<f64>> =
                (0..n).map(|o| Vector2::new(-1.0 / (4.0 * d[o] * d[o]), g[o] / (4.0 * d[o] * d[o]))).collect();
            DMatrix::from_fn(n, n, |i, j| -(jrows[i].transpose() * ginv * jrows[j])[(0, 0)])
        })
    } else {
        None
    };
    Affinity { value, point, hess }
}

/// Target has no mass where `g` is maximal and cannot reach `c` on its own support.
fn zero_support_project(t: &[f64], g: &[f64], c: f64, m1: f64) -> Affinity {
    let n = t.len();
    let top: Vec<usize> = (0..n).filter(|&o| g[o] >= 1.0 - EDGE).collect();
    let share = ((1.0 - c) / (1.0 - m1)).clamp(0.0, 1.0);
    let mut w = vec![0.0; n];
    let mut total = 0.0;
    for o in 0..n {
        if t[o] > 0.0 {
            let u = 1.0 - g[o];
            w[o] = t[o] / (u * u);
            total += w[o];
        }
    }
    let mut point: Vec<f64> = w.iter().map(|x| share * x / total).collect();
    for &o in &top {
        point[o] += (1.0 - share) / top.len() as f64;
    }
    let value = t.iter().zip(&point).map(|(a, b)| (a * b).sqrt()).sum();
    Affinity { value, point, hess: None }
}
