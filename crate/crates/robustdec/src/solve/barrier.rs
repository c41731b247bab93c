//! Log-barrier path following with damped Newton centering.
//!
//! Variables are parametrized as `x = x0 + basis * y` so linear equalities are
//! eliminated up front. The caller's closure evaluates
//! `phi(x) + barrier(x) / s` together with its gradient and Hessian in `x`,
//! returning `None` outside the barrier domain.

use super::linalg::solve_spd;
use nalgebra::{DMatrix, DVector};

pub type Eval = (f64, DVector<f64>, DMatrix<f64>);

#[derive(Clone, Debug)]
pub struct BarrierOptions {
    pub s0: f64,
    pub growth: f64,
    pub gap_tol: f64,
    pub max_newton: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self { s0: 1.0, growth: 12.0, gap_tol: 1e-12, max_newton: 80 }
    }
}

/// Minimizes along the central path. `n_terms` is the number of barrier terms
/// (the duality gap at parameter `s` is `n_terms / s`).
pub fn minimize<F>(x0: &DVector<f64>, basis: &DMatrix<f64>, n_terms: f64, opts: &BarrierOptions, mut eval: F) -> Option<DVector<f64>>
where
    F: FnMut(&DVector<f64>, f64) -> Option<Eval>,
{
    let k = basis.ncols();
    let mut x = x0.clone();
    eval(&x, opts.s0)?;
    if k == 0 {
        return Some(x);
    }
    let mut s = opts.s0;
    loop {
        for _ in 0..opts.max_newton {
            let (v, g, h) = eval(&x, s)?;
            let gy = basis.transpose() * &g;
            let hy = basis.transpose() * &h * basis;
            let Some(d) = solve_spd(&hy, &(-&gy)) else { break };
            let decrement = -gy.dot(&d);
            if !decrement.is_finite() || decrement <= 1e-15 * (1.0 + v.abs()) {
                break;
            }
            let dx = basis * &d;
            let mut alpha = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial = &x + &dx * alpha;
                if let Some((tv, _, _)) = eval(&trial, s) {
                    if tv <= v - 0.25 * alpha * decrement {
                        x = trial;
                        moved = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !moved || decrement < 1e-13 {
                break;
            }
        }
        if n_terms / s < opts.gap_tol {
            return Some(x);
        }
        s *= opts.growth;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_objective_on_simplex() {
        // min x0 + 2 x1 + 3 x2 over the simplex: optimum at e0.
        let x0 = DVector::from_vec(vec![1.0 / 3.0; 3]);
        let basis = crate::solve::linalg::null_space(3, &[vec![1.0; 3]]);
        let c = [1.0, 2.0, 3.0];
        let x = minimize(&x0, &basis, 3.0, &BarrierOptions::default(), |x, s| {
            if x.iter().any(|v| *v <= 0.0) {
                return None;
            }
            let val = (0..3).map(|i| c[i] * x[i] - x[i].ln() / s).sum();
            let g = DVector::from_iterator(3, (0..3).map(|i| c[i] - 1.0 / (s * x[i])));
            let h = DMatrix::from_diagonal(&DVector::from_iterator(3, (0..3).map(|i| 1.0 / (s * x[i] * x[i]))));
            Some((val, g, h))
        })
        .unwrap();
        assert!((x[0] - 1.0).abs() < 1e-9, "{x}");
    }
}
