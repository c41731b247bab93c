//! Linear-algebra helpers for tiny dense systems.

use nalgebra::{DMatrix, DVector};

/// Orthonormal basis (as columns) of the null space of `rows`.
pub fn null_space(n: usize, rows: &[Vec<f64>]) -> DMatrix<f64> {
    let mut span: Vec<DVector<f64>> = Vec::new();
    for r in rows {
        push_orthogonal(&mut span, DVector::from_column_slice(r));
    }
    let mut null: Vec<DVector<f64>> = Vec::new();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        let before = span.len();
        push_orthogonal(&mut span, e);
        if span.len() > before {
            null.push(span.last().unwrap().clone());
        }
    }
    if null.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null)
    }
}

/// Rank of a set of row vectors.
pub fn rank(rows: &[Vec<f64>]) -> usize {
    let mut span: Vec<DVector<f64>> = Vec::new();
    for r in rows {
        push_orthogonal(&mut span, DVector::from_column_slice(r));
    }
    span.len()
}

fn push_orthogonal(span: &mut Vec<DVector<f64>>, v: DVector<f64>) {
    let scale = v.norm();
    if scale == 0.0 {
        return;
    }
    let mut w = v / scale;
    for _ in 0..2 {
        for u in span.iter() {
            let c = u.dot(&w);
            w -= u * c;
        }
    }
    let nw = w.norm();
    if nw > 1e-10 {
        span.push(w / nw);
    }
}

/// Solves a symmetric positive (semi)definite system, falling back to LU and then a ridge.
pub fn solve_spd(h: &DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = h.clone().cholesky() {
        return Some(ch.solve(rhs));
    }
    if let Some(x) = h.clone().lu().solve(rhs) {
        if x.iter().all(|v| v.is_finite()) {
            return Some(x);
        }
    }
    let scale = h.diagonal().amax().max(1e-300);
    let mut reg = h.clone();
    for i in 0..reg.nrows() {
        reg[(i, i)] += 1e-10 * scale;
    }
    reg.cholesky().map(|ch| ch.solve(rhs))
}

/// Vertices of `{x : eq rows hold, ineq rows >= rhs}` by active-set enumeration.
/// Only suitable for small dimensions.
pub fn enumerate_vertices(n: usize, eqs: &[(Vec<f64>, f64)], ineqs: &[(Vec<f64>, f64)], tol: f64) -> Vec<Vec<f64>> {
    // Independent subset of the equality rows.
    let mut basis_rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for (r, b) in eqs {
        let mut trial: Vec<Vec<f64>> = basis_rows.iter().map(|x| x.0.clone()).collect();
        trial.push(r.clone());
        if rank(&trial) > basis_rows.len() {
            basis_rows.push((r.clone(), *b));
        }
    }
    let k = n.saturating_sub(basis_rows.len());
    let mut out: Vec<Vec<f64>> = Vec::new();
    let m = ineqs.len();
    if k > m {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut a = DMatrix::zeros(n, n);
        let mut b = DVector::zeros(n);
        for (i, (r, rhs)) in basis_rows.iter().chain(idx.iter().map(|&j| &ineqs[j])).enumerate() {
            for c in 0..n {
                a[(i, c)] = r[c];
            }
            b[i] = *rhs;
        }
        let lu = a.lu();
        if lu.determinant().abs() > 1e-12 {
            if let Some(x) = lu.solve(&b) {
                let feasible = eqs.iter().all(|(r, rhs)| (dot(r, x.as_slice()) - rhs).abs() <= tol)
                    && ineqs.iter().all(|(r, rhs)| dot(r, x.as_slice()) >= rhs - tol);
                if feasible && !out.iter().any(|v| v.iter().zip(x.iter()).all(|(p, q)| (p - q).abs() <= 1e-9)) {
                    out.push(x.iter().cloned().collect());
                }
            }
        }
        // Next combination in lexicographic order.
        if k == 0 {
            break;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < m - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn null_space_of_simplex_row() {
        let ns = null_space(3, &[vec![1.0, 1.0, 1.0]]);
        assert_eq!(ns.ncols(), 2);
        for c in 0..2 {
            assert!(ns.column(c).sum().abs() < 1e-12);
        }
    }

    #[test]
    fn simplex_vertices() {
        let n = 3;
        let eqs = vec![(vec![1.0; 3], 1.0)];
        let ineqs: Vec<(Vec<f64>, f64)> = (0..n)
            .map(|i| {
                let mut e = vec![0.0; n];
                e[i] = 1.0;
                (e, 0.0)
            })
            .collect();
        let v = enumerate_vertices(n, &eqs, &ineqs, 1e-9);
        assert_eq!(v.len(), 3);
    }
}
