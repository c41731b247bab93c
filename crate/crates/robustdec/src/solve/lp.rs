//! Dense two-phase tableau simplex with Bland's rule.
//!
//! Problems have the form `min c.x` subject to row constraints and `x >= 0`.
//! Entering and leaving choices always take the lowest eligible index, so
//! results are deterministic and cycling cannot occur.

const PIVOT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 100_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Clone, Debug)]
pub struct LinearProgram {
    n: usize,
    objective: Vec<f64>,
    rows: Vec<(Vec<f64>, Cmp, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, value: f64 },
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    pub fn optimal(self) -> Option<(Vec<f64>, f64)> {
        match self {
            LpOutcome::Optimal { x, value } => Some((x, value)),
            _ => None,
        }
    }
}

impl LinearProgram {
    pub fn new(objective: Vec<f64>) -> Self {
        Self { n: objective.len(), objective, rows: Vec::new() }
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, cmp: Cmp, rhs: f64) -> &mut Self {
        assert_eq!(coeffs.len(), self.n, "constraint width");
        self.rows.push((coeffs, cmp, rhs));
        self
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run(self)
    }
}

struct Tableau {
    /// m rows, each `ncol + 1` wide (last entry is the right-hand side).
    a: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncol: usize,
    n_struct: usize,
    artificial_start: usize,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let m = lp.rows.len();
        let n = lp.n;
        // Normalize right-hand sides to be nonnegative.
        let rows: Vec<(Vec<f64>, Cmp, f64)> = lp
            .rows
            .iter()
            .map(|(c, cmp, b)| {
                if *b < 0.0 {
                    let flipped = match cmp {
                        Cmp::Le => Cmp::Ge,
                        Cmp::Ge => Cmp::Le,
                        Cmp::Eq => Cmp::Eq,
                    };
                    (c.iter().map(|v| -v).collect(), flipped, -b)
                } else {
                    (c.clone(), *cmp, *b)
                }
            })
            .collect();
        let n_slack = rows.iter().filter(|r| r.1 != Cmp::Eq).count();
        let n_art = rows.iter().filter(|r| r.1 != Cmp::Le).count();
        let artificial_start = n + n_slack;
        let ncol = artificial_start + n_art;
        let mut a = vec![vec![0.0; ncol + 1]; m];
        let mut basis = vec![0; m];
        let (mut slack, mut art) = (n, artificial_start);
        for (i, (c, cmp, b)) in rows.iter().enumerate() {
            a[i][..n].copy_from_slice(c);
            a[i][ncol] = *b;
            match cmp {
                Cmp::Le => {
                    a[i][slack] = 1.0;
                    basis[i] = slack;
                    slack += 1;
                }
                Cmp::Ge => {
                    a[i][slack] = -1.0;
                    slack += 1;
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
                Cmp::Eq => {
                    a[i][art] = 1.0;
                    basis[i] = art;
                    art += 1;
                }
            }
        }
        Self { a, basis, ncol, n_struct: n, artificial_start }
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let mut z = cost.to_vec();
        z.push(0.0);
        for (i, &b) in self.basis.iter().enumerate() {
            let cb = cost[b];
            if cb != 0.0 {
                for (zj, aij) in z.iter_mut().zip(&self.a[i]) {
                    *zj -= cb * aij;
                }
            }
        }
        z
    }

    fn pivot(&mut self, z: &mut [f64], r: usize, c: usize) {
        let piv = self.a[r][c];
        for v in self.a[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.a[r].clone();
        for (i, row) in self.a.iter_mut().enumerate() {
            if i != r {
                let f = row[c];
                if f != 0.0 {
                    for (v, p) in row.iter_mut().zip(&prow) {
                        *v -= f * p;
                    }
                    row[c] = 0.0;
                }
            }
        }
        let f = z[c];
        if f != 0.0 {
            for (v, p) in z.iter_mut().zip(&prow) {
                *v -= f * p;
            }
            z[c] = 0.0;
        }
        self.basis[r] = c;
    }

    /// Bland-rule simplex over columns `< allowed`. Returns false when unbounded.
    fn optimize(&mut self, z: &mut [f64], allowed: usize) -> bool {
        for _ in 0..MAX_PIVOTS {
            let Some(c) = (0..allowed).find(|&j| z[j] < -PIVOT_TOL) else {
                return true;
            };
            let mut best: Option<(usize, f64)> = None;
            for (i, row) in self.a.iter().enumerate() {
                if row[c] > PIVOT_TOL {
                    let ratio = row[self.ncol] / row[c];
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-12
                                || (ratio <= br + 1e-12 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                None => return false,
                Some((r, _)) => self.pivot(z, r, c),
            }
        }
        true
    }

    fn run(mut self, lp: &LinearProgram) -> LpOutcome {
        let m = self.a.len();
        // Phase 1: minimize the sum of artificial variables.
        if self.artificial_start < self.ncol {
            let mut cost = vec![0.0; self.ncol];
            for c in cost.iter_mut().skip(self.artificial_start) {
                *c = 1.0;
            }
            let mut z = self.reduced_costs(&cost);
            self.optimize(&mut z, self.ncol);
            let infeas: f64 = (0..m)
                .filter(|&i| self.basis[i] >= self.artificial_start)
                .map(|i| self.a[i][self.ncol])
                .sum();
            if infeas > 1e-8 {
                return LpOutcome::Infeasible;
            }
            // Drive zero-level artificials out of the basis; drop redundant rows.
            let mut i = 0;
            while i < self.a.len() {
                if self.basis[i] >= self.artificial_start {
                    let col = (0..self.artificial_start).find(|&j| self.a[i][j].abs() > PIVOT_TOL);
                    match col {
                        Some(c) => {
                            let mut dummy = vec![0.0; self.ncol + 1];
                            self.pivot(&mut dummy, i, c);
                            i += 1;
                        }
                        None => {
                            self.a.remove(i);
                            self.basis.remove(i);
                        }
                    }
                } else {
                    i += 1;
                }
            }
        }
        // Phase 2 on structural and slack columns only.
        let mut cost = vec![0.0; self.ncol];
        cost[..self.n_struct].copy_from_slice(&lp.objective);
        let mut z = self.reduced_costs(&cost);
        for v in z.iter_mut().take(self.ncol).skip(self.artificial_start) {
            *v = 0.0;
        }
        if !self.optimize(&mut z, self.artificial_start) {
            return LpOutcome::Unbounded;
        }
        let mut x = vec![0.0; self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.a[i][self.ncol].max(0.0);
            }
        }
        let value = x.iter().zip(&lp.objective).map(|(a, b)| a * b).sum();
        LpOutcome::Optimal { x, value }
    }
}
