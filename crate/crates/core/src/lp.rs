//! Dense two-phase simplex for small linear programs.
//!
//! Solves `max cᵀx s.t. a_i·x {≤,=,≥} b_i, x ≥ 0` on a full tableau with
//! Bland's rule, which is ample for the tens of variables and constraints
//! that arise in time-sharing problems. Optimal duals are read off the
//! final tableau.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, relation: Relation, rhs: f64) -> Self {
        Constraint {
            coeffs,
            relation,
            rhs,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One dual value per constraint, in the sign convention of
    /// `max cᵀx`: nonnegative for `≤` rows, nonpositive for `≥` rows.
    pub duals: Vec<f64>,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    ncols: usize,
}

impl Tableau {
    fn rhs(&self, i: usize) -> f64 {
        self.rows[i][self.ncols]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let piv = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= piv;
        }
        let prow = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, p) in row.iter_mut().zip(&prow) {
                    *v -= f * p;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_cost(&self, cost: &[f64], j: usize) -> f64 {
        cost[j]
            - self
                .basis
                .iter()
                .enumerate()
                .map(|(i, &b)| cost[b] * self.rows[i][j])
                .sum::<f64>()
    }

    fn objective(&self, cost: &[f64]) -> f64 {
        self.basis
            .iter()
            .enumerate()
            .map(|(i, &b)| cost[b] * self.rhs(i))
            .sum()
    }

    /// Primal simplex with Bland's rule over the columns marked `allowed`.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<()> {
        let max_iter = 50 * (self.ncols + self.rows.len()) + 1000;
        for _ in 0..max_iter {
            let entering = (0..self.ncols)
                .find(|&j| allowed[j] && self.reduced_cost(cost, j) > PIVOT_EPS);
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows.len() {
                let a = self.rows[i][c];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(i) / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-15
                                || (ratio <= lr + 1e-15 && self.basis[i] < self.basis[li])
                            {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Err(Error::domain("linear program is unbounded"));
            };
            self.pivot(r, c);
        }
        Err(Error::domain("simplex iteration limit reached"))
    }
}

/// Maximizes `cᵀx` subject to `constraints` and `x ≥ 0`.
pub fn maximize(c: &[f64], constraints: &[Constraint]) -> Result<LpSolution> {
    let n = c.len();
    let m = constraints.len();
    for (i, con) in constraints.iter().enumerate() {
        if con.coeffs.len() != n {
            return Err(Error::domain(format!(
                "constraint {i} has {} coefficients, expected {n}",
                con.coeffs.len()
            )));
        }
        if !con.rhs.is_finite() || con.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain(format!("constraint {i} has non-finite data")));
        }
    }

    // Normalize to nonnegative right-hand sides.
    let mut sign = vec![1.0; m];
    let mut rel = Vec::with_capacity(m);
    for (i, con) in constraints.iter().enumerate() {
        if con.rhs < 0.0 {
            sign[i] = -1.0;
            rel.push(match con.relation {
                Relation::Le => Relation::Ge,
                Relation::Ge => Relation::Le,
                Relation::Eq => Relation::Eq,
            });
        } else {
            rel.push(con.relation);
        }
    }

    let n_slack = rel.iter().filter(|r| **r != Relation::Eq).count();
    let n_art = rel.iter().filter(|r| **r != Relation::Le).count();
    let ncols = n + n_slack + n_art;
    let mut rows = vec![vec![0.0; ncols + 1]; m];
    let mut basis = vec![0; m];
    let mut identity_col = vec![0; m];
    let mut is_art = vec![false; ncols];
    let (mut s, mut a) = (n, n + n_slack);
    for i in 0..m {
        for j in 0..n {
            rows[i][j] = sign[i] * constraints[i].coeffs[j];
        }
        rows[i][ncols] = sign[i] * constraints[i].rhs;
        match rel[i] {
            Relation::Le => {
                rows[i][s] = 1.0;
                basis[i] = s;
                identity_col[i] = s;
                s += 1;
            }
            Relation::Ge => {
                rows[i][s] = -1.0;
                s += 1;
                rows[i][a] = 1.0;
                basis[i] = a;
                identity_col[i] = a;
                is_art[a] = true;
                a += 1;
            }
            Relation::Eq => {
                rows[i][a] = 1.0;
                basis[i] = a;
                identity_col[i] = a;
                is_art[a] = true;
                a += 1;
            }
        }
    }
    let mut tab = Tableau { rows, basis, ncols };

    if n_art > 0 {
        let phase1: Vec<f64> = (0..ncols).map(|j| if is_art[j] { -1.0 } else { 0.0 }).collect();
        tab.optimize(&phase1, &vec![true; ncols])?;
        let scale = 1.0 + constraints.iter().map(|c| c.rhs.abs()).fold(0.0, f64::max);
        if tab.objective(&phase1) < -1e-9 * scale {
            return Err(Error::domain("linear program is infeasible"));
        }
        // Drive zero-valued artificials out of the basis where possible.
        for i in 0..m {
            if is_art[tab.basis[i]] {
                if let Some(j) = (0..ncols).find(|&j| !is_art[j] && tab.rows[i][j].abs() > 1e-9) {
                    tab.pivot(i, j);
                }
            }
        }
    }

    let mut cost = vec![0.0; ncols];
    cost[..n].copy_from_slice(c);
    let allowed: Vec<bool> = (0..ncols).map(|j| !is_art[j]).collect();
    tab.optimize(&cost, &allowed)?;

    let mut x = vec![0.0; n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            x[b] = tab.rhs(i).max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    let duals = (0..m)
        .map(|i| {
            let col = identity_col[i];
            let y: f64 = tab
                .basis
                .iter()
                .enumerate()
                .map(|(r, &b)| cost[b] * tab.rows[r][col])
                .sum();
            sign[i] * y
        })
        .collect();
    Ok(LpSolution {
        x,
        objective,
        duals,
    })
}
