//! Dense two-phase simplex for standard-form linear programs
//!
//! ```text
//! minimize c.x  subject to  A x = b,  x >= 0
//! ```
//!
//! Bland's rule is used for both the entering and the leaving variable, so
//! the method cannot cycle and the returned vertex is deterministic.

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const COST_TOL: f64 = 1e-11;
/// Phase-one residual above which the problem is declared infeasible.
pub const FEASIBILITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub cost: Vec<f64>,
    pub a_eq: Vec<Vec<f64>>,
    pub b_eq: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: Vec<f64>,
    pub objective: f64,
    pub pivots: usize,
}

struct Tableau {
    // rows 0..m are constraints, each of width cols + 1 (last entry is the rhs)
    rows: Vec<Vec<f64>>,
    basis: Vec<usize>,
    cols: usize,
}

impl Tableau {
    fn pivot(&mut self, r: usize, c: usize) {
        let p = self.rows[r][c];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[c];
            if f != 0.0 {
                for (v, pv) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                row[c] = 0.0;
            }
        }
        self.basis[r] = c;
    }

    fn reduced_costs(&self, cost: &[f64], allowed: usize) -> Vec<f64> {
        let mut d: Vec<f64> = cost[..allowed].to_vec();
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b];
            if cb != 0.0 {
                for (dj, aj) in d.iter_mut().zip(row) {
                    *dj -= cb * aj;
                }
            }
        }
        d
    }

    /// Runs simplex iterations on columns `0..allowed`. Returns false if unbounded.
    fn optimize(&mut self, cost: &[f64], allowed: usize, pivots: &mut usize, cap: usize) -> Result<bool> {
        loop {
            if *pivots >= cap {
                return Err(Error::solver("simplex", format!("pivot cap {cap} reached")));
            }
            let d = self.reduced_costs(cost, allowed);
            let Some(enter) = (0..allowed).find(|&j| d[j] < -COST_TOL && !self.basis.contains(&j)) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for (i, row) in self.rows.iter().enumerate() {
                let a = row[enter];
                if a > PIVOT_TOL {
                    let ratio = row[self.cols] / a;
                    leave = match leave {
                        None => Some((i, ratio)),
                        Some((li, lr)) => {
                            if ratio < lr - 1e-12 || (ratio <= lr + 1e-12 && self.basis[i] < self.basis[li]) {
                                Some((i, ratio))
                            } else {
                                Some((li, lr))
                            }
                        }
                    };
                }
            }
            let Some((r, _)) = leave else {
                return Ok(false);
            };
            self.pivot(r, enter);
            *pivots += 1;
        }
    }
}

pub fn lp_solve(problem: &LpProblem) -> Result<LpSolution> {
    let n = problem.cost.len();
    let m = problem.a_eq.len();
    if problem.b_eq.len() != m {
        return Err(Error::dim(format!("{m} constraint rows but {} right-hand sides", problem.b_eq.len())));
    }
    if let Some(i) = problem.a_eq.iter().position(|r| r.len() != n) {
        return Err(Error::dim(format!("constraint row {i} has wrong length, expected {n}")));
    }
    let finite = problem.cost.iter().chain(&problem.b_eq).chain(problem.a_eq.iter().flatten()).all(|v| v.is_finite());
    if !finite {
        return Err(Error::Domain("linear program data must be finite".into()));
    }

    // phase one: artificial columns n..n+m
    let cols = n + m;
    let rows = problem
        .a_eq
        .iter()
        .zip(&problem.b_eq)
        .enumerate()
        .map(|(i, (a, &b))| {
            let s = if b < 0.0 { -1.0 } else { 1.0 };
            let mut row: Vec<f64> = a.iter().map(|v| s * v).collect();
            row.extend((0..m).map(|j| if j == i { 1.0 } else { 0.0 }));
            row.push(s * b);
            row
        })
        .collect();
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        cols,
    };
    let cap = 50_000 + 50 * (n + m);
    let mut pivots = 0;
    let mut phase1_cost = vec![0.0; cols];
    phase1_cost[n..].iter_mut().for_each(|c| *c = 1.0);
    tab.optimize(&phase1_cost, cols, &mut pivots, cap)?;
    let infeasibility: f64 = tab
        .rows
        .iter()
        .zip(&tab.basis)
        .filter(|(_, &b)| b >= n)
        .map(|(r, _)| r[cols])
        .sum();
    if infeasibility > FEASIBILITY_TOL {
        return Ok(LpSolution {
            status: LpStatus::Infeasible,
            x: vec![0.0; n],
            objective: f64::NAN,
            pivots,
        });
    }

    // drive remaining artificials out of the basis; rows that cannot pivot are redundant
    let mut i = 0;
    while i < tab.rows.len() {
        if tab.basis[i] >= n {
            match (0..n).find(|&j| tab.rows[i][j].abs() > 1e-9) {
                Some(j) => {
                    tab.pivot(i, j);
                    pivots += 1;
                    i += 1;
                }
                None => {
                    tab.rows.remove(i);
                    tab.basis.remove(i);
                }
            }
        } else {
            i += 1;
        }
    }

    let mut cost = problem.cost.clone();
    cost.extend(std::iter::repeat_n(0.0, m));
    let bounded = tab.optimize(&cost, n, &mut pivots, cap)?;
    let mut x = vec![0.0; n];
    for (row, &b) in tab.rows.iter().zip(&tab.basis) {
        if b < n {
            x[b] = row[cols].max(0.0);
        }
    }
    if !bounded {
        return Ok(LpSolution {
            status: LpStatus::Unbounded,
            x,
            objective: f64::NEG_INFINITY,
            pivots,
        });
    }
    let objective = problem.cost.iter().zip(&x).map(|(c, v)| c * v).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        x,
        objective,
        pivots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_corner() {
        let p = LpProblem {
            cost: vec![-1.0, 0.0],
            a_eq: vec![vec![1.0, 1.0]],
            b_eq: vec![1.0],
        };
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert_eq!(s.x, vec![1.0, 0.0]);
        assert_eq!(s.objective, -1.0);
    }

    #[test]
    fn binomial_martingale_slice() {
        // q1 - q2/2 = 0, q1 + q2 = 1; min q1
        let p = LpProblem {
            cost: vec![1.0, 0.0],
            a_eq: vec![vec![1.0, -0.5], vec![1.0, 1.0]],
            b_eq: vec![0.0, 1.0],
        };
        let s = lp_solve(&p).unwrap();
        assert!((s.objective - 1.0 / 3.0).abs() < 1e-12);
        // duplicated rows leave the optimum unchanged
        let dup = LpProblem {
            cost: p.cost.clone(),
            a_eq: vec![vec![1.0, -0.5], vec![1.0, 1.0], vec![2.0, -1.0], vec![1.0, 1.0]],
            b_eq: vec![0.0, 1.0, 0.0, 1.0],
        };
        let d = lp_solve(&dup).unwrap();
        assert_eq!(d.status, LpStatus::Optimal);
        assert!((d.objective - s.objective).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let inf = LpProblem {
            cost: vec![0.0, 0.0],
            a_eq: vec![vec![1.0, 1.0], vec![1.0, 1.0]],
            b_eq: vec![1.0, 2.0],
        };
        assert_eq!(lp_solve(&inf).unwrap().status, LpStatus::Infeasible);
        let neg = LpProblem {
            cost: vec![0.0],
            a_eq: vec![vec![1.0]],
            b_eq: vec![-1.0],
        };
        assert_eq!(lp_solve(&neg).unwrap().status, LpStatus::Infeasible);
        let unb = LpProblem {
            cost: vec![-1.0, 0.0],
            a_eq: vec![vec![1.0, -1.0]],
            b_eq: vec![0.0],
        };
        assert_eq!(lp_solve(&unb).unwrap().status, LpStatus::Unbounded);
    }

    #[test]
    fn malformed_input() {
        let p = LpProblem {
            cost: vec![1.0, 2.0],
            a_eq: vec![vec![1.0]],
            b_eq: vec![1.0],
        };
        assert!(lp_solve(&p).is_err());
    }

    #[test]
    fn degenerate_transportation() {
        // 2x2 transportation with equal supplies and demands, highly degenerate
        let p = LpProblem {
            cost: vec![1.0, 2.0, 3.0, 1.0],
            a_eq: vec![
                vec![1.0, 1.0, 0.0, 0.0],
                vec![0.0, 0.0, 1.0, 1.0],
                vec![1.0, 0.0, 1.0, 0.0],
                vec![0.0, 1.0, 0.0, 1.0],
            ],
            b_eq: vec![1.0, 1.0, 1.0, 1.0],
        };
        let s = lp_solve(&p).unwrap();
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 2.0).abs() < 1e-12);
    }
}
