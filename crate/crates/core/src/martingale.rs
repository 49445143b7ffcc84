//! The cone of (scaled) martingale measures on a finite tree, as the
//! nonnegative solutions of node-wise linear equalities, and LP oracles on
//! its probability slice.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::lp::{lp_solve, LpProblem, LpStatus};
use crate::model::{Market, PriorSet};

/// Optimum of the max-min LP below which no equivalent martingale measure exists.
pub const EMM_THRESHOLD: f64 = 1e-10;

/// One row per (non-terminal node, asset): sum over the node's scenarios of
/// q_omega * (S_{t+1} - S_t)(omega) = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleConstraints {
    rows: Vec<Vec<f64>>,
    nodes: Vec<(usize, usize, usize)>,
    scenario_count: usize,
}

pub fn build_constraints(market: &Market) -> MartingaleConstraints {
    let n = market.scenario_count();
    let tree = market.tree();
    let mut rows = Vec::new();
    let mut nodes = Vec::new();
    for t in 0..market.horizon() {
        for (c, cell) in tree.cells(t).iter().enumerate() {
            for i in 0..market.asset_count() {
                let mut row = vec![0.0; n];
                for &omega in cell {
                    row[omega] = market.increment(t, omega, i);
                }
                rows.push(row);
                nodes.push((t, c, i));
            }
        }
    }
    MartingaleConstraints {
        rows,
        nodes,
        scenario_count: n,
    }
}

impl MartingaleConstraints {
    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// (time, cell, asset) labelling each row.
    pub fn nodes(&self) -> &[(usize, usize, usize)] {
        &self.nodes
    }

    pub fn scenario_count(&self) -> usize {
        self.scenario_count
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.rows.len(), self.scenario_count, |i, j| self.rows[i][j])
    }

    /// sup-norm of A q.
    pub fn residual(&self, q: &[f64]) -> f64 {
        self.rows
            .iter()
            .map(|r| r.iter().zip(q).map(|(a, b)| a * b).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn is_member(&self, q: &[f64], tol: f64) -> Result<bool> {
        if q.len() != self.scenario_count {
            return Err(Error::dim(format!("q has {} entries, expected {}", q.len(), self.scenario_count)));
        }
        if q.iter().any(|v| v.is_nan() || *v < 0.0) {
            return Err(Error::Domain("cone membership is defined for nonnegative vectors".into()));
        }
        Ok(self.residual(q) <= tol)
    }

    /// Orthonormal basis (columns) of the kernel of A, optionally with the
    /// normalization row appended.
    pub fn kernel_basis(&self, with_normalization: bool) -> DMatrix<f64> {
        let mut a = self.matrix();
        if with_normalization {
            let m = a.nrows();
            a = a.insert_row(m, 0.0);
            let last = a.nrows() - 1;
            a.row_mut(last).fill(1.0);
        }
        crate::linalg::null_space(&a)
    }

    fn probability_lp(&self, cost: Vec<f64>, extra_cols: usize) -> LpProblem {
        let n = self.scenario_count;
        let width = n + extra_cols;
        let mut a_eq: Vec<Vec<f64>> = self
            .rows
            .iter()
            .map(|r| {
                let mut row = r.clone();
                row.resize(width, 0.0);
                row
            })
            .collect();
        let mut sum = vec![1.0; n];
        sum.resize(width, 0.0);
        a_eq.push(sum);
        let mut b_eq = vec![0.0; self.rows.len()];
        b_eq.push(1.0);
        LpProblem { cost, a_eq, b_eq }
    }

    /// min c.q over martingale probability vectors; `None` if there are none.
    pub fn minimize_linear(&self, c: &[f64]) -> Result<Option<(Vec<f64>, f64)>> {
        if c.len() != self.scenario_count {
            return Err(Error::dim("cost vector length differs from scenario count"));
        }
        let sol = lp_solve(&self.probability_lp(c.to_vec(), 0))?;
        Ok(match sol.status {
            LpStatus::Optimal => Some((sol.x, sol.objective)),
            _ => None,
        })
    }
}

/// Martingale probability vector maximizing its smallest coordinate, if that
/// coordinate is positive.
pub fn find_equivalent_mm(constraints: &MartingaleConstraints) -> Result<Option<Vec<f64>>> {
    let n = constraints.scenario_count;
    // columns: q (n), t, slack s (n); rows: A q = 0, sum q = 1, q_w - t - s_w = 0
    let mut cost = vec![0.0; 2 * n + 1];
    cost[n] = -1.0;
    let mut lp = constraints.probability_lp(cost, n + 1);
    for w in 0..n {
        let mut row = vec![0.0; 2 * n + 1];
        row[w] = 1.0;
        row[n] = -1.0;
        row[n + 1 + w] = -1.0;
        lp.a_eq.push(row);
        lp.b_eq.push(0.0);
    }
    let sol = lp_solve(&lp)?;
    if sol.status != LpStatus::Optimal || sol.x[n] <= EMM_THRESHOLD {
        return Ok(None);
    }
    let mut q = sol.x[..n].to_vec();
    let s: f64 = q.iter().sum();
    q.iter_mut().for_each(|v| *v /= s);
    Ok(Some(q))
}

/// Membership of a martingale probability `q` in the dual domain: some
/// positive multiple has finite robust divergence. With V finite on
/// (0, inf) this reduces to supp(q) within the union of vertex supports.
pub fn in_m_v(constraints: &MartingaleConstraints, priors: &PriorSet, q: &[f64]) -> Result<bool> {
    if !constraints.is_member(q, 1e-8)? {
        return Err(Error::Domain("q is not in the martingale cone".into()));
    }
    if priors.scenario_count() != q.len() {
        return Err(Error::dim("priors and q live on different scenario spaces"));
    }
    Ok(q.iter().enumerate().all(|(w, &v)| v == 0.0 || priors.covers(w)))
}
