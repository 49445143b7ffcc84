use nalgebra::{DMatrix, DVector};

use super::{equivalent_measure, PrimalMethod, SolveStatus, SolverOptions, BARRIER_GAP};
use crate::error::{Error, Result};
use crate::linalg::{row_space, solve_spd};
use crate::model::{worst_case_expected_utility, PriorSet, ScenarioModel, Strategy};
use crate::utility::Utility;

#[derive(Debug, Clone)]
pub struct PrimalResult {
    pub theta_hat: Strategy,
    pub value: f64,
    pub iterations: usize,
    /// Prior vertices whose expected utility is within 1e-7 of the minimum.
    pub active_vertices: Vec<usize>,
    pub status: SolveStatus,
    /// Worst-case expected utility at every iterate.
    pub history: Vec<f64>,
}

/// Trading problem in reduced coordinates: theta = basis * phi, where the
/// basis spans the row space of the gain matrix. Directions in its kernel
/// never change terminal wealth.
struct Reduced<'a> {
    basis: DMatrix<f64>,
    gains: DMatrix<f64>,
    claim: &'a [f64],
    verts: &'a [Vec<f64>],
    utility: &'a Utility,
}

impl Reduced<'_> {
    fn dim(&self) -> usize {
        self.basis.ncols()
    }

    fn wealth(&self, phi: &DVector<f64>) -> Vec<f64> {
        let g = &self.gains * phi;
        g.iter().zip(self.claim).map(|(a, b)| a + b).collect()
    }

    fn values(&self, wealth: &[f64]) -> Vec<f64> {
        let u: Vec<f64> = wealth.iter().map(|&x| self.utility.u(x)).collect();
        self.verts
            .iter()
            .map(|p| p.iter().zip(&u).filter(|(pi, _)| **pi != 0.0).map(|(pi, ui)| pi * ui).sum())
            .collect()
    }

    fn grad(&self, k: usize, wealth: &[f64]) -> DVector<f64> {
        let w = DVector::from_iterator(
            wealth.len(),
            wealth.iter().zip(&self.verts[k]).map(|(&x, p)| p * self.utility.u_prime(x)),
        );
        self.gains.tr_mul(&w)
    }

    fn hess(&self, k: usize, wealth: &[f64]) -> DMatrix<f64> {
        let r = self.dim();
        let mut h = DMatrix::zeros(r, r);
        for (omega, &x) in wealth.iter().enumerate() {
            let c = self.verts[k][omega] * self.utility.u_second(x);
            if c != 0.0 {
                let row = self.gains.row(omega);
                h += c * row.transpose() * row;
            }
        }
        h
    }
}

pub fn solve_primal(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    opts: &SolverOptions,
) -> Result<PrimalResult> {
    equivalent_measure(model, priors)?;
    let market = model.market();
    let basis = row_space(&market.gain_matrix());
    let red = Reduced {
        gains: market.gain_matrix() * &basis,
        basis,
        claim: model.claim().payoff(),
        verts: priors.vertices(),
        utility,
    };
    let (phi, iterations, status, history) = match opts.primal_method {
        PrimalMethod::Barrier => barrier(&red, opts.max_iter_primal)?,
        PrimalMethod::Supergradient => supergradient(&red, opts),
    };
    let flat = &red.basis * &phi;
    let theta_hat = Strategy::from_flat(market, flat.as_slice())?;
    let value = worst_case_expected_utility(model, priors, utility, &theta_hat)?;
    let vals = red.values(&red.wealth(&phi));
    let thr = value + 1e-7 * value.abs().max(1.0);
    let active_vertices = (0..vals.len()).filter(|&k| vals[k] <= thr).collect();
    Ok(PrimalResult {
        theta_hat,
        value,
        iterations,
        active_vertices,
        status,
        history,
    })
}

fn min_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Epigraph form: maximize s subject to f_k(phi) >= s, solved by following
/// the central path of  -tau s - sum_k ln(f_k(phi) - s).
fn barrier(red: &Reduced, max_iter: usize) -> Result<(DVector<f64>, usize, SolveStatus, Vec<f64>)> {
    let r = red.dim();
    let kc = red.verts.len();
    let mut phi = DVector::zeros(r);
    let vals0 = red.values(&red.wealth(&phi));
    if vals0.iter().any(|v| !v.is_finite()) {
        return Err(Error::solver("primal barrier", "non-finite expected utility at the zero strategy"));
    }
    let mut s = min_of(&vals0) - 1.0 - 0.1 * min_of(&vals0).abs();
    let mut tau = 1.0 / (1.0 + min_of(&vals0).abs());
    let mut history = vec![min_of(&vals0)];
    let mut iterations = 0;

    let objective = |phi: &DVector<f64>, s: f64, tau: f64| -> Option<f64> {
        let vals = red.values(&red.wealth(phi));
        let mut acc = -tau * s;
        for v in vals {
            let h = v - s;
            if !(h > 0.0) || !h.is_finite() {
                return None;
            }
            acc -= h.ln();
        }
        Some(acc)
    };

    loop {
        for _ in 0..100 {
            if iterations >= max_iter {
                return Ok((phi, iterations, SolveStatus::IterationCap, history));
            }
            let wealth = red.wealth(&phi);
            let vals = red.values(&wealth);
            let mut g = DVector::zeros(r + 1);
            let mut h = DMatrix::zeros(r + 1, r + 1);
            g[r] = -tau;
            for (k, &v) in vals.iter().enumerate().take(kc) {
                let gap = v - s;
                let mut a = DVector::zeros(r + 1);
                a.rows_mut(0, r).copy_from(&red.grad(k, &wealth));
                a[r] = -1.0;
                g -= &a / gap;
                h += &a * a.transpose() / (gap * gap);
                let hk = red.hess(k, &wealth);
                let mut block = h.view_mut((0, 0), (r, r));
                block -= hk / gap;
            }
            let Some(step) = solve_spd(&h, &(-&g)) else {
                return Err(Error::solver("primal barrier", "singular Newton system"));
            };
            let dec = -g.dot(&step);
            if dec <= 1e-14 {
                break;
            }
            let f0 = objective(&phi, s, tau).unwrap_or(f64::INFINITY);
            let mut t = 1.0;
            let mut accepted = false;
            while t > 1e-16 {
                let cand = &phi + t * step.rows(0, r);
                let cs = s + t * step[r];
                if let Some(f) = objective(&cand, cs, tau) {
                    if f <= f0 - 0.25 * t * dec {
                        phi = cand;
                        s = cs;
                        accepted = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            iterations += 1;
            history.push(min_of(&red.values(&red.wealth(&phi))));
            if !accepted {
                break;
            }
        }
        if kc as f64 / tau < BARRIER_GAP {
            break;
        }
        tau *= 10.0;
    }
    Ok((phi, iterations, SolveStatus::Converged, history))
}

/// Supergradient ascent on psi(phi) = min_k f_k(phi). The supergradient is
/// taken from the lowest-indexed active vertex. Polyak steps use the dual
/// bound when one is supplied, diminishing steps otherwise.
fn supergradient(red: &Reduced, opts: &SolverOptions) -> (DVector<f64>, usize, SolveStatus, Vec<f64>) {
    let r = red.dim();
    let mut phi = DVector::zeros(r);
    let mut avg = DVector::zeros(r);
    let mut best_phi = phi.clone();
    let mut best = f64::NEG_INFINITY;
    let mut history = Vec::new();
    let mut status = SolveStatus::IterationCap;
    let mut iterations = 0;
    for it in 0..opts.max_iter_primal {
        iterations = it + 1;
        let wealth = red.wealth(&phi);
        let vals = red.values(&wealth);
        let psi = min_of(&vals);
        history.push(psi);
        if psi > best {
            best = psi;
            best_phi = phi.clone();
        }
        avg = avg * (it as f64 / (it + 1) as f64) + &phi / (it + 1) as f64;
        let psi_avg = min_of(&red.values(&red.wealth(&avg)));
        if psi_avg > best {
            best = psi_avg;
            best_phi = avg.clone();
        }
        if opts.dual_bound.is_some_and(|d| d - best <= opts.tol) {
            status = SolveStatus::Converged;
            break;
        }
        let k = (0..vals.len()).find(|&k| vals[k] <= psi + 1e-12).unwrap_or(0);
        let g = red.grad(k, &wealth);
        let gn = g.norm_squared();
        if gn == 0.0 {
            status = SolveStatus::Converged;
            break;
        }
        let step = match opts.dual_bound {
            Some(d) => (d - psi).max(opts.tol) / gn,
            None => 1.0 / (((it + 1) as f64).sqrt() * gn.sqrt()),
        };
        phi += step * g;
    }
    (best_phi, iterations, status, history)
}
