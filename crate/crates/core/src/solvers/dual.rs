use nalgebra::{DMatrix, DVector};

use super::{equivalent_measure, SolveStatus, SolverOptions, BARRIER_GAP};
use crate::error::{Error, Result};
use crate::functionals::robust_v_divergence;
use crate::linalg::{null_space, solve_spd};
use crate::martingale::build_constraints;
use crate::model::{PriorSet, ScenarioModel};
use crate::utility::Utility;

#[derive(Debug, Clone)]
pub struct DualResult {
    pub lambda_hat: f64,
    /// Martingale probability vector.
    pub q_hat: Vec<f64>,
    /// Mixture weights over the prior vertices.
    pub prior_weights: Vec<f64>,
    /// The mixed prior itself.
    pub p_hat: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Dual objective at every iterate.
    pub history: Vec<f64>,
    /// Scenarios charged by q_hat (above 1e-12).
    pub support: Vec<usize>,
}

/// Feasible-set variants for the dual search over nu = lambda Q.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DualRestriction {
    None,
    /// Q >= epsilon * Q_e coordinatewise, with Q_e the reference equivalent
    /// martingale measure: the closed set of epsilon-mixtures with Q_e.
    Mixed { epsilon: f64 },
    /// Total mass fixed to lambda.
    FixedMass { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingRow {
    pub epsilon: f64,
    pub value: f64,
    /// Restricted minus unrestricted value.
    pub delta: f64,
}

/// G(nu, P) = sum_w P_w V(nu_w / P_w) + nu_w B_w.
fn objective(u: &Utility, nu: &[f64], p: &[f64], claim: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((&n, &pw), &b) in nu.iter().zip(p).zip(claim) {
        acc += u.perspective(n, pw);
        if n != 0.0 {
            acc += n * b;
        }
    }
    acc
}

struct Problem<'a> {
    utility: &'a Utility,
    claim: &'a [f64],
    verts: DMatrix<f64>,
    nu0: DVector<f64>,
    nu_basis: DMatrix<f64>,
    ineq: DMatrix<f64>,
    w0: DVector<f64>,
    w_basis: DMatrix<f64>,
}

impl Problem<'_> {
    fn point(&self, x: &DVector<f64>) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let p = self.nu_basis.ncols();
        let nu = &self.nu0 + &self.nu_basis * x.rows(0, p);
        let w = &self.w0 + &self.w_basis * x.rows(p, x.len() - p);
        let pm = &self.verts * &w;
        (nu, w, pm)
    }

    fn value(&self, nu: &DVector<f64>, pm: &DVector<f64>) -> f64 {
        objective(self.utility, nu.as_slice(), pm.as_slice(), self.claim)
    }

    fn barrier(&self, x: &DVector<f64>, tau: f64) -> Option<f64> {
        let (nu, w, pm) = self.point(x);
        let s = &self.ineq * &nu;
        if s.iter().any(|v| !(*v > 0.0)) || w.iter().any(|v| !(*v > 0.0)) {
            return None;
        }
        let h = self.value(&nu, &pm);
        if !h.is_finite() {
            return None;
        }
        Some(tau * h - s.iter().map(|v| v.ln()).sum::<f64>() - w.iter().map(|v| v.ln()).sum::<f64>())
    }

    fn newton_system(&self, x: &DVector<f64>, tau: f64) -> (DVector<f64>, DMatrix<f64>) {
        let (nu, w, pm) = self.point(x);
        let n = nu.len();
        let mut g_nu = DVector::zeros(n);
        let mut g_p = DVector::zeros(n);
        let mut h_nn = DVector::zeros(n);
        let mut h_np = DVector::zeros(n);
        let mut h_pp = DVector::zeros(n);
        for o in 0..n {
            let r = nu[o] / pm[o];
            let (vp, v2) = (self.utility.v_prime(r), self.utility.v_second(r));
            g_nu[o] = vp + self.claim[o];
            g_p[o] = self.utility.v(r) - r * vp;
            let c = v2 / pm[o];
            h_nn[o] = c;
            h_np[o] = -r * c;
            h_pp[o] = r * r * c;
        }
        let s = &self.ineq * &nu;
        let inv_s = s.map(|v| 1.0 / v);
        let inv_s2 = s.map(|v| 1.0 / (v * v));

        let grad_nu = tau * g_nu - self.ineq.tr_mul(&inv_s);
        let grad_w = tau * self.verts.tr_mul(&g_p) - w.map(|v| 1.0 / v);
        let hess_nn = DMatrix::from_diagonal(&(tau * h_nn))
            + self.ineq.transpose() * DMatrix::from_diagonal(&inv_s2) * &self.ineq;
        let hess_nw = DMatrix::from_diagonal(&(tau * h_np)) * &self.verts;
        let hess_ww = self.verts.transpose() * DMatrix::from_diagonal(&(tau * h_pp)) * &self.verts
            + DMatrix::from_diagonal(&w.map(|v| 1.0 / (v * v)));

        let (nb, wb) = (&self.nu_basis, &self.w_basis);
        let (p, q) = (nb.ncols(), wb.ncols());
        let mut g = DVector::zeros(p + q);
        g.rows_mut(0, p).copy_from(&nb.tr_mul(&grad_nu));
        g.rows_mut(p, q).copy_from(&wb.tr_mul(&grad_w));
        let mut h = DMatrix::zeros(p + q, p + q);
        h.view_mut((0, 0), (p, p)).copy_from(&(nb.transpose() * hess_nn * nb));
        let cross = nb.transpose() * hess_nw * wb;
        h.view_mut((0, p), (p, q)).copy_from(&cross);
        h.view_mut((p, 0), (q, p)).copy_from(&cross.transpose());
        h.view_mut((p, p), (q, q)).copy_from(&(wb.transpose() * hess_ww * wb));
        (g, h)
    }

    /// Path following from x = 0; returns the final point, iteration count,
    /// status and the objective at every iterate.
    fn run(&self, max_iter: usize) -> Result<(DVector<f64>, usize, SolveStatus, Vec<f64>)> {
        let dim = self.nu_basis.ncols() + self.w_basis.ncols();
        let mut x = DVector::zeros(dim);
        let (nu, _, pm) = self.point(&x);
        let h0 = self.value(&nu, &pm);
        if !h0.is_finite() {
            return Err(Error::solver("dual barrier", "no feasible measure with finite objective"));
        }
        let terms = (self.ineq.nrows() + self.w0.len()) as f64;
        let mut tau = 1.0 / (1.0 + h0.abs());
        let mut history = vec![h0];
        let mut iterations = 0;
        loop {
            for _ in 0..100 {
                if iterations >= max_iter {
                    return Ok((x, iterations, SolveStatus::IterationCap, history));
                }
                let (g, h) = self.newton_system(&x, tau);
                let Some(step) = solve_spd(&h, &(-&g)) else {
                    return Err(Error::solver("dual barrier", "singular Newton system"));
                };
                let dec = -g.dot(&step);
                if !(dec > 1e-14) {
                    break;
                }
                let f0 = self.barrier(&x, tau).unwrap_or(f64::INFINITY);
                let mut t = 1.0;
                let mut accepted = false;
                while t > 1e-16 {
                    let cand = &x + t * &step;
                    if let Some(f) = self.barrier(&cand, tau) {
                        if f <= f0 - 0.25 * t * dec {
                            x = cand;
                            accepted = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                iterations += 1;
                let (nu, _, pm) = self.point(&x);
                history.push(self.value(&nu, &pm));
                if !accepted {
                    break;
                }
            }
            if terms / tau < BARRIER_GAP {
                break;
            }
            tau *= 10.0;
        }
        Ok((x, iterations, SolveStatus::Converged, history))
    }
}

/// Minimizer over lambda > 0 of sum_w P_w V(lambda q_w / P_w) + lambda E_q[B],
/// by bisection on the derivative E_q[V'(lambda q/P) + B]. `None` when the
/// objective is infinite for every lambda.
pub fn optimal_scale(utility: &Utility, q: &[f64], p: &[f64], claim: &[f64]) -> Option<(f64, f64)> {
    let v0_finite = utility.v_at_zero().is_finite();
    if q.iter().zip(p).any(|(&qw, &pw)| (qw > 0.0 && pw == 0.0) || (qw == 0.0 && pw > 0.0 && !v0_finite)) {
        return None;
    }
    if q.iter().all(|&qw| qw <= 0.0) {
        return None;
    }
    let deriv = |l: f64| -> f64 {
        q.iter()
            .zip(p)
            .zip(claim)
            .filter(|((qw, _), _)| **qw > 0.0)
            .map(|((qw, pw), b)| qw * (utility.v_prime(l * qw / pw) + b))
            .sum()
    };
    let value = |l: f64| -> f64 {
        let nu: Vec<f64> = q.iter().map(|qw| l * qw).collect();
        objective(utility, &nu, p, claim)
    };
    let (mut lo, mut hi) = (1e-8, 1e8);
    while deriv(lo) > 0.0 && lo > 1e-300 {
        lo *= 1e-4;
    }
    while deriv(hi) < 0.0 && hi < 1e300 {
        hi *= 1e4;
    }
    for _ in 0..400 {
        if hi / lo - 1.0 < 1e-15 {
            break;
        }
        let mid = (lo * hi).sqrt();
        if deriv(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let l = 0.5 * (lo + hi);
    Some((l, value(l)))
}

pub fn solve_dual(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    opts: &SolverOptions,
) -> Result<DualResult> {
    solve_dual_restricted(model, priors, utility, opts, DualRestriction::None)
}

pub fn solve_dual_restricted(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    opts: &SolverOptions,
    restriction: DualRestriction,
) -> Result<DualResult> {
    let qe = equivalent_measure(model, priors)?;
    let n = model.scenario_count();
    let kc = priors.vertex_count();
    let qe_vec = DVector::from_column_slice(&qe);
    let constraints = build_constraints(model.market());
    let a = constraints.matrix();
    let identity = DMatrix::identity(n, n);
    let (nu0, nu_basis, ineq) = match restriction {
        DualRestriction::None => (qe_vec.clone(), null_space(&a), identity),
        DualRestriction::Mixed { epsilon } => {
            if !(0.0..1.0).contains(&epsilon) {
                return Err(Error::Domain(format!("mixing weight must lie in [0, 1), got {epsilon}")));
            }
            let ones = DMatrix::from_element(1, n, 1.0);
            (qe_vec.clone(), null_space(&a), identity - epsilon * &qe_vec * ones)
        }
        DualRestriction::FixedMass { lambda } => {
            if !(lambda > 0.0 && lambda.is_finite()) {
                return Err(Error::Domain(format!("mass must be positive and finite, got {lambda}")));
            }
            let m = a.nrows();
            let mut ab = a.clone().insert_row(m, 0.0);
            ab.row_mut(m).fill(1.0);
            (lambda * &qe_vec, null_space(&ab), identity)
        }
    };
    let verts = DMatrix::from_fn(n, kc, |o, k| priors.vertices()[k][o]);
    let ones = DMatrix::from_element(1, kc, 1.0);
    let problem = Problem {
        utility,
        claim: model.claim().payoff(),
        verts,
        nu0,
        nu_basis,
        ineq,
        w0: DVector::from_element(kc, 1.0 / kc as f64),
        w_basis: null_space(&ones),
    };
    let (x, iterations, status, mut history) = problem.run(opts.max_iter_dual)?;
    let (nu, w, pm) = problem.point(&x);
    let mut value = problem.value(&nu, &pm);
    let mass = nu.sum();
    let q_hat: Vec<f64> = nu.iter().map(|v| (v / mass).max(0.0)).collect();
    let prior_weights: Vec<f64> = w.iter().map(|v| v.max(0.0)).collect();
    let p_hat = priors.mixture(&prior_weights);
    let mut lambda_hat = mass;
    let claim = model.claim().payoff();

    if !matches!(restriction, DualRestriction::FixedMass { .. }) {
        if let Some((l, v)) = optimal_scale(utility, &q_hat, &p_hat, claim) {
            if v < value {
                lambda_hat = l;
                value = v;
                history.push(v);
            }
        }
        // the robust divergence may improve on the Newton prior mixture
        let scaled: Vec<f64> = q_hat.iter().map(|v| lambda_hat * v).collect();
        let claim_term: f64 = scaled.iter().zip(claim).map(|(a, b)| a * b).sum();
        let rv = robust_v_divergence(utility, &scaled, priors).value + claim_term;
        if rv < value {
            value = rv;
            history.push(rv);
        }
    }
    let support = (0..n).filter(|&o| q_hat[o] > 1e-12).collect();
    Ok(DualResult {
        lambda_hat,
        q_hat,
        prior_weights,
        p_hat,
        value,
        iterations,
        status,
        history,
        support,
    })
}

/// Dual values over the shrunk sets Q >= epsilon Q_e, compared with the
/// unrestricted dual.
pub fn epsilon_mixing(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    epsilons: &[f64],
    opts: &SolverOptions,
) -> Result<Vec<MixingRow>> {
    let base = solve_dual(model, priors, utility, opts)?.value;
    epsilons
        .iter()
        .map(|&epsilon| {
            let value =
                solve_dual_restricted(model, priors, utility, opts, DualRestriction::Mixed { epsilon })?.value;
            Ok(MixingRow {
                epsilon,
                value,
                delta: value - base,
            })
        })
        .collect()
}

/// inf over lambda > 0 of lambda x + h(lambda), with h(lambda) the dual
/// objective minimized over Q and P at fixed mass lambda. Equals the
/// unrestricted dual value for the claim B + x.
pub fn dual_value_with_capital(
    model: &ScenarioModel,
    priors: &PriorSet,
    utility: &Utility,
    x: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let f = |s: f64| -> Result<f64> {
        let lambda = s.exp();
        let d = solve_dual_restricted(model, priors, utility, opts, DualRestriction::FixedMass { lambda })?;
        Ok(lambda * x + d.value)
    };
    // coarse scan in log-lambda, then golden section around the best point
    let grid: Vec<f64> = (0..=48).map(|i| -12.0 + 0.5 * i as f64).collect();
    let vals = grid.iter().map(|&s| f(s)).collect::<Result<Vec<_>>>()?;
    let best = (0..vals.len()).min_by(|&i, &j| vals[i].total_cmp(&vals[j])).unwrap_or(0);
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(grid.len() - 1)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut c, mut d) = (b - g * (b - a), a + g * (b - a));
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    for _ in 0..80 {
        if b - a < 1e-10 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d)?;
        }
    }
    Ok(vals[best].min(fc).min(fd))
}
